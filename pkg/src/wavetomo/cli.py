"""Command-line experiment runner."""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, WavetomoError
from .io import sha256, write_csv, write_pgm, write_wtf

SUBCOMMANDS = ("synth", "forward", "probes", "carleman", "identity", "reconstruct-a", "reconstruct-q",
               "null-test", "report")
EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 2


class Run:
    """Output directory, resolved config and the tolerance failures of one invocation."""

    def __init__(self, cfg, out, jobs, scale, debug_normalization=1.0):
        self.cfg = cfg
        self.out = Path(out)
        self.jobs = jobs
        self.scale = scale
        self.debug_normalization = debug_normalization
        self.failures = []
        self.timings = {}
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name):
        return self.out / name

    def tolerance(self, name, value, limit):
        limit = limit * self.scale
        ok = bool(value <= limit)
        if not ok:
            self.failures.append(f"{name}: {value:.6g} > {limit:.6g}")
        return ok

    def field(self, name, f, meta=None):
        g = self.grid
        write_wtf(self.path(name + ".wtf"), f, g.T, g.lengths, g.extension_radius, meta)
        vals = np.real(np.asarray(f.values))
        if vals.ndim == 3:
            write_pgm(self.path(name + "_mid.pgm"), vals[vals.shape[0] // 2])

    @property
    def grid(self):
        if not hasattr(self, "_grid"):
            self._grid = self.cfg.grid()
        return self._grid

    def phantom(self, which):
        return self.cfg.phantom(which, self.grid)


# ------------------------------------------------------------ subcommands

def cmd_synth(run: Run):
    for which in ("a1", "a2", "q1", "q2"):
        c = run.phantom(which)
        run.field(which, c.on_Q(), {"descriptor": dict(c.descriptor), "p": _num(c.p), "alpha": c.alpha})


def cmd_forward(run: Run):
    from .solver import boundary_operator
    g = run.grid
    geom = run.cfg.geometry()
    geom.check()
    # a smooth initial pulse centred in Omega; homogeneous Dirichlet data
    mesh = g.spatial_box.mesh()
    r2 = sum((m - L / 2) ** 2 for m, L in zip(mesh, g.lengths)) / (0.2 * min(g.lengths)) ** 2
    v0 = np.where(r2 < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
    sets = {}
    for k in ("1", "2"):
        a, q = run.phantom("a" + k), run.phantom("q" + k)
        ms = boundary_operator(g, a, q, None, v0, None, geom)
        ms.save(run.path(f"measurement_{k}"), {"pair": k})
        sets[k] = ms
    du, dflux = sets["1"].difference(sets["2"])
    write_csv(run.path("forward_difference.csv"), ("quantity", "relative_difference"),
              [("u_T", du), ("neumann_V", dflux)])


def cmd_probes(run: Run):
    from .amplitudes import build_b2
    from .coeffs import mollify
    from .grid import LightFrame
    from .probes import build_probe, remainder_decay_report
    g = run.grid
    p = run.cfg["probes"]
    a, q = run.phantom("a2"), run.phantom("q2")
    frame = LightFrame(run.cfg.omegas()[0])
    probes = []
    for lam in p["go_lambdas"]:
        am = mollify(a, lam) if np.any(a.values) else None
        b = build_b2(am, frame, lam, g)
        # the conjugated solve has no exponential scale, so only the hard guard applies
        cap = None if p["go_method"] == "conjugated" else p["lambda_cap"]
        probes.append(build_probe(g, a, q, b, lam, "grow", cap, method=p["go_method"]))
    rep = remainder_decay_report(probes)
    write_csv(run.path("probes.csv"), rep.header, rep.rows)
    run.path("probes.txt").write_text(rep.summary() + "\n")
    alpha = min(a.alpha, 1.0)
    run.tolerance("go_remainder_slope", rep.slope_lam_w, (3 - alpha) / 3 + 0.2)
    if rep.inconclusive:
        run.failures.append("go_remainder: discretization residual dominates")


def cmd_carleman(run: Run):
    from .carleman import CarlemanReport, c1a_sweep, compact_test_function, verify_H_minus1
    g = run.grid
    c = run.cfg["carleman"]
    seed0 = run.cfg["run"]["seed"]
    a, q = run.phantom("a1"), run.phantom("q1")
    rep = c1a_sweep(g, list(range(seed0, seed0 + c["seeds"])), c["lambdas"], a, q, c["omega"], run.jobs,
                    run.cfg["probes"]["lambda_cap"])
    rep.to_csv(run.path("carleman_c1a.csv"))
    _, stab = rep.best_window()
    run.tolerance("c1a_window_max_over_min", stab, 2.0)
    box = g.extension_box(0.25)
    rows = []
    for seed in range(seed0, seed0 + c["seeds"]):
        v = compact_test_function(seed, box, g.center, 0.45 * min((g.T,) + tuple(g.lengths)))
        rows += verify_H_minus1(v, a, c["car2_lambdas"], "car2", c["omega"], seed=seed).rows
    car2 = CarlemanReport("car2_H-1", rows)
    car2.to_csv(run.path("carleman_car2.csv"))
    _, worst = car2.best_window()
    run.tolerance("car2_max_over_min", worst, 2.0)
    run.path("carleman.txt").write_text(rep.summary() + "\n\n" + car2.summary() + "\n")


def _samples(run: Run, which):
    from .reconstruct import identity_samples
    g = run.grid
    lam = run.cfg["probes"]["lambda"][0]
    a1, a2 = run.phantom("a1"), run.phantom("a2")
    q1 = run.phantom("q1") if which != "a" else None
    q2 = run.phantom("q2") if which != "a" else None
    if which == "q":
        a1 = a2 = None if not np.any(a1.values) else a1
        if a2 is not None:
            a2 = a1
    t0 = time.perf_counter()
    S = identity_samples(g, a1, a2, q1, q2, run.cfg.frames(), lam, normalize=(which != "q"), jobs=run.jobs)
    run.timings["identity_samples"] = time.perf_counter() - t0
    return S


def cmd_identity(run: Run):
    S = _samples(run, "both")
    S.to_csv(run.path("identity.csv"))


def _center(run):
    c = run.cfg["probes"]["center"]
    return run.grid.center if c is None else c


def cmd_reconstruct_a(run: Run):
    from .reconstruct import invert_damping
    S = _samples(run, "a")
    S.to_csv(run.path("identity_a.csv"))
    truth = run.phantom("a2") - run.phantom("a1")
    rec, rep = invert_damping(S, run.grid, _center(run), truth, normalization=run.debug_normalization,
                              continuation=run.cfg["run"]["continuation"])
    run.field("a_rec", rec)
    run.path("report_a.txt").write_text(rep.text())
    run.tolerance("damping_relative_L2", rep.relative_error, run.cfg["run"]["damping_tolerance"])


def cmd_reconstruct_q(run: Run):
    from .reconstruct import invert_potential
    S = _samples(run, "q")
    S.to_csv(run.path("identity_q.csv"))
    truth = run.phantom("q2") - run.phantom("q1")
    rec, rep = invert_potential(S, run.grid, _center(run), truth, normalization=run.debug_normalization,
                                continuation=run.cfg["run"]["continuation"])
    run.field("q_rec", rec)
    run.path("report_q.txt").write_text(rep.text())
    run.tolerance("potential_relative_L2", rep.relative_error, run.cfg["run"]["potential_tolerance"])


def cmd_null_test(run: Run):
    from .reconstruct import null_test
    cfg = run.cfg
    if cfg["phantom.a1"] != cfg["phantom.a2"] or cfg["phantom.q1"] != cfg["phantom.q2"]:
        raise ConfigError("phantom.a2: the null test needs identical pairs (a1 = a2 and q1 = q2)")
    r = cfg["run"]
    frames = cfg.frames()
    pick = np.linspace(0, len(frames) - 1, min(r["null_omegas"], len(frames))).round().astype(int)
    table = null_test(run.grid, run.phantom("a1"), run.phantom("q1"), [frames[i] for i in pick],
                      r["null_lambdas"], r["null_zetas"], cfg["probes"]["lambda_cap"], jobs=run.jobs)
    write_csv(run.path("null_test.csv"), table.header, table.rows)
    run.tolerance("null_identity_max", table.max_abs, r["null_tolerance"])


def cmd_report(run: Run):
    lines = []
    for p in sorted(run.out.glob("*.txt")):
        if p.name == "summary.txt":
            continue
        lines.append(f"== {p.name}")
        lines.append(p.read_text().rstrip())
    for p in sorted(run.out.glob("*.csv")):
        with p.open() as fh:
            n = sum(1 for _ in fh) - 1
        lines.append(f"== {p.name}: {n} rows")
    man = run.path("manifest.json")
    if man.exists():
        prev = json.loads(man.read_text())
        lines.append(f"== previous runs: {', '.join(prev.get('subcommands', []))}")
    run.path("summary.txt").write_text("\n".join(lines) + "\n")


COMMANDS = {"synth": cmd_synth, "forward": cmd_forward, "probes": cmd_probes, "carleman": cmd_carleman,
            "identity": cmd_identity, "reconstruct-a": cmd_reconstruct_a, "reconstruct-q": cmd_reconstruct_q,
            "null-test": cmd_null_test, "report": cmd_report}


def _num(x):
    return None if x == float("inf") else x


def write_manifest(run: Run, subcommand, status):
    import numba
    import scipy
    path = run.path("manifest.json")
    prev = json.loads(path.read_text()) if path.exists() else {}
    subs = list(dict.fromkeys(prev.get("subcommands", []) + [subcommand]))
    artifacts = {}
    for p in sorted(run.out.rglob("*")):
        if p.is_file() and p != path:
            artifacts[str(p.relative_to(run.out))] = sha256(p)
    timings = dict(prev.get("timings", {}))
    timings.update({f"{subcommand}.{k}": v for k, v in run.timings.items()})
    man = {"config_sha256": run.cfg.digest(), "config": run.cfg.canonical(), "subcommands": subs,
           "last": {"subcommand": subcommand, "status": status, "failures": run.failures},
           "versions": {"wavetomo": __version__, "python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__, "numba": numba.__version__},
           "timings": timings, "artifacts": artifacts}
    path.write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")


def build_parser():
    p = argparse.ArgumentParser(prog="wavetomo", description="Damped-wave coefficient recovery experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", metavar="PATH", help="experiment config (INI); defaults when omitted")
    p.add_argument("--out", metavar="DIR", help="output directory (WAVETOMO_OUT overrides)")
    p.add_argument("--jobs", type=int, metavar="N", help="worker threads")
    p.add_argument("--seed", type=int, metavar="K", help="base random seed")
    p.add_argument("--tolerance-scale", type=float, metavar="F", help="multiply every tolerance by F")
    p.add_argument("--debug-normalization", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        from .config import ExperimentConfig
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default()
        over = {}
        if args.seed is not None:
            over["run__seed"] = args.seed
        if args.jobs is not None:
            over["run__jobs"] = args.jobs
        if args.tolerance_scale is not None:
            over["run__tolerance_scale"] = args.tolerance_scale
        if over:
            cfg = cfg.with_values(**over)
        out = os.environ.get("WAVETOMO_OUT") or args.out or cfg["run"]["out"]
        run = Run(cfg, out, cfg["run"]["jobs"], cfg["run"]["tolerance_scale"], args.debug_normalization)
        t0 = time.perf_counter()
        COMMANDS[args.subcommand](run)
        run.timings["total"] = time.perf_counter() - t0
        status = EXIT_TOLERANCE if run.failures else EXIT_OK
        write_manifest(run, args.subcommand, status)
    except (WavetomoError, ValueError, OSError) as exc:
        print(f"wavetomo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for f in run.failures:
        print(f"wavetomo: tolerance failure: {f}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
