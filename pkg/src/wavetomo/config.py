"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Lists are comma separated. Every file carries ``schema_version`` in ``[meta]``.
Parsing is strict: unknown sections or keys and malformed values raise
ConfigError naming the offending ``section.key``.
"""
from __future__ import annotations

import configparser
import hashlib
import math

from .errors import ConfigError, WavetomoError

SCHEMA_VERSION = 1
PHANTOM_SECTIONS = ("phantom.a1", "phantom.a2", "phantom.q1", "phantom.q2")

# key -> (type, default); None means required or "not set"
SCHEMA = {
    "meta": {"schema_version": ("int", SCHEMA_VERSION)},
    "grid": {
        "n": ("int", 2),
        "T": ("float", 1.0),
        "L": ("floats", (1.5, 1.5)),
        "nt": ("int", 64),
        "nx": ("ints", (64, 64)),
        "R": ("float", None),
        "enforce_cfl": ("bool", False),
    },
    "probes": {
        "lambda": ("floats", (150.0,)),
        "omega_count": ("int", 17),
        "omega0": ("floats", None),
        "epsilon": ("float", None),
        "zeta_count": ("int", 15),
        "zeta_spacing": ("float", 2.0 * math.pi),
        "s": ("float", None),
        "center": ("floats", None),
        "lambda_cap": ("float", 40.0),
        "go_lambdas": ("floats", (4.0, 8.0, 16.0, 32.0)),
        "go_method": ("str", "conjugated"),
    },
    "geometry": {
        "omega0": ("floats", (1.0, 0.0)),
        "epsilon": ("float", 0.5),
        # unset: the smallest union of faces meeting the aperture condition
        "faces": ("strs", None),
    },
    "carleman": {
        "seeds": ("int", 20),
        "lambdas": ("floats", (1.0, 2.0, 3.0, 4.0, 6.0)),
        "omega": ("floats", (1.0, 0.0)),
        "car2_lambdas": ("floats", (4.0, 8.0, 16.0, 32.0, 64.0)),
    },
    "run": {
        "seed": ("int", 0),
        "jobs": ("int", 1),
        "out": ("str", "wavetomo-out"),
        "tolerance_scale": ("float", 1.0),
        "mode": ("str", "from_coefficients"),
        "null_lambdas": ("floats", (2.0, 4.0, 8.0, 12.0)),
        "null_omegas": ("int", 3),
        "null_zetas": ("int", 3),
        "damping_tolerance": ("float", 0.20),
        "potential_tolerance": ("float", 0.15),
        "null_tolerance": ("float", 1e-8),
        "continuation": ("str", "none"),
    },
}

PHANTOM_KEYS = {
    "kind": "str", "amplitude": "float", "width": "float", "center": "floats", "alpha": "float",
    "sigma": "float", "support": "float", "window_inner": "float", "seed": "int", "bandlimited": "bool",
    "k_min": "float", "k_max": "float", "cone": "float", "taper": "float", "iterations": "int",
    "max_temporal_fraction": "float",
}


def _parse(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return raw
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if kind == "floats":
            return tuple(float(p) for p in parts)
        if kind == "ints":
            return tuple(int(p) for p in parts)
        if kind == "strs":
            return tuple(parts)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from None
    raise ConfigError(f"{where}: unknown type {kind}")


def _format(kind, value):
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "str":
        return value
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "ints":
        return ", ".join(str(int(v)) for v in value)
    return ", ".join(value)


class ExperimentConfig:
    """Typed sections; ``cfg["grid"]["T"]`` style access."""

    def __init__(self, sections):
        self.sections = sections

    def __getitem__(self, name):
        return self.sections[name]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.canonical() == other.canonical()

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    @classmethod
    def default(cls):
        return cls.from_text("[meta]\nschema_version = 1\n")

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text):
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config: {exc}") from None
        if not cp.has_option("meta", "schema_version"):
            raise ConfigError("meta.schema_version: missing")
        sections = {}
        for name in cp.sections():
            if name not in SCHEMA and name not in PHANTOM_SECTIONS:
                raise ConfigError(f"{name}: unknown section")
        for name, keys in SCHEMA.items():
            vals = {k: d for k, (_, d) in keys.items()}
            if cp.has_section(name):
                for k, raw in cp.items(name):
                    if k not in keys:
                        raise ConfigError(f"{name}.{k}: unknown key")
                    vals[k] = _parse(keys[k][0], raw, f"{name}.{k}")
            sections[name] = vals
        if sections["meta"]["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"meta.schema_version: expected {SCHEMA_VERSION}, "
                              f"got {sections['meta']['schema_version']}")
        for name in PHANTOM_SECTIONS:
            spec = {"kind": "zero"}
            if cp.has_section(name):
                for k, raw in cp.items(name):
                    if k not in PHANTOM_KEYS:
                        raise ConfigError(f"{name}.{k}: unknown key")
                    spec[k] = _parse(PHANTOM_KEYS[k], raw, f"{name}.{k}")
            sections[name] = spec
        cfg = cls(sections)
        cfg.validate()
        return cfg

    def canonical(self):
        """Canonical text: fixed section order, sorted keys, unset values omitted."""
        lines = []
        for name, keys in SCHEMA.items():
            lines.append(f"[{name}]")
            for k in sorted(keys):
                v = self.sections[name][k]
                if v is not None:
                    lines.append(f"{k} = {_format(keys[k][0], v)}")
            lines.append("")
        for name in PHANTOM_SECTIONS:
            lines.append(f"[{name}]")
            spec = self.sections[name]
            for k in sorted(spec):
                lines.append(f"{k} = {_format(PHANTOM_KEYS[k], spec[k])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_values(self, **updates):
        """Copy with ``section__key=value`` overrides, re-validated."""
        sections = {k: dict(v) for k, v in self.sections.items()}
        for dotted, value in updates.items():
            sec, key = dotted.split("__", 1)
            sec = sec.replace("_", ".", 1) if sec.startswith("phantom_") else sec
            sections[sec][key] = value
        cfg = ExperimentConfig(sections)
        cfg.validate()
        return cfg

    # ----------------------------------------------------------- builders

    def grid(self):
        from .grid import SpaceTimeGrid
        g = self.sections["grid"]
        if len(g["L"]) != g["n"]:
            raise ConfigError(f"grid.L: expected {g['n']} lengths, got {len(g['L'])}")
        if len(g["nx"]) != g["n"]:
            raise ConfigError(f"grid.nx: expected {g['n']} counts, got {len(g['nx'])}")
        try:
            return SpaceTimeGrid(g["T"], g["L"], g["nt"], g["nx"], g["R"], enforce_cfl=g["enforce_cfl"])
        except WavetomoError as exc:
            raise ConfigError(f"grid: {exc}") from None

    def phantom(self, which, grid=None):
        from .coeffs import make_phantom
        grid = grid or self.grid()
        label = "damping_a" if which.startswith("a") else "potential_q"
        try:
            return make_phantom(self.sections[f"phantom.{which}"], grid, label)
        except WavetomoError as exc:
            raise ConfigError(f"phantom.{which}: {exc}") from None

    def omegas(self):
        from .grid import omega_sweep
        p = self.sections["probes"]
        if p["omega0"] is not None and p["epsilon"] is not None:
            return omega_sweep(p["omega_count"], 2, p["omega0"], p["epsilon"])
        return omega_sweep(p["omega_count"])

    def frames(self):
        from .grid import LightFrame
        p = self.sections["probes"]
        return [LightFrame(o, p["zeta_spacing"], p["zeta_count"]) for o in self.omegas()]

    def geometry(self):
        from .grid import Face
        from .solver import PartialBoundaryGeometry
        g = self.sections["geometry"]
        n = self.sections["grid"]["n"]
        if g["faces"] is None:
            return PartialBoundaryGeometry.default(n, tuple(g["omega0"]), g["epsilon"])
        try:
            faces = tuple(Face.parse(f) for f in g["faces"])
        except WavetomoError as exc:
            raise ConfigError(f"geometry.faces: {exc}") from None
        return PartialBoundaryGeometry(n, tuple(g["omega0"]), g["epsilon"], faces)

    def validate(self):
        grid = self.grid()
        p = self.sections["probes"]
        if p["zeta_count"] < 1 or p["omega_count"] < 1:
            raise ConfigError("probes.zeta_count: counts must be positive")
        if (p["omega0"] is None) != (p["epsilon"] is None):
            raise ConfigError("probes.epsilon: omega0 and epsilon must be given together")
        from .amplitudes import check_guard
        for lam in p["lambda"]:
            for om in self.omegas():
                try:
                    check_guard(grid, lam, om)
                except WavetomoError as exc:
                    raise ConfigError(f"probes.lambda: {exc}") from None
        r = self.sections["run"]
        if r["mode"] not in ("from_coefficients", "from_identity"):
            raise ConfigError(f"run.mode: unknown mode {r['mode']!r}")
        if r["continuation"] not in ("none", "poly"):
            raise ConfigError(f"run.continuation: unknown value {r['continuation']!r}")
        if p["go_method"] not in ("direct", "conjugated"):
            raise ConfigError(f"probes.go_method: unknown method {p['go_method']!r}")
        if r["jobs"] < 1:
            raise ConfigError("run.jobs: must be at least 1")
        if r["tolerance_scale"] <= 0:
            raise ConfigError("run.tolerance_scale: must be positive")
        for name in PHANTOM_SECTIONS:
            from .coeffs import PHANTOMS
            if self.sections[name]["kind"] not in PHANTOMS:
                raise ConfigError(f"{name}.kind: unknown phantom {self.sections[name]['kind']!r}")
        return self
