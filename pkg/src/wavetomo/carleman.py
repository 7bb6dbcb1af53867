"""Sampled verification of the Carleman estimates."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .amplitudes import check_guard, default_s, light_phase
from .coeffs import Coefficient
from .errors import PreconditionError, UsageError
from .grid import Box, ScalarField, SpaceTimeGrid, faces, face_index, frequencies, integrate_box, l2, neumann_values, weighted_sobolev_norm
from .io import write_csv
from .solver import _q_values

ESTIMATES = ("c1a", "interior7", "car2_H-1", "l8a_H-1")


@dataclass
class CarlemanRow:
    seed: int
    lam: float
    lhs: float
    rhs: float
    ratio: float
    terms: dict = field(default_factory=dict)


@dataclass
class CarlemanReport:
    estimate: str
    rows: list
    meta: dict = field(default_factory=dict)
    header = ("estimate", "seed", "lambda", "lhs", "rhs", "ratio")

    def __post_init__(self):
        self.rows.sort(key=lambda r: (r.seed, r.lam))

    @property
    def seeds(self):
        return sorted({r.seed for r in self.rows})

    @property
    def lambdas(self):
        return sorted({r.lam for r in self.rows})

    def ratios(self, seed, lo=-math.inf, hi=math.inf):
        return [r.ratio for r in self.rows if r.seed == seed and lo - 1e-12 <= r.lam <= hi + 1e-12]

    @property
    def fitted_C(self):
        vals = [r.ratio for r in self.rows if np.isfinite(r.ratio)]
        return max(vals) if vals else math.nan

    def stability(self, lo=-math.inf, hi=math.inf):
        """Worst max/min ratio over seeds within [lo, hi]."""
        worst = 1.0
        for sd in self.seeds:
            vals = [v for v in self.ratios(sd, lo, hi) if v > 0]
            if len(vals) >= 2:
                worst = max(worst, max(vals) / min(vals))
        return worst

    def lambda1(self, factor=4.0, bound=2.0):
        """Smallest sweep value whose window [lam, factor lam] is stable; None if none is."""
        top = max(self.lambdas)
        for lam in self.lambdas:
            if lam * factor > top * (1 + 1e-12):
                break
            if self.stability(lam, factor * lam) <= bound:
                return lam
        return None

    def best_window(self, factor=4.0):
        """(lam, stability) of the most stable full window in the sweep."""
        top = max(self.lambdas)
        cands = [(self.stability(l, factor * l), l) for l in self.lambdas if l * factor <= top * (1 + 1e-12)]
        if not cands:
            return None, math.nan
        s, l = min(cands)
        return l, s

    def csv_rows(self):
        return [(self.estimate, r.seed, r.lam, r.lhs, r.rhs, r.ratio) for r in self.rows]

    def to_csv(self, path):
        return write_csv(path, self.header, self.csv_rows())

    def summary(self):
        l1 = self.lambda1()
        lines = [f"estimate: {self.estimate}",
                 f"seeds: {len(self.seeds)}; lambdas: {', '.join(f'{v:g}' for v in self.lambdas)}",
                 f"fitted C (max ratio): {self.fitted_C:.6g}",
                 f"stability over sweep (max/min): {self.stability():.6g}",
                 f"lambda_1: {'none found' if l1 is None else f'{l1:g}'}"]
        if l1 is None:
            bl, bs = self.best_window()
            if bl is not None:
                lines.append(f"most stable [lam, 4 lam] window starts at {bl:g} with max/min {bs:.6g}")
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------ test functions

def admissible_test_function(seed, grid: SpaceTimeGrid):
    """u = t^2 psi(x) g(t, x) with a random boundary-vanishing psi and trig polynomial g."""
    rng = np.random.default_rng(seed)
    mesh = grid.mesh()
    t = mesh[0]
    psi = 1.0
    for k, L in enumerate(grid.lengths):
        x = mesh[k + 1] / L
        p, r = rng.integers(1, 4, size=2)
        psi = psi * x ** p * (1.0 - x) ** r
    g = 1.0
    scales = np.array((grid.T,) + grid.lengths)
    for _ in range(4):
        kvec = rng.uniform(-2.0 * np.pi, 2.0 * np.pi, size=grid.n + 1) / scales
        g = g + rng.uniform(-0.6, 0.6) * np.cos(sum(kv * m for kv, m in zip(kvec, mesh))
                                                  + rng.uniform(0, 2 * np.pi))
    u = np.broadcast_to(t ** 2 * psi * g, grid.shape).copy()
    u /= np.abs(u).max()
    u[0] = 0.0
    for fc in faces(grid.n):
        u[face_index(fc, grid.n)] = 0.0
    return grid.field(u)


def check_admissible(u: ScalarField, grid: SpaceTimeGrid):
    v = u.values
    scale = float(np.abs(v).max())
    if scale == 0.0:
        return True
    if np.abs(v[0]).max() > 1e-14 * scale:
        raise PreconditionError("u(0) does not vanish")
    for fc in faces(grid.n):
        if np.abs(v[face_index(fc, grid.n)]).max() > 1e-14 * scale:
            raise PreconditionError(f"u does not vanish on face {fc.label}")
    dt0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * grid.dt)
    if np.abs(dt0).max() > 20.0 * grid.dt * scale / grid.T:
        raise PreconditionError("d_t u(0) does not vanish")
    return True


def compact_test_function(seed, box: Box, center, radius):
    """Smooth bump times a random trig polynomial, supported in a ball inside the box."""
    rng = np.random.default_rng(seed)
    mesh = box.mesh()
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, center)) / radius ** 2
    bump = np.zeros(np.broadcast_shapes(*[m.shape for m in mesh]))
    inside = r2 < 1.0
    bump[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    g = 1.0
    for _ in range(3):
        kvec = rng.uniform(-3.0, 3.0, size=box.ndim) * np.pi / radius
        g = g + rng.uniform(-0.5, 0.5) * np.cos(sum(kv * m for kv, m in zip(kvec, mesh)) + rng.uniform(0, 2 * np.pi))
    return ScalarField(box, np.broadcast_to(bump * g, box.shape).copy())


# -------------------------------------------------------- boundary estimate

def second_derivative(v, h, axis):
    """Three-point second difference, second-order one-sided at the ends."""
    v = np.moveaxis(np.asarray(v), axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h ** 2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h ** 2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def wave_operator(u, a, q, grid: SpaceTimeGrid):
    h = grid.spacing
    ut = np.gradient(u, h[0], axis=0, edge_order=2)
    out = second_derivative(u, h[0], 0) + a * ut + q * u
    for k in range(grid.n):
        out = out - second_derivative(u, h[k + 1], k + 1)
    return out


def _grads(u, grid):
    return [np.gradient(u, h, axis=k, edge_order=2) for k, h in enumerate(grid.spacing)]


def c1a_terms(u, a, q, omega, lam, grid: SpaceTimeGrid):
    """Every term of the boundary Carleman estimate, without the constant."""
    box, sb = grid.box, grid.spatial_box
    omega = np.asarray(omega, dtype=float)
    E = np.exp(-2.0 * lam * light_phase(grid, omega))
    g = _grads(u, grid)
    ET = E[-1]
    terms = {
        "final_dt": lam * integrate_box(ET * g[0][-1] ** 2, sb),
        "interior_l2": lam ** 2 * integrate_box(E * u ** 2, box),
        "interior_grad": integrate_box(E * sum(gi ** 2 for gi in g), box),
        "source": integrate_box(E * wave_operator(u, a, q, grid) ** 2, box),
        "final_u": lam ** 3 * integrate_box(ET * u[-1] ** 2, sb),
        "final_grad": lam * integrate_box(ET * sum(gi[-1] ** 2 for gi in g[1:]), sb),
    }
    plus = minus = 0.0
    for fc in faces(grid.n):
        on = float(fc.normal(grid.n) @ omega)
        dn = neumann_values(u, grid, fc)
        val = lam * integrate_box(E[face_index(fc, grid.n)] * dn ** 2 * abs(on), grid.boundary_box(fc))
        if on > 0:
            plus += val
        else:
            minus += val
    terms["flux_plus"] = plus
    terms["flux_minus"] = minus
    terms = {k: float(v) for k, v in terms.items()}
    lhs = terms["final_dt"] + terms["flux_plus"] + terms["interior_l2"] + terms["interior_grad"]
    rhs = terms["source"] + terms["final_u"] + terms["final_grad"] + terms["flux_minus"]
    return lhs, rhs, terms


def _ratio(lhs, rhs):
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def verify_c1a(u: ScalarField, a, q, omega, lambdas, grid: SpaceTimeGrid, seed=0, lambda_cap=None):
    check_admissible(u, grid)
    A, Q = _q_values(a, grid), _q_values(q, grid)
    rows = []
    for lam in lambdas:
        check_guard(grid, 2.0 * lam, omega, lambda_cap)
        lhs, rhs, terms = c1a_terms(u.values, A, Q, omega, lam, grid)
        rows.append(CarlemanRow(seed, float(lam), lhs, rhs, _ratio(lhs, rhs), terms))
    return CarlemanReport("c1a", rows, {"s": default_s(np.abs(A).max())})


def interior7_terms(u, a, q, omega, lam, s, grid: SpaceTimeGrid):
    """Both sides of the interior estimate for v = e^{-phi} u (lower bound may be negative)."""
    box, sb = grid.box, grid.spatial_box
    t = grid.mesh()[0]
    phi = lam * light_phase(grid, omega) - 0.5 * s * t ** 2
    emphi = np.exp(-phi)
    v = emphi * u
    g = _grads(v, grid)
    flux = 0.0
    for fc in faces(grid.n):
        on = float(fc.normal(grid.n) @ np.asarray(omega))
        flux += on * integrate_box(neumann_values(v, grid, fc) ** 2, grid.boundary_box(fc))
    T = grid.T
    bound = (lam / 4.0 * integrate_box(g[0][-1] ** 2, sb)
             + 2.0 * integrate_box(sum(gi ** 2 for gi in g), box)
             - 7.0 * lam * integrate_box(sum(gi[-1] ** 2 for gi in g[1:]), sb)
             + lam * flux
             + 5.0 * lam ** 2 * integrate_box(v ** 2, box)
             - 6.0 * T * s * lam ** 3 * integrate_box(v[-1] ** 2, sb))
    Pv = emphi * wave_operator(u, a, q, grid)
    return float(bound), float(integrate_box(Pv ** 2, box))


def verify_interior7(u: ScalarField, a, q, omega, lambdas, grid: SpaceTimeGrid, s=None, seed=0):
    """Rows with lhs = max(lower bound, 0), rhs = ||P v||^2; the estimate asserts ratio <= 1."""
    check_admissible(u, grid)
    A, Q = _q_values(a, grid), _q_values(q, grid)
    s = default_s(np.abs(A).max()) if s is None else float(s)
    rows = []
    for lam in lambdas:
        check_guard(grid, lam, omega)
        bound, pv = interior7_terms(u.values, A, Q, omega, lam, s, grid)
        lhs = max(bound, 0.0)
        rows.append(CarlemanRow(seed, float(lam), lhs, pv, _ratio(lhs, pv), {"lower_bound": bound}))
    return CarlemanReport("interior7", rows, {"s": s})


def c1a_sweep(grid: SpaceTimeGrid, seeds, lambdas, a=None, q=None, omega=(1.0, 0.0), jobs=1, lambda_cap=None):
    """verify_c1a over many admissible seeds, merged into one report."""
    def one(sd):
        return verify_c1a(admissible_test_function(sd, grid), a, q, omega, lambdas, grid, sd, lambda_cap).rows

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(one, seeds))
    else:
        parts = [one(sd) for sd in seeds]
    A = _q_values(a, grid)
    return CarlemanReport("c1a", [r for p in parts for r in p], {"s": default_s(np.abs(A).max())})


# ----------------------------------------------------- negative-order estimates

def _spectral_derivatives(v, box: Box):
    spec = np.fft.fftn(v)
    ks = frequencies(box)
    out = []
    for k, kk in enumerate(ks):
        shape = [1] * box.ndim
        shape[k] = -1
        out.append(spec * (1j * kk.reshape(shape)))
    return spec, out, ks


def conjugated_operator(v: ScalarField, a, lam, omega, variant="car2", s=0.0):
    """P v for the two conjugated operators, derivatives taken spectrally."""
    box = v.box
    vals = np.asarray(v.values, dtype=float)
    A = 0.0 if a is None else np.asarray(a.values if hasattr(a, "values") else a, dtype=float)
    spec, dspec, ks = _spectral_derivatives(vals, box)
    shape = lambda k: [(-1 if j == k else 1) for j in range(box.ndim)]
    d = [np.real(np.fft.ifftn(ds)) for ds in dspec]
    d2 = [np.real(np.fft.ifftn(spec * -(kk.reshape(shape(k)) ** 2))) for k, kk in enumerate(ks)]
    box_ = d2[0] - sum(d2[1:])
    om = np.asarray(omega, dtype=float)
    grad_om = sum(o * dk for o, dk in zip(om, d[1:]))
    if variant == "car2":
        return box_ + 2.0 * lam * (d[0] - grad_om) + A * (d[0] + lam * vals)
    if variant == "l8a":
        t = box.mesh()[0]
        ls = lam + s * t
        return (box_ + (s * s * t * t + 2.0 * lam * s * t - s) * vals
                - 2.0 * ls * d[0] + 2.0 * lam * grad_om
                - A * d[0] + A * ls * vals)
    raise UsageError(f"unknown variant {variant!r}")


def _h1(vals, box):
    total = l2(vals, box) ** 2
    for k, h in enumerate(box.spacing):
        total += l2(np.gradient(vals, h, axis=k, edge_order=2), box) ** 2
    return math.sqrt(total)


def _on_box(a, box):
    """Coefficient values on ``box``; Coefficients vanish outside Q and are embedded."""
    if a is None:
        return None
    if isinstance(a, Coefficient):
        if not np.any(a.values):
            return None
        f = a.on_Q()
        return f.embed(box).values if f.box != box else f.values
    return np.asarray(a.values if hasattr(a, "values") else a, dtype=float)


def verify_H_minus1(v: ScalarField, a, lambdas, variant="car2", omega=(1.0, 0.0), s=None, seed=0,
                    margin_cells=4):
    """Negative-order estimates in the periodic DFT proxy.

    car2 rows: lhs = ||v||, rhs = ||P v||_{H^-1_lam}, ratio = lhs / rhs.
    l8a rows: lhs = ||P v||_{H^-1_lam}, rhs = s^{1/2} (lam ||v|| + ||v||_H1), ratio = lhs / rhs;
    terms['shifted'] holds ||P v||_{H^-1_lam} / (s^{1/2} ||v||).
    """
    from .grid import check_margin
    vals = np.asarray(v.values, dtype=float)
    check_margin(vals, margin_cells)
    A = _on_box(a, v.box)
    a_sup = 0.0 if A is None else float(np.abs(A).max())
    s = default_s(a_sup) if s is None else float(s)
    vnorm = l2(vals, v.box)
    # a differential operator keeps the support; drop spectral round-off outside it
    from scipy.ndimage import binary_dilation
    support = binary_dilation(vals != 0, iterations=1)
    rows = []
    for lam in lambdas:
        Pv = conjugated_operator(v, A, lam, omega, variant, s) * support
        Pn = weighted_sobolev_norm(ScalarField(v.box, Pv), -1, lam, margin_cells) if vnorm > 0 else 0.0
        if variant == "car2":
            lhs, rhs = vnorm, Pn
            terms = {}
        else:
            lhs = Pn
            rhs = math.sqrt(s) * (lam * vnorm + _h1(vals, v.box))
            terms = {"shifted": _ratio(Pn, math.sqrt(s) * vnorm), "s": s}
        rows.append(CarlemanRow(seed, float(lam), lhs, rhs, _ratio(lhs, rhs), terms))
    return CarlemanReport("car2_H-1" if variant == "car2" else "l8a_H-1", rows, {"s": s})
