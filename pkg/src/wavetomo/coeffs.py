"""Phantom coefficients, zero extension and mollification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import PreconditionError, ResolutionError, UsageError
from .grid import Box, ScalarField, SpaceTimeGrid, frequencies, integrate_box
from .slopes import fit_slope

LABELS = ("damping_a", "potential_q")
PHANTOMS = ("zero", "smooth_bump", "hoelder_bump", "gaussian_bump", "spacelike_bandlimited")
DEFAULT_MARGIN = 0.55


@dataclass(frozen=True, eq=False)
class Coefficient:
    """A coefficient sampled on the extension box; zero outside its support ball."""

    grid: SpaceTimeGrid
    field: ScalarField
    label: str = "damping_a"
    p: float = math.inf
    alpha: float = 1.0
    support_radius: float = 0.0
    center: tuple = ()
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in LABELS:
            raise UsageError(f"unknown coefficient label {self.label!r}")
        if not math.isinf(self.p):
            n1 = self.grid.n + 1
            if not 0.0 < self.alpha < 1.0 or abs(self.alpha - (1.0 - n1 / self.p)) > 1e-12:
                raise UsageError("alpha must equal 1 - (n+1)/p and lie in (0, 1)")

    @property
    def box(self):
        return self.field.box

    @property
    def values(self):
        return self.field.values

    def on_Q(self):
        return self.field.restrict(self.grid.box)

    @property
    def sup(self):
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def extended(self, margin):
        """Same coefficient on a box padded by at least ``margin`` around Q."""
        box = self.grid.extension_box(margin)
        if all(b >= a for a, b in zip(self.box.shape, box.shape)):
            f = self.on_Q().embed(box)
            return Coefficient(self.grid, f, self.label, self.p, self.alpha,
                               self.support_radius, self.center, self.descriptor)
        return self

    def vanishes_outside_Q(self, tol=0.0):
        inner = np.zeros(self.box.shape, dtype=bool)
        inner[self.box.locate(self.grid.box)] = True
        return bool(np.all(np.abs(self.values[~inner]) <= tol))

    def __sub__(self, other):
        if other.box != self.box:
            raise UsageError("coefficients live on different boxes")
        return Coefficient(self.grid, self.field - other.field, self.label,
                           min(self.p, other.p), min(self.alpha, other.alpha),
                           max(self.support_radius, other.support_radius), self.center,
                           {"kind": "difference"})

    def scaled(self, factor):
        return Coefficient(self.grid, self.field * factor, self.label, self.p, self.alpha,
                           self.support_radius, self.center, dict(self.descriptor, scale=factor))


@dataclass(frozen=True, eq=False)
class MollifiedCoefficient:
    base: Coefficient
    lam: float
    field: ScalarField
    kernel_radius: float
    mollifier_kind: str = "exp_bump"

    @property
    def box(self):
        return self.field.box

    @property
    def values(self):
        return self.field.values

    @property
    def grid(self):
        return self.base.grid


# ------------------------------------------------------------------ phantoms

def _radius(box: Box, center, scale=1.0):
    mesh = box.mesh()
    r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
    return np.sqrt(r2) / scale


def _check_inside(grid: SpaceTimeGrid, center, radius):
    for c, hi in zip(center, grid.box.upper):
        if c - radius <= 0.0 or c + radius >= hi:
            raise PreconditionError(
                f"support ball (center {tuple(center)}, radius {radius}) is not strictly inside Q")


def _check_width(grid: SpaceTimeGrid, width):
    if width < 4.0 * grid.h:
        raise ResolutionError(f"feature width {width} is under 4 cells (h = {grid.h:.4g})")


def _ramp(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def flat_top_window(r, inner, outer):
    """1 inside ``inner``, raised-cosine down to 0 at ``outer``."""
    return _ramp((outer - r) / (outer - inner))


def cone_mask(box: Box, cone=0.6, taper=0.5, k_min=8.0, k_max=40.0):
    """Smooth Fourier mask vanishing for |tau| >= cone |xi| and outside the k band.

    The cone taper starts at ``taper * cone``; the radial band tapers over 30%
    of ``k_max`` at the top and over one ``k_min`` at the bottom.
    """
    ks = frequencies(box)
    kt, kxs = ks[0], ks[1:]
    mesh = np.meshgrid(kt, *kxs, indexing="ij", sparse=True)
    xi = np.sqrt(sum(m ** 2 for m in mesh[1:]))
    kk = np.sqrt(mesh[0] ** 2 + xi ** 2)
    ratio = np.abs(mesh[0]) / np.maximum(xi, 1e-300)
    lo = taper * cone
    cone_part = np.where(xi > 0, _ramp((cone - ratio) / (cone - lo)), 0.0)
    band = _ramp((k_max - kk) / (0.3 * k_max))
    if k_min > 0:
        band = band * _ramp(kk / k_min - 1.0)
    return cone_part * band


def project_spacelike(values, box: Box, window, iterations=20, **mask_kw):
    """Alternate between the cone/band mask and the compact-support window."""
    mask = cone_mask(box, **mask_kw)
    f = np.asarray(values, dtype=np.float64) * window
    for _ in range(iterations):
        f = np.real(np.fft.ifftn(np.fft.fftn(f) * mask)) * window
    return f


def timelike_fraction(values, box: Box, cone=1.0):
    """Share of DFT energy with |tau| > cone |xi|."""
    spec = np.abs(np.fft.fftn(values)) ** 2
    ks = frequencies(box)
    mesh = np.meshgrid(*ks, indexing="ij", sparse=True)
    xi = np.sqrt(sum(m ** 2 for m in mesh[1:]))
    outside = np.abs(mesh[0]) > cone * xi
    total = spec.sum()
    return float(spec[np.broadcast_to(outside, spec.shape)].sum() / total) if total > 0 else 0.0


def _get(spec, key, default=None, required=False):
    if key in spec:
        return spec[key]
    if required:
        raise UsageError(f"phantom descriptor needs {key!r}")
    return default


def _vec(v, n):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size != n:
        raise UsageError(f"expected {n} components, got {arr.size}")
    return tuple(float(x) for x in arr)


def make_phantom(spec, grid: SpaceTimeGrid, label="damping_a", margin=DEFAULT_MARGIN):
    """Synthesize a coefficient from a descriptor mapping with a ``kind`` key.

    Every phantom is supported in a ball strictly inside Q and extended by
    zero to a box padded by ``margin`` on each side.
    """
    spec = dict(spec)
    kind = spec.get("kind", "zero")
    if kind not in PHANTOMS:
        raise UsageError(f"unknown phantom kind {kind!r}")
    qbox = grid.box
    n1 = grid.n + 1
    center = _vec(_get(spec, "center", grid.center), n1)
    amplitude = float(_get(spec, "amplitude", 1.0))
    p, alpha, support = math.inf, 1.0, 0.0

    if kind == "zero":
        vals = np.zeros(qbox.shape)
    elif kind == "smooth_bump":
        width = float(_get(spec, "width", required=True))
        _check_width(grid, width)
        _check_inside(grid, center, width)
        r = _radius(qbox, center, width)
        vals = np.zeros(qbox.shape)
        m = r < 1.0
        vals[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r[m] ** 2))
        support = width
    elif kind == "hoelder_bump":
        width = float(_get(spec, "width", required=True))
        alpha = float(_get(spec, "alpha", 0.5))
        if not 0.0 < alpha < 1.0:
            raise UsageError("hoelder_bump needs alpha in (0, 1)")
        _check_width(grid, width)
        _check_inside(grid, center, width)
        r = _radius(qbox, center, width)
        # point cusp of exponent alpha at the center; W^{1,p} for p < (n+1)/(1-alpha)
        vals = amplitude * np.clip(1.0 - r ** alpha, 0.0, None) ** 2
        p = n1 / (1.0 - alpha)
        support = width
    elif kind == "gaussian_bump":
        sigma = float(_get(spec, "sigma", _get(spec, "width", 0.08)))
        _check_width(grid, 2.0 * sigma)
        support = float(_get(spec, "support", 0.98 * _inscribed(grid, center)))
        _check_inside(grid, center, support)
        r = _radius(qbox, center)
        inner = float(_get(spec, "window_inner", 0.1))
        vals = amplitude * np.exp(-0.5 * (r / sigma) ** 2) * flat_top_window(r, inner, support)
    else:
        support = float(_get(spec, "support", 0.47))
        _check_inside(grid, center, support)
        seed = int(_get(spec, "seed", 0))
        noise = np.random.default_rng(seed).standard_normal(qbox.shape)
        r = _radius(qbox, center)
        window = flat_top_window(r, float(_get(spec, "window_inner", 0.1)), support)
        vals = project_spacelike(noise, qbox, window, **_mask_args(spec))
        peak = np.abs(vals).max()
        vals = amplitude * vals / peak if peak > 0 else vals
    if kind in ("smooth_bump", "gaussian_bump", "hoelder_bump") and _get(spec, "bandlimited", False):
        r = _radius(qbox, center)
        window = flat_top_window(r, float(_get(spec, "window_inner", 0.1)), support)
        vals = project_spacelike(vals, qbox, window, **_mask_args(spec))
        p, alpha = math.inf, 1.0
    # zero on the boundary of Q exactly
    edge = np.ones(qbox.shape, dtype=bool)
    edge[(slice(1, -1),) * n1] = False
    vals = np.where(edge, 0.0, vals)
    ext = grid.extension_box(margin)
    f = ScalarField(qbox, vals).embed(ext)
    return Coefficient(grid, f, label, p, alpha, support, center, spec)


def _mask_args(spec):
    return {
        "iterations": int(_get(spec, "iterations", 20)),
        "cone": float(_get(spec, "max_temporal_fraction", 0.6)),
        "taper": float(_get(spec, "taper", 0.5)),
        "k_min": float(_get(spec, "k_min", 8.0)),
        "k_max": float(_get(spec, "k_max", 40.0)),
    }


def _inscribed(grid, center):
    return min(min(c, hi - c) for c, hi in zip(center, grid.box.upper))


def from_function(grid: SpaceTimeGrid, func, label="damping_a", margin=DEFAULT_MARGIN, p=math.inf, alpha=1.0):
    """Coefficient sampled from ``func(t, x1, ...)`` on Q and zero-extended."""
    vals = np.broadcast_to(func(*grid.mesh()), grid.shape).astype(np.float64)
    f = ScalarField(grid.box, vals).embed(grid.extension_box(margin))
    return Coefficient(grid, f, label, p, alpha, 0.0, grid.center, {"kind": "function"})


def constant(grid: SpaceTimeGrid, value, label="damping_a", margin=DEFAULT_MARGIN):
    """Constant on Q (including its boundary), zero outside."""
    return from_function(grid, lambda *m: np.full(grid.shape, float(value)), label, margin)


# -------------------------------------------------------------- mollification

def mollifier_kernel(box: Box, lam, n1=None):
    """Sampled chi_lambda on the box spacing, renormalized to unit discrete mass."""
    n1 = n1 or box.ndim
    radius = lam ** (-1.0 / 3.0)
    if radius <= 2.0 * max(box.spacing):
        raise ResolutionError(
            f"mollifier radius {radius:.4g} under 2 cells; refine the grid or lower lambda")
    half = [int(math.floor(radius / h)) for h in box.spacing]
    axes = [h * np.arange(-m, m + 1) for h, m in zip(box.spacing, half)]
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    r2 = sum(m ** 2 for m in mesh) / radius ** 2
    kern = np.zeros(np.broadcast_shapes(*[m.shape for m in mesh]))
    inside = r2 < 1.0
    kern[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    # continuous amplitude lambda^{(n+1)/3} chi(lambda^{1/3} y); discrete mass set to 1
    kern *= lam ** (n1 / 3.0)
    kern /= kern.sum() * box.cell_volume
    return kern, radius


def mollify(c: Coefficient, lam):
    """a_lambda = chi_lambda * a on an extension box wide enough for the kernel."""
    if lam <= 1:
        raise UsageError("lambda must exceed 1")
    kern, radius = mollifier_kernel(c.box, lam)
    need = radius + 2.0 * c.grid.h
    c = _ensure_margin(c, need)
    vals = c.values
    out = np.zeros_like(vals)
    if np.any(vals):
        # convolve only the support's bounding box, then place the full result
        nz = np.nonzero(vals)
        lo = [int(i.min()) for i in nz]
        hi = [int(i.max()) + 1 for i in nz]
        sub = vals[tuple(slice(a, b) for a, b in zip(lo, hi))]
        conv = fftconvolve(sub, kern * c.box.cell_volume, mode="full")
        # the exact support is the input support dilated by the kernel; clear FFT noise outside it
        support = fftconvolve((sub != 0).astype(float), (kern > 0).astype(float), mode="full") > 0.5
        conv = np.where(support, conv, 0.0)
        half = [(k - 1) // 2 for k in kern.shape]
        dst, src = [], []
        for start, m, size in zip((a - h for a, h in zip(lo, half)), conv.shape, vals.shape):
            d0, d1 = max(start, 0), min(start + m, size)
            dst.append(slice(d0, d1))
            src.append(slice(d0 - start, d1 - start))
        out[tuple(dst)] = conv[tuple(src)]
    return MollifiedCoefficient(c, float(lam), ScalarField(c.box, out), radius)


def _ensure_margin(c: Coefficient, need):
    lo = [o for o in c.box.origin]
    hi = list(c.box.upper)
    qhi = c.grid.box.upper
    if min(-o for o in lo) >= need - 1e-12 and min(h - q for h, q in zip(hi, qhi)) >= need - 1e-12:
        return c
    return c.extended(need)


def sup_error(c: Coefficient, lam):
    m = mollify(c, lam)
    base = m.base.values
    return float(np.abs(m.values - base).max())


def mollification_decay_report(c: Coefficient, lambdas):
    """Per-lambda sup error, W^{1,inf} and H^2 norms of a_lambda, with fitted slopes."""
    lambdas = sorted(float(v) for v in lambdas)
    if len(lambdas) < 4 or lambdas[-1] / lambdas[0] < 10.0 - 1e-9:
        raise UsageError("need at least 4 lambda values spanning a decade")
    rows = []
    for lam in lambdas:
        m = mollify(c, lam)
        vals = m.values
        box = m.box
        err = float(np.abs(vals - m.base.values).max())
        grads = [np.gradient(vals, h, axis=k) for k, h in enumerate(box.spacing)]
        w1 = float(np.abs(vals).max() + max(np.abs(g).max() for g in grads))
        h2 = integrate_box(vals ** 2, box) + sum(integrate_box(g ** 2, box) for g in grads)
        for i, g in enumerate(grads):
            for k in range(i, box.ndim):
                d2 = np.gradient(g, box.spacing[k], axis=k)
                h2 += integrate_box(d2 ** 2, box) * (1 if k == i else 2)
        rows.append((lam, err, w1, math.sqrt(float(h2))))
    lam_arr = np.array([r[0] for r in rows])
    errs = np.array([r[1] for r in rows])
    h2s = np.array([r[3] for r in rows])
    return DecayReport(rows, fit_slope(lam_arr, errs), fit_slope(lam_arr, h2s))


@dataclass
class DecayReport:
    rows: list
    sup_error_slope: float
    h2_slope: float

    header = ("lambda", "sup_error", "W1inf_norm", "H2_norm")
