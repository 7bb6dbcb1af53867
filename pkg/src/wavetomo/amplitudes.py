"""Geometric-optics amplitudes, ray integrals and Carleman weights."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coeffs import Coefficient, MollifiedCoefficient
from .errors import OverflowGuardError, UsageError
from .grid import LightFrame, ScalarField, SpaceTimeGrid, gradient, norm

GUARD = 700.0 * math.log(2.0)
LAMBDA_CAP = 40.0


def default_s(a_sup):
    """The proof's choice s = 3 ||a||_inf^2 + 6."""
    return 3.0 * float(a_sup) ** 2 + 6.0


def sup_omega_x(grid: SpaceTimeGrid, omega):
    return float(sum(abs(w) * L for w, L in zip(omega, grid.lengths)))


def check_guard(grid: SpaceTimeGrid, lam, omega, cap=None):
    """Hard double-range guard, plus the optional soft cap on lambda (T + diam)."""
    reach = lam * (grid.T + sup_omega_x(grid, omega))
    if reach > GUARD:
        raise OverflowGuardError(f"lambda (T + sup|omega.x|) = {reach:.4g} exceeds {GUARD:.4g}")
    if cap is not None and lam * (grid.T + grid.diameter) > cap:
        raise OverflowGuardError(
            f"lambda (T + diam) = {lam * (grid.T + grid.diameter):.4g} exceeds the cap {cap}")


@dataclass(frozen=True)
class CarlemanWeight:
    """phi(t, x) = sign * lam (t + omega.x) - s t^2 / 2 on a given grid."""

    lam: float
    s: float
    omega: tuple
    sign: int
    grid: SpaceTimeGrid

    def __post_init__(self):
        if self.lam <= 1:
            raise UsageError("lambda must exceed 1")
        if self.s < 0:
            raise UsageError("s must be nonnegative")
        if self.sign not in (1, -1):
            raise UsageError("sign must be +1 or -1")
        om = np.asarray(self.omega, dtype=float)
        object.__setattr__(self, "omega", tuple(om / np.linalg.norm(om)))
        check_guard(self.grid, self.lam, self.omega)


def eval_weight(w: CarlemanWeight, pts):
    """Closed-form phi at points given as an (N, n+1) array."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    t = pts[:, 0]
    psi = t + pts[:, 1:] @ np.asarray(w.omega)
    return w.sign * w.lam * psi - 0.5 * w.s * t ** 2


def weight_field(w: CarlemanWeight):
    mesh = w.grid.mesh()
    psi = mesh[0] + sum(o * m for o, m in zip(w.omega, mesh[1:]))
    vals = w.sign * w.lam * psi - 0.5 * w.s * mesh[0] ** 2
    return w.grid.field(np.broadcast_to(vals, w.grid.shape))


def conjugate_factor(w: CarlemanWeight):
    """e^{phi} sampled on Q."""
    return weight_field(w).with_values(np.exp(weight_field(w).values))


def light_phase(grid: SpaceTimeGrid, omega):
    """psi = t + x.omega on Q."""
    mesh = grid.mesh()
    return np.broadcast_to(mesh[0] + sum(o * m for o, m in zip(omega, mesh[1:])), grid.shape)


# ------------------------------------------------------------- ray integrals

def _field_of(c):
    if isinstance(c, (Coefficient, MollifiedCoefficient)):
        return c.field
    if isinstance(c, ScalarField):
        return c
    raise UsageError("expected a coefficient or a field")


def ray_step(box, direction):
    """Parameter step keeping the Euclidean step at half the finest spacing."""
    return min(box.spacing) / (2.0 * float(np.linalg.norm(direction)))


def halfline_ray_integral(c, omega, at, step=None, direction=None):
    """Trapezoid value of int_0^inf c(at + s (1, -omega)) ds.

    ``at`` may be one point or an (N, n+1) array; the rule stops where the
    ray leaves the sampled box, outside of which ``c`` is zero.
    """
    f = _field_of(c)
    omega = np.asarray(omega, dtype=float)
    d = np.concatenate([[1.0], -omega]) if direction is None else np.asarray(direction, dtype=float)
    pts = np.asarray(at, dtype=float)
    single = pts.ndim == 1
    step = step or ray_step(f.box, d)
    out = kernels.ray_sums(f.values, f.box.origin, f.box.spacing, np.atleast_2d(pts), d, step)
    return float(out[0]) if single else out


def ray_transform_full(c, omega, kappa, step=None):
    """int_R c(kappa + s (1, -omega)) ds as the sum of the two half-lines."""
    omega = np.asarray(omega, dtype=float)
    d = np.concatenate([[1.0], -omega])
    return (halfline_ray_integral(c, omega, kappa, step, d)
            + halfline_ray_integral(c, omega, kappa, step, -d))


def ray_exponent(c, omega, grid: SpaceTimeGrid, step=None, mask=None):
    """J(y) = int_0^inf c(y + s(1,-omega)) ds at every node of Q (or of ``mask``)."""
    pts = grid.box.points()
    out = np.zeros(grid.box.size)
    if mask is None:
        out = halfline_ray_integral(c, omega, pts, step)
    else:
        sel = np.asarray(mask).ravel()
        if sel.any():
            out[sel] = halfline_ray_integral(c, omega, pts[sel], step)
    return out.reshape(grid.shape)


# ----------------------------------------------------------------- amplitudes

class GOAmplitude:
    """b1 = e^{-i zeta.y} exp(-J/2) or b2 = exp(+J/2), sampled on Q.

    The real modulus is stored once; the phase is applied on demand so one
    ray computation serves a whole frequency grid.
    """

    def __init__(self, grid, modulus, kind, lam, omega, zeta=None, source=""):
        if kind not in ("b1", "b2"):
            raise UsageError("kind must be 'b1' or 'b2'")
        self.grid = grid
        self.modulus = np.asarray(modulus)
        self.kind = kind
        self.lam = float(lam)
        self.omega = np.asarray(omega, dtype=float)
        self.zeta = None if zeta is None else np.asarray(zeta, dtype=float)
        self.source = source

    def phase(self):
        if self.zeta is None or not np.any(self.zeta):
            return None
        mesh = self.grid.mesh()
        arg = sum(z * m for z, m in zip(self.zeta, mesh))
        return np.exp(-1j * arg)

    @property
    def values(self):
        ph = self.phase()
        if ph is None:
            return np.array(self.modulus, dtype=np.complex128)
        return self.modulus * ph

    @property
    def field(self):
        return self.grid.field(self.values)

    def with_zeta(self, zeta):
        return GOAmplitude(self.grid, self.modulus, self.kind, self.lam, self.omega, zeta, self.source)

    def meta(self):
        return {"kind": self.kind, "lambda": self.lam, "omega": self.omega.tolist(),
                "zeta": None if self.zeta is None else self.zeta.tolist(), "source": self.source}


def _check_lambda(cm, lam):
    if cm is not None and isinstance(cm, MollifiedCoefficient) and abs(cm.lam - lam) > 1e-12 * lam:
        raise UsageError("amplitude lambda differs from the mollification lambda")


def build_b1(a1m, frame: LightFrame, zeta, lam, grid=None, exponent=None):
    """b1 = e^{-i zeta.y} exp(-1/2 int_0^inf a1(y + s(1,-omega)) ds)."""
    zeta = np.asarray(zeta, dtype=float)
    frame.check(zeta)
    _check_lambda(a1m, lam)
    grid = grid or a1m.grid
    if exponent is None:
        exponent = _exponent(a1m, frame.omega, grid)
    return GOAmplitude(grid, np.exp(-0.5 * exponent), "b1", lam, frame.omega, zeta,
                       _label(a1m))


def build_b2(a2m, frame: LightFrame, lam, grid=None, exponent=None):
    """b2 = exp(+1/2 int_0^inf a2(y + s(1,-omega)) ds)."""
    _check_lambda(a2m, lam)
    grid = grid or a2m.grid
    if exponent is None:
        exponent = _exponent(a2m, frame.omega, grid)
    return GOAmplitude(grid, np.exp(0.5 * exponent), "b2", lam, frame.omega, None, _label(a2m))


def _exponent(cm, omega, grid):
    if cm is None or not np.any(_field_of(cm).values):
        return np.zeros(grid.shape)
    return ray_exponent(cm, omega, grid)


def _label(cm):
    if cm is None:
        return "zero"
    base = cm.base if isinstance(cm, MollifiedCoefficient) else cm
    return str(base.descriptor.get("kind", base.label))


def directional_derivative(values, grid: SpaceTimeGrid, omega):
    """(d_t - omega.grad) applied by centered differences."""
    box = grid.box
    out = gradient(values, box, 0)
    for k, o in enumerate(omega):
        if o:
            out = out - o * gradient(values, box, k + 1)
    return out


def transport_residual(b: GOAmplitude, c_raw):
    """(2 d_t - 2 omega.grad -/+ a) b with the unmollified coefficient."""
    grid = b.grid
    if c_raw is None:
        a = 0.0
    else:
        f = _field_of(c_raw)
        a = f.restrict(grid.box).values if f.box != grid.box else f.values
    vals = b.values
    res = 2.0 * directional_derivative(vals, grid, b.omega)
    res = res - a * vals if b.kind == "b1" else res + a * vals
    field = grid.field(res)
    return field, norm(field, "L2_Q")
