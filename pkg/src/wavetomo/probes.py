"""Geometric-optics solutions e^{+-lam psi}(b + w) and their remainder diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .amplitudes import LAMBDA_CAP, GOAmplitude, check_guard, light_phase
from .errors import InstabilityError, UsageError
from .grid import SpaceTimeGrid, integrate_box, l2
from .slopes import fit_slope
from .solver import _q_values, solve_ibvp

SIGNS = {"grow": 1, "decay": -1}
DOMINANCE = 0.2


@dataclass
class ProbeSolution:
    u: object
    amplitude: GOAmplitude
    w: object
    lam: float
    sign: str
    omega: np.ndarray
    w_l2: float
    w_h1: float
    pde_residual_norm: float
    residual_ratio: float
    meta: dict = field(default_factory=dict)

    @property
    def lam_w(self):
        return self.lam * self.w_l2

    @property
    def dominated(self):
        """True when the discretization residual swamps the measured remainder."""
        return self.pde_residual_norm > DOMINANCE * max(self.lam_w, 1e-300)


def _shift(v, axis, k):
    """v[i + k] for the nodes i = 2 .. N-3 along ``axis``."""
    idx = [slice(None)] * v.ndim
    idx[axis] = slice(2 + k, v.shape[axis] - 2 + k)
    return v[tuple(idx)]


def _d1(v, h, axis):
    return (-_shift(v, axis, 2) + 8.0 * _shift(v, axis, 1)
            - 8.0 * _shift(v, axis, -1) + _shift(v, axis, -2)) / (12.0 * h)


def _d2(v, h, axis):
    return (-_shift(v, axis, 2) + 16.0 * _shift(v, axis, 1) - 30.0 * _shift(v, axis, 0)
            + 16.0 * _shift(v, axis, -1) - _shift(v, axis, -2)) / (12.0 * h * h)


def _inner(v, axis_skip=None):
    idx = tuple(slice(2, -2) if k != axis_skip else slice(None) for k in range(v.ndim))
    return v[idx]


def wave_residual4(u, a, q, grid: SpaceTimeGrid):
    """Fourth-order stencil residual of u_tt - Lap u + a u_t + q u on nodes two cells in."""
    h = grid.spacing
    res = _inner(_d2(u, h[0], 0), 0) + _inner(a, None) * _inner(_d1(u, h[0], 0), 0)
    for k in range(grid.n):
        res = res - _inner(_d2(u, h[k + 1], k + 1), k + 1)
    return res + _inner(q) * _inner(u)


def _inner_box(grid):
    from .grid import Box
    b = grid.box
    return Box([o + 2 * s for o, s in zip(b.origin, b.spacing)], b.spacing, [m - 4 for m in b.shape])


def _second(v, h, axis):
    """Second-order second derivative along ``axis``, one-sided at the ends."""
    out = np.empty_like(v)
    m = v.shape[axis]

    def sl(i):
        idx = [slice(None)] * v.ndim
        idx[axis] = i
        return tuple(idx)

    out[sl(slice(1, m - 1))] = (v[sl(slice(2, m))] - 2.0 * v[sl(slice(1, m - 1))] + v[sl(slice(0, m - 2))]) / h ** 2
    out[sl(0)] = (2.0 * v[sl(0)] - 5.0 * v[sl(1)] + 4.0 * v[sl(2)] - v[sl(3)]) / h ** 2
    out[sl(m - 1)] = (2.0 * v[sl(m - 1)] - 5.0 * v[sl(m - 2)] + 4.0 * v[sl(m - 3)] - v[sl(m - 4)]) / h ** 2
    return out


def _conjugated_parts(grid, A, sg, lam, omega):
    c = 2.0 * sg * lam + A
    qe = sg * lam * A
    return c, qe


def _solve_conjugated(grid: SpaceTimeGrid, A, Q, bv, lam, sg, omega, backend=None):
    """w with zero traces solving the conjugated equation

        w_tt - Lap w + c w_t - 2 sg lam omega.grad w + (sg lam A + q) w = -(same operator) b,

    where c = 2 sg lam + A.  Equivalent to the IBVP for e^{sg lam psi}(b + w)
    with the ansatz traces, but free of the exponential scale.
    """
    from . import kernels
    h = grid.spacing
    c, qe = _conjugated_parts(grid, A, sg, lam, omega)
    qe = qe + Q
    F = -(_second(bv, h[0], 0) + c * np.gradient(bv, h[0], axis=0, edge_order=2) + qe * bv)
    for k in range(grid.n):
        F += _second(bv, h[k + 1], k + 1)
        F += 2.0 * sg * lam * omega[k] * np.gradient(bv, h[k + 1], axis=k + 1, edge_order=2)
    dt = grid.dt
    inv_h2 = np.array([1.0 / hk ** 2 for hk in grid.dx])
    inner = (slice(1, -1),) * grid.n

    def run(F):
        w = np.zeros(grid.shape)
        w[1][inner] = 0.5 * dt * dt * F[0][inner]
        for n in range(1, grid.nt - 1):
            adv = np.zeros(grid.nx)
            for k in range(grid.n):
                lo = [slice(1, -1)] * grid.n
                hi = [slice(1, -1)] * grid.n
                lo[k] = slice(0, -2)
                hi[k] = slice(2, None)
                adv[inner] += omega[k] * (w[n][tuple(hi)] - w[n][tuple(lo)]) / (2.0 * grid.dx[k])
            kernels.leapfrog_step(w[n - 1], w[n], c[n], qe[n], F[n] + 2.0 * sg * lam * adv, dt, inv_h2,
                                  w[n + 1], backend)
            if not np.isfinite(w[n + 1]).all():
                raise InstabilityError(n + 1)
        return w

    if np.iscomplexobj(F):
        return run(F.real) + 1j * run(F.imag)
    return run(F)


def conjugated_residual4(v, A, Q, lam, sg, omega, grid: SpaceTimeGrid):
    """Fourth-order residual of e^{-sg lam psi} L_{A,q} e^{sg lam psi} v on nodes two cells in."""
    h = grid.spacing
    c, qe = _conjugated_parts(grid, A, sg, lam, omega)
    res = _inner(_d2(v, h[0], 0), 0) + _inner(c) * _inner(_d1(v, h[0], 0), 0)
    for k in range(grid.n):
        res = res - _inner(_d2(v, h[k + 1], k + 1), k + 1)
        res = res - 2.0 * sg * lam * omega[k] * _inner(_d1(v, h[k + 1], k + 1), k + 1)
    return res + _inner(qe + Q) * _inner(v)


def build_probe(grid: SpaceTimeGrid, a, q, b: GOAmplitude, lam, sign, lambda_cap=LAMBDA_CAP,
                method="direct"):
    """Solve the IBVP with the traces of e^{+-lam psi} b and extract w.

    ``sign='grow'`` solves L_{a,q} u = 0; ``sign='decay'`` solves
    L_{-a,q} u = 0.  ``a`` is given with its own sign in both cases.
    ``method='direct'`` time-steps u itself; ``'conjugated'`` time-steps w from
    the conjugated equation, which is well conditioned for growing probes.
    """
    if sign not in SIGNS:
        raise UsageError("sign must be 'grow' or 'decay'")
    if method not in ("direct", "conjugated"):
        raise UsageError("method must be 'direct' or 'conjugated'")
    sg = SIGNS[sign]
    check_guard(grid, lam, b.omega, lambda_cap)
    A = sg * _q_values(a, grid)
    Q = _q_values(q, grid)
    omega = np.asarray(b.omega, dtype=float)
    psi = light_phase(grid, omega)
    e = np.exp(sg * lam * psi)
    bv = b.values
    if method == "direct":
        U = e * bv
        bt0 = (-3.0 * bv[0] + 4.0 * bv[1] - bv[2]) / (2.0 * grid.dt)
        v1 = e[0] * (sg * lam * bv[0] + bt0)
        u = solve_ibvp(grid, A, Q, grid.field(U), U[0], v1)
        wv = np.exp(-sg * lam * psi) * u.values - bv
    else:
        wv = _solve_conjugated(grid, A, Q, bv, lam, sg, omega)
        u = grid.field(e * (bv + wv))
    w = grid.field(wv)
    box = grid.box
    w_l2 = l2(wv, box)
    h1 = w_l2 ** 2
    for k in range(box.ndim):
        h1 += float(integrate_box(np.abs(np.gradient(wv, box.spacing[k], axis=k, edge_order=2)) ** 2, box))
    v = bv + wv
    r = conjugated_residual4(v, A, Q, lam, sg, omega, grid)
    ib = _inner_box(grid)
    weighted = l2(r, ib)
    ei = _inner(e)
    ratio = l2(ei * r, ib) / max(l2(ei * _inner(v), ib), 1e-300)
    return ProbeSolution(u, b, w, float(lam), sign, omega, w_l2, math.sqrt(h1),
                         weighted, ratio, {"zeta": None if b.zeta is None else b.zeta.tolist(), "method": method})


@dataclass
class RemainderReport:
    rows: list
    slope_lam_w: float
    slope_w_h1: float
    inconclusive: bool
    header = ("lambda", "lambda_w_L2", "w_H1", "pde_residual", "dominated")

    def summary(self):
        flag = "INCONCLUSIVE (discretization dominates)" if self.inconclusive else "clear"
        return (f"slope lambda*||w||_L2 = {self.slope_lam_w:.4f}; slope ||w||_H1 = {self.slope_w_h1:.4f}; "
                f"residual flag: {flag}")


def remainder_decay_report(probes):
    """Slopes of lam ||w|| and ||w||_H1 against lam across a probe family."""
    probes = sorted(probes, key=lambda p: p.lam)
    if len(probes) < 4:
        raise UsageError("need at least 4 probes")
    rows = [(p.lam, p.lam_w, p.w_h1, p.pde_residual_norm, p.dominated) for p in probes]
    lam = [r[0] for r in rows]
    return RemainderReport(rows, fit_slope(lam, [r[1] for r in rows]),
                           fit_slope(lam, [r[2] for r in rows]),
                           any(r[4] for r in rows))
