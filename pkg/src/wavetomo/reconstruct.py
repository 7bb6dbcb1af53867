"""Identity integrals, the plane-Fourier reduction and slice-based inversion."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .amplitudes import (GUARD, build_b1, build_b2, check_guard, halfline_ray_integral, light_phase,
                         ray_exponent, ray_transform_full, sup_omega_x)
from .coeffs import Coefficient, MollifiedCoefficient, mollify
from .errors import LogBranchError, UsageError
from .grid import Box, LightFrame, ScalarField, SpaceTimeGrid, frequencies, gradient, integrate_box, l2
from .io import read_csv, write_csv
from .solver import _q_values, green_identity_check, solve_eq4

MODES = ("from_coefficients", "from_identity")
LOG_DELTA = 1e-6
SQRT2 = math.sqrt(2.0)

__all__ = ["IdentitySamples", "SpectralSlices", "evaluate_identity", "identity_samples", "ray_transform_full",
           "fubini_reduction_check", "invert_damping", "invert_potential", "coverage_mask"]


# ------------------------------------------------------------------ samples

@dataclass
class IdentitySamples:
    """I(omega, zeta) per sample; ``normalized`` marks values divided by lambda."""

    omega: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    values: np.ndarray
    mode: str = "from_coefficients"
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    header = ("omega_1", "omega_2", "zeta_t", "zeta_1", "zeta_2", "lambda", "re", "im", "mode")

    def __post_init__(self):
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        self.zeta = np.atleast_2d(np.asarray(self.zeta, dtype=float))
        self.lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (self.zeta.shape[0],)).copy()
        self.values = np.asarray(self.values, dtype=np.complex128).ravel()
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        normal = np.concatenate([np.ones((self.omega.shape[0], 1)), -self.omega], axis=1)
        dots = np.einsum("ij,ij->i", self.zeta, normal)
        if np.any(np.abs(dots) > 1e-10 * np.maximum(1.0, np.linalg.norm(self.zeta, axis=1))):
            raise UsageError("a sample frequency is not orthogonal to (1, -omega)")

    def __len__(self):
        return self.values.size

    @staticmethod
    def concat(parts):
        parts = list(parts)
        return IdentitySamples(np.concatenate([p.omega for p in parts]),
                               np.concatenate([p.zeta for p in parts]),
                               np.concatenate([p.lam for p in parts]),
                               np.concatenate([p.values for p in parts]),
                               parts[0].mode, parts[0].normalized, dict(parts[0].meta))

    def directions(self):
        """Unique directions in order of first appearance."""
        seen = []
        for om in self.omega:
            if not any(np.allclose(om, s, atol=1e-12) for s in seen):
                seen.append(om)
        return seen

    def select(self, omega):
        m = np.all(np.abs(self.omega - np.asarray(omega)) < 1e-12, axis=1)
        return IdentitySamples(self.omega[m], self.zeta[m], self.lam[m], self.values[m],
                               self.mode, self.normalized, self.meta)

    def csv_rows(self):
        n = self.omega.shape[1]
        rows = []
        for om, z, lam, v in zip(self.omega, self.zeta, self.lam, self.values):
            om_ = list(om) + [0.0] * (2 - n)
            z_ = list(z) + [0.0] * (3 - (n + 1))
            rows.append((*om_, *z_, lam, v.real, v.imag, self.mode))
        return rows

    def to_csv(self, path):
        return write_csv(path, self.header, self.csv_rows())

    @classmethod
    def from_csv(cls, path, normalized=False):
        _, rows = read_csv(path)
        arr = np.array([[float(v) for v in r[:8]] for r in rows])
        return cls(arr[:, 0:2], arr[:, 2:5], arr[:, 5], arr[:, 6] + 1j * arr[:, 7], rows[0][8], normalized)


@dataclass
class IdentityEvaluation:
    value: complex
    mode: str
    coefficient_value: complex | None = None
    identity_value: complex | None = None

    @property
    def consistency(self):
        if self.coefficient_value is None or self.identity_value is None:
            return None
        return abs(self.coefficient_value - self.identity_value)


def evaluate_identity(grid: SpaceTimeGrid, a1, a2, q1, q2, u1, u2, mode="from_coefficients", u=None,
                      both=False):
    """One identity integral, by direct quadrature or from the right-hand side.

    ``from_identity`` needs the eq4 solution ``u``; it is computed when absent.
    With ``both`` the two modes are evaluated and their gap is reported.
    """
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}")
    U1 = getattr(u1, "u", u1)
    U2 = getattr(u2, "u", u2)
    coef = ident = None
    if mode == "from_coefficients" or both:
        da = _q_values(a2, grid) - _q_values(a1, grid)
        dq = _q_values(q2, grid) - _q_values(q1, grid)
        v1, v2 = U1.values, U2.values
        coef = complex(integrate_box(da * gradient(v2, grid.box, 0) * v1 + dq * v2 * v1, grid.box))
    if mode == "from_identity" or both:
        if u is None:
            u = solve_eq4(grid, a1, q1, a2, q2, U2)
        ident = green_identity_check(U1, u, U2, a1, q1, a2, q2, grid).rhs
    value = coef if mode == "from_coefficients" else ident
    return IdentityEvaluation(value, mode, coef, ident)


def _fourier_sums(G, grid: SpaceTimeGrid, zetas):
    """sum_y G(y) e^{-i zeta.y} for many zeta, axis by axis."""
    axes = [grid.box.axis(k) for k in range(grid.n + 1)]
    out = G
    Es = [np.exp(-1j * np.outer(zetas[:, k], ax)) for k, ax in enumerate(axes)]
    if grid.n == 2:
        H = np.einsum("kt,txy->kxy", Es[0], out, optimize=True)
        return np.einsum("kxy,kx,ky->k", H, Es[1], Es[2], optimize=True)
    H = np.einsum("kt,tx->kx", Es[0], out)
    return np.einsum("kx,kx->k", H, Es[1])


def _trap_weights(grid):
    w = grid.box.trapezoid_weights()
    out = w[0]
    for wk in w[1:]:
        out = np.multiply.outer(out, wk)
    return out


def identity_samples(grid: SpaceTimeGrid, a1, a2, q1, q2, frames, lam, normalize=True,
                     jobs=1, mollified=None):
    """Identity integrals on the principal parts of the GO probes.

    u2 = e^{lam psi} b2 and u1 = e^{-lam psi} b1 are used without remainders, so the
    exponentials cancel analytically and the quadrature is done on amplitudes.
    ``a1``, ``a2`` are Coefficients (or None for zero); mollified at ``lam``.
    """
    for fr in frames:
        check_guard(grid, lam, fr.omega)
    m1 = _moll(a1, lam) if mollified is None else mollified[0]
    if mollified is not None:
        m2 = mollified[1]
    else:
        m2 = m1 if a2 is a1 else _moll(a2, lam)
    da = _q_values(a2, grid) - _q_values(a1, grid)
    dq = _q_values(q2, grid) - _q_values(q1, grid)
    W = _trap_weights(grid)

    def one(fr):
        J1 = _J(m1, fr.omega, grid)
        J2 = J1 if m2 is m1 else _J(m2, fr.omega, grid)
        b2 = np.exp(0.5 * J2)
        b1 = np.exp(-0.5 * J1)
        G = (da * (lam * b2 + gradient(b2, grid.box, 0)) + dq * b2) * b1 * W
        vals = _fourier_sums(G, grid, fr.zeta_grid)
        if normalize:
            vals = vals / lam
        m = fr.zeta_grid.shape[0]
        return IdentitySamples(np.tile(fr.omega, (m, 1)), fr.zeta_grid, lam, vals,
                               "from_coefficients", normalize)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(one, frames))
    else:
        parts = [one(fr) for fr in frames]
    out = IdentitySamples.concat(parts)
    out.meta.update({"lambda": lam, "probes": "ansatz"})
    return out


def _moll(c, lam):
    if c is None or (isinstance(c, Coefficient) and not np.any(c.values)):
        return None
    return mollify(c, lam) if isinstance(c, Coefficient) else c


def _J(m, omega, grid):
    if m is None:
        return np.zeros(grid.shape)
    return ray_exponent(m, omega, grid)


def max_lambda(grid: SpaceTimeGrid, frames, fraction=0.95):
    """Largest lambda inside the overflow guard for every direction, times ``fraction``."""
    return fraction * min(GUARD / (grid.T + sup_omega_x(grid, fr.omega)) for fr in frames)


# ---------------------------------------------------------- Fubini reduction

@dataclass
class FubiniResult:
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def relative_error(self):
        den = np.linalg.norm(self.lhs)
        if den == 0.0:
            return 0.0 if np.linalg.norm(self.rhs) == 0.0 else math.inf
        return float(np.linalg.norm(self.lhs - self.rhs) / den)


def plane_grid(frame: LightFrame, center, half_width, step):
    """Points center + alpha e_par + beta e_perp on a square grid; returns (points, coords)."""
    m = int(math.ceil(half_width / step))
    ticks = step * np.arange(-m, m + 1)
    mesh = np.meshgrid(*([ticks] * frame.n), indexing="ij")
    coords = np.stack([g.ravel() for g in mesh], axis=1)
    pts = np.asarray(center) + coords @ frame.basis
    return pts, coords, ticks


def fubini_reduction_check(a: Coefficient, frame: LightFrame, lam, zetas=None, a1: Coefficient | None = None,
                           plane_step=None):
    """Both sides of the plane reduction of int a_lam b1 b2 for the given frequencies.

    Left: quadrature on the extension box of a_lam b1 b2 (b1 from a1, b2 from a2 = a + a1).
    Right: -2 sqrt2 int_plane (1 - exp(R/2)) e^{-i zeta.kappa} dkappa with R the
    full-line ray transform of a_lam.
    """
    zetas = frame.zeta_grid if zetas is None else np.atleast_2d(zetas)
    frame.check(zetas)
    m2 = mollify(a if a1 is None else _sum(a, a1), lam)
    m1 = None if a1 is None else mollify(a1.extended(m2.base.box.origin[0] * -1.0), lam)
    box = m2.box
    if m1 is not None and m1.box != box:
        raise UsageError("a and a1 must live on the same extension box")
    av = m2.values - (0.0 if m1 is None else _on_box(m1, box))
    support = av != 0
    pts = box.points()[support.ravel()]
    w = box.cell_volume
    lhs = np.zeros(len(zetas), dtype=complex)
    if pts.size:
        J2 = halfline_ray_integral(m2, frame.omega, pts)
        J1 = 0.0 if m1 is None else halfline_ray_integral(m1, frame.omega, pts)
        G = av[support] * np.exp(0.5 * (J2 - J1)) * w
        lhs = np.exp(-1j * zetas @ pts.T) @ G
    # right side on a plane through the support centre
    amf = ScalarField(box, av)
    rhs = np.zeros(len(zetas), dtype=complex)
    if pts.size:
        center = pts.mean(axis=0)
        coords = (pts - center) @ frame.basis.T
        half = np.abs(coords).max() + 2.0 * max(box.spacing)
        step = plane_step or min(box.spacing)
        ppts, _, _ = plane_grid(frame, center, half, step)
        R = ray_transform_full(amf, frame.omega, ppts)
        f = 1.0 - np.exp(0.5 * R)
        rhs = -2.0 * SQRT2 * (np.exp(-1j * zetas @ ppts.T) @ f) * step ** frame.n
    return FubiniResult(lhs, rhs)


def _sum(a, b):
    return Coefficient(a.grid, a.field + b.field, a.label, min(a.p, b.p), min(a.alpha, b.alpha),
                       max(a.support_radius, b.support_radius), a.center, {"kind": "sum"})


def _on_box(m, box):
    if m.box == box:
        return m.values
    return m.field.restrict(box).values if all(
        a <= b for a, b in zip(m.box.origin, box.origin)) else m.field.embed(box).values


# ------------------------------------------------------------------ slices

@dataclass
class SpectralSlices:
    """Per-direction demodulated plane samples and the assembled Cartesian spectrum."""

    center: np.ndarray
    planes: list
    box: Box
    assembled: np.ndarray | None = None
    mask: np.ndarray | None = None

    def points(self):
        Z = np.concatenate([p["zeta"] for p in self.planes])
        V = np.concatenate([p["values"] for p in self.planes])
        return Z, V


def coverage_mask(box: Box, omegas, radius, full_sweep=None):
    """Cartesian frequencies reachable as zeta.(1,-omega) = 0 for the swept omegas.

    A full sweep (directions spread over the whole circle) covers the cone
    |tau| <= |xi|; an arc covers the frequencies whose solving directions
    fall inside the arc, up to half the angular sample spacing.
    """
    ks = frequencies(box)
    mesh = np.meshgrid(*ks, indexing="ij", sparse=True)
    tau = mesh[0]
    xi = np.sqrt(sum(m ** 2 for m in mesh[1:]))
    kk = np.sqrt(tau ** 2 + xi ** 2)
    cone = (np.abs(tau) <= xi) & (kk <= radius)
    cone = np.broadcast_to(cone, box.shape)
    omegas = [np.asarray(o, dtype=float) for o in omegas]
    n = len(omegas[0])
    if n != 2:
        return cone.copy()
    th = np.sort(np.mod([math.atan2(o[1], o[0]) for o in omegas], 2 * np.pi))
    gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
    if full_sweep is None:
        full_sweep = gaps.max() < 0.5 * np.pi and len(omegas) >= 5
    if full_sweep:
        return cone.copy()
    step = np.median(gaps[gaps < np.pi]) if np.any(gaps < np.pi) else 0.0
    # directions theta with cos(theta - arg xi) = tau / |xi|
    arg = np.arctan2(mesh[2], mesh[1])
    ratio = np.clip(tau / np.maximum(xi, 1e-300), -1.0, 1.0)
    acos = np.arccos(ratio)
    sol1 = np.mod(arg + acos, 2 * np.pi)
    sol2 = np.mod(arg - acos, 2 * np.pi)

    def near(sol):
        d = np.full(np.broadcast_shapes(sol.shape), np.inf)
        for t in th:
            diff = np.abs(np.mod(sol - t + np.pi, 2 * np.pi) - np.pi)
            d = np.minimum(d, diff)
        return d <= 0.5 * step + 1e-12

    reach = near(sol1) | near(sol2)
    return cone & np.broadcast_to(reach, box.shape)


def _assemble(Z, V, box: Box, mask, center, neighbours=8, power=2.0):
    """Inverse-distance interpolation of demodulated samples onto the DFT grid."""
    ks = frequencies(box)
    mesh = np.meshgrid(*ks, indexing="ij")
    targets = np.stack([m[mask] for m in mesh], axis=1)
    A = np.zeros(box.shape, dtype=complex)
    if targets.size == 0 or Z.size == 0:
        return A, 0.0
    tree = cKDTree(Z)
    k = min(neighbours, len(Z))
    d, idx = tree.query(targets, k=k)
    if k == 1:
        d, idx = d[:, None], idx[:, None]
    exact = d[:, 0] < 1e-12
    w = 1.0 / np.maximum(d, 1e-12) ** power
    est = np.sum(w * V[idx], axis=1) / np.sum(w, axis=1)
    est[exact] = V[idx[exact, 0]]
    A[mask] = est * np.exp(-1j * targets @ np.asarray(center))
    raw = hermitian_defect(A, mask)
    # Hermitian symmetry of the spectrum of a real field
    A = np.where(mask, 0.5 * (A + np.conj(_flip(A))), 0.0)
    return A, raw


def _flip(A):
    """A(-k) on the DFT grid."""
    for ax, m in enumerate(A.shape):
        A = np.take(A, np.mod(-np.arange(m), m), axis=ax)
    return A


def hermitian_defect(A, mask):
    neg = _flip(A)
    scale = np.abs(A[mask]).max() if np.any(mask) else 1.0
    return float(np.abs(A - np.conj(neg))[mask].max() / max(scale, 1e-300)) if np.any(mask) else 0.0


@dataclass
class ReconstructionReport:
    relative_error: float | None
    coverage_fraction: float
    samples: int
    directions: int
    notes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def text(self):
        lines = [f"relative L2(Q) error: {'n/a' if self.relative_error is None else f'{self.relative_error:.6f}'}",
                 f"covered frequency fraction: {self.coverage_fraction:.6f}",
                 f"samples: {self.samples} over {self.directions} directions"]
        lines += [f"{k}: {v}" for k, v in sorted(self.extras.items())]
        lines += self.notes
        return "\n".join(lines) + "\n"


def relative_error(rec, truth, grid: SpaceTimeGrid):
    t = truth.on_Q().values if isinstance(truth, Coefficient) else np.asarray(
        truth.values if isinstance(truth, ScalarField) else truth)
    den = l2(t, grid.box)
    num = l2(np.asarray(rec) - t, grid.box)
    if den == 0.0:
        return num
    return num / den


def _plane_axes(samples: IdentitySamples, frame: LightFrame):
    coords = frame.coordinates(samples.zeta)
    step = None
    for k in range(coords.shape[1]):
        u = np.unique(np.round(coords[:, k], 12))
        if u.size > 1:
            d = np.min(np.diff(u))
            step = d if step is None else min(step, d)
    idx = np.rint(coords / step).astype(int)
    return coords, idx, step


def _continue_polynomial(A, box, mask, degree, radius):
    """Experimental: extend each spatial-frequency column in tau by a polynomial fit."""
    ks = frequencies(box)
    tau = ks[0]
    out = A.copy()
    for idx in np.ndindex(*box.shape[1:]):
        col = (slice(None),) + idx
        known = mask[col]
        if known.sum() <= degree + 1:
            continue
        xi = math.sqrt(sum(ks[j + 1][i] ** 2 for j, i in enumerate(idx)))
        target = (~known) & (np.abs(tau) <= min(2.0 * xi, radius))
        if not target.any():
            continue
        for part in (np.real, np.imag):
            c = np.polyfit(tau[known], part(A[col][known]), degree)
            vals = np.polyval(c, tau[target])
            if part is np.real:
                out[col][target] = vals
            else:
                out[col][target] += 1j * vals
    return out


def _finish(grid, slices_obj, Z, V, mask, center, truth, neighbours, power, notes, extras, continuation, degree):
    box = grid.box
    A, raw = _assemble(Z, V, box, mask, center, neighbours, power)
    extras["hermitian_defect_before_symmetrization"] = raw
    if continuation == "poly":
        A = _continue_polynomial(A, box, mask, degree, np.sqrt((Z ** 2).sum(axis=1)).max())
        notes.append("experimental polynomial continuation applied outside the cone")
    slices_obj.assembled = A
    slices_obj.mask = mask
    rec = np.real(np.fft.ifftn(A)) / box.cell_volume
    err = relative_error(rec, truth, grid) if truth is not None else None
    extras["hermitian_defect"] = hermitian_defect(A, mask)
    report = ReconstructionReport(err, float(mask.mean()), int(len(V)), len(slices_obj.planes), notes, extras)
    return grid.field(rec), report, slices_obj


def invert_damping(samples: IdentitySamples, grid: SpaceTimeGrid, center=None, truth=None, delta=LOG_DELTA,
                   neighbours=8, power=2.0, normalization=1.0, continuation="none", degree=2,
                   return_slices=False):
    """Recover the damping difference from normalized identity samples.

    Per direction: f^ = -(I/lam) / (2 sqrt2), inverse plane DFT, R = 2 ln(1 - f),
    forward plane DFT, a^ = sqrt2 F_R, then slice assembly and inverse DFT on Q.
    ``normalization`` rescales the sqrt2 Jacobian (1 is correct; other values
    exist only to exercise failure paths).
    """
    if not samples.normalized:
        raise UsageError("damping inversion expects samples divided by lambda")
    center = np.asarray(grid.center if center is None else center, dtype=float)
    planes = []
    for om in samples.directions():
        sub = samples.select(om)
        frame = LightFrame(om)
        coords, idx, step = _plane_axes(sub, frame)
        P = 2.0 * np.pi / step
        M = int(idx.max() - idx.min() + 1)
        h = P / M
        ticks = h * (np.arange(M) - (M - 1) / 2.0)
        # demodulate about the support centre: F(p) = int f(c + kappa) e^{-i zeta.kappa}
        fhat = -sub.values / (2.0 * SQRT2) * np.exp(1j * sub.zeta @ center)
        spec = np.zeros((M,) * frame.n, dtype=complex)
        off = idx - idx.min(axis=0)
        spec[tuple(off.T)] = fhat
        pk = step * (np.arange(M) - (M - 1) / 2.0)
        E = np.exp(1j * np.outer(ticks, pk))          # (space, freq)
        f = spec
        for ax in range(frame.n):
            f = np.moveaxis(np.tensordot(E, np.moveaxis(f, ax, 0), axes=(1, 0)), 0, ax)
        f = np.real(f) / P ** frame.n
        one_minus = 1.0 - f
        if np.any(one_minus <= delta):
            bad = np.unravel_index(np.argmin(one_minus), one_minus.shape)
            loc = center + np.array([ticks[i] for i in bad]) @ frame.basis
            raise LogBranchError(f"1 - f = {one_minus[bad]:.3g} <= delta at plane point {loc.tolist()}", loc)
        R = 2.0 * np.log(one_minus)
        FR = R.astype(complex)
        Einv = np.exp(-1j * np.outer(pk, ticks))     # (freq, space)
        for ax in range(frame.n):
            FR = np.moveaxis(np.tensordot(Einv, np.moveaxis(FR, ax, 0), axes=(1, 0)), 0, ax)
        FR *= h ** frame.n
        ahat = SQRT2 * normalization * FR[tuple(off.T)]
        planes.append({"omega": np.asarray(om), "zeta": sub.zeta, "values": ahat, "R": R,
                       "ticks": ticks, "frame": frame})
    sl = SpectralSlices(center, planes, grid.box)
    Z, V = sl.points()
    radius = _inscribed_radius(samples)
    mask = coverage_mask(grid.box, [p["omega"] for p in planes], radius)
    notes = ["damping recovered through the guarded logarithm"]
    rec, report, sl = _finish(grid, sl, Z, V, mask, center, truth, neighbours, power, notes,
                              {"min_one_minus_f": float(min(np.exp(0.5 * p["R"]).min() for p in planes))},
                              continuation, degree)
    return (rec, report, sl) if return_slices else (rec, report)


def invert_potential(samples: IdentitySamples, grid: SpaceTimeGrid, center=None, truth=None,
                     neighbours=8, power=2.0, normalization=1.0, continuation="none", degree=2,
                     return_slices=False):
    """Linear slice assembly: I(omega, zeta) approximates int q e^{-i zeta.y}."""
    center = np.asarray(grid.center if center is None else center, dtype=float)
    vals = samples.values * (samples.lam if samples.normalized else 1.0)
    planes = []
    for om in samples.directions():
        m = np.all(np.abs(samples.omega - om) < 1e-12, axis=1)
        planes.append({"omega": np.asarray(om), "zeta": samples.zeta[m],
                       "values": normalization * vals[m] * np.exp(1j * samples.zeta[m] @ center)})
    sl = SpectralSlices(center, planes, grid.box)
    Z = np.concatenate([p["zeta"] for p in planes])
    V = np.concatenate([p["values"] for p in planes])
    # the damping path demodulates inside the plane step; here do it once
    radius = _inscribed_radius(samples)
    mask = coverage_mask(grid.box, [p["omega"] for p in planes], radius)
    rec, report, sl = _finish(grid, sl, Z, V, mask, center, truth, neighbours, power,
                              ["potential recovered by linear slice assembly"], {}, continuation, degree)
    return (rec, report, sl) if return_slices else (rec, report)


def _inscribed_radius(samples: IdentitySamples):
    """Largest radius fully inside every plane's square frequency grid."""
    rad = math.inf
    for om in samples.directions():
        sub = samples.select(om)
        coords = LightFrame(om).coordinates(sub.zeta)
        rad = min(rad, float(np.abs(coords).max(axis=0).min()))
    return rad


def slice_consistency(sl: SpectralSlices, count=5):
    """Worst relative disagreement of two directions' spectra along their common line.

    Damping planes are evaluated exactly from their recovered ray transforms;
    potential planes by cubic interpolation of their own samples.
    """
    worst = 0.0
    planes = sl.planes
    for i in range(len(planes)):
        for j in range(i + 1, len(planes)):
            pi, pj = planes[i], planes[j]
            fi, fj = _frame(pi), _frame(pj)
            d = np.cross(fi.normal, fj.normal)
            if np.linalg.norm(d) < 1e-8:
                continue
            d /= np.linalg.norm(d)
            rmax = min(np.abs(fi.coordinates(pi["zeta"])).max(axis=0).min(),
                       np.abs(fj.coordinates(pj["zeta"])).max(axis=0).min())
            Zl = np.outer(np.linspace(-rmax, rmax, 2 * count + 1), d)
            vi = _plane_values(pi, fi, Zl, sl.center)
            vj = _plane_values(pj, fj, Zl, sl.center)
            den = np.linalg.norm(vi)
            if den > 0:
                worst = max(worst, float(np.linalg.norm(vi - vj) / den))
    return worst


def _frame(plane):
    return plane.get("frame") or LightFrame(plane["omega"])


def _plane_values(plane, frame, zetas, center):
    if "R" in plane:
        return _plane_spectrum(plane, zetas, center)
    from scipy.interpolate import RegularGridInterpolator
    coords = frame.coordinates(plane["zeta"])
    axes = [np.unique(np.round(coords[:, k], 10)) for k in range(coords.shape[1])]
    shape = tuple(len(ax) for ax in axes)
    idx = tuple(np.searchsorted(ax, np.round(coords[:, k], 10)) for k, ax in enumerate(axes))
    grid = np.zeros(shape, dtype=complex)
    grid[idx] = plane["values"]
    target = frame.coordinates(zetas)
    re = RegularGridInterpolator(axes, grid.real, method="cubic")(target)
    im = RegularGridInterpolator(axes, grid.imag, method="cubic")(target)
    return re + 1j * im


def _plane_spectrum(plane, zetas, center):
    """sqrt2 F_R at arbitrary in-plane frequencies (demodulated about ``center``)."""
    frame = plane["frame"]
    ticks = plane["ticks"]
    h = ticks[1] - ticks[0]
    coords = frame.coordinates(zetas)
    R = plane["R"]
    out = np.empty(len(zetas), dtype=complex)
    for k, c in enumerate(coords):
        F = R.astype(complex)
        for ax in range(frame.n):
            F = np.tensordot(np.exp(-1j * c[ax] * ticks), F, axes=(0, 0))
        out[k] = SQRT2 * F * h ** frame.n
    return out


# ------------------------------------------------------------ null test

@dataclass
class NullTable:
    rows: list
    header = ("omega_1", "omega_2", "zeta_t", "zeta_1", "zeta_2", "lambda", "re", "im", "abs_identity",
              "abs_coefficients")

    @property
    def max_abs(self):
        return max((max(r[8], r[9]) for r in self.rows), default=0.0)


def _probe_pair(grid, a1, q1, a2, q2, frame, zetas, lam, lambda_cap):
    """Solved GO probes u2 (grow) and u1(zeta) (decay) for one direction and lambda."""
    from .amplitudes import LAMBDA_CAP
    from .probes import build_probe
    cap = LAMBDA_CAP if lambda_cap is None else lambda_cap
    m1, m2 = _moll(a1, lam), _moll(a2, lam)
    J1 = _J(m1, frame.omega, grid)
    J2 = J1 if m2 is m1 else _J(m2, frame.omega, grid)
    u2 = build_probe(grid, a2, q2, build_b2(m2, frame, lam, grid, J2), lam, "grow", cap)
    u1s = [build_probe(grid, a1, q1, build_b1(m1, frame, z, lam, grid, J1), lam, "decay", cap) for z in zetas]
    return u2, u1s


def null_test(grid: SpaceTimeGrid, a, q, frames, lambdas, zeta_count=3, lambda_cap=None, jobs=1):
    """Identity samples from the right-hand side for an identical pair (a, q) = (a1, q1) = (a2, q2).

    Each entry solves both probes and the eq4 problem, so the from_identity
    value is what the data-side of the identity produces.
    """
    tasks = []
    for fr in frames:
        sub = LightFrame(fr.omega, fr.spacing or 2.0 * np.pi, zeta_count)
        for lam in lambdas:
            tasks.append((sub, float(lam)))

    def one(task):
        fr, lam = task
        u2, u1s = _probe_pair(grid, a, q, a, q, fr, fr.zeta_grid, lam, lambda_cap)
        rows = []
        for z, u1 in zip(fr.zeta_grid, u1s):
            ev = evaluate_identity(grid, a, a, q, q, u1, u2, "from_identity", both=True)
            rows.append((*fr.omega, *z, lam, ev.value.real, ev.value.imag, abs(ev.identity_value),
                         abs(ev.coefficient_value)))
        return rows

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(one, tasks))
    else:
        parts = [one(t) for t in tasks]
    return NullTable([r for p in parts for r in p])


@dataclass
class LambdaSweep:
    rows: list
    slope: float
    header = ("lambda", "abs_I_over_lambda")


def identity_lambda_sweep(grid: SpaceTimeGrid, a, q1, q2, frame: LightFrame, zeta, lambdas, lambda_cap=None):
    """|I|/lambda from solved probes for a pair sharing the damping ``a``.

    With equal damping the first-order term of the identity vanishes, and
    the normalized integral decays as lambda grows.
    """
    from .slopes import fit_slope
    rows = []
    for lam in lambdas:
        u2, (u1,) = _probe_pair(grid, a, q1, a, q2, frame, [zeta], lam, lambda_cap)
        ev = evaluate_identity(grid, a, a, q1, q2, u1, u2, "from_coefficients")
        rows.append((float(lam), abs(ev.value) / lam))
    return LambdaSweep(rows, fit_slope([r[0] for r in rows], [r[1] for r in rows]))
