"""Leapfrog solver for the damped wave IBVP, traces and partial-boundary data."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import CFLError, InstabilityError, PreconditionError, UsageError
from .grid import (CFL_LIMIT, Face, ScalarField, SpaceTimeGrid, faces, face_index, gradient,
                   integrate_box, neumann_values, norm, restrict_trace)


def _q_values(c, grid: SpaceTimeGrid):
    """Coefficient-like input as a real array on Q."""
    if c is None:
        return np.zeros(grid.shape)
    if hasattr(c, "on_Q"):
        return np.asarray(c.on_Q().values, dtype=float)
    if isinstance(c, ScalarField):
        if c.box != grid.box:
            c = c.restrict(grid.box)
        vals = c.values
    else:
        vals = np.asarray(c)
    if np.iscomplexobj(vals):
        raise UsageError("coefficients must be real")
    return np.broadcast_to(np.asarray(vals, dtype=float), grid.shape)


def _spatial(v, grid: SpaceTimeGrid):
    if v is None:
        return np.zeros(grid.nx)
    vals = v.values if isinstance(v, ScalarField) else np.asarray(v)
    return np.broadcast_to(vals, grid.nx)


def _dirichlet(g, grid: SpaceTimeGrid):
    """Dirichlet data as a full Q-shaped array whose boundary nodes carry g."""
    if g is None:
        return None
    if isinstance(g, ScalarField):
        if g.kind != "space_time":
            raise UsageError("Dirichlet data must be a space_time field or a face mapping")
        return np.asarray(g.values)
    if isinstance(g, dict):
        dtype = np.result_type(*[np.asarray(f.values).dtype for f in g.values()], np.float64)
        out = np.zeros(grid.shape, dtype=dtype)
        for fc, f in g.items():
            out[face_index(fc, grid.n)] = f.values if isinstance(f, ScalarField) else f
        return out
    return np.broadcast_to(np.asarray(g), grid.shape)


def _set_boundary(level, gl):
    for axis in range(level.ndim):
        idx = [slice(None)] * level.ndim
        for side in (0, -1):
            idx[axis] = side
            level[tuple(idx)] = gl[tuple(idx)]


def laplacian(level, dx):
    """Five-point Laplacian on interior nodes (zeros on the edge)."""
    out = np.zeros_like(level)
    inner = (slice(1, -1),) * level.ndim
    for axis, h in enumerate(dx):
        lo = list(inner)
        hi = list(inner)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out[inner] += (level[tuple(lo)] - 2.0 * level[inner] + level[tuple(hi)]) / (h * h)
    return out


def _solve_real(grid, a, q, gfull, v0, v1, F, backend):
    dt = grid.dt
    inv_h2 = np.array([1.0 / h ** 2 for h in grid.dx])
    u = np.empty(grid.shape)
    u[0] = v0
    if gfull is not None:
        _set_boundary(u[0], gfull[0])
    lap = laplacian(u[0], grid.dx)
    u[1] = u[0] + dt * v1 + 0.5 * dt * dt * (lap - a[0] * v1 - q[0] * u[0] + F[0])
    _set_boundary(u[1], gfull[1] if gfull is not None else np.zeros(grid.nx))
    zero = np.zeros(grid.nx)
    for n in range(1, grid.nt - 1):
        kernels.leapfrog_step(u[n - 1], u[n], a[n], q[n], F[n], dt, inv_h2, u[n + 1], backend)
        _set_boundary(u[n + 1], gfull[n + 1] if gfull is not None else zero)
        if not np.isfinite(u[n + 1]).all():
            raise InstabilityError(n + 1)
    return u


def solve_ibvp(grid: SpaceTimeGrid, a=None, q=None, g=None, v0=None, v1=None, forcing=None,
               backend=None, compat_tol=1e-8):
    """Solve u_tt - Lap u + a u_t + q u = F on Q with Dirichlet data g and (u, u_t)(0) = (v0, v1).

    Complex data are handled as two real solves.  Returns the space-time field.
    """
    if grid.cfl > CFL_LIMIT:
        raise CFLError(f"CFL number {grid.cfl:.4f} exceeds {CFL_LIMIT}")
    a = _q_values(a, grid)
    q = _q_values(q, grid)
    v0 = _spatial(v0, grid)
    v1 = _spatial(v1, grid)
    gfull = _dirichlet(g, grid)
    F = np.zeros(grid.shape) if forcing is None else (
        forcing.values if isinstance(forcing, ScalarField) else np.broadcast_to(forcing, grid.shape))
    if gfull is not None and compat_tol is not None:
        edge = np.ones(grid.nx, dtype=bool)
        edge[(slice(1, -1),) * grid.n] = False
        gap = np.abs(gfull[0][edge] - v0[edge]).max()
        scale = max(1.0, float(np.abs(v0).max()))
        if gap > compat_tol * scale:
            raise PreconditionError(f"g(0) and v0 disagree on the boundary by {gap:.3g}")
    parts = [gfull, v0, v1, F]
    if any(p is not None and np.iscomplexobj(p) for p in parts):
        re = _solve_real(grid, a, q, None if gfull is None else gfull.real, v0.real, v1.real,
                         np.real(F), backend)
        im = _solve_real(grid, a, q, None if gfull is None else gfull.imag, v0.imag, v1.imag,
                         np.imag(F), backend)
        vals = re + 1j * im
    else:
        vals = _solve_real(grid, a, q, gfull, v0, v1, np.asarray(F, dtype=float), backend)
    return grid.field(vals)


def solve_eq4(grid: SpaceTimeGrid, a1, q1, a2, q2, u2):
    """u with L_{a1,q1} u = (a2 - a1) d_t u2 + (q2 - q1) u2 and zero data."""
    u2v = u2.values if isinstance(u2, ScalarField) else np.asarray(u2)
    da = _q_values(a2, grid) - _q_values(a1, grid)
    dq = _q_values(q2, grid) - _q_values(q1, grid)
    F = da * gradient(u2v, grid.box, 0) + dq * u2v
    return solve_ibvp(grid, a1, q1, None, None, None, F)


def energy(u: ScalarField, grid: SpaceTimeGrid, q=None):
    """Discrete energy per time level: int |u_t|^2 + |grad u|^2 + q |u|^2 dx."""
    v = u.values
    ut = gradient(v, grid.box, 0)
    dens = np.abs(ut) ** 2
    for k in range(grid.n):
        dens = dens + np.abs(gradient(v, grid.box, k + 1)) ** 2
    if q is not None:
        dens = dens + _q_values(q, grid) * np.abs(v) ** 2
    sb = grid.spatial_box
    return np.array([integrate_box(d, sb) for d in dens])


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class PartialBoundaryGeometry:
    """Reference direction, aperture and the observed faces V'."""

    n: int
    omega0: tuple
    epsilon: float
    V_faces: tuple

    def __post_init__(self):
        om = np.asarray(self.omega0, dtype=float)
        if om.size != self.n:
            raise UsageError("omega0 has the wrong dimension")
        object.__setattr__(self, "omega0", tuple(om / np.linalg.norm(om)))
        object.__setattr__(self, "V_faces", tuple(sorted(set(self.V_faces))))

    @classmethod
    def default(cls, n, omega0, epsilon):
        """Smallest union of whole faces satisfying the aperture condition."""
        geom = cls(n, tuple(omega0), float(epsilon), ())
        need = set()
        for om in geom.cap_directions():
            need.update(geom.minus_faces(om, epsilon))
        return cls(n, geom.omega0, float(epsilon), tuple(need))

    def cap_directions(self, samples=181):
        """Directions omega with |omega - omega0| <= epsilon."""
        om0 = np.asarray(self.omega0)
        if self.n == 1:
            return [np.array([s]) for s in (-1.0, 1.0) if abs(s - om0[0]) <= self.epsilon + 1e-12]
        if self.n != 2:
            raise UsageError("geometry sweeps are implemented for n <= 2")
        theta0 = math.atan2(om0[1], om0[0])
        half = 2.0 * math.asin(min(1.0, self.epsilon / 2.0))
        return [np.array([math.cos(t), math.sin(t)])
                for t in theta0 + np.linspace(-half, half, samples)]

    def plus_faces(self, omega, r=0.0):
        """Faces with nu.omega > r (shadowed for r = 0)."""
        return [f for f in faces(self.n) if float(f.normal(self.n) @ np.asarray(omega)) > r]

    def minus_faces(self, omega, r=0.0):
        """Faces with nu.omega <= r (illuminated for r = 0)."""
        return [f for f in faces(self.n) if float(f.normal(self.n) @ np.asarray(omega)) <= r]

    def check(self):
        """Raise unless every cap direction has its epsilon-illuminated faces inside V'."""
        V = set(self.V_faces)
        for om in self.cap_directions():
            missing = set(self.minus_faces(om, self.epsilon)) - V
            if missing:
                raise PreconditionError(
                    f"faces {[f.label for f in missing]} are eps-illuminated for omega={om} but not observed")
            plus, minus = self.plus_faces(om), self.minus_faces(om)
            if set(plus) & set(minus) or len(plus) + len(minus) != 2 * self.n:
                raise PreconditionError("face classification is not a partition")
        return True

    def to_dict(self):
        return {"n": self.n, "omega0": list(self.omega0), "epsilon": self.epsilon,
                "V_faces": [f.label for f in self.V_faces]}


@dataclass
class MeasurementSet:
    """Inputs (g, v0, v1) with the observed normal derivative on V and u(T)."""

    grid: SpaceTimeGrid
    geometry: PartialBoundaryGeometry
    neumann_V: dict
    u_T: ScalarField
    inputs: dict = field(default_factory=dict)
    full: dict | None = None

    def save(self, directory, meta=None):
        from .io import write_wtf
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        g = self.grid
        R = g.extension_radius
        files = []
        for fc, f in sorted(self.neumann_V.items()):
            files.append(write_wtf(d / f"neumann_V_{fc.label}.wtf", f, g.T, g.lengths, R))
        files.append(write_wtf(d / "u_T.wtf", self.u_T, g.T, g.lengths, R))
        if self.full:
            for fc, f in sorted(self.full["neumann"].items()):
                files.append(write_wtf(d / f"neumann_{fc.label}.wtf", f, g.T, g.lengths, R))
            files.append(write_wtf(d / "dt_u_T.wtf", self.full["dt_T"], g.T, g.lengths, R))
        info = {"geometry": self.geometry.to_dict(), "T": g.T, "L": list(g.lengths),
                "nt": g.nt, "nx": list(g.nx), "files": [p.name for p in files]}
        if meta:
            info.update(meta)
        (d / "measurement.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
        return files

    def difference(self, other):
        """Relative L2 differences of u(T) and of the observed flux."""
        du = norm(self.u_T - other.u_T, "L2_omega_at_t") / max(norm(self.u_T, "L2_omega_at_t"), 1e-300)
        num = sum(norm(self.neumann_V[f] - other.neumann_V[f], "L2_sigma") ** 2 for f in self.neumann_V)
        den = sum(norm(self.neumann_V[f], "L2_sigma") ** 2 for f in self.neumann_V)
        return du, math.sqrt(num / den) if den > 0 else math.sqrt(num)


def boundary_operator(grid: SpaceTimeGrid, a, q, g, v0, v1, geom: PartialBoundaryGeometry,
                      oracle=False):
    """Run the solver and record d_nu u on V and u(T)."""
    u = solve_ibvp(grid, a, q, g, v0, v1)
    flux = {fc: restrict_trace(u, "neumann_sigma", fc) for fc in geom.V_faces}
    full = None
    if oracle:
        full = {"neumann": restrict_trace(u, "neumann_sigma"),
                "dirichlet": restrict_trace(u, "dirichlet_sigma"),
                "dt_T": restrict_trace(u, "dt_at_T")}
    return MeasurementSet(grid, geom, flux, restrict_trace(u, "at_T"),
                          {"g": g, "v0": v0, "v1": v1}, full)


# ------------------------------------------------------------ Green identity

@dataclass
class GreenIdentityResult:
    lhs: complex
    rhs: complex
    terms: dict

    @property
    def mismatch(self):
        return abs(self.lhs - self.rhs)

    @property
    def scale(self):
        return max(abs(self.lhs), abs(self.rhs), *[abs(v) for v in self.terms.values()])


def green_identity_check(u1, u, u2, a1, q1, a2, q2, grid: SpaceTimeGrid | None = None):
    """Both sides of the integral identity with every boundary term kept.

    Left:  int_Q (a2-a1) d_t u2 u1 + (q2-q1) u2 u1.
    Right: int_Omega [u1 d_t u - u d_t u1 + a1 u u1](T) - int_Sigma u1 d_nu u
           - int_Q d_t a1 u u1.
    """
    u1 = getattr(u1, "u", u1)
    if grid is None:
        from .grid import grid_of
        grid = grid_of(u)
    box, sb = grid.box, grid.spatial_box
    U1, U, U2 = (np.asarray(f.values if isinstance(f, ScalarField) else f) for f in (u1, u, u2))
    if not (U1.shape == U.shape == U2.shape == grid.shape):
        raise UsageError("fields do not match the grid")
    A1, Q1 = _q_values(a1, grid), _q_values(q1, grid)
    da = _q_values(a2, grid) - A1
    dq = _q_values(q2, grid) - Q1
    lhs = integrate_box(da * gradient(U2, box, 0) * U1 + dq * U2 * U1, box)
    dt = grid.dt

    def dT(v):
        return (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)

    final = integrate_box(U1[-1] * dT(U) - U[-1] * dT(U1) + A1[-1] * U[-1] * U1[-1], sb)
    flux = 0.0
    for fc in faces(grid.n):
        fbox = grid.boundary_box(fc)
        flux = flux + integrate_box(U1[face_index(fc, grid.n)] * neumann_values(U, grid, fc), fbox)
    bulk = integrate_box(gradient(A1, box, 0) * U * U1, box)
    rhs = final - flux - bulk
    return GreenIdentityResult(complex(lhs), complex(rhs),
                               {"final_time": complex(final), "lateral": complex(flux),
                                "damping_rate": complex(bulk)})
