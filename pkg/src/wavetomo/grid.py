"""Space-time grids, sampled fields, quadrature, discrete norms and traces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CFLError, PreconditionError, ResolutionError, UsageError

CFL_LIMIT = 0.95
KINDS = ("space_time", "space_only", "boundary")
NORMS = ("L2_Q", "H1_Q", "L2_sigma", "L2_omega_at_t")
TRACES = ("dirichlet_sigma", "neumann_sigma", "at_t0", "at_T", "dt_at_t0", "dt_at_T")


@dataclass(frozen=True)
class Box:
    """Uniform tensor grid: ``shape[i]`` samples starting at ``origin[i]``."""

    origin: tuple
    spacing: tuple
    shape: tuple

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        spacing = tuple(float(v) for v in self.spacing)
        shape = tuple(int(v) for v in self.shape)
        if not (len(origin) == len(spacing) == len(shape)):
            raise UsageError("origin, spacing and shape must have equal length")
        if any(h <= 0 for h in spacing):
            raise UsageError("spacings must be positive")
        if any(m < 1 for m in shape):
            raise UsageError("every axis needs at least one sample")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "shape", shape)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def upper(self):
        return tuple(o + h * (m - 1) for o, h, m in zip(self.origin, self.spacing, self.shape))

    @property
    def center(self):
        return tuple(0.5 * (lo + hi) for lo, hi in zip(self.origin, self.upper))

    def axis(self, i):
        return self.origin[i] + self.spacing[i] * np.arange(self.shape[i])

    def axes(self):
        return [self.axis(i) for i in range(self.ndim)]

    def mesh(self, sparse=True):
        return np.meshgrid(*self.axes(), indexing="ij", sparse=sparse)

    def points(self):
        """All sample coordinates as an (N, ndim) array in C order."""
        return np.stack([m.ravel() for m in self.mesh(sparse=False)], axis=1)

    def padded(self, cells):
        cells = np.broadcast_to(np.asarray(cells, dtype=int), (self.ndim,))
        return Box(tuple(o - c * h for o, c, h in zip(self.origin, cells, self.spacing)),
                   self.spacing,
                   tuple(m + 2 * c for m, c in zip(self.shape, cells)))

    def locate(self, sub: "Box"):
        """Index slices of ``sub`` inside this box (same spacing, aligned nodes)."""
        if sub.ndim != self.ndim:
            raise UsageError("dimension mismatch between boxes")
        slices = []
        for k in range(self.ndim):
            h = self.spacing[k]
            if abs(sub.spacing[k] - h) > 1e-9 * h:
                raise UsageError("boxes have different spacings")
            off = (sub.origin[k] - self.origin[k]) / h
            i0 = int(round(off))
            if abs(off - i0) > 1e-6:
                raise UsageError("box nodes are not aligned")
            if i0 < 0 or i0 + sub.shape[k] > self.shape[k]:
                raise UsageError("sub-box does not fit")
            slices.append(slice(i0, i0 + sub.shape[k]))
        return tuple(slices)

    def trapezoid_weights(self):
        out = []
        for h, m in zip(self.spacing, self.shape):
            w = np.full(m, h)
            if m > 1:
                w[0] = w[-1] = 0.5 * h
            out.append(w)
        return out


class Face(NamedTuple):
    """A face of the rectangle: ``side`` 0 is x_axis = 0, side 1 is x_axis = L."""

    axis: int
    side: int

    @property
    def normal_sign(self):
        return -1.0 if self.side == 0 else 1.0

    @property
    def label(self):
        return f"x{self.axis + 1}{'-' if self.side == 0 else '+'}"

    def normal(self, n):
        nu = np.zeros(n)
        nu[self.axis] = self.normal_sign
        return nu

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if len(text) < 3 or text[0] != "x" or text[-1] not in "+-":
            raise UsageError(f"bad face label {text!r}")
        return cls(int(text[1:-1]) - 1, 0 if text[-1] == "-" else 1)


def faces(n):
    return [Face(axis, side) for axis in range(n) for side in (0, 1)]


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform grid of Q = (0,T) x prod (0, L_i)."""

    T: float
    lengths: tuple
    nt: int
    nx: tuple
    extension_radius: float | None = None
    enforce_cfl: bool = True

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        nx = tuple(int(v) for v in np.atleast_1d(self.nx))
        if len(lengths) not in (1, 2):
            raise UsageError("spatial dimension must be 2 (or 1 for debugging)")
        if len(nx) != len(lengths):
            raise UsageError("nx must list one count per spatial axis")
        if self.T <= 0 or min(lengths) <= 0:
            raise UsageError("T and all L_i must be positive")
        if self.nt < 3 or min(nx) < 3:
            raise ResolutionError("every axis needs at least 3 samples")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "nt", int(self.nt))
        half_diag = 0.5 * math.sqrt(self.T ** 2 + sum(L * L for L in lengths))
        if self.extension_radius is None:
            object.__setattr__(self, "extension_radius", half_diag)
        elif self.extension_radius < half_diag - 1e-12:
            raise PreconditionError(
                f"extension_radius {self.extension_radius} does not contain Q (needs >= {half_diag:.6g})")
        if self.enforce_cfl and self.cfl > CFL_LIMIT:
            raise CFLError(f"CFL number {self.cfl:.4f} exceeds {CFL_LIMIT}")

    @property
    def n(self):
        return len(self.lengths)

    @property
    def dt(self):
        return self.T / (self.nt - 1)

    @property
    def dx(self):
        return tuple(L / (m - 1) for L, m in zip(self.lengths, self.nx))

    @property
    def spacing(self):
        return (self.dt,) + self.dx

    @property
    def shape(self):
        return (self.nt,) + self.nx

    @property
    def cfl(self):
        return self.dt * math.sqrt(sum(1.0 / h ** 2 for h in self.dx))

    @property
    def h(self):
        return max(self.spacing)

    @property
    def box(self):
        return Box((0.0,) * (self.n + 1), self.spacing, self.shape)

    @property
    def spatial_box(self):
        return Box((0.0,) * self.n, self.dx, self.nx)

    @property
    def t(self):
        return self.box.axis(0)

    @property
    def x(self):
        return self.spatial_box.axes()

    @property
    def center(self):
        return self.box.center

    @property
    def volume(self):
        return self.T * float(np.prod(self.lengths))

    @property
    def diameter(self):
        return math.sqrt(sum(L * L for L in self.lengths))

    def mesh(self, sparse=True):
        return self.box.mesh(sparse=sparse)

    def extension_box(self, margin):
        """The Q box padded by whole cells so that at least ``margin`` is added per side."""
        cells = [int(math.ceil(margin / h - 1e-9)) for h in self.spacing]
        return self.box.padded(cells)

    def refined(self, factor=2):
        return SpaceTimeGrid(self.T, self.lengths, factor * (self.nt - 1) + 1,
                             tuple(factor * (m - 1) + 1 for m in self.nx),
                             self.extension_radius, self.enforce_cfl)

    def field(self, values, kind="space_time", **kw):
        box = {"space_time": self.box, "space_only": self.spatial_box}[kind]
        return ScalarField(box, values, kind, **kw)

    def boundary_box(self, face: Face):
        keep = [0] + [1 + k for k in range(self.n) if k != face.axis]
        b = self.box
        return Box([b.origin[k] for k in keep], [b.spacing[k] for k in keep], [b.shape[k] for k in keep])


class ScalarField:
    """Samples of a real or complex function on a :class:`Box`.

    The values array is made read-only; operations return new fields.
    """

    __slots__ = ("box", "values", "kind", "face", "time")

    def __init__(self, box: Box, values, kind="space_time", face: Face | None = None, time=None):
        if kind not in KINDS:
            raise UsageError(f"unknown field kind {kind!r}")
        arr = np.asarray(values)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(np.float64)
        if arr.shape != box.shape:
            if arr.ndim == 0:
                arr = np.full(box.shape, arr, dtype=arr.dtype)
            else:
                raise UsageError(f"values of shape {arr.shape} do not match box {box.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("field contains non-finite values")
        arr = arr.view()
        arr.flags.writeable = False
        self.box = box
        self.values = arr
        self.kind = kind
        self.face = face
        self.time = time

    def __repr__(self):
        return f"ScalarField(kind={self.kind}, shape={self.box.shape}, dtype={self.values.dtype})"

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    @property
    def real(self):
        return self.with_values(self.values.real)

    @property
    def imag(self):
        return self.with_values(self.values.imag)

    def with_values(self, values):
        return ScalarField(self.box, values, self.kind, self.face, self.time)

    def restrict(self, box: Box):
        return ScalarField(box, self.values[self.box.locate(box)], self.kind, self.face, self.time)

    def embed(self, box: Box):
        out = np.zeros(box.shape, dtype=self.values.dtype)
        out[box.locate(self.box)] = self.values
        return ScalarField(box, out, self.kind, self.face, self.time)

    def _check_same(self, other):
        if isinstance(other, ScalarField):
            if other.box != self.box or other.kind != self.kind:
                raise UsageError("fields live on different boxes")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._check_same(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._check_same(other))

    def __rsub__(self, other):
        return self.with_values(self._check_same(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._check_same(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def as_values(f, grid_or_box=None):
    """Accept a ScalarField, an array or a scalar and return an array."""
    if isinstance(f, ScalarField):
        return f.values
    if f is None:
        f = 0.0
    arr = np.asarray(f)
    if arr.ndim == 0 and grid_or_box is not None:
        shape = grid_or_box.shape
        return np.full(shape, arr, dtype=np.result_type(arr, np.float64))
    return arr


# ----------------------------------------------------------------- quadrature

def integrate_box(values, box: Box):
    """Tensor trapezoid rule on a box."""
    out = np.asarray(values)
    for w in reversed(box.trapezoid_weights()):
        out = out @ w
    return out[()] if isinstance(out, np.ndarray) else out


def integrate_Q(f: ScalarField):
    """Trapezoid approximation of the integral of a space-time field."""
    if not isinstance(f, ScalarField) or f.kind != "space_time":
        raise UsageError("integrate_Q expects a space_time field")
    return integrate_box(f.values, f.box)


def integrate(f: ScalarField):
    """Trapezoid integral of any field over its own box."""
    return integrate_box(f.values, f.box)


def integrate_sigma(traces):
    """Sum of face integrals for a mapping face -> boundary field."""
    return sum(integrate(f) for f in traces.values())


def gradient(values, box: Box, axis):
    """Centered differences, second-order one-sided at the edges."""
    if values.shape[axis] < 3:
        raise ResolutionError("need at least 3 samples to differentiate")
    return np.gradient(values, box.spacing[axis], axis=axis, edge_order=2)


def norm(f, which="L2_Q"):
    """Discrete norms; ``L2_sigma`` also accepts a mapping face -> field."""
    if which not in NORMS:
        raise UsageError(f"unknown norm {which!r}")
    if which == "L2_sigma":
        if isinstance(f, dict):
            return math.sqrt(sum(float(integrate_box(np.abs(g.values) ** 2, g.box)) for g in f.values()))
        if f.kind != "boundary":
            raise UsageError("L2_sigma needs a boundary field")
        return math.sqrt(float(integrate_box(np.abs(f.values) ** 2, f.box)))
    if which == "L2_omega_at_t":
        if f.kind != "space_only":
            raise UsageError("L2_omega_at_t needs a space_only field")
        return math.sqrt(float(integrate_box(np.abs(f.values) ** 2, f.box)))
    if f.kind != "space_time":
        raise UsageError(f"{which} needs a space_time field")
    total = integrate_box(np.abs(f.values) ** 2, f.box)
    if which == "H1_Q":
        for axis in range(f.box.ndim):
            total = total + integrate_box(np.abs(gradient(f.values, f.box, axis)) ** 2, f.box)
    return math.sqrt(float(total))


def l2(values, box: Box):
    return math.sqrt(float(integrate_box(np.abs(values) ** 2, box)))


def frequencies(box: Box):
    """Angular DFT frequencies of each axis (continuous variables of the box)."""
    return [2.0 * np.pi * np.fft.fftfreq(m, d=h) for m, h in zip(box.shape, box.spacing)]


def check_margin(values, cells=4):
    """Raise unless the array vanishes within ``cells`` of every edge."""
    arr = np.abs(np.asarray(values))
    scale = arr.max() if arr.size else 0.0
    if scale == 0.0:
        return
    for axis in range(arr.ndim):
        m = arr.shape[axis]
        if m <= 2 * cells:
            raise PreconditionError("box too small for the required zero margin")
        lo = np.take(arr, range(cells), axis=axis)
        hi = np.take(arr, range(m - cells, m), axis=axis)
        if lo.max() > 1e-13 * scale or hi.max() > 1e-13 * scale:
            raise PreconditionError(f"support touches the box edge along axis {axis}")


def weighted_sobolev_norm(f: ScalarField, m, lam, margin_cells=4):
    """H^m_lambda norm via the DFT of the zero-padded box.

    Weight (|k|^2 + lam^2)^m on |f^|^2, Parseval-normalized so that m = 0
    reproduces the discrete L2 norm.
    """
    if lam < 1:
        raise UsageError("lambda must be >= 1")
    values = f.values if isinstance(f, ScalarField) else np.asarray(f)
    box = f.box
    check_margin(values, margin_cells)
    spec = np.fft.fftn(values)
    k2 = sum(np.meshgrid(*[k ** 2 for k in frequencies(box)], indexing="ij", sparse=True))
    weight = (k2 + lam ** 2) ** m
    total = np.sum(weight * np.abs(spec) ** 2) * box.cell_volume / box.size
    return math.sqrt(float(total))


# --------------------------------------------------------------------- traces

def face_index(face: Face, ndim_spatial, offset=0):
    idx = [slice(None)] * (1 + ndim_spatial)
    idx[1 + face.axis] = offset if face.side == 0 else -1 - offset
    return tuple(idx)


def neumann_values(values, grid: SpaceTimeGrid, face: Face):
    """Outward normal derivative by the second-order one-sided stencil."""
    u0 = values[face_index(face, grid.n, 0)]
    u1 = values[face_index(face, grid.n, 1)]
    u2 = values[face_index(face, grid.n, 2)]
    return (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * grid.dx[face.axis])


def grid_of(f: ScalarField):
    """Rebuild the SpaceTimeGrid of a Q-field from its box."""
    b = f.box
    if any(abs(o) > 1e-12 for o in b.origin):
        raise UsageError("field does not live on a Q grid")
    T = b.spacing[0] * (b.shape[0] - 1)
    lengths = tuple(h * (m - 1) for h, m in zip(b.spacing[1:], b.shape[1:]))
    return SpaceTimeGrid(T, lengths, b.shape[0], b.shape[1:], enforce_cfl=False)


def restrict_trace(u: ScalarField, which, face: Face | None = None):
    """Traces of a space-time field.

    ``dirichlet_sigma`` and ``neumann_sigma`` return a dict face -> field
    unless ``face`` is given.
    """
    if which not in TRACES:
        raise UsageError(f"unknown trace {which!r}")
    if u.kind != "space_time":
        raise UsageError("traces are taken from space_time fields")
    grid = grid_of(u)
    if which in ("dirichlet_sigma", "neumann_sigma"):
        targets = [face] if face is not None else faces(grid.n)
        out = {}
        for fc in targets:
            if fc.axis >= grid.n:
                raise UsageError(f"face {fc} does not exist for n={grid.n}")
            if which == "dirichlet_sigma":
                vals = u.values[face_index(fc, grid.n)]
            else:
                vals = neumann_values(u.values, grid, fc)
            out[fc] = ScalarField(grid.boundary_box(fc), vals, "boundary", face=fc)
        return out[face] if face is not None else out
    sb = grid.spatial_box
    v = u.values
    if which == "at_t0":
        return ScalarField(sb, v[0], "space_only", time=0.0)
    if which == "at_T":
        return ScalarField(sb, v[-1], "space_only", time=grid.T)
    if which == "dt_at_t0":
        return ScalarField(sb, (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2 * grid.dt), "space_only", time=0.0)
    return ScalarField(sb, (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2 * grid.dt), "space_only", time=grid.T)


# ---------------------------------------------------------------- light frame

class LightFrame:
    """Orthonormal basis of the plane (1, -omega)^perp and a centred frequency grid."""

    def __init__(self, omega, spacing=None, count=0):
        omega = np.asarray(omega, dtype=np.float64).ravel()
        nrm = np.linalg.norm(omega)
        if nrm == 0:
            raise UsageError("omega must be nonzero")
        omega = omega / nrm
        n = omega.size
        self.omega = omega
        self.e_par = np.concatenate([[1.0], omega]) / math.sqrt(2.0)
        if n == 1:
            perp = np.zeros((0, 2))
        elif n == 2:
            perp = np.array([[0.0, -omega[1], omega[0]]])
        else:
            # complete with Gram-Schmidt against the light-like normal and e_par
            normal = np.concatenate([[1.0], -omega]) / math.sqrt(2.0)
            basis = [normal, self.e_par]
            for e in np.eye(n + 1):
                v = e - sum(np.dot(e, b) * b for b in basis)
                if np.linalg.norm(v) > 1e-8:
                    basis.append(v / np.linalg.norm(v))
                if len(basis) == n + 1:
                    break
            perp = np.array(basis[2:])
        self.e_perp = perp
        self.spacing = spacing
        self.count = int(count)
        self.zeta_grid = self.plane_grid(spacing, count) if count else np.zeros((0, n + 1))

    @classmethod
    def from_angle(cls, theta, spacing=None, count=0):
        return cls((math.cos(theta), math.sin(theta)), spacing, count)

    @property
    def n(self):
        return self.omega.size

    @property
    def normal(self):
        """The light-like direction (1, -omega) along which rays run."""
        return np.concatenate([[1.0], -self.omega])

    @property
    def basis(self):
        """Rows e_par, e_perp... spanning the plane."""
        return np.vstack([self.e_par, self.e_perp])

    def plane_indices(self, count):
        half = (count - 1) / 2.0
        ticks = np.arange(count) - half
        mesh = np.meshgrid(*([ticks] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def plane_grid(self, spacing, count):
        """Frequencies p e_par + sum q_j e_perp_j on a centred count^n lattice."""
        return (spacing * self.plane_indices(count)) @ self.basis

    def coordinates(self, points):
        """Plane coordinates of points (orthogonal projection onto the plane)."""
        return np.asarray(points) @ self.basis.T

    def from_coordinates(self, coords):
        return np.asarray(coords) @ self.basis

    def check(self, zeta, tol=1e-10):
        zeta = np.atleast_2d(zeta)
        dots = zeta @ self.normal
        if np.any(np.abs(dots) > tol * np.maximum(1.0, np.linalg.norm(zeta, axis=1))):
            raise UsageError("zeta is not orthogonal to (1, -omega)")


def omega_sweep(count, n=2, center=None, epsilon=None):
    """Directions on the circle: full sweep, or the arc |omega - center| <= epsilon."""
    if n != 2:
        raise UsageError("direction sweeps are implemented for n = 2")
    if center is None:
        thetas = 2.0 * np.pi * np.arange(count) / count
    else:
        c = np.asarray(center, dtype=float)
        theta0 = math.atan2(c[1], c[0])
        half = 2.0 * math.asin(min(1.0, epsilon / 2.0))
        thetas = theta0 + np.linspace(-half, half, count)
    return [np.array([math.cos(t), math.sin(t)]) for t in thetas]
