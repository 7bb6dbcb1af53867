"""Hot loops: leapfrog update and ray integrals through a sampled field.

Each kernel has a numba version and a plain numpy version with identical
arithmetic.  ``WAVETOMO_NUMBA=0`` in the environment selects numpy at import
time; the numba path is used otherwise when numba imports.
"""
import os

import numpy as np

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _flag_enabled():
    return os.environ.get("WAVETOMO_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _flag_enabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ----------------------------------------------------------------- leapfrog

def leapfrog_step_numpy(u_prev, u_cur, a, q, f, dt, inv_h2, out):
    """Write the interior of ``out`` with one damped leapfrog step.

    Boundary entries of ``out`` are left alone; the caller imposes them.
    """
    inner = (slice(1, -1),) * u_cur.ndim
    lap = np.zeros_like(u_cur[inner])
    for axis in range(u_cur.ndim):
        lo = list(inner)
        hi = list(inner)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        lap += (u_cur[tuple(lo)] - 2.0 * u_cur[inner] + u_cur[tuple(hi)]) * inv_h2[axis]
    c = 0.5 * dt * a[inner]
    out[inner] = (2.0 * u_cur[inner] - u_prev[inner]
                  + dt * dt * (lap - q[inner] * u_cur[inner] + f[inner])
                  + c * u_prev[inner]) / (1.0 + c)
    return out


if HAVE_NUMBA:
    @numba.njit(cache=True, fastmath=False)
    def _leapfrog_2d(u_prev, u_cur, a, q, f, dt, inv_h2, out):
        nx, ny = u_cur.shape
        hx = inv_h2[0]
        hy = inv_h2[1]
        dt2 = dt * dt
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                uc = u_cur[i, j]
                lap = ((u_cur[i - 1, j] - 2.0 * uc + u_cur[i + 1, j]) * hx
                       + (u_cur[i, j - 1] - 2.0 * uc + u_cur[i, j + 1]) * hy)
                c = 0.5 * dt * a[i, j]
                out[i, j] = (2.0 * uc - u_prev[i, j]
                             + dt2 * (lap - q[i, j] * uc + f[i, j])
                             + c * u_prev[i, j]) / (1.0 + c)
        return out

    @numba.njit(cache=True, fastmath=False)
    def _leapfrog_1d(u_prev, u_cur, a, q, f, dt, inv_h2, out):
        nx = u_cur.shape[0]
        hx = inv_h2[0]
        dt2 = dt * dt
        for i in range(1, nx - 1):
            uc = u_cur[i]
            lap = (u_cur[i - 1] - 2.0 * uc + u_cur[i + 1]) * hx
            c = 0.5 * dt * a[i]
            out[i] = (2.0 * uc - u_prev[i]
                      + dt2 * (lap - q[i] * uc + f[i])
                      + c * u_prev[i]) / (1.0 + c)
        return out

    def leapfrog_step_numba(u_prev, u_cur, a, q, f, dt, inv_h2, out):
        inv_h2 = np.asarray(inv_h2, dtype=np.float64)
        if u_cur.ndim == 2:
            return _leapfrog_2d(u_prev, u_cur, a, q, f, float(dt), inv_h2, out)
        if u_cur.ndim == 1:
            return _leapfrog_1d(u_prev, u_cur, a, q, f, float(dt), inv_h2, out)
        return leapfrog_step_numpy(u_prev, u_cur, a, q, f, dt, inv_h2, out)
else:  # pragma: no cover
    leapfrog_step_numba = None


# ------------------------------------------------------------ ray integrals

def _ray_counts(starts, direction, lower, upper, step):
    """Number of steps until every ray has left the box [lower, upper]."""
    s_exit = np.full(starts.shape[0], np.inf)
    for k, d in enumerate(direction):
        if d > 0:
            s_exit = np.minimum(s_exit, (upper[k] - starts[:, k]) / d)
        elif d < 0:
            s_exit = np.minimum(s_exit, (lower[k] - starts[:, k]) / d)
    s_exit = np.clip(s_exit, 0.0, None)
    return np.ceil(s_exit / step).astype(np.int64) + 1


def _interp_numpy(values, origin, spacing, pts):
    """Multilinear interpolation, zero outside the sampled box."""
    ndim = values.ndim
    idx = (pts - origin) / spacing
    base = np.floor(idx).astype(np.int64)
    frac = idx - base
    shape = np.array(values.shape)
    inside = np.all((idx >= 0.0) & (idx <= shape - 1), axis=1)
    # points sitting exactly on the upper face use the last cell
    at_top = base >= shape - 1
    base = np.where(at_top, shape - 2, base)
    frac = np.where(at_top, 1.0, frac)
    base = np.clip(base, 0, np.maximum(shape - 2, 0))
    out = np.zeros(pts.shape[0])
    for corner in range(1 << ndim):
        w = np.ones(pts.shape[0])
        ind = []
        for k in range(ndim):
            bit = (corner >> k) & 1
            w *= frac[:, k] if bit else 1.0 - frac[:, k]
            ind.append(base[:, k] + bit)
        out += w * values[tuple(ind)]
    out[~inside] = 0.0
    return out


def ray_sums_numpy(values, origin, spacing, starts, direction, step, counts):
    """Trapezoid sums of ``values`` along ``starts + s * direction``, s >= 0."""
    total = np.zeros(starts.shape[0])
    nmax = int(counts.max()) if counts.size else 0
    for k in range(nmax + 1):
        live = counts >= k
        if not live.any():
            break
        pts = starts[live] + (k * step) * direction
        vals = _interp_numpy(values, origin, spacing, pts)
        w = np.where((k == 0) | (k == counts[live]), 0.5, 1.0)
        total[live] += w * vals
    return total * step


if HAVE_NUMBA:
    @numba.njit(cache=True, parallel=True)
    def _ray_sums_3d(values, origin, spacing, starts, direction, step, counts):
        n0, n1, n2 = values.shape
        npts = starts.shape[0]
        total = np.zeros(npts)
        for p in numba.prange(npts):
            acc = 0.0
            m = counts[p]
            for k in range(m + 1):
                s = k * step
                x0 = (starts[p, 0] + s * direction[0] - origin[0]) / spacing[0]
                x1 = (starts[p, 1] + s * direction[1] - origin[1]) / spacing[1]
                x2 = (starts[p, 2] + s * direction[2] - origin[2]) / spacing[2]
                if x0 < 0.0 or x1 < 0.0 or x2 < 0.0:
                    continue
                if x0 > n0 - 1 or x1 > n1 - 1 or x2 > n2 - 1:
                    continue
                i0 = min(int(x0), n0 - 2)
                i1 = min(int(x1), n1 - 2)
                i2 = min(int(x2), n2 - 2)
                f0 = x0 - i0
                f1 = x1 - i1
                f2 = x2 - i2
                v = ((1 - f0) * ((1 - f1) * ((1 - f2) * values[i0, i1, i2] + f2 * values[i0, i1, i2 + 1])
                                 + f1 * ((1 - f2) * values[i0, i1 + 1, i2] + f2 * values[i0, i1 + 1, i2 + 1]))
                     + f0 * ((1 - f1) * ((1 - f2) * values[i0 + 1, i1, i2] + f2 * values[i0 + 1, i1, i2 + 1])
                             + f1 * ((1 - f2) * values[i0 + 1, i1 + 1, i2] + f2 * values[i0 + 1, i1 + 1, i2 + 1])))
                if k == 0 or k == m:
                    v *= 0.5
                acc += v
            total[p] = acc * step
        return total

    @numba.njit(cache=True, parallel=True)
    def _ray_sums_2d(values, origin, spacing, starts, direction, step, counts):
        n0, n1 = values.shape
        npts = starts.shape[0]
        total = np.zeros(npts)
        for p in numba.prange(npts):
            acc = 0.0
            m = counts[p]
            for k in range(m + 1):
                s = k * step
                x0 = (starts[p, 0] + s * direction[0] - origin[0]) / spacing[0]
                x1 = (starts[p, 1] + s * direction[1] - origin[1]) / spacing[1]
                if x0 < 0.0 or x1 < 0.0 or x0 > n0 - 1 or x1 > n1 - 1:
                    continue
                i0 = min(int(x0), n0 - 2)
                i1 = min(int(x1), n1 - 2)
                f0 = x0 - i0
                f1 = x1 - i1
                v = ((1 - f0) * ((1 - f1) * values[i0, i1] + f1 * values[i0, i1 + 1])
                     + f0 * ((1 - f1) * values[i0 + 1, i1] + f1 * values[i0 + 1, i1 + 1]))
                if k == 0 or k == m:
                    v *= 0.5
                acc += v
            total[p] = acc * step
        return total

    def ray_sums_numba(values, origin, spacing, starts, direction, step, counts):
        args = (np.ascontiguousarray(values, dtype=np.float64),
                np.asarray(origin, dtype=np.float64), np.asarray(spacing, dtype=np.float64),
                np.ascontiguousarray(starts, dtype=np.float64),
                np.asarray(direction, dtype=np.float64), float(step),
                np.asarray(counts, dtype=np.int64))
        if values.ndim == 3:
            return _ray_sums_3d(*args)
        if values.ndim == 2:
            return _ray_sums_2d(*args)
        return ray_sums_numpy(*args)
else:  # pragma: no cover
    ray_sums_numba = None


def ray_sums(values, origin, spacing, starts, direction, step, backend=None):
    """Half-line trapezoid integrals, one per start point.

    The rule runs from s=0 until the ray leaves the sampled box; outside
    the box the field counts as zero.
    """
    values = np.asarray(values, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    direction = np.asarray(direction, dtype=np.float64)
    upper = origin + spacing * (np.array(values.shape) - 1)
    counts = _ray_counts(starts, direction, origin, upper, step)
    backend = backend or BACKEND
    if backend == "numba" and HAVE_NUMBA:
        return ray_sums_numba(values, origin, spacing, starts, direction, step, counts)
    return ray_sums_numpy(values, origin, spacing, starts, direction, step, counts)


def leapfrog_step(u_prev, u_cur, a, q, f, dt, inv_h2, out, backend=None):
    backend = backend or BACKEND
    if backend == "numba" and HAVE_NUMBA:
        return leapfrog_step_numba(u_prev, u_cur, a, q, f, dt, inv_h2, out)
    return leapfrog_step_numpy(u_prev, u_cur, a, q, f, dt, inv_h2, out)
