import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetomo import kernels

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(4, 20), st.integers(4, 20))
def test_leapfrog_backends_agree(seed, nx, ny):
    rng = np.random.default_rng(seed)
    u0, u1, a, q, f = (rng.standard_normal((nx, ny)) for _ in range(5))
    inv_h2 = np.array([float(nx - 1) ** 2, float(ny - 1) ** 2])
    out_np = np.zeros((nx, ny))
    out_nb = np.zeros((nx, ny))
    kernels.leapfrog_step(u0, u1, a, q, f, 0.01, inv_h2, out_np, "numpy")
    kernels.leapfrog_step(u0, u1, a, q, f, 0.01, inv_h2, out_nb, "numba")
    assert np.allclose(out_np, out_nb, rtol=1e-12, atol=1e-12)
    # boundary untouched
    assert np.all(out_np[0] == 0) and np.all(out_np[:, -1] == 0)


@needs_numba
@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_ray_sums_backends_agree(seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((9, 10, 11))
    starts = rng.uniform(-0.2, 1.2, size=(50, 3))
    d = np.array([1.0, -rng.uniform(-1, 1), rng.uniform(-1, 1)])
    h = (0.1, 0.1, 0.1)
    step = 0.05 / np.linalg.norm(d)
    a = kernels.ray_sums(vals, (0.0, 0.0, 0.0), h, starts, d, step, "numpy")
    b = kernels.ray_sums(vals, (0.0, 0.0, 0.0), h, starts, d, step, "numba")
    assert np.allclose(a, b, rtol=1e-11, atol=1e-12)


def test_leapfrog_numpy_formula():
    u0 = np.zeros((3, 3))
    u1 = np.zeros((3, 3))
    u1[1, 1] = 1.0
    out = np.zeros((3, 3))
    a = np.full((3, 3), 2.0)
    q = np.zeros((3, 3))
    f = np.zeros((3, 3))
    dt = 0.1
    kernels.leapfrog_step(u0, u1, a, q, f, dt, np.array([1.0, 1.0]), out, "numpy")
    expect = (2.0 + dt * dt * (-4.0)) / (1 + a[1, 1] * dt / 2)
    assert out[1, 1] == pytest.approx(expect)


def test_backend_flag(monkeypatch):
    import importlib
    monkeypatch.setenv("WAVETOMO_NUMBA", "0")
    mod = importlib.reload(kernels)
    assert mod.BACKEND == "numpy"
    monkeypatch.delenv("WAVETOMO_NUMBA")
    mod = importlib.reload(kernels)
    assert mod.BACKEND == ("numba" if mod.HAVE_NUMBA else "numpy")
