import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetomo.errors import CFLError, PreconditionError, UsageError
from wavetomo.grid import (Box, Face, LightFrame, ScalarField, SpaceTimeGrid, integrate_Q, norm, omega_sweep,
                           restrict_trace, weighted_sobolev_norm)


def test_spacings_and_cfl():
    g = SpaceTimeGrid(1.0, (1.0, 2.0), 81, (33, 65))
    assert g.dt == pytest.approx(1 / 80)
    assert g.dx == pytest.approx((1 / 32, 2 / 64))
    assert g.cfl == pytest.approx(g.dt * math.sqrt(2) * 32)
    with pytest.raises(CFLError):
        SpaceTimeGrid(1.0, (1.0, 1.0), 33, (33, 33))


def test_extension_radius_contains_Q():
    g = SpaceTimeGrid(1.0, (1.0, 1.0), 49, (33, 33))
    assert g.extension_radius >= 0.5 * math.sqrt(3) - 1e-12
    with pytest.raises(PreconditionError):
        SpaceTimeGrid(1.0, (1.0, 1.0), 49, (33, 33), extension_radius=0.5)


def test_integrate_constants_and_linear():
    g = SpaceTimeGrid(1.0, (1.0, 1.0), 49, (33, 33))
    assert integrate_Q(g.field(np.ones(g.shape))) == pytest.approx(1.0, abs=1e-14)
    t, x, y = g.mesh()
    assert integrate_Q(g.field(np.broadcast_to(t, g.shape))) == pytest.approx(0.5, abs=1e-14)


def test_integrate_sine_product():
    g = SpaceTimeGrid(1.0, (1.0, 1.0), 65, (65, 65), enforce_cfl=False)
    t, x, y = g.mesh()
    f = np.broadcast_to(np.sin(np.pi * x) * np.sin(np.pi * y), g.shape)
    assert integrate_Q(g.field(f)) == pytest.approx(4 / np.pi ** 2, abs=1e-3)


def test_integrate_rejects_boundary_fields(unit_grid):
    tr = restrict_trace(unit_grid.field(np.ones(unit_grid.shape)), "dirichlet_sigma", Face(0, 0))
    with pytest.raises(UsageError):
        integrate_Q(tr)


def test_norms():
    g = SpaceTimeGrid(1.0, (1.0, 1.0), 65, (65, 65), enforce_cfl=False)
    assert norm(g.field(np.zeros(g.shape))) == 0.0
    assert norm(g.field(np.full(g.shape, 3.0))) == pytest.approx(3.0)
    t, x, y = g.mesh()
    f = np.sin(np.pi * x) * np.sin(np.pi * y) * np.cos(np.pi * t)
    assert norm(g.field(f)) == pytest.approx(math.sqrt(1 / 8), abs=1e-3)
    h1 = norm(g.field(f), "H1_Q")
    assert h1 > norm(g.field(f))


def test_traces_of_linear_and_constant(unit_grid):
    g = unit_grid
    t, x, y = g.mesh()
    u = g.field(np.broadcast_to(x, g.shape))
    assert np.allclose(restrict_trace(u, "neumann_sigma", Face(0, 1)).values, 1.0, atol=1e-10)
    assert np.allclose(restrict_trace(u, "neumann_sigma", Face(0, 0)).values, -1.0, atol=1e-10)
    c = g.field(np.full(g.shape, 5.0))
    for which in ("dirichlet_sigma", "at_t0", "at_T"):
        tr = restrict_trace(c, which)
        vals = tr.values() if isinstance(tr, dict) else [tr]
        for v in vals:
            assert np.allclose(v.values, 5.0)
    for which in ("dt_at_t0", "dt_at_T"):
        assert np.allclose(restrict_trace(c, which).values, 0.0, atol=1e-12)


def test_neumann_trace_converges_second_order():
    errs = []
    for m in (33, 65):
        g = SpaceTimeGrid(1.0, (1.0, 1.0), 2 * m - 1, (m, m))
        t, x, y = g.mesh()
        u = g.field(np.sin(np.pi * x) * np.sin(np.pi * y) * np.cos(math.sqrt(2) * np.pi * t))
        tr = restrict_trace(u, "neumann_sigma", Face(0, 0))
        tt, yy = tr.box.mesh()
        # outward normal at x1 = 0 is -e1
        exact = -np.pi * np.sin(np.pi * yy) * np.cos(math.sqrt(2) * np.pi * tt)
        errs.append(np.abs(tr.values - exact).max())
    assert errs[1] < errs[0] / 3.5


def test_weighted_norm_parseval_and_errors():
    box = Box((-0.5, -0.5, -0.5), (1 / 32,) * 3, (33, 33, 33))
    t, x, y = box.mesh()
    r2 = (t ** 2 + x ** 2 + y ** 2) / 0.3 ** 2
    v = np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-300)), 0.0)
    f = ScalarField(box, v)
    from wavetomo.grid import l2
    for lam in (1.0, 10.0):
        assert weighted_sobolev_norm(f, 0, lam) == pytest.approx(l2(v, box), rel=1e-10)
    assert weighted_sobolev_norm(ScalarField(box, np.zeros(box.shape)), 1, 3.0) == 0.0
    with pytest.raises(PreconditionError):
        weighted_sobolev_norm(ScalarField(box, np.ones(box.shape)), -1, 2.0)


def test_weighted_norm_wave_packet():
    box = Box((-1.0, -1.0, -1.0), (1 / 32,) * 3, (65, 65, 65))
    t, x, y = box.mesh()
    k0 = (40.0, 30.0, 0.0)
    env = np.exp(-(t ** 2 + x ** 2 + y ** 2) / (2 * 0.1 ** 2))
    v = env * np.cos(k0[0] * t + k0[1] * x)
    f = ScalarField(box, v)
    lam = 5.0
    ratio = weighted_sobolev_norm(f, 1, lam) / weighted_sobolev_norm(f, 0, lam)
    expect = math.sqrt(k0[0] ** 2 + k0[1] ** 2 + lam ** 2)
    assert ratio == pytest.approx(expect, rel=0.1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 30.0), st.floats(1.0, 30.0))
def test_weighted_norm_monotone_in_lambda(seed, l1, l2_):
    rng = np.random.default_rng(seed)
    box = Box((0, 0, 0), (0.1,) * 3, (16, 16, 16))
    v = np.zeros(box.shape)
    v[4:12, 4:12, 4:12] = rng.standard_normal((8, 8, 8))
    f = ScalarField(box, v)
    lo, hi = sorted((l1, l2_))
    assert weighted_sobolev_norm(f, -1, hi) <= weighted_sobolev_norm(f, -1, lo) * (1 + 1e-12)
    assert weighted_sobolev_norm(f, 1, hi) >= weighted_sobolev_norm(f, 1, lo) * (1 - 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_quadrature_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    g = SpaceTimeGrid(1.0, (1.0, 1.0), 9, (5, 5))
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    lhs = integrate_Q(g.field(alpha * f + beta * h))
    rhs = alpha * integrate_Q(g.field(f)) + beta * integrate_Q(g.field(h))
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0.1, 3.0), st.integers(1, 9))
def test_light_frame_invariants(theta, spacing, count):
    fr = LightFrame.from_angle(theta, spacing, count)
    assert np.linalg.norm(fr.omega) == pytest.approx(1.0, abs=1e-12)
    B = fr.basis
    assert np.allclose(B @ B.T, np.eye(2), atol=1e-12)
    assert np.abs(B @ fr.normal).max() < 1e-12
    assert np.abs(fr.zeta_grid @ fr.normal).max() <= 1e-10 * max(1.0, np.abs(fr.zeta_grid).max())
    assert fr.zeta_grid.shape == (count ** 2, 3)


def test_light_frame_rejects_off_plane():
    fr = LightFrame((1.0, 0.0))
    with pytest.raises(UsageError):
        fr.check([1.0, 0.0, 0.0])


def test_omega_sweep():
    full = omega_sweep(17)
    assert len(full) == 17
    assert all(abs(np.linalg.norm(w) - 1) < 1e-12 for w in full)
    arc = omega_sweep(5, center=(1.0, 0.0), epsilon=0.5)
    assert all(np.linalg.norm(w - np.array([1.0, 0.0])) <= 0.5 + 1e-12 for w in arc)


def test_fields_reject_nan():
    box = Box((0, 0), (1, 1), (2, 2))
    with pytest.raises(Exception):
        ScalarField(box, np.array([[1.0, np.nan], [0, 0]]))
