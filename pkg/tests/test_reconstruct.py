import math

import numpy as np
import pytest

from wavetomo.coeffs import make_phantom
from wavetomo.errors import LogBranchError, UsageError
from wavetomo.grid import LightFrame, SpaceTimeGrid, omega_sweep
from wavetomo.reconstruct import (IdentitySamples, coverage_mask, evaluate_identity, fubini_reduction_check,
                                  hermitian_defect, identity_samples, invert_damping, invert_potential, max_lambda,
                                  null_test)

CENTER = (0.5, 0.75, 0.75)


@pytest.fixture(scope="module")
def grid():
    # quadrature-only grid, never time-stepped
    return SpaceTimeGrid(1.0, (1.5, 1.5), 33, (33, 33), enforce_cfl=False)


def _frames(count, size=9, **kw):
    return [LightFrame(o, 2 * np.pi, size) for o in omega_sweep(count, **kw)]


@pytest.fixture(scope="module")
def spacelike(grid):
    return make_phantom({"kind": "spacelike_bandlimited", "seed": 1, "amplitude": 0.5, "center": CENTER,
                         "k_max": 20.0}, grid)


def test_fubini_zero_and_bump(grid):
    fr = LightFrame((math.cos(0.4), math.sin(0.4)), 2 * np.pi, 3)
    zero = fubini_reduction_check(make_phantom({"kind": "zero"}, grid), fr, 8.0)
    assert not np.any(zero.lhs) and not np.any(zero.rhs) and zero.relative_error == 0.0
    a = make_phantom({"kind": "smooth_bump", "width": 0.35, "amplitude": 0.5, "center": CENTER}, grid)
    res = fubini_reduction_check(a, fr, 8.0)
    assert res.relative_error <= 0.01
    # zeta = 0 row is real and negative: -2 sqrt2 int (1 - e^{R/2}) with R > 0
    z0 = int(np.argmin(np.linalg.norm(fr.zeta_grid, axis=1)))
    assert res.rhs[z0].real > 0 and abs(res.rhs[z0].imag) < 1e-10 * abs(res.rhs[z0])


def test_fubini_linear_regime(grid):
    fr = LightFrame((1.0, 0.0), 2 * np.pi, 3)
    a = make_phantom({"kind": "smooth_bump", "width": 0.35, "amplitude": 0.01, "center": CENTER}, grid)
    res = fubini_reduction_check(a, fr, 8.0)
    from wavetomo.amplitudes import ray_transform_full
    from wavetomo.coeffs import mollify
    from wavetomo.reconstruct import plane_grid
    m = mollify(a, 8.0)
    pts, _, _ = plane_grid(fr, CENTER, 1.2, min(m.box.spacing))
    R = ray_transform_full(m, fr.omega, pts)
    step = min(m.box.spacing)
    lin = math.sqrt(2) * (np.exp(-1j * fr.zeta_grid @ pts.T) @ R) * step ** 2
    assert np.linalg.norm(res.rhs - lin) / np.linalg.norm(lin) < 0.01 + 0.05 * 0.01


def test_gaussian_transform():
    g = SpaceTimeGrid(1.0, (1.5, 1.5), 64, (64, 64), enforce_cfl=False)
    sigma = 0.07
    # taper only beyond four widths so the bump is a Gaussian to within its tail
    q = make_phantom({"kind": "gaussian_bump", "sigma": sigma, "center": CENTER, "window_inner": 0.3}, g,
                     "potential_q")
    fr = LightFrame((0.6, 0.8), 2 * np.pi, 5)
    S = identity_samples(g, None, None, None, q, [fr], 20.0, normalize=False)
    z = S.zeta
    exact = (2 * np.pi * sigma ** 2) ** 1.5 * np.exp(-0.5 * sigma ** 2 * (z ** 2).sum(axis=1)) \
        * np.exp(-1j * z @ np.array(CENTER))
    assert np.abs(S.values - exact).max() <= 0.05 * np.abs(exact).max()


def test_samples_validate_and_roundtrip(tmp_path, grid, spacelike):
    with pytest.raises(UsageError):
        IdentitySamples([[1.0, 0.0]], [[1.0, 0.0, 0.0]], 4.0, [1.0])
    S = identity_samples(grid, None, spacelike, None, None, _frames(2, 3), 10.0)
    assert len(S) == 18 and S.normalized
    back = IdentitySamples.from_csv(S.to_csv(tmp_path / "s.csv"), normalized=True)
    assert np.array_equal(back.values, S.values)
    assert np.array_equal(back.zeta, S.zeta) and np.array_equal(back.omega, S.omega)
    assert len(S.directions()) == 2


def test_zero_gives_zero(grid):
    frames = _frames(5)
    zero = make_phantom({"kind": "zero"}, grid)
    S = identity_samples(grid, None, zero, None, None, frames, 20.0)
    rec, rep = invert_damping(S, grid, CENTER, truth=zero)
    assert np.abs(rec.values).max() < 1e-12
    S = identity_samples(grid, None, None, None, zero, frames, 20.0, normalize=False)
    rec, _ = invert_potential(S, grid, CENTER)
    assert np.abs(rec.values).max() < 1e-12


def test_log_branch_guard(grid, spacelike):
    S = identity_samples(grid, None, spacelike, None, None, _frames(3), 20.0)
    S.values = S.values * -200.0
    with pytest.raises(LogBranchError) as info:
        invert_damping(S, grid, CENTER)
    assert info.value.location is not None


def test_damping_inversion_and_symmetry(grid, spacelike):
    lam = max_lambda(grid, _frames(9))
    S = identity_samples(grid, None, spacelike, None, None, _frames(9), lam)
    rec, rep, sl = invert_damping(S, grid, CENTER, truth=spacelike, return_slices=True)
    assert rep.relative_error < 0.25
    assert rep.extras["hermitian_defect"] <= 1e-8
    assert hermitian_defect(sl.assembled, sl.mask) <= 1e-8
    assert 0 < rep.coverage_fraction < 1
    assert "relative L2" in rep.text()


def test_linear_regime_scaling(grid):
    frames = _frames(7)
    recs = []
    for eps in (0.01, 0.02, 0.04):
        a = make_phantom({"kind": "spacelike_bandlimited", "seed": 1, "amplitude": eps, "center": CENTER,
                          "k_max": 20.0}, grid)
        S = identity_samples(grid, None, a, None, None, frames, 20.0)
        recs.append(invert_damping(S, grid, CENTER)[0].values)
    gaps = [np.linalg.norm(recs[i + 1] - 2 * recs[i]) / np.linalg.norm(recs[i + 1]) for i in range(2)]
    # the departure from linearity is second order, so its relative size doubles with eps
    assert gaps[1] < 2e-3
    assert 1.5 < gaps[1] / gaps[0] < 2.5


def test_partial_sweep_not_better(grid, spacelike):
    full = _frames(9)
    part = _frames(5, center=(1.0, 0.0), epsilon=0.5)
    lam = max_lambda(grid, full)
    e_full = invert_damping(identity_samples(grid, None, spacelike, None, None, full, lam), grid, CENTER,
                            truth=spacelike)[1]
    e_part = invert_damping(identity_samples(grid, None, spacelike, None, None, part, lam), grid, CENTER,
                            truth=spacelike)[1]
    assert e_part.coverage_fraction < e_full.coverage_fraction
    assert e_part.relative_error >= e_full.relative_error - 0.02


def test_coverage_mask_inside_cone(grid):
    from wavetomo.grid import frequencies
    mask = coverage_mask(grid.box, [fr.omega for fr in _frames(9)], 20.0)
    kt, kx, ky = np.meshgrid(*frequencies(grid.box), indexing="ij")
    assert np.all(np.abs(kt[mask]) <= np.hypot(kx[mask], ky[mask]) + 1e-9)
    arc = coverage_mask(grid.box, [fr.omega for fr in _frames(5, center=(1.0, 0.0), epsilon=0.5)], 20.0)
    assert arc.sum() < mask.sum() and not np.any(arc & ~mask)


def test_evaluate_identity_modes_agree_for_identical_pair():
    g = SpaceTimeGrid(0.5, (0.5, 0.5), 25, (17, 17))
    a = make_phantom({"kind": "smooth_bump", "width": 0.2, "amplitude": 0.5, "center": (0.25, 0.25, 0.25)}, g)
    table = null_test(g, a, None, _frames(1, 3), (2.0,), zeta_count=3)
    assert table.max_abs == 0.0
    u = g.field(np.ones(g.shape))
    ev = evaluate_identity(g, a, a, None, None, u, u, both=True)
    assert ev.coefficient_value == 0 and ev.identity_value == 0 and ev.consistency == 0
