import numpy as np
import pytest

from wavetomo.amplitudes import light_phase
from wavetomo.carleman import (admissible_test_function, c1a_sweep, c1a_terms, check_admissible,
                               compact_test_function, conjugated_operator, verify_c1a, verify_H_minus1,
                               verify_interior7)
from wavetomo.coeffs import make_phantom
from wavetomo.errors import PreconditionError, UsageError
from wavetomo.grid import SpaceTimeGrid, integrate_box


@pytest.fixture(scope="module")
def grid():
    return SpaceTimeGrid(1.0, (1.0, 1.0), 49, (33, 33))


@pytest.mark.parametrize("seed", [0, 1, 7, 123])
def test_admissible_functions(grid, seed):
    u = admissible_test_function(seed, grid)
    v = u.values
    assert np.abs(v).max() == pytest.approx(1.0)
    assert not np.any(v[0])
    assert not np.any(v[:, 0]) and not np.any(v[:, -1]) and not np.any(v[:, :, 0]) and not np.any(v[:, :, -1])
    assert check_admissible(u, grid)


def test_inadmissible_rejected(grid):
    v = admissible_test_function(0, grid).values.copy()
    v[:, 0] = 1.0
    with pytest.raises(PreconditionError):
        verify_c1a(grid.field(v), None, None, (1.0, 0.0), (4.0,), grid)


def test_seeds_are_diverse(grid):
    a = admissible_test_function(0, grid).values.ravel()
    b = admissible_test_function(1, grid).values.ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.9


def test_zero_function(grid):
    rep = verify_c1a(grid.field(np.zeros(grid.shape)), None, None, (1.0, 0.0), (4.0, 8.0), grid)
    assert all(r.lhs == 0 and r.rhs == 0 and r.ratio == 0 for r in rep.rows)


def test_terms_nonnegative(grid):
    a = make_phantom({"kind": "smooth_bump", "width": 0.3}, grid)
    rep = c1a_sweep(grid, [0, 1, 2], (2.0, 4.0, 8.0), a=a)
    for r in rep.rows:
        assert all(v >= 0 for v in r.terms.values())
        assert r.lhs >= 0 and r.rhs > 0
    assert rep.lambdas == [2.0, 4.0, 8.0] and rep.seeds == [0, 1, 2]
    assert "lambda_1" in rep.summary()


def test_weight_algebra(grid):
    u = admissible_test_function(3, grid).values
    zero = np.zeros(grid.shape)
    omega = (0.6, 0.8)
    psi = light_phase(grid, omega)
    plain = integrate_box(u ** 2, grid.box)
    for lam in (2.0, 6.0):
        # lifting u by e^{lam psi} cancels the weight exactly
        _, _, terms = c1a_terms(np.exp(lam * psi) * u, zero, zero, omega, lam, grid)
        assert terms["interior_l2"] == pytest.approx(lam ** 2 * plain, rel=1e-12)


def test_interior_term_scales_as_lambda_squared(grid):
    u = admissible_test_function(5, grid).values
    zero = np.zeros(grid.shape)
    psi = light_phase(grid, (1.0, 0.0))
    for lam in (3.0, 9.0):
        _, _, terms = c1a_terms(u, zero, zero, (1.0, 0.0), lam, grid)
        weighted = integrate_box(np.exp(-2 * lam * psi) * u ** 2, grid.box)
        assert terms["interior_l2"] == pytest.approx(lam ** 2 * weighted, rel=1e-12)


def test_interior7_rows(grid):
    rep = verify_interior7(admissible_test_function(2, grid), None, None, (1.0, 0.0), (2.0, 4.0), grid)
    assert rep.estimate == "interior7"
    assert all(r.rhs > 0 and r.lhs >= 0 for r in rep.rows)


@pytest.fixture(scope="module")
def compact(grid):
    box = grid.extension_box(0.25)
    return compact_test_function(0, box, grid.center, 0.45)


def test_car2_zero_and_scaling(grid, compact):
    zero = compact.with_values(np.zeros(compact.box.shape))
    assert all(r.ratio == 0 for r in verify_H_minus1(zero, None, (8.0, 16.0)).rows)
    r1 = verify_H_minus1(compact, None, (8.0, 32.0))
    r3 = verify_H_minus1(compact * 3.0, None, (8.0, 32.0))
    for x, y in zip(r1.rows, r3.rows):
        assert y.ratio == pytest.approx(x.ratio, rel=1e-10)


def test_car2_bounded_and_damping_robust(grid, compact):
    lams = (8.0, 16.0, 32.0, 64.0)
    free = verify_H_minus1(compact, None, lams)
    a = make_phantom({"kind": "smooth_bump", "width": 0.4, "amplitude": 1.0}, grid)
    damped = verify_H_minus1(compact, a, lams)
    assert free.stability() <= 2.0
    for x, y in zip(free.rows, damped.rows):
        assert abs(y.ratio / x.ratio - 1.0) <= 0.5


def test_car2_margin_enforced(grid):
    box = grid.extension_box(0.25)
    v = compact_test_function(0, box, grid.center, 0.45)
    vals = v.values.copy()
    vals[0] = 1.0
    with pytest.raises(PreconditionError):
        verify_H_minus1(v.with_values(vals), None, (8.0,))


def test_conjugated_operator_variants(compact):
    with pytest.raises(UsageError):
        conjugated_operator(compact, None, 4.0, (1.0, 0.0), "bogus")
    # without damping the car2 operator is linear in lambda
    p0 = conjugated_operator(compact, None, 0.0, (1.0, 0.0))
    p1 = conjugated_operator(compact, None, 1.0, (1.0, 0.0))
    p3 = conjugated_operator(compact, None, 3.0, (1.0, 0.0))
    assert np.allclose(p3 - p0, 3.0 * (p1 - p0), atol=1e-9 * np.abs(p3).max())
    rep = verify_H_minus1(compact, None, (8.0, 16.0), "l8a")
    assert rep.estimate == "l8a_H-1" and all("shifted" in r.terms for r in rep.rows)
