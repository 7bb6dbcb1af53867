import numpy as np
import pytest

from wavetomo.amplitudes import build_b1, build_b2
from wavetomo.coeffs import make_phantom, mollify
from wavetomo.errors import OverflowGuardError, UsageError
from wavetomo.grid import LightFrame, SpaceTimeGrid
from wavetomo.probes import build_probe, remainder_decay_report


def _grid(m):
    return SpaceTimeGrid(1.0, (1.0, 1.0), int(1.5 * (m - 1)) + 1, (m, m))


def _flat(g, frame, lam, zeta=None):
    if zeta is None:
        return build_b2(None, frame, lam, grid=g, exponent=np.zeros(g.shape))
    return build_b1(None, frame, zeta, lam, grid=g, exponent=np.zeros(g.shape))


@pytest.mark.parametrize("method", ["direct", "conjugated"])
def test_free_growing_ansatz_is_exact(method):
    g = _grid(33)
    fr = LightFrame((0.6, 0.8))
    p = build_probe(g, None, None, _flat(g, fr, 4.0), 4.0, "grow", method=method)
    # the conjugated scheme is exact on b = 1; leapfrog on u carries an O(h^2) phase error
    assert p.w_l2 < (1e-10 if method == "conjugated" else 1e-3)


def test_definitional_identity():
    g = _grid(33)
    fr = LightFrame((1.0, 0.0))
    a = make_phantom({"kind": "smooth_bump", "width": 0.3, "amplitude": 0.8}, g)
    b = build_b2(mollify(a, 8.0), fr, 8.0, grid=g)
    for method in ("direct", "conjugated"):
        p = build_probe(g, a, None, b, 8.0, "grow", method=method)
        psi = g.mesh()[0] + g.mesh()[1]
        w = np.exp(-8.0 * psi) * p.u.values - b.values
        assert np.abs(w - p.w.values).max() <= 1e-10 * max(1.0, np.abs(b.values).max())


def test_decay_probe_lightlike_frequency():
    fr = LightFrame((1.0, 0.0))
    lam = 4.0
    light, transverse = [], []
    for m in (33, 65):
        g = _grid(m)
        light.append(build_probe(g, None, None, _flat(g, fr, lam, 2.0 * np.array([1.0, 1.0, 0.0])), lam, "decay").w_l2)
        transverse.append(build_probe(g, None, None, _flat(g, fr, lam, 2.0 * np.array([0.0, 0.0, 1.0])),
                                      lam, "decay").w_l2)
    # light-like zeta: exact ansatz, remainder is discretization error only
    assert light[1] < light[0] / 3.5
    # transverse zeta leaves |zeta|^2 in the symbol, which refinement does not remove
    assert transverse[1] > 0.9 * transverse[0]
    assert transverse[1] > 100 * light[1]


def test_probe_errors():
    g = _grid(17)
    fr = LightFrame((1.0, 0.0))
    with pytest.raises(UsageError):
        build_probe(g, None, None, _flat(g, fr, 4.0), 4.0, "sideways")
    with pytest.raises(UsageError):
        build_probe(g, None, None, _flat(g, fr, 4.0), 4.0, "grow", method="magic")
    with pytest.raises(OverflowGuardError):
        build_probe(g, None, None, _flat(g, fr, 30.0), 30.0, "grow")


def _smooth_probe(m, lam, width=0.45):
    g = SpaceTimeGrid(1.0, (1.0, 1.0), int(1.5 * (m - 1)) + 1, (m, m))
    a = make_phantom({"kind": "smooth_bump", "width": width, "amplitude": 1.0}, g)
    fr = LightFrame((1.0, 0.0))
    b = build_b2(mollify(a, lam), fr, lam, grid=g)
    return build_probe(g, a, None, b, lam, "grow", lambda_cap=None, method="conjugated")


def test_refinement_reduces_pde_residual():
    coarse = _smooth_probe(33, 8.0)
    fine = _smooth_probe(65, 8.0)
    assert fine.pde_residual_norm <= coarse.pde_residual_norm / 3.0


def test_remainder_report_shape():
    probes = [_smooth_probe(33, lam) for lam in (4.0, 6.0, 8.0, 12.0)]
    rep = remainder_decay_report(probes)
    assert [r[0] for r in rep.rows] == [4.0, 6.0, 8.0, 12.0]
    assert np.isfinite(rep.slope_lam_w)
    assert "slope" in rep.summary()
    with pytest.raises(UsageError):
        remainder_decay_report(probes[:3])
