import numpy as np

from wavetomo.grid import Face, SpaceTimeGrid, restrict_trace
from wavetomo.io import read_csv, read_pgm, read_wtf, sha256, write_csv, write_pgm, write_wtf


def test_wtf_roundtrip_real_and_complex(tmp_path, unit_grid, rng):
    g = unit_grid
    for vals in (rng.standard_normal(g.shape), rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)):
        p = write_wtf(tmp_path / "f.wtf", g.field(vals), g.T, g.lengths, g.extension_radius, {"tag": 1})
        f, head = read_wtf(p)
        assert np.array_equal(f.values, vals)
        assert f.box == g.box
        assert head["T"] == g.T and head["L"] == list(g.lengths) and head["meta"] == {"tag": 1}
        assert p.read_bytes()[:4] == b"WTF1"


def test_wtf_boundary_field(tmp_path, unit_grid):
    g = unit_grid
    tr = restrict_trace(g.field(np.ones(g.shape)), "neumann_sigma", Face(1, 1))
    f, _ = read_wtf(write_wtf(tmp_path / "n.wtf", tr, g.T, g.lengths, g.extension_radius))
    assert f.kind == "boundary" and f.face == Face(1, 1)


def test_csv_is_rfc4180_and_exact(tmp_path):
    p = write_csv(tmp_path / "t.csv", ("a", "b"), [(0.1, 1), (1 / 3, True)])
    raw = p.read_bytes()
    assert b"\r\n" in raw
    head, rows = read_csv(p)
    assert head == ["a", "b"]
    assert float(rows[1][0]) == 1 / 3


def test_pgm(tmp_path):
    img = np.linspace(-1, 1, 12).reshape(3, 4)
    p = write_pgm(tmp_path / "s.pgm", img)
    back = read_pgm(p)
    assert back.shape == (3, 4) and back.min() == 0 and back.max() == 255
    assert p.read_bytes().startswith(b"P5\n4 3\n255\n")
    assert len(sha256(p)) == 64
