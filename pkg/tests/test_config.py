import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetomo.config import ExperimentConfig
from wavetomo.errors import ConfigError, OverflowGuardError

BASE = """[meta]
schema_version = 1
[grid]
T = 0.5
L = 0.5, 0.5
nt = 25
nx = 17, 17
"""


def test_defaults_and_roundtrip():
    cfg = ExperimentConfig.default()
    assert cfg["grid"]["n"] == 2
    text = cfg.canonical()
    again = ExperimentConfig.from_text("[meta]\nschema_version = 1\n" + text.split("[meta]\nschema_version = 1\n", 1)[1])
    assert again.canonical() == text
    assert again == cfg and again.digest() == cfg.digest()


@pytest.mark.parametrize("name", ["gaussian_potential.ini", "spacelike_damping.ini", "null_test.ini"])
def test_shipped_configs_roundtrip(name):
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "configs" / name
    cfg = ExperimentConfig.from_file(path)
    assert ExperimentConfig.from_text(cfg.canonical().replace("[meta]", "[meta]", 1)).canonical() == cfg.canonical()


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2.0), st.integers(2, 6), st.sampled_from(["none", "poly"]))
def test_roundtrip_property(T, omegas, cont):
    text = BASE.replace("T = 0.5", f"T = {T!r}") + f"[probes]\nlambda = 2\nomega_count = {omegas}\n" \
        f"[run]\ncontinuation = {cont}\n[phantom.q2]\nkind = smooth_bump\nwidth = 0.1\n"
    cfg = ExperimentConfig.from_text(text)
    assert ExperimentConfig.from_text(cfg.canonical()).canonical() == cfg.canonical()
    assert cfg["grid"]["T"] == T


@pytest.mark.parametrize("snippet, field", [
    ("[grid]\nnt = many\n", "grid.nt"),
    ("[probes]\nzeta_count = 1.5\n", "probes.zeta_count"),
    ("[run]\nmode = guess\n", "run.mode"),
    ("[grid]\ncolour = red\n", "grid.colour"),
    ("[phantom.a1]\nwidht = 0.2\n", "phantom.a1.widht"),
    ("[extras]\nx = 1\n", "extras"),
])
def test_errors_name_the_field(snippet, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_text("[meta]\nschema_version = 1\n" + snippet)
    assert field in str(info.value)


def test_schema_version_required():
    with pytest.raises(ConfigError, match="schema_version"):
        ExperimentConfig.from_text("[grid]\nT = 1\n")
    with pytest.raises(ConfigError, match="schema_version"):
        ExperimentConfig.from_text("[meta]\nschema_version = 7\n")


def test_guard_checked():
    with pytest.raises((ConfigError, OverflowGuardError)):
        ExperimentConfig.from_text(BASE + "[probes]\nlambda = 5000\n")


def test_overrides_and_builders():
    cfg = ExperimentConfig.from_text(BASE + "[probes]\nomega_count = 5\nzeta_count = 3\n")
    cfg2 = cfg.with_values(run__seed=9)
    assert cfg2["run"]["seed"] == 9 and cfg2.digest() != cfg.digest()
    g = cfg.grid()
    assert g.nx == (17, 17) and g.T == 0.5
    frames = cfg.frames()
    assert len(frames) == 5 and frames[0].zeta_grid.shape == (9, 3)
    assert cfg.phantom("a1", g).sup == 0.0
    assert cfg.geometry().check()
