import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlgamp.config import ConfigError, format_config, parse_config, parse_value


def test_defaults_and_overrides():
    cfg = parse_config("")
    assert cfg.scenario.n_rx == 256 and cfg.protocol.n_meas == 128 and cfg.gamp.xi == 0.1
    cfg = parse_config("""
        # comment
        scenario.phi = 0.5      # trailing comment
        protocol.aod_mode = oracle
        harness.baselines = [ls, frozen_vr]
        scenario.phi_range = [0.2, 0.4]
        protocol.q_size = none
    """)
    assert cfg.scenario.phi == 0.5 and cfg.protocol.aod_mode == "oracle"
    assert cfg.harness.baselines == ["ls", "frozen_vr"] and cfg.scenario.phi_range == (0.2, 0.4)


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("3.5") == 3.5 and parse_value("TRUE") is True
    assert parse_value("'x y'") == "x y" and parse_value("[]") == [] and parse_value("none") is None
    with pytest.raises(ValueError):
        parse_value("[1, 2")


@pytest.mark.parametrize("text, line, key", [
    ("scenario.n_rx = 64\nbogus.x = 1", 2, "bogus.x"),
    ("\nscenario.nrx = 64", 2, "scenario.nrx"),
    ("scenario.n_rx = 64.5", 1, "scenario.n_rx"),
    ("scenario.phi = yes", 1, "scenario.phi"),
    ("gamp.onsager = 1", 1, "gamp.onsager"),
    ("scenario.n_rx = none", 1, "scenario.n_rx"),
    ("scenario.n_rx = 64\nscenario.n_rx = 32", 2, "scenario.n_rx"),
    ("harness.baselines = ls", 1, "harness.baselines"),
    ("just some text", 1, None),
])
def test_errors_carry_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line and exc.value.key == key
    assert f"line {line}" in str(exc.value)


def test_semantic_errors():
    with pytest.raises(ConfigError, match="pilot_length"):
        parse_config("protocol.pilot_length = 100")
    with pytest.raises(ConfigError, match="phi"):
        parse_config("scenario.phi = 1.5")
    assert parse_config("scenario.phi = 1.5", validate=False).scenario.phi == 1.5


def test_round_trip_defaults():
    cfg = parse_config("")
    assert parse_config(format_config(cfg)) == cfg


@given(
    phi=st.floats(0.01, 1.0),
    snr=st.floats(-20, 40, allow_nan=False),
    xi=st.floats(1e-6, 10),
    trials=st.integers(1, 1000),
    onsager=st.booleans(),
    vr=st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5),
    q=st.one_of(st.none(), st.integers(256, 2048)),
)
@settings(max_examples=50, deadline=None)
def test_round_trip_random(phi, snr, xi, trials, onsager, vr, q):
    text = "\n".join([
        f"scenario.phi = {phi!r}", f"protocol.snr_db = {snr!r}", f"gamp.xi = {xi!r}",
        f"harness.n_trials = {trials}", f"gamp.onsager = {str(onsager).lower()}",
        f"sweep.vr = [{', '.join(map(repr, vr))}]", f"protocol.q_size = {q if q is not None else 'none'}",
    ])
    cfg = parse_config(text)
    assert parse_config(format_config(cfg)) == cfg
    assert cfg.scenario.phi == phi and cfg.sweep.vr == vr
