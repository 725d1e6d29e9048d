import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moyal_lab.config import ExperimentConfig, load_config, parse_config, parse_symbol
from moyal_lab.errors import ConfigurationError

REFERENCE = """
# cif reference run
d = 2
N = 64
L = auto
theta0 = 2
M = 64
symbol = square{gaussian{sigma=1}}   # y^* y
variant = smooth
sweep_N = 32, 48, 64
seed = 7
"""


def test_reference_config():
    c = parse_config(REFERENCE)
    assert (c.N, c.M, c.seed, c.L, c.theta0) == (64, 64, 7, None, 2.0)
    assert c.sweep_N == (32, 48, 64)
    assert str(c.symbol) == "square{gaussian{sigma=1}}"
    resolved = c.resolved()
    assert resolved["L"] == pytest.approx(np.sqrt(4 * np.pi * 64 / 2))
    assert c.echo()["L"] == "auto"


def test_defaults_are_valid():
    c = ExperimentConfig()
    assert c.context().grid.phase_defect(c.context().theta) < 1e-12


def test_auto_theta():
    c = parse_config("N = 32\nL = 16\ntheta0 = auto\n")
    assert c.context().theta.theta0 == pytest.approx(np.pi / 2)


@pytest.mark.parametrize(
    "text, field",
    [
        ("N = 63", "N"),
        ("N = 6.5", "N"),
        ("d = 3", "d"),
        ("L = -1", "L"),
        ("L = auto\ntheta0 = auto", "theta0"),
        ("L = 16\ntheta0 = 1", "theta0"),
        ("variant = sharp", "variant"),
        ("boundary = sphere", "boundary"),
        ("window_fraction = 1.5", "window_fraction"),
        ("sweep_N = 32, 33", "sweep_N"),
        ("colour = red", "colour"),
        ("N = 32\nN = 48", "N"),
        ("symbol = gaussian{sigma=-1}", "symbol"),
        ("symbol = matrix-unit{k=1}", "symbol"),
        ("symbol = lattice-delta{s0=1}", "symbol"),
        ("symbol = wavelet{a=1}", "symbol"),
        ("symbol = square{gaussian{sigma=1}", "symbol"),
        ("count = 10", "count"),
    ],
)
def test_field_level_errors(text, field):
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    assert err.value.field == field
    assert str(err.value).startswith(f"{field}: ")


def test_incompatible_theta_suggests_value():
    with pytest.raises(ConfigurationError, match="use theta0=3.14159"):
        parse_config("N = 64\nL = 16\ntheta0 = 2")


def test_missing_equals_sign():
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_config("N = 32\nthis is not a pair\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError) as err:
        load_config(tmp_path / "nope.cfg")
    assert err.value.field == "config"


def test_symbol_grammar():
    assert parse_symbol("zero").family == "zero"
    s = parse_symbol("lattice-delta{s0=(0.5, -1)}")
    assert s.param("s0") == (0.5, -1.0)
    mu = parse_symbol("matrix-unit{k=0, l=3}")
    assert (mu.param("k"), mu.param("l")) == (0.0, 3.0)
    assert str(parse_symbol(" square{ bump{radius=0.5} } ")) == "square{bump{radius=0.5}}"


@given(st.floats(0.1, 10, allow_nan=False), st.integers(0, 9), st.integers(0, 9))
def test_symbol_round_trip(sigma, k, l):
    for text in (f"gaussian{{sigma={sigma!r}}}", f"matrix-unit{{k={k}, l={l}}}",
                 f"square{{gaussian{{sigma={sigma!r}}}}}"):
        spec = parse_symbol(text)
        assert parse_symbol(str(spec)) == parse_symbol(str(parse_symbol(str(spec))))


@given(st.sampled_from([16, 24, 32, 48, 64]), st.integers(0, 2**31))
def test_with_keeps_validation(N, seed):
    c = ExperimentConfig().with_(N=N, seed=seed)
    assert c.context().grid.N == N
    with pytest.raises(ConfigurationError):
        c.with_(N=N + 1)
