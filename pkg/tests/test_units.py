import math

import pytest
from hypothesis import given, strategies as st

from bondheat.errors import UnitError
from bondheat.units import MIL, ZERO_CELSIUS, format_quantity, parse_quantity


@pytest.mark.parametrize("text, dim, expected", [
    ("2.0 mil", "length", 2 * 25.4e-6),
    ("2.5 mm", "length", 2.5e-3),
    ("80 degC", "temperature", 353.15),
    ("80 C", "temperature", 353.15),
    ("300 K", "temperature", 300.0),
    ("50 ms", "time", 0.05),
    ("3.7 A", "current", 3.7),
    ("1e-8 ohm*m", "resistivity", 1e-8),
    (".5 1", "dimensionless", 0.5),
])
def test_parse_known_units(text, dim, expected):
    assert parse_quantity(text, dim) == pytest.approx(expected, rel=1e-15)


def test_mil_is_exact():
    assert MIL == 25.4e-6
    assert ZERO_CELSIUS == 273.15


@pytest.mark.parametrize("text", ["2.0", "2.0 furlong", "mil 2", "", "2.0 mil extra"])
def test_bad_quantities(text):
    with pytest.raises(UnitError):
        parse_quantity(text)


def test_bare_number_is_not_a_quantity():
    with pytest.raises(UnitError):
        parse_quantity(2.0)


def test_dimension_mismatch():
    with pytest.raises(UnitError, match="expected temperature"):
        parse_quantity("2 mm", "temperature")


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
       st.sampled_from(["m", "mm", "mil", "K", "degC", "s", "ms", "A", "1/K", "W/(m*K)"]))
def test_format_parse_round_trip(value, unit):
    # written text always parses back to the same float
    text = format_quantity(value, unit)
    again = format_quantity(parse_quantity(text), unit)
    assert again == text
    assert math.isclose(parse_quantity(text), value, rel_tol=1e-12, abs_tol=1e-9)
