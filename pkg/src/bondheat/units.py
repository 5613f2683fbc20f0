"""Unit-suffixed quantity parsing.

All solver code works in SI.  Values coming from configuration files or the
command line carry an explicit unit suffix (``"2.0 mil"``, ``"80 degC"``) and
are normalised here, at the boundary.
"""

import re

from .errors import UnitError

MIL = 25.4e-6
ZERO_CELSIUS = 273.15

# unit -> (dimension, scale, offset); SI value = scale * value + offset
_UNITS = {
    "m": ("length", 1.0, 0.0),
    "mm": ("length", 1e-3, 0.0),
    "um": ("length", 1e-6, 0.0),
    "mil": ("length", MIL, 0.0),
    "K": ("temperature", 1.0, 0.0),
    "degC": ("temperature", 1.0, ZERO_CELSIUS),
    "C": ("temperature", 1.0, ZERO_CELSIUS),
    "1/K": ("per_kelvin", 1.0, 0.0),
    "s": ("time", 1.0, 0.0),
    "ms": ("time", 1e-3, 0.0),
    "us": ("time", 1e-6, 0.0),
    "A": ("current", 1.0, 0.0),
    "mA": ("current", 1e-3, 0.0),
    "W/(m*K)": ("conductivity", 1.0, 0.0),
    "W/(m^2*K)": ("transfer", 1.0, 0.0),
    "ohm*m": ("resistivity", 1.0, 0.0),
    "kg/m^3": ("density", 1.0, 0.0),
    "J/(kg*K)": ("specific_heat", 1.0, 0.0),
    "1": ("dimensionless", 1.0, 0.0),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text, dimension=None):
    """Parse ``"<number> <unit>"`` and return the SI value.

    Parameters
    ----------
    text : str
        Quantity with a mandatory unit suffix; ``"1"`` is the dimensionless unit.
    dimension : str, optional
        Expected dimension; a mismatch raises :class:`UnitError`.
    """
    if not isinstance(text, str):
        raise UnitError(f"quantity {text!r} has no unit annotation")
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        raise UnitError(f"quantity {text!r} has no unit annotation")
    if unit not in _UNITS:
        raise UnitError(f"unknown unit {unit!r} in {text!r}")
    dim, scale, offset = _UNITS[unit]
    if dimension is not None and dim != dimension:
        raise UnitError(f"{text!r} is a {dim}, expected {dimension}")
    return scale * value + offset


def format_quantity(value, unit):
    """Inverse of :func:`parse_quantity` for a chosen display unit."""
    _, scale, offset = _UNITS[unit]
    v = (value - offset) / scale + 0.0  # no negative zero in output
    return f"{v!r} {unit}"
