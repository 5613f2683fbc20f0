import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from bondheat.errors import NonPhysicalResult, OutOfRange
from bondheat.materials import (BoundarySet, CompoundSpec, Drive, PhysicalConstants, WireGeometryDerived,
                                WireSpec, kirchhoff_forward, kirchhoff_inverse, nominal_wire,
                                wire_conductivity, wire_resistivity)
from bondheat.units import parse_quantity

AU = nominal_wire("Au", 2.0, 2.5)
CU = nominal_wire("Cu", 2.0, 2.5)


def test_conductivity_examples():
    assert wire_conductivity(CU, 0.0) == CU.kappa0
    assert wire_conductivity(CU, 100.0) == pytest.approx(379.39, abs=5e-3)
    assert wire_conductivity(AU, 1000.0) == pytest.approx(228.56, abs=5e-3)


def test_conductivity_past_validity_is_an_error():
    with pytest.raises(NonPhysicalResult):
        wire_conductivity(AU, 1.0 / abs(AU.alpha_kappa) + 1.0)


def test_resistivity_examples():
    assert wire_resistivity(CU, 0.0) == CU.rho_e0
    assert wire_resistivity(CU, 100.0) == pytest.approx(2.326e-8, rel=1e-3)
    assert wire_resistivity(AU, 500.0) == pytest.approx(5.978e-8, rel=1e-3)


def test_kirchhoff_examples():
    assert kirchhoff_forward(AU, 0.0) == 0.0
    assert kirchhoff_forward(AU, 200.0) == pytest.approx(194.512, abs=1e-9)
    assert kirchhoff_inverse(AU, 194.512) == pytest.approx(200.0, rel=1e-12)
    assert kirchhoff_inverse(AU, 0.0) == 0.0
    flat = AU.replace(alpha_kappa=0.0)
    assert kirchhoff_forward(flat, 123.4) == 123.4
    assert kirchhoff_inverse(flat, 123.4) == 123.4


def test_kirchhoff_inverse_beyond_vertex():
    # 1 + 2 a theta = -0.0976
    with pytest.raises(OutOfRange):
        kirchhoff_inverse(AU, 2000.0)


def test_arrays_pass_through():
    dT = np.linspace(0, 1000, 7)
    assert np.allclose(kirchhoff_inverse(AU, kirchhoff_forward(AU, dT)), dT, rtol=1e-12)
    assert wire_conductivity(AU, dT).shape == (7,)


def test_geometry_from_mil_input():
    d = parse_quantity("2 mil", "length")
    w = AU.replace(diameter=d)
    assert w.area == math.pi * d**2 / 4
    assert w.area == pytest.approx(2.0268e-9, rel=1e-4)
    assert w.perimeter == pytest.approx(1.5959e-4, rel=1e-4)
    g = WireGeometryDerived.of(w)
    assert (g.area, g.perimeter) == (w.area, w.perimeter)


@pytest.mark.parametrize("field, value", [
    ("length", 0.0), ("diameter", -1.0), ("kappa0", 0.0), ("rho_e0", 0.0), ("mass_density", 0.0),
    ("specific_heat", 0.0), ("emissivity", 0.0), ("emissivity", 1.5), ("alpha_rho", -1e-3),
    ("alpha_kappa", 1e-4)])
def test_wire_invariants(field, value):
    with pytest.raises(ValueError):
        AU.replace(**{field: value})


def test_other_invariants():
    with pytest.raises(ValueError):
        CompoundSpec(1e-3, 1e-3, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        BoundarySet(300, 300, 300, 0.0, 25)
    with pytest.raises(ValueError):
        BoundarySet(300, 300, 300, 300, 0.0)
    with pytest.raises(ValueError):
        Drive(-1.0, 1.0)
    with pytest.raises(ValueError):
        Drive(1.0, 0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(0.0)
    assert PhysicalConstants().sigma == 5.670374419e-8


# below |a| = 1e-12 the inverse is the identity by construction
alphas = st.one_of(st.just(0.0), st.floats(min_value=-1e-3, max_value=-1e-10))


@given(alphas, st.floats(min_value=0.0, max_value=0.999))
def test_round_trip_property(a, frac):
    # frac scales dT across the whole increasing branch [0, -1/a)
    w = AU.replace(alpha_kappa=a)
    dT = frac * (1.0 / abs(a) if a else 5000.0)
    back = kirchhoff_inverse(w, kirchhoff_forward(w, dT))
    assert math.isclose(back, dT, rel_tol=1e-10, abs_tol=1e-12)


@given(st.floats(min_value=-1e-3, max_value=-1e-8), st.floats(min_value=0.0, max_value=0.99))
def test_inverse_matches_root_solve(a, frac):
    # independent oracle: bracketed root of forward(x) = theta on the increasing branch
    w = AU.replace(alpha_kappa=a)
    theta = frac * (-0.5 / a)
    ref = brentq(lambda x: kirchhoff_forward(w, x) - theta, 0.0, -1.0 / a, xtol=1e-14, rtol=1e-15)
    assert math.isclose(kirchhoff_inverse(w, theta), ref, rel_tol=1e-10, abs_tol=1e-10)


@given(st.floats(min_value=-1e-3, max_value=-1e-8), st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_forward_monotone(a, u, v):
    w = AU.replace(alpha_kappa=a)
    x, y = sorted((u / -a, v / -a))
    if x < y:
        assert kirchhoff_forward(w, x) < kirchhoff_forward(w, y)


@given(st.floats(-300.0, 3000.0), st.floats(-1e-3, 0.0), st.floats(0.0, 1e-2))
def test_material_laws_closed_form(dT, ak, ar):
    w = AU.replace(alpha_kappa=ak, alpha_rho=ar)
    assert math.isclose(wire_resistivity(w, dT), w.rho_e0 * (1 + ar * dT), rel_tol=1e-10, abs_tol=1e-22)
    k = w.kappa0 * (1 + ak * dT)
    if k > 0:
        assert math.isclose(wire_conductivity(w, dT), k, rel_tol=1e-10)
    else:
        with pytest.raises(NonPhysicalResult):
            wire_conductivity(w, dT)
