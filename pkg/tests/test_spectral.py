import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from bondheat.errors import ConvergenceFailure
from bondheat.materials import epoxy_compound, nominal_wire, reference_boundaries
from bondheat.spectral import (_bracketed_root, build_basis, cot_residual, robin_cot_roots,
                               robin_tan_roots, tan_residual)

W, H = 4.45e-3, 1.48e-3
RATIO = 25 / 0.870


def scan_roots(f, hi, n, per_unit=2000):
    """Independent oracle: sign changes of f on a uniform grid, refined by brentq."""
    x = np.linspace(1e-9, hi, int(per_unit * hi))
    v = f(x)
    idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    return np.array([brentq(f, x[i], x[i + 1], xtol=1e-15) for i in idx])[:n]


def test_tan_roots_match_scan():
    lam = robin_tan_roots(W, RATIO, 20)
    B = RATIO * W / 2
    ref = scan_roots(lambda m: m * np.sin(m) - B * np.cos(m), 21 * math.pi, 20) / (W / 2)
    assert np.allclose(lam, ref, rtol=1e-12)
    assert np.all(np.abs(tan_residual(lam, W, RATIO)) < 1e-10)


def test_cot_roots_match_scan():
    lam = robin_cot_roots(H, RATIO, 20)
    B = RATIO * H
    ref = scan_roots(lambda m: m * np.cos(m) + B * np.sin(m), 21 * math.pi, 20) / H
    assert np.allclose(lam, ref, rtol=1e-12)
    assert np.all(np.abs(cot_residual(lam, H, RATIO)) < 1e-10)


def test_sign_change_across_each_root():
    lam = robin_tan_roots(W, RATIO, 20)
    f = lambda l: l * np.sin(l * W / 2) - RATIO * np.cos(l * W / 2)
    assert np.all(f(lam * (1 - 1e-9)) * f(lam * (1 + 1e-9)) < 0)


def test_branch_intervals():
    lam = robin_tan_roots(W, RATIO, 20)
    n = np.arange(20)
    assert np.all(lam > np.maximum(0, (2 * n - 1) * math.pi / W)) and np.all(lam < (2 * n + 1) * math.pi / W)
    lz = robin_cot_roots(H, RATIO, 20)
    p = np.arange(1, 21)
    assert np.all(lz > (p - 1) * math.pi / H) and np.all(lz < p * math.pi / H)


def test_limits():
    n = np.arange(6)
    neumann = robin_tan_roots(W, 1e-9, 6)
    assert np.allclose(neumann[1:], 2 * n[1:] * math.pi / W, rtol=1e-6)
    assert neumann[0] < 1.0
    dirichlet = robin_tan_roots(W, 1e12, 6)
    assert np.allclose(dirichlet, (2 * n + 1) * math.pi / W, rtol=1e-6)
    p = np.arange(1, 7)
    assert np.allclose(robin_cot_roots(H, 1e-9, 6), (2 * p - 1) * math.pi / (2 * H), rtol=1e-6)
    assert np.allclose(robin_cot_roots(H, 1e12, 6), p * math.pi / H, rtol=1e-6)


def test_interlacing():
    n = np.arange(20)
    lam = robin_tan_roots(W, RATIO, 20)
    assert np.all(lam >= 2 * n * math.pi / W) and np.all(lam <= (2 * n + 1) * math.pi / W)
    p = np.arange(1, 21)
    lz = robin_cot_roots(H, RATIO, 20)
    assert np.all(lz >= (2 * p - 1) * math.pi / (2 * H)) and np.all(lz <= p * math.pi / H)


def test_bad_arguments():
    with pytest.raises(ValueError):
        robin_tan_roots(W, 0.0, 3)
    with pytest.raises(ValueError):
        robin_cot_roots(H, RATIO, 0)
    with pytest.raises(ConvergenceFailure):
        _bracketed_root(lambda x: x * x + 1, lambda x: 2 * x, -1.0, 1.0)
    with pytest.raises(ConvergenceFailure):
        _bracketed_root(math.cos, lambda x: -math.sin(x), 0.0, 3.0, max_iter=3)


def test_build_basis_examples():
    wire = nominal_wire("Au", 2.0, 2.5)
    comp, bc = epoxy_compound(), reference_boundaries()
    b = build_basis(wire, comp, bc, 2, 3, 2, 2)
    assert np.allclose(b.lambda_y_m, [628.32, 1884.96, 3141.59], atol=5e-3)
    assert np.allclose(b.lambda_y_w, [1256.64, 2513.27], atol=5e-3)
    one = build_basis(wire, comp, bc, 1, 1, 1, 1)
    assert one.counts == (1, 1, 1, 1)
    with pytest.raises(ValueError):
        build_basis(wire, comp, bc, 0, 1, 1, 1)


def test_combined_eigen_consistency():
    b = build_basis(nominal_wire("Au", 2.0, 2.5), epoxy_compound(), reference_boundaries())
    c = b.combined()
    assert np.allclose(c.lambda_y_np, b.lambda_x[:, None] ** 2 + b.lambda_z[None, :] ** 2, rtol=1e-12)
    assert np.allclose(c.lambda_z_nm, b.lambda_x[:, None] ** 2 + b.lambda_y_m[None, :] ** 2, rtol=1e-12)
    for arr in (b.lambda_x, b.lambda_y_m, b.lambda_z, b.lambda_y_w):
        assert np.all(arr > 0) and np.all(np.diff(arr) > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 1e-1), st.floats(1e-3, 1e5), st.integers(1, 30))
def test_roots_property(width, ratio, n):
    lam = robin_tan_roots(width, ratio, n)
    assert np.all(np.diff(lam) > 0)
    # Biot-scaled residual, relative to the size of the terms in the equation
    mu = lam * width / 2
    assert np.all(np.abs(tan_residual(lam, width, ratio)) <= 1e-10 * np.maximum(1.0, mu * np.abs(np.tan(mu))))
    k = np.arange(n)
    assert np.all(mu >= k * math.pi) and np.all(mu <= (k + 0.5) * math.pi)
    lz = robin_cot_roots(width, ratio, n)
    nu = lz * width
    assert np.all(nu >= (k + 0.5) * math.pi) and np.all(nu <= (k + 1) * math.pi)
    assert np.all(np.abs(cot_residual(lz, width, ratio)) <= 1e-10 * np.maximum(1.0, np.abs(nu / np.tan(nu))))
