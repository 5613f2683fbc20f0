import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bondheat.errors import DegenerateHessian, NotConverged, SingularReducedSystem
from bondheat.optimizer import (PARAMETER_NAMES, FusingDataset, ModelMap, OptimizerOptions,
                                ParameterVector, SubsetSplit, apply_parameters, model_hessians,
                                model_jacobian, newton_step, optimize, parameter_space,
                                qr_subset_select, residual, residual_derivatives, svd_truncate,
                                synthetic_dataset)


class ToyMap:
    """Model map stand-in: B = f(p) for a fixed number of events."""

    def __init__(self, f, n_events, T_f=1000.0):
        self.f = f
        self.dataset = FusingDataset(np.ones(n_events), np.ones(n_events), T_f)

    def __call__(self, p):
        return np.asarray(self.f(np.asarray(p, dtype=float)), dtype=float)


def toy_space(nominal, width=0.5):
    nominal = np.asarray(nominal, dtype=float)
    return ParameterVector(PARAMETER_NAMES[: len(nominal)], nominal,
                           nominal - width * np.abs(nominal), nominal + width * np.abs(nominal))


def test_newton_on_quadratic_reaches_minimiser():
    # B(x) = 900 + 50 x, T_f = 1000: R is quadratic with minimum at x = 2
    B = lambda x: 900.0 + 50.0 * x[0]
    x = np.array([1.0])
    grad, H = residual_derivatives(np.array([B(x)]), 1000.0, np.array([[50.0]]))
    split = qr_subset_select(svd_truncate(H).V_u)
    obj = lambda xv: (1000.0 - B(xv)) ** 2
    step = newton_step(x, grad, H, split, obj, np.array([0.0]), np.array([5.0]))
    assert step.accepted and step.alpha == 1.0
    assert step.x[0] == pytest.approx(2.0, rel=1e-14)
    assert step.residual == pytest.approx(0.0, abs=1e-20)


def test_svd_identity_keeps_everything():
    for thr in (1e-6, 0.5, 0.999):
        assert svd_truncate(np.eye(5), thr).rank == 5


def test_svd_forced_truncation():
    t = svd_truncate(np.diag([1.0, 1e-12]), 1e-6)
    assert t.rank == 1 and t.V_u.shape == (1, 2) and t.Sigma_uu.shape == (1, 1)


def test_svd_zero_hessian():
    with pytest.raises(DegenerateHessian):
        svd_truncate(np.zeros((3, 3)))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (5, 5), elements=st.floats(-10, 10)), st.sampled_from([1e-6, 1e-3, 0.1, 0.5]))
def test_eckart_young_bound(A, thr):
    H = A @ A.T
    if np.linalg.norm(H) < 1e-6:
        return
    t = svd_truncate(H, thr)
    err = np.linalg.norm(H - t.reconstruct(), 2)
    nxt = t.sigma[t.rank] if t.rank < len(t.sigma) else 0.0
    assert err <= nxt + 1e-9 * t.sigma[0]
    assert np.all(np.diff(t.sigma) <= 0)


def test_qr_full_rank_selects_all():
    split = qr_subset_select(np.linalg.qr(np.random.default_rng(1).normal(size=(4, 4)))[0].T)
    assert sorted(split.selected) == [0, 1, 2, 3] and len(split.frozen) == 0


def test_qr_exact_support():
    V = np.zeros((2, 5))
    V[0, 1], V[0, 3] = 0.6, 0.8
    V[1, 1], V[1, 3] = -0.8, 0.6
    split = qr_subset_select(V)
    assert list(split.selected) == [1, 3]
    assert sorted(split.permutation) == list(range(5))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (6, 4), elements=st.floats(-1e3, 1e3)), arrays(float, 6, elements=st.floats(500, 1500)))
def test_gauss_newton_hessian_psd(J, B):
    _, H = residual_derivatives(B, 1000.0, J)
    assert np.allclose(H, H.T)
    assert np.linalg.eigvalsh(H)[0] >= -1e-9 * max(1.0, np.abs(H).max())


def test_gradient_vanishes_at_zero_residual():
    J = np.random.default_rng(2).normal(size=(4, 3))
    g, _ = residual_derivatives(np.full(4, 1000.0), 1000.0, J)
    assert np.all(g == 0)


def test_masked_events_are_skipped():
    J = np.ones((3, 2))
    g, H = residual_derivatives(np.array([990.0, math.nan, 990.0]), 1000.0, J)
    assert np.allclose(g, [-40.0, -40.0]) and np.allclose(H, 4.0)


def test_full_mode_needs_hessians():
    with pytest.raises(ValueError):
        residual_derivatives(np.ones(2), 1.0, np.ones((2, 2)), hessian="full")


def _toy_nonlinear(n):
    a = np.linspace(0.5, 1.5, 4)
    b = np.linspace(-0.3, 0.4, 4)
    if n == 2:
        return lambda p: 300 * a * p[0] * np.exp(b * p[1])
    return lambda p: 300 * a * p[0] * np.exp(b * p[1]) + 20 * a * p[2] ** 2 - 10 * b * p[1] * p[2]


def brute_hessian(R, p, h):
    n = len(p)
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i] * h[i], np.eye(n)[j] * h[j]
            H[i, j] = (R(p + ei + ej) - R(p + ei - ej) - R(p - ei + ej) + R(p - ei - ej)) / (4 * h[i] * h[j])
    return H


@pytest.mark.parametrize("n", [2, 3])
def test_full_hessian_matches_brute_force(n):
    p = np.array([2.0, 1.0, 1.5])[:n]
    f = _toy_nonlinear(n)
    m = ToyMap(f, 4)
    space = toy_space(p)
    R = lambda q: float(np.sum((1000.0 - f(q)) ** 2))
    J = model_jacobian(p, m, space)
    Hs = model_hessians(p, m, space)
    g, H = residual_derivatives(m(p), 1000.0, J, "full", Hs)
    h = 1e-3 * np.abs(p)
    g_ref = np.array([(R(p + np.eye(n)[i] * h[i]) - R(p - np.eye(n)[i] * h[i])) / (2 * h[i]) for i in range(n)])
    H_ref = brute_hessian(R, p, h)
    assert np.allclose(g, g_ref, rtol=1e-2)
    assert np.allclose(H, H_ref, rtol=1e-2, atol=1e-2 * np.abs(H_ref).max())
    assert np.max(np.abs(H - H.T)) <= 1e-10 * np.abs(H).max()


def test_jacobian_zero_column_for_inert_parameter():
    m = ToyMap(lambda p: 900 + 10 * p[0] + 0 * p[1], 3)
    J = model_jacobian(np.array([1.0, 1.0]), m, toy_space([1.0, 1.0]))
    assert np.all(J[:, 1] == 0) and np.allclose(J[:, 0], 10.0)


def test_jacobian_one_sided_at_bound():
    m = ToyMap(lambda p: np.array([p[0] ** 2]), 1)
    space = ParameterVector(PARAMETER_NAMES[:1], np.array([1.0]), np.array([0.5]), np.array([1.0]))
    J = model_jacobian(np.array([1.0]), m, space, rel_step=1e-6)
    assert J[0, 0] == pytest.approx(2.0, rel=1e-5)


def test_frozen_parameters_bit_identical_and_bounds_respected():
    x = np.array([1.1, 0.7, 1.3, 0.95])
    f = lambda xv: float(np.sum((xv - np.array([3.0, 0.0, 1.0, 0.5])) ** 2))
    grad = 2 * (x - np.array([3.0, 0.0, 1.0, 0.5]))
    H = 2 * np.eye(4)
    split = SubsetSplit(np.array([0, 2, 1, 3]), 2, 1e-6)
    lo, hi = np.full(4, 0.5), np.full(4, 1.5)
    step = newton_step(x, grad, H, split, f, lo, hi)
    assert step.x[1] == x[1] and step.x[3] == x[3]
    assert np.all(step.x >= lo) and np.all(step.x <= hi)
    assert step.residual <= f(x)
    assert step.x[0] == 1.5


def test_line_search_rejects_ascent():
    x = np.array([1.0])
    split = SubsetSplit(np.array([0]), 1, 1e-6)
    step = newton_step(x, np.array([1.0]), np.array([[1.0]]), split, lambda v: -abs(v[0] - 1.0) + 5 * (v[0] < 1),
                       np.array([-10.0]), np.array([10.0]), halvings=3)
    assert not step.accepted and step.x[0] == 1.0 and np.all(step.delta == 0)


def test_singular_reduced_system():
    split = SubsetSplit(np.array([0, 1]), 2, 1e-6)
    with pytest.raises(SingularReducedSystem):
        newton_step(np.ones(2), np.ones(2), np.zeros((2, 2)), split, lambda v: 0.0, np.zeros(2), 2 * np.ones(2))


def test_empty_dataset_residual_warns():
    m = ToyMap(lambda p: np.empty(0), 0)
    with pytest.warns(UserWarning):
        assert residual(np.ones(1), m.dataset, m)[0] == 0.0


def test_toy_optimisation_recovers_and_stops():
    target = np.array([2.0, 0.8])
    f = lambda p: 1000.0 + 40 * (p[0] - target[0]) * np.array([1, 2, 3]) + 25 * (p[1] - target[1]) * np.array([1, -1, 2])
    m = ToyMap(f, 3)
    space = toy_space([1.6, 1.0])
    p, report = optimize(space.nominal.copy(), m.dataset, m, space)
    assert report.converged
    assert np.allclose(p, target, rtol=1e-8)
    hist = report.residual_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_optimize_raises_not_converged_with_best():
    f = lambda p: 1000.0 + 40 * np.exp(p[0]) * np.array([1.0, 2.0])
    m = ToyMap(f, 2)
    space = toy_space([1.0])
    with pytest.raises(NotConverged) as info:
        optimize(space.nominal.copy(), m.dataset, m, space, OptimizerOptions(max_iter=1))
    p, rep = info.value.best
    assert rep.stop_reason == "iteration limit" and len(p) == 1


def test_optimize_rejects_start_out_of_bounds():
    m = ToyMap(lambda p: p, 1)
    with pytest.raises(ValueError):
        optimize(np.array([10.0]), m.dataset, m, toy_space([1.0]))


# --- the real model at reduced truncation ----------------------------------

COUNTS = (8, 12, 8, 30)


def test_parameter_space_bounds(au_run):
    sp = parameter_space(au_run.model, au_run.melting_point)
    i = {n: k for k, n in enumerate(sp.names)}
    assert sp.names == PARAMETER_NAMES
    assert sp.contains(sp.nominal)
    assert sp.lower[i["diameter"]] == pytest.approx(0.7 * sp.nominal[i["diameter"]])
    assert sp.upper[i["length"]] == pytest.approx(1.3 * sp.nominal[i["length"]])
    assert sp.lower[i["T_ch"]] == sp.nominal[i["T_ch"]] and sp.upper[i["T_ld"]] == 1.5 * sp.nominal[i["T_ld"]]
    assert 0 < sp.lower[i["emissivity"]] and sp.upper[i["emissivity"]] == 1.0
    assert sp.lower[i["alpha_rho"]] == 0.0 and sp.upper[i["alpha_kappa"]] == 0.0
    assert np.all(sp.project(sp.nominal * 1000) <= sp.upper)
    cfg = apply_parameters(au_run.model, sp.nominal, COUNTS)
    assert cfg.wire == au_run.model.wire and cfg.counts == COUNTS


@pytest.fixture(scope="module")
def real_map(au_run):
    ds = FusingDataset(np.array([11.0, 14.0]), np.array([0.05, 0.02]), au_run.melting_point, "Au")
    return ModelMap(au_run.model, ds, counts=COUNTS)


@pytest.fixture(scope="module")
def real_space(au_run):
    return parameter_space(au_run.model, au_run.melting_point)


def test_duplicated_parameters_one_selected(real_map, real_space):
    """Density and specific heat enter only as their product: exactly one survives."""
    idx = [PARAMETER_NAMES.index(n) for n in ("mass_density", "specific_heat", "rho_e0")]
    p = real_space.nominal
    J = model_jacobian(p, real_map, real_space)[:, idx] * real_space.scale[idx]
    assert np.allclose(J[:, 0], J[:, 1], rtol=1e-5)
    _, H = residual_derivatives(real_map(p), real_map.dataset.melting_point, J)
    svd = svd_truncate(H, 1e-6)
    split = qr_subset_select(svd.V_u)
    assert svd.rank == 2
    chosen = set(split.selected.tolist())
    assert 2 in chosen and len(chosen & {0, 1}) == 1


def test_resistivity_heats(real_map, real_space):
    j = PARAMETER_NAMES.index("rho_e0")
    p = real_space.nominal.copy()
    B0 = real_map(p)
    p[j] *= 1.01
    assert np.all(real_map(p) > B0)


def test_step_halving_changes_jacobian_little(real_map, real_space):
    p = real_space.nominal
    J1 = model_jacobian(p, real_map, real_space, rel_step=1e-4)
    J2 = model_jacobian(p, real_map, real_space, rel_step=5e-5)
    assert np.all(np.abs(J1 - J2) <= 0.01 * np.abs(J1) + 1e-9 * np.max(np.abs(J1 * real_space.scale)) / real_space.scale)


def test_emissivity_is_inert(real_map, real_space):
    # the interface solve fixes the product emissivity * chi, so B cannot see emissivity alone
    j = PARAMETER_NAMES.index("emissivity")
    J = model_jacobian(real_space.nominal, real_map, real_space) * real_space.scale
    assert np.all(np.abs(J[:, j]) < 1e-5 * np.abs(J).max())


def test_noiseless_start_at_truth_stops_immediately(au_run, real_space):
    ds = synthetic_dataset(au_run.model, real_space.nominal, [9.0, 12.0], au_run.melting_point, counts=COUNTS)
    assert len(ds) == 2
    m = ModelMap(au_run.model, ds, counts=COUNTS)
    total, per = residual(real_space.nominal, ds, m)
    assert math.sqrt(total / 2) < 1e-4 * ds.melting_point
    p, report = optimize(real_space.nominal.copy(), ds, m, real_space)
    assert report.stop_reason == "zero residual" and len(report.iterations) == 1
    assert np.array_equal(p, real_space.nominal)
    bumped = FusingDataset(ds.currents, ds.times * np.array([1.0, 1.2]), ds.melting_point)
    assert residual(real_space.nominal, bumped, ModelMap(au_run.model, bumped, counts=COUNTS))[0] > total
