"""Oracle comparisons behind ``bondheat verify`` and the acceptance tests."""

import math

import numpy as np

from .compound import CompoundSolution, HeatKernel, _gauss
from .coupling import fixed_point
from .fd import FDGrid, compare, solve_wire_linearised, solve_wire_nonlinear
from .materials import kirchhoff_inverse
from .spectral import build_basis
from .wire import (CouplingState, ode_coefficients, solve_for_state, wire_temperature)

WIRE_LINEAR_TOL = 5e-3
WIRE_NONLINEAR_TOL = 2e-2
TRACE_TOL = 5e-3
KERNEL_TOL = 2e-2
FAR_FIELD_BAND = (0.0, 10.0)


def _check(name, value, limit, passed, detail=""):
    return {"name": name, "value": float(value), "limit": limit, "passed": bool(passed),
            "detail": detail}


def radiation_state(config, drive, iterations=200, tol=1e-12):
    """Coupling state that makes the linear loss reproduce T^4 radiation to ambient.

    chi is the factor T^3 + T^2 T0 + T T0^2 + T0^3 evaluated at the wire's
    space-time mean temperature, and T_we is that mean rise; both are
    iterated to self-consistency.  This is the state a wire that only
    radiates would settle on, the situation the nonlinear oracle models.
    """
    T0 = config.bc.T_0
    state = CouplingState(0.0, 4 * T0**3)
    for _ in range(iterations):
        sol = solve_for_state(config, drive, state)
        rise = float(kirchhoff_inverse(config.wire, sol.mean_theta(drive.duration)))
        T = T0 + rise
        new = CouplingState(max(rise, 0.0), T**3 + T**2 * T0 + T * T0**2 + T0**3)
        done = (abs(new.chi_w - state.chi_w) <= tol * new.chi_w
                and abs(new.T_we - state.T_we) <= tol * max(new.T_we, 1.0))
        state = new
        if done:
            break
    return state


def wire_linear_gap(config, drive, state, grid=None):
    """Max-norm gap between the series and Crank-Nicolson for the same linear equation."""
    grid = grid or FDGrid(n_y=200, dt=drive.duration / 8000)
    coeffs = ode_coefficients(config.wire, drive, config.constants, state)
    hist = solve_wire_linearised(config, drive, coeffs, grid)
    sol = solve_for_state(config, drive, state)
    return compare(lambda y, t: sol.theta(y, t), hist)


def wire_nonlinear_gap(config, drive, state=None, grid=None):
    """Max-norm gap in temperature rise between the series and the full nonlinear oracle."""
    state = state or radiation_state(config, drive)
    grid = grid or FDGrid(n_y=200, dt=drive.duration / 2000)
    hist = solve_wire_nonlinear(config, drive, grid)
    sol = solve_for_state(config, drive, state)
    T0 = config.bc.T_0
    rise_hist = hist.__class__(hist.t, hist.y, hist.values - T0, "T", hist.energy_residual)
    report = compare(lambda y, t: wire_temperature(sol, y, t) - T0, rise_hist)
    mid = len(hist.y) // 2
    report["midpoint_series_K"] = float(wire_temperature(sol, hist.y[mid], drive.duration))
    report["midpoint_oracle_K"] = float(hist.values[-1, mid])
    report["energy_residual_max"] = float(np.max(hist.energy_residual))
    report["state"] = {"T_we": state.T_we, "chi_w": state.chi_w}
    return report


def wire_suite(config, drive, state=None):
    if state is None:
        state = fixed_point(config, drive).state
    lin = wire_linear_gap(config, drive, state)
    non = wire_nonlinear_gap(config, drive)
    return [
        _check("wire series vs linearised oracle (max-norm, relative)", lin["max_rel"],
               WIRE_LINEAR_TOL, lin["max_rel"] < WIRE_LINEAR_TOL),
        _check("wire series vs nonlinear oracle (max-norm, relative)", non["max_rel"],
               WIRE_NONLINEAR_TOL, non["max_rel"] < WIRE_NONLINEAR_TOL,
               f"mid-point {non['midpoint_series_K']:.2f} K vs {non['midpoint_oracle_K']:.2f} K"),
    ]


def trace_errors(solution, t, n=48):
    """Relative L2 errors of the chip-plane and die-plane traces at time t.

    Sampled at Gauss nodes, which stay off the chip/die corner edge where
    the two prescribed rises disagree.
    """
    M = solution.modes
    bc = solution.bc
    xs = _gauss(-M.W / 2, M.W / 2, n)[0]
    zs = _gauss(-M.H / 2, M.H / 2, n)[0]
    ys = _gauss(0, M.L, n)[0]
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    chip = solution.rise(X, np.zeros_like(X), Z, t)
    a_ch = bc.T_ch - bc.T_0
    X2, Y2 = np.meshgrid(xs, ys, indexing="ij")
    die = solution.rise(X2, Y2, np.full_like(X2, -M.H / 2), t)
    a_d = bc.T_d - bc.T_0
    e_ch = math.sqrt(np.mean((chip - a_ch) ** 2)) / abs(a_ch) if a_ch else math.sqrt(np.mean(chip**2))
    e_d = math.sqrt(np.mean((die - a_d) ** 2)) / abs(a_d) if a_d else math.sqrt(np.mean(die**2))
    return e_ch, e_d


def far_field_rise(solution, t, n=8):
    """Median rise on a grid away from the wire, the chip plane and the die plane."""
    M = solution.modes
    xs = np.linspace(M.W / 8, M.W / 2, n)
    ys = np.linspace(M.L / 4, M.L, n)
    zs = np.linspace(-M.H / 4, M.H / 2, n)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    return float(np.median(solution.rise(X, Y, Z, t)))


def kernel_volume_integral(config, t=1e-5, y_src=None, n=(64, 96, 64)):
    """rho c times the volume integral of the heat kernel, by tensor Gauss quadrature.

    Before any heat reaches a boundary this is the unit impulse energy.
    """
    comp, L = config.compound, config.wire.length
    basis = build_basis(config.wire, comp, config.bc, *config.counts)
    k = HeatKernel(comp, basis, L, bc=config.bc)
    W, H = comp.width, comp.height
    y_src = L / 2 if y_src is None else y_src
    xg, wx = _gauss(-W / 2, W / 2, n[0])
    yg, wy = _gauss(0, L, n[1])
    zg, wz = _gauss(-H / 2, H / 2, n[2])
    G = k(*np.meshgrid(xg, yg, zg, indexing="ij"), t, y_src)
    return float(np.einsum("ijk,i,j,k->", G, wx, wy, wz)) * comp.heat_capacity


def compound_suite(config, t=0.5):
    nx, ny, nz, nk = config.counts
    basis = build_basis(config.wire, config.compound, config.bc, nx, ny, nz, nk)
    sol = CompoundSolution(config.compound, config.bc, basis, config.wire.length)
    e_ch, e_d = trace_errors(sol, t)
    far = far_field_rise(sol, t)
    ratio = kernel_volume_integral(config)
    return [
        _check("chip-plane trace (relative L2)", e_ch, TRACE_TOL, e_ch < TRACE_TOL),
        _check("die-plane trace (relative L2)", e_d, TRACE_TOL, e_d < TRACE_TOL),
        _check("far-field median rise (K)", far, list(FAR_FIELD_BAND),
               FAR_FIELD_BAND[0] < far < FAR_FIELD_BAND[1]),
        _check("kernel volume integral x rho c at 10 us", ratio, KERNEL_TOL, abs(ratio - 1) < KERNEL_TOL),
    ]


def run(config, drive, suite="all"):
    checks = []
    if suite in ("wire", "all"):
        checks += wire_suite(config, drive)
    if suite in ("compound", "all"):
        checks += compound_suite(config, drive.duration)
    return {"suite": suite, "checks": checks, "passed": all(c["passed"] for c in checks)}
