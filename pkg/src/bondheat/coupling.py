"""Fixed point for the auxiliary pair (effective wire temperature, chi).

The interface condition equates the time-and-length integral of the compound
rise just outside the wire with that of the wire rise itself:

    int_0^tp int_0^L T_m(x0, y, z0, t) dy dt = int_0^tp int_0^L T_w(y, t) dy dt

The compound side is evaluated on the wire surface, at the offset
(x0, z0) = (r_w, r_w) / sqrt(2), because the line-source kernel diverges
logarithmically on the wire axis.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np
from scipy.optimize import brentq

from .compound import CompoundSolution, HeatKernel, line_source
from .errors import NoRoot
from .materials import Drive, kirchhoff_inverse
from .spectral import build_basis
from .wire import CouplingState, chi_limit, effective_temperature_bound, solve_for_state

CHI_BRACKET = (1e3, 1e12)
CHI_CEILING = 1e18


def mean_wire_rise(solution, t_end):
    """Average wire temperature rise over [0, L] x [0, t_end]."""
    return float(kirchhoff_inverse(solution.wire, solution.mean_theta(t_end)))


def _search_rise(wire, theta):
    """Inverse Kirchhoff map continued past the vertex with unit slope.

    Only used while bracketing chi: it keeps the interface residual finite
    and monotone for nearly adiabatic trial values.  Accepted iterates go
    through the strict inverse.
    """
    a = wire.alpha_kappa
    if a < 0 and theta > -0.5 / a:
        return -1.0 / a + (theta + 0.5 / a)
    return float(kirchhoff_inverse(wire, theta))


def initial_effective_temperature(config, drive):
    """Average rise of the wire alone: no radiation, no effective-temperature term.

    At high currents this transformed average can pass the vertex of the
    Kirchhoff parabola; the start is then clamped to the vertex rise.
    """
    sol = solve_for_state(config, drive, CouplingState(0.0, 0.0))
    a = config.wire.alpha_kappa
    theta = sol.mean_theta(drive.duration)
    if a < 0:
        theta = min(theta, -0.5 / a)
    return max(float(kirchhoff_inverse(config.wire, theta)), 0.0)


class InterfaceBalance:
    """Both sides of the interface condition for one configuration and drive.

    Everything that does not depend on the coupling state (compound
    transient and steady parts, kernel weights at the offset point) is
    computed once.
    """

    def __init__(self, config, drive, offset_scale=1.0, basis=None, compound_solution=None):
        self.config, self.drive = config, drive
        nx, ny, nz, nk = config.counts
        self.basis = basis if basis is not None else build_basis(
            config.wire, config.compound, config.bc, nx, ny, nz, nk)
        self.compound = compound_solution if compound_solution is not None else CompoundSolution(
            config.compound, config.bc, self.basis, config.wire.length)
        r = offset_scale * config.wire.diameter / 2 / math.sqrt(2)
        self.x0, self.z0 = r, r
        self.kernel = HeatKernel(config.compound, self.basis, config.wire.length,
                                 modes=self.compound.modes)
        self.weights = self.kernel.line_integral_factors(self.x0, self.z0)
        self.lhs_fixed = self.compound.line_integral(self.x0, self.z0, drive.duration)
        self.scale = config.wire.length * drive.duration

    def wire(self, state):
        return solve_for_state(self.config, self.drive, state)

    def sides(self, state, strict=True):
        """(lhs, rhs) of the interface condition, and the wire solution used."""
        sol = self.wire(state)
        src = line_source(sol, state, self.config.constants, self.compound.modes)
        lhs = self.lhs_fixed + self.kernel.convolve_line_integral(src, self.weights, self.drive.duration)
        theta = sol.mean_theta(self.drive.duration)
        rise = float(kirchhoff_inverse(self.config.wire, theta)) if strict else _search_rise(
            self.config.wire, theta)
        return lhs, self.scale * rise, sol

    def g(self, T_we, chi):
        lhs, rhs, _ = self.sides(CouplingState(T_we, chi), strict=False)
        return lhs - rhs

    def relative_residual(self, state):
        lhs, rhs, _ = self.sides(state)
        return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def chi_from_interface(balance, T_we, guess=None, bracket=CHI_BRACKET, ceiling=CHI_CEILING):
    """Solve the interface condition for chi at fixed T_we.

    Brent's method (secant / inverse quadratic steps safeguarded by
    bisection) runs on log(chi).  With a ``guess`` from a previous solve the
    bracket is grown geometrically around it; otherwise the search starts
    from ``bracket``.  When g does not change sign the upper end is widened
    by decades up to ``ceiling``.  Chi never exceeds the value at which
    T_we would violate the feasibility bound, since beyond it the source
    term changes sign and the pair is meaningless.
    """
    cfg, drive = balance.config, balance.drive
    T0 = cfg.bc.T_0
    limit = chi_limit(cfg.wire, drive, cfg.constants, T_we) * (1 - 1e-9)
    top = math.log(min(ceiling, limit))
    f = lambda u: balance.g(T_we, math.exp(u))
    lo = math.log(bracket[0])
    hi = min(math.log(bracket[1]), top)
    if hi <= lo:
        raise NoRoot(f"feasible chi range is empty for T_we={T_we:g} K", math.nan, math.nan)
    if guess is not None and bracket[0] < guess < math.exp(top):
        u = math.log(guess)
        step = math.log(1.05)
        a_, b_ = max(u - step, lo), min(u + step, top)
        fa, fb = f(a_), f(b_)
        while fa * fb > 0 and step < 8:
            step *= 2
            if abs(fa) < abs(fb) and a_ > lo:
                a_ = max(u - step, lo)
                fa = f(a_)
            elif b_ < top:
                b_ = min(u + step, top)
                fb = f(b_)
            else:
                break
        if fa * fb <= 0:
            if fa == 0:
                return math.exp(a_)
            return math.exp(brentq(f, a_, b_, xtol=1e-13, rtol=1e-13, maxiter=200))
    guess = 4 * T0**3 if guess is None else guess
    g_lo, g_hi = f(lo), f(hi)
    if g_lo == 0 and g_hi == 0:
        return guess  # no heat exchange to balance
    while g_lo * g_hi > 0 and hi < top:
        lo, g_lo = hi, g_hi
        hi = min(hi + math.log(10.0), top)
        g_hi = f(hi)
    if g_lo * g_hi > 0:
        raise NoRoot(f"interface condition has no root for chi in "
                     f"[{bracket[0]:g}, {math.exp(top):g}] at T_we={T_we:g} K", g_lo, g_hi)
    if g_lo == 0:
        return math.exp(lo)
    return math.exp(brentq(f, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=200))


@dataclass
class CouplingResult:
    state: CouplingState
    iterations: int
    residual_history: list
    converged: bool = True
    trace: list = field(default_factory=list)  # (iteration, T_we, chi_w, residual)

    @property
    def not_converged(self):
        return not self.converged


def _feasible_chi(bal, T_we, T_prev, chi):
    """Chi for T_we, pulling T_we toward T_prev until a feasible root exists."""
    last = None
    for _ in range(60):
        try:
            return T_we, chi_from_interface(bal, T_we, guess=chi)
        except NoRoot as exc:
            last = exc
            if T_we <= 0:
                break
            T_we = T_prev + 0.5 * (T_we - T_prev) if T_prev < T_we else 0.5 * T_we
    raise last


def fixed_point(config, drive, tol=1e-4, max_iter=20, start=None, balance=None, offset_scale=1.0):
    """Alternate the wire average and the chi solve until the pair settles.

    Each new T_we is pulled back toward the previous one by halving until it
    satisfies the feasibility bound for the current chi; a violating iterate
    is never accepted.  The same pull-back applies when T_we is so large
    that no feasible chi balances the interface.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    bal = balance if balance is not None else InterfaceBalance(config, drive, offset_scale)
    if start is None:
        T_we, chi = initial_effective_temperature(config, drive), None
    else:
        T_we, chi = start.T_we, start.chi_w
    T_prev = 0.0
    history, trace = [], []
    best = None
    for it in range(1, max_iter + 1):
        T_we, chi_new = _feasible_chi(bal, T_we, T_prev, chi)
        sol = bal.wire(CouplingState(T_we, chi_new))
        target = max(mean_wire_rise(sol, drive.duration), 0.0)
        bound = effective_temperature_bound(config.wire, drive, config.constants, chi_new)
        T_new = target
        for _ in range(60):
            if T_new < bound:
                break
            T_new = T_we + 0.5 * (T_new - T_we)
        else:
            T_new = min(T_we, 0.5 * bound)
        state = CouplingState(T_new, chi_new)
        res = bal.relative_residual(state) if drive.current > 0 or T_new > 0 else 0.0
        history.append(res)
        trace.append((it, T_new, chi_new, res))
        if best is None or res < best[1]:
            best = (state, res)
        d_T = abs(T_new - T_we) / max(abs(T_new), 1e-12) if (T_new or T_we) else 0.0
        d_chi = 0.0 if chi is None and it > 1 else (
            abs(chi_new - chi) / chi_new if chi is not None else math.inf)
        T_prev, T_we, chi = T_we, T_new, chi_new
        if res < tol and d_T < tol and (d_chi < tol or (T_new == 0 and res == 0)):
            return CouplingResult(state, it, history, True, trace)
    return CouplingResult(best[0], max_iter, history, False, trace)


def write_trace(result, path):
    """Convergence trace as CSV: iteration, T_we, chi_w, residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "T_we_K", "chi_w_K3", "residual"])
        for it, T, chi, res in result.trace:
            w.writerow([it, repr(float(T)), repr(float(chi)), repr(float(res))])
