"""Linearised, Kirchhoff-transformed wire temperature series.

With the radiation term linearised through an effective transfer coefficient
``chi`` and the transformed temperature ``theta``, the wire obeys

    rho c d(theta)/dt = k0 theta'' - F theta + G + H/2,

with ``theta(0) = theta_ch`` and ``theta(L) = theta_ld``.  The solution is a
steady profile plus a sine series whose modes decay at
``(k0 lam_k**2 + F) / (rho c)``.
"""

from dataclasses import dataclass
import functools
import math

import numpy as np

from .materials import Drive, kirchhoff_forward, kirchhoff_inverse


@dataclass(frozen=True)
class CouplingState:
    """Effective wire temperature rise (K) and effective transfer coefficient (K^3)."""

    T_we: float
    chi_w: float

    def __post_init__(self):
        if self.T_we < 0:
            raise ValueError("T_we must be >= 0")
        if self.chi_w < 0:
            raise ValueError("chi_w must be >= 0")


def effective_temperature_bound(wire, drive, constants, chi_w):
    """Upper limit on T_we that keeps the H coefficient positive.

    Infinite when the bound does not apply (no current, chi = 0, or a
    temperature-independent conductivity or resistivity).
    """
    if drive.current <= 0 or chi_w <= 0 or wire.alpha_kappa == 0 or wire.alpha_rho <= 0:
        return math.inf
    num = 2.0 * drive.current**2 * wire.rho_e0 * wire.alpha_rho
    den = wire.emissivity * constants.sigma * chi_w * wire.area * wire.perimeter * abs(wire.alpha_kappa)
    return num / den


def chi_limit(wire, drive, constants, T_we):
    """Largest chi for which ``T_we`` still satisfies the feasibility bound."""
    if T_we <= 0:
        return math.inf
    b = effective_temperature_bound(wire, drive, constants, 1.0)
    return b / T_we


@dataclass(frozen=True)
class WireODECoefficients:
    G: float  # Joule source, W/m^3
    F: float  # linearised loss, W/(m^3 K)
    H: float  # effective-temperature correction, W/m^3


def ode_coefficients(wire, drive, constants, state):
    A, C = wire.area, wire.perimeter
    G = drive.current**2 * wire.rho_e0 / A**2
    F = wire.emissivity * constants.sigma * state.chi_w * C / A
    H = 2.0 * G * wire.alpha_rho * state.T_we + F * wire.alpha_kappa * state.T_we**2
    return WireODECoefficients(G, F, H)


def _sinh_ratio(s, a, total):
    """sinh(s*a) / sinh(s*total) for 0 <= a <= total, overflow and s -> 0 safe."""
    a = np.asarray(a, dtype=float)
    if s * total < 1e-12:
        return a / total
    return np.exp(-s * (total - a)) * np.expm1(-2 * s * a) / np.expm1(-2 * s * total)


def _bump(s, y, L, kappa0):
    """Particular steady solution for a unit source: zero at both ends.

    Equals (1 - [sinh(s(L-y)) + sinh(sy)] / sinh(sL)) / (k0 s^2), written as
    2 sinh(s(L-y)/2) sinh(sy/2) / (k0 s^2 cosh(sL/2)) to avoid cancellation.
    """
    y = np.asarray(y, dtype=float)
    if s * L < 1e-6:
        return y * (L - y) / (2.0 * kappa0)
    A, B = 0.5 * s * (L - y), 0.5 * s * y
    return (-np.expm1(-2 * A)) * (-np.expm1(-2 * B)) / (1 + np.exp(-2 * (A + B))) / (kappa0 * s * s)


def _bump_mean(s, L, kappa0):
    """Mean over [0, L] of :func:`_bump`."""
    x = 0.5 * s * L
    if x < 1e-2:
        x2 = x * x
        return L**2 / (4 * kappa0) * (1 / 3 - 2 * x2 / 15 + 17 * x2**2 / 315 - 62 * x2**3 / 2835)
    return (1.0 - math.tanh(x) / x) / (kappa0 * s * s)


@dataclass(frozen=True, eq=False)
class WireSolution:
    """Transformed wire temperature theta(y, t) for one drive and coupling state."""

    wire: object
    bc: object
    coeffs: WireODECoefficients
    theta_0: float  # transformed chip-end rise
    theta_L: float  # transformed lead-end rise
    s: float  # sqrt(F / k0), 1/m
    lam: np.ndarray  # lam_k = k pi / L
    rates: np.ndarray  # decay rates, 1/s
    C_t: np.ndarray  # transient amplitudes

    @property
    def source(self):
        return self.coeffs.G + 0.5 * self.coeffs.H

    @property
    def constant_term(self):
        """(H/2 + G) / F, the uniform part of the steady profile (inf when F = 0)."""
        return self.source / self.coeffs.F if self.coeffs.F > 0 else math.inf

    @property
    def C_s1(self):
        return self.theta_0 - self.constant_term

    @property
    def C_s2(self):
        sL = self.s * self.wire.length
        return (self.theta_L - self.constant_term - self.C_s1 * math.cosh(sL)) / math.sinh(sL)

    def steady(self, y):
        L = self.wire.length
        y = np.asarray(y, dtype=float)
        return (self.theta_0 * _sinh_ratio(self.s, L - y, L)
                + self.theta_L * _sinh_ratio(self.s, y, L)
                + self.source * _bump(self.s, y, L, self.wire.kappa0))

    def steady_mean(self):
        L, s = self.wire.length, self.s
        end_weight = 0.5 if s * L < 1e-12 else math.tanh(0.5 * s * L) / (s * L)
        return (self.theta_0 + self.theta_L) * end_weight + self.source * _bump_mean(s, L, self.wire.kappa0)

    def transient(self, y, t):
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        decay = np.exp(-np.multiply.outer(t, self.rates))
        modes = np.sin(np.multiply.outer(y, self.lam))
        if t.ndim == 0:
            return modes @ (self.C_t * decay)
        if y.ndim == 0:
            return decay @ (self.C_t * modes)
        return (decay * self.C_t) @ modes.T

    def theta(self, y, t):
        """Transformed rise; y and t broadcast as (len(t), len(y)) when both are arrays."""
        return self.transient(y, t) + self.steady(y)

    def mean_theta(self, t_end):
        """Closed-form average of theta over [0, L] x [0, t_end]."""
        k = np.arange(1, len(self.lam) + 1)
        space = (1 - (-1.0) ** k) / (k * np.pi)  # mean of sin(k pi y / L) over [0, L]
        rt = self.rates * t_end
        time = -np.expm1(-rt) / rt
        return float(np.sum(self.C_t * space * time)) + self.steady_mean()


def initial_theta(wire, bc, profile, y):
    """Transformed initial rise theta(y, 0) for a named profile or a callable rise(y)."""
    y = np.asarray(y, dtype=float)
    if callable(profile):
        rise = profile(y)
    elif profile == "linear":
        r0, rL = bc.T_ch - bc.T_0, bc.T_ld - bc.T_0
        rise = r0 + (rL - r0) * y / wire.length
    elif profile == "ambient":
        rise = np.zeros_like(y)
    else:
        raise ValueError(f"unknown initial profile {profile!r}")
    return kirchhoff_forward(wire, rise)


def solve_steady(wire, bc, coeffs):
    """Endpoint data and decay constant of the steady profile.

    F <= 0 falls back to the radiationless quadratic profile.
    """
    theta_0 = kirchhoff_forward(wire, bc.T_ch - bc.T_0)
    theta_L = kirchhoff_forward(wire, bc.T_ld - bc.T_0)
    s = math.sqrt(coeffs.F / wire.kappa0) if coeffs.F > 0 else 0.0
    return theta_0, theta_L, s


def solve_wire(wire, bc, coeffs, n_k=60, profile="linear", quadrature_points=128):
    """Assemble the full series for one set of ODE coefficients."""
    theta_0, theta_L, s = solve_steady(wire, bc, coeffs)
    L = wire.length
    lam = np.arange(1, n_k + 1) * np.pi / L
    rates = (wire.kappa0 * lam**2 + max(coeffs.F, 0.0)) / wire.heat_capacity
    partial = WireSolution(wire, bc, coeffs, theta_0, theta_L, s, lam, rates, np.zeros(n_k))
    C_t = solve_transient(partial, profile, quadrature_points)
    return WireSolution(wire, bc, coeffs, theta_0, theta_L, s, lam, rates, C_t)


@functools.lru_cache(maxsize=8)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def solve_transient(solution, profile="linear", quadrature_points=128):
    """Sine coefficients of theta(y, 0) - steady(y) by Gauss-Legendre projection."""
    L = solution.wire.length
    xg, wg = _legendre(quadrature_points)
    y = 0.5 * L * (xg + 1)
    w = 0.5 * L * wg
    diff = initial_theta(solution.wire, solution.bc, profile, y) - solution.steady(y)
    return (2.0 / L) * (np.sin(np.outer(solution.lam, y)) * diff) @ w


def solve_for_state(config, drive, state, profile=None):
    coeffs = ode_coefficients(config.wire, drive, config.constants, state)
    return solve_wire(config.wire, config.bc, coeffs, n_k=config.counts[3],
                      profile=config.initial_profile if profile is None else profile,
                      quadrature_points=config.quadrature_points)


def wire_temperature(solution, y, t):
    """Absolute wire temperature (K) at position y and time t."""
    return solution.bc.T_0 + kirchhoff_inverse(solution.wire, solution.theta(y, t))


def midpoint_temperature(config, drive, state):
    """Model map B_w: wire mid-point temperature at the end of the pulse."""
    sol = solve_for_state(config, drive, state)
    return float(wire_temperature(sol, 0.5 * config.wire.length, drive.duration))


class NoFuse(float):
    """Marker returned by :func:`time_to_fuse` when T_fuse is never reached."""


NO_FUSE = NoFuse("inf")


def time_to_fuse(config, state, current, T_fuse, t_max, rtol=1e-10):
    """Earliest time at which the mid-point reaches ``T_fuse`` under a fixed state.

    Returns :data:`NO_FUSE` when the temperature stays below ``T_fuse`` up to
    ``t_max``.  The drive duration only selects the evaluation time here, so
    one solution is reused for every trial time.
    """
    if T_fuse <= config.bc.T_0:
        raise ValueError("T_fuse must exceed the ambient temperature")
    if current <= 0:
        return NO_FUSE
    sol = solve_for_state(config, Drive(current, t_max), state)
    ymid = 0.5 * config.wire.length
    theta_f = kirchhoff_forward(config.wire, T_fuse - config.bc.T_0)
    # compare in transformed space: monotone map, and no inversion failures
    f = lambda t: float(sol.theta(ymid, t)) - theta_f
    if f(t_max) < 0:
        return NO_FUSE
    grid = np.geomspace(t_max * 1e-9, t_max, 200)
    vals = sol.theta(ymid, grid) - theta_f
    idx = int(np.argmax(vals >= 0))
    lo = 0.0 if idx == 0 else grid[idx - 1]
    hi = grid[idx]
    if f(lo) >= 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * hi:
            break
    return hi
