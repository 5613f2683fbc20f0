"""Finite-difference reference solvers for the wire and (coarsely) the compound.

These share no code with the series solvers beyond the material laws, so
agreement between the two is an independent check.
"""

from dataclasses import dataclass
import csv

import numpy as np
from scipy.linalg import solve_banded

from .errors import NewtonDivergence
from .materials import kirchhoff_forward, kirchhoff_inverse


@dataclass(frozen=True)
class FDGrid:
    """Uniform wire grid of ``n_y`` intervals and time step ``dt``.

    ``startup`` backward-Euler half steps precede Crank-Nicolson to damp the
    stiff modes of a non-smooth start.
    """

    n_y: int = 200
    dt: float = None
    startup: int = 2

    def step(self, duration):
        dt = duration / 400 if self.dt is None else self.dt
        if dt > duration / 200 * (1 + 1e-12):
            raise ValueError("time step must not exceed t_p / 200")
        return dt


@dataclass(frozen=True, eq=False)
class FDHistory:
    """Nodal values ``values[i, j]`` at ``t[i]``, ``y[j]``; ``kind`` is 'theta' or 'T'."""

    t: np.ndarray
    y: np.ndarray
    values: np.ndarray
    kind: str
    energy_residual: np.ndarray = None

    def at(self, t):
        i = int(np.argmin(np.abs(self.t - t)))
        return self.values[i]


def _times(duration, dt, startup):
    n = int(round(duration / dt))
    steps = [dt / 2] * startup + [dt] * (n - startup // 2)
    t = np.concatenate([[0.0], np.cumsum(steps)])
    return t, steps


def _tridiag_lap(n, h):
    """Banded (3, n) second-difference matrix for interior unknowns."""
    ab = np.zeros((3, n))
    ab[0, 1:] = 1 / h**2
    ab[1, :] = -2 / h**2
    ab[2, :-1] = 1 / h**2
    return ab


def _initial_rise(wire, bc, profile, y):
    if callable(profile):
        return np.asarray(profile(y), dtype=float)
    r0, rL = bc.T_ch - bc.T_0, bc.T_ld - bc.T_0
    if profile == "linear":
        return r0 + (rL - r0) * y / wire.length
    if profile == "ambient":
        out = np.zeros_like(y)
        out[0], out[-1] = r0, rL
        return out
    raise ValueError(f"unknown initial profile {profile!r}")


def solve_wire_linearised(config, drive, coeffs, grid=FDGrid(), profile=None):
    """Crank-Nicolson solution of rho c theta_t = k0 theta'' - F theta + G + H/2."""
    wire, bc = config.wire, config.bc
    profile = config.initial_profile if profile is None else profile
    N = grid.n_y
    y = np.linspace(0, wire.length, N + 1)
    h = y[1] - y[0]
    th = kirchhoff_forward(wire, _initial_rise(wire, bc, profile, y))
    th0, thL = th[0], th[-1]
    q = coeffs.G + 0.5 * coeffs.H
    rc, k0, F = wire.heat_capacity, wire.kappa0, coeffs.F
    lap = _tridiag_lap(N - 1, h)
    bvec = np.zeros(N - 1)
    bvec[0], bvec[-1] = th0 / h**2, thL / h**2

    def apply(u):
        out = -2 * u
        out[1:] += u[:-1]
        out[:-1] += u[1:]
        return k0 * (out / h**2 + bvec) - F * u + q

    t, steps = _times(drive.duration, grid.step(drive.duration), grid.startup)
    out = [th.copy()]
    u = th[1:-1].copy()
    for k, dt in enumerate(steps):
        w = 1.0 if k < grid.startup else 0.5  # implicit weight
        ab = -w * dt * k0 * lap
        ab[1] += rc + w * dt * F
        rhs = rc * u + dt * ((1 - w) * apply(u) + w * (k0 * bvec + q))
        u = solve_banded((1, 1), ab, rhs)
        out.append(np.concatenate([[th0], u, [thL]]))
    return FDHistory(t, y, np.array(out), "theta")


def solve_wire_nonlinear(config, drive, grid=FDGrid(), profile=None, conduction=True,
                         radiation=True, tol=1e-10, max_newton=20):
    """Crank-Nicolson + Newton for the full wire equation.

    Temperature-dependent conductivity and resistivity, true T^4 radiation to
    ambient, conservative face conductivities.  ``energy_residual`` holds,
    per step, |stored-energy change - (Joule - radiation + end fluxes) dt|
    divided by the Joule input of the step.
    """
    wire, bc, c = config.wire, config.bc, config.constants
    profile = config.initial_profile if profile is None else profile
    N = grid.n_y
    y = np.linspace(0, wire.length, N + 1)
    h = y[1] - y[0]
    A, C = wire.area, wire.perimeter
    rc, k0, ak = wire.heat_capacity, wire.kappa0, wire.alpha_kappa
    T0 = bc.T_0
    joule0 = drive.current**2 * wire.rho_e0 / A**2
    ar = wire.alpha_rho
    rad = wire.emissivity * c.sigma * C / A if radiation else 0.0
    kc = 1.0 if conduction else 0.0
    u_full = _initial_rise(wire, bc, profile, y)
    u0b, uLb = u_full[0], u_full[-1]

    def parts(u):
        v = np.concatenate([[u0b], u, [uLb]])
        kf = kc * k0 * (1 + ak * 0.5 * (v[1:] + v[:-1]))
        flux = kf * np.diff(v) / h  # conductive flux toward +y... gradient times k
        cond = np.diff(flux) / h
        joule = joule0 * (1 + ar * u)
        radn = rad * ((T0 + u) ** 4 - T0**4)
        return cond, joule, radn, flux, v, kf

    def op(u):
        cond, joule, radn, _, _, _ = parts(u)
        return cond + joule - radn

    def jac(u):
        _, _, _, _, v, kf = parts(u)
        dv = np.diff(v)
        dk = kc * k0 * ak * 0.5
        # d(flux_{i+1/2})/d v_i and d v_{i+1}
        a_lo = (-kf + dk * dv) / h
        a_hi = (kf + dk * dv) / h
        # cond_i = (flux_{i+1/2} - flux_{i-1/2}) / h, interior node i = 1..N-1
        diag = (a_lo[1:] - a_hi[:-1]) / h
        upper = a_hi[1:-1] / h
        lower = -a_lo[1:-1] / h
        diag = diag + joule0 * ar - 4 * rad * (T0 + u) ** 3
        return lower, diag, upper

    t, steps = _times(drive.duration, grid.step(drive.duration), grid.startup)
    u = u_full[1:-1].copy()
    out = [T0 + u_full]
    audit = []
    for k, dt in enumerate(steps):
        w = 1.0 if k < grid.startup else 0.5
        f_old = op(u)
        cond_o, joule_o, rad_o, flux_o, _, _ = parts(u)
        un = u.copy()
        for it in range(max_newton):
            R = rc * (un - u) - dt * (w * op(un) + (1 - w) * f_old)
            lo, di, up = jac(un)
            ab = np.zeros((3, len(u)))
            ab[0, 1:] = -dt * w * up
            ab[1] = rc - dt * w * di
            ab[2, :-1] = -dt * w * lo
            delta = solve_banded((1, 1), ab, -R)
            un = un + delta
            if np.max(np.abs(delta)) <= tol * max(1.0, np.max(np.abs(un))):
                break
        else:
            raise NewtonDivergence(f"Newton did not converge at t={t[k + 1]:g} s",
                                   float(np.max(np.abs(R))))
        cond_n, joule_n, rad_n, flux_n, _, _ = parts(un)
        mix = lambda a, b: w * b + (1 - w) * a
        stored = rc * A * h * np.sum(un - u)
        J = dt * A * h * np.sum(mix(joule_o, joule_n))
        Rd = dt * A * h * np.sum(mix(rad_o, rad_n))
        ends = dt * A * (mix(flux_o[-1], flux_n[-1]) - mix(flux_o[0], flux_n[0]))
        audit.append(abs(stored - (J - Rd + ends)) / max(abs(J), 1e-300))
        u = un
        out.append(T0 + np.concatenate([[u0b], u, [uLb]]))
    return FDHistory(t, y, np.array(out), "T", np.array(audit))


def compare(series_eval, history, skip_initial=True):
    """Error metrics of ``series_eval(y, t)`` against an FD history.

    Errors are relative to the largest magnitude of the oracle field
    (rises for 'theta' histories, rises above the first value's ambient for
    'T' histories when ``series_eval`` returns rises too).
    """
    start = 1 if skip_initial else 0
    per_time, l2 = [], []
    peak = 0.0
    for i in range(start, len(history.t)):
        ref = history.values[i]
        got = np.asarray(series_eval(history.y, history.t[i]), dtype=float)
        per_time.append(float(np.max(np.abs(got - ref))))
        l2.append(float(np.sqrt(np.mean((got - ref) ** 2))))
        peak = max(peak, float(np.max(np.abs(ref))))
    peak = peak or 1.0
    return {
        "max_abs": max(per_time),
        "max_rel": max(per_time) / peak,
        "l2_rel": max(l2) / peak,
        "per_time_rel": [e / peak for e in per_time],
        "times": [float(x) for x in history.t[start:]],
    }


def write_history(history, path, ambient=0.0):
    """CSV rows t, y, T (``ambient`` is added to transformed histories)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "y_m", "T_K"])
        for i, t in enumerate(history.t):
            for j, yv in enumerate(history.y):
                w.writerow([repr(float(t)), repr(float(yv)), repr(float(history.values[i, j] + ambient))])


def theta_to_temperature(wire, history, ambient):
    return FDHistory(history.t, history.y, ambient + kirchhoff_inverse(wire, history.values), "T")


def solve_compound_explicit(compound, bc, length, t_end, n=(24, 32, 24), line_power=None,
                            initial_rise=0.0):
    """Coarse explicit solver on the half block x >= 0 (mirror symmetry at x = 0).

    Chip (y = 0) and die (z = -H/2) planes carry fixed rises, y = L is
    adiabatic, the top and side walls are convective.  ``line_power(y, t)``
    (W/m) is deposited along the wire axis x = 0, z = 0.  Returns
    ``(x, y, z, rise)`` with ``rise`` shaped (nx+1, ny+1, nz+1); ``n[2]`` must
    be even so that a node row lies on the axis.
    """
    nx, ny, nz = n
    if nz % 2 or max(n) > 40:
        raise ValueError("need an even z count and at most 40 intervals per axis")
    W, H = compound.width, compound.height
    x = np.linspace(0, W / 2, nx + 1)
    y = np.linspace(0, length, ny + 1)
    z = np.linspace(-H / 2, H / 2, nz + 1)
    hx, hy, hz = x[1], y[1], z[1] - z[0]
    a = compound.diffusivity
    dt = 0.9 / (2 * a * (1 / hx**2 + 1 / hy**2 + 1 / hz**2))
    steps = max(1, int(np.ceil(t_end / dt)))
    dt = t_end / steps
    k, hc = compound.kappa, bc.h_c
    a_ch, a_d = bc.T_ch - bc.T_0, bc.T_d - bc.T_0
    u = np.full((nx + 1, ny + 1, nz + 1), float(initial_rise))
    zc = nz // 2

    def fix(u):
        u[:, 0, :] = a_ch
        u[:, :, 0] = a_d

    fix(u)
    for s in range(steps):
        p = np.pad(u, 1, mode="edge")
        # ghosts: mirror at x = 0 and y = L, Robin at x = W/2 and z = H/2
        p[0] = p[2]
        p[-1, 1:-1, 1:-1] = p[-3, 1:-1, 1:-1] - 2 * hx * hc / k * u[-1]
        p[:, -1] = p[:, -3]
        p[1:-1, 1:-1, -1] = p[1:-1, 1:-1, -3] - 2 * hz * hc / k * u[:, :, -1]
        lap = ((p[2:, 1:-1, 1:-1] - 2 * u + p[:-2, 1:-1, 1:-1]) / hx**2
               + (p[1:-1, 2:, 1:-1] - 2 * u + p[1:-1, :-2, 1:-1]) / hy**2
               + (p[1:-1, 1:-1, 2:] - 2 * u + p[1:-1, 1:-1, :-2]) / hz**2)
        du = a * lap
        if line_power is not None:
            # half-width cell at the mirror plane carries half the power
            du[0, :, zc] += line_power(y, s * dt) / (hx * hz) / compound.heat_capacity
        u = u + dt * du
        fix(u)
    return x, y, z, u
