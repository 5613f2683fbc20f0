"""Compound temperature: steady chip/die components, transient, heat kernel.

Coordinates follow the package block: ``x`` in [-W/2, W/2] (the wire lies on
the symmetry plane x = 0), ``y`` in [0, L] from chip to lead, ``z`` in
[-H/2, H/2] from die attach to the top wall.  Internally ``zeta = z + H/2``.

Mode families (all with homogeneous boundary conditions):

    X_n(x) = cos(lx_n x)              Robin on x = +-W/2
    Y_m(y) = sin(ly_m y)              Dirichlet y = 0, Neumann y = L
    Z_p(zeta) = sin(lz_p zeta)        Dirichlet zeta = 0, Robin zeta = H

Each one-dimensional factor that is not a trig mode is stored as a sum of
decaying exponentials, ``sum_j A_j exp(c_j (u - u0_j))``, so that evaluation
never overflows and projections onto trig modes are closed-form.
"""

from dataclasses import dataclass
import functools
import math

import numpy as np

from .errors import OutOfDomain
from .spectral import robin_cot_roots, robin_tan_roots

GAUSS_POINTS = 256


@functools.lru_cache(maxsize=8)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _gauss(a, b, n=GAUSS_POINTS):
    xg, wg = _legendre(n)
    return 0.5 * (b - a) * (xg + 1) + a, 0.5 * (b - a) * wg


def _contract(X, Y, Z, coef, chunk=4096):
    """sum_nmp X[..., n] Y[..., m] Z[..., p] coef[n, m, p], chunked through BLAS."""
    shape = X.shape[:-1]
    X, Y, Z = (a.reshape(-1, a.shape[-1]) for a in (X, Y, Z))
    n, m, p = coef.shape
    flat = coef.reshape(n * m, p).T
    out = np.empty(X.shape[0])
    for i in range(0, X.shape[0], chunk):
        sl = slice(i, i + chunk)
        T = (Z[sl] @ flat).reshape(-1, n, m)
        out[sl] = np.einsum("knm,kn,km->k", T, X[sl], Y[sl])
    return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class ExpSum:
    """Family of 1-D functions f_i(u) = sum_j A[i, j] exp(c[i, j] (u - u0[i, j]))."""

    A: np.ndarray
    c: np.ndarray
    u0: np.ndarray

    def __call__(self, u):
        """Values with shape ``u.shape + (modes,)``."""
        u = np.asarray(u, dtype=float)
        uniq, inv = np.unique(u, return_inverse=True)
        vals = np.sum(self.A * np.exp(self.c * (uniq[:, None, None] - self.u0)), axis=-1)
        return vals[inv.reshape(u.shape)]

    def project(self, b, a, kind):
        """Integral over [0, a] of f_i(u) * trig(b_j u); shape (modes, len(b))."""
        A, c, u0 = (v[:, None, :] for v in (self.A, self.c, self.u0))
        b = np.asarray(b, dtype=float)[None, :, None]
        ea, e0 = np.exp(c * (a - u0)), np.exp(-c * u0)
        sa, ca = np.sin(b * a), np.cos(b * a)
        den = c * c + b * b
        if kind == "sin":
            val = (ea * (c * sa - b * ca) + b * e0) / den
        else:
            val = (ea * (c * ca + b * sa) - c * e0) / den
        return np.sum(A * val, axis=-1)


def _exp_pair(A1, c1, u01, A2, c2, u02):
    v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (A1, c1, u01, A2, c2, u02)))
    return ExpSum(*(np.stack((v[i], v[i + 3]), axis=-1) for i in range(3)))


class ModeSet:
    """Compound eigenfunctions, norms and elementary integrals for one basis."""

    def __init__(self, compound, bc, basis, length):
        self.compound, self.bc, self.basis = compound, bc, basis
        self.W, self.H, self.L = compound.width, compound.height, length
        self.lx, self.ly, self.lz = basis.lambda_x, basis.lambda_y_m, basis.lambda_z
        lx, ly, lz, W, H, L = self.lx, self.ly, self.lz, self.W, self.H, self.L
        # analytic norms; x over the full width
        self.Nx = W / 2 + np.sin(lx * W) / (2 * lx)
        self.Ny = np.full_like(ly, L / 2)
        self.Nz = H / 2 - np.sin(2 * lz * H) / (4 * lz)
        # integrals of the modes themselves
        self.Ix = 2 * np.sin(lx * W / 2) / lx
        self.Iy = (1 - np.cos(ly * L)) / ly
        self.Iz = (1 - np.cos(lz * H)) / lz
        self.beta = compound.diffusivity * (
            lx[:, None, None] ** 2 + ly[None, :, None] ** 2 + lz[None, None, :] ** 2)

    def X(self, x):
        return np.cos(np.multiply.outer(np.asarray(x, dtype=float), self.lx))

    def Y(self, y):
        return np.sin(np.multiply.outer(np.asarray(y, dtype=float), self.ly))

    def Z(self, zeta):
        return np.sin(np.multiply.outer(np.asarray(zeta, dtype=float), self.lz))


def _cosh_ratio_y(Lam, L):
    """cosh(Lam (L - y)) / cosh(Lam L): unit trace at y = 0, no flux at y = L."""
    d = 1 + np.exp(-2 * Lam * L)
    return _exp_pair(1 / d, -Lam, 0.0, np.exp(-Lam * L) / d, Lam, L)


def _sinh_over_cosh_y(Lam, L):
    """sinh(Lam y) / (Lam cosh(Lam L)): zero at y = 0, unit flux at y = L."""
    d = Lam * (1 + np.exp(-2 * Lam * L))
    return _exp_pair(1 / d, Lam, L, -np.exp(-Lam * L) / d, -Lam, 0.0)


def _robin_den(Lam, H, kappa, h):
    q = np.exp(-2 * Lam * H)
    return kappa * Lam * (1 + q) + h * (1 - q)


def _die_factor_z(Lam, H, kappa, h):
    """Unit trace at zeta = 0, homogeneous Robin at zeta = H."""
    den = _robin_den(Lam, H, kappa, h)
    return _exp_pair((kappa * Lam + h) / den, -Lam, 0.0,
                     (kappa * Lam - h) * np.exp(-Lam * H) / den, Lam, H)


def _top_factor_z(Lam, H, kappa, h):
    """Zero at zeta = 0 and -kappa f' - h f = 1 at zeta = H."""
    den = _robin_den(Lam, H, kappa, h)
    return _exp_pair(-1 / den, Lam, H, np.exp(-Lam * H) / den, -Lam, 0.0)


def _side_factor_x(Lam, W, kappa, h):
    """Even in x, -kappa f' - h f = 1 at x = W/2; stored for x >= 0."""
    a = W / 2
    q = np.exp(-2 * Lam * a)
    den = kappa * Lam * (1 - q) + h * (1 + q)
    return _exp_pair(-1 / den, Lam, a, -np.exp(-Lam * a) / den, -Lam, 0.0)


class SteadyField:
    """Steady compound rise for chip-plane rise ``a_chip`` and die-plane rise ``a_die``.

    ``method="series"`` is the plain separable expansion (one series carrying
    the chip trace, one carrying the die trace).  ``method="lifted"`` adds the
    harmonic corner function

        w(y, zeta) = a_chip (1 - 2 phi / pi) + a_die 2 phi / pi,  phi = atan2(y, zeta),

    which carries both Dirichlet traces exactly, and corrects the remaining
    walls with three separable series (Neumann lead wall, Robin top, Robin
    sides).  The Dirichlet traces are then exact instead of Gibbs-limited.
    """

    def __init__(self, modes, a_chip, a_die, method="lifted"):
        if method not in ("lifted", "series"):
            raise ValueError(f"unknown steady method {method!r}")
        self.modes, self.a_chip, self.a_die, self.method = modes, a_chip, a_die, method
        M = modes
        kap, h = M.compound.kappa, M.bc.h_c
        lx, ly, lz = M.lx, M.ly, M.lz
        Lam_np = np.sqrt(lx[:, None] ** 2 + lz[None, :] ** 2)
        Lam_nm = np.sqrt(lx[:, None] ** 2 + ly[None, :] ** 2)
        Lam_mp = np.sqrt(ly[:, None] ** 2 + lz[None, :] ** 2)
        self._terms = []  # (kind, coefficient matrix, ExpSum over flattened modes, shape)
        xproj = M.Ix / M.Nx
        if method == "series":
            if a_chip:
                c = a_chip * np.outer(xproj, M.Iz / M.Nz)
                self._terms.append(("y", c, _cosh_ratio_y(Lam_np.ravel(), M.L)))
            if a_die:
                c = a_die * np.outer(xproj, M.Iy / M.Ny)
                self._terms.append(("z", c, _die_factor_z(Lam_nm.ravel(), M.H, kap, h)))
            return
        jump = (2 / np.pi) * (a_die - a_chip)
        zg, wz = _gauss(0, M.H)
        yg, wy = _gauss(0, M.L)
        # lead wall: d r / dy = -dw/dy at y = L
        q = -jump * zg / (M.L**2 + zg**2)
        c = np.outer(xproj, (M.Z(zg) * (q * wz)[:, None]).sum(0) / M.Nz)
        self._terms.append(("y", c, _sinh_over_cosh_y(Lam_np.ravel(), M.L)))
        # top wall: -kappa dr/dzeta - h r = kappa dw/dzeta + h w at zeta = H
        s = kap * (-jump * yg / (yg**2 + M.H**2)) + h * self.corner(yg, M.H)
        c = np.outer(xproj, (M.Y(yg) * (s * wy)[:, None]).sum(0) / M.Ny)
        self._terms.append(("z", c, _top_factor_z(Lam_nm.ravel(), M.H, kap, h)))
        # side walls: -kappa dr/dx - h r = h w at x = W/2
        Y2, Z2 = np.meshgrid(yg, zg, indexing="ij")
        data = h * self.corner(Y2, Z2) * np.outer(wy, wz)
        c = np.einsum("ij,im,jp->mp", data, M.Y(yg), M.Z(zg)) / np.outer(M.Ny, M.Nz)
        self._terms.append(("x", c, _side_factor_x(Lam_mp.ravel(), M.W, kap, h)))

    def corner(self, y, zeta):
        if self.method != "lifted":
            return np.zeros(np.broadcast(y, zeta).shape)
        phi = np.arctan2(y, zeta)
        return self.a_chip + (self.a_die - self.a_chip) * (2 / np.pi) * phi

    def __call__(self, x, y, zeta, chunk=2048):
        x, y, zeta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, zeta)))
        flat = [v.ravel() for v in (x, y, zeta)]
        out = np.empty(x.size)
        for i in range(0, x.size, chunk):
            out[i:i + chunk] = self._eval(*(v[i:i + chunk] for v in flat))
        return out.reshape(x.shape)

    def _eval(self, x, y, zeta):
        M = self.modes
        X, Y, Z = M.X(np.abs(x)), M.Y(y), M.Z(zeta)
        out = self.corner(y, zeta).astype(float)
        for kind, c, fac in self._terms:
            if kind == "y":
                F = fac(y).reshape(y.shape + c.shape)
                out = out + np.einsum("...n,...p,...np,np->...", X, Z, F, c)
            elif kind == "z":
                F = fac(zeta).reshape(y.shape + c.shape)
                out = out + np.einsum("...n,...m,...nm,nm->...", X, Y, F, c)
            else:
                F = fac(np.abs(x)).reshape(y.shape + c.shape)
                out = out + np.einsum("...m,...p,...mp,mp->...", Y, Z, F, c)
        return out

    def project(self):
        """Coefficients of this field in the product basis X_n Y_m Z_p."""
        M = self.modes
        out = np.zeros(M.beta.shape)
        for kind, c, fac in self._terms:
            if kind == "y":
                P = fac.project(M.ly, M.L, "sin").reshape(c.shape + (len(M.ly),)) / M.Ny
                out += np.einsum("np,npm->nmp", c, P)
            elif kind == "z":
                P = fac.project(M.lz, M.H, "sin").reshape(c.shape + (len(M.lz),)) / M.Nz
                out += np.einsum("nm,nmp->nmp", c, P)
            else:
                P = 2 * fac.project(M.lx, M.W / 2, "cos").reshape(c.shape + (len(M.lx),)) / M.Nx
                out += np.einsum("mp,mpn->nmp", c, P)
        if self.method == "lifted":
            yg, wy = _gauss(0, M.L)
            zg, wz = _gauss(0, M.H)
            Y2, Z2 = np.meshgrid(yg, zg, indexing="ij")
            wyz = self.corner(Y2, Z2) * np.outer(wy, wz)
            proj = np.einsum("ij,im,jp->mp", wyz, M.Y(yg), M.Z(zg)) / np.outer(M.Ny, M.Nz)
            out += (M.Ix / M.Nx)[:, None, None] * proj[None]
        return out


@dataclass(frozen=True, eq=False)
class LineSource:
    """Wire heat release q(y, t) = amp * theta(y, t) per unit length, in compound modes.

    ``amp`` is eps * sigma * chi * C_w; ``P[m, k]`` projects the wire sine
    modes onto Y_m and ``S[m]`` projects the steady profile.
    """

    amp: float
    C_k: np.ndarray
    rates: np.ndarray
    P: np.ndarray
    S: np.ndarray


def line_source(wire_solution, state, constants, modes):
    wire = wire_solution.wire
    amp = wire.emissivity * constants.sigma * state.chi_w * wire.perimeter
    L = wire.length
    lk, ly = wire_solution.lam, modes.ly
    dm, sm = lk[None, :] - ly[:, None], lk[None, :] + ly[:, None]
    P = 0.5 * (np.sin(dm * L) / dm - np.sin(sm * L) / sm)
    yg, wy = _gauss(0, L)
    S = (modes.Y(yg) * (wire_solution.steady(yg) * wy)[:, None]).sum(0)
    return LineSource(amp, wire_solution.C_t, wire_solution.rates, P, S)


def _phi1(x):
    """(1 - exp(-x)) / x with the x -> 0 limit."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 - x / 2, -np.expm1(-safe) / safe)


def _phi2(x):
    """(1 - exp(-x) - x exp(-x)) / x^2, by its Taylor series near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    safe = np.where(small, 1.0, x)
    series = sum((-x) ** n * (n + 1) / math.factorial(n + 2) for n in range(10))
    return np.where(small, series, (-np.expm1(-safe) - safe * np.exp(-safe)) / safe**2)


def duhamel(beta, r, t):
    """int_0^t exp(-beta (t - tau)) exp(-r tau) dtau, elementwise and stable."""
    lo = np.minimum(beta, r)
    return np.exp(-lo * t) * t * _phi1(np.abs(beta - r) * t)


def duhamel_integral(beta, r, T):
    """int_0^T duhamel(beta, r, t) dt.

    Equals (Phi(r) - Phi(beta)) / (beta - r) with Phi(a) = (1 - exp(-aT)) / a.
    Phi is evaluated on the unbroadcast inputs, so an outer (modes x rates)
    product costs one subtraction and one division per element.
    """
    beta = np.asarray(beta, dtype=float)
    r = np.asarray(r, dtype=float)
    fb, fr = T * _phi1(beta * T), T * _phi1(r * T)
    d = beta - r
    out = (fr - fb) / np.where(d == 0, 1.0, d)
    close = np.abs(d) <= 1e-6 * np.maximum(np.maximum(beta, r), 1.0 / T)
    if np.any(close):
        a = np.broadcast_to(0.5 * (beta + r), close.shape)[close]
        # -dPhi/da at the midpoint
        deriv = T * T * _phi2(a * T)
        out = np.array(np.broadcast_to(out, close.shape))
        out[close] = deriv
    return out


class CompoundSolution:
    """Assembled compound rise: transient + chip + die steady parts (+ kernel terms).

    ``initial`` is ``"ambient"`` (default), ``"steady"``, or a callable
    ``rise(x, y, z)`` projected onto the product basis.

    An ambient start is a step against the heated chip and die planes, which
    a truncated sine basis reproduces only to ~15% in L2.  With ``tail=True``
    the part of the initial mismatch the basis cannot resolve is kept
    explicitly and relaxed at the slowest omitted mode rate, so the field at
    t = 0 is the initial field exactly and the late-time field is unchanged.
    """

    def __init__(self, compound, bc, basis, length, method="lifted", initial="ambient",
                 time_cutoff=1e-14, tail=True):
        self.compound, self.bc, self.basis = compound, bc, basis
        self.modes = M = ModeSet(compound, bc, basis, length)
        self.time_cutoff = time_cutoff
        self.chip = SteadyField(M, bc.T_ch - bc.T_0, 0.0, method)
        self.die = SteadyField(M, 0.0, bc.T_d - bc.T_0, method)
        self.initial = initial
        self.C_t = self.solve_transient(initial)
        self.tail = tail and not (isinstance(initial, str) and initial == "steady")
        self.tail_rate = self._tail_rate()

    def _tail_rate(self):
        M = self.modes
        ratio = self.bc.h_c / self.compound.kappa
        nx, ny, nz = len(M.lx), len(M.ly), len(M.lz)
        lx = robin_tan_roots(M.W, ratio, nx + 1)[-1]
        ly = (2 * ny + 1) * np.pi / (2 * M.L)
        lz = robin_cot_roots(M.H, ratio, nz + 1)[-1]
        a, b, c = M.lx[0] ** 2, M.ly[0] ** 2, M.lz[0] ** 2
        return self.compound.diffusivity * min(lx**2 + b + c, a + ly**2 + c, a + b + lz**2)

    def initial_rise(self, x, y, z):
        if callable(self.initial):
            return np.asarray(self.initial(x, y, z), dtype=float)
        if self.initial == "steady":
            return self.steady(x, y, z)
        return np.zeros(np.broadcast(x, y, z).shape)

    def unresolved(self, x, y, z):
        """Initial mismatch left over after projection onto the truncated basis."""
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        return self.initial_rise(x, y, z) - self.steady(x, y, z) - self._series(self.C_t, x, y, z)

    @property
    def C_s1(self):
        return self.chip._terms[0][1]

    @property
    def C_s2(self):
        return self.die._terms[0][1]

    def solve_transient(self, initial="ambient"):
        M = self.modes
        if isinstance(initial, str) and initial == "steady":
            return np.zeros(M.beta.shape)
        steady = self.chip.project() + self.die.project()
        if isinstance(initial, str):
            if initial != "ambient":
                raise ValueError(f"unknown initial field {initial!r}")
            return -steady
        xg, wx = _gauss(0, M.W / 2, 64)
        yg, wy = _gauss(0, M.L, 96)
        zg, wz = _gauss(0, M.H, 96)
        Xg, Yg, Zg = np.meshgrid(xg, yg, zg, indexing="ij")
        f = initial(Xg, Yg, Zg - M.H / 2) * np.einsum("i,j,k->ijk", 2 * wx, wy, wz)
        proj = np.einsum("ijk,in,jm,kp->nmp", f, M.X(xg), M.Y(yg), M.Z(zg))
        return proj / np.einsum("n,m,p->nmp", M.Nx, M.Ny, M.Nz) - steady

    def _check(self, x, y, z):
        M = self.modes
        tol = 1e-12
        if (np.any(np.abs(x) > M.W / 2 * (1 + tol)) or np.any(y < -tol * M.L)
                or np.any(y > M.L * (1 + tol)) or np.any(np.abs(z) > M.H / 2 * (1 + tol))):
            raise OutOfDomain("point outside the compound block")

    def _series(self, coef, x, y, z):
        M = self.modes
        X, Y, Z = M.X(np.abs(x)), M.Y(y), M.Z(z + M.H / 2)
        return _contract(X, Y, Z, coef)

    def transient(self, x, y, z, t):
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        decay = np.exp(-self.modes.beta * t)
        coef = np.where(decay < self.time_cutoff, 0.0, self.C_t * decay)
        out = self._series(coef, x, y, z)
        g = math.exp(-self.tail_rate * t)
        if self.tail and g >= self.time_cutoff:
            out = out + g * self.unresolved(x, y, z)
        return out

    def steady(self, x, y, z):
        zeta = np.asarray(z, dtype=float) + self.modes.H / 2
        return self.chip(x, y, zeta) + self.die(x, y, zeta)

    def rise(self, x, y, z, t, source=None):
        """Compound temperature rise; ``source`` adds the wire heat-kernel term."""
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        self._check(x, y, z)
        out = self.transient(x, y, z, t) + self.steady(x, y, z)
        if source is not None:
            out = out + HeatKernel(self.compound, self.basis, self.modes.L, self.modes).convolve(
                source, x, y, z, t)
        return out

    def temperature(self, x, y, z, t, source=None):
        return self.bc.T_0 + self.rise(x, y, z, t, source)

    def line_integral(self, x, z, t_end, n=GAUSS_POINTS):
        """int_0^t_end int_0^L rise(x, y, z, t) dy dt without the kernel term."""
        M = self.modes
        zeta = z + M.H / 2
        yg, wy = _gauss(0, M.L, n)
        steady = float(self.steady(np.full_like(yg, x), yg, np.full_like(yg, z)) @ wy)
        w = np.einsum("n,m,p->nmp", M.X(abs(x)), M.Iy, M.Z(zeta))
        trans = float(np.sum(self.C_t * w * t_end * _phi1(M.beta * t_end)))
        if self.tail:
            line = self.unresolved(np.full_like(yg, x), yg, np.full_like(yg, z))
            trans += float(line @ wy) * t_end * float(_phi1(self.tail_rate * t_end))
        return steady * t_end + trans


class HeatKernel:
    """Green's function of the compound for a point impulse on the wire axis.

    G(x, y, z, t; y') = sum X_n(x) X_n(0) Y_m(y) Y_m(y') Z_p(zeta) Z_p(H/2)
                        exp(-beta_nmp t) / (rho c Nx Ny Nz)
    """

    def __init__(self, compound, basis, length, modes=None, bc=None):
        self.compound = compound
        self.modes = modes if modes is not None else ModeSet(compound, bc, basis, length)
        M = self.modes
        self._src = np.outer(M.X(0.0) / M.Nx, M.Z(M.H / 2) / M.Nz)  # (n, p)
        self._rc = compound.heat_capacity

    def __call__(self, x, y, z, t, y_src):
        M = self.modes
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        coef = (self._src[:, None, :] * (M.Y(y_src) / M.Ny)[None, :, None]
                * np.exp(-M.beta * t)) / self._rc
        X, Y, Z = M.X(np.abs(x)), M.Y(y), M.Z(z + M.H / 2)
        return _contract(X, Y, Z, coef)

    def mode_weights(self, source, t):
        """Product-basis coefficients of the convolution term at time t."""
        M = self.modes
        beta = M.beta[..., None]
        E = duhamel(beta, source.rates[None, None, None, :], t)  # (n, m, p, k)
        A = np.einsum("mk,k,nmpk->nmp", source.P, source.C_k, E)
        A += source.S[None, :, None] * duhamel(M.beta, 0.0, t)
        return source.amp * self._src[:, None, :] * A / M.Ny[None, :, None] / self._rc

    def convolve(self, source, x, y, z, t):
        M = self.modes
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        if source.amp == 0 or t <= 0:
            return np.zeros(x.shape)
        coef = self.mode_weights(source, t)
        X, Y, Z = M.X(np.abs(x)), M.Y(y), M.Z(z + M.H / 2)
        return _contract(X, Y, Z, coef)

    def line_integral_factors(self, x, z):
        """Spatial weights for int_0^L convolve(...) dy at fixed (x, z); shape (n, m, p)."""
        M = self.modes
        obs = np.outer(M.X(abs(x)), M.Z(z + M.H / 2))
        return obs[:, None, :] * self._src[:, None, :] * (M.Iy / M.Ny)[None, :, None] / self._rc

    def convolve_line_integral(self, source, weights, t_end):
        """int_0^t_end int_0^L of the convolution term, using precomputed weights."""
        if source.amp == 0:
            return 0.0
        M = self.modes
        Ik = duhamel_integral(M.beta[..., None], source.rates[None, None, None, :], t_end)
        A = np.einsum("mk,k,nmpk->nmp", source.P, source.C_k, Ik)
        A += source.S[None, :, None] * duhamel_integral(M.beta, 0.0, t_end)
        return source.amp * float(np.sum(weights * A))
