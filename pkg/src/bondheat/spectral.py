"""Eigenvalues of the separable wire and compound problems.

The compound walls carry Robin conditions, which give the transcendental
characteristic equations

    lam * tan(lam * W / 2) =  h / kappa      (x, even modes)
    lam * cot(lam * H)     = -h / kappa      (z, Dirichlet bottom, Robin top)

Both are solved in the dimensionless variable ``mu = lam * W/2`` (resp.
``lam * H``) on one tangent branch at a time, where the smooth forms
``mu sin mu - B cos mu`` and ``mu cos mu + B sin mu`` have exactly one sign
change and no poles.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceFailure

DEFAULT_COUNTS = dict(n_x=20, n_y=30, n_z=20, n_k=60)


def _bracketed_root(f, df, a, b, max_iter=200, xtol=1e-8):
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        raise ConvergenceFailure(f"no sign change on [{a}, {b}]")
    lo, hi = a, b
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if fa * fm < 0:
            hi = mid
        else:
            lo, fa = mid, fm
        if hi - lo < xtol * max(1.0, abs(mid)):
            break
    else:
        raise ConvergenceFailure(f"bisection did not close on [{a}, {b}] in {max_iter} iterations")
    x = 0.5 * (lo + hi)
    # safeguarded Newton polish; never leaves the last bracket
    for _ in range(5):
        d = df(x)
        if d == 0:
            break
        step = f(x) / d
        x_new = x - step
        if not lo <= x_new <= hi:
            break
        x = x_new
        if abs(step) <= 4e-16 * abs(x):
            break
    return x


def tan_branch_roots(biot, n):
    """First ``n`` positive roots of ``mu tan(mu) = biot``."""
    f = lambda m: m * math.sin(m) - biot * math.cos(m)
    df = lambda m: math.sin(m) + m * math.cos(m) + biot * math.sin(m)
    return np.array([_bracketed_root(f, df, k * math.pi, k * math.pi + 0.5 * math.pi)
                     for k in range(n)])


def cot_branch_roots(biot, n):
    """First ``n`` positive roots of ``mu cot(mu) = -biot``."""
    f = lambda m: m * math.cos(m) + biot * math.sin(m)
    df = lambda m: math.cos(m) - m * math.sin(m) + biot * math.cos(m)
    return np.array([_bracketed_root(f, df, (k + 0.5) * math.pi, (k + 1.0) * math.pi)
                     for k in range(n)])


def robin_tan_roots(width, ratio, n):
    """Roots of ``lam tan(lam W/2) = ratio``; ``ratio`` is h_c/kappa_m in 1/m."""
    if not (width > 0 and ratio > 0 and n >= 1):
        raise ValueError("robin_tan_roots needs width > 0, ratio > 0, n >= 1")
    half = 0.5 * width
    return tan_branch_roots(ratio * half, n) / half


def robin_cot_roots(height, ratio, n):
    """Roots of ``lam cot(lam H) = -ratio``."""
    if not (height > 0 and ratio > 0 and n >= 1):
        raise ValueError("robin_cot_roots needs height > 0, ratio > 0, n >= 1")
    return cot_branch_roots(ratio * height, n) / height


def tan_residual(lam, width, ratio):
    """Characteristic residual in Biot-scaled form, ``mu tan mu - B``."""
    mu = np.asarray(lam) * width / 2
    return mu * np.tan(mu) - ratio * width / 2


def cot_residual(lam, height, ratio):
    mu = np.asarray(lam) * height
    return mu / np.tan(mu) + ratio * height


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Cached eigenvalues of the wire (sine) and compound (Robin/sine) problems."""

    lambda_x: np.ndarray
    lambda_y_m: np.ndarray
    lambda_z: np.ndarray
    lambda_y_w: np.ndarray

    @property
    def counts(self):
        return len(self.lambda_x), len(self.lambda_y_m), len(self.lambda_z), len(self.lambda_y_w)

    def combined(self):
        return CombinedEigen.of(self)


@dataclass(frozen=True, eq=False)
class CombinedEigen:
    """Squared decay constants of the steady compound components.

    ``lambda_y_np[n, p] = lam_x[n]**2 + lam_z[p]**2`` drives the chip component
    along y; ``lambda_z_nm[n, m] = lam_x[n]**2 + lam_y[m]**2`` drives the die
    component along z.
    """

    lambda_y_np: np.ndarray
    lambda_z_nm: np.ndarray

    @classmethod
    def of(cls, basis):
        lx2 = basis.lambda_x[:, None] ** 2
        return cls(lx2 + basis.lambda_z[None, :] ** 2, lx2 + basis.lambda_y_m[None, :] ** 2)


def build_basis(wire, compound, bc, n_x=20, n_y=30, n_z=20, n_k=60):
    if min(n_x, n_y, n_z, n_k) < 1:
        raise ValueError("all mode counts must be >= 1")
    ratio = bc.h_c / compound.kappa
    L = wire.length
    return SpectralBasis(
        lambda_x=robin_tan_roots(compound.width, ratio, n_x),
        lambda_y_m=(2 * np.arange(n_y) + 1) * np.pi / (2 * L),
        lambda_z=robin_cot_roots(compound.height, ratio, n_z),
        lambda_y_w=np.arange(1, n_k + 1) * np.pi / L,
    )
