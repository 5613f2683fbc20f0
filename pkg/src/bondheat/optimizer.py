"""Fit model parameters to fusing events by subset-selection Newton steps.

Each fusing event (I0, t_p) says the wire mid-point reached the melting
point after t_p seconds at current I0.  The residual is

    R(p) = sum_i (T_f - B(p, I0_i, t_p_i))**2

where B is the coupled mid-point temperature.  Every iteration builds the
Jacobian of B by central differences, forms the gradient and Hessian of R,
truncates the Hessian's SVD, picks the well-conditioned parameters by
column-pivoted QR on the leading right singular vectors and takes a Newton
step in those parameters only.  The rest stay frozen.

All of this happens in parameters scaled by their nominal magnitudes; raw
units span some thirty orders of magnitude.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .coupling import fixed_point
from .errors import (BondheatError, DegenerateHessian, NotConverged, OutOfRange,
                     SingularReducedSystem)
from .materials import Drive
from .wire import midpoint_temperature, ode_coefficients

PARAMETER_NAMES = ("diameter", "length", "rho_e0", "alpha_rho", "mass_density", "kappa0",
                   "alpha_kappa", "specific_heat", "emissivity", "T_ch", "T_ld")
WIRE_FIELDS = PARAMETER_NAMES[:9]
BOUNDARY_FIELDS = PARAMETER_NAMES[9:]
LABELS = {
    "diameter": "D_w", "length": "L_w", "rho_e0": "rho_e0", "alpha_rho": "alpha_rho",
    "mass_density": "rho_w", "kappa0": "kappa0", "alpha_kappa": "alpha_kappa",
    "specific_heat": "c_w", "emissivity": "eps_w", "T_ch": "T_ch", "T_ld": "T_ld",
}


@dataclass(frozen=True)
class ParameterVector:
    """Ordered parameter values with nominal values, bounds and scales."""

    names: tuple
    nominal: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def scale(self):
        return np.abs(self.nominal)

    def __len__(self):
        return len(self.names)

    def to_scaled(self, p):
        return np.asarray(p, dtype=float) / self.scale

    def from_scaled(self, x):
        return np.asarray(x, dtype=float) * self.scale

    def project(self, p):
        return np.clip(p, self.lower, self.upper)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def check(self, p):
        if not self.contains(p):
            bad = [n for n, v, lo, hi in zip(self.names, p, self.lower, self.upper) if not lo <= v <= hi]
            raise ValueError(f"parameters out of bounds: {bad}")

    def variation(self, p):
        """Percent change of each entry against its nominal value."""
        return 100.0 * (np.asarray(p) - self.nominal) / self.scale

    def as_dict(self, p):
        return {n: float(v) for n, v in zip(self.names, p)}


def parameter_space(model, melting_point):
    """Bounds from the physical admissibility rules.

    Diameter and length may move 30% either way; chip and lead temperatures
    may rise up to 50% above nominal (in kelvin).  Emissivity stays in
    (0, 1], alpha_rho >= 0, and alpha_kappa <= 0 but not so negative that the
    conductivity would vanish before the melting point.  The remaining
    positive quantities may range over two decades either side.
    """
    w, bc = model.wire, model.bc
    nominal = np.array([getattr(w, n) for n in WIRE_FIELDS] + [getattr(bc, n) for n in BOUNDARY_FIELDS])
    lo = nominal / 100.0
    hi = nominal * 100.0
    for i, name in enumerate(PARAMETER_NAMES):
        v = nominal[i]
        if name in ("diameter", "length"):
            lo[i], hi[i] = 0.7 * v, 1.3 * v
        elif name in ("T_ch", "T_ld"):
            lo[i], hi[i] = v, 1.5 * v
        elif name == "emissivity":
            lo[i], hi[i] = min(1e-4, v), 1.0
        elif name == "alpha_rho":
            lo[i], hi[i] = 0.0, max(100.0 * v, 1e-2)
        elif name == "alpha_kappa":
            lo[i], hi[i] = -0.999 / (melting_point - bc.T_0), 0.0
    return ParameterVector(PARAMETER_NAMES, nominal, lo, hi)


def apply_parameters(model, p, counts=None):
    """ModelConfig with wire and boundary entries replaced by ``p``."""
    values = dict(zip(PARAMETER_NAMES, (float(v) for v in p)))
    wire = model.wire.replace(**{k: values[k] for k in WIRE_FIELDS})
    bc = model.bc.replace(**{k: values[k] for k in BOUNDARY_FIELDS})
    return model.replace(wire=wire, bc=bc, counts=model.counts if counts is None else tuple(counts))


@dataclass
class FusingDataset:
    """Filtered fusing events for one wire type at one package position."""

    currents: np.ndarray
    times: np.ndarray
    melting_point: float
    wire_id: str = ""

    def __post_init__(self):
        self.currents = np.asarray(self.currents, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.currents.shape != self.times.shape:
            raise ValueError("currents and times must have the same length")
        if np.any(self.currents <= 0) or np.any(self.times <= 0):
            raise ValueError("fusing events need positive current and time")

    def __len__(self):
        return len(self.currents)

    @classmethod
    def from_series(cls, series, melting_point, wire_id=""):
        return cls(series.currents, series.times, melting_point, wire_id)


class ModelMap:
    """B(p, I0_i, t_p_i) for every event of a dataset.

    Each event keeps the coupling state of its last successful solve and
    uses it as the next warm start, so nearby parameter vectors cost about
    one fixed-point iteration.
    """

    def __init__(self, model, dataset, counts=None, tol=1e-11, max_iter=60):
        self.model, self.dataset = model, dataset
        self.counts = counts
        self.tol, self.max_iter = tol, max_iter
        self._starts = [None] * len(dataset)
        self.evaluations = 0

    def config(self, p):
        return apply_parameters(self.model, p, self.counts)

    def event(self, cfg, i, current=None, time=None):
        I = self.dataset.currents[i] if current is None else current
        t = self.dataset.times[i] if time is None else time
        drive = Drive(float(I), float(t))
        res = fixed_point(cfg, drive, tol=self.tol, max_iter=self.max_iter, start=self._starts[i])
        if res.converged:
            self._starts[i] = res.state
        self.evaluations += 1
        return midpoint_temperature(cfg, drive, res.state), res

    def __call__(self, p):
        """Vector of mid-point temperatures; failed events are nan with a warning."""
        cfg = self.config(p)
        out = np.empty(len(self.dataset))
        for i in range(len(self.dataset)):
            try:
                out[i] = self.event(cfg, i)[0]
            except BondheatError as exc:
                warnings.warn(f"event {i} failed: {exc}", stacklevel=2)
                out[i] = math.nan
        return out

    def states(self, p):
        cfg = self.config(p)
        return [self.event(cfg, i)[1].state for i in range(len(self.dataset))]


def residual(p, dataset, model_map):
    """Total residual and the per-event vector (T_f - B)**2; failed events masked."""
    if len(dataset) == 0:
        warnings.warn("empty dataset: residual is zero", stacklevel=2)
        return 0.0, np.empty(0)
    B = model_map(p)
    r = (dataset.melting_point - B) ** 2
    return float(np.nansum(r)), r


def model_jacobian(p, model_map, space, rel_step=1e-4, floor=1e-10, richardson=False, base=None):
    """N_d x N_p Jacobian of B by central differences in physical units.

    The step for entry j is ``rel_step * max(scale_j, floor)``.  A parameter
    sitting on a bound gets a one-sided difference.  With ``richardson``
    each column is refined from steps h and h/2.
    """
    p = np.asarray(p, dtype=float)
    n_d = len(model_map.dataset)
    J = np.zeros((n_d, len(p)))
    B0 = model_map(p) if base is None else base
    for j in range(len(p)):
        h = rel_step * max(space.scale[j], floor)
        J[:, j] = _column(model_map, space, p, j, h, B0)
        if richardson:
            half = _column(model_map, space, p, j, h / 2, B0)
            J[:, j] = (4 * half - J[:, j]) / 3
    model_map(p)  # leave the warm starts at the base point
    return J


def _column(model_map, space, p, j, h, B0):
    up, dn = p.copy(), p.copy()
    up[j] += h
    dn[j] -= h
    if up[j] > space.upper[j]:
        return (B0 - model_map(dn)) / h
    if dn[j] < space.lower[j]:
        return (model_map(up) - B0) / h
    return (model_map(up) - model_map(dn)) / (2 * h)


def model_hessians(p, model_map, space, rel_step=1e-3, floor=1e-10):
    """Second derivatives of B for every event, shape (N_d, N_p, N_p), by central differences."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    h = rel_step * np.maximum(space.scale, floor)
    B0 = model_map(p)
    Hs = np.zeros((len(B0), n, n))
    for a in range(n):
        e_a = np.zeros(n)
        e_a[a] = h[a]
        Hs[:, a, a] = (model_map(p + e_a) - 2 * B0 + model_map(p - e_a)) / h[a] ** 2
        for b in range(a + 1, n):
            e_b = np.zeros(n)
            e_b[b] = h[b]
            v = (model_map(p + e_a + e_b) - model_map(p + e_a - e_b)
                 - model_map(p - e_a + e_b) + model_map(p - e_a - e_b)) / (4 * h[a] * h[b])
            Hs[:, a, b] = Hs[:, b, a] = v
    model_map(p)
    return Hs


def residual_derivatives(B, T_f, J, hessian="gn", model_hessians=None):
    """Gradient and Hessian of R from B, the targets and the model Jacobian.

    ``hessian="gn"`` keeps 2 J^T J; ``"full"`` adds 2 sum_i (B_i - T_f) H_B,i
    and needs ``model_hessians``.  Masked (nan) events are skipped.
    """
    B = np.asarray(B, dtype=float)
    ok = np.isfinite(B) & np.all(np.isfinite(J), axis=1)
    d = B[ok] - T_f
    Jo = J[ok]
    grad = 2.0 * d @ Jo
    H = 2.0 * Jo.T @ Jo
    if hessian == "full":
        if model_hessians is None:
            raise ValueError("full Hessian mode needs the model Hessians")
        H = H + 2.0 * np.einsum("i,ijk->jk", d, model_hessians[ok])
        H = 0.5 * (H + H.T)
    elif hessian != "gn":
        raise ValueError(f"unknown Hessian mode {hessian!r}")
    return grad, H


@dataclass(frozen=True)
class TruncatedSVD:
    U: np.ndarray
    sigma: np.ndarray  # all singular values, descending
    Vt: np.ndarray
    rank: int
    threshold: float

    @property
    def V_u(self):
        """Leading right singular vectors as rows, shape (rank, N_p)."""
        return self.Vt[: self.rank]

    @property
    def Sigma_uu(self):
        return np.diag(self.sigma[: self.rank])

    def reconstruct(self):
        r = self.rank
        return (self.U[:, :r] * self.sigma[:r]) @ self.Vt[:r]


def svd_truncate(H, threshold=1e-6):
    """Keep singular values at or above ``threshold * sigma_1``."""
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        raise DegenerateHessian("Hessian has non-finite entries")
    U, s, Vt = np.linalg.svd(H)
    if s.size == 0 or s[0] == 0:
        raise DegenerateHessian("Hessian is zero")
    r = int(np.count_nonzero(s >= threshold * s[0]))
    return TruncatedSVD(U, s, Vt, r, threshold)


@dataclass(frozen=True)
class SubsetSplit:
    permutation: np.ndarray
    rank: int
    threshold: float

    @property
    def selected(self):
        return np.sort(self.permutation[: self.rank])

    @property
    def frozen(self):
        return np.sort(self.permutation[self.rank:])


def qr_subset_select(V_u, threshold=math.nan):
    """Pivoted QR of the r x N_p leading singular-vector block.

    The first r pivots name the parameters the data can resolve.
    """
    V_u = np.atleast_2d(np.asarray(V_u, dtype=float))
    r = V_u.shape[0]
    _, _, perm = scipy.linalg.qr(V_u, pivoting=True, mode="economic")
    return SubsetSplit(np.asarray(perm), r, threshold)


@dataclass
class StepResult:
    x: np.ndarray  # new scaled parameters
    delta: np.ndarray  # accepted scaled step
    residual: float
    alpha: float
    accepted: bool


def newton_step(x, grad, H, split, objective, lower, upper, halvings=20, R0=None):
    """Reduced Newton step in scaled parameters with line search and projection.

    Solves H_uu d_u = -g_u on the selected parameters, leaves the others at
    exactly their current values, and halves the step up to ``halvings``
    times until the projected trial does not raise the residual.
    """
    sel = split.selected
    Huu = H[np.ix_(sel, sel)]
    try:
        d_u = scipy.linalg.solve(Huu, -grad[sel], assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularReducedSystem(f"reduced Hessian is singular: {exc}") from None
    if not np.all(np.isfinite(d_u)):
        raise SingularReducedSystem("reduced Newton step is not finite")
    d = np.zeros_like(x)
    d[sel] = d_u
    R0 = objective(x) if R0 is None else R0
    alpha = 1.0
    for _ in range(halvings + 1):
        trial = x.copy()
        trial[sel] = np.clip(x[sel] + alpha * d_u, lower[sel], upper[sel])
        R = objective(trial)
        if np.isfinite(R) and R <= R0:
            return StepResult(trial, trial - x, R, alpha, True)
        alpha *= 0.5
    return StepResult(x.copy(), np.zeros_like(x), R0, 0.0, False)


@dataclass
class OptimizerOptions:
    hessian: str = "gn"
    svd_threshold: float = 1e-6
    max_iter: int = 50
    step_tol: float = 1e-5  # relative scaled step
    residual_tol: float = 1e-8  # relative residual change
    zero_residual: float = 1e-7  # rms misfit relative to T_f that counts as exact
    rel_step: float = 1e-4
    halvings: int = 20


@dataclass
class OptimizationReport:
    space: ParameterVector
    p0: np.ndarray
    p: np.ndarray
    iterations: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    options: OptimizerOptions = None

    @property
    def residual_history(self):
        return [it["residual"] for it in self.iterations]

    def variation(self):
        return dict(zip(self.space.names, self.space.variation(self.p)))

    def to_dict(self):
        sp = self.space
        return {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "parameters": [
                {"name": n, "label": LABELS[n], "nominal": float(v0), "start": float(s),
                 "value": float(v), "lower": float(lo), "upper": float(hi),
                 "variation_percent": float(dv)}
                for n, v0, s, v, lo, hi, dv in zip(sp.names, sp.nominal, self.p0, self.p,
                                                     sp.lower, sp.upper, sp.variation(self.p))],
            "decisions": {
                "hessian": self.options.hessian,
                "svd_threshold_relative": self.options.svd_threshold,
                "line_search": f"backtracking, up to {self.options.halvings} halvings",
                "bounds": "projection onto parameter box",
                "scaling": "parameters divided by |nominal|",
                "stop": {"relative_step": self.options.step_tol,
                         "relative_residual_change": self.options.residual_tol,
                         "max_iter": self.options.max_iter},
            },
        }


def optimize(p0, dataset, model_map, space, options=None, raise_on_limit=True):
    """Minimise R from ``p0``; returns (p*, report).

    Raises :class:`NotConverged` carrying ``(p_best, report)`` when
    ``max_iter`` runs out, unless ``raise_on_limit`` is false.
    """
    opt = options or OptimizerOptions()
    space.check(p0)
    scale = space.scale
    lower, upper = space.lower / scale, space.upper / scale
    x = space.to_scaled(p0)
    T_f = dataset.melting_point
    cache = {}

    def evaluate(xv):
        key = xv.tobytes()
        if key not in cache:
            B = model_map(space.from_scaled(xv))
            R = float(np.nansum((T_f - B) ** 2))
            cache.clear()
            cache[key] = (B, R)
        return cache[key]

    objective = lambda xv: evaluate(xv)[1]
    report = OptimizationReport(space, np.array(p0, dtype=float), np.array(p0, dtype=float), options=opt)
    n = max(len(dataset), 1)
    for it in range(1, opt.max_iter + 1):
        B, R = evaluate(x)
        p = space.from_scaled(x)
        record = {"iteration": it, "residual": R, "parameters": space.as_dict(p)}
        if math.sqrt(R / n) <= opt.zero_residual * T_f:
            record.update(step_norm=0.0, alpha=0.0, rank=0, subset=[], singular_values=[])
            report.iterations.append(record)
            report.converged, report.stop_reason = True, "zero residual"
            break
        J = model_jacobian(p, model_map, space, rel_step=opt.rel_step, base=B) * scale
        Hs = None
        if opt.hessian == "full":
            Hs = model_hessians(p, model_map, space) * np.outer(scale, scale)
        grad, H = residual_derivatives(B, T_f, J, opt.hessian, Hs)
        svd = svd_truncate(H, opt.svd_threshold)
        split = qr_subset_select(svd.V_u, opt.svd_threshold)
        step = newton_step(x, grad, H, split, objective, lower, upper, opt.halvings, R0=R)
        rel_step = float(np.linalg.norm(step.delta) / max(np.linalg.norm(x), 1e-300))
        record.update(
            step_norm=rel_step, alpha=step.alpha, rank=split.rank,
            subset=[space.names[i] for i in split.selected],
            frozen=[space.names[i] for i in split.frozen],
            singular_values=[float(s) for s in svd.sigma],
            gauss_newton_min_eigenvalue=float(np.linalg.eigvalsh(2.0 * J[np.isfinite(B)].T @ J[np.isfinite(B)])[0]),
            new_residual=step.residual)
        report.iterations.append(record)
        x = step.x
        report.p = space.from_scaled(x)
        if not step.accepted:
            report.converged, report.stop_reason = True, "line search found no descent"
            break
        if rel_step < opt.step_tol:
            report.converged, report.stop_reason = True, "relative step below tolerance"
            break
        if abs(R - step.residual) <= opt.residual_tol * R:
            report.converged, report.stop_reason = True, "residual change below tolerance"
            break
    else:
        report.stop_reason = "iteration limit"
        if raise_on_limit:
            raise NotConverged(f"no convergence in {opt.max_iter} iterations", best=(report.p, report))
    report.p = space.from_scaled(x)
    return report.p, report


# --- synthetic data and the regime split ----------------------------------

def fusing_time(model, current, melting_point, t_lo=1e-4, t_hi=10.0, tol=1e-11, xtol=1e-9):
    """Pulse length at which the coupled mid-point reaches the melting point.

    Returns None when the wire stays below it up to ``t_hi``.
    """
    last = {}

    def f(log_t):
        d = Drive(current, math.exp(log_t))
        try:
            res = fixed_point(model, d, tol=tol, max_iter=60, start=last.get("s"))
            if res.converged:
                last["s"] = res.state
            return midpoint_temperature(model, d, res.state) - melting_point
        except OutOfRange:
            return 10.0 * melting_point

    a, b = math.log(t_lo), math.log(t_hi)
    fa, fb = f(a), f(b)
    if fb < 0:
        return None
    if fa >= 0:
        return t_lo
    return math.exp(brentq(f, a, b, xtol=xtol))


def synthetic_dataset(model, p_true, currents, melting_point, noise=0.0, seed=0, counts=None):
    """Fusing events generated by the model at ``p_true``, with multiplicative noise on t_p."""
    cfg = apply_parameters(model, p_true, counts)
    rng = np.random.default_rng(seed)
    I, t = [], []
    for c in currents:
        tf = fusing_time(cfg, float(c), melting_point)
        if tf is None:
            continue
        I.append(float(c))
        t.append(tf * (1.0 + noise * rng.standard_normal()) if noise else tf)
    return FusingDataset(np.array(I), np.array(t), melting_point, "synthetic")


def time_constant(model, state):
    """Slowest wire time constant rho c / (k0 lam_1**2 + F) for one coupling state."""
    w = model.wire
    F = ode_coefficients(w, Drive(0.0, 1.0), model.constants, state).F
    lam1 = math.pi / w.length
    return w.heat_capacity / (w.kappa0 * lam1**2 + F)


def error_split(model_map, p, dataset):
    """Mean relative error |T_f - B| / T_f for transient and steady events.

    An event counts as transient when its pulse is no longer than the wire's
    slowest time constant under its own coupling state.
    """
    B = model_map(p)
    states = model_map.states(p)
    cfg = model_map.config(p)
    err = np.abs(dataset.melting_point - B) / dataset.melting_point
    tau = np.array([time_constant(cfg, s) for s in states])
    transient = dataset.times <= tau
    out = {}
    for name, mask in (("transient", transient), ("steady", ~transient)):
        vals = err[mask & np.isfinite(err)]
        out[name] = {"error_percent": float(100 * vals.mean()) if vals.size else None,
                     "events": int(mask.sum())}
    return out


def variation_table(columns):
    """Percent variation per parameter and wire type, with the overall mean.

    ``columns`` maps a wire label to (space, p).  Returns rows ordered like
    the parameter vector; each row is {label: percent, ..., "total": mean}.
    """
    rows = []
    for i, name in enumerate(PARAMETER_NAMES):
        row = {"parameter": LABELS[name]}
        vals = []
        for label, (space, p) in columns.items():
            v = float(space.variation(p)[i])
            row[label] = v
            vals.append(v)
        row["total"] = float(np.mean(vals)) if vals else None
        rows.append(row)
    return rows


def error_table(columns):
    """Transient/steady error rows before and after fitting.

    ``columns`` maps a wire label to (before, after), each an
    :func:`error_split` result.
    """
    rows = []
    for regime, which in (("transient", 0), ("steady", 0), ("transient", 1), ("steady", 1)):
        key = regime + ("_fitted" if which else "")
        row = {"error": key}
        vals = []
        for label, pair in columns.items():
            v = pair[which][regime]["error_percent"]
            row[label] = v
            if v is not None:
                vals.append(v)
        row["total"] = float(np.mean(vals)) if vals else None
        rows.append(row)
    return rows


def format_table(rows, columns, value="{:+.2f}%"):
    """Plain-text rendering of a table built by the two functions above."""
    key = "parameter" if "parameter" in rows[0] else "error"
    head = [key] + list(columns) + ["total"]
    lines = [" | ".join(head)]
    for r in rows:
        cells = [str(r[key])]
        for c in list(columns) + ["total"]:
            v = r.get(c)
            cells.append("-" if v is None else value.format(v))
        lines.append(" | ".join(cells))
    return "\n".join(lines)
