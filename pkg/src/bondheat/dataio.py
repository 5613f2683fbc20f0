"""Run configuration, fusing-event files, histogram filtering and CSV output.

Configuration files are TOML.  Every physical quantity is a string with an
explicit unit (``diameter = "2.0 mil"``); counts, tolerances and flags are
bare numbers.  Serialisation writes SI base units, so a parse followed by a
write reproduces the written text byte for byte.
"""

from dataclasses import dataclass, field, replace
import csv
import io
import math
import warnings

import numpy as np
import tomli
import tomli_w

from .coupling import fixed_point
from .errors import BondheatError, OutOfRange, ParseError, UnitError
from .materials import (MELTING_POINTS, BoundarySet, CompoundSpec, Drive, ModelConfig,
                        WireSpec, epoxy_compound, nominal_wire, reference_boundaries)
from .units import format_quantity, parse_quantity
from .wire import midpoint_temperature

# (field, dimension, SI display unit)
_WIRE_FIELDS = [
    ("length", "length", "m"),
    ("diameter", "length", "m"),
    ("kappa0", "conductivity", "W/(m*K)"),
    ("alpha_kappa", "per_kelvin", "1/K"),
    ("rho_e0", "resistivity", "ohm*m"),
    ("alpha_rho", "per_kelvin", "1/K"),
    ("mass_density", "density", "kg/m^3"),
    ("specific_heat", "specific_heat", "J/(kg*K)"),
    ("emissivity", "dimensionless", "1"),
]
_COMPOUND_FIELDS = [
    ("width", "length", "m"),
    ("height", "length", "m"),
    ("kappa", "conductivity", "W/(m*K)"),
    ("specific_heat", "specific_heat", "J/(kg*K)"),
    ("density", "density", "kg/m^3"),
]
_BOUNDARY_FIELDS = [
    ("T_ch", "temperature", "K"),
    ("T_ld", "temperature", "K"),
    ("T_d", "temperature", "K"),
    ("T_0", "temperature", "K"),
    ("h_c", "transfer", "W/(m^2*K)"),
]


@dataclass(frozen=True)
class FitConfig:
    hessian: str = "gn"
    svd_threshold: float = 1e-6
    max_iter: int = 50
    counts: tuple = (8, 12, 8, 30)  # reduced truncation for the many solves of a fit
    coupling_tol: float = 1e-11  # central differences of B need a much tighter fixed point than 1e-4

    def __post_init__(self):
        if self.hessian not in ("gn", "full"):
            raise ValueError(f"hessian must be 'gn' or 'full', not {self.hessian!r}")
        if not 0 < self.svd_threshold < 1:
            raise ValueError("svd_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    """A model configuration plus solver and optimiser settings."""

    model: ModelConfig
    melting_point: float
    coupling_tol: float = 1e-4
    coupling_max_iter: int = 20
    optimizer: FitConfig = field(default_factory=FitConfig)

    @property
    def wire(self):
        return self.model.wire

    def replace(self, **changes):
        return replace(self, **changes)


def default_config(material="Au", diameter_mil=2.0, length_mm=2.5):
    """Reference package configuration for one nominal wire."""
    model = ModelConfig(nominal_wire(material, diameter_mil, length_mm), epoxy_compound(),
                        reference_boundaries())
    return RunConfig(model, MELTING_POINTS[material])


def _quantities(table, fields, section):
    out = {}
    for name, dim, _ in fields:
        if name not in table:
            raise ParseError(f"[{section}] is missing '{name}'")
        try:
            out[name] = parse_quantity(table[name], dim)
        except UnitError as exc:
            raise UnitError(f"[{section}].{name}: {exc}") from None
    unknown = set(table) - {f[0] for f in fields} - {"material", "melting_point"}
    if unknown:
        raise ParseError(f"[{section}] has unknown keys {sorted(unknown)}")
    return out


def _int_tuple(value, n, what):
    if not (isinstance(value, list) and len(value) == n and all(isinstance(v, int) for v in value)):
        raise ParseError(f"{what} must be a list of {n} integers")
    return tuple(value)


def config_from_dict(doc):
    """Build a :class:`RunConfig` from a parsed TOML document."""
    try:
        wt = doc["wire"]
        material = wt.get("material", "")
        wire = WireSpec(material=material, **_quantities(wt, _WIRE_FIELDS, "wire"))
        compound = CompoundSpec(**_quantities(doc["compound"], _COMPOUND_FIELDS, "compound"))
        bc = BoundarySet(**_quantities(doc["boundary"], _BOUNDARY_FIELDS, "boundary"))
    except KeyError as exc:
        raise ParseError(f"missing section {exc}") from None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if "melting_point" in wt:
        melt = parse_quantity(wt["melting_point"], "temperature")
    elif material in MELTING_POINTS:
        melt = MELTING_POINTS[material]
    else:
        raise ParseError("[wire] needs 'melting_point' for a material without shipped data")
    solver = doc.get("solver", {})
    counts = _int_tuple(solver.get("counts", [20, 30, 20, 60]), 4, "[solver].counts")
    try:
        model = ModelConfig(wire, compound, bc, counts=counts,
                            initial_profile=solver.get("initial_profile", "linear"),
                            quadrature_points=int(solver.get("quadrature_points", 128)))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    coup = doc.get("coupling", {})
    opt = doc.get("optimizer", {})
    try:
        options = FitConfig(
            hessian=opt.get("hessian", "gn"),
            svd_threshold=float(opt.get("svd_threshold", 1e-6)),
            max_iter=int(opt.get("max_iter", 50)),
            counts=_int_tuple(opt.get("counts", [8, 12, 8, 30]), 4, "[optimizer].counts"),
            coupling_tol=float(opt.get("coupling_tol", 1e-11)))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return RunConfig(model, melt, float(coup.get("tol", 1e-4)), int(coup.get("max_iter", 20)), options)


def config_to_dict(cfg):
    m = cfg.model

    def block(obj, fields):
        return {name: format_quantity(getattr(obj, name), unit) for name, _, unit in fields}

    wire = {"material": m.wire.material} if m.wire.material else {}
    wire.update(block(m.wire, _WIRE_FIELDS))
    wire["melting_point"] = format_quantity(cfg.melting_point, "K")
    o = cfg.optimizer
    return {
        "wire": wire,
        "compound": block(m.compound, _COMPOUND_FIELDS),
        "boundary": block(m.bc, _BOUNDARY_FIELDS),
        "solver": {"counts": list(m.counts), "initial_profile": m.initial_profile,
                   "quadrature_points": m.quadrature_points},
        "coupling": {"tol": cfg.coupling_tol, "max_iter": cfg.coupling_max_iter},
        "optimizer": {"hessian": o.hessian, "svd_threshold": o.svd_threshold,
                      "max_iter": o.max_iter, "counts": list(o.counts),
                      "coupling_tol": o.coupling_tol},
    }


def parse_config(text):
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}") from None
    return config_from_dict(doc)


def dump_config(cfg):
    return tomli_w.dumps(config_to_dict(cfg))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))


# --- fusing events ---------------------------------------------------------

EVENT_COLUMNS = ("wire_id", "material", "position", "I0_amps", "t_fuse_seconds")


@dataclass(frozen=True)
class FusingEvent:
    wire_id: str
    material: str
    position: str
    current: float  # A
    time: float  # s
    line: int = 0


def load_events(path):
    """Read and validate a fusing-event CSV; duplicate rows are kept."""
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_events(fh.read())


def parse_events(text):
    rows = csv.reader(io.StringIO(text))
    events = []
    header_seen = False
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if not header_seen:
            header_seen = True
            if tuple(cells) == EVENT_COLUMNS:
                continue
            if len(cells) == 5 and not _is_number(cells[3]):
                _check_header(cells, lineno)
        if len(cells) != 5:
            raise ParseError(f"expected 5 fields, got {len(cells)}", lineno)
        wire_id, material, position, i_text, t_text = cells
        if material not in MELTING_POINTS:
            raise ParseError(f"unknown material {material!r}", lineno)
        try:
            current, time = float(i_text), float(t_text)
        except ValueError:
            raise ParseError(f"non-numeric current or time ({i_text!r}, {t_text!r})", lineno) from None
        if not (current > 0 and math.isfinite(current)):
            raise ParseError(f"current must be positive, got {i_text}", lineno)
        if not (time > 0 and math.isfinite(time)):
            raise ParseError(f"fusing time must be positive, got {t_text}", lineno)
        events.append(FusingEvent(wire_id, material, position, current, time, lineno))
    return events


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def _check_header(cells, lineno):
    """A header naming the columns with other units is a unit error, anything else a parse error."""
    if cells[3].startswith("I0_") or cells[4].startswith("t_fuse_"):
        raise UnitError(f"columns must be in amps and seconds, got {cells[3]!r}, {cells[4]!r}", lineno)
    raise ParseError(f"unrecognised header {cells}", lineno)


@dataclass(frozen=True)
class FilteredSeries:
    currents: np.ndarray  # mean I0 per bin
    times: np.ndarray  # median t_p per bin
    counts: np.ndarray  # events per bin
    bins: int
    rule: str  # how the bin count was chosen

    def __len__(self):
        return len(self.currents)

    def metadata(self):
        return {"bins": self.bins, "bin_rule": self.rule, "bin_axis": "I0",
                "current_statistic": "mean", "time_statistic": "median"}


def histogram_filter(events, bins=None):
    """Bin events by current; emit (mean current, median time) per non-empty bin.

    ``bins=None`` uses the Freedman-Diaconis rule.  A fusing time that grows
    with current is suspicious, so it raises a warning but is kept.
    """
    I = np.array([e.current for e in events], dtype=float)
    t = np.array([e.time for e in events], dtype=float)
    if I.size == 0:
        return FilteredSeries(np.empty(0), np.empty(0), np.empty(0, dtype=int), 0, "empty")
    if bins is None:
        rule = "freedman-diaconis"
        edges = np.histogram_bin_edges(I, bins="fd")
    else:
        if bins < 2:
            raise ValueError("bins must be >= 2")
        rule = "fixed"
        edges = np.histogram_bin_edges(I, bins=int(bins))
    idx = np.clip(np.searchsorted(edges, I, side="right") - 1, 0, len(edges) - 2)
    cur, tim, cnt = [], [], []
    for b in range(len(edges) - 1):
        sel = idx == b
        if sel.any():
            cur.append(I[sel].mean())
            tim.append(float(np.median(t[sel])))
            cnt.append(int(sel.sum()))
    cur, tim = np.array(cur), np.array(tim)
    if np.any(np.diff(tim) > 0):
        warnings.warn("filtered fusing time increases with current in some bins", stacklevel=2)
    return FilteredSeries(cur, tim, np.array(cnt), len(edges) - 1, rule)


# --- capacity curves -------------------------------------------------------

@dataclass
class CapacityPoint:
    current: float
    temperature: float  # K at the mid-point; nan when the point failed
    status: str  # "ok", "not_converged", "above_range" or "failed: <reason>"
    T_we: float = math.nan
    chi_w: float = math.nan
    iterations: int = 0


@dataclass
class CapacityCurve:
    hold: float
    melting_point: float
    points: list

    @property
    def currents(self):
        return np.array([p.current for p in self.points])

    @property
    def temperatures(self):
        return np.array([p.temperature for p in self.points])

    def valid(self):
        return [p for p in self.points if p.status == "ok"]

    @property
    def crossing(self):
        """Current at which the mid-point reaches the melting point, or None.

        Linear inverse interpolation between the bracketing valid points.
        A point past the Kirchhoff vertex counts as above the melting point
        and bounds the crossing from above, without interpolation.
        """
        prev = None
        for p in self.points:
            if p.status == "above_range":
                return None if prev is None else math.nan
            if p.status != "ok":
                continue
            if p.temperature >= self.melting_point:
                if prev is None:
                    return None
                T0, T1 = prev.temperature, p.temperature
                return prev.current + (self.melting_point - T0) * (p.current - prev.current) / (T1 - T0)
            prev = p
        return None

    def crossing_bounds(self):
        """(lower, upper) current bracket of the melting crossing; None where unknown."""
        lo = hi = None
        for p in self.points:
            if p.status == "ok" and p.temperature < self.melting_point:
                lo = p.current
            elif p.status == "above_range" or (p.status == "ok" and p.temperature >= self.melting_point):
                hi = p.current
                break
        return lo, hi


def capacity_point(config, hold, current, start=None, tol=1e-4, max_iter=20):
    """Couple and evaluate the mid-point temperature for one current."""
    drive = Drive(current, hold)
    try:
        res = fixed_point(config, drive, tol=tol, max_iter=max_iter, start=start)
        T = midpoint_temperature(config, drive, res.state)
    except OutOfRange:
        return CapacityPoint(current, math.nan, "above_range"), None
    except BondheatError as exc:
        return CapacityPoint(current, math.nan, f"failed: {type(exc).__name__}"), None
    status = "ok" if res.converged else "not_converged"
    return CapacityPoint(current, T, status, res.state.T_we, res.state.chi_w, res.iterations), res.state


CAPACITY_MAX_ITER = 60


def capacity_curve(config, hold, currents, melting_point=None, tol=1e-4, max_iter=CAPACITY_MAX_ITER):
    """Mid-point temperature after ``hold`` seconds for each current.

    ``config`` is a :class:`ModelConfig` or :class:`RunConfig` (which supplies
    the tolerance).  Near the melting point the fixed point contracts slowly,
    hence the larger iteration budget than a single coupling run.  Points are
    solved in increasing current order, each warm-started from the previous
    converged coupling state.  Failed points are recorded, not raised.
    """
    if isinstance(config, RunConfig):
        melting_point = config.melting_point if melting_point is None else melting_point
        tol = config.coupling_tol
        config = config.model
    if melting_point is None:
        melting_point = MELTING_POINTS[config.wire.material]
    currents = np.asarray(currents, dtype=float)
    if currents.size == 0:
        raise ValueError("current grid is empty")
    order = np.argsort(currents, kind="stable")
    points = [None] * currents.size
    start = None
    for i in order:
        pt, state = capacity_point(config, hold, float(currents[i]), start, tol, max_iter)
        points[i] = pt
        if state is not None and pt.status == "ok":
            start = state
    return CapacityCurve(hold, melting_point, points)


def scan_to_melting(config, hold, step, i_max, melting_point=None, tol=1e-4,
                    max_iter=CAPACITY_MAX_ITER):
    """Capacity curve on the grid step, 2 step, ... that stops past the melting point.

    The returned curve ends with the first point at or above the melting
    point (or past the Kirchhoff vertex), so ``crossing`` is set whenever
    the crossing lies below ``i_max``.
    """
    if isinstance(config, RunConfig):
        melting_point = config.melting_point if melting_point is None else melting_point
        config = config.model
    if melting_point is None:
        melting_point = MELTING_POINTS[config.wire.material]
    if not step > 0:
        raise ValueError("step must be positive")
    points, start = [], None
    for k in range(1, int(math.floor(i_max / step + 1e-9)) + 1):
        pt, state = capacity_point(config, hold, k * step, start, tol, max_iter)
        points.append(pt)
        if state is not None and pt.status == "ok":
            start = state
        if pt.status == "above_range" or (pt.status == "ok" and pt.temperature >= melting_point):
            break
    return CapacityCurve(hold, melting_point, points)


def _header(fh, comments, timestamp):
    if timestamp:
        from datetime import datetime, timezone
        fh.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    for c in comments:
        fh.write(f"# {c}\n")


def write_capacity_csv(curve, fh, timestamp=True):
    cross = curve.crossing
    lo, hi = curve.crossing_bounds()
    _header(fh, [f"hold_s={curve.hold!r}", f"melting_point_K={curve.melting_point!r}",
                 f"crossing_A={'' if cross is None else repr(cross)}",
                 f"crossing_bracket_A={lo if lo is not None else ''},{hi if hi is not None else ''}"],
            timestamp)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["I0_A", "T_mid_K", "status", "T_we_K", "chi_w_K3", "iterations"])
    for p in curve.points:
        w.writerow([repr(p.current), repr(p.temperature), p.status, repr(p.T_we), repr(p.chi_w),
                    p.iterations])


def write_field_csv(fh, x, y, z, t, T, timestamp=True):
    """Field dump with columns x, y, z, t, T (SI units) for external plotting."""
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z, t, T)))
    _header(fh, ["units: m, m, m, s, K"], timestamp)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x_m", "y_m", "z_m", "t_s", "T_K"])
    for row in zip(*(a.ravel() for a in arrays)):
        w.writerow([repr(float(v)) for v in row])
