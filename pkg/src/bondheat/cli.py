"""Command-line interface: ``python -m bondheat <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 convergence or solver failure,
4 a verification check outside its tolerance.
"""

import argparse
import contextlib
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import dataio, verify
from .coupling import fixed_point, write_trace
from .errors import BondheatError, NotConverged, ParseError
from .materials import Drive
from .optimizer import (FusingDataset, ModelMap, OptimizerOptions, error_split, optimize,
                        parameter_space)
from .units import parse_quantity
from .wire import effective_temperature_bound, solve_for_state, wire_temperature

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_BREACH = 0, 2, 3, 4

VERIFY_CURRENT = 3.7
VERIFY_DURATION = 0.5


def _quantity(text, dimension, unit):
    """A bare number is read in ``unit``; anything else needs a unit suffix."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return parse_quantity(text, dimension)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _typed(dimension, unit):
    f = lambda text: _quantity(text, dimension, unit)
    f.__name__ = f"{dimension} ({unit})"
    return f


def _probe(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("--probe expects 'y,t', e.g. '1.25 mm,0.5'")
    return _quantity(parts[0], "length", "m"), _quantity(parts[1], "time", "s")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--output", help="write the main result here instead of stdout")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the generation-time header so outputs are reproducible")

    p = argparse.ArgumentParser(prog="bondheat",
                                description="Analytic bond-wire heating model and parameter fitting.")
    sub = p.add_subparsers(dest="command", required=True)
    current = _typed("current", "A")
    duration = _typed("time", "s")

    s = sub.add_parser("simulate", parents=[common], help="wire temperature for one current pulse")
    s.add_argument("--current", type=current, required=True)
    s.add_argument("--duration", type=duration, required=True)
    view = s.add_mutually_exclusive_group()
    view.add_argument("--probe", type=_probe, metavar="y,t", help="temperature at one point (JSON)")
    view.add_argument("--grid", action="store_true", help="temperature on a y-t grid (CSV)")

    c = sub.add_parser("capacity", parents=[common], help="mid-point temperature against current")
    c.add_argument("--hold", type=duration, required=True)
    c.add_argument("--imin", type=current, required=True)
    c.add_argument("--imax", type=current, required=True)
    c.add_argument("--steps", type=int, required=True)

    k = sub.add_parser("couple", parents=[common], help="effective-constant fixed point (JSON)")
    k.add_argument("--current", type=current, required=True)
    k.add_argument("--duration", type=duration, required=True)
    k.add_argument("--trace", help="write the iteration trace as CSV")

    o = sub.add_parser("optimize", parents=[common], help="fit wire parameters to fusing events")
    o.add_argument("--events", required=True, help="fusing-event CSV")
    o.add_argument("--bins", type=int, required=True)
    o.add_argument("--hessian", choices=("gn", "full"))
    o.add_argument("--svd-threshold", type=float)

    v = sub.add_parser("verify", parents=[common], help="compare against the independent oracles")
    v.add_argument("--suite", choices=("wire", "compound", "all"), default="all")
    v.add_argument("--current", type=current, default=VERIFY_CURRENT)
    v.add_argument("--duration", type=duration, default=VERIFY_DURATION)
    return p


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(args, doc):
    if not args.no_timestamp:
        doc = {"generated": datetime.now(timezone.utc).isoformat(timespec="seconds"), **doc}
    with _sink(args.output) as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _couple(run, drive):
    return fixed_point(run.model, drive, tol=run.coupling_tol, max_iter=run.coupling_max_iter)


def _state_doc(run, drive, res):
    bound = effective_temperature_bound(run.wire, drive, run.model.constants, res.state.chi_w)
    return {
        "T_we_K": res.state.T_we,
        "chi_w_K3": res.state.chi_w,
        "iterations": res.iterations,
        "converged": res.converged,
        "residual_history": res.residual_history,
        "feasibility_margin_K": _finite(bound - res.state.T_we),
    }


def cmd_simulate(args, run):
    drive = Drive(args.current, args.duration)
    res = _couple(run, drive)
    sol = solve_for_state(run.model, drive, res.state)
    if args.grid:
        L = run.wire.length
        y = np.linspace(0.0, L, 41)
        t = np.linspace(0.0, drive.duration, 21)
        Y, Tt = np.meshgrid(y, t, indexing="ij")
        T = np.array([[wire_temperature(sol, yi, ti) for ti in t] for yi in y])
        with _sink(args.output) as fh:
            dataio.write_field_csv(fh, 0.0, Y, 0.0, Tt, T, timestamp=not args.no_timestamp)
    else:
        y, t = args.probe if args.probe else (run.wire.length / 2, drive.duration)
        if not (0 <= y <= run.wire.length and 0 <= t <= drive.duration):
            raise ValueError("probe point lies outside the wire or the pulse")
        T = float(wire_temperature(sol, y, t))
        _emit_json(args, {"current_A": drive.current, "duration_s": drive.duration,
                          "y_m": y, "t_s": t, "T_K": T, "T_degC": T - 273.15,
                          "coupling": _state_doc(run, drive, res)})
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_capacity(args, run):
    if args.steps < 1:
        raise ValueError("--steps must be >= 1")
    if args.imax < args.imin:
        raise ValueError("--imax must not be below --imin")
    currents = np.linspace(args.imin, args.imax, args.steps)
    curve = dataio.capacity_curve(run, args.hold, currents)
    with _sink(args.output) as fh:
        dataio.write_capacity_csv(curve, fh, timestamp=not args.no_timestamp)
    bad = [p for p in curve.points if p.status not in ("ok", "above_range")]
    return EXIT_CONVERGENCE if bad else EXIT_OK


def cmd_couple(args, run):
    drive = Drive(args.current, args.duration)
    res = _couple(run, drive)
    if args.trace:
        write_trace(res, args.trace)
    _emit_json(args, {"current_A": drive.current, "duration_s": drive.duration,
                      **_state_doc(run, drive, res),
                      "trace": [dict(zip(("iteration", "T_we_K", "chi_w_K3", "residual"), row))
                                for row in res.trace]})
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_optimize(args, run):
    if args.bins < 2:
        raise ValueError("--bins must be >= 2")
    events = dataio.load_events(args.events)
    material = run.wire.material
    events = [e for e in events if e.material == material]
    if not events:
        raise ValueError(f"no {material} events in {args.events}")
    series = dataio.histogram_filter(events, args.bins)
    dataset = FusingDataset.from_series(series, run.melting_point, material)
    fit = run.optimizer
    options = OptimizerOptions(hessian=args.hessian or fit.hessian,
                               svd_threshold=args.svd_threshold or fit.svd_threshold,
                               max_iter=fit.max_iter)
    space = parameter_space(run.model, run.melting_point)
    model_map = ModelMap(run.model, dataset, counts=fit.counts, tol=fit.coupling_tol)
    code = EXIT_OK
    try:
        p, report = optimize(space.nominal.copy(), dataset, model_map, space, options)
    except NotConverged as exc:
        p, report = exc.best
        code = EXIT_CONVERGENCE
    doc = report.to_dict()
    doc["histogram"] = {**series.metadata(), "pairs": [
        {"I0_A": float(i), "t_p_s": float(t), "events": int(n)}
        for i, t, n in zip(series.currents, series.times, series.counts)]}
    doc["error_split"] = {"nominal": error_split(model_map, space.nominal, dataset),
                          "fitted": error_split(model_map, p, dataset)}
    _emit_json(args, doc)
    return code


def cmd_verify(args, run):
    drive = Drive(args.current, args.duration)
    report = verify.run(run.model, drive, args.suite)
    _emit_json(args, {"current_A": drive.current, "duration_s": drive.duration, **report})
    return EXIT_OK if report["passed"] else EXIT_BREACH


COMMANDS = {"simulate": cmd_simulate, "capacity": cmd_capacity, "couple": cmd_couple,
            "optimize": cmd_optimize, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run = dataio.load_config(args.config)
        return COMMANDS[args.command](args, run)
    except (ParseError, ValueError, OSError) as exc:
        print(f"bondheat: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BondheatError as exc:
        print(f"bondheat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
