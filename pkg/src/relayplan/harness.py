"""Command-line front end: single runs, baselines, parameter sweeps and position PMFs.

Every command writes plain header-first CSV files so that any figure can be
rebuilt from the output directory alone.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import planner
from .baselines import FerryError, data_ferry, gamma0_for_snr, static_relay
from .channel import link_models
from .queue import export_trace, packet_delay_replay
from .scenario import (ConfigError, ScenarioParams, _parse_value, _FIELD_TYPES, load_preset,
                       load_scenario)
from .tables import write_keyvalue, write_table
from .verify import verify_plan

log = logging.getLogger("relayplan")

SWEEP_KEYS = ("buffer_bits", "delay_req_slots", "ref_snr_db", "visibility_km")
SWEEP_HEADER = ("value", "objective_bps", "iterations", "mean_delay_slots", "mean_packet_delay", "status")
PACKET_BITS = 1e6

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# library-level helpers (importable, no I/O besides what they are asked to write)


def apply_sweep_value(p: ScenarioParams, key: str, value: float) -> ScenarioParams:
    """Scenario with one swept quantity replaced.

    A reference-SNR change on a calibrated scenario moves the fitted gamma0 by
    the same number of dB.
    """
    if key not in SWEEP_KEYS:
        raise UsageError(f"sweep key must be one of {', '.join(SWEEP_KEYS)}")
    if key == "ref_snr_db":
        if p.gamma0_override is None:
            return p.with_updates(ref_snr_db=value)
        return p.with_updates(ref_snr_db=value, gamma0_override=gamma0_for_snr(p, value))
    return p.with_updates(**{key: value})


def _failed(status):
    return {"objective_bps": math.nan, "iterations": 0, "mean_delay_slots": math.nan,
            "mean_packet_delay": math.nan, "status": status}


def run_point(p: ScenarioParams, mode: str, **opts) -> dict:
    """One optimization summarised as a sweep row; failures become a status string."""
    try:
        res = planner.optimize(p, mode=mode, **opts)
    except planner.SolverFailure as exc:
        return _failed(f"solver-failure: {exc}")
    except (ConfigError, planner.PlannerError, ValueError) as exc:
        return _failed(f"error: {exc}")
    stats = packet_delay_replay(res.plan, PACKET_BITS, p.slot_s)
    return {"objective_bps": res.objective_bps, "iterations": res.iterations,
            "mean_delay_slots": res.trace.avg_delay_slots, "mean_packet_delay": stats.mean,
            "status": "ok", "result": res}


def _sweep_worker(args):
    base, key, value, mode, opts, out_dir = args
    try:
        p = apply_sweep_value(base, key, value)
    except ConfigError as exc:
        return _failed(f"error: {exc}")
    row = run_point(p, mode, **opts)
    res = row.pop("result", None)
    if out_dir is not None and res is not None:
        planner.export_result(out_dir, res, p)
    return row


def sweep(p: ScenarioParams, key: str, values, mode: str = planner.DELAY_LIMITED, workers: int = 1,
          out_dir=None, **opts) -> list:
    """Independent optimizations over ``values`` of ``key``; one dict per value.

    Per-point products go to ``out_dir/point_<i>`` when an output directory is
    given. Results come back in input order whatever the worker count.
    """
    values = [float(v) for v in values]
    if not values:
        raise UsageError("no sweep values given")
    if key not in SWEEP_KEYS:
        raise UsageError(f"sweep key must be one of {', '.join(SWEEP_KEYS)}")
    jobs = []
    for i, v in enumerate(values):
        sub = None if out_dir is None else Path(out_dir) / f"point_{i:03d}"
        jobs.append((p, key, v, mode, opts, sub))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    else:
        rows = [_sweep_worker(j) for j in jobs]
    for v, row in zip(values, rows):
        row["value"] = v
    return rows


def bin_edges(length_m: float, width_m: float, lo: float, hi: float) -> np.ndarray:
    """Bin edges of ``width_m`` aligned so one bin is centred on the link midpoint."""
    if not width_m > 0:
        raise UsageError("bin width must be > 0")
    origin = length_m / 2.0 - width_m / 2.0
    k_lo = math.floor((min(lo, 0.0) - origin) / width_m)
    k_hi = math.ceil((max(hi, length_m) - origin) / width_m)
    if origin + k_hi * width_m <= max(hi, length_m):
        k_hi += 1
    return origin + width_m * np.arange(k_lo, k_hi + 1)


def position_pmf(traj, src, dst, width_m: float):
    """Fraction of slots 1..N spent in each along-axis bin.

    Positions are projected onto the source-destination axis; returns
    (edges, fractions) with ``len(edges) == len(fractions) + 1``.
    """
    src = np.asarray(src, dtype=float)[:2]
    dst = np.asarray(dst, dtype=float)[:2]
    length = float(np.linalg.norm(dst - src))
    unit = (dst - src) / length
    x = (np.asarray(traj.pos, dtype=float)[1:-1] - src) @ unit
    edges = bin_edges(length, width_m, float(x.min()), float(x.max()))
    counts = np.zeros(edges.size - 1)
    idx = np.searchsorted(edges, x, side="right") - 1
    np.add.at(counts, idx, 1.0)
    return edges, counts / x.size


def modal_bin(edges, fractions):
    k = int(np.argmax(fractions))
    return float(edges[k]), float(edges[k + 1])


# ---------------------------------------------------------------------------
# commands


def _scenario(args) -> ScenarioParams:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        p = load_scenario(args.config)
    elif args.preset:
        p = load_preset(args.preset)
    else:
        p = ScenarioParams()
    changes = {}
    for item in args.set or ():
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or key not in _FIELD_TYPES:
            raise ConfigError(f"--set expects key=value with a known key, got {item!r}")
        try:
            changes[key] = _parse_value(key, text)
        except ValueError as exc:
            raise ConfigError(f"--set {key}: {exc}") from None
    if getattr(args, "delay_req", None) is not None:
        changes["delay_req_slots"] = args.delay_req
    if getattr(args, "max_iters", None) is not None:
        changes["sca_max_iters"] = args.max_iters
    if getattr(args, "tol", None) is not None:
        changes["sca_tol"] = args.tol
    return p.with_updates(**changes) if changes else p


def _verified(p, traj, plan, fso, rf, delay_limited: bool) -> bool:
    rep = verify_plan(traj, plan, fso, rf, p.buffer_bits, p.slot_s, p.v_max, p.a_max,
                      p.delay_req_slots if delay_limited else None)
    if not rep.ok:
        log.warning("independent check: %s", rep)
    return rep.ok


def cmd_optimize(args) -> int:
    p = _scenario(args)
    fso, rf = link_models(p)
    mode = planner.normalize_mode(args.mode)
    try:
        res = planner.optimize(p, fso, rf, mode=mode, init=args.init)
    except planner.SolverFailure as exc:
        print(f"relayplan: {exc}", file=sys.stderr)
        if exc.partial is not None:
            planner.export_trajectory(Path(args.out) / "trajectory_partial.csv", exc.partial)
        return EXIT_SOLVER
    planner.export_result(args.out, res, p)
    ok = _verified(p, res.trajectory, res.plan, fso, rf, mode == planner.DELAY_LIMITED)
    items = planner.metrics_items(res, p) + [("verified", ok)]
    write_keyvalue(Path(args.out) / "metrics.csv", items)
    print(f"{mode}: {res.objective_bps:.6e} bps after {res.iterations} iterations")
    return EXIT_OK


def cmd_sweep(args) -> int:
    p = _scenario(args)
    values = _parse_values(args.values)
    if args.sweep_key is None:
        raise UsageError("--sweep-key is required")
    mode = planner.normalize_mode(args.mode)
    workers = args.workers if args.workers is not None else min(len(values), os.cpu_count() or 1)
    out = Path(args.out)
    rows = sweep(p, args.sweep_key, values, mode, workers, out_dir=out, init=args.init)
    write_table(out / "sweep.csv", SWEEP_HEADER, [[r[k] for k in SWEEP_HEADER] for r in rows])
    for r in rows:
        print(f"{args.sweep_key}={r['value']:g}: {r['objective_bps']:.6e} bps ({r['status']})")
    return EXIT_OK


def cmd_pmf(args) -> int:
    p = _scenario(args)
    traj = planner.load_trajectory(args.trajectory, p.altitude, p.slot_s)
    edges, frac = position_pmf(traj, p.src_pos, p.dst_pos, args.bin_width)
    rows = [(edges[k], edges[k + 1], frac[k]) for k in range(frac.size)]
    out = Path(args.out)
    write_table(out / "pmf.csv", ("bin_lo_m", "bin_hi_m", "fraction"), rows)
    lo, hi = modal_bin(edges, frac)
    print(f"modal bin [{lo:g}, {hi:g}) m holds {frac.max():.3f} of the flight time")
    return EXIT_OK


def cmd_baseline(args) -> int:
    if args.scheme not in ("static", "ferry"):
        raise UsageError(f"unknown scheme {args.scheme!r}; expected static or ferry")
    p = _scenario(args)
    fso, rf = link_models(p)
    out = Path(args.out)
    if args.scheme == "static":
        res = static_relay(p, fso, rf)
        plan, trace, traj = res.evaluation.plan, res.evaluation.trace, res.trajectory
        extra = [("x_s", res.x_s)]
        check_p = p.with_updates(buffer_bits=math.inf)
    else:
        res = data_ferry(p, fso, rf, args.d1, args.d2)
        plan, trace, traj = res.plan, res.trace, res.trajectory
        extra = [("d1_m", args.d1), ("d2_m", args.d2), ("load_point_m", res.load_point_m),
                 ("unload_point_m", res.unload_point_m), ("transit_slots", res.transit_slots),
                 ("silent_slots_per_leg", res.silent_slots_per_leg), ("full_cycles", res.full_cycles)]
        write_table(out / "cycles.csv", ("phase", "first_slot", "last_slot", "bits_in", "bits_out"),
                    [(ph.kind, ph.first_slot, ph.last_slot, ph.bits_in, ph.bits_out) for ph in res.phases])
        check_p = p
    stats = packet_delay_replay(plan, PACKET_BITS, p.slot_s)
    ok = _verified(check_p, traj, plan, fso, rf, False)
    planner.export_trajectory(out / "trajectory.csv", traj)
    export_trace(out / "queue_trace.csv", plan, trace)
    write_keyvalue(out / "metrics.csv", [("scheme", args.scheme), ("objective_bps", trace.throughput_bps)]
                   + extra + [("mean_delay_slots", trace.avg_delay_slots),
                              ("mean_packet_delay", stats.mean), ("verified", ok)])
    print(f"{args.scheme}: {trace.throughput_bps:.6e} bps")
    return EXIT_OK


def _parse_values(text):
    if text is None:
        raise UsageError("--values is required")
    parts = [t for t in text.replace(",", " ").split() if t]
    if not parts:
        raise UsageError("empty --values list")
    out = []
    for t in parts:
        try:
            out.append(math.inf if t.lower() in ("inf", "infinite", "unbounded") else float(t))
        except ValueError:
            raise UsageError(f"bad sweep value {t!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relayplan", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log SCA progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="scenario file with key=value lines")
        sp.add_argument("--preset", help="packaged scenario, e.g. 'calibrated'")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter")
        sp.add_argument("--seed", type=int, default=None, help="reserved; all runs are deterministic")
        if out:
            sp.add_argument("--out", default="out", help="output directory")

    def solver(sp):
        sp.add_argument("--mode", default=planner.DELAY_LIMITED, help="delay-limited or delay-tolerant")
        sp.add_argument("--delay-req", type=float, default=None, help="average delay limit [slots]")
        sp.add_argument("--max-iters", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--init", default="midpoint", choices=planner.INIT_MODES)

    sp = sub.add_parser("optimize", help="plan one trajectory")
    common(sp)
    solver(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("sweep", help="independent runs over one parameter")
    common(sp)
    solver(sp)
    sp.add_argument("--sweep-key", choices=SWEEP_KEYS)
    sp.add_argument("--values", help="comma-separated values; 'inf' allowed")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("pmf", help="position histogram of a trajectory file")
    sp.add_argument("trajectory")
    common(sp)
    sp.add_argument("--bin-width", type=float, default=300.0)
    sp.set_defaults(func=cmd_pmf)

    sp = sub.add_parser("baseline", help="static relay or data ferry")
    common(sp)
    sp.add_argument("--scheme", default="static")
    sp.add_argument("--d1", type=float, default=300.0)
    sp.add_argument("--d2", type=float, default=300.0)
    sp.add_argument("--delay-req", type=float, default=None, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_baseline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, UsageError, FerryError, planner.InitializationError) as exc:
        print(f"relayplan: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"relayplan: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
