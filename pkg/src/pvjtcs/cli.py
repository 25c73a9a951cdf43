"""Command-line front end.

``pvjtcs run --config scenario.json`` simulates the joint scheme, the greedy
baseline or both, and writes summary.json, per-slot CSVs and the day-ahead
charging plan.  ``pvjtcs solve-vi`` and ``pvjtcs plan-charging`` expose the
equilibrium solver and the day-ahead program on handwritten JSON instances.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import os
import sys

import numpy as np

from pvjtcs import io_files
from pvjtcs.charging_scheduler import (
    ChargingInfeasibleError,
    DayAheadInputs,
    schedule_charging,
    write_plan_csv,
)
from pvjtcs.model import GameParams, PvGroup
from pvjtcs.projection import FeasibleSet, InfeasibleSetError, clamp_demand
from pvjtcs.simulator import JTCS, TGC, Scenario, plan_day_ahead, run_jtcs, run_tgc
from pvjtcs.vi_solver import SspmConvergenceError, kkt_verify, sspm_solve, write_trace_csv

LOG = logging.getLogger("pvjtcs")

CONFIG_DEFAULTS = {
    "nodes": "nodes.csv",
    "network": "network.csv",
    "stations": "stations.csv",
    "regions": "regions.csv",
    "trips": "trips.csv",
    "prices": "prices.csv",
    "fleet_size": 500,
    "slots": 24,
    "start_hour": 3,
    "seed": 1,
    "trip_filter_km": 2.0,
    "mode": "both",
    "batch_minutes": 5.0,
    "rollover_shortfall": False,
    "init_energy_range": [32.0, 41.0],
    "params": {},
}


def load_config(path: str) -> dict:
    with open(path) as handle:
        raw = json.load(handle)
    unknown = set(raw) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    config = dict(CONFIG_DEFAULTS)
    config.update(raw)
    base = os.path.dirname(os.path.abspath(path))
    for key in ("nodes", "network", "stations", "regions", "trips", "prices"):
        if not os.path.isabs(config[key]):
            config[key] = os.path.join(base, config[key])
    return config


def build_params(config: dict) -> GameParams:
    overrides = dict(config.get("params", {}))
    known = {f.name for f in dataclasses.fields(GameParams)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown parameter overrides: {sorted(unknown)}")
    overrides["J"] = int(config["fleet_size"])
    return GameParams(**overrides)


def build_scenario(config: dict) -> Scenario:
    params = build_params(config)
    graph = io_files.load_network(config["nodes"], config["network"])
    stations = io_files.load_stations(config["stations"], graph)
    regions = io_files.load_regions(config["regions"], graph)
    trips = io_files.load_trips(config["trips"], float(config["trip_filter_km"]), graph)
    T = int(config["slots"])
    prices = io_files.load_prices(config["prices"], T, int(config["start_hour"]))
    lo, hi = config["init_energy_range"]
    return Scenario(
        graph=graph,
        stations=stations,
        region_map=regions,
        requests=trips,
        prices=prices,
        params=params,
        T=T,
        seed=int(config["seed"]),
        start_epoch=float(config["start_hour"]) * 3600.0,
        batch_minutes=float(config["batch_minutes"]),
        init_energy_range=(float(lo), float(hi)),
        rollover_shortfall=bool(config["rollover_shortfall"]),
    )


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.mode:
        config["mode"] = args.mode
    if args.seed is not None:
        config["seed"] = args.seed
    if args.dump_config:
        print(json.dumps(config, indent=2, sort_keys=True))
        return 0
    mode = config["mode"]
    if mode not in (JTCS, TGC, "both"):
        raise ValueError(f"unknown mode {mode!r}")

    scenario = build_scenario(config)
    out_dir = args.out
    summaries = {}

    if mode in (JTCS, "both"):
        summary = run_jtcs(scenario, collect_traces=args.trace_vi)
        summaries[JTCS] = summary
        plan, inputs = plan_day_ahead(scenario)
        buf = io.StringIO()
        write_plan_csv(plan, inputs, buf)
        io_files.atomic_write(os.path.join(out_dir, "charging_plan.csv"), buf.getvalue())
        if args.trace_vi:
            for t, trace in summary.vi_traces.items():
                tbuf = io.StringIO()
                write_trace_csv(trace, tbuf)
                io_files.atomic_write(
                    os.path.join(out_dir, f"vi_trace_{t}.csv"), tbuf.getvalue()
                )
    if mode in (TGC, "both"):
        summaries[TGC] = run_tgc(scenario)

    for name, summary in summaries.items():
        io_files.atomic_write(
            os.path.join(out_dir, f"slots_{name}.csv"), io_files.slots_csv(summary)
        )
    io_files.atomic_write(
        os.path.join(out_dir, "summary.json"), io_files.summary_json(summaries)
    )

    for name, summary in summaries.items():
        price = (
            f"{summary.average_price:.3f} cents/kwh"
            if summary.average_price is not None
            else "n/a"
        )
        print(
            f"{name}: charged {summary.total_charged_kwh:.1f} kwh, "
            f"paid {summary.total_payment_cents:.1f} cents, "
            f"average price {price}, served {summary.served}, "
            f"waiting {summary.waiting}"
        )
    if len(summaries) == 2:
        j, g = summaries[JTCS], summaries[TGC]
        if j.average_price and g.average_price:
            rel = 100.0 * (1.0 - j.average_price / g.average_price)
            print(f"joint scheme average energy price is {rel:.2f}% below greedy")
    print(f"outputs written to {out_dir}")
    return 0


def cmd_solve_vi(args) -> int:
    with open(args.instance) as handle:
        doc = json.load(handle)
    params = GameParams(**doc.get("params", {}))
    m = [int(v) for v in doc["m"]]
    d = [int(v) for v in doc["d"]]
    groups = [PvGroup(region=i, m=m[i], d=d[i]) for i in range(len(m))]
    r = float(doc.get("r", params.r))
    fset = FeasibleSet(
        m=[float(v) for v in m],
        d_total=float(doc.get("d_total", sum(d))),
        e_plus=float(doc["e_plus"]),
        r=r,
    )
    fset, report = clamp_demand(fset)
    if report.clamped:
        LOG.warning(
            "charging demand clamped from %.6g to %.6g", report.original, report.adjusted
        )
    x, trace = sspm_solve(
        groups, fset, float(doc["price"]), params, x0=doc.get("x0")
    )
    kkt = kkt_verify(x, groups, fset, float(doc["price"]), params)
    print(f"x_star = {np.array2string(x, precision=6)}")
    print(f"iterations = {len(trace)}")
    print(f"final residual = {trace.residual_norms[-1]:.3e}")
    print(f"kkt worst residual = {kkt.worst():.3e}")
    if args.trace:
        with open(args.trace, "w") as handle:
            write_trace_csv(trace, handle)
        print(f"trace written to {args.trace}")
    return 0


def cmd_plan_charging(args) -> int:
    with open(args.inputs) as handle:
        doc = json.load(handle)
    params = GameParams(**doc.get("params", {}))
    inputs = DayAheadInputs(
        consumed=doc["consumed"],
        demand_counts=doc["demand_counts"],
        prices=doc["prices"],
        e_init=float(doc["e_init"]),
        params=params,
        terminal_reserve_kwh=doc.get("terminal_reserve_kwh"),
    )
    plan = schedule_charging(inputs)
    buf = io.StringIO()
    write_plan_csv(plan, inputs, buf)
    print(buf.getvalue(), end="")
    print(f"total cost = {plan.cost:.3f} cents")
    if args.out:
        io_files.atomic_write(args.out, buf.getvalue())
        print(f"plan written to {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvjtcs",
        description="Joint transportation and charging scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("--config", required=True, help="scenario config JSON")
    p_run.add_argument("--mode", choices=[JTCS, TGC, "both"], default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="pvjtcs_out", help="output directory")
    p_run.add_argument(
        "--trace-vi", action="store_true", help="write per-slot solver traces"
    )
    p_run.add_argument(
        "--dump-config", action="store_true", help="print effective config and exit"
    )
    p_run.set_defaults(func=cmd_run)

    p_vi = sub.add_parser("solve-vi", help="solve one slot game instance")
    p_vi.add_argument("--instance", required=True, help="instance JSON")
    p_vi.add_argument("--trace", default=None, help="write the trace CSV here")
    p_vi.set_defaults(func=cmd_solve_vi)

    p_plan = sub.add_parser("plan-charging", help="solve a day-ahead instance")
    p_plan.add_argument("--inputs", required=True, help="inputs JSON")
    p_plan.add_argument("--out", default=None, help="write the plan CSV here")
    p_plan.set_defaults(func=cmd_plan_charging)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        OSError,
        ValueError,
        KeyError,
        io_files.DataFormatError,
        ChargingInfeasibleError,
        InfeasibleSetError,
        SspmConvergenceError,
        json.JSONDecodeError,
    ) as err:
        LOG.error("%s", err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
