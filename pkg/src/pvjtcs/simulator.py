"""Day-long co-simulation of transportation and charging.

Two schemes over the same scenario:

* the joint scheme: a day-ahead program decides how much energy to buy each
  slot, and every slot the per-region game splits each group between serving
  and charging at the equilibrium ratio;
* the greedy baseline: everyone serves on demand and every idle unfully
  charged vehicle charges, whatever the price.

Both run on the same fleet engine and produce the same ledger and metrics,
so their energy bills and service levels are directly comparable.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from pvjtcs.charging_scheduler import DayAheadInputs, schedule_charging
from pvjtcs.model import GameParams, PriceCurve, PvGroup
from pvjtcs.network import RegionMap, RoadGraph, StationSet
from pvjtcs.projection import FeasibleSet, clamp_demand
from pvjtcs.transport_scheduler import (
    SERVED,
    FleetEngine,
    TripRequest,
    Vehicle,
    group_census,
)
from pvjtcs.vi_solver import SspmTrace, sspm_solve

JTCS = "jtcs"
TGC = "tgc"

LOG = logging.getLogger(__name__)


@dataclass
class Scenario:
    """Everything one simulation run needs, seeds included."""

    graph: RoadGraph
    stations: StationSet
    region_map: RegionMap
    requests: Sequence[TripRequest]
    prices: PriceCurve
    params: GameParams
    T: int
    seed: int = 0
    start_epoch: float = 3 * 3600.0
    batch_minutes: float = 5.0
    init_energy_range: tuple[float, float] = (32.0, 41.0)
    initial_energies: Sequence[float] | None = None
    start_nodes: Sequence[int] | None = None
    rollover_shortfall: bool = False

    def __post_init__(self) -> None:
        self.requests = sorted(self.requests, key=lambda r: (r.request_time, r.id))
        if len(self.prices) < self.T:
            raise ValueError(f"price curve has {len(self.prices)} slots, need {self.T}")
        horizon = self.start_epoch + self.T * self.params.slot_hours * 3600.0
        for r in self.requests:
            if not self.start_epoch <= r.request_time < horizon:
                raise ValueError(
                    f"request {r.id} at t={r.request_time} outside the simulated day"
                )
        lo, hi = self.init_energy_range
        if not 0.0 <= lo <= hi <= self.params.c:
            raise ValueError("initial energy range outside [0, battery capacity]")
        if self.initial_energies is not None and len(self.initial_energies) != self.params.J:
            raise ValueError("initial_energies length must equal fleet size J")
        if self.start_nodes is not None and len(self.start_nodes) != self.params.J:
            raise ValueError("start_nodes length must equal fleet size J")

    def build_fleet(self) -> list[Vehicle]:
        """Seeded initial fleet: positions and energies."""
        rng = random.Random(self.seed)
        nodes = self.graph.nodes
        J = self.params.J
        if self.start_nodes is not None:
            starts = [int(v) for v in self.start_nodes]
            if len(starts) != J:
                raise ValueError("start_nodes length must equal fleet size J")
        else:
            starts = [nodes[rng.randrange(len(nodes))] for _ in range(J)]
        lo, hi = self.init_energy_range
        if self.initial_energies is not None:
            energies = [float(e) for e in self.initial_energies]
            if len(energies) != J:
                raise ValueError("initial_energies length must equal fleet size J")
        else:
            energies = [rng.uniform(lo, hi) for _ in range(J)]
        return [
            Vehicle(id=i, node=starts[i], energy=energies[i]) for i in range(J)
        ]

    def engine(self) -> FleetEngine:
        return FleetEngine(
            graph=self.graph,
            region_map=self.region_map,
            stations=self.stations,
            requests=self.requests,
            params=self.params,
            start_epoch=self.start_epoch,
            batch_minutes=self.batch_minutes,
        )


@dataclass
class SlotMetrics:
    slot: int
    transport_pvs: int
    consumed_kwh: float
    charged_kwh: float
    payment_cents: float
    fleet_energy_kwh: float
    served: int
    waiting: int


@dataclass
class EnergyLedger:
    """Realized per-slot energy bookkeeping; the recursion is exact."""

    e_remaining: list[float] = field(default_factory=list)  # start-of-slot
    e_minus: list[float] = field(default_factory=list)
    e_plus: list[float] = field(default_factory=list)
    payments: list[float] = field(default_factory=list)

    def record(self, before: float, consumed: float, charged: float, price: float,
               after: float) -> None:
        drift = after - (before - consumed + charged)
        if abs(drift) > 1e-9:
            raise AssertionError(f"energy ledger does not balance: drift {drift:.3e}")
        self.e_remaining.append(before)
        self.e_minus.append(consumed)
        self.e_plus.append(charged)
        self.payments.append(price * charged)


@dataclass
class RunSummary:
    mode: str
    seed: int
    slots: list[SlotMetrics]
    ledger: EnergyLedger
    final_fleet_energy: float
    total_charged_kwh: float
    total_payment_cents: float
    average_price: float | None  # cents/kwh; None when nothing charged
    served: int
    waiting: int
    mean_trip_minutes: float | None
    mean_wait_minutes: float | None
    mean_travel_minutes: float | None
    planned_e_plus: list[float] | None = None
    clamp_shortfall_kwh: float = 0.0
    vi_iterations: list[int] = field(default_factory=list)
    vi_traces: dict[int, SspmTrace] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "total_charged_kwh": self.total_charged_kwh,
            "total_payment_cents": self.total_payment_cents,
            "average_price_cents_per_kwh": self.average_price,
            "served": self.served,
            "waiting": self.waiting,
            "mean_trip_minutes": self.mean_trip_minutes,
            "mean_wait_minutes": self.mean_wait_minutes,
            "mean_travel_minutes": self.mean_travel_minutes,
            "final_fleet_energy_kwh": self.final_fleet_energy,
            "clamp_shortfall_kwh": self.clamp_shortfall_kwh,
            "planned_e_plus": self.planned_e_plus,
            "vi_iterations": self.vi_iterations,
            "slots": [
                {
                    "slot": s.slot,
                    "transport_pvs": s.transport_pvs,
                    "consumed_kwh": s.consumed_kwh,
                    "charged_kwh": s.charged_kwh,
                    "payment_cents": s.payment_cents,
                    "fleet_energy_kwh": s.fleet_energy_kwh,
                    "served": s.served,
                    "waiting": s.waiting,
                }
                for s in self.slots
            ],
        }


def eligibility_filter(vehicles, params: GameParams) -> set[int]:
    """Transport-eligible ids: enough energy for a worst-case slot of driving."""
    floor = params.slot_consumption
    return {v.id for v in vehicles if v.energy >= floor}


def infinite_energy_dry_run(scenario: Scenario) -> tuple[list[float], list[int]]:
    """Serve the whole day with energy ignored: per-slot consumed kwh and
    transporting vehicle counts (the day-ahead demand signals)."""
    engine = scenario.engine()
    engine.reset(scenario.build_fleet())
    consumed: list[float] = []
    transports: list[int] = []
    all_ids = {v.id for v in engine.state.vehicles}
    for t in range(scenario.T):
        stats = engine.run_slot(t, all_ids, set(), infinite_energy=True)
        engine.end_slot()
        consumed.append(stats.consumed_kwh)
        transports.append(len(stats.transporting_ids))
    return consumed, transports


def plan_day_ahead(scenario: Scenario):
    """Algorithm step 1: dry-run the day, then price-optimize the charging."""
    consumed, transports = infinite_energy_dry_run(scenario)
    fleet = scenario.build_fleet()
    inputs = DayAheadInputs(
        consumed=consumed,
        demand_counts=transports,
        prices=[scenario.prices[t] for t in range(scenario.T)],
        e_init=sum(v.energy for v in fleet),
        params=scenario.params,
    )
    return schedule_charging(inputs), inputs


def _split_group(
    group: PvGroup,
    x_star: float,
    members: list,
) -> tuple[list[int], list[int]]:
    """Transportation/charging split of one group's members.

    The ceil(m*x) vehicles with the highest remaining energy transport;
    vehicles already carrying passengers are committed and counted first.
    If commitments exceed the quota, the charging side shrinks (logged by
    the caller through the returned sizes).
    """
    phi = math.ceil(group.m * x_star - 1e-12)
    busy = [v for v in members if v.plan.stops]
    idle = [v for v in members if not v.plan.stops]
    idle_by_energy = sorted(idle, key=lambda v: (-v.energy, v.id))
    transport = [v.id for v in busy]
    for v in idle_by_energy:
        if len(transport) >= phi:
            break
        transport.append(v.id)
    chargers = [v.id for v in idle_by_energy if v.id not in set(transport)]
    return transport, chargers


def run_jtcs(scenario: Scenario, collect_traces: bool = False) -> RunSummary:
    """The joint scheme: day-ahead charging plan + per-slot equilibrium."""
    plan, _ = plan_day_ahead(scenario)
    engine = scenario.engine()
    engine.reset(scenario.build_fleet())
    params = scenario.params
    ledger = EnergyLedger()
    slots: list[SlotMetrics] = []
    vi_iterations: list[int] = []
    vi_traces: dict[int, SspmTrace] = {}
    carry = 0.0

    for t in range(scenario.T):
        price = scenario.prices[t]
        census = group_census(engine.state, scenario.region_map, params)
        eligible = eligibility_filter(engine.state.vehicles, params)
        n, d, d_total, _ = engine.dry_run_demand(t, eligible)
        for g in census:
            g.n = n[g.region]
            g.d = d[g.region]

        game_groups = [g for g in census if g.m > 0]
        planned = plan.e_plus[t] + (carry if scenario.rollover_shortfall else 0.0)
        chargers: set[int] = set()
        x_by_region: dict[int, float] = {}

        if game_groups and planned > 1e-9:
            fset = FeasibleSet(
                m=[float(g.m) for g in game_groups],
                d_total=float(d_total),
                e_plus=planned,
                r=params.r,
            )
            fset, report = clamp_demand(fset)
            if report.clamped:
                LOG.debug(
                    "slot %d: charging demand clamped %.3f -> %.3f kwh",
                    t, report.original, report.adjusted,
                )
            x_star, trace = sspm_solve(game_groups, fset, price, params)
            vi_iterations.append(len(trace))
            if collect_traces:
                vi_traces[t] = trace
            x_by_region = {
                g.region: float(x_star[i]) for i, g in enumerate(game_groups)
            }
        else:
            # nothing to charge, or nobody unfully charged to do it: the
            # feasible set degenerates to everyone transporting
            vi_iterations.append(0)

        members_by_region: dict[int, list] = {g.region: [] for g in census}
        for veh in engine.state.vehicles:
            if veh.energy <= params.full_threshold:
                members_by_region[scenario.region_map.region_of(veh.node)].append(veh)
        for g in census:
            if g.m <= 0:
                continue
            x_val = x_by_region.get(g.region, 1.0)  # no-charging slots transport
            _, group_charge = _split_group(g, x_val, members_by_region[g.region])
            chargers.update(group_charge)

        pool = {v.id for v in engine.state.vehicles} - chargers
        before = engine.fleet_energy()
        stats = engine.run_slot(t, pool, chargers)
        engine.end_slot()
        after = engine.fleet_energy()
        ledger.record(before, stats.consumed_kwh, stats.charged_kwh, price, after)
        slots.append(
            _slot_metrics(engine, scenario, t, stats, price, after)
        )

        # realized charge can trail the plan (clamping, the ceil split,
        # vehicles committed to passengers); never reconciled unless the
        # rollover knob is on
        carry = max(0.0, planned - stats.charged_kwh)
        if carry > 1e-9:
            LOG.debug("slot %d: charged %.3f of planned %.3f kwh",
                      t, stats.charged_kwh, planned)

    summary = _summarize(JTCS, scenario, engine, ledger, slots)
    summary.planned_e_plus = list(plan.e_plus)
    summary.clamp_shortfall_kwh = max(
        0.0, sum(plan.e_plus) - summary.total_charged_kwh
    )
    summary.vi_iterations = vi_iterations
    summary.vi_traces = vi_traces
    return summary


def run_tgc(scenario: Scenario) -> RunSummary:
    """Greedy baseline: serve first, then charge every idle unfull vehicle."""
    engine = scenario.engine()
    engine.reset(scenario.build_fleet())
    params = scenario.params
    ledger = EnergyLedger()
    slots: list[SlotMetrics] = []

    for t in range(scenario.T):
        price = scenario.prices[t]
        eligible = eligibility_filter(engine.state.vehicles, params)
        _, _, _, dry_stats = engine.dry_run_demand(t, eligible)
        moving = dry_stats.transporting_ids
        chargers = {
            v.id
            for v in engine.state.vehicles
            if v.energy <= params.full_threshold
            and v.id not in moving
            and not v.plan.stops
        }
        pool = {v.id for v in engine.state.vehicles} - chargers

        before = engine.fleet_energy()
        stats = engine.run_slot(t, pool, chargers)
        engine.end_slot()
        after = engine.fleet_energy()
        ledger.record(before, stats.consumed_kwh, stats.charged_kwh, price, after)
        slots.append(
            _slot_metrics(engine, scenario, t, stats, price, after)
        )

    return _summarize(TGC, scenario, engine, ledger, slots)


def _slot_metrics(engine, scenario, t, stats, price, fleet_energy) -> SlotMetrics:
    _, slot_end = engine.slot_bounds(t)
    served = 0
    waiting = 0
    for rs in engine.state.requests.values():
        if rs.status == SERVED:
            served += 1
        elif rs.request.request_time < slot_end:
            waiting += 1
    return SlotMetrics(
        slot=t,
        transport_pvs=len(stats.transporting_ids),
        consumed_kwh=stats.consumed_kwh,
        charged_kwh=stats.charged_kwh,
        payment_cents=price * stats.charged_kwh,
        fleet_energy_kwh=fleet_energy,
        served=served,
        waiting=waiting,
    )


def _summarize(mode, scenario, engine, ledger, slots) -> RunSummary:
    served_states = [
        rs for rs in engine.state.requests.values() if rs.status == SERVED
    ]
    waits = [
        (rs.pickup_time - rs.request.request_time) / 60.0 for rs in served_states
    ]
    travels = [(rs.dropoff_time - rs.pickup_time) / 60.0 for rs in served_states]
    trips = [
        (rs.dropoff_time - rs.request.request_time) / 60.0 for rs in served_states
    ]
    total_charged = sum(ledger.e_plus)
    total_payment = sum(ledger.payments)
    return RunSummary(
        mode=mode,
        seed=scenario.seed,
        slots=slots,
        ledger=ledger,
        final_fleet_energy=engine.fleet_energy(),
        total_charged_kwh=total_charged,
        total_payment_cents=total_payment,
        average_price=(total_payment / total_charged) if total_charged > 0 else None,
        served=len(served_states),
        waiting=len(engine.state.requests) - len(served_states),
        mean_trip_minutes=(sum(trips) / len(trips)) if trips else None,
        mean_wait_minutes=(sum(waits) / len(waits)) if waits else None,
        mean_travel_minutes=(sum(travels) / len(travels)) if travels else None,
    )
