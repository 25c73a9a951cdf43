"""Ride matching and the in-slot fleet engine.

Requests are batched every few simulated minutes, sorted by how long their
passengers have been waiting, and inserted into vehicle plans at the cheapest
feasible pickup/dropoff positions (seat capacity, detour bound and an energy
reserve gate every candidate).  The same engine also answers the planning
question "who would transport where this slot" as a dry run: snapshot the
fleet, simulate the slot, count the transporting vehicles per region, restore
the snapshot bit for bit.

Vehicles move along cached shortest paths with fractional edge progress, so
energy equals driven distance exactly and a vehicle committed to an edge
finishes it before rerouting.
"""

from __future__ import annotations

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Sequence

from pvjtcs.model import CHARGING, IDLE, SERVING, GameParams, PvGroup, PvState
from pvjtcs.network import (
    RegionMap,
    RoadGraph,
    StationSet,
    UnreachableNodeError,
    nearest_station,
    shortest_path,
)

LOG = logging.getLogger(__name__)

PICKUP = "pickup"
DROPOFF = "dropoff"

WAITING = "waiting"
ASSIGNED = "assigned"
ONBOARD = "onboard"
SERVED = "served"


class EnergyUnderflowError(RuntimeError):
    """A vehicle was driven below zero energy; eligibility filtering failed."""


class SnapshotError(RuntimeError):
    """State after a dry run does not match the snapshot taken before it."""


@dataclass(frozen=True)
class TripRequest:
    id: int
    request_time: float
    earliest_start: float
    origin: int
    destination: int
    passengers: int
    direct_km: float = 0.0

    def __post_init__(self) -> None:
        if self.passengers < 1:
            raise ValueError(f"request {self.id}: passengers must be >= 1")
        if self.origin == self.destination:
            raise ValueError(f"request {self.id}: origin equals destination")
        if self.earliest_start < self.request_time:
            raise ValueError(f"request {self.id}: earliest start precedes request")


@dataclass(frozen=True)
class Stop:
    node: int
    action: str
    request_id: int


@dataclass
class VehiclePlan:
    stops: list[Stop] = field(default_factory=list)
    onboard: int = 0

    def copy(self) -> "VehiclePlan":
        return VehiclePlan(stops=list(self.stops), onboard=self.onboard)


@dataclass
class Vehicle(PvState):
    """One PV's core record extended with live plan and movement state."""

    plan: VehiclePlan = field(default_factory=VehiclePlan)
    # movement: committed edge (must be finished before rerouting) + route
    edge_head: int | None = None
    edge_progress: float = 0.0
    route: list[int] = field(default_factory=list)
    station_target: int | None = None

    def anchor(self) -> int:
        """Node all route planning starts from."""
        return self.edge_head if self.edge_head is not None else self.node


@dataclass
class RequestState:
    request: TripRequest
    status: str = WAITING
    vehicle: int | None = None
    pickup_time: float | None = None
    dropoff_time: float | None = None
    ride_km: float = 0.0


@dataclass
class FleetState:
    vehicles: list[Vehicle]
    requests: dict[int, RequestState]

    def vehicle(self, vid: int) -> Vehicle:
        return self.vehicles[vid]


@dataclass
class Snapshot:
    """Deep copy of the fleet/request state plus its fingerprint."""

    state: FleetState
    fingerprint: str


def fingerprint(state: FleetState) -> str:
    """Stable digest of every field that the simulation can mutate."""
    parts = []
    for v in state.vehicles:
        parts.append(
            (
                v.id,
                v.node,
                repr(v.energy),
                v.status,
                tuple((s.node, s.action, s.request_id) for s in v.plan.stops),
                v.plan.onboard,
                v.edge_head,
                repr(v.edge_progress),
                tuple(v.route),
                v.station_target,
            )
        )
    for rid in sorted(state.requests):
        rs = state.requests[rid]
        parts.append(
            (
                rid,
                rs.status,
                rs.vehicle,
                repr(rs.pickup_time),
                repr(rs.dropoff_time),
                repr(rs.ride_km),
            )
        )
    return hashlib.sha256(repr(parts).encode()).hexdigest()


def take_snapshot(state: FleetState) -> Snapshot:
    return Snapshot(state=copy.deepcopy(state), fingerprint=fingerprint(state))


def plan_distance(
    vehicle: Vehicle, stops: Sequence[Stop], graph: RoadGraph
) -> float:
    """km to execute ``stops`` from the vehicle's current position."""
    total = _edge_remainder(vehicle, graph)
    at = vehicle.anchor()
    for stop in stops:
        if stop.node != at:
            d, _ = shortest_path(graph, at, stop.node)
            total += d
            at = stop.node
    return total


def _edge_remainder(vehicle: Vehicle, graph: RoadGraph) -> float:
    if vehicle.edge_head is None:
        return 0.0
    return _edge_length(graph, vehicle.node, vehicle.edge_head) - vehicle.edge_progress


def _edge_length(graph: RoadGraph, u: int, v: int) -> float:
    for to, length in graph.adjacency[u]:
        if to == v:
            return length
    raise KeyError(f"no edge {u}->{v}")


def insertion_cost(
    vehicle: Vehicle,
    request: TripRequest,
    graph: RoadGraph,
    params: GameParams,
    requests: dict[int, RequestState],
    infinite_energy: bool = False,
) -> tuple[float, VehiclePlan] | None:
    """Cheapest feasible insertion of ``request`` into the vehicle's plan.

    Tries every pickup position i and dropoff position j >= i, keeping
    candidates that respect seat capacity at every prefix, the detour bound
    for every affected passenger, and the vehicle's energy reserve.  Returns
    the minimum added distance with the new plan, or None.
    """
    stops = vehicle.plan.stops
    base = plan_distance(vehicle, stops, graph)
    pick = Stop(node=request.origin, action=PICKUP, request_id=request.id)
    drop = Stop(node=request.destination, action=DROPOFF, request_id=request.id)

    best: tuple[float, VehiclePlan] | None = None
    for i in range(len(stops) + 1):
        for j in range(i, len(stops) + 1):
            cand = stops[:i] + [pick] + stops[i:j] + [drop] + stops[j:]
            if not _seats_ok(vehicle, cand, requests, params, request):
                continue
            total = plan_distance(vehicle, cand, graph)
            if not infinite_energy:
                if total * params.consume_rate > vehicle.energy - params.e_min:
                    continue
            if not _detours_ok(vehicle, cand, requests, params, graph, request):
                continue
            delta = total - base
            if best is None or delta < best[0] - 1e-12:
                best = (delta, VehiclePlan(stops=cand, onboard=vehicle.plan.onboard))
    return best


def _seats_ok(
    vehicle: Vehicle,
    stops: Sequence[Stop],
    requests: dict[int, RequestState],
    params: GameParams,
    new_request: TripRequest,
) -> bool:
    load = vehicle.plan.onboard
    for stop in stops:
        pax = (
            new_request.passengers
            if stop.request_id == new_request.id
            else requests[stop.request_id].request.passengers
        )
        load += pax if stop.action == PICKUP else -pax
        if load > params.seats:
            return False
    return True


def _detours_ok(
    vehicle: Vehicle,
    stops: Sequence[Stop],
    requests: dict[int, RequestState],
    params: GameParams,
    graph: RoadGraph,
    new_request: TripRequest,
) -> bool:
    # cumulative distance from the vehicle to each stop along the plan
    cum = []
    total = _edge_remainder(vehicle, graph)
    at = vehicle.anchor()
    for stop in stops:
        if stop.node != at:
            d, _ = shortest_path(graph, at, stop.node)
            total += d
            at = stop.node
        cum.append(total)

    pick_at: dict[int, float] = {}
    for idx, stop in enumerate(stops):
        if stop.action == PICKUP:
            pick_at[stop.request_id] = cum[idx]
            continue
        rid = stop.request_id
        if rid == new_request.id:
            req, ride_so_far = new_request, 0.0
        else:
            rs = requests[rid]
            req, ride_so_far = rs.request, rs.ride_km
        if rid in pick_at:
            on_vehicle = cum[idx] - pick_at[rid]  # not yet picked up
        else:
            on_vehicle = ride_so_far + cum[idx]  # already on board
        direct = max(req.direct_km, 1e-9)
        if on_vehicle > params.detour_max * direct + 1e-9:
            return False
    return True


def pci_assign(
    pending: Sequence[TripRequest],
    fleet: Sequence[Vehicle],
    graph: RoadGraph,
    params: GameParams,
    now: float,
    requests: dict[int, RequestState],
    infinite_energy: bool = False,
) -> tuple[list[tuple[int, int]], list[TripRequest]]:
    """Assign pending requests to vehicles, longest wait first.

    Each request goes to the fleet-wide minimum insertion cost (vehicle-id
    ties downward) or onto the returned waiting list.  Returns the
    (request id, vehicle id) assignments made.
    """
    order = sorted(pending, key=lambda r: (-(now - r.request_time), r.id))
    by_id = sorted(fleet, key=lambda v: v.id)
    assignments: list[tuple[int, int]] = []
    waiting: list[TripRequest] = []
    for request in order:
        best_vehicle = None
        best = None
        for veh in by_id:
            out = insertion_cost(
                veh, request, graph, params, requests, infinite_energy
            )
            if out is None:
                continue
            if best is None or out[0] < best[0] - 1e-12:
                best = out
                best_vehicle = veh
        if best_vehicle is None:
            waiting.append(request)
            continue
        best_vehicle.plan = best[1]
        best_vehicle.status = SERVING
        best_vehicle.route = []  # plan changed: reroute from the anchor
        rs = requests[request.id]
        rs.status = ASSIGNED
        rs.vehicle = best_vehicle.id
        assignments.append((request.id, best_vehicle.id))
    return assignments, waiting


def group_census(
    state: FleetState, region_map: RegionMap, params: GameParams
) -> list[PvGroup]:
    """Per-region counts: all vehicles, fully charged ones, group members."""
    n_regions = region_map.n_regions
    a = [0] * n_regions
    f = [0] * n_regions
    for veh in state.vehicles:
        region = region_map.region_of(veh.node)
        a[region] += 1
        if veh.energy > params.full_threshold:
            f[region] += 1
    return [
        PvGroup(region=i, m=a[i] - f[i], d=0, a=a[i], f=f[i])
        for i in range(n_regions)
    ]


@dataclass
class SlotStats:
    """What one slot execution did."""

    moved_km: float = 0.0
    consumed_kwh: float = 0.0
    charged_kwh: float = 0.0
    transporting_ids: set = field(default_factory=set)
    served_ids: list = field(default_factory=list)
    assignments: list = field(default_factory=list)
    chargers_short: int = 0  # assigned to charge but never reached a station


class FleetEngine:
    """Drives vehicles through slots; owns all mutable simulation state."""

    def __init__(
        self,
        graph: RoadGraph,
        region_map: RegionMap,
        stations: StationSet,
        requests: Sequence[TripRequest],
        params: GameParams,
        start_epoch: float,
        batch_minutes: float = 5.0,
    ):
        self.graph = graph
        self.region_map = region_map
        self.stations = stations
        self.params = params
        self.start_epoch = float(start_epoch)
        self.batch_seconds = batch_minutes * 60.0
        self.all_requests = sorted(requests, key=lambda r: (r.request_time, r.id))
        self.state: FleetState | None = None

    # -- state management ----------------------------------------------

    def reset(self, vehicles: list[Vehicle]) -> None:
        # deep copy: dry runs swap out the state wholesale, so caller-held
        # vehicle objects must not alias the live fleet
        self.state = FleetState(
            vehicles=sorted(copy.deepcopy(vehicles), key=lambda v: v.id),
            requests={r.id: RequestState(request=r) for r in self.all_requests},
        )

    def snapshot(self) -> Snapshot:
        return take_snapshot(self.state)

    def restore(self, snap: Snapshot) -> None:
        self.state = copy.deepcopy(snap.state)
        if fingerprint(self.state) != snap.fingerprint:
            raise SnapshotError("restored state does not match its snapshot")

    def slot_bounds(self, t: int) -> tuple[float, float]:
        seconds = self.params.slot_hours * 3600.0
        return self.start_epoch + t * seconds, self.start_epoch + (t + 1) * seconds

    def fleet_energy(self) -> float:
        return sum(v.energy for v in self.state.vehicles)

    # -- slot execution --------------------------------------------------

    def run_slot(
        self,
        t: int,
        pool_ids: set[int],
        charger_ids: set[int],
        infinite_energy: bool = False,
    ) -> SlotStats:
        """Serve the slot's requests with the pool while chargers head to
        stations; returns movement/energy/serving statistics."""
        if pool_ids & charger_ids:
            raise ValueError("a vehicle cannot both transport and charge")
        t0, t1 = self.slot_bounds(t)
        stats = SlotStats()
        state = self.state

        for vid in sorted(charger_ids):
            veh = state.vehicle(vid)
            if veh.plan.stops:
                raise ValueError(f"vehicle {vid} has passengers; cannot charge")
            try:
                station, dist = nearest_station(self.graph, veh.anchor(), self.stations)
            except UnreachableNodeError:
                LOG.warning("vehicle %d: no station reachable; holding idle", vid)
                veh.status = IDLE
                stats.chargers_short += 1
                continue
            if (
                not infinite_energy
                and dist * self.params.consume_rate > veh.energy
            ):
                # the reserve floors are meant to rule this out
                LOG.warning(
                    "vehicle %d: %.1f kwh cannot cover %.1f km to a station; "
                    "holding idle", vid, veh.energy, dist,
                )
                veh.status = IDLE
                stats.chargers_short += 1
                continue
            veh.status = CHARGING
            veh.station_target = station
            self._retarget(veh, station)

        for vid in sorted(pool_ids):
            veh = state.vehicle(vid)
            if veh.status == CHARGING:
                veh.status = SERVING if veh.plan.stops else IDLE
                veh.station_target = None
                if not veh.plan.stops and veh.edge_head is None:
                    veh.route = []

        n_batches = max(1, round((t1 - t0) / self.batch_seconds))
        for k in range(n_batches):
            b0 = t0 + k * self.batch_seconds
            b1 = min(b0 + self.batch_seconds, t1)
            pending = [
                rs.request
                for rs in self.state.requests.values()
                if rs.status == WAITING and rs.request.request_time <= b0
            ]
            if pending:
                pool = [
                    state.vehicle(vid)
                    for vid in sorted(pool_ids)
                    if infinite_energy
                    or state.vehicle(vid).energy >= self.params.slot_consumption
                ]
                assigned, _ = pci_assign(
                    pending,
                    pool,
                    self.graph,
                    self.params,
                    b0,
                    state.requests,
                    infinite_energy,
                )
                stats.assignments.extend(assigned)
            for veh in state.vehicles:
                self._advance(veh, b0, b1, stats, infinite_energy)

        for vid in sorted(charger_ids):
            veh = state.vehicle(vid)
            if veh.status != CHARGING:
                continue
            if veh.node == veh.station_target and veh.edge_head is None:
                gain = min(self.params.r, self.params.c - veh.energy)
                veh.energy += gain
                stats.charged_kwh += gain
            else:
                stats.chargers_short += 1

        for veh in state.vehicles:
            if veh.plan.stops:
                stats.transporting_ids.add(veh.id)
        return stats

    def end_slot(self) -> None:
        """Dissolve slot-scoped activity markers (charging targets)."""
        for veh in self.state.vehicles:
            if veh.status == CHARGING:
                veh.status = IDLE
                veh.station_target = None
                if veh.edge_head is None:
                    veh.route = []

    # -- dry runs ---------------------------------------------------------

    def dry_run_demand(
        self, t: int, eligible_ids: set[int], infinite_energy: bool = False
    ) -> tuple[list[int], list[int], int, SlotStats]:
        """Simulate the slot with every eligible vehicle serving; restore.

        Returns per-region transporting counts n, demands d = max(n - f, 0),
        their total, and the dry run's movement statistics.
        """
        before = self.snapshot()
        census = group_census(self.state, self.region_map, self.params)
        start_region = {
            v.id: self.region_map.region_of(v.node) for v in self.state.vehicles
        }
        stats = self.run_slot(t, eligible_ids, set(), infinite_energy)
        n = [0] * self.region_map.n_regions
        for vid in stats.transporting_ids:
            n[start_region[vid]] += 1
        self.restore(before)
        if fingerprint(self.state) != before.fingerprint:
            raise SnapshotError("dry run failed to restore the fleet state")
        d = [max(n[i] - census[i].f, 0) for i in range(len(n))]
        return n, d, sum(d), stats

    # -- movement ---------------------------------------------------------

    def _retarget(self, veh: Vehicle, target: int) -> None:
        anchor = veh.anchor()
        if anchor == target:
            veh.route = []
            return
        _, path = shortest_path(self.graph, anchor, target)
        veh.route = path[1:]

    def _advance(
        self,
        veh: Vehicle,
        b0: float,
        b1: float,
        stats: SlotStats,
        infinite_energy: bool,
    ) -> None:
        """Move one vehicle through the batch window, executing stops."""
        now = b0
        state = self.state
        while True:
            # charging vehicles just follow their route
            target_node = None
            if veh.status == CHARGING:
                target_node = veh.station_target
            elif veh.plan.stops:
                target_node = veh.plan.stops[0].node
            else:
                return

            at_target = veh.edge_head is None and veh.node == target_node
            if at_target:
                if veh.status == CHARGING:
                    return
                stop = veh.plan.stops[0]
                rs = state.requests[stop.request_id]
                if stop.action == PICKUP:
                    if now < rs.request.earliest_start:
                        if rs.request.earliest_start >= b1:
                            return  # wait through the batch boundary
                        now = rs.request.earliest_start
                    rs.status = ONBOARD
                    rs.pickup_time = max(now, rs.request.earliest_start)
                    veh.plan.onboard += rs.request.passengers
                else:
                    rs.status = SERVED
                    rs.dropoff_time = now
                    veh.plan.onboard -= rs.request.passengers
                    stats.served_ids.append(stop.request_id)
                veh.plan.stops.pop(0)
                stats.transporting_ids.add(veh.id)
                if not veh.plan.stops:
                    veh.status = IDLE
                    veh.route = []
                    return
                continue

            # ensure a route exists toward the target
            if veh.edge_head is None and not veh.route:
                self._retarget(veh, target_node)
                if not veh.route:
                    continue
            if veh.edge_head is None:
                veh.edge_head = veh.route.pop(0)
                veh.edge_progress = 0.0

            budget_km = (b1 - now) * self.params.speed / 3600.0
            if budget_km <= 1e-12:
                return
            edge_len = _edge_length(self.graph, veh.node, veh.edge_head)
            remaining = edge_len - veh.edge_progress
            step = min(budget_km, remaining)
            self._burn(veh, step, stats, infinite_energy)
            now += step * 3600.0 / self.params.speed
            if step >= remaining - 1e-12:
                veh.node = veh.edge_head
                veh.edge_head = None
                veh.edge_progress = 0.0
            else:
                veh.edge_progress += step
                return

    def _burn(
        self, veh: Vehicle, km: float, stats: SlotStats, infinite_energy: bool
    ) -> None:
        if km <= 0.0:
            return
        stats.moved_km += km
        cost = km * self.params.consume_rate
        stats.consumed_kwh += cost
        if not infinite_energy:
            veh.energy -= cost
            if veh.energy < -1e-9:
                raise EnergyUnderflowError(
                    f"vehicle {veh.id} fell to {veh.energy:.3f} kwh"
                )
            veh.energy = max(veh.energy, 0.0)
        if veh.status == SERVING:
            stats.transporting_ids.add(veh.id)
            for stop in veh.plan.stops:
                if stop.action == DROPOFF:
                    rs = self.state.requests[stop.request_id]
                    if rs.status == ONBOARD:
                        rs.ride_km += km
