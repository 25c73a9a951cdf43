"""CSV ingestion and result export.

File formats (all CSV with a header row):

* nodes.csv:    id,lon,lat
* network.csv:  from_id,to_id,length_km   (directed; two rows for two-way)
* stations.csv: node_id
* regions.csv:  node_id,region_id
* trips.csv:    id,request_time,earliest_start,origin_lon,origin_lat,
                dest_lon,dest_lat,passengers
* prices.csv:   hour,price_cents_per_kwh
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from typing import Sequence

from pvjtcs.model import PriceCurve
from pvjtcs.network import RegionMap, RoadGraph, StationSet, shortest_path
from pvjtcs.simulator import RunSummary
from pvjtcs.transport_scheduler import TripRequest

LOG = logging.getLogger(__name__)


class DataFormatError(ValueError):
    """A data file failed to parse; the message carries file and line."""


def _rows(path: str, expected_header: Sequence[str]):
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise DataFormatError(f"{path}: {err}") from err
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != list(expected_header):
            raise DataFormatError(
                f"{path}: header {header} does not match {list(expected_header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            yield lineno, row


def load_network(nodes_path: str, edges_path: str) -> RoadGraph:
    """Parse node coordinates and directed edges; demand strong connectivity."""
    nodes: dict[int, tuple[float, float]] = {}
    for lineno, row in _rows(nodes_path, ["id", "lon", "lat"]):
        try:
            nodes[int(row[0])] = (float(row[1]), float(row[2]))
        except (ValueError, IndexError) as err:
            raise DataFormatError(f"{nodes_path}:{lineno}: {err}") from None
    edges: list[tuple[int, int, float]] = []
    for lineno, row in _rows(edges_path, ["from_id", "to_id", "length_km"]):
        try:
            edges.append((int(row[0]), int(row[1]), float(row[2])))
        except (ValueError, IndexError) as err:
            raise DataFormatError(f"{edges_path}:{lineno}: {err}") from None
    try:
        graph = RoadGraph.from_edges(nodes, edges)
    except ValueError as err:
        raise DataFormatError(f"{edges_path}: {err}") from None
    orphans = graph.orphan_nodes()
    if orphans:
        raise DataFormatError(
            f"{edges_path}: service component disconnected; orphan nodes "
            f"{orphans[:20]}{'...' if len(orphans) > 20 else ''}"
        )
    return graph


def load_stations(path: str, graph: RoadGraph) -> StationSet:
    ids = []
    for lineno, row in _rows(path, ["node_id"]):
        try:
            ids.append(int(row[0]))
        except ValueError as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from None
    try:
        stations = StationSet(ids)
        stations.validate_against(graph)
    except ValueError as err:
        raise DataFormatError(f"{path}: {err}") from None
    return stations


def load_regions(path: str, graph: RoadGraph) -> RegionMap:
    mapping: dict[int, int] = {}
    for lineno, row in _rows(path, ["node_id", "region_id"]):
        try:
            mapping[int(row[0])] = int(row[1])
        except (ValueError, IndexError) as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from None
    try:
        regions = RegionMap(mapping)
        regions.validate_against(graph)
    except ValueError as err:
        raise DataFormatError(f"{path}: {err}") from None
    return regions


def nearest_node(graph: RoadGraph, lon: float, lat: float) -> int:
    """Euclidean snap in coordinate space; ties to the smaller id."""
    best, best_d = None, None
    for nid in graph.nodes:
        x, y = graph.coords[nid]
        d = (x - lon) ** 2 + (y - lat) ** 2
        if best_d is None or d < best_d:
            best, best_d = nid, d
    return best


def load_trips(path: str, filter_km: float, graph: RoadGraph) -> list[TripRequest]:
    """Parse trips, snap endpoints to graph nodes, drop short trips.

    Unparseable rows are skipped with a logged count; a file with no usable
    rows is an error.
    """
    header = [
        "id",
        "request_time",
        "earliest_start",
        "origin_lon",
        "origin_lat",
        "dest_lon",
        "dest_lat",
        "passengers",
    ]
    trips: list[TripRequest] = []
    bad = 0
    total = 0
    dropped_short = 0
    for lineno, row in _rows(path, header):
        total += 1
        try:
            rid = int(row[0])
            t_req = float(row[1])
            t_earliest = float(row[2])
            origin = nearest_node(graph, float(row[3]), float(row[4]))
            dest = nearest_node(graph, float(row[5]), float(row[6]))
            passengers = int(row[7])
            if origin == dest:
                dropped_short += 1
                continue
            direct, _ = shortest_path(graph, origin, dest)
            if direct < filter_km:
                dropped_short += 1
                continue
            trips.append(
                TripRequest(
                    id=rid,
                    request_time=t_req,
                    earliest_start=t_earliest,
                    origin=origin,
                    destination=dest,
                    passengers=passengers,
                    direct_km=direct,
                )
            )
        except (ValueError, IndexError):
            bad += 1
            LOG.warning("%s:%d: skipping unparseable trip row", path, lineno)
    if bad:
        LOG.warning("%s: skipped %d unparseable rows", path, bad)
    if total == 0 or (bad == total):
        raise DataFormatError(f"{path}: no usable trip rows")
    trips.sort(key=lambda r: (r.request_time, r.id))
    return trips


def load_prices(path: str, T: int, start_hour: int) -> PriceCurve:
    """Hourly prices aligned so slot 0 carries the start hour's price."""
    by_hour: dict[int, float] = {}
    n_rows = 0
    for lineno, row in _rows(path, ["hour", "price_cents_per_kwh"]):
        n_rows += 1
        try:
            hour = int(row[0])
            price = float(row[1])
        except (ValueError, IndexError) as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from None
        if price < 0.0:
            raise DataFormatError(f"{path}:{lineno}: negative price {price}")
        by_hour[hour] = price
    if n_rows < T:
        raise DataFormatError(f"{path}: {n_rows} rows, need at least {T}")
    prices = []
    for t in range(T):
        hour = (start_hour + t) % 24
        if hour not in by_hour:
            raise DataFormatError(f"{path}: missing price for hour {hour}")
        prices.append(by_hour[hour])
    return PriceCurve(prices)


def atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def slots_csv(summary: RunSummary) -> str:
    lines = [
        "slot,transport_pvs,consumed_kwh,charged_kwh,payment_cents,"
        "fleet_energy_kwh,served,waiting"
    ]
    for s in summary.slots:
        lines.append(
            f"{s.slot},{s.transport_pvs},{s.consumed_kwh!r},{s.charged_kwh!r},"
            f"{s.payment_cents!r},{s.fleet_energy_kwh!r},{s.served},{s.waiting}"
        )
    return "\n".join(lines) + "\n"


def summary_json(summaries: dict[str, RunSummary]) -> str:
    doc = {mode: s.to_dict() for mode, s in summaries.items()}
    if "jtcs" in summaries and "tgc" in summaries:
        j, g = summaries["jtcs"], summaries["tgc"]
        doc["comparison"] = {
            "average_price_ratio": (
                j.average_price / g.average_price
                if j.average_price and g.average_price
                else None
            ),
            "charged_kwh_jtcs_minus_tgc": j.total_charged_kwh - g.total_charged_kwh,
            "payment_cents_jtcs_minus_tgc": (
                j.total_payment_cents - g.total_payment_cents
            ),
            "served_jtcs": j.served,
            "served_tgc": g.served,
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
