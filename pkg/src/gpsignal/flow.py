"""Traffic demand: periodic spawn rules over explicit routes."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, RouteError
from .network import Compass, RoadNetwork, Turn, lane_id


@dataclass(frozen=True)
class FlowRule:
    route: tuple[str, ...]
    start_time: float
    end_time: float
    interval: float

    def spawn_times(self, horizon: float | None = None) -> list[float]:
        """Scheduled spawn instants ``start + k*interval <= end`` (and ``< horizon`` if given)."""
        if self.end_time < self.start_time:
            return []
        # the tolerance absorbs float error in k*interval reaching end_time exactly
        upper = self.end_time if horizon is None else min(self.end_time, horizon)
        n = max(0, int(math.floor((upper - self.start_time) / self.interval + 1e-9)) + 1)
        times = [self.start_time + k * self.interval for k in range(n)]
        if horizon is not None:
            times = [t for t in times if t < horizon]
        return times


@dataclass(frozen=True)
class FlowSpec:
    rules: tuple[FlowRule, ...] = ()

    def __len__(self):
        return len(self.rules)

    def to_list(self) -> list[dict]:
        return [{"route": list(r.route), "startTime": r.start_time, "endTime": r.end_time,
                 "interval": r.interval} for r in self.rules]

    def dumps(self) -> str:
        return json.dumps(self.to_list(), indent=2) + "\n"


def validate_route(network: RoadNetwork, route) -> None:
    if not route:
        raise RouteError("empty route")
    for rid in route:
        if not network.has_road(rid):
            raise RouteError(f"route references unknown road {rid!r}")
    for a, b in zip(route, route[1:]):
        ra, rb = network.road(a), network.road(b)
        if ra.end != rb.start:
            raise RouteError(f"{b!r} does not start where {a!r} ends")
        if rb.end == ra.start:
            raise RouteError(f"U-turn from {a!r} to {b!r}")
        if not network.node(ra.end).virtual:
            network.turn_between(ra.end, a, b)


def lane_path(network: RoadNetwork, route) -> tuple[str, ...]:
    """Lane used on each road of ``route``: the lane of the turn taken at the road's end.

    Lanes ending at boundary nodes, and the last road of a route, use the through lane.
    """
    lanes = []
    for k, rid in enumerate(route):
        end = network.road(rid).end
        if k + 1 < len(route) and not network.node(end).virtual:
            turn = network.turn_between(end, rid, route[k + 1])
        else:
            turn = Turn.THROUGH
        lanes.append(lane_id(rid, turn))
    return tuple(lanes)


def flow_from_list(items, network: RoadNetwork | None = None) -> FlowSpec:
    if not isinstance(items, list):
        raise ParseError("flow document must be a JSON list")
    rules = []
    try:
        for item in items:
            rule = FlowRule(tuple(str(r) for r in item["route"]), float(item["startTime"]),
                            float(item["endTime"]), float(item["interval"]))
            if not rule.interval > 0:
                raise ParseError(f"interval must be positive, got {rule.interval}")
            if rule.start_time > rule.end_time:
                raise ParseError(f"startTime {rule.start_time} after endTime {rule.end_time}")
            rules.append(rule)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed flow rule: {exc!r}") from exc
    if network is not None:
        for rule in rules:
            validate_route(network, rule.route)
    return FlowSpec(tuple(rules))


def load_flow(path, network: RoadNetwork | None = None) -> FlowSpec:
    try:
        items = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return flow_from_list(items, network)


def _route_from(network: RoadNetwork, entry: str, turn_at: int | None, turn: Turn) -> tuple[str, ...]:
    route = [entry]
    hops = 0
    while True:
        node = network.road(route[-1]).end
        if network.node(node).virtual:
            return tuple(route)
        step = turn if hops == turn_at else Turn.THROUGH
        route.append(network.road_for_turn(node, route[-1], step))
        hops += 1


def generate_flow(network: RoadNetwork, duration: float = 3600.0,
                  intervals: dict | None = None, turn_ratios=(0.2, 0.6, 0.2),
                  seed: int = 0) -> FlowSpec:
    """Synthetic demand entering from every boundary road.

    ``intervals`` maps an approach name ("N", "E", "S", "W") to the mean
    headway in seconds of vehicles entering from that side; each entry road
    gets a through route plus one left- and one right-turning route that
    turn at a seeded intersection along the way.
    """
    intervals = {"N": 6.0, "E": 6.0, "S": 6.0, "W": 6.0} if intervals is None else intervals
    rng = random.Random(seed)
    rules = []
    for road in network.roads:
        if not network.node(road.start).virtual or network.node(road.end).virtual:
            continue
        approach = next(c for c, r in network.approaches(road.end).items() if r == road.id)
        headway = float(intervals[Compass(approach).name])
        straight = _route_from(network, road.id, None, Turn.THROUGH)
        n_nodes = len(straight) - 1
        for turn, share in zip(Turn, turn_ratios):
            if share <= 0:
                continue
            turn_at = None if turn is Turn.THROUGH else rng.randrange(n_nodes)
            interval = round(headway / share, 3)
            start = float(rng.randrange(max(1, int(interval))))
            route = _route_from(network, road.id, turn_at, turn)
            rules.append(FlowRule(route, start, float(duration), interval))
    return FlowSpec(tuple(rules))
