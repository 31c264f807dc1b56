"""Road network model: intersections, roads, lanes, movements and phases.

Every road carries exactly three lanes ordered ``[left, through, right]``;
lane ids follow the ``<road>_<k>`` convention with ``k`` the lane index.
Signalized intersections are four-way; boundary ("virtual") intersections
are unsignalized pass-throughs where vehicles enter and leave the network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from pathlib import Path

from .errors import GeometryError, ParseError, RouteError, ValidationError

JAM_SPACING = 7.5  # metres per queued vehicle
LANES_PER_ROAD = 3


class Turn(IntEnum):
    LEFT = 0
    THROUGH = 1
    RIGHT = 2


class Compass(IntEnum):
    """Clockwise compass order; an approach is named by where traffic comes from."""

    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def opposite(self) -> "Compass":
        return Compass((self + 2) % 4)


# phase id -> ((approach, turn) of l1, (approach, turn) of l2)
PHASE_TABLE: dict[int, tuple[tuple[Compass, Turn], tuple[Compass, Turn]]] = {
    1: ((Compass.N, Turn.THROUGH), (Compass.S, Turn.THROUGH)),
    2: ((Compass.E, Turn.THROUGH), (Compass.W, Turn.THROUGH)),
    3: ((Compass.N, Turn.LEFT), (Compass.S, Turn.LEFT)),
    4: ((Compass.E, Turn.LEFT), (Compass.W, Turn.LEFT)),
    5: ((Compass.N, Turn.THROUGH), (Compass.N, Turn.LEFT)),
    6: ((Compass.S, Turn.THROUGH), (Compass.S, Turn.LEFT)),
    7: ((Compass.E, Turn.THROUGH), (Compass.E, Turn.LEFT)),
    8: ((Compass.W, Turn.THROUGH), (Compass.W, Turn.LEFT)),
}
PHASE_IDS = tuple(PHASE_TABLE)


def lane_capacity(length: float) -> int:
    return max(1, math.floor(length / JAM_SPACING))


def lane_id(road: str, turn: Turn) -> str:
    return f"{road}_{int(turn)}"


def exit_direction(approach: Compass, turn: Turn) -> Compass:
    """Compass direction of the outgoing road for ``turn`` from ``approach`` (right-hand traffic)."""
    heading = approach.opposite
    return Compass((heading + (int(turn) - 1)) % 4)


@dataclass(frozen=True)
class Intersection:
    id: str
    x: float
    y: float
    roads: tuple[str, ...]
    virtual: bool


@dataclass(frozen=True)
class Road:
    id: str
    start: str
    end: str
    length: float
    max_speed: float
    lanes: int = LANES_PER_ROAD


@dataclass(frozen=True)
class Lane:
    id: str
    road: str
    turn: Turn
    length: float
    free_flow_speed: float
    capacity: int


@dataclass(frozen=True)
class Movement:
    from_lane: str
    to_lane: str
    turn: Turn


@dataclass(frozen=True)
class PhaseDef:
    id: int
    incoming: tuple[str, str]
    movements: tuple[Movement, ...]

    @property
    def feature_lanes(self) -> tuple[str, ...]:
        """The eight lanes read for this phase: l1, l2, then l1's and l2's downstream lanes."""
        l1, l2 = self.incoming
        down1 = [m.to_lane for m in self.movements if m.from_lane == l1]
        down2 = [m.to_lane for m in self.movements if m.from_lane == l2]
        return (l1, l2, *down1, *down2)


class RoadNetwork:
    """Immutable road network.

    Construction validates reference integrity and the four-way shape of
    signalized intersections; compass geometry is resolved lazily and
    raises :class:`GeometryError` when an approach is missing.
    """

    def __init__(self, intersections, roads):
        self.intersections: tuple[Intersection, ...] = tuple(intersections)
        self.roads: tuple[Road, ...] = tuple(roads)
        self._nodes = {}
        for node in self.intersections:
            if node.id in self._nodes:
                raise ValidationError(f"duplicate intersection id {node.id!r}")
            self._nodes[node.id] = node
        self._roads = {}
        for road in self.roads:
            if road.id in self._roads:
                raise ValidationError(f"duplicate road id {road.id!r}")
            self._roads[road.id] = road
        self._validate()
        self.lanes: dict[str, Lane] = {}
        for road in self.roads:
            for turn in Turn:
                lid = lane_id(road.id, turn)
                self.lanes[lid] = Lane(lid, road.id, turn, road.length, road.max_speed,
                                       lane_capacity(road.length))
        self._phase_cache: dict[str, list[PhaseDef]] = {}

    def _validate(self) -> None:
        incoming = {n: [] for n in self._nodes}
        outgoing = {n: [] for n in self._nodes}
        for road in self.roads:
            for end in (road.start, road.end):
                if end not in self._nodes:
                    raise ValidationError(f"road {road.id!r} references unknown intersection {end!r}")
            if road.start == road.end:
                raise ValidationError(f"road {road.id!r} starts and ends at {road.start!r}")
            if road.lanes != LANES_PER_ROAD:
                raise ValidationError(f"road {road.id!r} has {road.lanes} lanes, expected {LANES_PER_ROAD}")
            if not road.length > 0 or not road.max_speed > 0:
                raise ValidationError(f"road {road.id!r} needs positive length and maxSpeed")
            outgoing[road.start].append(road.id)
            incoming[road.end].append(road.id)
        for node in self.intersections:
            for rid in node.roads:
                if rid not in self._roads:
                    raise ValidationError(f"intersection {node.id!r} references unknown road {rid!r}")
            if not node.virtual and (len(incoming[node.id]) != 4 or len(outgoing[node.id]) != 4):
                raise ValidationError(
                    f"signalized intersection {node.id!r} has {len(incoming[node.id])} incoming and "
                    f"{len(outgoing[node.id])} outgoing roads, expected 4 and 4")
        self._incoming = incoming
        self._outgoing = outgoing

    # -- lookups -----------------------------------------------------------

    def node(self, node_id: str) -> Intersection:
        return self._nodes[node_id]

    def road(self, road_id: str) -> Road:
        return self._roads[road_id]

    def has_road(self, road_id: str) -> bool:
        return road_id in self._roads

    @cached_property
    def signalized(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.intersections if not n.virtual)

    def incoming_roads(self, node_id: str) -> list[str]:
        return list(self._incoming[node_id])

    def outgoing_roads(self, node_id: str) -> list[str]:
        return list(self._outgoing[node_id])

    def _direction(self, origin: str, other: str) -> Compass:
        a, b = self._nodes[origin], self._nodes[other]
        dx, dy = b.x - a.x, b.y - a.y
        if dx == 0 and dy == 0:
            raise GeometryError(f"intersections {origin!r} and {other!r} share a location")
        if abs(dy) >= abs(dx):
            return Compass.N if dy > 0 else Compass.S
        return Compass.E if dx > 0 else Compass.W

    def approaches(self, node_id: str) -> dict[Compass, str]:
        """Incoming road per approach, keyed by the side traffic arrives from."""
        return self._compass_map(node_id, self._incoming[node_id], "start")

    def exits(self, node_id: str) -> dict[Compass, str]:
        """Outgoing road per compass direction of travel."""
        return self._compass_map(node_id, self._outgoing[node_id], "end")

    def _compass_map(self, node_id, road_ids, far_end) -> dict[Compass, str]:
        out: dict[Compass, str] = {}
        for rid in road_ids:
            d = self._direction(node_id, getattr(self._roads[rid], far_end))
            if d in out:
                raise GeometryError(f"intersection {node_id!r} has two roads on side {d.name}")
            out[d] = rid
        missing = [c.name for c in Compass if c not in out]
        if missing:
            raise GeometryError(f"intersection {node_id!r} lacks approaches {missing}")
        return out

    def turn_between(self, node_id: str, in_road: str, out_road: str) -> Turn:
        """Turn taken at signalized ``node_id`` going from ``in_road`` to ``out_road``."""
        approach = {r: c for c, r in self.approaches(node_id).items()}[in_road]
        direction = {r: c for c, r in self.exits(node_id).items()}[out_road]
        for turn in Turn:
            if exit_direction(approach, turn) == direction:
                return turn
        raise RouteError(f"U-turn at {node_id!r} from {in_road!r} to {out_road!r}")

    def road_for_turn(self, node_id: str, in_road: str, turn: Turn) -> str:
        approach = {r: c for c, r in self.approaches(node_id).items()}[in_road]
        return self.exits(node_id)[exit_direction(approach, turn)]

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "intersections": [
                {"id": n.id, "point": {"x": n.x, "y": n.y}, "roads": list(n.roads), "virtual": n.virtual}
                for n in self.intersections
            ],
            "roads": [
                {"id": r.id, "startIntersection": r.start, "endIntersection": r.end,
                 "length": r.length, "maxSpeed": r.max_speed, "lanes": r.lanes}
                for r in self.roads
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def __eq__(self, other):
        return isinstance(other, RoadNetwork) and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def _polyline_length(points) -> float:
    return sum(math.dist((p["x"], p["y"]), (q["x"], q["y"])) for p, q in zip(points, points[1:]))


def roadnet_from_dict(doc) -> RoadNetwork:
    """Build a network from a roadnet document.

    Besides the compact schema this accepts the common CityFlow variants
    where ``lanes`` is a list of lane objects and ``length``/``maxSpeed``
    must be derived from ``points`` and the lane entries.
    """
    try:
        nodes = []
        for item in doc["intersections"]:
            pt = item["point"]
            nodes.append(Intersection(str(item["id"]), float(pt["x"]), float(pt["y"]),
                                      tuple(str(r) for r in item.get("roads", ())),
                                      bool(item.get("virtual", False))))
        roads = []
        for item in doc["roads"]:
            lanes = item.get("lanes", LANES_PER_ROAD)
            speed = item.get("maxSpeed")
            if isinstance(lanes, list):
                if speed is None and lanes:
                    speed = max(float(lane["maxSpeed"]) for lane in lanes)
                lanes = len(lanes)
            length = item.get("length")
            if length is None:
                length = _polyline_length(item["points"])
            roads.append(Road(str(item["id"]), str(item["startIntersection"]),
                              str(item["endIntersection"]), float(length), float(speed), int(lanes)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed roadnet document: {exc!r}") from exc
    return RoadNetwork(nodes, roads)


def load_roadnet(path) -> RoadNetwork:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return roadnet_from_dict(doc)


_GRID_STEPS = {0: (1, 0), 1: (0, 1), 2: (-1, 0), 3: (0, -1)}  # CityFlow direction codes E, N, W, S


def generate_grid(rows: int, cols: int, road_length: float = 300.0, speed: float = 10.0) -> RoadNetwork:
    """Signalized ``rows`` x ``cols`` grid with one boundary node beyond each perimeter approach."""
    if rows < 1 or cols < 1 or not road_length > 0 or not speed > 0:
        raise ValueError("rows, cols, road_length and speed must be positive")

    def signalized(i, j):
        return 1 <= i <= cols and 1 <= j <= rows

    def exists(i, j):
        inside_x, inside_y = 1 <= i <= cols, 1 <= j <= rows
        return (inside_x and 0 <= j <= rows + 1) or (inside_y and 0 <= i <= cols + 1)

    coords = [(i, j) for j in range(rows + 2) for i in range(cols + 2) if exists(i, j)]
    roads: list[Road] = []
    touching: dict[tuple[int, int], list[str]] = {c: [] for c in coords}
    for i, j in coords:
        for code, (di, dj) in _GRID_STEPS.items():
            ni, nj = i + di, j + dj
            if (ni, nj) not in touching or not (signalized(i, j) or signalized(ni, nj)):
                continue
            rid = f"road_{i}_{j}_{code}"
            roads.append(Road(rid, f"intersection_{i}_{j}", f"intersection_{ni}_{nj}",
                              float(road_length), float(speed)))
            touching[(i, j)].append(rid)
            touching[(ni, nj)].append(rid)
    nodes = [Intersection(f"intersection_{i}_{j}", float(i * road_length), float(j * road_length),
                          tuple(sorted(touching[(i, j)])), not signalized(i, j))
             for i, j in coords]
    return RoadNetwork(nodes, roads)


def enumerate_phases(network: RoadNetwork, intersection: str) -> list[PhaseDef]:
    """The eight phases of a signalized intersection, ordered by phase id."""
    cached = network._phase_cache.get(intersection)
    if cached is not None:
        return cached
    if network.node(intersection).virtual:
        raise GeometryError(f"{intersection!r} is a boundary node without signals")
    approaches = network.approaches(intersection)
    exits = network.exits(intersection)
    phases = []
    for pid, legs in PHASE_TABLE.items():
        incoming = []
        movements = []
        for approach, turn in legs:
            src = lane_id(approaches[approach], turn)
            dst_road = exits[exit_direction(approach, turn)]
            incoming.append(src)
            movements.extend(Movement(src, lane_id(dst_road, t), turn) for t in Turn)
        phases.append(PhaseDef(pid, (incoming[0], incoming[1]), tuple(movements)))
    network._phase_cache[intersection] = phases
    return phases


# -- conflict geometry ------------------------------------------------------
# Each movement is a chord across the square [-1, 1]^2 from its entry point to
# its exit point, both offset half a unit to the right of the direction of travel.

_SIDE = {Compass.N: (0.0, 1.0), Compass.E: (1.0, 0.0), Compass.S: (0.0, -1.0), Compass.W: (-1.0, 0.0)}


def _kerb_point(side: Compass, heading: Compass) -> tuple[float, float]:
    cx, cy = _SIDE[side]
    hx, hy = _SIDE[heading]
    return cx + 0.5 * hy, cy - 0.5 * hx


def movement_path(approach: Compass, turn: Turn):
    direction = exit_direction(approach, turn)
    return _kerb_point(approach, approach.opposite), _kerb_point(direction, direction)


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def movements_conflict(a: tuple[Compass, Turn], b: tuple[Compass, Turn]) -> bool:
    """True when the two movements' paths cross or merge inside the intersection."""
    (p1, p2), (q1, q2) = movement_path(*a), movement_path(*b)
    if p1 == q1:
        return False  # same approach, diverging
    if p2 == q2:
        return True
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0
