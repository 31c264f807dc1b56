"""Deterministic point-queue traffic simulation.

Vehicles traverse a lane at free-flow speed, join the lane's stop-line FIFO
queue, and are discharged one per saturation headway when their movement is
green and the destination lane has room. Right turns and boundary
pass-throughs are never signal-controlled. A phase change consumes the
yellow + all-red time from the start of the decision interval.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MissingChoice
from .flow import FlowSpec, lane_path
from .network import PHASE_IDS, RoadNetwork, Turn, enumerate_phases

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    duration: int = 3600
    decision_interval: int = 10
    yellow: int = 3
    all_red: int = 2
    tick: int = 1
    saturation_headway: float = 2.0

    def __post_init__(self):
        if self.tick != 1:
            raise ConfigError("only a 1-second tick is supported")
        if self.decision_interval <= 0 or self.duration < 0:
            raise ConfigError("decision_interval must be positive and duration non-negative")
        if self.yellow < 0 or self.all_red < 0 or self.yellow + self.all_red >= self.decision_interval:
            raise ConfigError("yellow + all_red must be shorter than the decision interval")
        if self.duration % self.decision_interval:
            raise ConfigError("duration must be a multiple of decision_interval")
        if not self.saturation_headway > 0:
            raise ConfigError("saturation_headway must be positive")

    @property
    def clearance(self) -> int:
        return self.yellow + self.all_red

    @property
    def epochs(self) -> int:
        return self.duration // self.decision_interval


class Layout:
    """Integer-indexed view of a network shared by every episode on it."""

    def __init__(self, network: RoadNetwork):
        self.network = network
        self.lane_ids = list(network.lanes)
        self.index = {lid: k for k, lid in enumerate(self.lane_ids)}
        lanes = [network.lanes[lid] for lid in self.lane_ids]
        self.capacity = [lane.capacity for lane in lanes]
        self.travel_ticks = [max(1, math.ceil(lane.length / lane.free_flow_speed - 1e-9)) for lane in lanes]
        self.signalized = list(network.signalized)
        self.phases = {node: enumerate_phases(network, node) for node in self.signalized}
        # lanes whose discharge depends on the signal: left/through lanes entering a signalized node
        self.controlled = [False] * len(lanes)
        self.node_lanes: list[list[int]] = []
        self.phase_green: list[dict[int, tuple[int, int]]] = []
        for node in self.signalized:
            greens = {}
            for phase in self.phases[node]:
                greens[phase.id] = tuple(self.index[l] for l in phase.incoming)
            self.phase_green.append(greens)
            own = sorted({k for pair in greens.values() for k in pair})
            for k in own:
                self.controlled[k] = True
            self.node_lanes.append(own)
        # (n_signalized * 8, 8) lane indices: l1, l2, m1..m6 per phase
        self.feature_lanes = np.array(
            [[self.index[l] for l in phase.feature_lanes]
             for node in self.signalized for phase in self.phases[node]], dtype=np.intp)
        # movements of each phase as (from, to) lane index pairs
        self.movements = [
            [[(self.index[m.from_lane], self.index[m.to_lane]) for m in phase.movements]
             for phase in self.phases[node]]
            for node in self.signalized]
        self.approach_of = {}
        for node in self.signalized:
            for compass, rid in network.approaches(node).items():
                for turn in Turn:
                    self.approach_of[self.index[f"{rid}_{int(turn)}"]] = compass


def layout_for(network: RoadNetwork) -> Layout:
    cached = network.__dict__.get("_layout")
    if cached is None:
        cached = network.__dict__["_layout"] = Layout(network)
    return cached


@dataclass
class LaneState:
    running: deque = field(default_factory=deque)  # (stop-line tick, vehicle)
    queued: deque = field(default_factory=deque)   # vehicle

    @property
    def occupancy(self) -> int:
        return len(self.running) + len(self.queued)


class SimState:
    """Mutable state of one episode.

    ``queue_len`` and ``occupancy`` mirror ``w(l)`` and ``x(l)`` for every
    lane index and are kept in sync by the engine.
    """

    def __init__(self, network: RoadNetwork, flow: FlowSpec, config: SimConfig | None = None):
        self.network = network
        self.config = config or SimConfig()
        self.layout = layout = layout_for(network)
        n = len(layout.lane_ids)
        self.clock = 0
        self.lanes = [LaneState() for _ in range(n)]
        self.queue_len = [0] * n
        self.occupancy = [0] * n
        self.last_discharge = [-math.inf] * n
        self.green = [not c for c in layout.controlled]
        self.active_phase: dict[str, int | None] = {node: None for node in layout.signalized}
        self._pending_green: list[int] = []  # node indices switching this interval
        self._interval_start = 0
        self._queued_lanes: set[int] = set()
        self._arrivals: dict[int, list[int]] = {}

        self.rule_paths = [tuple(layout.index[l] for l in lane_path(network, r.route)) for r in flow.rules]
        self._due: dict[int, list[int]] = {}  # tick -> rule per vehicle due, in rule order
        for r, rule in enumerate(flow.rules):
            for t in rule.spawn_times(self.config.duration):
                self._due.setdefault(math.ceil(t), []).append(r)
        self.backlog: list[deque] = [deque() for _ in flow.rules]
        self._backlogged: set[int] = set()
        self.veh_rule: list[int] = []
        self.veh_cursor: list[int] = []
        self.entry_time: list[int] = []
        self.exit_time: list[int | None] = []
        self.spawned = 0
        self.exited = 0
        self.on_network = 0
        self.phase_log: list[tuple[int, str, int, bool]] = []
        self.tick_hook = None  # called as hook(state) after every tick

    # -- accounting ------------------------------------------------------------

    @property
    def transition_timer(self) -> dict[str, int]:
        """Seconds of yellow/all-red still to run at each intersection."""
        left = max(0, self.config.clearance - (self.clock - self._interval_start))
        pending = {self.layout.signalized[n] for n in self._pending_green}
        return {node: (left if node in pending else 0) for node in self.layout.signalized}

    @property
    def in_backlog(self) -> int:
        return sum(len(b) for b in self.backlog)

    def waiting(self, lane: str) -> int:
        return self.queue_len[self.layout.index[lane]]

    def total(self, lane: str) -> int:
        return self.occupancy[self.layout.index[lane]]

    # -- construction helpers used by tests and hand traces -------------------

    def place_vehicle(self, lane: str, queued: bool = True, path: tuple[str, ...] | None = None) -> int:
        """Insert a vehicle directly onto ``lane``; it leaves the network at the lane's end unless ``path`` continues."""
        k = self.layout.index[lane]
        idx = (k,) if path is None else tuple(self.layout.index[l] for l in path)
        self.rule_paths.append(idx)
        self.backlog.append(deque())
        vid = self._new_vehicle(len(self.rule_paths) - 1, self.clock)
        self.veh_cursor[vid] = idx.index(k)
        self.on_network += 1
        self.occupancy[k] += 1
        if queued:
            self.lanes[k].queued.append(vid)
            self.queue_len[k] += 1
            self._queued_lanes.add(k)
        else:
            arrive = self.clock + self.layout.travel_ticks[k]
            self.lanes[k].running.append((arrive, vid))
            self._arrivals.setdefault(arrive, []).append(k)
        return vid

    def _new_vehicle(self, rule: int, t: int) -> int:
        vid = len(self.entry_time)
        self.veh_rule.append(rule)
        self.veh_cursor.append(0)
        self.entry_time.append(t)
        self.exit_time.append(None)
        self.spawned += 1
        return vid

    # -- dynamics ---------------------------------------------------------------

    def _enter(self, vid: int, lane: int, t: int) -> None:
        arrive = t + self.layout.travel_ticks[lane]
        self.lanes[lane].running.append((arrive, vid))
        self.occupancy[lane] += 1
        bucket = self._arrivals.get(arrive)
        if bucket is None:
            self._arrivals[arrive] = [lane]
        else:
            bucket.append(lane)

    def spawn(self) -> None:
        """Create vehicles due at the current clock and admit backlogged ones with room."""
        t = self.clock
        cap, occ = self.layout.capacity, self.occupancy
        due = self._due.pop(t, ())
        for r in due:
            self.backlog[r].append(self._new_vehicle(r, t))
        active = self._backlogged
        active.update(due)
        if not active:
            return
        for r in sorted(active):
            backlog = self.backlog[r]
            first = self.rule_paths[r][0]
            while backlog and occ[first] < cap[first]:
                self._enter(backlog.popleft(), first, t)
                self.on_network += 1
            if not backlog:
                active.discard(r)

    def tick(self) -> None:
        t = self.clock
        self.spawn()
        lanes, qlen = self.lanes, self.queue_len
        bucket = self._arrivals.pop(t, None)
        if bucket:
            for k in bucket:
                running = lanes[k].running
                queued = lanes[k].queued
                while running and running[0][0] <= t:
                    queued.append(running.popleft()[1])
                    qlen[k] += 1
                self._queued_lanes.add(k)
        if self._queued_lanes:
            self._discharge(t)
        self.clock = t + 1
        if self.tick_hook is not None:
            self.tick_hook(self)

    def _discharge(self, t: int) -> None:
        green, last = self.green, self.last_discharge
        headway = self.config.saturation_headway
        cap, occ, qlen = self.layout.capacity, self.occupancy, self.queue_len
        lanes, paths, rule, cursor = self.lanes, self.rule_paths, self.veh_rule, self.veh_cursor
        emptied = []
        for k in sorted(self._queued_lanes):
            queued = lanes[k].queued
            if not queued:
                emptied.append(k)
                continue
            if not green[k] or t - last[k] < headway:
                continue
            vid = queued[0]
            path = paths[rule[vid]]
            c = cursor[vid] + 1
            if c == len(path):
                queued.popleft()
                self.exit_time[vid] = t
                self.exited += 1
                self.on_network -= 1
            else:
                nxt = path[c]
                if occ[nxt] >= cap[nxt]:
                    continue
                queued.popleft()
                cursor[vid] = c
                self._enter(vid, nxt, t)
            qlen[k] -= 1
            occ[k] -= 1
            last[k] = t
            if not queued:
                emptied.append(k)
        for k in emptied:
            self._queued_lanes.discard(k)

    def apply_choices(self, choices) -> None:
        layout = self.layout
        self._pending_green = []
        self._interval_start = self.clock
        for n, node in enumerate(layout.signalized):
            try:
                phase = int(choices[node])
            except KeyError:
                raise MissingChoice(f"no phase chosen for intersection {node!r}") from None
            if phase not in PHASE_IDS:
                raise ConfigError(f"phase {phase} chosen for {node!r} is not in 1..8")
            current = self.active_phase[node]
            changed = current is not None and phase != current
            if current is None or changed:
                for k in layout.node_lanes[n]:
                    self.green[k] = False
                self.active_phase[node] = phase
                if changed and self.config.clearance:
                    self._pending_green.append(n)
                else:
                    self._set_green(n)
            self.phase_log.append((self.clock, node, phase, changed))

    def _set_green(self, n: int) -> None:
        node = self.layout.signalized[n]
        for k in self.layout.phase_green[n][self.active_phase[node]]:
            self.green[k] = True

    def advance(self, ticks: int) -> None:
        clearance = self.config.clearance
        for offset in range(ticks):
            if offset == clearance and self._pending_green:
                for n in self._pending_green:
                    self._set_green(n)
                self._pending_green = []
            self.tick()
        if self._pending_green:  # interval shorter than the clearance time
            for n in self._pending_green:
                self._set_green(n)
            self._pending_green = []

    def result(self) -> "EpisodeResult":
        return EpisodeResult(
            duration=self.clock,
            entry_times=list(self.entry_time),
            exit_times=list(self.exit_time),
            routes=[self.veh_rule[v] for v in range(self.spawned)],
            phase_log=list(self.phase_log),
        )


def spawn_vehicles(state: SimState, flow: FlowSpec | None = None) -> SimState:
    """Realize the spawn schedule for the current tick (the flow is bound at state construction)."""
    state.spawn()
    return state


def step(state: SimState, choices, config: SimConfig | None = None) -> SimState:
    """Apply one phase choice per signalized intersection and advance one decision interval."""
    config = config or state.config
    if state.clock % config.decision_interval:
        raise ConfigError(f"clock {state.clock} is not on a decision boundary")
    state.apply_choices(choices)
    state.advance(config.decision_interval)
    return state


@dataclass
class EpisodeResult:
    duration: int
    entry_times: list[int]
    exit_times: list[int | None]
    routes: list[int]
    phase_log: list[tuple[int, str, int, bool]]

    @property
    def spawned(self) -> int:
        return len(self.entry_times)

    @property
    def exited(self) -> int:
        return sum(t is not None for t in self.exit_times)

    def travel_times(self) -> list[float]:
        return [(self.duration if out is None else out) - inn
                for inn, out in zip(self.entry_times, self.exit_times)]

    @property
    def average_travel_time(self) -> float:
        return average_travel_time(self)

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "spawned": self.spawned,
            "exited": self.exited,
            "average_travel_time": self.average_travel_time,
            "vehicles": [{"id": v, "rule": r, "entry_time": i, "exit_time": o}
                         for v, (i, o, r) in enumerate(zip(self.entry_times, self.exit_times, self.routes))],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def phase_log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "intersection", "phase", "transitioned"])
        for t, node, phase, changed in self.phase_log:
            writer.writerow([t, node, phase, int(changed)])
        return buf.getvalue()


def average_travel_time(result: EpisodeResult) -> float:
    """Mean over spawned vehicles of exit (or end-of-run) time minus entry time; 0 when none spawned."""
    times = result.travel_times()
    if not times:
        log.warning("episode spawned no vehicles; average travel time reported as 0")
        return 0.0
    return math.fsum(times) / len(times)


def run_episode(network: RoadNetwork, flow: FlowSpec, controller, config: SimConfig | None = None,
                observer=None) -> EpisodeResult:
    """Simulate ``config.duration`` seconds under ``controller``.

    ``observer(state)``, when given, is called at every decision epoch
    before the controller is queried.
    """
    config = config or SimConfig()
    state = SimState(network, flow, config)
    for _ in range(config.epochs):
        if observer is not None:
            observer(state)
        step(state, controller.select_all(state), config)
    return state.result()
