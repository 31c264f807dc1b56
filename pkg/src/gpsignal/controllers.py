"""Phase-selection policies.

Every controller answers, for each signalized intersection, which of the
eight phases to activate for the next decision interval. Ties between
phases always resolve to the lowest phase id.
"""

from __future__ import annotations

from .errors import ConfigError
from .features import extract_features, feature_matrix
from .gp.tree import Function, Op, Terminal, Tree, compile_tree, eval_tree, parse_sexp, to_sexp
from .network import PHASE_IDS, enumerate_phases

DEFAULT_FIXED_PLAN = ((1, 30), (2, 30), (3, 30), (4, 30))


class Controller:
    name = "controller"

    def select(self, state, intersection: str) -> int:
        raise NotImplementedError

    def select_all(self, state) -> dict[str, int]:
        return {node: self.select(state, node) for node in state.layout.signalized}

    def to_config(self) -> dict:
        raise NotImplementedError


def urgency_select(tree: Tree, state, intersection: str) -> int:
    """Phase whose features score highest under ``tree``."""
    best_id, best = None, None
    for phase in enumerate_phases(state.network, intersection):
        u = eval_tree(tree, extract_features(state, intersection, phase))
        if best is None or u > best:
            best_id, best = phase.id, u
    return best_id


class UrgencyController(Controller):
    name = "urgency"

    def __init__(self, tree: Tree | str):
        self.tree = parse_sexp(tree) if isinstance(tree, str) else tree
        self._urgency = compile_tree(self.tree, counts=True)

    def select(self, state, intersection):
        return urgency_select(self.tree, state, intersection)

    def select_all(self, state):
        scores = self._urgency(feature_matrix(state)).reshape(-1, len(PHASE_IDS))
        # argmax returns the first maximum, i.e. the lowest phase id
        choice = scores.argmax(axis=1) + 1
        return dict(zip(state.layout.signalized, choice.tolist()))

    def to_config(self):
        return {"type": "urgency", "tree": to_sexp(self.tree)}


def _validate_schedule(schedule, decision_interval: int):
    schedule = tuple((int(p), int(d)) for p, d in schedule)
    if not schedule:
        raise ConfigError("fixed-time schedule is empty")
    for phase, duration in schedule:
        if phase not in PHASE_IDS:
            raise ConfigError(f"fixed-time phase {phase} is not in 1..8")
        if duration <= 0 or duration % decision_interval:
            raise ConfigError(f"duration {duration} is not a positive multiple of {decision_interval}")
    return schedule


def fixed_time_select(schedule, state, intersection: str, clock: int, decision_interval: int = 10) -> int:
    """Phase active at ``clock`` in the repeating ``(phase, seconds)`` schedule; ignores traffic."""
    schedule = _validate_schedule(schedule, decision_interval)
    t = clock % sum(d for _, d in schedule)
    for phase, duration in schedule:
        if t < duration:
            return phase
        t -= duration
    raise AssertionError("unreachable")


class FixedTimeController(Controller):
    name = "fixed"

    def __init__(self, schedule=DEFAULT_FIXED_PLAN, decision_interval: int = 10):
        self.schedule = _validate_schedule(schedule, decision_interval)
        self.decision_interval = decision_interval

    def select(self, state, intersection):
        return fixed_time_select(self.schedule, state, intersection, state.clock, self.decision_interval)

    def select_all(self, state):
        phase = self.select(state, None)
        return {node: phase for node in state.layout.signalized}

    def to_config(self):
        return {"type": "fixed", "schedule": [list(e) for e in self.schedule]}


def pressures(state, intersection: str) -> list[int]:
    """Per-phase sum over its six movements of upstream minus downstream vehicle counts."""
    layout = state.layout
    n = layout.signalized.index(intersection)
    x = state.occupancy
    return [sum(x[a] - x[b] for a, b in moves) for moves in layout.movements[n]]


def max_pressure_select(state, intersection: str) -> int:
    p = pressures(state, intersection)
    return PHASE_IDS[p.index(max(p))]


class MaxPressureController(Controller):
    name = "max_pressure"

    def select(self, state, intersection):
        return max_pressure_select(state, intersection)

    def to_config(self):
        return {"type": "max_pressure"}


def _sum_tree(terms: list[Tree]) -> Tree:
    if len(terms) == 1:
        return terms[0]
    mid = len(terms) // 2
    return Function(Op.ADD, _sum_tree(terms[:mid]), _sum_tree(terms[mid:]))


def mp_as_tree() -> Tree:
    """Max-pressure as an urgency function: ``3*x8 + 3*x9 - (x10 + ... + x15)``."""
    x = [Terminal(i) for i in range(16)]
    upstream = Function(Op.ADD, _sum_tree([x[8]] * 3), _sum_tree([x[9]] * 3))
    return Function(Op.SUB, upstream, _sum_tree(x[10:16]))


def controller_from_config(doc, decision_interval: int = 10) -> Controller:
    """Build a controller from ``{"type": "urgency" | "fixed" | "max_pressure", ...}``."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConfigError(f"controller spec needs a 'type': {doc!r}")
    kind = doc["type"]
    if kind == "urgency":
        if "tree" not in doc:
            raise ConfigError("urgency controller needs a 'tree'")
        return UrgencyController(doc["tree"])
    if kind == "fixed":
        return FixedTimeController(doc.get("schedule", DEFAULT_FIXED_PLAN), decision_interval)
    if kind == "max_pressure":
        return MaxPressureController()
    raise ConfigError(f"unknown controller type {kind!r}")


def label(controller: Controller) -> str:
    return {"fixed": "Fixed-Time", "max_pressure": "MP"}.get(controller.name, "GPLight")
