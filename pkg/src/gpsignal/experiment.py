"""Experiment campaigns: repeated GP runs, baseline benchmarks and reports.

A campaign evolves one urgency function per run (seed ``base_seed + run``),
benchmarks each configured baseline once (the simulator is deterministic,
so repeating a baseline would only reproduce the same number), and
summarises every method as min / mean / std of average travel time together
with percentage gaps relative to the evolved controller.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .controllers import UrgencyController, controller_from_config, label
from .errors import ConfigError, DomainError, EmptyInput
from .flow import FlowSpec, flow_from_list, generate_flow, load_flow
from .gp.evolve import EvolutionConfig, EvolutionTrace, GenerationStats, evolve
from .gp.tree import N_TERMINALS, parse_sexp, to_sexp
from .gp.explain import terminal_frequencies
from .network import RoadNetwork, generate_grid, load_roadnet, roadnet_from_dict
from .sim import SimConfig, run_episode

log = logging.getLogger(__name__)

GP_METHOD = "GPLight"


def compute_gap(f_other: float, f_gplight: float) -> float:
    """Percentage by which ``f_other`` exceeds ``f_gplight``, rounded to 2 decimals."""
    if not f_gplight > 0:
        raise DomainError(f"gap reference must be positive, got {f_gplight}")
    return round(100.0 * (f_other - f_gplight) / f_gplight, 2)


# -- configuration -------------------------------------------------------------


def _digest(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class InstanceSpec:
    """Where the network and demand come from.

    Exactly one network source: ``roadnet`` (path), ``roadnet_doc`` (inline
    document) or ``grid`` (generator arguments). Demand likewise comes from
    ``flow``, ``flow_doc`` or ``demand`` (synthetic generator arguments).
    """

    roadnet: str | None = None
    flow: str | None = None
    roadnet_doc: dict | None = None
    flow_doc: list | None = None
    grid: dict | None = None
    demand: dict | None = None
    holdout_flow: str | None = None
    holdout_flow_doc: list | None = None

    def load(self, duration: float) -> tuple[RoadNetwork, FlowSpec, FlowSpec | None]:
        if self.roadnet_doc is not None:
            network = roadnet_from_dict(self.roadnet_doc)
        elif self.roadnet is not None:
            network = load_roadnet(self.roadnet)
        elif self.grid is not None:
            network = generate_grid(**self.grid)
        else:
            raise ConfigError("instance needs 'roadnet', 'roadnet_doc' or 'grid'")
        if self.flow_doc is not None:
            flow = flow_from_list(self.flow_doc, network)
        elif self.flow is not None:
            flow = load_flow(self.flow, network)
        elif self.demand is not None:
            flow = generate_flow(network, duration=duration, **self.demand)
        else:
            raise ConfigError("instance needs 'flow', 'flow_doc' or 'demand'")
        holdout = None
        if self.holdout_flow_doc is not None:
            holdout = flow_from_list(self.holdout_flow_doc, network)
        elif self.holdout_flow is not None:
            holdout = load_flow(self.holdout_flow, network)
        return network, flow, holdout

    def describe(self) -> dict:
        """JSON-safe summary; inline documents are replaced by content digests."""
        out = {}
        for key, value in asdict(self).items():
            if value is None:
                continue
            if key.endswith("_doc"):
                out[f"{key}_sha256"] = _digest(value)
            else:
                out[key] = value
        return out


@dataclass
class ExperimentConfig:
    instance: InstanceSpec
    sim: SimConfig = field(default_factory=SimConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    runs: int = 10
    base_seed: int = 0
    controllers: list = field(default_factory=lambda: [{"type": "fixed"}, {"type": "max_pressure"}])
    workers: int = 1
    name: str = "instance"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def seed(self, run: int) -> int:
        return self.base_seed + run

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        try:
            instance = InstanceSpec(**doc.pop("instance"))
            sim = SimConfig(**doc.pop("sim", {}))
            evo = doc.pop("evolution", {})
            evo.pop("rng_seed", None)  # per-run seeds derive from base_seed
            evolution = EvolutionConfig(**evo)
            doc.pop("out", None)
            return cls(instance=instance, sim=sim, evolution=evolution, **doc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        evo = asdict(self.evolution)
        evo.pop("rng_seed")
        return {
            "name": self.name,
            "instance": self.instance.describe(),
            "sim": asdict(self.sim),
            "evolution": evo,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "controllers": list(self.controllers),
        }


class EpisodeFitness:
    """Average travel time of one deterministic episode under an urgency tree.

    Picklable, so it can be shipped to worker processes.
    """

    def __init__(self, network: RoadNetwork, flow: FlowSpec, config: SimConfig):
        self.network = network
        self.flow = flow
        self.config = config

    def __call__(self, tree) -> float:
        return run_episode(self.network, self.flow, UrgencyController(tree), self.config).average_travel_time


# -- reports -------------------------------------------------------------------


@dataclass
class MethodSummary:
    method: str
    values: list[float]
    controller: dict | None = None

    @property
    def min(self) -> float:
        return min(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)

    @property
    def std(self) -> float:
        m = self.mean
        return math.sqrt(math.fsum((v - m) ** 2 for v in self.values) / len(self.values))

    def to_dict(self) -> dict:
        return {"method": self.method, "min": self.min, "mean": self.mean, "std": self.std,
                "values": list(self.values), "controller": self.controller}


@dataclass
class RunRecord:
    run: int
    seed: int
    best_tree: str
    travel_time: float
    trace: EvolutionTrace
    holdout_travel_time: float | None = None

    def to_dict(self) -> dict:
        return {"run": self.run, "seed": self.seed, "best_tree": self.best_tree,
                "travel_time": self.travel_time, "holdout_travel_time": self.holdout_travel_time,
                "trace": self.trace.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        t = doc["trace"]
        trace = EvolutionTrace(
            generations=[GenerationStats(**g) for g in t["generations"]],
            best_tree=None if t["best_tree"] is None else parse_sexp(t["best_tree"]),
            best_fitness=t["best_fitness"], evaluations=t["evaluations"])
        return cls(doc["run"], doc["seed"], doc["best_tree"], doc["travel_time"], trace,
                   doc.get("holdout_travel_time"))


@dataclass
class RunReport:
    config: dict
    methods: list[MethodSummary] = field(default_factory=list)
    runs: list[RunRecord] = field(default_factory=list)
    status: str = "complete"
    error: str | None = None
    reference: str = GP_METHOD

    def method(self, name: str) -> MethodSummary:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)

    def gap_vs_reference(self) -> dict[str, float | None]:
        try:
            ref = self.method(self.reference).mean
        except KeyError:
            return {m.method: None for m in self.methods}
        out = {}
        for m in self.methods:
            try:
                out[m.method] = compute_gap(m.mean, ref)
            except DomainError:
                out[m.method] = None
        return out

    def gap_table(self) -> dict[str, dict[str, float | None]]:
        """``table[i][j]``: gap of method ``i`` relative to method ``j``."""
        table = {}
        for mi in self.methods:
            row = {}
            for mj in self.methods:
                try:
                    row[mj.method] = compute_gap(mi.mean, mj.mean)
                except DomainError:
                    row[mj.method] = None
            table[mi.method] = row
        return table

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "error": self.error,
            "config": self.config,
            "reference": self.reference,
            "seeds": [r.seed for r in self.runs],
            "methods": [m.to_dict() for m in self.methods],
            "gap_vs_reference": self.gap_vs_reference(),
            "gap_table": self.gap_table(),
            "runs": [r.to_dict() for r in self.runs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(
            config=doc["config"],
            methods=[MethodSummary(m["method"], list(m["values"]), m.get("controller")) for m in doc["methods"]],
            runs=[RunRecord.from_dict(r) for r in doc["runs"]],
            status=doc.get("status", "complete"),
            error=doc.get("error"),
            reference=doc.get("reference", GP_METHOD),
        )

    def comparison_csv(self) -> str:
        gaps = self.gap_vs_reference()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "min", "mean", "std", "gap_vs_gplight"])
        for m in self.methods:
            gap = gaps[m.method]
            writer.writerow([m.method, repr(m.min), repr(m.mean), repr(m.std),
                             "" if gap is None else f"{gap:.2f}"])
        return buf.getvalue()

    def files(self) -> dict[str, str]:
        """Output file names mapped to their text: report, comparison and per-run convergence/best tree."""
        files = {
            "report.json": json.dumps(self.to_dict(), indent=2) + "\n",
            "comparison.csv": self.comparison_csv(),
        }
        for r in self.runs:
            files[f"convergence_run{r.run}.csv"] = r.trace.convergence_csv()
            files[f"best_tree_run{r.run}.sexp"] = r.best_tree + "\n"
        return files

    def write(self, out_dir) -> list[Path]:
        return write_files(self.files(), out_dir)


def write_files(files: dict[str, str], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        path = out / name
        if path.parent != out:
            raise ConfigError(f"refusing to write outside {out}: {name!r}")
        path.write_text(text)
        written.append(path)
    return written


# -- campaigns -------------------------------------------------------------------


def benchmark(network: RoadNetwork, flow: FlowSpec, controllers, sim: SimConfig) -> list[MethodSummary]:
    """One episode per controller spec; labels are made unique by suffixing duplicates."""
    rows, seen = [], {}
    for spec in controllers:
        ctrl = controller_from_config(spec, sim.decision_interval)
        name = spec.get("label") or label(ctrl)
        if ctrl.name == "urgency" and not spec.get("label"):
            name = f"tree:{to_sexp(ctrl.tree)}"
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name}#{seen[name]}"
        value = run_episode(network, flow, ctrl, sim).average_travel_time
        rows.append(MethodSummary(name, [value], ctrl.to_config()))
    return rows


def run_experiment(config: ExperimentConfig, out_dir=None, progress=None) -> RunReport:
    """Evolve ``config.runs`` urgency functions and benchmark the baselines.

    ``progress(run, trace)`` is called after every finished GP run. When
    ``out_dir`` is given the report files are written there; on failure a
    partial report with ``status = "failed"`` is written before the error
    propagates (the partial report is also attached as ``exc.partial_report``).
    """
    report = RunReport(config=config.to_dict())
    try:
        network, flow, holdout = config.instance.load(config.sim.duration)
        report.methods.extend(benchmark(network, flow, config.controllers, config.sim))
        fitness = EpisodeFitness(network, flow, config.sim)
        for run in range(config.runs):
            seed = config.seed(run)
            evo = EvolutionConfig(**{**asdict(config.evolution), "rng_seed": seed})
            log.info("run %d/%d (seed %d)", run + 1, config.runs, seed)
            trace = evolve(evo, fitness, workers=config.workers)
            held = None
            if holdout is not None:
                held = EpisodeFitness(network, holdout, config.sim)(trace.best_tree)
            report.runs.append(RunRecord(run, seed, to_sexp(trace.best_tree), trace.best_fitness, trace, held))
            if progress is not None:
                progress(run, trace)
        report.methods.append(MethodSummary(GP_METHOD, [r.travel_time for r in report.runs]))
    except Exception as exc:
        report.status = "failed"
        report.error = f"{type(exc).__name__}: {exc}"
        if report.runs:
            report.methods.append(MethodSummary(GP_METHOD, [r.travel_time for r in report.runs]))
        if out_dir is not None:
            report.write(out_dir)
        exc.partial_report = report
        raise
    if out_dir is not None:
        report.write(out_dir)
    return report


# -- analysis ------------------------------------------------------------------


@dataclass
class TerminalReport:
    frequencies: list[float]
    top2: list[str]

    def to_dict(self) -> dict:
        return {"frequencies": {f"x{i}": f for i, f in enumerate(self.frequencies)}, "top2": self.top2}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["terminal", "mean_count", "top2"])
        for i, f in enumerate(self.frequencies):
            writer.writerow([f"x{i}", repr(f), int(f"x{i}" in self.top2)])
        return buf.getvalue()


def analyze_terminals(trees) -> TerminalReport:
    """Mean per-tree terminal counts over ``trees`` with the two most frequent flagged."""
    trees = [parse_sexp(t) if isinstance(t, str) else t for t in trees]
    if not trees:
        raise EmptyInput("analyze_terminals needs at least one tree")
    freq = terminal_frequencies(trees)
    ranked = sorted(range(N_TERMINALS), key=lambda i: (-freq[i], i))
    return TerminalReport(freq, [f"x{i}" for i in ranked[:2]])


def emit_plot_data(trace: EvolutionTrace, report: RunReport, out_dir, run: int = 0) -> list[Path]:
    """Write ``convergence_run<run>.csv`` and ``comparison.csv`` for plotting."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        conv = out / f"convergence_run{run}.csv"
        conv.write_text(trace.convergence_csv())
        comp = out / "comparison.csv"
        comp.write_text(report.comparison_csv())
    except OSError as exc:
        raise OSError(f"cannot write plot data under {out}: {exc}") from exc
    return [conv, comp]
