"""Request and response bodies of the HTTP service.

Road networks and flows travel inline as the same JSON documents the core
loaders accept, so a remote server never reads client-side paths.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SimSettings(_Strict):
    duration: int = 3600
    decision_interval: int = 10
    yellow: int = 3
    all_red: int = 2
    tick: int = 1
    saturation_headway: float = 2.0


class EvolutionSettings(_Strict):
    population_size: int = 100
    generations: int = 50
    init: str = "ramped-half-and-half"
    init_min_depth: int = 3
    max_depth: int = 8
    elitism: bool = False
    tournament_size: int = 3
    crossover_rate: float = 0.90
    mutation_rate: float = 0.10


class GridSettings(_Strict):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    road_length: float = 300.0
    speed: float = 10.0


class DemandSettings(_Strict):
    intervals: dict[str, float] | None = None
    turn_ratios: tuple[float, float, float] = (0.2, 0.6, 0.2)
    seed: int = 0


class Instance(_Strict):
    roadnet: str | None = None
    flow: str | None = None
    roadnet_doc: dict[str, Any] | None = None
    flow_doc: list[dict[str, Any]] | None = None
    grid: GridSettings | None = None
    demand: DemandSettings | None = None
    holdout_flow: str | None = None
    holdout_flow_doc: list[dict[str, Any]] | None = None


class ExperimentRequest(_Strict):
    name: str = "instance"
    instance: Instance
    sim: SimSettings = SimSettings()
    evolution: EvolutionSettings = EvolutionSettings()
    runs: int = Field(10, ge=1)
    base_seed: int = 0
    controllers: list[dict[str, Any]] = [{"type": "fixed"}, {"type": "max_pressure"}]
    workers: int = Field(1, ge=1)


class SimulateRequest(_Strict):
    roadnet: dict[str, Any]
    flow: list[dict[str, Any]]
    controller: dict[str, Any]
    sim: SimSettings = SimSettings()
    phase_log: bool = False


class SimulateResponse(BaseModel):
    controller: dict[str, Any]
    average_travel_time: float
    spawned: int
    exited: int
    duration: int
    phase_log_csv: str | None = None


class BenchRequest(_Strict):
    roadnet: dict[str, Any]
    flow: list[dict[str, Any]]
    controllers: list[dict[str, Any]] = [{"type": "fixed"}, {"type": "max_pressure"}]
    sim: SimSettings = SimSettings()


class MethodRow(BaseModel):
    method: str
    min: float
    mean: float
    std: float
    values: list[float]
    controller: dict[str, Any] | None = None


class BenchResponse(BaseModel):
    methods: list[MethodRow]
    gap_table: dict[str, dict[str, float | None]]
    files: dict[str, str]


class ReportResponse(BaseModel):
    status: str
    report: dict[str, Any]
    files: dict[str, str]


class AnalyzeRequest(_Strict):
    trees: list[str] = Field(min_length=1)
    simplify: bool = True
    check_samples: int = Field(2000, ge=0)


class TreeSummary(BaseModel):
    tree: str
    size: int
    depth: int
    simplified: str | None = None
    simplified_size: int | None = None
    infix: str


class AnalyzeResponse(BaseModel):
    frequencies: dict[str, float]
    top2: list[str]
    trees: list[TreeSummary]
    files: dict[str, str]


class GenGridRequest(_Strict):
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    road_length: float = 300.0
    speed: float = 10.0
    duration: float = 3600.0
    intervals: dict[str, float] | None = None
    turn_ratios: tuple[float, float, float] = (0.2, 0.6, 0.2)
    seed: int = 0


class GenGridResponse(BaseModel):
    roadnet: dict[str, Any]
    flow: list[dict[str, Any]]


class JobStatus(BaseModel):
    id: str
    state: Literal["queued", "running", "done", "failed"]
    error: str | None = None
    result: ReportResponse | None = None


class ErrorBody(BaseModel):
    error: str
    detail: str
