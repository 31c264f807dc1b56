"""HTTP service exposing simulation, evolution, benchmarking and analysis."""

from __future__ import annotations

import json
import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..controllers import controller_from_config
from ..errors import GPSignalError
from ..experiment import ExperimentConfig, RunReport, analyze_terminals, benchmark, run_experiment
from ..flow import flow_from_list, generate_flow
from ..gp.explain import simplify
from ..gp.tree import depth, parse_sexp, size, to_infix, to_sexp
from ..network import generate_grid, roadnet_from_dict
from ..sim import SimConfig, run_episode
from .schemas import (AnalyzeRequest, AnalyzeResponse, BenchRequest, BenchResponse, ExperimentRequest,
                      GenGridRequest, GenGridResponse, JobStatus, ReportResponse, SimulateRequest,
                      SimulateResponse, TreeSummary)

log = logging.getLogger(__name__)


def _report_response(report: RunReport) -> ReportResponse:
    return ReportResponse(status=report.status, report=report.to_dict(), files=report.files())


def _experiment(req: ExperimentRequest) -> ReportResponse:
    config = ExperimentConfig.from_dict(req.model_dump(exclude_none=True))
    return _report_response(run_experiment(config))


class JobStore:
    """Evolution campaigns run one at a time on a background thread."""

    def __init__(self):
        self._pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix="campaign")
        self._lock = threading.Lock()
        self._jobs: dict[str, JobStatus] = {}

    def submit(self, req: ExperimentRequest) -> JobStatus:
        job = JobStatus(id=uuid.uuid4().hex, state="queued")
        with self._lock:
            self._jobs[job.id] = job
        self._pool.submit(self._run, job.id, req)
        return job

    def _run(self, job_id: str, req: ExperimentRequest) -> None:
        self._update(job_id, state="running")
        try:
            result = _experiment(req)
        except Exception as exc:  # reported through the job, not raised into the pool
            log.exception("job %s failed", job_id)
            partial = getattr(exc, "partial_report", None)
            self._update(job_id, state="failed", error=f"{type(exc).__name__}: {exc}",
                         result=None if partial is None else _report_response(partial))
        else:
            self._update(job_id, state="done", result=result)

    def _update(self, job_id: str, **changes) -> None:
        with self._lock:
            self._jobs[job_id] = self._jobs[job_id].model_copy(update=changes)

    def get(self, job_id: str) -> JobStatus:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id!r}")
        return job

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)


def create_app() -> FastAPI:
    jobs = JobStore()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        jobs.shutdown()

    app = FastAPI(title="gpsignal", version=__version__, lifespan=lifespan)
    app.state.jobs = jobs

    @app.exception_handler(GPSignalError)
    async def domain_error(request: Request, exc: GPSignalError):
        return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        network = roadnet_from_dict(req.roadnet)
        flow = flow_from_list(req.flow, network)
        sim = SimConfig(**req.sim.model_dump())
        controller = controller_from_config(req.controller, sim.decision_interval)
        result = run_episode(network, flow, controller, sim)
        return SimulateResponse(
            controller=controller.to_config(),
            average_travel_time=result.average_travel_time,
            spawned=result.spawned,
            exited=result.exited,
            duration=result.duration,
            phase_log_csv=result.phase_log_csv() if req.phase_log else None,
        )

    @app.post("/evolve", response_model=ReportResponse)
    def evolve(req: ExperimentRequest):
        return _experiment(req)

    @app.post("/jobs/evolve", response_model=JobStatus, status_code=202)
    def evolve_async(req: ExperimentRequest):
        return jobs.submit(req)

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job(job_id: str):
        return jobs.get(job_id)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        network = roadnet_from_dict(req.roadnet)
        flow = flow_from_list(req.flow, network)
        sim = SimConfig(**req.sim.model_dump())
        rows = benchmark(network, flow, req.controllers, sim)
        trees = [m.method for m in rows if (m.controller or {}).get("type") == "urgency"]
        report = RunReport(config={"sim": req.sim.model_dump(), "controllers": req.controllers},
                           methods=rows, reference=trees[0] if trees else "")
        doc = report.to_dict()
        files = {"bench.json": json.dumps(doc, indent=2) + "\n", "comparison.csv": report.comparison_csv()}
        return BenchResponse(methods=doc["methods"], gap_table=doc["gap_table"], files=files)

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest):
        trees = [parse_sexp(t) for t in req.trees]
        terminals = analyze_terminals(trees)
        summaries = []
        for tree in trees:
            row = TreeSummary(tree=to_sexp(tree), size=size(tree), depth=depth(tree), infix=to_infix(tree))
            if req.simplify:
                short = simplify(tree, check_samples=req.check_samples)
                row.simplified, row.simplified_size = to_sexp(short), size(short)
                row.infix = to_infix(short)
            summaries.append(row)
        files = {
            "terminals.csv": terminals.to_csv(),
            "analyze.json": json.dumps({**terminals.to_dict(), "trees": [s.model_dump() for s in summaries]},
                                       indent=2) + "\n",
        }
        return AnalyzeResponse(frequencies=terminals.to_dict()["frequencies"], top2=terminals.top2,
                               trees=summaries, files=files)

    @app.post("/gen-grid", response_model=GenGridResponse)
    def gen_grid(req: GenGridRequest):
        network = generate_grid(req.rows, req.cols, req.road_length, req.speed)
        flow = generate_flow(network, duration=req.duration, intervals=req.intervals,
                             turn_ratios=req.turn_ratios, seed=req.seed)
        return GenGridResponse(roadnet=network.to_dict(), flow=flow.to_list())

    return app


app = create_app()
