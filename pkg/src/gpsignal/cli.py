"""Command-line client.

Every subcommand except ``serve`` builds a request for the HTTP service,
sends it to ``--server`` (or to an in-process instance when no server is
given) and writes the returned files under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import httpx

from .experiment import write_files

DEFAULT_BASELINES = ("fixed", "max_pressure")


class CLIError(Exception):
    pass


# -- argument helpers -------------------------------------------------------------


def _read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path} is not valid JSON: {exc}") from exc


def _best_trees(directory: Path) -> list[tuple[str, str]]:
    found = sorted(directory.glob("best_tree_run*.sexp"),
                   key=lambda p: int(p.stem.removeprefix("best_tree_run") or 0))
    if not found:
        raise CLIError(f"no best_tree_run*.sexp files in {directory}")
    return [(f"tree:{p.stem.removeprefix('best_tree_')}", p.read_text().strip()) for p in found]


def parse_controller(text: str) -> list[dict]:
    """Controller specs named by ``text``.

    Accepts ``fixed``, ``max_pressure`` (or ``mp``), an inline JSON spec, a
    tree written as an S-expression, a ``.sexp``/``.json`` file, or a
    directory of ``best_tree_run<k>.sexp`` files (one spec per tree).
    """
    text = text.strip()
    if text in ("fixed", "fixed-time"):
        return [{"type": "fixed"}]
    if text in ("max_pressure", "max-pressure", "mp"):
        return [{"type": "max_pressure"}]
    if text.startswith("{"):
        try:
            return [json.loads(text)]
        except json.JSONDecodeError as exc:
            raise CLIError(f"invalid controller JSON: {exc}") from exc
    path = Path(text)
    if path.is_dir():
        return [{"type": "urgency", "tree": tree, "label": name} for name, tree in _best_trees(path)]
    if path.is_file():
        if path.suffix == ".json":
            doc = _read_json(path)
            return doc if isinstance(doc, list) else [doc]
        return [{"type": "urgency", "tree": path.read_text().strip()}]
    if text.startswith("(") or text.startswith("x"):
        return [{"type": "urgency", "tree": text}]
    raise CLIError(f"cannot interpret controller {text!r}")


def _config(args) -> dict:
    return {} if args.config is None else dict(_read_json(args.config))


def _inline_instance(instance: dict, base: Path) -> dict:
    """Replace file references by the documents themselves, resolving paths against ``base``."""
    out = dict(instance)
    for key in ("roadnet", "flow", "holdout_flow"):
        if out.get(key) is not None:
            out[f"{key}_doc"] = _read_json(base / out.pop(key))
    return out


def _network_and_flow(args, config: dict) -> tuple[dict, list]:
    base = Path(args.config).parent if args.config else Path(".")
    instance = _inline_instance(config.get("instance", {}), base)
    roadnet = _read_json(args.roadnet) if args.roadnet else instance.get("roadnet_doc")
    flow = _read_json(args.flow) if args.flow else instance.get("flow_doc")
    if roadnet is None or flow is None:
        raise CLIError("need --roadnet and --flow (or a --config whose instance names them)")
    return roadnet, flow


def _sim_settings(args, config: dict) -> dict:
    sim = dict(config.get("sim", {} if "instance" in config else config))
    if getattr(args, "duration", None) is not None:
        sim["duration"] = args.duration
    return sim


def _parse_intervals(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        side, _, value = part.partition("=")
        side = side.strip().upper()
        if side not in ("N", "E", "S", "W") or not value:
            raise CLIError(f"bad interval {part!r}; expected e.g. N=4,E=9,S=5,W=12")
        out[side] = float(value)
    return out


# -- transport --------------------------------------------------------------------


class Client:
    def __init__(self, server: str | None, timeout: float | None = None):
        if server:
            self._http = httpx.Client(base_url=server, timeout=timeout)
        else:
            with warnings.catch_warnings():  # upstream nags about its own httpx dependency
                warnings.filterwarnings("ignore", message=".*httpx2")
                from fastapi.testclient import TestClient

            from .api import create_app
            self._http = TestClient(create_app())

    def post(self, path: str, body: dict) -> dict:
        try:
            resp = self._http.post(path, json=body)
        except httpx.HTTPError as exc:
            raise CLIError(f"request to {path} failed: {exc}") from exc
        if resp.status_code >= 400:
            try:
                doc = resp.json()
            except ValueError:
                doc = {"detail": resp.text}
            kind = doc.get("error", f"HTTP {resp.status_code}")
            raise CLIError(f"{kind}: {doc.get('detail')}")
        return resp.json()


def _emit(args, doc: dict, files: dict[str, str]) -> None:
    if args.out:
        for path in write_files(files, args.out):
            logging.info("wrote %s", path)
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


# -- subcommands --------------------------------------------------------------------


def cmd_simulate(args, client: Client) -> None:
    config = _config(args)
    roadnet, flow = _network_and_flow(args, config)
    specs = parse_controller(args.controller or "max_pressure")
    if len(specs) != 1:
        raise CLIError("simulate takes exactly one controller")
    body = {"roadnet": roadnet, "flow": flow, "controller": specs[0],
            "sim": _sim_settings(args, config), "phase_log": bool(args.out)}
    resp = client.post("/simulate", body)
    files = {}
    if resp.get("phase_log_csv") is not None:
        files["phase_log.csv"] = resp.pop("phase_log_csv")
    resp.pop("phase_log_csv", None)
    files["simulate.json"] = json.dumps(resp, indent=2) + "\n"
    _emit(args, resp, files)


def cmd_evolve(args, client: Client) -> None:
    config = _config(args)
    if "instance" in config:
        base = Path(args.config).parent
        config["instance"] = _inline_instance(config["instance"], base)
    if args.roadnet or args.flow:
        roadnet, flow = _network_and_flow(args, config)
        config["instance"] = {**config.get("instance", {}), "roadnet_doc": roadnet, "flow_doc": flow}
        for key in ("grid", "demand"):
            config["instance"].pop(key, None)
    if "instance" not in config:
        raise CLIError("evolve needs --config or --roadnet/--flow")
    if args.seed is not None:
        config["base_seed"] = args.seed
    if args.runs is not None:
        config["runs"] = args.runs
    if args.controller:
        config["controllers"] = [s for text in args.controller for s in parse_controller(text)]
    if args.duration is not None:
        config.setdefault("sim", {})["duration"] = args.duration
    config.pop("out", None)
    resp = client.post("/evolve", config)
    report = resp["report"]
    summary = {"status": resp["status"], "seeds": report["seeds"],
               "methods": [{k: m[k] for k in ("method", "min", "mean", "std")} for m in report["methods"]],
               "gap_vs_reference": report["gap_vs_reference"]}
    _emit(args, summary, resp["files"])


def cmd_bench(args, client: Client) -> None:
    config = _config(args)
    roadnet, flow = _network_and_flow(args, config)
    texts = args.controller or list(DEFAULT_BASELINES)
    specs = [s for text in texts for s in parse_controller(text)]
    body = {"roadnet": roadnet, "flow": flow, "controllers": specs, "sim": _sim_settings(args, config)}
    resp = client.post("/bench", body)
    summary = {"methods": [{k: m[k] for k in ("method", "mean")} for m in resp["methods"]]}
    _emit(args, summary, resp["files"])


def _collect_trees(sources: list[str]) -> list[str]:
    trees = []
    for text in sources:
        path = Path(text)
        if path.is_dir():
            trees += [t for _, t in _best_trees(path)]
        elif path.is_file() and path.suffix == ".json":
            doc = _read_json(path)
            runs = doc.get("runs") if isinstance(doc, dict) else None
            if runs is None:
                raise CLIError(f"{path} is not a campaign report")
            trees += [r["best_tree"] for r in runs]
        elif path.is_file():
            trees += [line.strip() for line in path.read_text().splitlines() if line.strip()]
        else:
            trees.append(text)
    if not trees:
        raise CLIError("no trees to analyze")
    return trees


def cmd_analyze(args, client: Client) -> None:
    body = {"trees": _collect_trees(args.trees), "simplify": not args.no_simplify}
    resp = client.post("/analyze", body)
    files = resp.pop("files")
    _emit(args, resp, files)


def cmd_gen_grid(args, client: Client) -> None:
    body = {"rows": args.rows, "cols": args.cols, "road_length": args.road_length, "speed": args.speed,
            "duration": args.duration or 3600, "seed": args.seed or 0}
    if args.intervals:
        body["intervals"] = _parse_intervals(args.intervals)
    resp = client.post("/gen-grid", body)
    files = {"roadnet.json": json.dumps(resp["roadnet"], indent=2) + "\n",
             "flow.json": json.dumps(resp["flow"], indent=2) + "\n"}
    summary = {"intersections": len(resp["roadnet"]["intersections"]),
               "roads": len(resp["roadnet"]["roads"]), "flow_rules": len(resp["flow"])}
    _emit(args, summary, files)


def cmd_serve(args) -> None:
    import uvicorn

    uvicorn.run("gpsignal.api:app", host=args.host, port=args.port)


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsignal", description=__doc__.splitlines()[0])
    parser.add_argument("--server", help="base URL of a running service; default runs in-process")
    parser.add_argument("--timeout", type=float, default=None, help="HTTP timeout in seconds")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, controller_many=False):
        p.add_argument("--roadnet", help="road network JSON")
        p.add_argument("--flow", help="flow JSON")
        p.add_argument("--config", help="experiment or simulation config JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--duration", type=int, help="episode length in seconds")
        if controller_many:
            p.add_argument("--controller", action="append",
                           help="fixed, max_pressure, JSON spec, S-expression, .sexp file or run directory; repeatable")
        else:
            p.add_argument("--controller", help="fixed, max_pressure, JSON spec, S-expression or .sexp file")

    p = sub.add_parser("simulate", help="run one episode under one controller")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evolve", help="run a GP campaign")
    common(p, controller_many=True)
    p.add_argument("--seed", type=int, help="base seed; run k uses seed + k")
    p.add_argument("--runs", type=int, help="number of independent GP runs")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("bench", help="benchmark baselines and stored trees")
    common(p, controller_many=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="terminal frequencies and simplified trees")
    p.add_argument("trees", nargs="+", help="report.json, run directory, .sexp file or S-expression")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-simplify", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen-grid", help="write a synthetic grid network and demand")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--road-length", type=float, default=300.0)
    p.add_argument("--speed", type=float, default=10.0)
    p.add_argument("--duration", type=int)
    p.add_argument("--intervals", help="mean entry headway per side, e.g. N=4,E=9,S=5,W=12")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen_grid)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "serve":
        cmd_serve(args)
        return 0
    try:
        args.func(args, Client(args.server, args.timeout))
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
