import json

import pytest

import gpsignal.experiment as experiment
from gpsignal.errors import ConfigError, DomainError, EmptyInput
from gpsignal.experiment import (ExperimentConfig, MethodSummary, RunReport, analyze_terminals, compute_gap,
                                 emit_plot_data, run_experiment, write_files)


def small_config(**overrides):
    doc = {
        "name": "toy",
        "instance": {"grid": {"rows": 1, "cols": 1}, "demand": {"seed": 1}},
        "sim": {"duration": 300},
        "evolution": {"population_size": 6, "generations": 2},
        "runs": 2,
        "base_seed": 5,
    }
    doc.update(overrides)
    return ExperimentConfig.from_dict(doc)


@pytest.mark.parametrize("other, ref, gap", [
    (1582.103, 1227.3804, 28.9),
    (1335.7877, 1227.3804, 8.83),
    (1277.48, 1227.3804, 4.08),
    (100.0, 100.0, 0.0),
    (90.0, 100.0, -10.0),
])
def test_compute_gap(other, ref, gap):
    assert compute_gap(other, ref) == pytest.approx(gap, abs=1e-9)


@pytest.mark.parametrize("ref", [0.0, -3.0, float("nan")])
def test_compute_gap_rejects_bad_reference(ref):
    with pytest.raises(DomainError):
        compute_gap(10.0, ref)


def test_method_summary_statistics():
    m = MethodSummary("m", [1.0, 2.0, 3.0, 4.0])
    assert (m.min, m.mean) == (1.0, 2.5)
    assert m.std == pytest.approx(1.118033988749895)
    one = MethodSummary("one", [7.25])
    assert one.min == one.mean == 7.25 and one.std == 0.0


def test_single_run_campaign():
    report = run_experiment(small_config(runs=1))
    gp = report.method("GPLight")
    assert gp.min == gp.mean and gp.std == 0.0
    assert report.runs[0].seed == 5


def test_campaign_report(tmp_path):
    report = run_experiment(small_config(), out_dir=tmp_path)
    names = [m.method for m in report.methods]
    assert names == ["Fixed-Time", "MP", "GPLight"]
    for m in report.methods[:2]:
        assert len(m.values) == 1 and m.std == 0.0
    assert [r.seed for r in report.runs] == [5, 6]
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "best_tree_run0.sexp", "best_tree_run1.sexp", "comparison.csv",
        "convergence_run0.csv", "convergence_run1.csv", "report.json"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "complete" and doc["seeds"] == [5, 6]
    assert doc["gap_vs_reference"]["GPLight"] == 0.0
    assert len((tmp_path / "convergence_run0.csv").read_text().splitlines()) == 4
    rows = (tmp_path / "comparison.csv").read_text().splitlines()
    assert rows[0] == "method,min,mean,std,gap_vs_gplight" and len(rows) == 4
    assert RunReport.from_dict(doc).to_dict() == doc


def test_reports_are_reproducible(tmp_path):
    a = run_experiment(small_config(), out_dir=tmp_path / "a")
    b = run_experiment(small_config(), out_dir=tmp_path / "b")
    assert a.files() == b.files()
    for name in a.files():
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_partial_report_on_failure(tmp_path, monkeypatch):
    real = experiment.evolve
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 2:
            raise RuntimeError("worker died")
        return real(*args, **kwargs)

    monkeypatch.setattr(experiment, "evolve", flaky)
    with pytest.raises(RuntimeError) as info:
        run_experiment(small_config(), out_dir=tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["status"] == "failed" and "worker died" in doc["error"]
    assert len(doc["runs"]) == 1
    assert info.value.partial_report.status == "failed"


def test_gap_table_is_pairwise():
    report = RunReport(config={}, methods=[MethodSummary("a", [100.0]), MethodSummary("b", [110.0])],
                       reference="a")
    assert report.gap_table() == {"a": {"a": 0.0, "b": -9.09}, "b": {"a": 10.0, "b": 0.0}}
    assert report.gap_vs_reference() == {"a": 0.0, "b": 10.0}
    assert RunReport(config={}, methods=[MethodSummary("a", [1.0])]).gap_vs_reference() == {"a": None}


def test_analyze_terminals():
    # mean occurrences per tree: x0 appears twice over two trees, x1 once
    rep = analyze_terminals(["(+ x0 x1)", "x0"])
    assert rep.frequencies[0] == 1.0 and rep.frequencies[1] == 0.5
    assert rep.top2 == ["x0", "x1"]
    assert rep.to_csv().splitlines()[1] == "x0,1.0,1"
    with pytest.raises(EmptyInput):
        analyze_terminals([])


def test_top2_of_mixed_set():
    trees = ["(+ (* x0 x1) x5)", "(min x1 (+ x0 x0))", "(- x1 x14)", "x0"]
    assert analyze_terminals(trees).top2 == ["x0", "x1"]


def test_top2_ties_break_by_index():
    assert analyze_terminals(["(+ x7 x3)"]).top2 == ["x3", "x7"]


def test_emit_plot_data(tmp_path):
    report = run_experiment(small_config(runs=1))
    paths = emit_plot_data(report.runs[0].trace, report, tmp_path, run=0)
    assert [p.name for p in paths] == ["convergence_run0.csv", "comparison.csv"]
    assert len(paths[0].read_text().splitlines()) == 1 + 3
    assert len(paths[1].read_text().splitlines()) == 1 + len(report.methods)


def test_emit_plot_data_unwritable(tmp_path):
    report = run_experiment(small_config(runs=1))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_plot_data(report.runs[0].trace, report, blocker / "sub")


def test_write_files_stays_in_directory(tmp_path):
    with pytest.raises(ConfigError):
        write_files({"../escape.txt": "x"}, tmp_path / "out")


@pytest.mark.parametrize("doc", [
    {},
    {"instance": {"grid": {"rows": 1, "cols": 1}}, "runs": 0},
    {"instance": {"grid": {"rows": 1, "cols": 1}}, "bogus": 1},
    {"instance": {"grid": {"rows": 1, "cols": 1}}, "evolution": {"population_size": 0}},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_instance_needs_sources():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig.from_dict({"instance": {"grid": {"rows": 1, "cols": 1}}}))


def test_config_round_trip():
    cfg = small_config()
    doc = cfg.to_dict()
    assert doc["evolution"]["population_size"] == 6 and "rng_seed" not in doc["evolution"]
    assert ExperimentConfig.from_dict(doc).to_dict() == doc
