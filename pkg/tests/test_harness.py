import csv
import io
import json

import pytest

from clustertest.cli import main
from clustertest.graph import load_graph
from clustertest.harness import (
    RESULT_COLUMNS,
    ExperimentConfig,
    ResultRow,
    emit_report,
    load_report,
    rejection_rates,
    run_experiment,
)


def test_config_round_trip(tmp_path):
    config = ExperimentConfig(
        task="sweep", kind="mixed", n=64, phi_in=0.25, s=12, r_scale=0.5, sweep_values=[0.001, 0.02],
        closure=True, output_csv="out.csv",
    )
    path = tmp_path / "exp.cfg"
    config.save(path)
    assert ExperimentConfig.load(path) == config


def test_config_rejects_unknown_keys_and_values():
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("colour = blue\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("task = plot\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("closure = maybe\n")
    assert ExperimentConfig.from_text("# comment only\n\ntrials = 3  # three\n").trials == 3


def test_zero_trials_gives_header_only(tmp_path):
    out = tmp_path / "rows.csv"
    rows = run_experiment(ExperimentConfig(trials=0, output_csv=str(out)))
    assert rows == []
    assert out.read_bytes() == (",".join(RESULT_COLUMNS) + "\r\n").encode()


def test_one_row_gives_two_lines():
    text = emit_report([ResultRow(task="test", trial=0, seed=1, statistic=1 / 3)])
    lines = text.split("\r\n")
    assert len(lines) == 3 and lines[2] == ""
    assert "0.333333333333" in lines[1]


def test_same_config_gives_identical_bytes(tmp_path):
    config = ExperimentConfig(task="test", n=100, trials=4, seed=9)
    a = emit_report(run_experiment(config))
    b = emit_report(run_experiment(config))
    assert a == b
    assert a != emit_report(run_experiment(ExperimentConfig(task="test", n=100, trials=4, seed=10)))


def test_json_round_trip():
    rows = [
        ResultRow(task="test", trial=i, seed=i, decision="accept", statistic=0.125 * i, threshold=0.5)
        for i in range(3)
    ]
    back = load_report(emit_report(rows, fmt="json"), "json")
    assert back == [r.as_dict() for r in rows]


def test_mismatched_rows_are_rejected():
    with pytest.raises(ValueError):
        emit_report([{"a": 1}, {"b": 2}])


def test_report_totals_equal_ledger_sums():
    rows = run_experiment(ExperimentConfig(task="test", n=100, trials=2))
    for r in rows:
        assert r.total_queries == r.vertex_queries + r.degree_queries + r.neighbor_queries > 0


def test_timing_column_is_opt_in():
    rows = run_experiment(ExperimentConfig(task="test", n=100, trials=1))
    assert "wall_time" not in emit_report(rows).splitlines()[0]
    assert emit_report(rows, timing=True).splitlines()[0].endswith("wall_time")


def test_sweep_rejection_rates_trend_upwards():
    config = ExperimentConfig(
        task="sweep", n=150, trials=4, seed=2, sweep_values=[0.0, 0.0001, 0.0003, 0.001, 0.005, 0.02]
    )
    rows = run_experiment(config)
    rates = rejection_rates(rows)
    for kind in ("clusterable", "unclusterable"):
        series = [rates[(v, kind)] for v in config.sweep_values]
        assert all(a <= b for a, b in zip(series, series[1:]))
    assert rates[(0.0, "clusterable")] < rates[(0.02, "clusterable")]
    assert rates[(0.0, "unclusterable")] == 1.0


@pytest.mark.parametrize("task,extra", [("generate", {}), ("spectrum", {"count": 3}), ("reduce", {"kind": "noisy_parities"})])
def test_other_tasks_produce_one_row_per_trial(task, extra):
    config = ExperimentConfig(task=task, n=40, d=4, trials=3, **extra)
    rows = run_experiment(config)
    assert [r.trial for r in rows] == [0, 1, 2]


def test_noisy_parities_task():
    rows = run_experiment(ExperimentConfig(task="noisy-parities", n=500, d=3, eps=0.1, trials=3, num_seeds=2, walks_per_seed=5))
    assert len(rows) == 3
    assert all(r.decision in ("yes", "no") for r in rows)


def test_parallel_workers_match_serial():
    serial = ExperimentConfig(task="test", n=80, trials=3, seed=4)
    parallel = ExperimentConfig(task="test", n=80, trials=3, seed=4, workers=2)
    assert emit_report(run_experiment(serial)) == emit_report(run_experiment(parallel))


# -- command line ---------------------------------------------------------------


def test_cli_generate_and_spectrum(tmp_path, capsys):
    graph = tmp_path / "g.txt"
    assert main(["generate", "--kind", "clusterable", "--k", "2", "--n", "30", "--d", "6", "--out", str(graph)]) == 0
    truth = json.loads((tmp_path / "g.txt.json").read_text())
    assert truth["kind"] == "clusterable" and len(truth["labels"]) == 60
    assert load_graph(graph.read_text()).n == 60
    assert main(["spectrum", "--graph", str(graph), "--count", "3"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["index", "eigenvalue"]
    assert abs(float(rows[2][1])) < 1e-9


def test_cli_test_success(tmp_path, capsys):
    assert main(["test", "--n", "100", "--trials", "2", "--csv-out", str(tmp_path / "s.csv")]) == 0
    verdicts = json.loads(capsys.readouterr().out)
    assert [v["instance"] for v in verdicts] == ["clusterable", "unclusterable"]
    assert (tmp_path / "s.csv").read_text().startswith("trial,")


def test_cli_budget_refusal_exit_code(capsys):
    assert main(["test", "--n", "50", "--mode", "query", "--profile", "paper", "--phi-in", "0.5"]) == 2
    assert "budget" in capsys.readouterr().err


def test_cli_error_exit_code(tmp_path, capsys):
    assert main(["spectrum", "--graph", str(tmp_path / "missing.txt")]) == 1
    assert main(["test", "--n", "50", "--profile", "paper", "--phi-in", "0.1", "--phi-out", "0.01"]) == 1


def test_cli_noisy_parities_and_reduce(tmp_path, capsys):
    out = tmp_path / "np.csv"
    assert main(["noisy-parities", "--n", "400", "--sessions", "4", "--num-seeds", "2", "--walks-per-seed", "5", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 4 and set(rows[0]) == {"session", "case", "guess", "queries", "cycles_found", "advantage"}

    inst = tmp_path / "inst.txt"
    assert main(["generate", "--kind", "noisy-parities", "--n", "20", "--d", "4", "--out", str(inst)]) == 0
    reduced = tmp_path / "red.txt"
    assert main(["reduce", "--to", "partition", "--instance", str(tmp_path / "inst.txt.json"), "--out", str(reduced)]) == 0
    g = load_graph(reduced.read_text())
    assert g.n == 40 and set(g.deg.tolist()) == {4}
    prov = json.loads((tmp_path / "red.txt.provenance.json").read_text())
    assert prov["encoding"] == "2v+b"
    assert main(["reduce", "--to", "maxcut", "--instance", str(tmp_path / "inst.txt.json"), "--out", str(tmp_path / "mc.txt")]) == 0


def test_cli_run_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    ExperimentConfig(task="test", n=80, trials=2, output_csv=str(tmp_path / "o.csv")).save(cfg)
    assert main(["run", "--config", str(cfg)]) == 0
    assert len((tmp_path / "o.csv").read_text().splitlines()) == 3
    assert main(["sweep", "--n", "80", "--trials", "2", "--values", "0,0.02"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 5
