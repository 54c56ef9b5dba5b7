import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from dssfn.cli import main
from dssfn.consensus import EventTrace
from dssfn.data import DataError, Dataset, write_csv
from dssfn.harness import ExperimentResult, ExperimentSpec, run_experiment, sweep_degree, sweep_nodes
from dssfn.topology import TopologyError
from oracles import synthetic


@pytest.fixture
def csvs(tmp_path):
    x, t = synthetic(p=5, q=3, j=180, seed=0)
    paths = []
    for name, cols in (("train", slice(0, 120)), ("test", slice(120, 180))):
        p = tmp_path / f"{name}.csv"
        write_csv(Dataset(x[:, cols], t[:, cols]), p)
        paths.append(str(p))
    return paths


def small(csvs, **kw):
    base = dict(train=csvs[0], test=csvs[1], layers=2, width_extra=20, nodes=4, degree=2, iters=15, gamma=0.2)
    base.update(kw)
    return ExperimentSpec(**base)


def test_spec_validation(csvs):
    with pytest.raises(ValueError):
        small(csvs, mode="gossip")
    with pytest.raises(ValueError):
        small(csvs, repeats=0)
    with pytest.raises(ValueError):
        small(csvs, async_budget="lots")
    with pytest.raises(ValueError, match="unknown"):
        ExperimentSpec.from_dict({"train": "x", "bogus": 1})
    assert small(csvs, mode="async", async_budget="per_node").solver_config("async").max_activations == 60
    assert small(csvs, mode="async").solver_config("async").max_activations == 15
    assert small(csvs, async_budget="per_node").solver_config("sync").max_activations == 15


def test_central_run_and_summary(csvs, tmp_path):
    res = run_experiment(small(csvs, repeats=2), tmp_path / "r.json")
    assert [r.seed for r in res.runs] == [0, 1]
    s = res.summary()["central"]
    assert s["accuracy_mean"] == pytest.approx(np.mean([r.accuracy for r in res.runs]))
    assert s["accuracy_mean"] > 60
    back = ExperimentResult.from_dict(json.loads((tmp_path / "r.json").read_text()))
    assert back.runs == res.runs


@pytest.mark.parametrize("mode", ["sync", "async"])
def test_output_is_byte_identical_and_replayable(csvs, tmp_path, mode):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_experiment(small(csvs, mode=mode, staleness_cap=2), a)
    run_experiment(small(csvs, mode=mode, staleness_cap=2), b)
    assert a.read_bytes() == b.read_bytes()
    spec = ExperimentSpec.from_dict(json.loads(a.read_text())["spec"])
    c = tmp_path / "c.json"
    run_experiment(spec, c)
    assert a.read_bytes() == c.read_bytes()
    for f in sorted((tmp_path / "a_traces").iterdir()):
        assert f.read_bytes() == (tmp_path / "c_traces" / f.name).read_bytes()


def test_trace_files(csvs, tmp_path):
    res = run_experiment(small(csvs, mode="async"), tmp_path / "r.json")
    files = sorted((tmp_path / "r_traces").iterdir())
    assert [f.name for f in files] == [f"async_seed0_layer{l:02d}.csv" for l in range(3)]
    lines = files[0].read_text().splitlines()
    assert lines[0].startswith("# spec: ") and lines[1].startswith("# mode: async")
    assert lines[2] == "k,node,local_cost,consensus_error,wall_ns"
    tr = EventTrace.read_csv(files[0])
    assert len(tr) == 15 and [e.k for e in tr] == list(range(1, 16))
    assert all(e.wall_ns == 0 for e in tr)
    assert res.runs[0].messages == 3 * 15 * 2


def test_compare_mode_single_node_is_exact(csvs):
    res = run_experiment(small(csvs, mode="compare", nodes=1, degree=0, iters=2))
    dec = [r for r in res.runs if r.variant == "sync"][0]
    assert [r.variant for r in res.runs] == ["central", "sync"]
    assert all(row["relative_distance"] < 1e-12 for row in dec.equivalence)


def test_timing_is_opt_in(csvs):
    assert run_experiment(small(csvs, mode="sync")).runs[0].wall_time is None
    assert run_experiment(small(csvs, mode="sync", timing=True)).runs[0].wall_time > 0


def test_parallel_runtime(csvs):
    res = run_experiment(small(csvs, mode="sync", parallel=True))
    assert res.runs[0].messages == 3 * 15 * 8
    assert res.runs[0].accuracy > 50


def test_sweeps(csvs):
    rows = sweep_degree(small(csvs, nodes=6), [2, 4], modes=("sync", "async"))
    assert [(r["mode"], r["degree"]) for r in rows] == [("sync", 2), ("sync", 4), ("async", 2), ("async", 4)]
    for r in rows:
        if r["mode"] == "sync":
            assert r["messages_per_round"] == 6 * r["degree"]
        else:
            assert r["messages_per_activation"] == r["degree"]
    rows = sweep_nodes(small(csvs), [1, 2, 5], modes=("async",))
    assert [(r["nodes"], r["degree"]) for r in rows] == [(1, 0), (2, 1), (5, 2)]
    with pytest.raises(TopologyError):
        sweep_degree(small(csvs), [2, 3])
    with pytest.raises(DataError):
        sweep_nodes(small(csvs), [2, 500])


def test_bad_inputs(csvs, tmp_path):
    with pytest.raises(DataError):
        run_experiment(small(csvs, train=str(tmp_path / "missing.csv")))
    with pytest.raises(DataError):
        run_experiment(small(csvs, mode="sync", nodes=500, degree=2))
    with pytest.raises(TopologyError):
        run_experiment(small(csvs, mode="sync", degree=3))


def cli_args(csvs, *extra):
    return ["train", "--data", csvs[0], "--test", csvs[1], "--layers", "2", "--width-extra", "20",
            "--nodes", "4", "--degree", "2", "--iters", "10", "--gamma", "0.2", *extra]


def test_cli_train(csvs, tmp_path, capsys):
    out = tmp_path / "cli.json"
    assert main(cli_args(csvs, "--mode", "async", "--out", str(out), "--async-budget", "per-node")) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["async"]["activations"] == 3 * 40
    assert json.loads(out.read_text())["spec"]["async_budget"] == "per_node"


def test_cli_sweeps(csvs, tmp_path, capsys):
    out = tmp_path / "s.json"
    args = cli_args(csvs)[1:]
    assert main(["sweep-degree", "--degrees", "2", "--out", str(out), *args]) == 0
    assert [r["degree"] for r in json.loads(out.read_text())] == [2, 2]
    assert main(["sweep-nodes", "--counts", "2,4", *args]) == 0
    capsys.readouterr()


def test_cli_errors(csvs, tmp_path, capsys):
    assert main(cli_args(csvs, "--mode", "sync", "--degree", "3")) == 1
    assert "dssfn: error:" in capsys.readouterr().err
    assert main(["train", "--data", str(tmp_path / "nope.csv")]) == 1
    assert "nope.csv" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["sweep-degree", "--degrees", "a,b", "--data", csvs[0]])


def test_cli_log_level(csvs, monkeypatch, capsys):
    monkeypatch.setenv("DSSFN_LOG", "bogus")
    assert main(cli_args(csvs)) == 1
    assert "DSSFN_LOG" in capsys.readouterr().err
    root = logging.getLogger()
    saved = root.handlers[:], root.level
    try:
        root.handlers[:] = []
        monkeypatch.setenv("DSSFN_LOG", "info")
        assert main(cli_args(csvs)) == 0
        assert root.level == logging.INFO
    finally:
        root.handlers[:], root.level = saved[0], saved[1]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dssfn", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "sweep-degree" in out.stdout
