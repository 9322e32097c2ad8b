import json
import os

import numpy as np
import pandas as pd
import pytest

import core.scheduler as scheduler
from results_store import ResultsStore
from sampling import grid_sample
from suite_config import DEFAULT_DIAGNOSTICS, parse_suite
from task_suite import run_suite, train_one_run

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SMOKE = os.path.join(ROOT, "configs", "smoke.toml")


@pytest.fixture(scope="module")
def smoke_root(tmp_path_factory):
    return run_suite(SMOKE, out=str(tmp_path_factory.mktemp("smoke")), workers=1)


def test_manifest(smoke_root):
    manifest = ResultsStore(smoke_root).read_manifest()
    assert manifest["suite"] == "smoke"
    assert manifest["master_seed"] == 1
    assert not manifest["scaled"]
    entry = manifest["experiments"][0]
    assert entry["name"] == "smoke_w2_d1"
    assert entry["seeds"] == [1]
    assert entry["sample_meta"]["m"] == 60
    assert entry["mse_n0"] > 0.0
    conventions = manifest["conventions"]
    assert conventions["relu_subgradient"] == "ReLU'(0) = 0"
    assert conventions["adam_epsilon"] == [1e-7]


def test_run_files(smoke_root):
    run_dir = os.path.join(smoke_root, "smoke_w2_d1", "run_00")
    for name in ("metrics.csv", "model.json", "diagnostics.json", "record.json"):
        assert os.path.exists(os.path.join(run_dir, name))
    metrics = pd.read_csv(os.path.join(run_dir, "metrics.csv"))
    assert list(metrics.columns) == ["epoch", "mse", "sup_estimate", "zf_1_1", "zf_1_2"]
    assert metrics["epoch"].tolist() == [1]
    assert os.path.exists(os.path.join(smoke_root, "smoke_w2_d1", "runs.csv"))
    assert os.path.exists(os.path.join(smoke_root, "smoke_w2_d1", "sample.csv"))


def test_record_matches_metrics(smoke_root):
    store = ResultsStore(smoke_root)
    record = store.read_record("smoke_w2_d1", 0)
    assert record.completed
    assert record.init_seed == record.shuffle_seed == 1
    assert record.epochs == 1
    metrics = store.read_metrics("smoke_w2_d1", 0)
    assert record.final_sup == metrics["sup_estimate"].iloc[-1]
    assert record.case in ("case1", "case2")
    assert record.checks["collapse_max_error"] < 1e-12
    assert store.read_diagnostics("smoke_w2_d1", 0)["arch"] == {"n": 2, "w": 2, "d": 1}


def test_rerun_is_bitwise_identical(smoke_root, tmp_path):
    again = run_suite(SMOKE, out=str(tmp_path / "again"), workers=1)
    for name in ("metrics.csv", "model.json", "record.json"):
        a = open(os.path.join(smoke_root, "smoke_w2_d1", "run_00", name)).read()
        b = open(os.path.join(again, "smoke_w2_d1", "run_00", name)).read()
        if name == "record.json":
            a, b = json.loads(a), json.loads(b)
        assert a == b


def test_sample_reload(smoke_root):
    sample = ResultsStore(smoke_root).read_sample("smoke_w2_d1")
    assert sample.m == 60
    assert (sample.points == grid_sample(2, 10).points).all()


def test_only_unknown_experiment(tmp_path):
    with pytest.raises(KeyError):
        run_suite(SMOKE, out=str(tmp_path / "x"), only=["nope"])


def test_diverging_run_is_recorded(tmp_path):
    suite = parse_suite(
        """
master_seed = 3
[samples.g]
method = "grid"
n = 2
k = 10
[[experiment]]
name = "blowup"
n = 2
w = 2
d = 1
sample = "g"
[experiment.train]
optimizer = "sgd"
lr = 1e10
epochs = 2
"""
    )
    exp = suite.experiment("blowup")
    with np.errstate(over="ignore", invalid="ignore"):
        record = train_one_run(exp, 0, grid_sample(2, 10), 3, str(tmp_path), dict(DEFAULT_DIAGNOSTICS))
    assert record.status == "aborted"
    assert not record.completed
    assert "non-finite" in record.error
    assert os.path.exists(os.path.join(str(tmp_path), "blowup", "run_00", "record.json"))
    assert os.path.exists(os.path.join(str(tmp_path), "blowup", "run_00", "model.json"))


@pytest.mark.slow
def test_parallel_runs_match_sequential(tmp_path):
    text = open(SMOKE).read().replace("runs = 1", "runs = 3")
    config = tmp_path / "smoke3.toml"
    config.write_text(text)
    seq = run_suite(str(config), out=str(tmp_path / "seq"), workers=1)
    par = run_suite(str(config), out=str(tmp_path / "par"), workers=2)
    assert scheduler._executor is None
    for r in range(3):
        run = os.path.join("smoke_w2_d1", f"run_{r:02d}", "metrics.csv")
        assert open(os.path.join(seq, run)).read() == open(os.path.join(par, run)).read()


def test_seed_override_replaces_master_seed(tmp_path):
    root = run_suite(SMOKE, out=str(tmp_path / "seeded"), workers=1, seed=7)
    store = ResultsStore(root)
    manifest = store.read_manifest()
    assert manifest["master_seed"] == 7
    assert manifest["experiments"][0]["seeds"] == [7]
    record = store.read_record("smoke_w2_d1", 0)
    assert record.init_seed == record.shuffle_seed == 7


def test_run_suite_shuts_pool_down(tmp_path):
    scheduler.get_executor(2)
    run_suite(SMOKE, out=str(tmp_path / "pool"), workers=1)
    assert scheduler._executor is None
