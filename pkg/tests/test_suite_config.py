import os

import pytest

from suite_config import ConfigError, apply_scale, load_suite, parse_suite

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

SUITE = """\
name = "demo"
master_seed = 100
runs = 3

[train]
epochs = 50

[samples.grid100]
method = "grid"
n = 2
k = 100

[samples.uniform]
method = "uniform"
n = 2
count = 7668
seed = 7

[[experiment]]
name = "grid_d1"
n = 2
w = 2
d = 1
sample = "grid100"
figure = "fig1"

[[experiment]]
name = "random_d8"
n = 2
w = 2
d = 8
sample = "uniform"
[experiment.train]
epochs = 20
lr = 0.002
"""


def test_parse_suite():
    suite = parse_suite(SUITE)
    assert suite.name == "demo"
    assert [e.name for e in suite.experiments] == ["grid_d1", "random_d8"]
    grid, random = suite.experiments
    assert grid.train.epochs == 50
    assert random.train.epochs == 20
    assert random.train.lr == 0.002
    assert grid.label == "grid, w=2, d=1"
    assert random.label == "random, w=2, d=8"
    assert suite.diagnostics["directions"] == 10_000


def test_run_seeds_follow_master_seed():
    exp = parse_suite(SUITE).experiment("grid_d1")
    config = exp.run_train_config(100, 4)
    assert config.init_seed == config.shuffle_seed == 104


def test_unknown_sample_reports_line():
    text = SUITE.replace('sample = "uniform"', 'sample = "missing"')
    with pytest.raises(ConfigError, match=r"experiment #2 \(line 27\).*unknown sample"):
        parse_suite(text)


def test_bad_sample_method_reports_line():
    text = SUITE.replace('method = "uniform"', 'method = "sobol"')
    with pytest.raises(ConfigError, match=r"samples.uniform \(line 13\): method must be one of"):
        parse_suite(text)


def test_missing_sample_count_reports_line():
    text = SUITE.replace("count = 7668\n", "")
    with pytest.raises(ConfigError, match=r"samples.uniform \(line 13\): count must be an integer"):
        parse_suite(text)


def test_master_seed_override():
    text = SUITE.replace("seed = 7\n", "")
    assert parse_suite(text).samples["uniform"]["seed"] == 100
    suite = parse_suite(text, master_seed=5)
    assert suite.master_seed == 5
    # unseeded random samples follow the override too
    assert suite.samples["uniform"]["seed"] == 5
    assert parse_suite(SUITE, master_seed=5).samples["uniform"]["seed"] == 7


def test_dimension_mismatch():
    text = SUITE.replace("n = 2\nw = 2\nd = 8", "n = 5\nw = 2\nd = 8")
    with pytest.raises(ConfigError, match="experiment n=5"):
        parse_suite(text)


def test_bad_train_key():
    text = SUITE.replace("lr = 0.002", "momentum = 0.9")
    with pytest.raises(ConfigError, match="unknown train keys"):
        parse_suite(text)


def test_duplicate_names():
    text = SUITE.replace('name = "random_d8"', 'name = "grid_d1"')
    with pytest.raises(ConfigError, match="duplicate"):
        parse_suite(text)


def test_toml_syntax_error():
    with pytest.raises(ConfigError, match="line"):
        parse_suite("name = \n")


def test_no_experiments():
    with pytest.raises(ConfigError, match="no \\[\\[experiment\\]\\]"):
        parse_suite('name = "x"\n')


def test_apply_scale():
    suite = parse_suite(SUITE)
    scaled = apply_scale(suite, 10)
    assert scaled.scaled
    assert scaled.samples["uniform"]["count"] == 767
    assert scaled.samples["grid100"]["k"] == 100
    assert scaled.experiment("grid_d1").train.epochs == 5
    assert scaled.experiment("random_d8").train.epochs == 2
    assert scaled.experiment("random_d8").sample["count"] == 767
    # the original is untouched
    assert suite.samples["uniform"]["count"] == 7668
    with pytest.raises(ConfigError):
        apply_scale(suite, 0)


@pytest.mark.parametrize(
    "name", ["n2_w2", "n2_w3", "n5_w5", "n5_w6", "sgd_n2", "smoke"]
)
def test_shipped_configs_parse(name):
    suite = load_suite(os.path.join(ROOT, "configs", f"{name}.toml"))
    assert suite.experiments
    for exp in suite.experiments:
        assert exp.sample["n"] == exp.n


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_suite("/nonexistent/suite.toml")


def test_dense_n2_suite_covers_grid_and_random():
    dense = load_suite(os.path.join(ROOT, "configs", "n2_w3.toml"))
    narrow = load_suite(os.path.join(ROOT, "configs", "n2_w2.toml"))
    covered = {(e.sample["method"], e.w, e.d) for e in dense.experiments}
    assert covered == {(m, 3, d) for m in ("grid", "uniform") for d in (1, 2, 8)}
    assert dense.samples["uniform7668"] == narrow.samples["uniform7668"]
