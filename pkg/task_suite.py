#!/usr/bin/env python3
"""
Experiment suite runner.

For every [[experiment]] in a suite config: build (or reuse) its training set, train
`runs` models with seeds master_seed + run index, and store per-run metric streams,
models, diagnostics and records, plus a manifest with every seed and convention.
"""

import logging
import os
import sys
from datetime import datetime, timezone
from typing import Dict, List, Optional

import numpy as np

from autograd import mse_loss
from core.scheduler import run_jobs, shutdown_executor
from diagnostics import DiagnosticsError, dead_neuron_events, diagnostics_summary
from network import constant_network, init_network
from optim import EpochMetrics, NonFiniteLossError, train
from results_store import ResultsStore, RunRecord
from sampling import GRID_POINT_CAP, NORMAL_METHOD, Sample, build_sample
from suite_config import ExperimentConfig, SuiteConfig, apply_scale, load_suite
from target import THEOREM

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
RESULTS_DIR = os.getenv("NARROWNET_RESULTS_DIR", "results")
LOW_SUP_WARNING = 0.120


def conventions(suite: SuiteConfig) -> dict:
    adam_eps = sorted({exp.train.epsilon for exp in suite.experiments})
    return {
        "depth": "d counts hidden ReLU layers (d + 1 affine maps)",
        "init": "Glorot-uniform weights, zero biases",
        "grid_rule": "k points per axis incl. 0 and 1; kept iff sum (2i-(k-1))^2 <= (k-1)^2",
        "uniform_rule": "draw from [0,1]^n until `count` points land in K",
        "radial_rule": "normalized standard normal times 0.5*U^(1/n), shifted to the center",
        "normal_method": NORMAL_METHOD,
        "adam_epsilon": adam_eps,
        "shuffle_rule": "epoch e (1-based) permutes with seed shuffle_seed + e",
        "run_seeds": "init_seed = shuffle_seed = master_seed + run_index",
        "relu_subgradient": "ReLU'(0) = 0",
        "dead_threshold": "zero fraction exactly 1.0 on the training sample",
        "precision": "float64",
        "grid_cap": GRID_POINT_CAP,
    }


def _record_from_summary(record: RunRecord, metrics: List[EpochMetrics], summary: Optional[dict]):
    if metrics:
        record.epochs = len(metrics)
        record.final_mse = metrics[-1].mse
        record.final_sup = metrics[-1].sup_estimate
    record.revived = len(dead_neuron_events([m.zero_fractions for m in metrics]))
    if summary is None:
        return
    dead = summary["dead"]
    record.dead = len(dead["dead"])
    record.partial = len(dead["partial"])
    record.first_dead_layer = dead["first_dead_layer"]
    record.dichotomy = dead["dichotomy"]
    record.constant = summary["constant"]["constant"]
    record.constant_value = summary["constant"]["value"]
    record.case = summary["case"]["case"]
    record.checks = {
        "bound_passed": summary["bound"]["passed"],
        "width_applicable": summary["bound"]["width_applicable"],
        "collapse_max_error": summary["collapse"]["max_error"],
        "convexity_violations": summary["convexity"]["violations"],
        "dead_implies_case2": summary["dead_implies_case2"],
        "argmax_consistent": summary["constant"]["argmax_consistent"],
    }


def train_one_run(
    experiment: ExperimentConfig,
    run_index: int,
    sample: Sample,
    master_seed: int,
    root: str,
    diagnostics: Dict,
) -> RunRecord:
    """Train, diagnose and store one run. Divergence is recorded, not raised."""
    config = experiment.run_train_config(master_seed, run_index)
    record = RunRecord(experiment.name, run_index, config.init_seed, config.shuffle_seed)
    store = ResultsStore(root)

    net = init_network(experiment.arch, config.init_seed)
    try:
        trained, metrics = train(net, sample, config)
    except NonFiniteLossError as e:
        logger.error(f"{experiment.name} run {run_index} aborted: {e}", exc_info=True)
        record.status = "aborted"
        record.error = str(e)
        _record_from_summary(record, e.metrics, None)
        return store.write_run(record, e.metrics, e.snapshot, None)

    try:
        summary = diagnostics_summary(
            trained,
            sample,
            directions=int(diagnostics["directions"]),
            convexity_pairs=int(diagnostics["convexity_pairs"]),
            seed=config.init_seed,
            argmax_tol=float(diagnostics["argmax_tol"]),
        )
    except DiagnosticsError as e:
        logger.error(f"{experiment.name} run {run_index}: diagnostics failed: {e}", exc_info=True)
        record.status = "diagnostics_failed"
        record.error = str(e)
        summary = None

    _record_from_summary(record, metrics, summary)
    if record.final_sup is not None and record.final_sup < LOW_SUP_WARNING and experiment.w <= experiment.n:
        logger.warning(f"{experiment.name} run {run_index}: sup estimate {record.final_sup:.4f} below {LOW_SUP_WARNING}")
    logger.info(
        f"{experiment.name} run {run_index}: mse={record.final_mse:.5f} sup={record.final_sup:.4f} "
        f"dead={record.dead} constant={record.constant}"
    )
    return store.write_run(record, metrics, trained, summary)


def build_samples(suite: SuiteConfig) -> Dict[str, Sample]:
    samples = {}
    for key, spec in suite.samples.items():
        if any(exp.sample_key == key for exp in suite.experiments):
            samples[key] = build_sample(spec)
            logger.info(f"Sample {key}: {samples[key].m} {spec['method']} points (n={spec['n']})")
    return samples


def run_suite(
    config_path: str,
    out: Optional[str] = None,
    scale: int = 1,
    workers: Optional[int] = None,
    only: Optional[List[str]] = None,
    seed: Optional[int] = None,
) -> str:
    """
    Run every experiment of the suite and return the results directory.

    `only` restricts the run to the named experiments; `seed` replaces the master_seed.
    """
    suite = apply_scale(load_suite(config_path, master_seed=seed), scale)
    if only:
        missing = set(only) - {e.name for e in suite.experiments}
        if missing:
            raise KeyError(f"unknown experiments {sorted(missing)}")
        suite.experiments = [e for e in suite.experiments if e.name in only]

    root = out or os.path.join(RESULTS_DIR, suite.name + (f"_scale{scale}" if suite.scaled else ""))
    store = ResultsStore(root)
    samples = build_samples(suite)

    entries = []
    for exp in suite.experiments:
        sample = samples[exp.sample_key]
        store.write_sample(exp.name, sample)
        entry = exp.to_dict()
        entry["sample_meta"] = sample.metadata()
        entry["mse_n0"] = mse_loss(constant_network(exp.arch, THEOREM.inner_value), sample)
        entry["seeds"] = [suite.master_seed + r for r in range(exp.runs)]
        entries.append(entry)

    manifest = {
        "tool": "narrownet",
        "version": VERSION,
        "suite": suite.name,
        "source": suite.source,
        "master_seed": suite.master_seed,
        "scale": suite.scale,
        "scaled": suite.scaled,
        "diagnostics": suite.diagnostics,
        "conventions": conventions(suite),
        "experiments": entries,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    store.write_manifest(manifest)

    try:
        for exp in suite.experiments:
            logger.info(f"Experiment {exp.name} ({exp.arch.label()}, {exp.runs} runs, {exp.train.epochs} epochs)")
            jobs = [
                (exp, r, samples[exp.sample_key], suite.master_seed, root, suite.diagnostics)
                for r in range(exp.runs)
            ]
            records = run_jobs(train_one_run, jobs, workers)
            store.write_runs_table(exp.name, records)
            finished = [r.final_sup for r in records if r.completed]
            if finished:
                logger.info(
                    f"{exp.name}: sup min={min(finished):.4f} avg={float(np.mean(finished)):.4f} "
                    f"max={max(finished):.4f} ({len(finished)}/{exp.runs} completed)"
                )
    finally:
        shutdown_executor()

    logger.info(f"Suite {suite.name} finished: {root}")
    return root


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] [%(levelname)-8s] %(message)s")
    print(run_suite(sys.argv[1]))
