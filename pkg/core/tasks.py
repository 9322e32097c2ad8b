"""
Core Tasks Module - Unified task execution layer.

Every CLI subcommand calls one of these functions. Failures are logged and returned as a
TaskResult instead of raised, so a script driving several tasks keeps going.
"""

import os
import sys
import json
import logging
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from autograd import grad_check_report
from diagnostics import classify_dead, diagnostics_summary, export_diagram
from network import ArchSpec, init_network, load_model, save_model
from optim import TrainConfig, train
from results_store import metrics_frame
from sampling import build_sample, radial_ball_sample, sample_from_file, sample_to_file
from task_report import (
    aggregate_table,
    emit_argmax_plot_data,
    emit_figure_data,
    export_network_diagrams,
    format_table,
    verify_suite,
)
from task_suite import run_suite

logger = logging.getLogger(__name__)


class TaskResult:
    """Standardized task result container."""

    def __init__(
        self,
        success: bool,
        message: str = "",
        data: Optional[Dict[str, Any]] = None,
        file_path: Optional[str] = None,
    ):
        self.success = success
        self.message = message
        self.data = data or {}
        self.file_path = file_path
        self.timestamp = datetime.now(timezone.utc).isoformat()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "success": self.success,
            "message": self.message,
            "data": self.data,
            "file_path": self.file_path,
            "timestamp": self.timestamp,
        }


def _failure(task: str, e: Exception) -> TaskResult:
    logger.error(f"{task} failed: {e}", exc_info=True)
    return TaskResult(success=False, message=f"Error: {str(e)}", data={"error": str(e)})


def run_sample(method: str, n: int, out: str, k: Optional[int] = None, count: Optional[int] = None, seed: int = 0) -> TaskResult:
    """Generate a training set and write it as CSV."""
    logger.info(f"Running sample task ({method}, n={n})")
    try:
        spec = {"method": method, "n": n, "seed": seed}
        if k is not None:
            spec["k"] = k
        if count is not None:
            spec["count"] = count
        sample = build_sample(spec)
        sample_to_file(sample, out)
        return TaskResult(
            success=True,
            message=f"{sample.m} {method} points written to {out}",
            data=sample.metadata(),
            file_path=out,
        )
    except Exception as e:
        return _failure("Sample task", e)


def run_train(
    sample_path: str,
    arch: ArchSpec,
    config: TrainConfig,
    out_dir: str,
) -> TaskResult:
    """Train one network on a sample file; writes model.json and metrics.csv."""
    logger.info(f"Running train task ({arch.label()})")
    try:
        sample = sample_from_file(sample_path)
        trained, metrics = train(init_network(arch, config.init_seed), sample, config)
        os.makedirs(out_dir, exist_ok=True)
        model_path = save_model(trained, os.path.join(out_dir, "model.json"))
        metrics_frame(metrics).to_csv(os.path.join(out_dir, "metrics.csv"), index=False, float_format="%.17g")
        last = metrics[-1]
        return TaskResult(
            success=True,
            message=f"Trained {arch.label()}: mse={last.mse:.6f} sup={last.sup_estimate:.4f}",
            data={"mse": last.mse, "sup_estimate": last.sup_estimate, "config": config.to_dict()},
            file_path=model_path,
        )
    except Exception as e:
        return _failure("Train task", e)


def run_diagnose(model_path: str, sample_path: str, out: str, dot: Optional[str] = None, seed: int = 0, directions: int = 10_000) -> TaskResult:
    """Diagnostics summary JSON (and optional DOT diagram) for a stored model."""
    logger.info(f"Running diagnose task ({model_path})")
    try:
        net = load_model(model_path)
        sample = sample_from_file(sample_path)
        summary = diagnostics_summary(net, sample, directions=directions, seed=seed)
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
        if dot:
            export_diagram(net, classify_dead(net, sample), dot)
        dead = summary["dead"]
        return TaskResult(
            success=True,
            message=(
                f"{len(dead['dead'])} dead, {len(dead['partial'])} partial neurons; "
                f"{summary['case']['case']}; sup={summary['bound']['sup_estimate']:.4f}"
            ),
            data=summary,
            file_path=out,
        )
    except Exception as e:
        return _failure("Diagnose task", e)


def run_suite_task(
    config_path: str,
    out: Optional[str] = None,
    scale: int = 1,
    workers: Optional[int] = None,
    only: Optional[List[str]] = None,
    seed: Optional[int] = None,
) -> TaskResult:
    logger.info(f"Running suite task ({config_path}, scale={scale}, seed={seed})")
    try:
        root = run_suite(config_path, out=out, scale=scale, workers=workers, only=only, seed=seed)
        return TaskResult(success=True, message=f"Suite results in {root}", file_path=root)
    except Exception as e:
        return _failure("Suite task", e)


def run_table(results_dir: str) -> TaskResult:
    logger.info(f"Running table task ({results_dir})")
    try:
        rows = aggregate_table(results_dir)
        return TaskResult(
            success=True,
            message=format_table(rows),
            data={"rows": [r.__dict__ for r in rows]},
            file_path=os.path.join(results_dir, "table1.csv"),
        )
    except Exception as e:
        return _failure("Table task", e)


def run_figure(results_dir: str, figure_id: str, argmax: bool = False, diagrams: bool = False, plot: bool = True) -> TaskResult:
    """Curves for a figure id; with argmax/diagrams, `figure_id` names one experiment."""
    logger.info(f"Running figure task ({figure_id})")
    try:
        if argmax:
            paths = emit_argmax_plot_data(results_dir, figure_id, plot=plot)
        elif diagrams:
            paths = list(export_network_diagrams(results_dir, figure_id).values())
        else:
            paths = emit_figure_data(results_dir, figure_id, plot=plot)
        return TaskResult(success=True, message="\n".join(paths), data={"files": paths}, file_path=paths[0])
    except Exception as e:
        return _failure("Figure task", e)


def run_verify(results_dir: str) -> TaskResult:
    logger.info(f"Running verify task ({results_dir})")
    try:
        report = verify_suite(results_dir)
        lines = [f"{name}: {stats}" for name, stats in report["experiments"].items()]
        lines += [f"FAIL {f}" for f in report["failures"]]
        return TaskResult(success=report["passed"], message="\n".join(lines), data=report)
    except Exception as e:
        return _failure("Verify task", e)


def run_gradcheck(archs: List[ArchSpec], trials: int = 100, seed: int = 0, h: float = 1e-6) -> TaskResult:
    """Random (network, single point) gradient checks per architecture."""
    logger.info(f"Running gradcheck task ({len(archs)} architectures, {trials} trials each)")
    try:
        results = {}
        worst = 0.0
        for arch in archs:
            rng = np.random.default_rng(seed)
            max_err, excluded, total = 0.0, 0, 0
            for t in range(trials):
                net = init_network(arch, seed + t)
                for layer in net.layers:
                    layer.bias[:] = rng.uniform(-0.5, 0.5, size=layer.bias.shape)
                point = radial_ball_sample(arch.n, 1, seed + t)
                report = grad_check_report(net, point.points, point.targets, h)
                max_err = max(max_err, report.max_rel_error)
                excluded += report.excluded
                total += report.compared + report.excluded
            results[arch.label()] = {"max_rel_error": max_err, "excluded_share": excluded / total if total else 0.0}
            worst = max(worst, max_err)
        ok = worst < 1e-6
        lines = [f"{label}: max rel error {r['max_rel_error']:.2e}, excluded {100 * r['excluded_share']:.1f}%" for label, r in results.items()]
        return TaskResult(success=ok, message="\n".join(lines), data=results)
    except Exception as e:
        return _failure("Gradcheck task", e)
