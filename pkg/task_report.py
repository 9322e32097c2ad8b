#!/usr/bin/env python3
"""
Reports over a finished suite:
- Table 1: min / avg / max of the final sup-norm estimate per experiment
- figure data: per-epoch best / worst / average loss and sup-norm with the N0 line
- argmax scatter data for n = 2
- DOT diagrams of the best, an average and the worst network
- acceptance checks over the stored records
"""

import logging
import sys
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from diagnostics import argmax_set, classify_dead, export_diagram
from results_store import ResultsStore, RunRecord
from target import THEOREM, best_constant

logger = logging.getLogger(__name__)

BOUNDARY_POINTS = 360


class FigureError(ValueError):
    """Raised for unknown figure ids or data a plot cannot show."""


@dataclass
class Table1Row:
    label: str
    experiment: str
    n: int
    w: int
    d: int
    runs: int
    completed: int
    min: Optional[float]
    avg: Optional[float]
    max: Optional[float]
    incomplete: bool
    scaled: bool


def summarize(values: Sequence[float]) -> Tuple[float, float, float]:
    """(min, avg, max) of the final sup-norm estimates."""
    if len(values) == 0:
        raise ValueError("no values to summarize")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.min()), float(arr.mean()), float(arr.max())


def _completed(store: ResultsStore, experiment: str) -> List[RunRecord]:
    return [r for r in store.iter_records(experiment) if r.completed]


# ============ Table 1 ============


def aggregate_table(results_dir: str) -> List[Table1Row]:
    store = ResultsStore(results_dir)
    manifest = store.read_manifest()
    rows = []
    for entry in manifest["experiments"]:
        records = _completed(store, entry["name"])
        sups = [r.final_sup for r in records]
        stats = summarize(sups) if sups else (None, None, None)
        incomplete = len(records) < entry["runs"]
        if incomplete:
            logger.warning(f"{entry['name']}: {len(records)} of {entry['runs']} runs completed")
        rows.append(
            Table1Row(
                label=entry["label"],
                experiment=entry["name"],
                n=entry["n"],
                w=entry["w"],
                d=entry["d"],
                runs=entry["runs"],
                completed=len(records),
                min=stats[0],
                avg=stats[1],
                max=stats[2],
                incomplete=incomplete,
                scaled=manifest.get("scaled", False),
            )
        )

    frame = pd.DataFrame([asdict(r) for r in rows])
    path = store.report_path("table1.csv")
    frame.to_csv(path, index=False, float_format="%.4f")
    logger.info(f"Table 1 written to {path}")
    return rows


def format_table(rows: List[Table1Row]) -> str:
    lines = [f"{'Training set, depth':<28} {'min':>7} {'avg':>7} {'max':>7}"]
    for r in rows:
        if r.min is None:
            lines.append(f"{r.label:<28} {'-':>7} {'-':>7} {'-':>7}  (no completed runs)")
            continue
        flag = "  (incomplete)" if r.incomplete else ""
        lines.append(f"{r.label:<28} {r.min:7.4f} {r.avg:7.4f} {r.max:7.4f}{flag}")
    return "\n".join(lines)


# ============ Training curves ============


def figure_experiments(store: ResultsStore, figure_id: str) -> List[dict]:
    entries = [e for e in store.experiments() if e.get("figure") == figure_id or e["name"] == figure_id]
    if not entries:
        known = sorted({e.get("figure") for e in store.experiments() if e.get("figure")})
        raise FigureError(f"unknown figure id {figure_id!r}; known: {known}")
    return entries


def curve_frame(store: ResultsStore, entry: dict) -> pd.DataFrame:
    """Per-epoch best / worst / average series; best and worst by final sup-norm."""
    records = _completed(store, entry["name"])
    if not records:
        raise FigureError(f"{entry['name']} has no completed runs")
    frames = {r.run_index: store.read_metrics(entry["name"], r.run_index) for r in records}
    best = min(records, key=lambda r: (r.final_sup, r.run_index)).run_index
    worst = max(records, key=lambda r: (r.final_sup, -r.run_index)).run_index

    mse = np.stack([frames[i]["mse"].to_numpy() for i in frames])
    sup = np.stack([frames[i]["sup_estimate"].to_numpy() for i in frames])
    return pd.DataFrame(
        {
            "epoch": frames[best]["epoch"],
            "mse_best": frames[best]["mse"],
            "mse_worst": frames[worst]["mse"],
            "mse_avg": mse.mean(axis=0),
            "mse_n0": entry["mse_n0"],
            "sup_best": frames[best]["sup_estimate"],
            "sup_worst": frames[worst]["sup_estimate"],
            "sup_avg": sup.mean(axis=0),
            "sup_n0": THEOREM.inner_value,
        }
    )


def plot_curves(panels: List[Tuple[dict, pd.DataFrame]], title: str, path: str) -> str:
    fig, axes = plt.subplots(2, len(panels), figsize=(5 * len(panels), 8), squeeze=False)
    fig.suptitle(title, fontsize=14, fontweight="bold")
    for col, (entry, frame) in enumerate(panels):
        for row, (metric, ylabel) in enumerate((("mse", "MSE loss"), ("sup", "sup-norm estimate"))):
            ax = axes[row, col]
            ax.plot(frame["epoch"], frame[f"{metric}_best"], color="#2E7D32", linewidth=1.5, label="best")
            ax.plot(frame["epoch"], frame[f"{metric}_worst"], color="#8D6E63", linewidth=1.5, label="worst")
            ax.plot(frame["epoch"], frame[f"{metric}_avg"], color="#1565C0", linewidth=1.5, label="average")
            ax.axhline(y=frame[f"{metric}_n0"].iloc[0], color="black", linestyle="--", linewidth=1, label="N0")
            ax.set_xlabel("epoch")
            ax.set_ylabel(ylabel)
            ax.grid(True, alpha=0.3)
            if row == 0:
                ax.set_title(f"d={entry['d']}", fontsize=12)
    axes[0, 0].legend(fontsize=9)
    plt.tight_layout()
    plt.savefig(path, format="svg", bbox_inches="tight", facecolor="white")
    plt.close(fig)
    return path


def emit_figure_data(results_dir: str, figure_id: str, plot: bool = True) -> List[str]:
    store = ResultsStore(results_dir)
    entries = figure_experiments(store, figure_id)
    panels, paths = [], []
    for entry in entries:
        frame = curve_frame(store, entry)
        path = store.report_path("figures", f"{figure_id}_{entry['name']}.csv")
        frame.to_csv(path, index=False, float_format="%.17g")
        panels.append((entry, frame))
        paths.append(path)

    if plot:
        first = entries[0]
        title = f"n={first['n']}, w={first['w']}: loss and sup-norm over {len(panels[0][1])} epochs"
        paths.append(plot_curves(panels, title, store.report_path("figures", f"{figure_id}.svg")))
    logger.info(f"Figure {figure_id}: {len(paths)} files")
    return paths


# ============ Maximizers ============


def argmax_frame(store: ResultsStore, experiment: str, tol: float) -> pd.DataFrame:
    entry = store.experiment_entry(experiment)
    if entry["n"] != 2:
        raise FigureError(f"argmax scatter needs n = 2, {experiment} has n = {entry['n']}")
    records = _completed(store, experiment)
    if not records:
        raise FigureError(f"{experiment} has no completed runs")
    sample = store.read_sample(experiment)

    groups = []
    for r in records:
        points = argmax_set(store.load_run_model(experiment, r.run_index), sample, tol)
        groups.append(pd.DataFrame({"group": f"run_{r.run_index:02d}", "x_1": points[:, 0], "x_2": points[:, 1]}))
    angles = np.linspace(0.0, 2.0 * np.pi, BOUNDARY_POINTS, endpoint=False)
    groups.append(
        pd.DataFrame({"group": "boundary", "x_1": 0.5 + 0.5 * np.cos(angles), "x_2": 0.5 + 0.5 * np.sin(angles)})
    )
    return pd.concat(groups, ignore_index=True)


def emit_argmax_plot_data(results_dir: str, experiment: str, tol: Optional[float] = None, plot: bool = True) -> List[str]:
    store = ResultsStore(results_dir)
    if tol is None:
        tol = float(store.read_manifest()["diagnostics"]["argmax_tol"])
    frame = argmax_frame(store, experiment, tol)
    path = store.report_path("figures", f"argmax_{experiment}.csv")
    frame.to_csv(path, index=False, float_format="%.17g")
    paths = [path]

    if plot:
        fig, ax = plt.subplots(figsize=(5, 5))
        boundary = frame[frame["group"] == "boundary"]
        ax.plot(
            np.append(boundary["x_1"], boundary["x_1"].iloc[0]),
            np.append(boundary["x_2"], boundary["x_2"].iloc[0]),
            color="black",
            linewidth=0.8,
        )
        for group, points in frame[frame["group"] != "boundary"].groupby("group"):
            ax.scatter(points["x_1"], points["x_2"], s=12, label=group)
        ax.set_aspect("equal")
        ax.set_title(f"Maximizers of |f - N|: {experiment}", fontsize=11)
        ax.legend(fontsize=7, loc="center")
        svg = store.report_path("figures", f"argmax_{experiment}.svg")
        plt.savefig(svg, format="svg", bbox_inches="tight", facecolor="white")
        plt.close(fig)
        paths.append(svg)
    return paths


# ============ Network diagrams ============


def export_network_diagrams(results_dir: str, experiment: str) -> Dict[str, str]:
    """DOT files for the best, an about-average and the worst run by final sup-norm."""
    store = ResultsStore(results_dir)
    records = sorted(_completed(store, experiment), key=lambda r: (r.final_sup, r.run_index))
    if not records:
        raise FigureError(f"{experiment} has no completed runs")
    mean = float(np.mean([r.final_sup for r in records]))
    picks = {
        "best": records[0],
        "average": min(records, key=lambda r: (abs(r.final_sup - mean), r.run_index)),
        "worst": records[-1],
    }
    sample = store.read_sample(experiment)
    paths = {}
    for role, record in picks.items():
        net = store.load_run_model(experiment, record.run_index)
        path = store.report_path("diagrams", f"{experiment}_{role}_run{record.run_index:02d}.dot")
        paths[role] = export_diagram(net, classify_dead(net, sample), path)
    return paths


# ============ Acceptance checks ============


def verify_suite(results_dir: str) -> dict:
    """
    Check the stored runs against the theorem floor and the dying-neuron observations.

    Hard failures: a width <= n run below eta - 1e-6, an SGD revival, an S_N check
    failure. Everything else is reported as a statistic for inspection.
    """
    store = ResultsStore(results_dir)
    manifest = store.read_manifest()
    report = {"scaled": manifest.get("scaled", False), "experiments": {}, "failures": []}
    floor = THEOREM.eta - 1e-6

    for entry in manifest["experiments"]:
        records = _completed(store, entry["name"])
        narrow = entry["w"] <= entry["n"]
        sups = [r.final_sup for r in records]
        constant = [r for r in records if r.constant]
        nearer_best = sum(
            abs(r.constant_value - best_constant(entry["n"])) < abs(r.constant_value - THEOREM.inner_value)
            for r in constant
        )
        stats = {
            "completed": len(records),
            "runs": entry["runs"],
            "with_dead_neuron": sum(r.dead > 0 for r in records),
            "dichotomy": sum(r.dichotomy for r in records),
            "dead_layer": sum(r.first_dead_layer is not None for r in records),
            "constant": len(constant),
            "constant_nearer_best_constant": nearer_best,
            "revived": sum(r.revived for r in records),
            "share_sup_at_least_0.120": float(np.mean([s >= 0.120 for s in sups])) if sups else None,
            "best_sup": min(sups) if sups else None,
            "avg_sup": float(np.mean(sups)) if sups else None,
        }
        report["experiments"][entry["name"]] = stats

        if narrow:
            for r in records:
                if r.final_sup < floor:
                    report["failures"].append(f"{entry['name']} run {r.run_index}: sup {r.final_sup:.6f} < eta")
        if entry["train"]["optimizer"] == "sgd" and stats["revived"]:
            report["failures"].append(f"{entry['name']}: {stats['revived']} dead neurons revived under SGD")
        for r in records:
            checks = r.checks
            if checks.get("collapse_max_error", 0.0) >= 1e-12:
                report["failures"].append(f"{entry['name']} run {r.run_index}: affine collapse error {checks['collapse_max_error']:.3e}")
            if checks.get("convexity_violations", 0):
                report["failures"].append(f"{entry['name']} run {r.run_index}: S_N convexity violated")
            if not checks.get("dead_implies_case2", True):
                report["failures"].append(f"{entry['name']} run {r.run_index}: dead neuron but case 1")

    report["passed"] = not report["failures"]
    return report


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] [%(levelname)-8s] %(message)s")
    print(format_table(aggregate_table(sys.argv[1])))
