"""
Results directory manager.

Layout under the suite root:

    manifest.json                       seeds, conventions, experiments, tool version
    <experiment>/sample.csv             training set (x_1..x_n, f)
    <experiment>/runs.csv               one row per run (final metrics)
    <experiment>/run_<r>/metrics.csv    epoch,mse,sup_estimate,zf_<layer>_<neuron>...
    <experiment>/run_<r>/model.json     trained network
    <experiment>/run_<r>/diagnostics.json
    <experiment>/run_<r>/record.json
    table1.csv, figures/, diagrams/     report outputs

Every file belongs to exactly one run or one report step, so parallel runs never share
a mutable file.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Optional

import pandas as pd

from network import ReluNetwork, load_model, save_model
from optim import EpochMetrics
from sampling import Sample, sample_from_file, sample_to_file

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@dataclass
class RunRecord:
    experiment: str
    run_index: int
    init_seed: int
    shuffle_seed: int
    status: str = "ok"
    epochs: int = 0
    final_mse: Optional[float] = None
    final_sup: Optional[float] = None
    dead: int = 0
    partial: int = 0
    first_dead_layer: Optional[int] = None
    dichotomy: bool = False
    constant: bool = False
    constant_value: Optional[float] = None
    case: Optional[str] = None
    revived: int = 0
    model_path: Optional[str] = None
    error: Optional[str] = None
    checks: Dict[str, Any] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(**data)


def metrics_frame(metrics: List[EpochMetrics]) -> pd.DataFrame:
    """epoch, mse, sup_estimate, then zf_<layer>_<neuron> (1-based)."""
    rows = []
    for m in metrics:
        row = {"epoch": m.epoch, "mse": m.mse, "sup_estimate": m.sup_estimate}
        for li, zf in enumerate(m.zero_fractions, start=1):
            for ni, value in enumerate(zf, start=1):
                row[f"zf_{li}_{ni}"] = float(value)
        rows.append(row)
    return pd.DataFrame(rows)


class ResultsStore:
    """
    Reads and writes one suite's results directory.
    """

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    # ============ Paths ============

    def experiment_dir(self, experiment: str) -> str:
        return os.path.join(self.root, experiment)

    def run_dir(self, experiment: str, run_index: int) -> str:
        return os.path.join(self.root, experiment, f"run_{run_index:02d}")

    def report_path(self, *parts: str) -> str:
        path = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    # ============ Manifest ============

    def write_manifest(self, manifest: dict):
        with open(os.path.join(self.root, MANIFEST), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    def read_manifest(self) -> dict:
        path = os.path.join(self.root, MANIFEST)
        if not os.path.exists(path):
            raise FileNotFoundError(f"{self.root} has no {MANIFEST}; run a suite first")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def experiments(self) -> List[dict]:
        return self.read_manifest().get("experiments", [])

    def experiment_entry(self, name: str) -> dict:
        for entry in self.experiments():
            if entry["name"] == name:
                return entry
        raise KeyError(f"unknown experiment {name!r} in {self.root}")

    # ============ Samples ============

    def write_sample(self, experiment: str, sample: Sample) -> str:
        return sample_to_file(sample, os.path.join(self.experiment_dir(experiment), "sample.csv"))

    def read_sample(self, experiment: str) -> Sample:
        entry = self.experiment_entry(experiment)
        spec = entry["sample"]
        return sample_from_file(
            os.path.join(self.experiment_dir(experiment), "sample.csv"),
            method=spec["method"],
            seed=spec.get("seed"),
        )

    # ============ Runs ============

    def write_run(
        self,
        record: RunRecord,
        metrics: List[EpochMetrics],
        net: Optional[ReluNetwork],
        diagnostics: Optional[dict],
    ) -> RunRecord:
        run_dir = self.run_dir(record.experiment, record.run_index)
        os.makedirs(run_dir, exist_ok=True)
        metrics_frame(metrics).to_csv(
            os.path.join(run_dir, "metrics.csv"), index=False, float_format="%.17g"
        )
        if net is not None:
            record.model_path = os.path.relpath(
                save_model(net, os.path.join(run_dir, "model.json")), self.root
            )
        if diagnostics is not None:
            with open(os.path.join(run_dir, "diagnostics.json"), "w", encoding="utf-8") as f:
                json.dump(diagnostics, f, indent=2)
        with open(os.path.join(run_dir, "record.json"), "w", encoding="utf-8") as f:
            json.dump(record.to_dict(), f, indent=2)
        return record

    def read_record(self, experiment: str, run_index: int) -> RunRecord:
        with open(os.path.join(self.run_dir(experiment, run_index), "record.json"), "r", encoding="utf-8") as f:
            return RunRecord.from_dict(json.load(f))

    def iter_records(self, experiment: str) -> Iterator[RunRecord]:
        """Records of the runs the manifest expects; missing runs are skipped."""
        runs = self.experiment_entry(experiment)["runs"]
        for r in range(runs):
            try:
                yield self.read_record(experiment, r)
            except FileNotFoundError:
                logger.warning(f"{experiment}: run {r} has no record")

    def read_metrics(self, experiment: str, run_index: int) -> pd.DataFrame:
        return pd.read_csv(
            os.path.join(self.run_dir(experiment, run_index), "metrics.csv"),
            float_precision="round_trip",
        )

    def read_diagnostics(self, experiment: str, run_index: int) -> dict:
        with open(os.path.join(self.run_dir(experiment, run_index), "diagnostics.json"), "r", encoding="utf-8") as f:
            return json.load(f)

    def load_run_model(self, experiment: str, run_index: int) -> ReluNetwork:
        return load_model(os.path.join(self.run_dir(experiment, run_index), "model.json"))

    def write_runs_table(self, experiment: str, records: List[RunRecord]) -> str:
        columns = [
            "run_index", "init_seed", "shuffle_seed", "status", "epochs", "final_mse",
            "final_sup", "dead", "partial", "first_dead_layer", "dichotomy", "constant",
            "constant_value", "case", "revived",
        ]
        frame = pd.DataFrame([{k: getattr(r, k) for k in columns} for r in records], columns=columns)
        path = os.path.join(self.experiment_dir(experiment), "runs.csv")
        frame.to_csv(path, index=False, float_format="%.17g")
        return path
