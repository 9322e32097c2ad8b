"""
Suite configuration (TOML).

Layout:

    name = "n2_w2"
    master_seed = 1000
    runs = 10                      # default per experiment

    [train]                        # defaults for every experiment
    optimizer = "adam"
    epochs = 50

    [diagnostics]
    directions = 10000
    convexity_pairs = 10000
    argmax_tol = 1e-6

    [samples.grid100]
    method = "grid"
    n = 2
    k = 100

    [[experiment]]
    name = "grid_w2_d1"
    figure = "fig1"
    n = 2
    w = 2
    d = 1
    sample = "grid100"
    [experiment.train]             # optional overrides
    epochs = 100

Run r of every experiment uses init_seed = shuffle_seed = master_seed + r.
"""

import copy
import logging
import math
import re
import tomllib
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

from network import ArchSpec
from optim import TrainConfig
from sampling import METHODS

logger = logging.getLogger(__name__)

DEFAULT_DIAGNOSTICS = {"directions": 10_000, "convexity_pairs": 10_000, "argmax_tol": 1e-6}
_TRAIN_KEYS = {"optimizer", "lr", "beta1", "beta2", "epsilon", "epochs", "batch_size"}
_EXPERIMENT_RE = re.compile(r"^\s*\[\[\s*experiment\s*\]\]")
_SAMPLE_RE = re.compile(r"^\s*\[\s*samples\.\"?([^\]\"]+?)\"?\s*\]")


class ConfigError(ValueError):
    """Raised for unparseable or inconsistent suite configuration."""


@dataclass
class ExperimentConfig:
    name: str
    n: int
    w: int
    d: int
    sample_key: str
    sample: Dict[str, Any]
    runs: int
    train: TrainConfig
    figure: Optional[str] = None
    output_dir: Optional[str] = None

    @property
    def arch(self) -> ArchSpec:
        return ArchSpec(self.n, self.w, self.d)

    @property
    def label(self) -> str:
        method = "random" if self.sample["method"] == "uniform" else self.sample["method"]
        return f"{method}, w={self.w}, d={self.d}"

    def run_train_config(self, master_seed: int, run_index: int) -> TrainConfig:
        seed = master_seed + run_index
        return replace(self.train, init_seed=seed, shuffle_seed=seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "label": self.label,
            "n": self.n,
            "w": self.w,
            "d": self.d,
            "sample_key": self.sample_key,
            "sample": self.sample,
            "runs": self.runs,
            "train": self.train.to_dict(),
            "figure": self.figure,
        }


@dataclass
class SuiteConfig:
    name: str
    master_seed: int
    experiments: List[ExperimentConfig]
    samples: Dict[str, Dict[str, Any]]
    diagnostics: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_DIAGNOSTICS))
    source: Optional[str] = None
    scale: int = 1

    @property
    def scaled(self) -> bool:
        return self.scale > 1

    def experiment(self, name: str) -> ExperimentConfig:
        for exp in self.experiments:
            if exp.name == name:
                return exp
        raise KeyError(name)


def _experiment_lines(text: str) -> List[int]:
    return [i for i, line in enumerate(text.splitlines(), start=1) if _EXPERIMENT_RE.match(line)]


def _sample_lines(text: str) -> Dict[str, int]:
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        match = _SAMPLE_RE.match(line)
        if match:
            lines.setdefault(match.group(1).strip(), i)
    return lines


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _train_config(base: Dict[str, Any], override: Dict[str, Any], where: str) -> TrainConfig:
    merged = {**base, **override}
    unknown = set(merged) - _TRAIN_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown train keys {sorted(unknown)}")
    try:
        return TrainConfig(**merged)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _sample_spec(raw: Any, master_seed: int, at: str) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError(f"{at}: must be a table")
    spec = dict(raw)
    method = spec.get("method")
    if method not in METHODS:
        raise ConfigError(f"{at}: method must be one of {METHODS}, got {method!r}")
    spec["n"] = _int(spec.get("n"), f"{at}: n")
    if method == "grid":
        spec["k"] = _int(spec.get("k"), f"{at}: k")
    else:
        spec["count"] = _int(spec.get("count"), f"{at}: count")
        spec["seed"] = _int(spec.get("seed", master_seed), f"{at}: seed")
    return spec


def parse_suite(text: str, source: Optional[str] = None, master_seed: Optional[int] = None) -> SuiteConfig:
    """`master_seed`, when given, overrides the file's master_seed."""
    where = source or "<config>"
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # tomllib reports "(at line L, column C)"
        raise ConfigError(f"{where}: {e}") from e

    if master_seed is None:
        master_seed = _int(data.get("master_seed", 0), "master_seed")
    else:
        master_seed = _int(master_seed, "master_seed")
    default_runs = _int(data.get("runs", 10), "runs")
    base_train = data.get("train", {})
    diagnostics = {**DEFAULT_DIAGNOSTICS, **data.get("diagnostics", {})}

    sample_lines = _sample_lines(text)
    samples = {}
    for key, raw in data.get("samples", {}).items():
        line = sample_lines.get(key)
        at = f"{where}: samples.{key}" + (f" (line {line})" if line else "")
        samples[key] = _sample_spec(raw, master_seed, at)

    raw_experiments = data.get("experiment", [])
    if not raw_experiments:
        raise ConfigError(f"{where}: no [[experiment]] blocks")
    lines = _experiment_lines(text)

    experiments, names = [], set()
    for i, raw in enumerate(raw_experiments):
        line = lines[i] if i < len(lines) else None
        at = f"{where}: experiment #{i + 1}" + (f" (line {line})" if line else "")
        try:
            name = raw["name"]
            n, w, d = (_int(raw[k], f"{at}: {k}") for k in ("n", "w", "d"))
            sample_key = raw["sample"]
        except KeyError as e:
            raise ConfigError(f"{at}: missing key {e}") from e
        if name in names:
            raise ConfigError(f"{at}: duplicate experiment name {name!r}")
        names.add(name)
        if sample_key not in samples:
            raise ConfigError(f"{at}: unknown sample {sample_key!r}")
        if samples[sample_key]["n"] != n:
            raise ConfigError(f"{at}: sample {sample_key!r} has n={samples[sample_key]['n']}, experiment n={n}")
        try:
            ArchSpec(n, w, d)
        except ValueError as e:
            raise ConfigError(f"{at}: {e}") from e
        runs = _int(raw.get("runs", default_runs), f"{at}: runs")
        if runs < 1:
            raise ConfigError(f"{at}: runs must be >= 1")

        experiments.append(
            ExperimentConfig(
                name=name,
                n=n,
                w=w,
                d=d,
                sample_key=sample_key,
                sample=samples[sample_key],
                runs=runs,
                train=_train_config(base_train, raw.get("train", {}), at),
                figure=raw.get("figure"),
            )
        )

    return SuiteConfig(
        name=data.get("name", "suite"),
        master_seed=master_seed,
        experiments=experiments,
        samples=samples,
        diagnostics=diagnostics,
        source=source,
    )


def load_suite(path: str, master_seed: Optional[int] = None) -> SuiteConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return parse_suite(text, source=path, master_seed=master_seed)


def apply_scale(suite: SuiteConfig, scale: int) -> SuiteConfig:
    """
    Divide random-sample counts and epochs by `scale` (rounding up, at least 1).

    Grid samples keep their lattice. Scaled suites are labelled and never compared
    against the reference bands.
    """
    if scale < 1:
        raise ConfigError(f"scale must be >= 1, got {scale}")
    if scale == 1:
        return suite
    scaled = copy.deepcopy(suite)
    scaled.scale = scale
    for spec in scaled.samples.values():
        if "count" in spec:
            spec["count"] = max(1, math.ceil(spec["count"] / scale))
    for exp in scaled.experiments:
        exp.sample = scaled.samples[exp.sample_key]
        exp.train = replace(exp.train, epochs=max(1, math.ceil(exp.train.epochs / scale)))
    logger.info(f"Suite {suite.name} scaled down by {scale}")
    return scaled
