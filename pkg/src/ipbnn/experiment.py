"""Experiment configuration, training/estimation runs and JSON-lines run logs."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bnn, data
from .analysis import (
    DEFAULT_WINDOW,
    InsufficientDataError,
    IpTrajectory,
    UndefinedCorrelationError,
    RunSummary,
    build_run_summary,
    correlate_group,
    correlation_csv,
    summary_csv,
    window_records,
)
from .estimator import RegimeVerdict, check_regime, layer_information

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WEIGHT_DECAYS = (0.0, 0.1, 0.2, 0.5, 0.7, 1.0, 1.1, 1.2, 1.5, 1.7, 2.0)
VARIANT_WIDTHS = (2, 4, 6, 8, 10)

# Hidden-layer widths; the class-count output layer is appended separately.
PRESETS: dict[str, tuple] = {
    "szt": (10, 8, 6, 4),
    "raj_like": (1024, 20, 20, 20, 10),
    "hourglass": (1024, 20, 10, "A", 10, 20, 10),
    "bottleneck": (1024, 20, 10, "A", 10),
    "small_bnn": (50, 10, 10),
}

DATASET_KINDS = ("mnist", "fashion_mnist", "szt", "szt_standin")


class ConfigError(ValueError):
    pass


class RecordError(ValueError):
    pass


def expand_preset(name: str, variant: dict[str, int] | None = None) -> tuple[int, ...]:
    if name not in PRESETS:
        raise ConfigError(f"unknown architecture preset {name!r}; choose from {sorted(PRESETS)}")
    variant = variant or {}
    widths = []
    for w in PRESETS[name]:
        if isinstance(w, str):
            if w not in variant:
                raise ConfigError(f"preset {name!r} needs variant parameter {w!r}")
            if variant[w] not in VARIANT_WIDTHS:
                raise ConfigError(f"variant {w}={variant[w]} not in {VARIANT_WIDTHS}")
            w = variant[w]
        widths.append(int(w))
    extra = set(variant) - {w for w in PRESETS[name] if isinstance(w, str)}
    if extra:
        raise ConfigError(f"preset {name!r} takes no variant parameters {sorted(extra)}")
    return tuple(widths)


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    dir: str | None = None
    path: str | None = None
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_subset: int | None = None
    validation_fraction: float = 0.2
    split_seed: int = 0
    standin_seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        if not isinstance(d, dict) or "name" not in d:
            raise ConfigError("dataset must be an object with a 'name'")
        _check_keys(d, set(cls.__dataclass_fields__), "dataset")
        cfg = cls(**d)
        if cfg.name not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset {cfg.name!r}; choose from {DATASET_KINDS}")
        if not 0.0 < cfg.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        return cfg

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    architecture: str | tuple[int, ...]
    variant: dict[str, int] = field(default_factory=dict)
    lambdas: tuple[float, ...] = (0.0,)
    learning_rate: float = 1e-5
    batch_size: int = 256
    epochs: int = 3000
    runs: int = 3
    seed: int = 0
    stride: int = 1
    window: int = DEFAULT_WINDOW
    group: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.architecture, list):
            object.__setattr__(self, "architecture", tuple(int(w) for w in self.architecture))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        widths = self.hidden_widths
        if not widths or min(widths) < 1:
            raise ConfigError(f"invalid hidden widths {widths}")
        for lam in self.lambdas:
            if lam not in WEIGHT_DECAYS:
                raise ConfigError(f"weight decay {lam} not in {WEIGHT_DECAYS}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        for name in ("batch_size", "epochs", "runs", "stride", "window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        if isinstance(self.architecture, str):
            return expand_preset(self.architecture, self.variant)
        if self.variant:
            raise ConfigError("variant parameters apply only to named presets")
        return tuple(self.architecture)

    @property
    def group_name(self) -> str:
        if self.group:
            return self.group
        if isinstance(self.architecture, str):
            return self.architecture + "".join(f"_{k}{v}" for k, v in sorted(self.variant.items()))
        return "custom_" + "-".join(str(w) for w in self.architecture)

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.runs))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(d, set(cls.__dataclass_fields__), "config")
        if "dataset" not in d or "architecture" not in d:
            raise ConfigError("config needs 'dataset' and 'architecture'")
        kw = dict(d)
        kw["dataset"] = DatasetConfig.from_dict(d["dataset"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        arch = self.architecture if isinstance(self.architecture, str) else list(self.architecture)
        return {
            "dataset": self.dataset.to_dict(),
            "architecture": arch,
            "variant": dict(sorted(self.variant.items())),
            "lambdas": list(self.lambdas),
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "runs": self.runs,
            "seed": self.seed,
            "stride": self.stride,
            "window": self.window,
            "group": self.group,
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(raw)


def load_datasets(cfg: DatasetConfig) -> tuple[data.LabeledDataset, data.LabeledDataset]:
    """Return ``(train, estimation)``; IDX datasets use their test split for estimation."""
    if cfg.name in ("mnist", "fashion_mnist"):
        if cfg.train_images:
            train = data.load_idx(cfg.train_images, cfg.train_labels, name=cfg.name)
            test = data.load_idx(cfg.test_images, cfg.test_labels, name=cfg.name)
        elif cfg.dir:
            train = data.load_idx_dir(cfg.dir, "train", name=cfg.name)
            test = data.load_idx_dir(cfg.dir, "t10k", name=cfg.name)
        else:
            raise ConfigError(f"dataset {cfg.name!r} needs 'dir' or explicit IDX paths")
    else:
        if cfg.name == "szt":
            if not cfg.path:
                raise ConfigError("dataset 'szt' needs 'path'")
            full = data.load_szt(cfg.path)
        else:
            full = data.generate_szt_standin(cfg.standin_seed)
        train, test = data.split(full, cfg.validation_fraction, cfg.split_seed)
    if cfg.train_subset is not None:
        if not 1 <= cfg.train_subset <= len(train):
            raise ConfigError(f"train_subset must lie in [1, {len(train)}]")
        train = train.subset(np.arange(cfg.train_subset))
    return train, test


def _lambda_tag(lam: float) -> str:
    return f"{lam:g}".replace(".", "p")


def run_id_for(config: ExperimentConfig, lam: float, seed: int) -> str:
    raw = f"{config.dataset.name}_{config.group_name}_wd{_lambda_tag(lam)}_s{seed}"
    return re.sub(r"[^A-Za-z0-9_.-]", "-", raw)


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def run_single(
    config: ExperimentConfig,
    lam: float,
    seed: int,
    train: data.LabeledDataset,
    test: data.LabeledDataset,
    output_dir,
) -> Path:
    """Train one (weight decay, seed) cell and write its run log."""
    widths = config.hidden_widths
    arch = bnn.ArchitectureSpec(train.dim, widths, train.class_count)
    model = bnn.BnnModel(arch, seed=seed)
    opt = bnn.OptimizerState.for_weight_decay(config.learning_rate, lam)
    offsets = arch.layer_offsets
    verdicts = [check_regime(len(test), w) for w in widths]
    run_id = run_id_for(config, lam, seed)
    header = {
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": seed,
        "lambda": lam,
        "dataset": config.dataset.name,
        "group": config.group_name,
        "class_count": train.class_count,
        "sample_count": len(test),
        "layer_widths": list(widths),
        "layer_offsets": offsets,
        "regime_flags": [v.reliable for v in verdicts],
        "stride": config.stride,
        "window": config.window,
    }
    path = Path(output_dir) / f"{run_id}.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for epoch in range(1, config.epochs + 1):
            loss = bnn.train_epoch(model, opt, train.inputs, train.labels,
                                   config.batch_size, seed, epoch)
            if epoch % config.stride:
                continue
            model.eval()
            acc, patterns = bnn.evaluate(model, test.inputs, test.labels)
            layers = []
            for off, pat in zip(offsets, patterns):
                mi_xt, mi_ty = layer_information(pat, test.labels)
                layers.append({"offset": off, "mi_xt": mi_xt, "mi_ty": mi_ty})
            fh.write(_dumps({"epoch": epoch, "train_loss": loss, "val_accuracy": acc,
                             "layers": layers}) + "\n")
            model.train()
            if epoch == config.stride or epoch % max(1, config.epochs // 10) == 0:
                log.info("%s epoch %d loss %.4f acc %.2f", run_id, epoch, loss, acc)
    return path


def run_experiment(config: ExperimentConfig, output_dir) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = load_datasets(config.dataset)
    paths = []
    for lam in config.lambdas:
        for seed in config.seeds:
            paths.append(run_single(config, lam, seed, train, test, out))
    return paths


# ---------------------------------------------------------------------------
# run records


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    layers: list[dict]


@dataclass
class RunRecord:
    header: dict
    epochs: list[EpochRecord]

    @property
    def run_id(self) -> str:
        return self.header["run_id"]

    @property
    def layer_offsets(self) -> list[int]:
        return list(self.header["layer_offsets"])

    def width_of(self, offset: int) -> int:
        return self.header["layer_widths"][self.layer_offsets.index(offset)]

    def regime_of(self, offset: int) -> RegimeVerdict:
        return check_regime(self.header["sample_count"], self.width_of(offset))

    def trajectory(self, offset: int) -> IpTrajectory:
        if offset not in self.layer_offsets:
            raise KeyError(f"run {self.run_id} has no layer {offset}")
        epochs, xt, ty, acc = [], [], [], []
        for rec in self.epochs:
            entry = next(e for e in rec.layers if e["offset"] == offset)
            epochs.append(rec.epoch)
            xt.append(entry["mi_xt"])
            ty.append(entry["mi_ty"])
            acc.append(rec.val_accuracy)
        return IpTrajectory(offset, epochs, xt, ty, acc, width=self.width_of(offset))

    def trajectories(self) -> list[IpTrajectory]:
        return [self.trajectory(off) for off in self.layer_offsets]

    def summary(self) -> RunSummary:
        h = self.header
        return build_run_summary(
            self.trajectories(),
            regime={off: self.regime_of(off) for off in self.layer_offsets},
            window=window_records(h.get("window", DEFAULT_WINDOW), h.get("stride", 1)),
            run_id=h["run_id"], config_hash=h.get("config_hash", ""),
            dataset=h.get("dataset", ""), group=h.get("group", ""),
            seed=h.get("seed", 0), weight_decay=float(h.get("lambda", 0.0)),
        )


_HEADER_KEYS = ("schema_version", "run_id", "seed", "layer_widths", "layer_offsets",
                "regime_flags", "sample_count")


def read_run_record(path) -> RunRecord:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise RecordError(f"{path}: empty run log")
    try:
        header = json.loads(lines[0])
        epochs = [EpochRecord(**json.loads(line)) for line in lines[1:] if line.strip()]
    except (json.JSONDecodeError, TypeError) as exc:
        raise RecordError(f"{path}: corrupt run log ({exc})") from exc
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise RecordError(f"{path}: header lacks {missing}")
    if header["schema_version"] != SCHEMA_VERSION:
        raise RecordError(f"{path}: unsupported schema version {header['schema_version']}")
    if not epochs:
        raise RecordError(f"{path}: run log has no epoch records")
    return RunRecord(header, epochs)


def write_run_record(record: RunRecord, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(record.header) + "\n")
        for rec in record.epochs:
            fh.write(_dumps({"epoch": rec.epoch, "train_loss": rec.train_loss,
                             "val_accuracy": rec.val_accuracy, "layers": rec.layers}) + "\n")


def read_run_dir(run_dir) -> list[RunRecord]:
    paths = sorted(Path(run_dir).glob("*.jsonl"))
    if not paths:
        raise RecordError(f"{run_dir}: no run logs (*.jsonl)")
    return [read_run_record(p) for p in paths]


def correlation_rows(summaries: Sequence[RunSummary]) -> list[list]:
    groups: dict[tuple[str, str], list[RunSummary]] = {}
    for s in summaries:
        groups.setdefault((s.dataset, s.group), []).append(s)
    rows = []
    for (dataset, group), members in sorted(groups.items()):
        offsets = sorted({off for s in members for off in s.layers})
        for off in offsets:
            try:
                r, p, n = correlate_group(members, off)
            except (InsufficientDataError, UndefinedCorrelationError) as exc:
                log.warning("skipping correlation for %s/%s: %s", dataset, group, exc)
                continue
            rows.append([dataset, group, off, n, r, p])
    return rows


def analyze(run_dir, output_dir) -> tuple[list[RunSummary], list[list]]:
    """Write ``summary.csv`` and ``correlation.csv`` for every run log in ``run_dir``."""
    summaries = [rec.summary() for rec in read_run_dir(run_dir)]
    rows = correlation_rows(summaries)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(summary_csv(summaries), encoding="utf-8")
    (out / "correlation.csv").write_text(correlation_csv(rows), encoding="utf-8")
    return summaries, rows
