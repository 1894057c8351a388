"""Train/test protocol, confusion-matrix reports and the 2x2 experiment grid."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import labeling, spectral
from .audio_io import AudioSegment
from .errors import InvalidInputError, StratificationError
from .labeling import ClassBounds, PowerClass
from .mlp import MlpModel, TrainConfig, train
from .spectral import BandSpec, Scaler

N_CLASSES = 4
# a class is flagged as under-represented below either limit
LOW_SAMPLE_MIN = 5
LOW_SAMPLE_RATIO = 0.25
BOUNDS_POLICIES = ("global", "train", "equal-frequency")

Pairs = Sequence[tuple[AudioSegment, float]]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise InvalidInputError("train_fraction must lie strictly between 0 and 1")


def n_train_for(n: int, fraction: float) -> int:
    # at least one sample on each side
    return min(max(math.ceil(fraction * n), 1), n - 1)


def split(classes: Sequence[int], spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Random train/test index split, sorted ascending.

    Unstratified mode draws ceil(fraction * n) training indices uniformly.
    Stratified mode apportions that total across classes in proportion to
    their counts (largest remainder) and samples within each class.
    """
    classes = np.asarray(classes)
    n = len(classes)
    if n < 2:
        raise InvalidInputError("need at least two samples to split")
    n_train = n_train_for(n, spec.train_fraction)
    rng = np.random.default_rng(spec.seed)
    if not spec.stratified:
        train_idx = np.sort(rng.permutation(n)[:n_train])
    else:
        present = np.unique(classes)
        counts = np.array([np.sum(classes == c) for c in present])
        quota = n_train * counts / n
        take = np.floor(quota).astype(np.int64)
        order = np.argsort(-(quota - take), kind="stable")
        take[order[: n_train - take.sum()]] += 1
        missing = [int(c) for c, t in zip(present, take) if t == 0]
        if missing:
            raise StratificationError(f"class(es) {missing} would have no training samples")
        picked = [rng.permutation(np.flatnonzero(classes == c))[:t] for c, t in zip(present, take)]
        train_idx = np.sort(np.concatenate(picked))
    test_mask = np.ones(n, dtype=bool)
    test_mask[train_idx] = False
    return train_idx, np.flatnonzero(test_mask)


def class_counts(classes: Sequence[int]) -> list[int]:
    classes = np.asarray(classes, dtype=np.int64)
    return [int(np.sum(classes == c)) for c in range(1, N_CLASSES + 1)]


def low_sample_classes(train_counts: Sequence[int]) -> list[int]:
    """Classes with too few training samples, in absolute or relative terms."""
    largest = max(train_counts) if train_counts else 0
    return [
        c for c, k in zip(range(1, N_CLASSES + 1), train_counts)
        if k < LOW_SAMPLE_MIN or k < LOW_SAMPLE_RATIO * largest
    ]


@dataclass
class EvalReport:
    confusion: np.ndarray
    train_counts: list[int] = field(default_factory=lambda: [0] * N_CLASSES)
    config_echo: dict = field(default_factory=dict)
    name: str = ""

    @property
    def per_class_counts(self) -> list[int]:
        return [int(v) for v in self.confusion.sum(axis=1)]

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total if self.total else float("nan")

    @property
    def recall(self) -> list[float | None]:
        rows = self.confusion.sum(axis=1)
        return [float(self.confusion[j, j] / rows[j]) if rows[j] else None for j in range(N_CLASSES)]

    @property
    def precision(self) -> list[float | None]:
        cols = self.confusion.sum(axis=0)
        return [float(self.confusion[j, j] / cols[j]) if cols[j] else None for j in range(N_CLASSES)]

    @property
    def low_sample_classes(self) -> list[int]:
        return low_sample_classes(self.train_counts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "accuracy": self.accuracy,
            "test_size": self.total,
            "confusion": self.confusion.tolist(),
            "per_class_counts": self.per_class_counts,
            "train_class_counts": list(self.train_counts),
            "recall": self.recall,
            "precision": self.precision,
            "low_sample_classes": self.low_sample_classes,
            "config": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true\\predicted"] + [f"class_{c}" for c in range(1, N_CLASSES + 1)])
        for j, row in enumerate(self.confusion, start=1):
            writer.writerow([f"class_{j}"] + [int(v) for v in row])
        return buf.getvalue()

    def to_text(self) -> str:
        def pct(v):
            return "   n/a" if v is None else f"{100 * v:5.1f}%"

        lines = []
        if self.name:
            lines.append(self.name)
        lines.append(f"accuracy: {100 * self.accuracy:.1f}% ({int(np.trace(self.confusion))}/{self.total})")
        lines.append("")
        lines.append("true \\ pred" + "".join(f"{c:>7d}" for c in range(1, N_CLASSES + 1))
                     + "   recall  precision  n_train")
        for j in range(N_CLASSES):
            row = "".join(f"{int(v):7d}" for v in self.confusion[j])
            lines.append(f"{j + 1} {PowerClass(j + 1).name.lower():<9s}{row}   {pct(self.recall[j])}"
                         f"     {pct(self.precision[j])}  {self.train_counts[j]:7d}")
        flagged = self.low_sample_classes
        if flagged:
            lines.append("")
            for c in flagged:
                lines.append(f"WARNING: class {c} ({PowerClass(c).label}) has only "
                             f"{self.train_counts[c - 1]} training samples; expect degraded recall")
        return "\n".join(lines) + "\n"


def confusion_matrix(true_classes: Sequence[int], predicted: Sequence[int]) -> np.ndarray:
    out = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(true_classes, predicted):
        out[int(t) - 1, int(p) - 1] += 1
    return out


def evaluate(model: MlpModel, features: np.ndarray, true_classes: Sequence[int],
             train_counts: Sequence[int] | None = None, config_echo: dict | None = None,
             name: str = "") -> EvalReport:
    if len(true_classes) == 0:
        raise InvalidInputError("test set is empty")
    predicted = model.predict_many(features)
    return EvalReport(
        confusion_matrix(true_classes, predicted),
        list(train_counts) if train_counts is not None else [0] * N_CLASSES,
        dict(config_echo or {}),
        name,
    )


# --------------------------------------------------------------------------
# end-to-end pipeline

@dataclass(frozen=True)
class PipelineConfig:
    approach: str = "reduced"
    band: BandSpec = BandSpec()
    train: TrainConfig = TrainConfig()
    split: SplitSpec = SplitSpec()
    bounds_policy: str = "global"
    taper: bool = False

    def __post_init__(self):
        if self.approach not in spectral.APPROACHES:
            raise InvalidInputError(f"approach must be one of {spectral.APPROACHES}")
        if self.bounds_policy not in BOUNDS_POLICIES:
            raise InvalidInputError(f"bounds policy must be one of {BOUNDS_POLICIES}")

    def echo(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    model: MlpModel
    history: list[float]
    report: EvalReport
    train_idx: np.ndarray
    test_idx: np.ndarray
    classes: np.ndarray


def fit_class_bounds(watts: np.ndarray, train_idx: np.ndarray | None, policy: str) -> ClassBounds:
    if policy == "global":
        return labeling.fit_bounds(watts)
    if policy == "equal-frequency":
        return labeling.fit_bounds(watts, equal_frequency=True)
    return labeling.fit_bounds(watts[train_idx])


def split_for(watts: np.ndarray, config: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    """The train/test split `run_pipeline` uses for these readings."""
    # stratification needs labels before the split; train-only bounds are refit after it
    policy = "global" if config.bounds_policy == "train" else config.bounds_policy
    provisional = fit_class_bounds(np.asarray(watts, dtype=np.float64), None, policy)
    return split(labeling.classify_many(watts, provisional), config.split)


def run_pipeline(pairs: Pairs, config: PipelineConfig = PipelineConfig(), name: str = "",
                 features: np.ndarray | None = None) -> PipelineResult:
    """Features -> classes -> split -> scale -> train -> held-out report."""
    if len(pairs) < 2:
        raise InvalidInputError("need at least two labelled segments")
    segments = [s for s, _ in pairs]
    watts = np.array([w for _, w in pairs], dtype=np.float64)
    if features is None:
        features = spectral.feature_matrix(segments, config.band, config.approach, config.taper)

    train_idx, test_idx = split_for(watts, config)
    bounds = fit_class_bounds(watts, train_idx, config.bounds_policy)
    classes = labeling.classify_many(watts, bounds)

    scaler = Scaler.fit(features[train_idx])
    targets = labeling.encode_many(classes[train_idx])
    network, history = train(scaler.apply(features[train_idx]), targets, config.train)
    first = segments[0]
    model = MlpModel(
        network=network, scaler=scaler, bounds=bounds, band=config.band, approach=config.approach,
        sample_rate_hz=first.sample_rate_hz, segment_s=first.n / first.sample_rate_hz,
        taper=config.taper,
        metadata={
            "config": config.echo(),
            "epochs_run": len(history),
            "final_mse": history[-1],
            "n_train": int(len(train_idx)),
            "n_test": int(len(test_idx)),
            "train_class_counts": class_counts(classes[train_idx]),
        },
    )
    echo = {**config.echo(), "shape": asdict(model.shape), "epochs_run": len(history),
            "final_mse": history[-1]}
    report = evaluate(model, features[test_idx], classes[test_idx],
                      class_counts(classes[train_idx]), echo, name)
    return PipelineResult(model, history, report, train_idx, test_idx, classes)


MATRIX_CELLS = (
    ("full", "clean", "First approach on sound without AC noise"),
    ("full", "noisy", "First approach on sound with AC noise"),
    ("reduced", "clean", "Second approach on sound without AC noise"),
    ("reduced", "noisy", "Second approach on sound with AC noise"),
)


def run_experiment_matrix(clean: Pairs, noisy: Pairs,
                          config: PipelineConfig = PipelineConfig()) -> list[PipelineResult]:
    """Both feature layouts on both recordings, in the order
    full/clean, full/noisy, reduced/clean, reduced/noisy."""
    datasets = {"clean": clean, "noisy": noisy}
    results = []
    for approach, which, title in MATRIX_CELLS:
        cell = PipelineConfig(approach, config.band, config.train, config.split,
                              config.bounds_policy, config.taper)
        results.append(run_pipeline(datasets[which], cell, name=title))
    return results


def comparison_text(reports: Sequence[EvalReport]) -> str:
    width = max(len(r.name) for r in reports)
    lines = [f"{'Method':<{width}}  Accuracy", "-" * (width + 10)]
    lines += [f"{r.name:<{width}}  {100 * r.accuracy:7.1f}%" for r in reports]
    return "\n".join(lines) + "\n"


def comparison_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps({"cells": [r.to_dict() for r in reports]}, indent=2) + "\n"
