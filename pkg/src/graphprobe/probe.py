"""Feature binning, evaluation protocol, and the probe experiment driver.

Continuous feature values become class labels through a fixed-width
histogram in log10 space (6 bins by default, zeros pinned to bin 0), so a
label is roughly the order of magnitude of the value. Probes are scored by
micro/macro F1 against three rule-based baselines on identical splits, and
lifts are reported in percent.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .classifiers import ProbeConfig, predict, train_probe
from .embedding import Embedding
from .features import FEATURE_NAMES, FeatureTable
from .seeding import derive_seed

BASELINE_KINDS = ("uniform", "stratified", "frequent")

CSV_COLUMNS = (
    "method,feature,fraction,fold,seed,micro_f1,macro_f1,"
    "base_uniform,base_strat,base_freq,lift_uniform,lift_strat,lift_freq"
)


@dataclass(frozen=True)
class LabelVector:
    """Per-vertex class labels plus the log-space bin edges that made them."""

    labels: np.ndarray
    bin_edges: np.ndarray
    n_bins: int
    feature: str = ""

    def __len__(self) -> int:
        return len(self.labels)


def log_bin_labels(values: np.ndarray, n_bins: int = 6, feature: str = "") -> LabelVector:
    """Histogram labels over log10 of the positive values; zeros take label
    0 directly (they are the minimum, so ordering is preserved); the maximum
    lands in the last bin. All values equal collapses to a single label 0.
    """
    values = np.asarray(values, dtype=np.float64)
    if np.any(~np.isfinite(values)):
        raise ValueError("feature values must be finite")
    if np.any(values < 0):
        raise ValueError("log binning requires nonnegative values")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    labels = np.zeros(len(values), dtype=np.int64)
    pos = values > 0
    if not np.any(pos):
        return LabelVector(labels, np.linspace(0.0, 1.0, n_bins + 1), n_bins, feature)
    logs = np.log10(values[pos])
    lo, hi = float(logs.min()), float(logs.max())
    if hi == lo:
        return LabelVector(labels, np.linspace(lo, lo + 1.0, n_bins + 1), n_bins, feature)
    edges = np.linspace(lo, hi, n_bins + 1)
    binned = np.floor((logs - lo) / (hi - lo) * n_bins).astype(np.int64)
    labels[pos] = np.clip(binned, 0, n_bins - 1)
    return LabelVector(labels, edges, n_bins, feature)


def split_labelled_fraction(
    labels: np.ndarray, fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test split keeping ``fraction`` of each class in
    train (at least one instance per class; single-instance classes go
    entirely to train)."""
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for cls in np.unique(labels):
        ids = np.flatnonzero(labels == cls)
        ids = ids[rng.permutation(len(ids))]
        n_train = max(1, int(math.floor(fraction * len(ids) + 0.5)))
        train.append(ids[:n_train])
        test.append(ids[n_train:])
    train_ids = np.sort(np.concatenate(train))
    test_ids = np.sort(np.concatenate(test)) if any(len(t) for t in test) else np.empty(0, np.int64)
    if len(train_ids) == 0 or len(test_ids) == 0:
        raise ValueError(f"fraction {fraction} leaves an empty train or test set")
    return train_ids, test_ids


def kfold_splits(
    labels: np.ndarray, k: int = 5, seed: int = 0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold partitions; every item lands in exactly one test
    fold and per-class fold sizes differ by at most one."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if k < 2 or k > n:
        raise ValueError(f"k must satisfy 2 <= k <= {n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    for cls in np.unique(labels):
        ids = np.flatnonzero(labels == cls)
        ids = ids[rng.permutation(len(ids))]
        fold_of[ids] = np.arange(len(ids)) % k
    splits = []
    for f in range(k):
        test_ids = np.flatnonzero(fold_of == f)
        train_ids = np.flatnonzero(fold_of != f)
        splits.append((train_ids, test_ids))
    return splits


def class_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Balanced weights N / (classes_present * count); absent classes 0."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("labels must be nonempty")
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    present = counts > 0
    weights = np.zeros(n_classes)
    weights[present] = len(labels) / (present.sum() * counts[present])
    return weights


def _tp_fp_fn(y_true, y_pred, label_set):
    tp = fp = fn = 0
    for lab in label_set:
        true_l = y_true == lab
        pred_l = y_pred == lab
        tp += int(np.sum(true_l & pred_l))
        fp += int(np.sum(~true_l & pred_l))
        fn += int(np.sum(true_l & ~pred_l))
    return tp, fp, fn


def _micro_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def micro_f1(y_true, y_pred, label_set: Sequence[int] | None = None) -> float:
    """Pooled-count F1 over the label set (for single-label multiclass
    data this equals plain accuracy)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) == 0 or len(y_true) != len(y_pred):
        raise ValueError("inputs must be nonempty and the same length")
    if label_set is None:
        label_set = np.union1d(y_true, y_pred)
    return _micro_from_counts(*_tp_fp_fn(y_true, y_pred, label_set))


def macro_f1(y_true, y_pred, label_set: Sequence[int]) -> float:
    """Mean per-label F1 over the full label set; labels with no true or
    predicted instances contribute 0."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) == 0 or len(y_true) != len(y_pred):
        raise ValueError("inputs must be nonempty and the same length")
    total = 0.0
    for lab in label_set:
        true_l = y_true == lab
        pred_l = y_pred == lab
        tp = float(np.sum(true_l & pred_l))
        fp = float(np.sum(~true_l & pred_l))
        fn = float(np.sum(true_l & ~pred_l))
        denom_p = tp + fp
        denom_r = tp + fn
        if denom_p == 0 or denom_r == 0:
            continue
        p = tp / denom_p
        r = tp / denom_r
        if p + r > 0:
            total += 2.0 * p * r / (p + r)
    return total / len(label_set)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts of (true i, predicted j); row sums are the true class counts."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if np.any((y_true < 0) | (y_true >= n_classes)) or np.any(
        (y_pred < 0) | (y_pred >= n_classes)
    ):
        raise ValueError(f"labels out of range [0, {n_classes})")
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (y_true, y_pred), 1)
    return out


def micro_f1_from_confusion(matrix: np.ndarray) -> float:
    """Micro F1 recomputed from pooled confusion counts; shares the exact
    arithmetic with :func:`micro_f1` so the two agree bit-for-bit."""
    total = int(matrix.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = int(np.trace(matrix))
    # pooled FP and FN both equal total - tp for single-label data
    return _micro_from_counts(tp, total - tp, total - tp)


def baseline_predict(
    kind: str, train_labels: np.ndarray, test_size: int, seed: int
) -> np.ndarray:
    """Rule-based predictions: uniform over classes seen in train,
    stratified by the train distribution, or the constant majority class."""
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if len(train_labels) == 0:
        raise ValueError("train labels must be nonempty")
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    classes, counts = np.unique(train_labels, return_counts=True)
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return rng.choice(classes, size=test_size)
    if kind == "stratified":
        return rng.choice(classes, size=test_size, p=counts / counts.sum())
    return np.full(test_size, classes[np.argmax(counts)], dtype=np.int64)


# --- experiment driver ----------------------------------------------------

CV_FRACTION = None   # sentinel in fraction lists: use true k-fold CV


@dataclass(frozen=True)
class ProbeExperimentConfig:
    features: tuple[str, ...] = FEATURE_NAMES
    fractions: tuple = (CV_FRACTION,)
    n_bins: int = 6
    k: int = 5
    probe_kind: str = "mlp1"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    probe_epochs: int | None = None
    probe_lr: float | None = None

    def fraction_label(self, fraction) -> str:
        return "cv" if fraction is None else repr(float(fraction))


@dataclass
class ProbeCell:
    method: str
    feature: str
    fraction: float | None
    fold: int
    seed: int
    micro: float
    macro: float
    base_micro: dict[str, float]
    base_macro: dict[str, float]
    lifts: dict[str, float]
    confusion: np.ndarray
    warning: str | None = None


@dataclass
class ProbeReport:
    method: str
    config: ProbeExperimentConfig
    cells: list[ProbeCell]
    metadata: dict = field(default_factory=dict)

    def mean_micro(self, feature: str, fraction=CV_FRACTION) -> float:
        vals = [c.micro for c in self.cells if c.feature == feature and c.fraction == fraction]
        return float(np.mean(vals))

    def mean_macro(self, feature: str, fraction=CV_FRACTION) -> float:
        vals = [c.macro for c in self.cells if c.feature == feature and c.fraction == fraction]
        return float(np.mean(vals))

    def mean_baseline(self, which: str, feature: str, fraction=CV_FRACTION, macro=False) -> float:
        key = "base_macro" if macro else "base_micro"
        vals = [
            getattr(c, key)[which]
            for c in self.cells
            if c.feature == feature and c.fraction == fraction
        ]
        return float(np.mean(vals))

    def write_csv(self, sink: TextIO) -> None:
        writer = csv.writer(sink)
        writer.writerow(CSV_COLUMNS.split(","))
        for c in self.cells:
            writer.writerow(
                [
                    self.method,
                    c.feature,
                    self.config.fraction_label(c.fraction),
                    c.fold,
                    c.seed,
                    repr(c.micro),
                    repr(c.macro),
                    repr(c.base_micro["uniform"]),
                    repr(c.base_micro["stratified"]),
                    repr(c.base_micro["frequent"]),
                    repr(c.lifts["uniform"]),
                    repr(c.lifts["stratified"]),
                    repr(c.lifts["frequent"]),
                ]
            )

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "config": {
                "features": list(self.config.features),
                "fractions": [self.config.fraction_label(f) for f in self.config.fractions],
                "n_bins": self.config.n_bins,
                "k": self.config.k,
                "probe_kind": self.config.probe_kind,
                "seeds": list(self.config.seeds),
            },
            "metadata": self.metadata,
            "cells": [
                {
                    "feature": c.feature,
                    "fraction": self.config.fraction_label(c.fraction),
                    "fold": c.fold,
                    "seed": c.seed,
                    "micro_f1": c.micro,
                    "macro_f1": c.macro,
                    "base_micro": c.base_micro,
                    "base_macro": c.base_macro,
                    "lifts": c.lifts,
                    "confusion": c.confusion.tolist(),
                    "warning": c.warning,
                }
                for c in self.cells
            ],
        }

    def write_json(self, sink: TextIO) -> None:
        json.dump(self.to_json_dict(), sink, indent=1)


def align_features(embedding: Embedding, table: FeatureTable) -> FeatureTable:
    """Reorder the feature table into the embedding's vertex order; raises
    listing the missing labels when the vertex sets differ."""
    emb_labels = list(embedding.vertex_labels)
    pos = {lab: i for i, lab in enumerate(table.vertex_labels)}
    missing = [lab for lab in emb_labels if lab not in pos]
    extra = [lab for lab in table.vertex_labels if lab not in set(emb_labels)]
    if missing or extra:
        raise ValueError(
            f"vertex sets differ: {len(missing)} embedding labels missing from features "
            f"{missing[:10]}, {len(extra)} feature labels missing from embedding {extra[:10]}"
        )
    order = np.array([pos[lab] for lab in emb_labels])
    return FeatureTable(
        vertex_labels=tuple(emb_labels),
        dg=table.dg[order],
        dc=table.dc[order],
        tc=table.tc[order],
        clu=table.clu[order],
        ec=table.ec[order],
        pr=table.pr[order],
        bc=table.bc[order],
    )


def _split_for(labels: np.ndarray, fraction, k: int, seed: int, fold: int):
    if fraction is CV_FRACTION:
        return kfold_splits(labels, k, seed)[fold]
    return split_labelled_fraction(labels, fraction, derive_seed(seed, "holdout", fold))


def run_probe_cell(
    x: np.ndarray,
    labels: np.ndarray,
    n_bins: int,
    method: str,
    feature: str,
    probe_kind: str,
    fraction,
    k: int,
    seed: int,
    fold: int,
    probe_epochs: int | None,
    probe_lr: float | None,
) -> ProbeCell:
    """One (feature, fraction, seed, fold) evaluation: train the probe,
    score it and the three baselines on the identical test split."""
    train_ids, test_ids = _split_for(labels, fraction, k, seed, fold)
    y_train, y_test = labels[train_ids], labels[test_ids]
    weights = class_weights(y_train, n_bins)
    model = train_probe(
        probe_kind,
        x[train_ids],
        y_train,
        weights,
        ProbeConfig(
            seed=derive_seed(seed, "probe", feature, str(fraction), fold),
            epochs=probe_epochs,
            lr=probe_lr,
        ),
    )
    y_pred = predict(model, x[test_ids])
    label_set = range(n_bins)
    cell_micro = micro_f1(y_test, y_pred, label_set)
    cell_macro = macro_f1(y_test, y_pred, label_set)
    base_micro: dict[str, float] = {}
    base_macro: dict[str, float] = {}
    lifts: dict[str, float] = {}
    for kind in BASELINE_KINDS:
        y_base = baseline_predict(
            kind, y_train, len(test_ids), derive_seed(seed, "baseline", kind, feature, str(fraction), fold)
        )
        bm = micro_f1(y_test, y_base, label_set)
        base_micro[kind] = bm
        base_macro[kind] = macro_f1(y_test, y_base, label_set)
        lifts[kind] = (cell_micro - bm) / bm * 100.0 if bm > 0 else float("nan")
    return ProbeCell(
        method=method,
        feature=feature,
        fraction=fraction,
        fold=fold,
        seed=seed,
        micro=cell_micro,
        macro=cell_macro,
        base_micro=base_micro,
        base_macro=base_macro,
        lifts=lifts,
        confusion=confusion_matrix(y_test, y_pred, n_bins),
    )


def _cell_args(x, labels_by_feature, method, config):
    for feature in config.features:
        labels = labels_by_feature[feature]
        for fraction in config.fractions:
            for seed in config.seeds:
                for fold in range(config.k):
                    yield (
                        x,
                        labels,
                        config.n_bins,
                        method,
                        feature,
                        config.probe_kind,
                        fraction,
                        config.k,
                        seed,
                        fold,
                        config.probe_epochs,
                        config.probe_lr,
                    )


def run_probe_experiment(
    embedding: Embedding,
    table: FeatureTable,
    config: ProbeExperimentConfig = ProbeExperimentConfig(),
    metadata: dict | None = None,
    workers: int = 1,
) -> ProbeReport:
    """Full factorial over features x fractions x seeds x folds. Cells are
    independent; report assembly is order-canonical so output bytes do not
    depend on the worker count."""
    unknown = [f for f in config.features if f not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown features {unknown}; expected among {FEATURE_NAMES}")
    if config.probe_kind not in ("logreg", "linear_svm", "mlp1", "mlp2"):
        raise ValueError(f"unknown probe kind {config.probe_kind!r}")
    table = align_features(embedding, table)
    x = embedding.as_points()
    labels_by_feature = {
        f: log_bin_labels(table.column(f), config.n_bins, feature=f).labels
        for f in config.features
    }
    args = list(_cell_args(x, labels_by_feature, embedding.method_tag, config))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell_star, args, chunksize=1))
    else:
        cells = [run_probe_cell(*a) for a in args]
    meta = dict(metadata or {})
    meta.setdefault("probe_kind", config.probe_kind)
    meta.setdefault("n_bins", config.n_bins)
    return ProbeReport(
        method=embedding.method_tag, config=config, cells=cells, metadata=meta
    )


def _run_cell_star(args):
    return run_probe_cell(*args)
