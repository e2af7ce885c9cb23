"""Exact 2-D t-SNE projection of embeddings, plus class-colored export.

The pairwise affinity matrix P is built with a per-point binary search on
the Gaussian precision so each conditional distribution hits the target
perplexity, then symmetrized and normalized. The low-dimensional map is
optimized by momentum gradient descent on the KL divergence to a Student-t
kernel, with early exaggeration for the first 250 iterations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .embedding import Embedding
from .probe import LabelVector
from .seeding import rng_for

MAX_POINTS = 10000
_EPS = 1e-12

EARLY_EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
LEARNING_RATE = 200.0
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
_KL_TRACE_EVERY = 10


@dataclass(frozen=True)
class Projection2D:
    points: np.ndarray             # (n, 2)
    method_tag: str
    perplexity: float
    seed: int
    kl_divergence: float
    vertex_labels: tuple[str, ...] = ()
    kl_trace: list[tuple[int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_perplexity(p_row: np.ndarray) -> float:
    p = p_row[p_row > 0]
    h = -np.sum(p * np.log2(p))
    return float(2.0**h)


def conditional_probabilities(
    x: np.ndarray, perplexity: float, tol: float = 1e-4, max_steps: int = 50
) -> np.ndarray:
    """Row-conditional Gaussian affinities whose per-row perplexity matches
    the target within ``tol`` (binary search on the precision)."""
    n = len(x)
    d2 = _squared_distances(x)
    p = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta = 1.0
        beta_lo, beta_hi = 0.0, math.inf
        for _ in range(max_steps):
            w = np.exp(-row * beta)
            total = w.sum()
            if total <= 0:
                prob = np.full(len(row), 1.0 / len(row))
            else:
                prob = w / total
            perp = _row_perplexity(prob)
            diff = perp - perplexity
            if abs(diff) < tol:
                break
            if diff > 0:           # too flat: sharpen
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == math.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        p[i, np.arange(n) != i] = prob
    return p


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    cond = conditional_probabilities(x, perplexity)
    p = (cond + cond.T) / (2.0 * len(x))
    return p


def _student_t(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(w, 0.0)
    q = w / w.sum()
    return q, w


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], _EPS))))


def tsne(
    embedding: Embedding | np.ndarray,
    perplexity: float = 30.0,
    iterations: int = 1000,
    seed: int = 0,
    method_tag: str | None = None,
) -> Projection2D:
    """Project an embedding to 2-D; Poincare embeddings are first mapped
    from polar coordinates to their disk positions."""
    if isinstance(embedding, Embedding):
        x = embedding.as_points()
        tag = method_tag or embedding.method_tag
        labels = embedding.vertex_labels
    else:
        x = np.asarray(embedding, dtype=np.float64)
        tag = method_tag or "matrix"
        labels = tuple(str(i) for i in range(len(x)))
    n = len(x)
    if n < 3 * perplexity:
        raise ValueError(f"need at least {math.ceil(3 * perplexity)} points for perplexity {perplexity}")
    if n > MAX_POINTS:
        raise ValueError(f"exact projection is capped at {MAX_POINTS} points; subsample first")

    p = joint_probabilities(x, perplexity)
    rng = rng_for(seed, "tsne-init")
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)   # per-coordinate adaptive rates (vdM recipe)
    trace: list[tuple[int, float]] = []
    for it in range(iterations):
        exaggerate = it < EXAGGERATION_ITERS
        if it == EXAGGERATION_ITERS:
            # drop the momentum built against the exaggerated objective,
            # otherwise the map overshoots and KL spikes at the switch
            velocity[:] = 0.0
        p_eff = p * EARLY_EXAGGERATION if exaggerate else p
        q, w = _student_t(y)
        # gradient of KL(P||Q): 4 sum_j (p - q) w (y_i - y_j)
        coeff = (p_eff - q) * w
        grad = 4.0 * (y * coeff.sum(axis=1)[:, None] - coeff @ y)
        momentum = MOMENTUM_EARLY if it < EXAGGERATION_ITERS else MOMENTUM_LATE
        same_direction = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_direction, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - LEARNING_RATE * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if not exaggerate and (it % _KL_TRACE_EVERY == 0 or it == iterations - 1):
            q, _ = _student_t(y)
            trace.append((it, _kl(p, q)))
    q, _ = _student_t(y)
    kl = _kl(p, q)
    if not math.isfinite(kl):
        raise RuntimeError("projection diverged: KL is not finite")
    return Projection2D(
        points=y,
        method_tag=tag,
        perplexity=perplexity,
        seed=seed,
        kl_divergence=kl,
        vertex_labels=labels,
        kl_trace=trace,
    )


def export_projection(projection: Projection2D, labels: LabelVector, sink: TextIO) -> None:
    """CSV of vertex, x, y, class label for external plotting."""
    if len(labels) != len(projection):
        raise ValueError(
            f"label count {len(labels)} does not match projection size {len(projection)}"
        )
    writer = csv.writer(sink)
    writer.writerow(["vertex", "x", "y", "label"])
    names = projection.vertex_labels or tuple(str(i) for i in range(len(projection)))
    for name, (px, py), lab in zip(names, projection.points, labels.labels):
        writer.writerow([name, repr(float(px)), repr(float(py)), int(lab)])


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over all points; points in singleton classes score 0."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(points)
    if n != len(labels):
        raise ValueError("points and labels must be the same length")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("silhouette needs at least two classes")
    dist = np.sqrt(_squared_distances(points))
    scores = np.zeros(n)
    for i in range(n):
        same = labels == labels[i]
        n_same = int(same.sum())
        if n_same <= 1:
            continue
        a = dist[i, same].sum() / (n_same - 1)
        b = math.inf
        for cls in classes:
            if cls == labels[i]:
                continue
            others = labels == cls
            b = min(b, float(dist[i, others].mean()))
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def subsample_stratified(
    labels: np.ndarray, n_max: int, seed: int
) -> np.ndarray:
    """Seeded label-stratified subsample of at most ``n_max`` indices."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n <= n_max:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for cls in np.unique(labels):
        ids = np.flatnonzero(labels == cls)
        quota = max(1, int(round(n_max * len(ids) / n)))
        ids = ids[rng.permutation(len(ids))][:quota]
        keep.append(ids)
    out = np.sort(np.concatenate(keep))
    if len(out) > n_max:
        out = out[np.sort(rng.permutation(len(out))[:n_max])]
    return out
