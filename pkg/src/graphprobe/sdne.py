"""Autoencoder graph embedding with a dual-objective loss.

The encoder compresses a vertex's adjacency row to a code and the decoder
reconstructs the row (second-order proximity); a second term pulls the
codes of adjacent vertices together (first-order proximity):

    L = sum_i ||(q'_i - q_i) * beta_i||^2 + alpha * sum_{(u,v) in E} ||code_u - code_v||^2

where beta_i weights the nonzero entries of the row by b (>1) so the model
is penalised for predicting zeros too eagerly. Layers are all logistic
sigmoid; weights start from fan-scaled random values (no pre-training
network; that deviation is stamped into the training metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .embedding import EUCLIDEAN, Embedding
from .graph import Graph, neighbors
from .seeding import rng_for
from .skipgram import TrainingDivergedError

DEVIATION_NOTE = "pretraining network replaced by fan-scaled random initialization"


@dataclass
class SdneModel:
    enc_w1: np.ndarray   # (V, h)
    enc_b1: np.ndarray   # (h,)
    enc_w2: np.ndarray   # (h, d)
    enc_b2: np.ndarray   # (d,)
    dec_w1: np.ndarray   # (d, h)
    dec_b1: np.ndarray   # (h,)
    dec_w2: np.ndarray   # (h, V)
    dec_b2: np.ndarray   # (V,)

    def param_items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


@dataclass(frozen=True)
class SdneConfig:
    hidden: int = 256
    dim: int = 128
    alpha: float = 500.0
    b: float = 10.0
    lr: float = 0.01
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0


@dataclass(frozen=True)
class SdneTrainResult:
    embedding: Embedding
    epoch_losses: list[tuple[float, float, float]]   # (total, term1, alpha*term2)
    deviations: tuple[str, ...] = (DEVIATION_NOTE,)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    scale = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-scale, scale, size=(fan_in, fan_out))


def init(vocab: int, hidden: int, dim: int, seed: int) -> SdneModel:
    if hidden < 1 or dim < 1:
        raise ValueError("hidden and dim must be >= 1")
    rng = rng_for(seed, "sdne-init")
    return SdneModel(
        enc_w1=_glorot(rng, vocab, hidden),
        enc_b1=np.zeros(hidden),
        enc_w2=_glorot(rng, hidden, dim),
        enc_b2=np.zeros(dim),
        dec_w1=_glorot(rng, dim, hidden),
        dec_b1=np.zeros(hidden),
        dec_w2=_glorot(rng, hidden, vocab),
        dec_b2=np.zeros(vocab),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _forward_full(model: SdneModel, rows: np.ndarray):
    h1 = _sigmoid(rows @ model.enc_w1 + model.enc_b1)
    code = _sigmoid(h1 @ model.enc_w2 + model.enc_b2)
    h2 = _sigmoid(code @ model.dec_w1 + model.dec_b1)
    recon = _sigmoid(h2 @ model.dec_w2 + model.dec_b2)
    return h1, code, h2, recon


def forward(model: SdneModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encode adjacency rows to codes and decode back to reconstructions.

    Accepts a single row or a stack of rows; deterministic.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    _, code, _, recon = _forward_full(model, rows)
    if rows.shape[0] == 1:
        return code[0], recon[0]
    return code, recon


def loss_terms(
    rows: np.ndarray,
    recon: np.ndarray,
    codes: np.ndarray,
    edge_pairs: np.ndarray,
    alpha: float,
    b: float,
    n_recon: int | None = None,
) -> tuple[float, float]:
    """Pure loss arithmetic: weighted-reconstruction term and the
    alpha-weighted adjacency-proximity term.

    ``edge_pairs`` holds row positions into ``codes``; ``n_recon`` limits
    the reconstruction term to the leading rows (all rows by default).
    """
    if n_recon is None:
        n_recon = rows.shape[0]
    beta = 1.0 + (b - 1.0) * rows[:n_recon]
    diff = (recon[:n_recon] - rows[:n_recon]) * beta
    term1 = float(np.sum(diff * diff))
    if len(edge_pairs):
        delta = codes[edge_pairs[:, 0]] - codes[edge_pairs[:, 1]]
        term2 = alpha * float(np.sum(delta * delta))
    else:
        term2 = 0.0
    return term1, term2


def loss(
    model: SdneModel,
    rows: np.ndarray,
    edge_pairs,
    alpha: float = 500.0,
    b: float = 10.0,
) -> tuple[float, tuple[float, float]]:
    """Total dual-objective loss over a batch of adjacency rows plus the
    two components (reconstruction, alpha-weighted proximity)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    edge_pairs = np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2)
    _, code, _, recon = _forward_full(model, rows)
    term1, term2 = loss_terms(rows, recon, code, edge_pairs, alpha, b)
    return term1 + term2, (term1, term2)


def loss_and_grads(
    model: SdneModel,
    rows: np.ndarray,
    edge_pairs,
    alpha: float = 500.0,
    b: float = 10.0,
    n_recon: int | None = None,
):
    """Loss, its two components, and gradients for every parameter tensor
    (backprop by hand)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    edge_pairs = np.asarray(edge_pairs, dtype=np.int64).reshape(-1, 2)
    m = rows.shape[0]
    if n_recon is None:
        n_recon = m
    h1, code, h2, recon = _forward_full(model, rows)
    term1, term2 = loss_terms(rows, recon, code, edge_pairs, alpha, b, n_recon)

    d_recon = np.zeros_like(recon)
    beta = 1.0 + (b - 1.0) * rows[:n_recon]
    d_recon[:n_recon] = 2.0 * (recon[:n_recon] - rows[:n_recon]) * beta * beta
    dz4 = d_recon * recon * (1.0 - recon)
    d_h2 = dz4 @ model.dec_w2.T
    dz3 = d_h2 * h2 * (1.0 - h2)
    d_code = dz3 @ model.dec_w1.T
    if len(edge_pairs):
        delta = 2.0 * alpha * (code[edge_pairs[:, 0]] - code[edge_pairs[:, 1]])
        np.add.at(d_code, edge_pairs[:, 0], delta)
        np.add.at(d_code, edge_pairs[:, 1], -delta)
    dz2 = d_code * code * (1.0 - code)
    d_h1 = dz2 @ model.enc_w2.T
    dz1 = d_h1 * h1 * (1.0 - h1)

    grads = {
        "enc_w1": rows.T @ dz1,
        "enc_b1": dz1.sum(axis=0),
        "enc_w2": h1.T @ dz2,
        "enc_b2": dz2.sum(axis=0),
        "dec_w1": code.T @ dz3,
        "dec_b1": dz3.sum(axis=0),
        "dec_w2": h2.T @ dz4,
        "dec_b2": dz4.sum(axis=0),
    }
    return term1 + term2, (term1, term2), grads


def _adjacency_rows(g: Graph, ids: np.ndarray) -> np.ndarray:
    rows = np.zeros((len(ids), g.vertex_count))
    for i, u in enumerate(ids):
        rows[i, neighbors(g, int(u))] = 1.0
    return rows


def _batch_edges(g: Graph, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edges incident to the batch (each counted once) and the out-of-batch
    endpoints whose codes the proximity term needs."""
    in_batch = {int(u): i for i, u in enumerate(batch)}
    edge_set: set[tuple[int, int]] = set()
    for u in batch:
        u = int(u)
        for w in neighbors(g, u):
            w = int(w)
            edge_set.add((u, w) if u < w else (w, u))
    extras: list[int] = []
    extra_pos: dict[int, int] = {}
    pairs = np.empty((len(edge_set), 2), dtype=np.int64)
    for k, (u, v) in enumerate(sorted(edge_set)):
        pos = []
        for vertex in (u, v):
            if vertex in in_batch:
                pos.append(in_batch[vertex])
            else:
                if vertex not in extra_pos:
                    extra_pos[vertex] = len(batch) + len(extras)
                    extras.append(vertex)
                pos.append(extra_pos[vertex])
        pairs[k] = pos
    return pairs, np.asarray(extras, dtype=np.int64)


def train(g: Graph, config: SdneConfig = SdneConfig()) -> SdneTrainResult:
    """RMSProp (decay 0.9, eps 1e-8) over vertex-row minibatches with the
    incident-edge proximity term; per-epoch seeded shuffle of the vertex
    order; returns the codes of all vertices as the embedding."""
    model = init(g.vertex_count, config.hidden, config.dim, config.seed)
    cache = {name: np.zeros_like(p) for name, p in model.param_items()}
    decay, eps = 0.9, 1e-8

    epoch_losses: list[tuple[float, float, float]] = []
    for epoch in range(config.epochs):
        order = rng_for(config.seed, "sdne-epoch", epoch).permutation(g.vertex_count)
        total = t1_sum = t2_sum = 0.0
        for start in range(0, g.vertex_count, config.batch_size):
            batch = order[start:start + config.batch_size]
            pairs, extras = _batch_edges(g, batch)
            ids = np.concatenate([batch, extras]) if len(extras) else batch
            rows = _adjacency_rows(g, ids)
            batch_loss, (t1, t2), grads = loss_and_grads(
                model, rows, pairs, config.alpha, config.b, n_recon=len(batch)
            )
            total += batch_loss
            t1_sum += t1
            t2_sum += t2
            for name, param in model.param_items():
                grad = grads[name]
                cache[name] = decay * cache[name] + (1.0 - decay) * grad * grad
                param -= config.lr * grad / (np.sqrt(cache[name]) + eps)
        if not math.isfinite(total):
            raise TrainingDivergedError(epoch)
        epoch_losses.append((total, t1_sum, t2_sum))

    all_rows = _adjacency_rows(g, np.arange(g.vertex_count))
    codes, _ = forward(model, all_rows)
    emb = Embedding(
        matrix=np.atleast_2d(codes).copy(),
        geometry=EUCLIDEAN,
        method_tag="sdne",
        vertex_labels=g.labels,
    )
    return SdneTrainResult(embedding=emb, epoch_losses=epoch_losses)
