"""Skip-gram embedding training over walk corpora.

One objective, two geometries: similarity is either the Euclidean dot
product between input-side and output-side rows, or the hyperbolic inner
product of two Poincare-disk points in polar coordinates,

    sim(x, y) = 4 arctanh(r_x) arctanh(r_y) cos(theta_x - theta_y).

Training modes: the exact softmax over all vertices (test fidelity, small
graphs) and negative sampling (default performance path, 5 noise draws per
pair from the walk unigram distribution raised to 0.75).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, asdict

import numpy as np
from numba import njit

from .embedding import EUCLIDEAN, POINCARE, Embedding
from .graph import Graph
from .seeding import derive_seed, rng_for
from .walks import UNIFORM, WalkCorpus, WalkStrategy, context_pairs, generate_corpus

R_MIN = 1e-5
R_MAX = 1.0 - 1e-5
TWO_PI = 2.0 * math.pi
EXACT_SOFTMAX_MAX_VOCAB = 5000


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite in epoch {epoch}{detail}")


@dataclass
class SkipGramModel:
    """Input-side and output-side weight rows plus the geometry tag."""

    w_in: np.ndarray
    w_out: np.ndarray
    geometry: str

    @property
    def vocab(self) -> int:
        return self.w_in.shape[0]

    @property
    def dim(self) -> int:
        return self.w_in.shape[1]


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 128
    lr: float = 0.1
    epochs: int = 15
    negatives: int = 5
    geometry: str = EUCLIDEAN
    seed: int = 0
    mode: str = "negative_sampling"    # or "exact_softmax"
    window: int = 10


@dataclass(frozen=True)
class TrainResult:
    embedding: Embedding
    epoch_losses: list[float]


def init_model(vocab: int, dim: int, geometry: str, seed: int) -> SkipGramModel:
    """Euclidean weights ~ U(-0.5/d, 0.5/d); Poincare radius ~ U(0.01, 0.1)
    and angle ~ U(0, 2pi). Deterministic per seed."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if geometry == POINCARE and dim != 2:
        raise ValueError("poincare_polar geometry requires dim=2")
    if geometry not in (EUCLIDEAN, POINCARE):
        raise ValueError(f"unknown geometry {geometry!r}")
    sides = []
    for side in ("in", "out"):
        rng = rng_for(seed, "init", side)
        if geometry == EUCLIDEAN:
            w = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab, dim))
        else:
            r = rng.uniform(0.01, 0.1, size=vocab)
            theta = rng.uniform(0.0, TWO_PI, size=vocab)
            w = np.column_stack([r, theta])
        sides.append(w)
    return SkipGramModel(w_in=sides[0], w_out=sides[1], geometry=geometry)


def _check_radius(r: np.ndarray | float) -> None:
    if np.any(np.asarray(r) < 0.0) or np.any(np.asarray(r) >= 1.0):
        raise ValueError("poincare radius outside [0, 1)")


def _poincare_sim_rows(row_u: np.ndarray, row_v: np.ndarray) -> float:
    _check_radius(row_u[0])
    _check_radius(row_v[0])
    return float(
        4.0
        * math.atanh(row_u[0])
        * math.atanh(row_v[0])
        * math.cos(row_u[1] - row_v[1])
    )


def similarity(model: SkipGramModel, u: int, v: int, use_output_side: bool = True) -> float:
    """sim(u, v) between the input row of ``u`` and the (by default)
    output row of ``v``."""
    side = model.w_out if use_output_side else model.w_in
    if model.geometry == EUCLIDEAN:
        return float(model.w_in[u] @ side[v])
    return _poincare_sim_rows(model.w_in[u], side[v])


def _softplus(x: float) -> float:
    # -log sigmoid(-x); stable for large |x|
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _sim_and_partials(model: SkipGramModel, c: int, o: int):
    """Similarity plus its partial derivatives w.r.t. the center (input)
    and target (output) rows."""
    if model.geometry == EUCLIDEAN:
        s = float(model.w_in[c] @ model.w_out[o])
        return s, model.w_out[o].copy(), model.w_in[c].copy()
    rc, tc = model.w_in[c]
    ro, to = model.w_out[o]
    _check_radius(rc)
    _check_radius(ro)
    ac = math.atanh(rc)
    ao = math.atanh(ro)
    cosd = math.cos(tc - to)
    sind = math.sin(tc - to)
    s = 4.0 * ac * ao * cosd
    d_center = np.array([4.0 * ao * cosd / (1.0 - rc * rc), -4.0 * ac * ao * sind])
    d_target = np.array([4.0 * ac * cosd / (1.0 - ro * ro), 4.0 * ac * ao * sind])
    return s, d_center, d_target


def pair_loss_and_grads(
    model: SkipGramModel, center: int, context: int, negatives: list[int]
) -> tuple[float, dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Negative-sampling loss for one pair and its sparse gradients.

    Returns (loss, input-side grads, output-side grads); grad dicts map row
    id to the gradient of the loss w.r.t. that row at the current
    parameters, duplicates summed.
    """
    if context in negatives:
        raise ValueError("negatives must be disjoint from the context vertex")
    grad_in: dict[int, np.ndarray] = {center: np.zeros(model.dim)}
    grad_out: dict[int, np.ndarray] = {}
    loss = 0.0
    for target, label in [(context, 1.0)] + [(n, 0.0) for n in negatives]:
        s, d_center, d_target = _sim_and_partials(model, center, target)
        loss += _softplus(-s) if label == 1.0 else _softplus(s)
        g = 1.0 / (1.0 + math.exp(-s)) - label
        grad_in[center] += g * d_center
        if target in grad_out:
            grad_out[target] = grad_out[target] + g * d_target
        else:
            grad_out[target] = g * d_target
    if not math.isfinite(loss):
        raise TrainingDivergedError(
            -1, detail=f" (pair center={center}, context={context})"
        )
    return loss, grad_in, grad_out


def _all_sims(model: SkipGramModel, center: int) -> np.ndarray:
    if model.geometry == EUCLIDEAN:
        return model.w_out @ model.w_in[center]
    rc, tc = model.w_in[center]
    _check_radius(rc)
    _check_radius(model.w_out[:, 0])
    return (
        4.0
        * math.atanh(rc)
        * np.arctanh(model.w_out[:, 0])
        * np.cos(tc - model.w_out[:, 1])
    )


def full_softmax_prob(model: SkipGramModel, center: int, target: int) -> float:
    """exp(sim(center, target)) / sum_v exp(sim(center, v)), max-shifted."""
    s = _all_sims(model, center)
    s -= s.max()
    e = np.exp(s)
    return float(e[target] / e.sum())


# --- negative-sampling SGD kernels (single-threaded, deterministic) -----

@njit(cache=True)
def _sgd_euclidean(w_in, w_out, centers, contexts, negs, lrs):
    n = centers.shape[0]
    n_neg = negs.shape[1]
    dim = w_in.shape[1]
    g_arr = np.empty(n_neg + 1)
    targets = np.empty(n_neg + 1, np.int64)
    grad_c = np.empty(dim)
    loss = 0.0
    for i in range(n):
        c = centers[i]
        lr = lrs[i]
        targets[0] = contexts[i]
        for k in range(n_neg):
            targets[k + 1] = negs[i, k]
        for j in range(dim):
            grad_c[j] = 0.0
        for k in range(n_neg + 1):
            o = targets[k]
            s = 0.0
            for j in range(dim):
                s += w_in[c, j] * w_out[o, j]
            if k == 0:
                loss += max(-s, 0.0) + np.log1p(np.exp(-abs(s)))
                g = 1.0 / (1.0 + np.exp(-s)) - 1.0
            else:
                loss += max(s, 0.0) + np.log1p(np.exp(-abs(s)))
                g = 1.0 / (1.0 + np.exp(-s))
            g_arr[k] = g
            for j in range(dim):
                grad_c[j] += g * w_out[o, j]
        for k in range(n_neg + 1):
            o = targets[k]
            step = lr * g_arr[k]
            for j in range(dim):
                w_out[o, j] -= step * w_in[c, j]
        for j in range(dim):
            w_in[c, j] -= lr * grad_c[j]
    return loss


@njit(cache=True)
def _sgd_poincare(w_in, w_out, centers, contexts, negs, lrs):
    n = centers.shape[0]
    n_neg = negs.shape[1]
    targets = np.empty(n_neg + 1, np.int64)
    dro = np.empty(n_neg + 1)
    dto = np.empty(n_neg + 1)
    loss = 0.0
    r_min = 1e-5
    r_max = 1.0 - 1e-5
    two_pi = 2.0 * np.pi
    for i in range(n):
        c = centers[i]
        lr = lrs[i]
        targets[0] = contexts[i]
        for k in range(n_neg):
            targets[k + 1] = negs[i, k]
        rc = w_in[c, 0]
        tc = w_in[c, 1]
        ac = np.arctanh(rc)
        grad_rc = 0.0
        grad_tc = 0.0
        for k in range(n_neg + 1):
            o = targets[k]
            ro = w_out[o, 0]
            to = w_out[o, 1]
            ao = np.arctanh(ro)
            cosd = np.cos(tc - to)
            sind = np.sin(tc - to)
            s = 4.0 * ac * ao * cosd
            if k == 0:
                loss += max(-s, 0.0) + np.log1p(np.exp(-abs(s)))
                g = 1.0 / (1.0 + np.exp(-s)) - 1.0
            else:
                loss += max(s, 0.0) + np.log1p(np.exp(-abs(s)))
                g = 1.0 / (1.0 + np.exp(-s))
            grad_rc += g * 4.0 * ao * cosd / (1.0 - rc * rc)
            grad_tc += g * (-4.0) * ac * ao * sind
            dro[k] = g * 4.0 * ac * cosd / (1.0 - ro * ro)
            dto[k] = g * 4.0 * ac * ao * sind
        for k in range(n_neg + 1):
            o = targets[k]
            r_new = w_out[o, 0] - lr * dro[k]
            if r_new < r_min:
                r_new = r_min
            elif r_new > r_max:
                r_new = r_max
            w_out[o, 0] = r_new
            w_out[o, 1] = (w_out[o, 1] - lr * dto[k]) % two_pi
        r_new = rc - lr * grad_rc
        if r_new < r_min:
            r_new = r_min
        elif r_new > r_max:
            r_new = r_max
        w_in[c, 0] = r_new
        w_in[c, 1] = (tc - lr * grad_tc) % two_pi
    return loss


def _clip_poincare(model: SkipGramModel) -> None:
    for w in (model.w_in, model.w_out):
        np.clip(w[:, 0], R_MIN, R_MAX, out=w[:, 0])
        np.mod(w[:, 1], TWO_PI, out=w[:, 1])


def _apply_exact_softmax_pair(model: SkipGramModel, c: int, ctx: int, lr: float) -> float:
    """One full-softmax SGD step; returns the pair's cross-entropy loss."""
    s = _all_sims(model, c)
    shift = s - s.max()
    e = np.exp(shift)
    z = e.sum()
    p = e / z
    loss = float(np.log(z) - shift[ctx])
    g = p.copy()
    g[ctx] -= 1.0
    if model.geometry == EUCLIDEAN:
        grad_c = model.w_out.T @ g
        model.w_out -= lr * np.outer(g, model.w_in[c])
        model.w_in[c] -= lr * grad_c
        return loss
    rc, tc = model.w_in[c]
    ac = math.atanh(rc)
    r = model.w_out[:, 0]
    theta = model.w_out[:, 1]
    a = np.arctanh(r)
    cosd = np.cos(tc - theta)
    sind = np.sin(tc - theta)
    grad_rc = float(np.sum(g * 4.0 * a * cosd) / (1.0 - rc * rc))
    grad_tc = float(np.sum(g * (-4.0) * ac * a * sind))
    model.w_out[:, 0] -= lr * g * 4.0 * ac * cosd / (1.0 - r * r)
    model.w_out[:, 1] -= lr * g * 4.0 * ac * a * sind
    model.w_in[c, 0] = rc - lr * grad_rc
    model.w_in[c, 1] = tc - lr * grad_tc
    _clip_poincare(model)
    return loss


def _noise_cdf(corpus: WalkCorpus, vocab: int) -> np.ndarray:
    freq = corpus.vertex_frequencies(vocab).astype(np.float64)
    weights = freq**0.75
    total = weights.sum()
    if total == 0.0:
        weights = np.ones(vocab)
        total = float(vocab)
    return np.cumsum(weights / total)


def _draw_negatives(
    rng: np.random.Generator, cdf: np.ndarray, contexts: np.ndarray, k: int
) -> np.ndarray:
    negs = np.searchsorted(cdf, rng.random((len(contexts), k))).astype(np.int32)
    # keep the noise draws disjoint from each pair's context vertex
    for _ in range(100):
        clash = negs == contexts[:, None]
        n_clash = int(clash.sum())
        if n_clash == 0:
            return negs
        negs[clash] = np.searchsorted(cdf, rng.random(n_clash)).astype(np.int32)
    raise RuntimeError("could not draw negatives disjoint from contexts")


_CHUNK = 1 << 20


def train(
    g: Graph,
    corpus: WalkCorpus,
    config: SkipGramConfig,
    method_tag: str = "deepwalk",
) -> TrainResult:
    """SGD over the corpus context pairs with a per-epoch seeded shuffle
    and the learning rate decayed linearly to lr/100 by the final update.
    Returns the input-side rows as the embedding plus per-epoch mean loss.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    pairs = context_pairs(corpus, config.window)
    n_pairs = len(pairs)
    if n_pairs == 0:
        raise ValueError("corpus produced no context pairs")
    if config.mode not in ("negative_sampling", "exact_softmax"):
        raise ValueError(f"unknown training mode {config.mode!r}")
    if config.mode == "exact_softmax" and g.vertex_count > EXACT_SOFTMAX_MAX_VOCAB:
        raise ValueError(
            f"exact_softmax mode is limited to {EXACT_SOFTMAX_MAX_VOCAB} vertices"
        )
    model = init_model(g.vertex_count, config.dim, config.geometry, config.seed)
    total_steps = config.epochs * n_pairs
    lr0 = config.lr
    lr_min = config.lr / 100.0

    def lr_at(step: np.ndarray | float):
        if total_steps <= 1:
            return np.full_like(np.asarray(step, dtype=np.float64), lr0)
        frac = np.asarray(step, dtype=np.float64) / (total_steps - 1)
        return lr0 + (lr_min - lr0) * frac

    cdf = _noise_cdf(corpus, g.vertex_count) if config.mode == "negative_sampling" else None
    kernel = _sgd_euclidean if config.geometry == EUCLIDEAN else _sgd_poincare

    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        rng = rng_for(config.seed, "epoch", epoch)
        perm = rng.permutation(n_pairs)
        loss_sum = 0.0
        if config.mode == "negative_sampling":
            for start in range(0, n_pairs, _CHUNK):
                idx = perm[start:start + _CHUNK]
                c = pairs.centers[idx]
                o = pairs.contexts[idx]
                negs = _draw_negatives(rng, cdf, o, config.negatives)
                lrs = lr_at(epoch * n_pairs + start + np.arange(len(idx)))
                loss_sum += kernel(model.w_in, model.w_out, c, o, negs, lrs)
        else:
            base = epoch * n_pairs
            for j, t in enumerate(perm):
                loss_sum += _apply_exact_softmax_pair(
                    model,
                    int(pairs.centers[t]),
                    int(pairs.contexts[t]),
                    float(lr_at(base + j)),
                )
        mean_loss = loss_sum / n_pairs
        if not math.isfinite(mean_loss):
            raise TrainingDivergedError(epoch)
        epoch_losses.append(mean_loss)

    emb = Embedding(
        matrix=model.w_in.copy(),
        geometry=config.geometry,
        method_tag=method_tag,
        vertex_labels=g.labels,
    )
    return TrainResult(embedding=emb, epoch_losses=epoch_losses)


# --- method presets ------------------------------------------------------

WALK_DEFAULTS = {"walks_per_vertex": 10, "walk_length": 80}

METHOD_PRESETS: dict[str, dict] = {
    "deepwalk": {"strategy": UNIFORM, "config": SkipGramConfig()},
    "node2vec_h": {
        "strategy": WalkStrategy("biased", p=1.0, q=0.5),
        "config": SkipGramConfig(),
    },
    "node2vec_s": {
        "strategy": WalkStrategy("biased", p=0.5, q=2.0),
        "config": SkipGramConfig(),
    },
    "poincare": {
        "strategy": WalkStrategy("biased", p=0.5, q=2.0),
        "config": SkipGramConfig(dim=2, geometry=POINCARE),
    },
}


def method_settings(method_tag: str, **overrides) -> tuple[WalkStrategy, SkipGramConfig, dict]:
    """Resolve a method tag to its walk strategy, training config and walk
    parameters, with keyword overrides applied on top of the defaults."""
    if method_tag not in METHOD_PRESETS:
        raise ValueError(
            f"unknown method {method_tag!r}; expected one of {sorted(METHOD_PRESETS)}"
        )
    preset = METHOD_PRESETS[method_tag]
    strategy: WalkStrategy = preset["strategy"]
    config: SkipGramConfig = preset["config"]
    walk_params = dict(WALK_DEFAULTS)
    for key, value in overrides.items():
        if key in walk_params:
            walk_params[key] = int(value)
        elif key in ("p", "q"):
            if strategy.kind != "biased":
                raise ValueError(f"{method_tag} does not take a {key} parameter")
            strategy = replace(strategy, **{key: float(value)})
        elif key in asdict(config):
            config = replace(config, **{key: value})
        else:
            raise ValueError(f"unknown override {key!r}")
    return strategy, config, walk_params


def make_method(method_tag: str, g: Graph, seed: int, **overrides) -> Embedding:
    """Generate the method's walk corpus and train its embedding with the
    published defaults (dim 128 Euclidean methods, 2-D Poincare disk;
    SGD lr 0.1 for 15 epochs)."""
    strategy, config, walk_params = method_settings(method_tag, **overrides)
    corpus = generate_corpus(
        g,
        walks_per_vertex=walk_params["walks_per_vertex"],
        length=walk_params["walk_length"],
        strategy=strategy,
        seed=derive_seed(seed, "corpus", method_tag),
    )
    config = replace(config, seed=derive_seed(seed, "train", method_tag))
    return train(g, corpus, config, method_tag=method_tag).embedding
