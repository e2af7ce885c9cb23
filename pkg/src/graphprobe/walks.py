"""Random-walk corpora and skip-gram training pairs.

Uniform walks take each step uniformly over the current vertex's neighbors;
biased walks reweight the step by where the candidate sits relative to the
previous vertex (return weight 1/p, stay-local weight 1, move-away weight
1/q). Corpora are generated with per-walk seeded RNG so output is identical
regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .graph import Graph, neighbors
from .seeding import rng_for


@dataclass(frozen=True)
class WalkStrategy:
    kind: str                  # "uniform" | "biased"
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "biased"):
            raise ValueError(f"unknown walk strategy {self.kind!r}")
        if self.kind == "biased" and (self.p <= 0 or self.q <= 0):
            raise ValueError("biased walk parameters p and q must be positive")


UNIFORM = WalkStrategy("uniform")


@dataclass(frozen=True)
class WalkCorpus:
    walks: list[np.ndarray]
    walk_length: int
    walks_per_vertex: int
    strategy: WalkStrategy
    seed: int

    def __len__(self) -> int:
        return len(self.walks)

    def token_count(self) -> int:
        return sum(len(w) for w in self.walks)

    def vertex_frequencies(self, vertex_count: int) -> np.ndarray:
        counts = np.zeros(vertex_count, dtype=np.int64)
        for w in self.walks:
            counts += np.bincount(w, minlength=vertex_count)
        return counts


@dataclass(frozen=True)
class ContextPairs:
    """(center, context) training pairs within ``window`` of each other."""

    centers: np.ndarray   # int32
    contexts: np.ndarray  # int32
    window: int

    def __len__(self) -> int:
        return len(self.centers)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.centers.tolist(), self.contexts.tolist()))


def uniform_walk(g: Graph, start: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """Walk of exactly ``length`` vertices from ``start`` (shorter only if a
    degree-0 vertex halts it)."""
    g._check_vertex(start)
    if length < 1:
        raise ValueError("walk length must be >= 1")
    walk = np.empty(length, dtype=np.int32)
    walk[0] = start
    cur = start
    for i in range(1, length):
        nbrs = neighbors(g, cur)
        if len(nbrs) == 0:
            return walk[:i].copy()
        cur = int(nbrs[rng.integers(len(nbrs))])
        walk[i] = cur
    return walk


def biased_weights(g: Graph, prev: int, cur: int, p: float, q: float) -> np.ndarray:
    """Unnormalized second-order transition weights over neighbors(cur):
    1/p for returning to ``prev``, 1 for neighbors of ``prev``, 1/q else."""
    nbrs = neighbors(g, cur)
    w = np.full(len(nbrs), 1.0 / q)
    prev_nbrs = neighbors(g, prev)
    if len(prev_nbrs):
        pos = np.searchsorted(prev_nbrs, nbrs)
        pos_c = np.minimum(pos, len(prev_nbrs) - 1)
        w[prev_nbrs[pos_c] == nbrs] = 1.0
    w[nbrs == prev] = 1.0 / p
    return w


def biased_step(
    g: Graph, prev: int, cur: int, p: float, q: float, rng: np.random.Generator
) -> int:
    nbrs = neighbors(g, cur)
    cum = np.cumsum(biased_weights(g, prev, cur, p, q))
    t = rng.random() * cum[-1]
    return int(nbrs[np.searchsorted(cum, t, side="right")])


def biased_walk(
    g: Graph, start: int, length: int, p: float, q: float, rng: np.random.Generator
) -> np.ndarray:
    """Second-order biased walk; the first step is uniform (no previous
    vertex yet)."""
    g._check_vertex(start)
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    if length < 1:
        raise ValueError("walk length must be >= 1")
    walk = np.empty(length, dtype=np.int32)
    walk[0] = start
    if length == 1:
        return walk
    nbrs = neighbors(g, start)
    if len(nbrs) == 0:
        return walk[:1].copy()
    walk[1] = int(nbrs[rng.integers(len(nbrs))])
    for i in range(2, length):
        cur = int(walk[i - 1])
        if g.degree(cur) == 0:
            return walk[:i].copy()
        walk[i] = biased_step(g, int(walk[i - 2]), cur, p, q, rng)
    return walk


def generate_corpus(
    g: Graph,
    walks_per_vertex: int,
    length: int,
    strategy: WalkStrategy = UNIFORM,
    seed: int = 0,
) -> WalkCorpus:
    """``walks_per_vertex`` passes over all vertices, vertex order shuffled
    per pass; each walk's RNG is seeded by (seed, pass, root) so the corpus
    is independent of scheduling."""
    if walks_per_vertex < 1 or length < 1:
        raise ValueError("walks_per_vertex and length must be positive")
    walks: list[np.ndarray] = []
    for pass_idx in range(walks_per_vertex):
        order = rng_for(seed, "order", pass_idx).permutation(g.vertex_count)
        for root in order:
            rng = rng_for(seed, "walk", pass_idx, int(root))
            if strategy.kind == "uniform":
                walks.append(uniform_walk(g, int(root), length, rng))
            else:
                walks.append(biased_walk(g, int(root), length, strategy.p, strategy.q, rng))
    return WalkCorpus(
        walks=walks,
        walk_length=length,
        walks_per_vertex=walks_per_vertex,
        strategy=strategy,
        seed=seed,
    )


def _pair_index(length: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays emitting (i, i+j) for every position i and offset
    j in [-window, window] \\ {0} with 0 <= i+j < length, ordered by
    position then offset."""
    ctr = []
    ctx = []
    for i in range(length):
        for j in range(-window, window + 1):
            if j == 0:
                continue
            k = i + j
            if 0 <= k < length:
                ctr.append(i)
                ctx.append(k)
    return np.asarray(ctr, dtype=np.int64), np.asarray(ctx, dtype=np.int64)


def context_pairs(corpus: WalkCorpus, window: int) -> ContextPairs:
    """All (center, context) pairs within ``window`` positions inside each
    walk, walk-major then position-major then offset-ascending."""
    if window < 1:
        raise ValueError("window must be >= 1")
    index_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    centers: list[np.ndarray] = []
    contexts: list[np.ndarray] = []
    for walk in corpus.walks:
        n = len(walk)
        if n < 2:
            continue
        if n not in index_cache:
            index_cache[n] = _pair_index(n, window)
        ctr_idx, ctx_idx = index_cache[n]
        centers.append(walk[ctr_idx])
        contexts.append(walk[ctx_idx])
    if centers:
        return ContextPairs(
            centers=np.concatenate(centers).astype(np.int32),
            contexts=np.concatenate(contexts).astype(np.int32),
            window=window,
        )
    return ContextPairs(
        centers=np.empty(0, np.int32), contexts=np.empty(0, np.int32), window=window
    )


def write_corpus(corpus: WalkCorpus, g: Graph, sink: TextIO) -> None:
    """One walk per line, space-separated original vertex labels."""
    for walk in corpus.walks:
        sink.write(" ".join(g.labels[v] for v in walk) + "\n")
