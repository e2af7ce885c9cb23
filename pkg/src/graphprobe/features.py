"""The seven vertex-level topological features.

Degree, degree centrality, triangle count, local clustering, eigenvector
centrality (power iteration), PageRank (fixed-point iteration) and exact
betweenness centrality (Brandes accumulation). All are pure functions of an
immutable Graph and deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from numba import njit
from scipy import sparse

from .graph import Graph, neighbors

FEATURE_NAMES = ("DG", "DC", "TC", "CLU", "EC", "PR", "BC")

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


class ConvergenceError(RuntimeError):
    """Iteration hit max_iter before meeting the tolerance.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class FeatureTable:
    """Per-vertex values for all seven features, keyed by original label."""

    vertex_labels: tuple[str, ...]
    dg: np.ndarray
    dc: np.ndarray
    tc: np.ndarray
    clu: np.ndarray
    ec: np.ndarray
    pr: np.ndarray
    bc: np.ndarray

    def column(self, name: str) -> np.ndarray:
        try:
            return getattr(self, name.lower())
        except AttributeError:
            raise KeyError(f"unknown feature {name!r}; expected one of {FEATURE_NAMES}")

    def __len__(self) -> int:
        return len(self.vertex_labels)


def degree(g: Graph) -> np.ndarray:
    return g.degrees()


def degree_centrality(g: Graph) -> np.ndarray:
    # The divisor is |V|, matching the formula this toolkit reproduces
    # (not the |V|-1 convention some libraries use).
    if g.vertex_count == 0:
        raise ValueError("degree centrality needs at least one vertex")
    return g.degrees() / g.vertex_count


@njit(cache=True)
def _triangle_counts(indptr, indices, n):
    tc = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for ei in range(indptr[v], indptr[v + 1]):
            u = indices[ei]
            if u <= v:
                continue
            # sorted-adjacency two-pointer intersection of N(u) and N(v)
            i = indptr[v]
            j = indptr[u]
            common = 0
            while i < indptr[v + 1] and j < indptr[u + 1]:
                a = indices[i]
                b = indices[j]
                if a == b:
                    common += 1
                    i += 1
                    j += 1
                elif a < b:
                    i += 1
                else:
                    j += 1
            # each common neighbor w closes one triangle {v, u, w}
            if common:
                tc[v] += common
                tc[u] += common
    # every triangle was credited to each of its vertices twice
    # (once per incident edge scanned), so halve
    return tc // 2


def triangle_count(g: Graph) -> np.ndarray:
    return _triangle_counts(g.indptr, g.indices, g.vertex_count)


def local_clustering(g: Graph) -> np.ndarray:
    """2*triangles / (d*(d-1)), defined as 0 where degree < 2."""
    d = g.degrees().astype(np.float64)
    tri = triangle_count(g).astype(np.float64)
    out = np.zeros(g.vertex_count)
    mask = d >= 2
    out[mask] = 2.0 * tri[mask] / (d[mask] * (d[mask] - 1.0))
    return out


def _csr_adjacency(g: Graph) -> "sparse.csr_matrix":
    data = np.ones(len(g.indices), dtype=np.float64)
    return sparse.csr_matrix(
        (data, g.indices, g.indptr), shape=(g.vertex_count, g.vertex_count)
    )


def eigenvector_centrality(
    g: Graph, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> np.ndarray:
    """Dominant-eigenvector scores via power iteration from the uniform
    vector, L2-normalized each step, stopping when the L-inf change of the
    iterate drops below ``tol``.

    Iterates on A + I rather than A: the shift leaves the eigenvectors
    unchanged but breaks the +/- lambda oscillation on bipartite graphs
    (a plain star never converges otherwise).
    """
    if g.edge_count == 0:
        raise ValueError("eigenvector centrality needs at least one edge")
    n = g.vertex_count
    a = _csr_adjacency(g)
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iter):
        nxt = a @ x + x
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to zero", x)
        nxt /= norm
        if np.max(np.abs(nxt - x)) < tol:
            x = nxt
            break
        x = nxt
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} iterations", x
        )
    # sign convention: largest-magnitude entry positive (already true for
    # the nonnegative iterate, kept for robustness)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return x


def pagerank(
    g: Graph,
    damping: float = 0.85,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Fixed-point PageRank with uniform redistribution of dangling mass;
    stops when the L1 change drops below ``tol``; output sums to 1."""
    if g.vertex_count == 0:
        raise ValueError("pagerank needs at least one vertex")
    n = g.vertex_count
    a = _csr_adjacency(g)
    deg = g.degrees().astype(np.float64)
    dangling = deg == 0
    safe_deg = np.where(dangling, 1.0, deg)
    pr = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    for _ in range(max_iter):
        share = pr / safe_deg
        share[dangling] = 0.0
        nxt = base + damping * (a @ share)
        nxt += damping * pr[dangling].sum() / n
        if np.abs(nxt - pr).sum() < tol:
            return nxt
        pr = nxt
    raise ConvergenceError(f"pagerank did not converge in {max_iter} iterations", pr)


@njit(cache=True)
def _brandes(indptr, indices, n):
    bc = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    order = np.empty(n, dtype=np.int64)   # BFS visitation order (stack)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        dist[:] = -1
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        n_seen = 0
        while head < tail:
            v = queue[head]
            head += 1
            order[n_seen] = v
            n_seen += 1
            for ei in range(indptr[v], indptr[v + 1]):
                w = indices[ei]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        # dependency accumulation in reverse BFS order
        for k in range(n_seen - 1, -1, -1):
            w = order[k]
            coeff = (1.0 + delta[w]) / sigma[w]
            for ei in range(indptr[w], indptr[w + 1]):
                v = indices[ei]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    # the source loop covers ordered (s, t); unordered pairs count once
    return bc / 2.0


def betweenness(g: Graph) -> np.ndarray:
    """Exact unnormalized betweenness; unordered pairs counted once,
    endpoints excluded, disconnected pairs contribute nothing."""
    return _brandes(g.indptr, g.indices, g.vertex_count)


def compute_all(
    g: Graph, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> FeatureTable:
    """All seven features; propagates convergence errors from EC and PR."""
    return FeatureTable(
        vertex_labels=g.labels,
        dg=degree(g),
        dc=degree_centrality(g),
        tc=triangle_count(g),
        clu=local_clustering(g),
        ec=eigenvector_centrality(g, tol=tol, max_iter=max_iter),
        pr=pagerank(g, tol=tol, max_iter=max_iter),
        bc=betweenness(g),
    )


def write_feature_csv(table: FeatureTable, sink: TextIO) -> None:
    writer = csv.writer(sink)
    writer.writerow(["vertex", *FEATURE_NAMES])
    for i, label in enumerate(table.vertex_labels):
        writer.writerow(
            [
                label,
                int(table.dg[i]),
                repr(float(table.dc[i])),
                int(table.tc[i]),
                repr(float(table.clu[i])),
                repr(float(table.ec[i])),
                repr(float(table.pr[i])),
                repr(float(table.bc[i])),
            ]
        )


def read_feature_csv(source: TextIO) -> FeatureTable:
    reader = csv.reader(source)
    header = next(reader)
    if header != ["vertex", *FEATURE_NAMES]:
        raise ValueError(f"unexpected feature CSV header: {header}")
    labels: list[str] = []
    cols: list[list[float]] = [[] for _ in FEATURE_NAMES]
    for row in reader:
        if not row:
            continue
        labels.append(row[0])
        for k, value in enumerate(row[1:]):
            cols[k].append(float(value))
    arrays = [np.asarray(c) for c in cols]
    return FeatureTable(
        vertex_labels=tuple(labels),
        dg=arrays[0].astype(np.int64),
        dc=arrays[1],
        tc=arrays[2].astype(np.int64),
        clu=arrays[3],
        ec=arrays[4],
        pr=arrays[5],
        bc=arrays[6],
    )
