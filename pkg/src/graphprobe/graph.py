"""Undirected simple graphs loaded from SNAP-style edge-list files.

Graphs are immutable after construction: vertices are dense internal ids
0..n-1 (assigned by first appearance in the input), adjacency is stored in
CSR form with sorted neighbor lists, and the original vertex labels are
kept for round-tripping output files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class EdgeListParseError(ValueError):
    """A data line did not contain exactly two vertex labels."""

    def __init__(self, line_number: int, line: str):
        self.line_number = line_number
        self.line = line
        super().__init__(f"line {line_number}: expected two vertex labels, got {line!r}")


class EmptyGraphError(ValueError):
    """The input contained no edges."""


@dataclass(frozen=True)
class CleaningStats:
    """What the loader dropped while normalizing the edge list."""

    self_loops: int = 0
    duplicates: int = 0


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph with CSR adjacency."""

    vertex_count: int
    edges: np.ndarray          # (|E|, 2) int32, u < v, lexicographically sorted
    indptr: np.ndarray         # (|V|+1,) int64
    indices: np.ndarray        # (2|E|,) int32, sorted within each row
    labels: tuple[str, ...]    # internal id -> original label
    cleaning: CleaningStats = field(default=CleaningStats())

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def label_to_id(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def degree(self, v: int) -> int:
        self._check_vertex(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr).astype(np.int64)

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.vertex_count:
            raise IndexError(f"vertex id {v} out of range [0, {self.vertex_count})")

    def same_edge_set(self, other: "Graph") -> bool:
        """True when both graphs have identical edges under their label maps."""
        if self.vertex_count != other.vertex_count:
            return False
        mine = {frozenset((self.labels[u], self.labels[v])) for u, v in self.edges}
        theirs = {frozenset((other.labels[u], other.labels[v])) for u, v in other.edges}
        return mine == theirs


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def from_edges(
    pairs: Iterable[tuple[int, int]],
    vertex_count: int | None = None,
    labels: tuple[str, ...] | None = None,
    cleaning: CleaningStats = CleaningStats(),
) -> Graph:
    """Build a Graph from internal-id pairs (already deduplicated upstream
    or not; self-loops and duplicates are dropped here as well).

    ``vertex_count`` may extend beyond the largest id to create isolated
    vertices; plain edge lists never produce them.
    """
    seen: set[tuple[int, int]] = set()
    for u, v in pairs:
        if u == v:
            continue
        seen.add((u, v) if u < v else (v, u))
    if seen:
        edges = np.array(sorted(seen), dtype=np.int32)
        n_from_edges = int(edges.max()) + 1
    else:
        edges = np.empty((0, 2), dtype=np.int32)
        n_from_edges = 0
    n = max(n_from_edges, vertex_count or 0)
    if labels is None:
        labels = tuple(str(i) for i in range(n))
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} vertices")

    both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else np.empty((0, 2), np.int32)
    counts = np.bincount(both[:, 0], minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    order = np.lexsort((both[:, 1], both[:, 0]))
    indices = both[order, 1].astype(np.int32)
    return Graph(
        vertex_count=n,
        edges=_freeze(edges),
        indptr=_freeze(indptr),
        indices=_freeze(indices),
        labels=labels,
        cleaning=cleaning,
    )


def load_edge_list(source: TextIO | str) -> Graph:
    """Parse a SNAP-style edge list: '#' comment lines, two whitespace
    separated vertex labels per data line.

    Self-loops are dropped, duplicate and reversed edges merged, and labels
    remapped to dense internal ids in order of first appearance; the drop
    counts are reported on ``graph.cleaning``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    label_ids: dict[str, int] = {}
    labels: list[str] = []
    raw_pairs: list[tuple[int, int]] = []
    self_loops = 0
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(lineno, line)
        ids = []
        for tok in tokens:
            if tok not in label_ids:
                label_ids[tok] = len(labels)
                labels.append(tok)
            ids.append(label_ids[tok])
        u, v = ids
        if u == v:
            self_loops += 1
            continue
        raw_pairs.append((u, v) if u < v else (v, u))
    if not raw_pairs:
        raise EmptyGraphError("edge list contains no usable edges")
    unique = sorted(set(raw_pairs))
    duplicates = len(raw_pairs) - len(unique)
    return from_edges(
        unique,
        vertex_count=len(labels),
        labels=tuple(labels),
        cleaning=CleaningStats(self_loops=self_loops, duplicates=duplicates),
    )


def load_edge_list_file(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return load_edge_list(fh)


def save_edge_list(g: Graph, sink: TextIO) -> None:
    """Write the graph back out in the same format (one line per edge,
    original labels)."""
    for u, v in g.edges:
        sink.write(f"{g.labels[u]} {g.labels[v]}\n")


def neighbors(g: Graph, v: int) -> np.ndarray:
    """Sorted, duplicate-free neighbor ids of ``v``."""
    g._check_vertex(v)
    return g.indices[g.indptr[v]:g.indptr[v + 1]]


def adjacency_row(g: Graph, v: int) -> np.ndarray:
    """Dense binary row of the adjacency matrix for ``v`` (diagonal 0)."""
    g._check_vertex(v)
    row = np.zeros(g.vertex_count, dtype=np.float64)
    row[neighbors(g, v)] = 1.0
    return row
