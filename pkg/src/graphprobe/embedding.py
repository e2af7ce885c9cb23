"""Vertex embedding container and its text file format.

File layout: first line ``|V| d geometry``, then one line per vertex with
the original label followed by d full-precision reals. Poincare embeddings
are 2-column (radius, angle) matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

EUCLIDEAN = "euclidean"
POINCARE = "poincare_polar"
GEOMETRIES = (EUCLIDEAN, POINCARE)

METHOD_TAGS = ("deepwalk", "node2vec_h", "node2vec_s", "poincare", "sdne")


@dataclass(frozen=True)
class Embedding:
    matrix: np.ndarray          # (|V|, d) float64
    geometry: str
    method_tag: str
    vertex_labels: tuple[str, ...]

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == POINCARE and self.matrix.shape[1] != 2:
            raise ValueError("poincare_polar embeddings must have d=2")
        if len(self.vertex_labels) != self.matrix.shape[0]:
            raise ValueError("label count does not match matrix rows")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vertex_count(self) -> int:
        return self.matrix.shape[0]

    def as_points(self) -> np.ndarray:
        """Rows as Euclidean coordinates; Poincare rows are mapped from
        polar (r, theta) to the disk's (r cos theta, r sin theta)."""
        if self.geometry == POINCARE:
            r = self.matrix[:, 0]
            theta = self.matrix[:, 1]
            return np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        return self.matrix


def write_embedding(emb: Embedding, sink: TextIO) -> None:
    sink.write(f"{emb.vertex_count} {emb.dim} {emb.geometry}\n")
    for label, row in zip(emb.vertex_labels, emb.matrix):
        values = " ".join(repr(float(x)) for x in row)
        sink.write(f"{label} {values}\n")


def read_embedding(source: TextIO, method_tag: str = "deepwalk") -> Embedding:
    header = source.readline().split()
    if len(header) != 3:
        raise ValueError(f"bad embedding header: {header}")
    n, d, geometry = int(header[0]), int(header[1]), header[2]
    labels: list[str] = []
    rows = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        parts = source.readline().split()
        if len(parts) != d + 1:
            raise ValueError(f"embedding row {i}: expected {d + 1} fields, got {len(parts)}")
        labels.append(parts[0])
        rows[i] = [float(x) for x in parts[1:]]
    return Embedding(
        matrix=rows, geometry=geometry, method_tag=method_tag, vertex_labels=tuple(labels)
    )
