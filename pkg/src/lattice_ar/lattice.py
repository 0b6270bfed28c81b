"""Spatial weights matrices built from graph adjacency, and their legal rho ranges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ComplexSpectrum, DegenerateSpectrum, InvalidGraph, IsolatedNode

ZERO_EIG_RTOL = 1e-10
IMAG_RTOL = 1e-8
ROW_SUM_ATOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected graph on nodes ``0..n-1``; edges are unordered pairs."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise InvalidGraph(f"node count must be nonnegative, got {self.n}")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InvalidGraph(f"self-loop at node {i + 1}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidGraph(f"edge ({i + 1}, {j + 1}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "AdjacencyGraph":
        return cls(n, frozenset(tuple(p) for p in pairs))

    def neighbors(self, i: int) -> list[int]:
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)


def grid_graph(nrows: int, ncols: int) -> AdjacencyGraph:
    """Rook adjacency on an ``nrows x ncols`` lattice, nodes numbered row by row."""
    edges = []
    for r in range(nrows):
        for c in range(ncols):
            k = r * ncols + c
            if c + 1 < ncols:
                edges.append((k, k + 1))
            if r + 1 < nrows:
                edges.append((k, k + ncols))
    return AdjacencyGraph.from_pairs(nrows * ncols, edges)


@dataclass(frozen=True)
class WeightsMatrix:
    """Square zero-diagonal weights matrix.

    ``kind`` is one of ``"binary"``, ``"row-standardized"`` or ``"general"``.
    """

    values: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidGraph(f"weights matrix must be square, got shape {v.shape}")
        if np.any(np.diag(v) != 0.0):
            bad = np.flatnonzero(np.diag(v) != 0.0)
            raise InvalidGraph(f"nonzero diagonal at nodes {(bad + 1).tolist()}")
        if self.kind not in ("binary", "row-standardized", "general"):
            raise ValueError(f"unknown weights kind {self.kind!r}")
        if self.kind == "row-standardized":
            rs = v.sum(axis=1)
            nz = np.any(v != 0.0, axis=1)
            if np.any(np.abs(rs[nz] - 1.0) > ROW_SUM_ATOL):
                raise InvalidGraph("row-standardized weights must have unit row sums")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, WeightsMatrix) else np.asarray(w, dtype=float)


def build_binary_weights(g: AdjacencyGraph) -> WeightsMatrix:
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0
    return WeightsMatrix(w, "binary")


def row_standardize(w: WeightsMatrix) -> tuple[WeightsMatrix, np.ndarray]:
    """Divide each row by its sum.

    Returns the row-standardized matrix and the companion diagonal matrix
    with entries ``1 / row_sum``; the pair satisfies the CAR symmetry
    condition when ``w`` is symmetric.
    """
    v = _values(w)
    rs = v.sum(axis=1)
    bad = np.flatnonzero(rs <= 0.0)
    if bad.size:
        raise IsolatedNode(f"nonpositive row sum at nodes {(bad + 1).tolist()}", witness=(bad + 1).tolist())
    return WeightsMatrix(v / rs[:, None], "row-standardized"), np.diag(1.0 / rs)


@dataclass(frozen=True)
class RhoBounds:
    lower: float
    upper: float
    eigenvalues: np.ndarray

    def contains(self, rho: float) -> bool:
        return self.lower < rho < self.upper

    def shrunk(self, margin: float) -> tuple[float, float]:
        return self.lower + margin, self.upper - margin


def real_eigenvalues(w) -> np.ndarray:
    """Sorted eigenvalues of ``w``; raises ComplexSpectrum if any are not real."""
    v = _values(w)
    if np.array_equal(v, v.T):
        return np.linalg.eigvalsh(v)
    ev = np.linalg.eigvals(v)
    radius = np.abs(ev).max() if ev.size else 0.0
    if np.any(np.abs(ev.imag) > IMAG_RTOL * max(radius, np.finfo(float).tiny)):
        raise ComplexSpectrum("weights matrix has complex eigenvalues",
                              witness=float(np.abs(ev.imag).max()))
    return np.sort(ev.real)


def rho_bounds(w) -> RhoBounds:
    """Open interval of rho for which ``I - rho W`` has only positive eigenvalues."""
    lam = real_eigenvalues(w)
    scale = np.abs(lam).max() if lam.size else 0.0
    nonzero = lam[np.abs(lam) >= ZERO_EIG_RTOL * scale] if scale > 0 else lam[:0]
    if nonzero.size < 2:
        raise DegenerateSpectrum(f"{nonzero.size} nonzero eigenvalue(s); rho bounds undefined")
    lo = 1.0 / lam[0] if lam[0] < 0 else -np.inf
    hi = 1.0 / lam[-1] if lam[-1] > 0 else np.inf
    return RhoBounds(float(lo), float(hi), _frozen(lam))
