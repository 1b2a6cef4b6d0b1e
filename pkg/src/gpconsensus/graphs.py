"""Undirected interaction graphs, Laplacians and switching schedules.

Node indices are 1-based everywhere a user sees them (edge lists, scenario
files, CSV headers).  Internally, per-pair quantities are stored as flat
arrays in lexicographic pair order ``(1,2), (1,3), ..., (n-1,n)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ValidationError

ZERO_EIG_RTOL = 1e-8
DWELL_TOL = 1e-12


def pair_list(n: int) -> list[tuple[int, int]]:
    """All unordered pairs ``(i, k)``, ``i < k``, 1-based, lexicographic."""
    return [(i + 1, k + 1) for i, k in combinations(range(n), 2)]


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, k: int, n: int) -> int:
    """Flat position of the unordered 1-based pair ``{i, k}``."""
    if i == k:
        raise ValueError("a pair needs two distinct nodes")
    a, b = (i, k) if i < k else (k, i)
    a -= 1
    b -= 1
    return a * n - a * (a + 1) // 2 + (b - a - 1)


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based endpoint arrays ``(first, second)`` in pair order."""
    first, second = np.triu_indices(n, k=1)
    return first.astype(np.intp), second.astype(np.intp)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``1..n``."""

    n: int
    edges: frozenset[tuple[int, int]]
    name: str = ""

    def __init__(self, n: int, edges: Iterable[Sequence[int]], name: str = ""):
        if n < 2:
            raise ValidationError(f"graph needs at least 2 nodes, got {n}")
        seen: set[tuple[int, int]] = set()
        for e in edges:
            if len(e) != 2:
                raise ValidationError(f"edge {tuple(e)} is not a pair")
            i, k = int(e[0]), int(e[1])
            if i == k:
                raise ValidationError(f"self-loop at node {i}")
            if not (1 <= i <= n and 1 <= k <= n):
                raise ValidationError(f"edge ({i},{k}) outside nodes 1..{n}")
            key = (min(i, k), max(i, k))
            if key in seen:
                raise ValidationError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(seen))
        object.__setattr__(self, "name", name)

    def neighbors(self, i: int) -> list[int]:
        return sorted(k if j == i else j for j, k in self.edges if i in (j, k))

    def edge_mask(self) -> np.ndarray:
        """Boolean array over all pairs, True where the pair is an edge."""
        mask = np.zeros(pair_count(self.n), dtype=bool)
        for i, k in self.edges:
            mask[pair_index(i, k, self.n)] = True
        return mask

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


# -- a few deterministic constructors used by tests and bundled scenarios ----

def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(1, n)], name="path")


def ring_graph(n: int) -> Graph:
    edges = [(i, i + 1) for i in range(1, n)]
    if n > 2:
        edges.append((1, n))
    return Graph(n, edges, name="ring")


def star_graph(n: int, center: int = 1) -> Graph:
    return Graph(n, [(center, k) for k in range(1, n + 1) if k != center], name="star")


def complete_graph(n: int) -> Graph:
    return Graph(n, pair_list(n), name="complete")


# -- Laplacians ---------------------------------------------------------------

def laplacian_01(graph: Graph) -> np.ndarray:
    L = np.zeros((graph.n, graph.n))
    for i, k in graph.edges:
        L[i - 1, k - 1] = L[k - 1, i - 1] = -1.0
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def weighted_laplacian(graph: Graph, weights: "WeightState | np.ndarray") -> np.ndarray:
    """Laplacian with the adaptive weights on present edges.

    Weights of non-edges (virtual channels) are ignored.
    """
    w = weights.values if isinstance(weights, WeightState) else np.asarray(weights, float)
    if w.shape != (pair_count(graph.n),):
        raise ValidationError(
            f"expected {pair_count(graph.n)} pair weights, got shape {w.shape}"
        )
    L = np.zeros((graph.n, graph.n))
    for i, k in graph.edges:
        L[i - 1, k - 1] = L[k - 1, i - 1] = -w[pair_index(i, k, graph.n)]
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def is_connected(graph: Graph) -> bool:
    adj: dict[int, list[int]] = {v: [] for v in range(1, graph.n + 1)}
    for i, k in graph.edges:
        adj[i].append(k)
        adj[k].append(i)
    seen = {1}
    queue = deque([1])
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return len(seen) == graph.n


def laplacian_spectrum(L: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Ascending eigenvalues of a symmetric Laplacian-like matrix."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {L.shape}")
    scale = max(1.0, float(np.abs(L).max(initial=0.0)))
    if not np.allclose(L, L.T, rtol=0.0, atol=atol * scale):
        raise ValidationError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (L + L.T))


def algebraic_connectivity(graph: Graph) -> float:
    return float(laplacian_spectrum(laplacian_01(graph))[1])


def connected_by_spectrum(graph: Graph) -> bool:
    eig = laplacian_spectrum(laplacian_01(graph))
    return bool(eig[1] > ZERO_EIG_RTOL * max(1.0, eig[-1]))


def complete_projection(n: int) -> np.ndarray:
    """``I - 11^T/n``: the Laplacian of the complete graph with edge weight 1/n."""
    if n < 2:
        raise ValidationError(f"projection needs n >= 2, got {n}")
    return np.eye(n) - np.full((n, n), 1.0 / n)


# -- adaptive weights ---------------------------------------------------------

@dataclass
class WeightState:
    """Symmetric pair weights, one slot per unordered pair (edges and non-edges)."""

    n: int
    values: np.ndarray

    @classmethod
    def ones(cls, n: int) -> "WeightState":
        return cls(n, np.ones(pair_count(n)))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (pair_count(self.n),):
            raise ValidationError(
                f"expected {pair_count(self.n)} weights, got {self.values.shape}"
            )

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return float(self.values[pair_index(pair[0], pair[1], self.n)])

    def __setitem__(self, pair: tuple[int, int], value: float) -> None:
        self.values[pair_index(pair[0], pair[1], self.n)] = value

    def copy(self) -> "WeightState":
        return WeightState(self.n, self.values.copy())


# -- switching ----------------------------------------------------------------

@dataclass(frozen=True)
class SwitchingSet:
    graphs: tuple[Graph, ...]
    dwell: float

    def __init__(self, graphs: Sequence[Graph], dwell: float):
        graphs = tuple(graphs)
        if not graphs:
            raise ValidationError("switching set is empty")
        n = graphs[0].n
        for j, g in enumerate(graphs):
            if g.n != n:
                raise ValidationError(f"graph {j} has {g.n} nodes, expected {n}")
            if not is_connected(g):
                raise ValidationError(f"graph {j} ({g.name or 'unnamed'}) is not connected")
        if not dwell > 0:
            raise ValidationError(f"dwell time must be positive, got {dwell}")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "dwell", float(dwell))

    @property
    def n(self) -> int:
        return self.graphs[0].n

    def __len__(self) -> int:
        return len(self.graphs)


@dataclass(frozen=True)
class SwitchingSchedule:
    """Piecewise-constant, right-continuous switching signal.

    Segment ``m`` covers ``[breakpoints[m], breakpoints[m+1])`` and uses graph
    ``indices[m]``; the last segment extends to infinity.
    """

    breakpoints: tuple[float, ...]
    indices: tuple[int, ...]
    dwell: float = 0.0
    n_graphs: int | None = None

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "indices", idx)
        if not bp or bp[0] != 0.0:
            raise ValidationError("schedule must start at t = 0")
        if len(bp) != len(idx):
            raise ValidationError("breakpoints and indices differ in length")
        for a, b in zip(bp, bp[1:]):
            if b - a < self.dwell - DWELL_TOL or b <= a:
                raise ValidationError(
                    f"switch gap {b - a:.6g} at t={b:.6g} violates dwell {self.dwell:.6g}"
                )
        if self.n_graphs is not None and any(not 0 <= i < self.n_graphs for i in idx):
            raise ValidationError("schedule references a graph outside the switching set")

    def index_at(self, t: float) -> int:
        m = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.indices[max(m, 0)]

    def segments(self, horizon: float) -> list[tuple[float, float, int]]:
        """``(start, end, graph index)`` for each segment intersecting ``[0, horizon]``."""
        out = []
        for m, (t0, g) in enumerate(zip(self.breakpoints, self.indices)):
            if t0 >= horizon:
                break
            t1 = self.breakpoints[m + 1] if m + 1 < len(self.breakpoints) else horizon
            out.append((t0, min(t1, horizon), g))
        return out


def sample_switching_signal(
    switching: SwitchingSet, horizon: float, interval: float, seed: int
) -> SwitchingSchedule:
    """Switch every ``interval`` seconds to a uniformly drawn graph of the set."""
    if not horizon > 0:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    if interval < switching.dwell - DWELL_TOL:
        raise ValidationError(
            f"switch interval {interval} is shorter than the dwell time {switching.dwell}"
        )
    count = max(1, math.ceil(horizon / interval - 1e-9))
    rng = np.random.default_rng(seed)
    indices = rng.integers(0, len(switching), size=count)
    return SwitchingSchedule(
        breakpoints=tuple(m * interval for m in range(count)),
        indices=tuple(int(i) for i in indices),
        dwell=switching.dwell,
        n_graphs=len(switching),
    )
