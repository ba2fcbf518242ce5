"""Random regular graphs: generation, BFS metrics and edge-list I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .closed_form import RRGContext
from .errors import DisconnectedGraph, GenerationExhausted, InvalidParameters

DENSE_LIMIT = 5000
DEFAULT_RETRIES = 10_000


@dataclass(frozen=True, eq=False)
class GraphTopology:
    """An undirected simple ``degree``-regular graph on ``n_nodes`` vertices.

    ``adjacency[i]`` holds the sorted neighbor ids of ``i``. ``shells[i, l]`` is
    the number of nodes at hop distance ``l`` from ``i`` (column 0 counts ``i``
    itself). ``distances`` is a dense hop matrix for graphs up to
    ``DENSE_LIMIT`` nodes and ``None`` above that; use :meth:`distances_from`.
    """

    n_nodes: int
    degree: int
    adjacency: np.ndarray
    seed: int | None
    distances: np.ndarray | None = field(repr=False)
    shells: np.ndarray = field(repr=False)
    diameter: int

    @classmethod
    def from_adjacency(cls, adjacency, seed=None) -> "GraphTopology":
        adjacency = np.sort(np.asarray(adjacency, dtype=np.int64), axis=1)
        adjacency.setflags(write=False)
        n, c = adjacency.shape
        distances, shells, diameter = bfs_metrics(adjacency)
        return cls(n, c, adjacency, seed, distances, shells, diameter)

    @property
    def context(self) -> RRGContext:
        return RRGContext(self.n_nodes, self.degree)

    @property
    def n_edges(self) -> int:
        return self.n_nodes * self.degree // 2

    def edges(self) -> np.ndarray:
        """``(n_edges, 2)`` array of ``u < v`` pairs in lexicographic order."""
        u = np.repeat(np.arange(self.n_nodes), self.degree)
        v = self.adjacency.ravel()
        keep = u < v
        return np.column_stack([u[keep], v[keep]])

    def distances_from(self, source: int) -> np.ndarray:
        if self.distances is not None:
            return self.distances[source]
        return bfs_distances(self.adjacency, source)

    def distance(self, i: int, j: int) -> int:
        return int(self.distances_from(i)[j])

    def shell(self, node: int, ell: int) -> np.ndarray:
        """Ids of the nodes at distance exactly ``ell`` from ``node``."""
        return np.flatnonzero(self.distances_from(node) == ell)

    def shell_size(self, node: int, ell: int) -> int:
        if ell < 0 or ell >= self.shells.shape[1]:
            return 0
        return int(self.shells[node, ell])

    def mean_shells(self) -> np.ndarray:
        """Shell sizes averaged over nodes, indexed by distance."""
        return self.shells.mean(axis=0)

    def eccentricities(self) -> np.ndarray:
        nz = self.shells > 0
        return nz.shape[1] - 1 - np.argmax(nz[:, ::-1], axis=1)

    def write_edgelist(self, path) -> None:
        lines = [f"{self.n_nodes} {self.degree} {self.seed if self.seed is not None else -1}"]
        lines += [f"{u} {v}" for u, v in self.edges()]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_edgelist(cls, path) -> "GraphTopology":
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
        n, c, seed = (int(x) for x in rows[0])
        edges = np.array([[int(a), int(b)] for a, b in rows[1:]], dtype=np.int64).reshape(-1, 2)
        adjacency = _adjacency_from_edges(n, c, edges)
        if adjacency is None:
            raise InvalidParameters(f"{path}: edge list is not a simple {c}-regular graph")
        return cls.from_adjacency(adjacency, seed=None if seed < 0 else seed)


def _adjacency_from_edges(n: int, c: int, edges: np.ndarray) -> np.ndarray | None:
    if len(edges) != n * c // 2:
        return None
    u, v = edges[:, 0], edges[:, 1]
    if np.any(u == v):
        return None
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    if len(np.unique(lo * n + hi)) != len(edges):
        return None
    ends = np.concatenate([u, v])
    if np.any(np.bincount(ends, minlength=n) != c):
        return None
    order = np.argsort(ends, kind="stable")
    return np.concatenate([v, u])[order].reshape(n, c)


def generate_rrg(n: int, c: int, seed: int, max_retries: int = DEFAULT_RETRIES) -> GraphTopology:
    """Sample a simple connected ``c``-regular graph with the pairing model.

    Stubs are matched by a uniform random permutation; any outcome with a
    self-loop, a repeated edge or more than one component is discarded and
    the draw repeated, which keeps the accepted graph uniform over simple
    connected ``c``-regular graphs.
    """
    if c < 3:
        raise InvalidParameters(f"degree must be >= 3, got {c}")
    if (n * c) % 2:
        raise InvalidParameters(f"n*c must be even, got n={n}, c={c}")
    if n <= c:
        raise InvalidParameters(f"need n > c, got n={n}, c={c}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), c)
    for _ in range(max_retries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        adjacency = _adjacency_from_edges(n, c, pairs)
        if adjacency is None:
            continue
        if not _is_connected(adjacency):
            continue
        return GraphTopology.from_adjacency(adjacency, seed=seed)
    raise GenerationExhausted(f"no simple connected {c}-regular graph on {n} nodes in {max_retries} draws")


def analytic_shell_size(ctx: RRGContext, ell: int) -> float:
    """Tree approximation ``c (c-1)^(ell-1)`` of the shell size at distance ``ell``."""
    if ell < 1:
        raise InvalidParameters("shell distance must be >= 1")
    return float(ctx.c * (ctx.c - 1) ** (ell - 1))


def bfs_distances(adjacency, source: int) -> np.ndarray:
    """Hop distances from ``source`` by plain breadth-first traversal; -1 if unreachable."""
    n = len(adjacency)
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def _is_connected(adjacency) -> bool:
    return bool(np.all(bfs_distances(adjacency, 0) >= 0))


def _csr(adjacency: np.ndarray) -> csr_matrix:
    n, c = adjacency.shape
    indptr = np.arange(0, n * c + 1, c)
    return csr_matrix((np.ones(n * c), adjacency.ravel(), indptr), shape=(n, n))


def bfs_metrics(adjacency) -> tuple[np.ndarray | None, np.ndarray, int]:
    """All-pairs hop distances, per-node shell counts and the diameter.

    Raises :class:`DisconnectedGraph` if some pair is unreachable.
    """
    adjacency = np.asarray(adjacency)
    n = len(adjacency)
    if n <= DENSE_LIMIT:
        d = shortest_path(_csr(adjacency), method="D", unweighted=True)
        if np.isinf(d).any():
            raise DisconnectedGraph("graph has more than one component")
        distances = d.astype(np.int64)
        distances.setflags(write=False)
        diameter = int(distances.max())
        shells = np.stack([np.bincount(row, minlength=diameter + 1) for row in distances])
        return distances, shells, diameter
    rows = []
    for s in range(n):
        d = bfs_distances(adjacency, s)
        if np.any(d < 0):
            raise DisconnectedGraph("graph has more than one component")
        rows.append(np.bincount(d))
    diameter = max(len(r) for r in rows) - 1
    shells = np.zeros((n, diameter + 1), dtype=np.int64)
    for s, r in enumerate(rows):
        shells[s, : len(r)] = r
    return None, shells, diameter
