"""
Communication graphs, doubly stochastic mixing matrices and the consensus step.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

STOCHASTIC_TOL = 1e-12

GRAPH_KINDS = ("ring", "path", "star", "complete", "erdos_renyi", "explicit")


class GraphError(ValueError):
    """Invalid topology or weight matrix."""


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes 0..n-1."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"agent count must be positive, got {self.n}")
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) has an index outside [0, {self.n})")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Topology":
        normalized = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            pair = (min(i, j), max(i, j))
            if pair in normalized:
                raise GraphError(f"duplicate edge {pair}")
            normalized.add(pair)
        return cls(n, frozenset(normalized))

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def unreachable(self) -> list[int]:
        """Nodes not reachable from node 0 (breadth-first search)."""
        adj = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return [v for v in range(self.n) if v not in seen]

    def is_connected(self) -> bool:
        return not self.unreachable()

    def require_connected(self):
        missing = self.unreachable()
        if missing:
            raise GraphError(f"graph is disconnected: node {missing[0]} is unreachable from node 0")


def ring(n: int) -> Topology:
    if n <= 2:
        return path(n)
    return Topology.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> Topology:
    return Topology.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(n: int) -> Topology:
    return Topology.from_edges(n, [(0, i) for i in range(1, n)])


def complete(n: int) -> Topology:
    return Topology.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def erdos_renyi(n: int, p: float, rng: np.random.Generator, max_draws: int = 1000) -> Topology:
    """G(n, p) redrawn until connected, at most `max_draws` attempts."""
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must lie in [0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_draws):
        keep = rng.random(iu.size) < p
        topo = Topology.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))
        if topo.is_connected():
            return topo
    raise GraphError(f"no connected G({n}, {p}) graph in {max_draws} draws")


def build_topology(spec: dict, n: int, rng: np.random.Generator | None = None) -> Topology:
    """Topology from a config mapping such as ``{"kind": "ring"}``."""
    kind = spec.get("kind")
    if kind == "ring":
        return ring(n)
    if kind == "path":
        return path(n)
    if kind == "star":
        return star(n)
    if kind == "complete":
        return complete(n)
    if kind == "erdos_renyi":
        if rng is None:
            raise GraphError("erdos_renyi graphs need a random generator")
        return erdos_renyi(n, float(spec.get("p", 0.5)), rng)
    if kind == "explicit":
        return Topology.from_edges(n, spec.get("edges", []))
    raise GraphError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")


def _validate(w: np.ndarray) -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise GraphError(f"weight matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise GraphError("weight matrix has non-finite entries")
    if np.any(w < 0) or np.any(w > 1):
        raise GraphError("weight matrix entries must lie in [0, 1]")
    if np.max(np.abs(w - w.T), initial=0.0) > STOCHASTIC_TOL:
        raise GraphError("weight matrix is not symmetric")
    if np.max(np.abs(w.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise GraphError("weight matrix rows do not sum to 1")
    if np.max(np.abs(w.sum(axis=0) - 1.0)) > STOCHASTIC_TOL:
        raise GraphError("weight matrix columns do not sum to 1")


def spectral_gap(w) -> float:
    """Second-largest eigenvalue modulus of a symmetric doubly stochastic matrix."""
    w = np.asarray(w, dtype=float)
    _validate(w)
    if w.shape[0] == 1:
        return 0.0
    mags = np.sort(np.abs(np.linalg.eigvalsh(w)))[::-1]
    return float(min(max(mags[1], 0.0), 1.0))


@dataclass(frozen=True)
class WeightMatrix:
    n: int
    w: np.ndarray
    sigma2: float

    @classmethod
    def from_matrix(cls, w, topology: Topology | None = None) -> "WeightMatrix":
        """Validated loader for a user-supplied matrix.

        When `topology` is given, the sparsity pattern must match its edges.
        """
        w = np.array(w, dtype=float)
        _validate(w)
        if topology is not None:
            if topology.n != w.shape[0]:
                raise GraphError(f"matrix is {w.shape[0]}x{w.shape[0]} but topology has {topology.n} nodes")
            allowed = np.eye(topology.n, dtype=bool)
            for i, j in topology.edges:
                allowed[i, j] = allowed[j, i] = True
            bad = np.argwhere((w > 0) & ~allowed)
            if bad.size:
                i, j = bad[0]
                raise GraphError(f"w[{i}][{j}] > 0 but ({i}, {j}) is not an edge")
            missing = [(i, j) for i, j in topology.edges if w[i, j] <= 0]
            if missing:
                raise GraphError(f"edge {missing[0]} has zero weight")
        w.setflags(write=False)
        return cls(w.shape[0], w, spectral_gap(w))


def build_metropolis_weights(topology: Topology) -> WeightMatrix:
    """Metropolis-Hastings weights 1/(1 + max(deg_i, deg_j)) on edges."""
    topology.require_connected()
    n = topology.n
    deg = topology.degrees()
    w = np.zeros((n, n))
    for i, j in topology.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    return WeightMatrix.from_matrix(w, topology)


def mix(weights: WeightMatrix, ys) -> np.ndarray:
    """Consensus step: row i of the result is sum_j w[i, j] * ys[j]."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    if ys.ndim != 2 or ys.shape[0] != weights.n:
        raise GraphError(f"expected {weights.n} stacked vectors, got array of shape {ys.shape}")
    return weights.w @ ys
