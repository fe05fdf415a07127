"""Graphs, oriented incidence matrices and phase/filter-space projections.

Vertices are 1-indexed in all public interfaces and 0-indexed internally.
Edge orientation is fixed at construction from the input pair order
(tail, head); the incidence matrix puts +1 at the tail and -1 at the head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    InvalidRange,
    NonPositiveGain,
    NonPositiveWeight,
    SelfLoop,
)

__all__ = [
    "Graph",
    "ProjectionSet",
    "build_graph",
    "incidence_matrix",
    "projection_set",
    "random_weights",
    "path_graph",
    "cycle_graph",
    "complete_graph",
    "random_connected_graph",
    "graph_to_json",
    "graph_from_json",
]


@dataclass(frozen=True)
class Graph:
    """Simple connected weighted graph with oriented edges.

    n       vertex count (>= 2)
    edges   m oriented pairs (tail, head), 1-indexed
    weights m positive edge weights a_k
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: np.ndarray

    @property
    def m(self) -> int:
        return len(self.edges)


def build_graph(n: int, edge_list, weights) -> Graph:
    """Validate and construct a Graph, keeping the input edge order."""
    if n < 2:
        raise InvalidRange(f"need at least 2 vertices, got n={n}")
    edges = [(int(t), int(h)) for t, h in edge_list]
    w = np.array(weights, dtype=float)
    if w.ndim != 1 or len(w) != len(edges):
        raise NonPositiveWeight(
            f"expected {len(edges)} weights, got {w.shape}")
    seen: set[frozenset[int]] = set()
    for k, (t, h) in enumerate(edges):
        if not (1 <= t <= n and 1 <= h <= n):
            raise InvalidRange(f"edge {k + 1} = ({t},{h}) out of vertex range 1..{n}")
        if t == h:
            raise SelfLoop(f"edge {k + 1} = ({t},{h}) is a self-loop")
        key = frozenset((t, h))
        if key in seen:
            raise DuplicateEdge(f"edge {k + 1} = ({t},{h}) duplicates an earlier edge")
        seen.add(key)
        if not w[k] > 0.0:
            raise NonPositiveWeight(f"weight a_{k + 1} = {w[k]} for edge ({t},{h}) must be > 0")
    _check_connected(n, edges)
    w.setflags(write=False)
    return Graph(n=n, edges=tuple(edges), weights=w)


def _check_connected(n: int, edges) -> None:
    adj: list[list[int]] = [[] for _ in range(n)]
    for t, h in edges:
        adj[t - 1].append(h - 1)
        adj[h - 1].append(t - 1)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    if len(seen) != n:
        missing = min(i + 1 for i in range(n) if i not in seen)
        raise DisconnectedGraph(f"vertex {missing} is not reachable from vertex 1")


def incidence_matrix(g: Graph) -> np.ndarray:
    """Oriented n x m incidence matrix B: column k is +1 at tail, -1 at head."""
    B = np.zeros((g.n, g.m))
    for k, (t, h) in enumerate(g.edges):
        B[t - 1, k] = 1.0
        B[h - 1, k] = -1.0
    return B


@dataclass(frozen=True)
class ProjectionSet:
    """Matrices partitioning phase space T^n and filter space R^n.

    B   n x m oriented incidence matrix
    R   n x (n-1) selector of angles 2..n
    S   n x (n-1) difference matrix (angles relative to vertex 1)
    q   unit vector along C^{-1} 1
    Q   n x (n-1) orthogonal complement, Q = C S (S^T C^2 S)^{-1/2}
    C   diagonal positive gain matrix diag(c)
    """

    B: np.ndarray
    R: np.ndarray
    S: np.ndarray
    q: np.ndarray
    Q: np.ndarray
    C: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        """(S^T C^2 S)^{1/2}, the symmetric square root used in linearizations."""
        return _spd_sqrt(self.S.T @ self.C @ self.C @ self.S)


def _spd_sqrt(M: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(M)
    if lam.min() <= 0:
        raise NonPositiveGain(f"matrix not SPD, min eigenvalue {lam.min()}")
    return (V * np.sqrt(lam)) @ V.T


def projection_set(g: Graph, gains) -> ProjectionSet:
    """Build the projection matrices for the given per-vertex gains c_i > 0."""
    c = np.asarray(gains, dtype=float)
    if c.shape != (g.n,):
        raise NonPositiveGain(f"expected {g.n} gains, got shape {c.shape}")
    bad = np.where(c <= 0)[0]
    if bad.size:
        raise NonPositiveGain(f"gain c_{bad[0] + 1} = {c[bad[0]]} must be > 0")
    n = g.n
    B = incidence_matrix(g)
    R = np.zeros((n, n - 1))
    R[1:, :] = np.eye(n - 1)
    S = np.zeros((n, n - 1))
    S[0, :] = -1.0
    S[1:, :] = np.eye(n - 1)
    C = np.diag(c)
    cinv1 = 1.0 / c
    q = cinv1 / np.linalg.norm(cinv1)
    M = S.T @ C @ C @ S
    lam, V = np.linalg.eigh(M)
    Minvhalf = (V / np.sqrt(lam)) @ V.T
    Q = C @ S @ Minvhalf
    return ProjectionSet(B=B, R=R, S=S, q=q, Q=Q, C=C)


def random_weights(m: int, seed: int, weight_range: tuple[float, float]) -> np.ndarray:
    """m edge weights drawn uniformly from (lo, hi), deterministic per seed."""
    lo, hi = weight_range
    if m < 1:
        raise InvalidRange(f"need m >= 1, got {m}")
    if not (0 < lo < hi):
        raise InvalidRange(f"need 0 < lo < hi, got ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=m)


# --- standard topologies --------------------------------------------------

def path_graph(n: int, weights=None) -> Graph:
    edges = [(i, i + 1) for i in range(1, n)]
    if weights is None:
        weights = np.ones(len(edges))
    return build_graph(n, edges, weights)


def cycle_graph(n: int, weights=None) -> Graph:
    edges = [(i, i + 1) for i in range(1, n)] + [(n, 1)]
    if weights is None:
        weights = np.ones(len(edges))
    return build_graph(n, edges, weights)


def complete_graph(n: int, weights=None) -> Graph:
    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    if weights is None:
        weights = np.ones(len(edges))
    return build_graph(n, edges, weights)


def random_connected_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p) resampled until connected (deterministic per seed).

    Weights are set to 1; rebuild with build_graph to attach random weights.
    """
    if not (0 < p <= 1):
        raise InvalidRange(f"edge probability must be in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
                 if rng.random() < p]
        if len(edges) < n - 1:
            continue
        try:
            _check_connected(n, edges)
        except DisconnectedGraph:
            continue
        return build_graph(n, edges, np.ones(len(edges)))
    raise DisconnectedGraph(
        f"no connected G({n}, {p}) sample within 1000 draws from seed {seed}")


# --- serialization ---------------------------------------------------------

def graph_to_json(g: Graph) -> str:
    return json.dumps(
        {"n": g.n, "edges": [[t, h] for t, h in g.edges], "weights": list(g.weights)},
        sort_keys=True,
    )


def graph_from_json(text: str) -> Graph:
    obj = json.loads(text)
    return build_graph(obj["n"], obj["edges"], obj["weights"])
