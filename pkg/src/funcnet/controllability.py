"""Driver-node analysis of learned networks.

Node dynamics (LNDM) drivers come from a maximum matching of the bipartite
out-copy/in-copy graph; switchboard (edge) dynamics (SBD) drivers come from
the divergent-node and balanced-component rule. Kalman rank tests on the
Krylov basis are kept as small-network verifiers.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .dynamics import Network, sigmoid

DEFAULT_THETA = 1e-3
LNDM_RANK_CAP = 64
SBD_RANK_CAP = 256
PIVOT_TOL = 1e-8


class RankSizeError(ValueError):
    """The rank test would be too large; use the structural driver counts instead."""


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    n: int
    sources: np.ndarray  # edge k runs sources[k] -> targets[k]
    targets: np.ndarray
    theta: float = DEFAULT_THETA

    @classmethod
    def from_weights(cls, weights, theta: float = DEFAULT_THETA) -> "DirectedGraph":
        W = np.asarray(weights, dtype=float)
        i, j = np.nonzero(np.abs(W) > theta)  # W[i, j] is the edge j -> i
        order = np.lexsort((i, j))
        return cls(W.shape[0], j[order], i[order], theta)

    @classmethod
    def from_network(cls, net: Network, theta: float = DEFAULT_THETA) -> "DirectedGraph":
        return cls.from_weights(net.weights, theta)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]]) -> "DirectedGraph":
        """Graph from (source, target) pairs; duplicates collapse."""
        pairs = sorted({(int(s), int(t)) for s, t in edges})
        for s, t in pairs:
            if not (0 <= s < n and 0 <= t < n):
                raise ValueError(f"edge {(s, t)} outside {n} nodes")
        src = np.array([s for s, _ in pairs], dtype=np.int64)
        dst = np.array([t for _, t in pairs], dtype=np.int64)
        return cls(n, src, dst, 0.0)

    @property
    def n_edges(self) -> int:
        return len(self.sources)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.sources.tolist(), self.targets.tolist()))

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.sources, minlength=self.n)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.targets, minlength=self.n)

    def adjacency(self) -> np.ndarray:
        """Dense matrix with A[i, j] = 1 for the edge j -> i."""
        A = np.zeros((self.n, self.n))
        A[self.targets, self.sources] = 1.0
        return A


def edge_fraction(graph: DirectedGraph) -> float:
    """Edges over n^2 (self-loops count toward the maximum)."""
    return graph.n_edges / graph.n ** 2


def maximum_matching(n_left: int, n_right: int, indptr, indices) -> np.ndarray:
    """Hopcroft-Karp on a CSR bipartite adjacency; returns the right partner of each left vertex (-1 if free)."""
    indptr = np.asarray(indptr)
    indices = np.asarray(indices)
    match_l = np.full(n_left, -1, dtype=np.int64)
    match_r = np.full(n_right, -1, dtype=np.int64)
    # greedy start: on dense graphs this is usually already maximum
    for u in range(n_left):
        nb = indices[indptr[u]:indptr[u + 1]]
        free = nb[match_r[nb] < 0]
        if len(free):
            match_l[u] = free[0]
            match_r[free[0]] = u
    adj = None
    inf = np.iinfo(np.int64).max
    while True:
        # BFS layering from the free left vertices
        dist = np.full(n_left, inf, dtype=np.int64)
        frontier = np.flatnonzero(match_l < 0)
        if not len(frontier):
            break
        dist[frontier] = 0
        depth = 0
        found = False
        while len(frontier):
            nbrs = np.unique(np.concatenate([indices[indptr[u]:indptr[u + 1]] for u in frontier]))
            owners = match_r[nbrs]
            if np.any(owners < 0):
                found = True
                break
            nxt = owners[dist[owners] == inf]
            nxt = np.unique(nxt)
            dist[nxt] = depth + 1
            frontier = nxt
            depth += 1
        if not found:
            break
        if adj is None:
            adj = [indices[indptr[u]:indptr[u + 1]].tolist() for u in range(n_left)]
        ptr = [0] * n_left
        ml = match_l.tolist()
        mr = match_r.tolist()
        dl = dist.tolist()
        augmented = False
        for root in np.flatnonzero(match_l < 0).tolist():
            stack, via = [root], []
            while stack:
                u = stack[-1]
                pushed = False
                nb = adj[u]
                while ptr[u] < len(nb):
                    v = nb[ptr[u]]
                    ptr[u] += 1
                    w = mr[v]
                    if w < 0:
                        if dl[u] == depth:
                            via.append(v)
                            for a, b in zip(stack, via):
                                ml[a] = b
                                mr[b] = a
                            stack = []
                            augmented = True
                            pushed = True
                            break
                    elif dl[w] == dl[u] + 1:
                        via.append(v)
                        stack.append(w)
                        pushed = True
                        break
                if not pushed:
                    dl[u] = inf
                    stack.pop()
                    if via:
                        via.pop()
        match_l = np.array(ml, dtype=np.int64)
        match_r = np.array(mr, dtype=np.int64)
        if not augmented:
            break
    return match_l


def _csr_by_source(graph: DirectedGraph):
    order = np.argsort(graph.sources, kind="stable")
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(graph.sources, minlength=graph.n), out=indptr[1:])
    return indptr, graph.targets[order]


def lndm_driver_count(graph: DirectedGraph) -> tuple[int, list[int], list[tuple[int, int]]]:
    """Minimum driver count under node dynamics.

    Returns ``(N_L, drivers, matching)`` where ``matching`` lists the matched
    edges (source, target). Drivers are the nodes whose in-copy is unmatched;
    with a perfect matching a single driver (node 0) is still required.
    """
    indptr, indices = _csr_by_source(graph)
    match = maximum_matching(graph.n, graph.n, indptr, indices)
    matched = [(u, int(v)) for u, v in enumerate(match) if v >= 0]
    heads = {v for _, v in matched}
    drivers = [i for i in range(graph.n) if i not in heads]
    if not drivers:
        drivers = [0]
    return max(graph.n - len(matched), 1), drivers, matched


def sbd_driver_count(graph: DirectedGraph) -> tuple[int, list[int], bool]:
    """Driver count under switchboard dynamics: ``(N_S, drivers, degenerate)``.

    Divergent nodes (out-degree above in-degree) are drivers, plus the lowest
    index node of every weakly connected component that has edges and no
    divergent node. An edgeless graph gives ``(0, [], True)``.
    """
    if graph.n_edges == 0:
        return 0, [], True
    kout, kin = graph.out_degree(), graph.in_degree()
    divergent = kout > kin
    A = csr_matrix((np.ones(graph.n_edges), (graph.sources, graph.targets)), shape=(graph.n, graph.n))
    ncomp, labels = connected_components(A, directed=True, connection="weak")
    has_edges = np.zeros(ncomp, dtype=bool)
    has_edges[labels[graph.sources]] = True
    has_div = np.zeros(ncomp, dtype=bool)
    has_div[labels[divergent]] = True
    drivers = set(np.flatnonzero(divergent).tolist())
    for c in np.flatnonzero(has_edges & ~has_div):
        drivers.add(int(np.flatnonzero(labels == c)[0]))
    drivers = sorted(drivers)
    return len(drivers), drivers, False


def krylov_rank(A, B, tol: float = PIVOT_TOL) -> int:
    """Dimension of span{B, AB, ..., A^(n-1) B} by incremental Gram-Schmidt.

    A candidate vector joins the basis when its component orthogonal to the
    current basis exceeds ``tol`` times its own norm.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    n = A.shape[0]
    Q = np.zeros((n, 0))

    def add(v):
        nonlocal Q
        norm0 = np.linalg.norm(v)
        if norm0 == 0 or Q.shape[1] >= n:
            return None
        r = v - Q @ (Q.T @ v)
        r = r - Q @ (Q.T @ r)
        nr = np.linalg.norm(r)
        if nr <= tol * norm0:
            return None
        q = r / nr
        Q = np.column_stack([Q, q])
        return q

    frontier = [q for q in (add(col) for col in B.T) if q is not None]
    while frontier and Q.shape[1] < n:
        frontier = [q for q in (add(A @ f) for f in frontier) if q is not None]
    return Q.shape[1]


def driver_columns(n: int, drivers: Sequence[int]) -> np.ndarray:
    B = np.zeros((n, len(drivers)))
    B[list(drivers), np.arange(len(drivers))] = 1.0
    return B


def kalman_rank(W, B, tol: float = PIVOT_TOL) -> tuple[int, bool]:
    """Rank of the controllability matrix of (W, B) and whether it is full.

    ``B`` is an (n, m) input matrix or a list of driver node indices.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n > LNDM_RANK_CAP:
        raise RankSizeError(f"rank test capped at {LNDM_RANK_CAP} nodes; use lndm_driver_count for n={n}")
    B = np.asarray(B)
    if B.ndim == 1:
        B = driver_columns(n, B.astype(int).tolist())
    rank = krylov_rank(W, B, tol)
    return rank, rank == n


def line_digraph(graph: DirectedGraph) -> np.ndarray:
    """M[b, a] = 1 when edge a = (u -> v) feeds edge b = (v -> w)."""
    src, dst = graph.sources, graph.targets
    return (src[:, None] == dst[None, :]).astype(float)


def sbd_rank_check(net: Network, inputs=None, theta: float = DEFAULT_THETA, tol: float = PIVOT_TOL) -> tuple[int, bool]:
    """Kalman rank of the edge dynamics on the line digraph.

    The state matrix is M - diag(k2 of each edge's source node) and the input
    column carries f(I) of each edge's source node.
    """
    graph = DirectedGraph.from_network(net, theta)
    m = graph.n_edges
    if m == 0:
        raise ValueError("the line digraph of an edgeless graph is empty")
    if m > SBD_RANK_CAP:
        raise RankSizeError(f"line digraph has {m} nodes; the rank test is capped at {SBD_RANK_CAP}")
    inputs = np.zeros(net.n_nodes) if inputs is None else np.asarray(inputs, dtype=float)
    A = line_digraph(graph) - np.diag(net.k2[graph.sources])
    b = sigmoid(inputs)[graph.sources]
    rank = krylov_rank(A, b, tol)
    return rank, rank == m


@dataclass(frozen=True)
class ControllabilityReport:
    n_nodes: int
    theta: float
    n_edges: int
    e: float
    N_L: int
    n_L: float
    N_S: int
    n_S: float
    lndm_drivers: list
    sbd_drivers: list
    sbd_degenerate: bool = False
    kalman_rank: Optional[int] = None
    kalman_full: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)


def controllability_report(net_or_weights, theta: float = DEFAULT_THETA, rank_check: bool = True) -> ControllabilityReport:
    W = net_or_weights.weights if isinstance(net_or_weights, Network) else np.asarray(net_or_weights, dtype=float)
    graph = DirectedGraph.from_weights(W, theta)
    n = graph.n
    N_L, ldrivers, _ = lndm_driver_count(graph)
    N_S, sdrivers, degenerate = sbd_driver_count(graph)
    rank = full = None
    if rank_check and n <= LNDM_RANK_CAP:
        rank, full = kalman_rank(graph.adjacency(), ldrivers)
    return ControllabilityReport(n, theta, graph.n_edges, edge_fraction(graph), N_L, N_L / n, N_S, N_S / n,
                                 ldrivers, sdrivers, degenerate, rank, full)


@dataclass(frozen=True)
class ControllabilitySeries:
    final: ControllabilityReport
    mean_e: float
    mean_n_L: float
    mean_n_S: float
    n_snapshots: int

    def to_dict(self) -> dict:
        return {"final": self.final.to_dict(), "mean_e": self.mean_e, "mean_n_L": self.mean_n_L,
                "mean_n_S": self.mean_n_S, "n_snapshots": self.n_snapshots}


def controllability_timeseries(snapshots, theta: float = DEFAULT_THETA) -> ControllabilitySeries:
    """Average edge and driver fractions over the elite of every generation."""
    reports = [controllability_report(s, theta, rank_check=False) for s in snapshots]
    if not reports:
        raise ValueError("no snapshots")
    return ControllabilitySeries(
        final=reports[-1],
        mean_e=float(np.mean([r.e for r in reports])),
        mean_n_L=float(np.mean([r.n_L for r in reports])),
        mean_n_S=float(np.mean([r.n_S for r in reports])),
        n_snapshots=len(reports),
    )
