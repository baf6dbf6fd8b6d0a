"""Core domain types: cluster assignments, rating matrices, sub-sampled
observations, uniform hypergraphs, and the hyperedge counting primitives
shared by the solver, the likelihood oracle, and the experiment harness.

Conventions: users and items are 0-based everywhere in memory; file formats
are 1-based and converted at the I/O boundary. The unobserved symbol in an
ObservedMatrix is a distinct third value (stored as 0 in the int8 array);
no operation ever treats it as an arithmetic rating, vote sums add an
explicit 0 for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

UNOBSERVED = 0
RATING_DTYPE = np.int8


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of n users into K disjoint clusters via a label vector.

    labels[i] in {0, ..., K-1}. Clusters may be empty unless the assignment
    is marked symmetric, in which case all K clusters have exactly n/K
    members.
    """

    labels: np.ndarray
    K: int
    symmetric: bool = False

    def __post_init__(self) -> None:
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1:
            raise ValueError("labels must be a 1-d sequence")
        if self.K < 1:
            raise ValueError(f"K must be positive, got {self.K}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ValueError(f"labels must lie in [0, {self.K})")
        if self.symmetric:
            if self.n % self.K != 0:
                raise ValueError("symmetric assignment requires K | n")
            if not np.all(self.sizes() == self.n // self.K):
                raise ValueError("symmetric assignment requires equal cluster sizes")

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def cluster(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def clusters(self) -> list[np.ndarray]:
        return [self.cluster(k) for k in range(self.K)]


@dataclass(frozen=True)
class RatingMatrix:
    """K nominal rating vectors plus the assignment that maps users to them.

    Row i of the implied n x m matrix equals vectors[labels[i]]. Also serves
    as the candidate type for the likelihood oracle (a candidate is exactly
    a clustering together with one vector per cluster). ``gamma`` is
    recorded metadata from the generator, not validated here.
    """

    vectors: np.ndarray
    assignment: ClusterAssignment
    gamma: float | None = None

    def __post_init__(self) -> None:
        vectors = np.ascontiguousarray(self.vectors, dtype=RATING_DTYPE)
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a K x m array")
        if vectors.shape[0] != self.assignment.K:
            raise ValueError(
                f"expected {self.assignment.K} vectors, got {vectors.shape[0]}"
            )
        if vectors.size and not np.all(np.abs(vectors) == 1):
            raise ValueError("rating vectors must be +1/-1 valued")

    @property
    def m(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def n(self) -> int:
        return self.assignment.n

    def full(self) -> np.ndarray:
        """The n x m nominal rating matrix (row i = vector of i's cluster)."""
        return self.vectors[self.assignment.labels]

    def min_pairwise_distance(self) -> int:
        """Minimum Hamming distance over distinct vector pairs."""
        K = self.vectors.shape[0]
        if K < 2:
            raise ValueError("need at least two vectors")
        best = self.m + 1
        for a in range(K):
            for b in range(a + 1, K):
                best = min(best, int(np.sum(self.vectors[a] != self.vectors[b])))
        return best


@dataclass(frozen=True)
class ObservedMatrix:
    """n x m ternary matrix over {+1, -1, unobserved}.

    entries is int8 with 0 standing for the unobserved symbol. The observed
    index set is exactly ``observed_mask()``.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.ascontiguousarray(self.entries, dtype=RATING_DTYPE)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 2:
            raise ValueError("entries must be an n x m array")
        if entries.size and not np.all(np.abs(entries.astype(np.int64)) <= 1):
            raise ValueError("entries must be one of +1, -1, unobserved")

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def m(self) -> int:
        return int(self.entries.shape[1])

    def observed_mask(self) -> np.ndarray:
        return self.entries != UNOBSERVED

    @property
    def num_observed(self) -> int:
        return int(np.count_nonzero(self.entries))


@dataclass(frozen=True)
class UniformHypergraph:
    """d-uniform hypergraph on [n]: a set of size-d subsets.

    Hyperedges are stored as sorted member rows of an (M, d) array; set
    semantics are enforced at construction (repeated members within an edge
    or duplicate edges are rejected).
    """

    n: int
    d: int
    edges: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, self.d)
        edges = np.sort(edges, axis=1)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("hyperedge members must lie in [0, n)")
            if np.any(edges[:, 1:] == edges[:, :-1]):
                raise ValueError("hyperedge members must be distinct")
            order = np.lexsort(edges.T[::-1])
            edges = edges[order]
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if np.any(dup):
                raise ValueError("duplicate hyperedges are not allowed")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        if self.d < 2:
            raise ValueError("uniformity d must be at least 2")
        if self.n < 0:
            raise ValueError("n must be nonnegative")

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def _incidence(self) -> list[np.ndarray]:
        """Per-node list of incident hyperedge row indices."""
        out: list[np.ndarray] = []
        if self.num_edges == 0:
            return [np.empty(0, dtype=np.int64) for _ in range(self.n)]
        flat = self.edges.ravel()
        rows = np.repeat(np.arange(self.num_edges, dtype=np.int64), self.d)
        order = np.argsort(flat, kind="stable")
        flat = flat[order]
        rows = rows[order]
        bounds = np.searchsorted(flat, np.arange(self.n + 1))
        for v in range(self.n):
            out.append(rows[bounds[v] : bounds[v + 1]])
        return out

    def incident_edges(self, node: int) -> np.ndarray:
        return self._incidence[node]


def empty_hypergraph(n: int, d: int) -> UniformHypergraph:
    return UniformHypergraph(n=n, d=d, edges=np.empty((0, d), dtype=np.int64))


@dataclass(frozen=True)
class HypergraphBundle:
    """Map from uniformity d to a hypergraph layer; d = 2 is the social graph.

    Missing layers are treated as empty. All layers share the same n.
    """

    n: int
    graphs: Mapping[int, UniformHypergraph] = field(default_factory=dict)

    def __post_init__(self) -> None:
        graphs = dict(sorted(self.graphs.items()))
        for d, hg in graphs.items():
            if d < 2:
                raise ValueError(f"layer uniformity must be >= 2, got {d}")
            if hg.d != d:
                raise ValueError(f"layer {d} holds a {hg.d}-uniform hypergraph")
            if hg.n != self.n:
                raise ValueError("all layers must share the same n")
        object.__setattr__(self, "graphs", graphs)

    @property
    def W(self) -> int:
        return max(self.graphs, default=2)

    def layer(self, d: int) -> UniformHypergraph:
        hg = self.graphs.get(d)
        return hg if hg is not None else empty_hypergraph(self.n, d)

    def layers(self) -> list[tuple[int, UniformHypergraph]]:
        return list(self.graphs.items())

    @property
    def total_edges(self) -> int:
        return sum(hg.num_edges for hg in self.graphs.values())

    def graph_only(self) -> "HypergraphBundle":
        """Bundle restricted to the d = 2 layer (hyperedge layers dropped)."""
        kept = {2: self.graphs[2]} if 2 in self.graphs else {}
        return HypergraphBundle(n=self.n, graphs=kept)


@dataclass(frozen=True)
class ModelParams:
    """Ground-truth generative parameters.

    alpha[d] (in-cluster) and beta[d] (cross-cluster) are the hyperedge
    probabilities of layer d; alpha[d] > beta[d] is required for every
    declared layer. Generation is symmetric (equal cluster sizes), hence
    K | n, and the disjoint-block vector construction needs
    (K - 1) * ceil(gamma * m) <= m.
    """

    n: int
    m: int
    K: int
    theta: float
    p: float
    gamma: float
    alpha: Mapping[int, float] = field(default_factory=dict)
    beta: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        alpha = dict(sorted(self.alpha.items()))
        beta = dict(sorted(self.beta.items()))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.n % self.K != 0:
            raise ValueError("symmetric setting requires K | n")
        if not (0.0 <= self.theta < 0.5):
            raise ValueError("theta must lie in [0, 1/2)")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        if set(alpha) != set(beta):
            raise ValueError("alpha and beta must declare the same layers")
        for d, a in alpha.items():
            b = beta[d]
            if d < 2:
                raise ValueError(f"layer uniformity must be >= 2, got {d}")
            if not (0.0 < a < 1.0 and 0.0 <= b < 1.0):
                raise ValueError(f"layer {d}: probabilities must lie in (0, 1)")
            if a <= b:
                raise ValueError(f"layer {d}: alpha must exceed beta")
        if (self.K - 1) * hamming_target(self.gamma, self.m) > self.m:
            raise ValueError(
                "(K - 1) * ceil(gamma * m) must not exceed m "
                "(rating vectors would not be constructible)"
            )

    @property
    def W(self) -> int:
        return max(self.alpha, default=2)

    @property
    def layer_ds(self) -> list[int]:
        return sorted(self.alpha)


def hamming_target(gamma: float, m: int) -> int:
    """ceil(gamma * m), robust to float noise (0.2 * 10 must give 2, not 3)."""
    return math.ceil(gamma * m - 1e-9)


def params_from_qualities(
    n: int,
    m: int,
    K: int,
    theta: float,
    p: float,
    gamma: float,
    qualities: Mapping[int, float],
    alpha_beta_ratio: float = 16.0,
) -> ModelParams:
    """Build ModelParams from normalized layer qualities.

    quality q for layer d means I_d = q * log(n) / C(n-1, d-1) where
    I_d = (sqrt(alpha_d) - sqrt(beta_d))^2. The split between alpha and
    beta is pinned by alpha_beta_ratio = alpha_d / beta_d, so
    beta_d = I_d / (sqrt(ratio) - 1)^2. A quality of 0 omits the layer.
    """
    if alpha_beta_ratio <= 1.0:
        raise ValueError("alpha_beta_ratio must exceed 1")
    scale = (math.sqrt(alpha_beta_ratio) - 1.0) ** 2
    alpha: dict[int, float] = {}
    beta: dict[int, float] = {}
    for d, q in sorted(qualities.items()):
        if q < 0:
            raise ValueError(f"layer {d}: quality must be nonnegative")
        if q == 0:
            continue
        i_d = q * math.log(n) / math.comb(n - 1, d - 1)
        b = i_d / scale
        a = alpha_beta_ratio * b
        if a >= 1.0:
            raise ValueError(f"layer {d}: quality {q} implies alpha >= 1")
        alpha[d] = a
        beta[d] = b
    return ModelParams(
        n=n, m=m, K=K, theta=theta, p=p, gamma=gamma, alpha=alpha, beta=beta
    )


def h_count(s1, s2, hg: UniformHypergraph) -> int:
    """Number of hyperedges inside s1 | s2 touching both s1 and s2.

    Counts h with h a subset of s1 | s2, h & s1 nonempty and h & s2
    nonempty. With s1 == s2 == S this is the number of hyperedges fully
    inside S. Iterates only hyperedges incident to the smaller set.
    """
    s1 = np.asarray(s1, dtype=np.int64).ravel()
    s2 = np.asarray(s2, dtype=np.int64).ravel()
    if s1.size == 0 or s2.size == 0:
        return 0
    in1 = np.zeros(hg.n, dtype=bool)
    in1[s1] = True
    in2 = np.zeros(hg.n, dtype=bool)
    in2[s2] = True
    probe = s1 if s1.size <= s2.size else s2
    cand = np.unique(np.concatenate([hg.incident_edges(v) for v in probe]))
    if cand.size == 0:
        return 0
    members = hg.edges[cand]
    m1 = in1[members]
    m2 = in2[members]
    ok = (m1 | m2).all(axis=1) & m1.any(axis=1) & m2.any(axis=1)
    return int(np.count_nonzero(ok))


def in_cluster_edge_count(assignment: ClusterAssignment, hg: UniformHypergraph) -> int:
    """sum_k h_count(C_k, C_k, hg): hyperedges whose members share a cluster."""
    if hg.num_edges == 0:
        return 0
    lab = assignment.labels[hg.edges]
    return int(np.count_nonzero(np.all(lab == lab[:, :1], axis=1)))


def agreement_count(i: int, v, U: ObservedMatrix) -> int:
    """|Lambda_i(v)|: observed entries of row i that coincide with v."""
    v = np.asarray(v, dtype=np.int64).ravel()
    if v.size != U.m:
        raise ValueError(f"vector length {v.size} does not match m = {U.m}")
    return int(np.count_nonzero(U.entries[i] == v))


def global_agreement(X, U: ObservedMatrix) -> int:
    """|Lambda_X|: observed entries of U that coincide with the full matrix X."""
    X = np.asarray(X, dtype=np.int64)
    if X.shape != U.entries.shape:
        raise ValueError(f"shape mismatch: X {X.shape} vs U {U.entries.shape}")
    return int(np.count_nonzero(U.entries == X))
