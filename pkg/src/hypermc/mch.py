"""The three-stage completion algorithm: spectral partial recovery of the
clusters from the weighted adjacency matrix, majority-vote rating
estimation, and iterative local refinement of the clusters, plus the
on-the-fly parameter estimators and the closed-form refinement weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from sklearn.cluster import KMeans

from .model import (
    RATING_DTYPE,
    ClusterAssignment,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    in_cluster_edge_count,
)

EPS_THETA = 1e-6
EPS_ALPHA = 1e-12
DENSE_EIGH_LIMIT = 4096
KMEANS_RESTARTS = 10


@dataclass(frozen=True)
class WeightedAdjacency:
    """Symmetric n x n matrix A with A_ij = sum_d (hyperedges of layer d
    containing both i and j) / d for i != j and zero diagonal.

    The diagonal of sum_d H_d H_d^T / d would hold node degrees; they carry
    no cross-node signal and distort the eigenvectors, so they are dropped.
    """

    matrix: np.ndarray

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


def build_adjacency(bundle: HypergraphBundle) -> WeightedAdjacency:
    n = bundle.n
    A = np.zeros((n, n), dtype=np.float64)
    for d, hg in bundle.layers():
        if hg.num_edges == 0:
            continue
        w = 1.0 / d
        edges = hg.edges
        for a in range(d):
            for b in range(a + 1, d):
                np.add.at(A, (edges[:, a], edges[:, b]), w)
                np.add.at(A, (edges[:, b], edges[:, a]), w)
    return WeightedAdjacency(matrix=A)


def _top_k_eigenvectors(A: np.ndarray, K: int) -> np.ndarray:
    # Largest algebraic eigenvalues: with assortative layers the planted
    # signal eigenvalues are positive, while the extreme negative spectrum
    # of sparse graphs carries hub/parity structure, not clusters.
    n = A.shape[0]
    if n <= DENSE_EIGH_LIMIT:
        vals, vecs = np.linalg.eigh(A)
    else:
        from scipy.sparse import csr_matrix
        from scipy.sparse.linalg import eigsh

        vals, vecs = eigsh(csr_matrix(A), k=K, which="LA", tol=1e-8)
    order = np.argsort(-vals)[:K]
    return np.ascontiguousarray(vecs[:, order])


def spectral_partition(
    adjacency: WeightedAdjacency,
    K: int,
    random_state: int = 0,
    trim_degrees: bool = False,
    restarts: int = KMEANS_RESTARTS,
) -> ClusterAssignment:
    """Stage 1: embed nodes by the top-K eigenvectors of A (by eigenvalue
    magnitude) and cluster the rows with seeded k-means.

    Labels are arbitrary up to permutation. Optional trimming zeroes nodes
    whose weighted degree exceeds 10x the mean before the eigensolve.
    """
    A = adjacency.matrix
    n = adjacency.n
    if K < 2:
        raise ValueError("K must be at least 2")
    if n < K:
        raise ValueError("need at least K nodes")
    if trim_degrees:
        deg = A.sum(axis=1)
        heavy = deg > 10.0 * deg.mean()
        if heavy.any():
            A = A.copy()
            A[heavy, :] = 0.0
            A[:, heavy] = 0.0
    emb = _top_k_eigenvectors(A, K)
    for attempt in range(restarts):
        km = KMeans(
            n_clusters=K,
            n_init=KMEANS_RESTARTS,
            max_iter=100,
            random_state=random_state + attempt,
            algorithm="lloyd",
        )
        labels = km.fit_predict(emb)
        if np.bincount(labels, minlength=K).min() > 0:
            return ClusterAssignment(labels=labels.astype(np.int64), K=K)
    raise RuntimeError("k-means produced an empty cluster in every restart")


def majority_vote(clusters: ClusterAssignment, U: ObservedMatrix) -> np.ndarray:
    """Stage 2: per cluster and item, the sign of (+1 votes minus -1 votes)
    over observed entries; ties and all-unobserved columns resolve to +1."""
    if clusters.n != U.n:
        raise ValueError(f"assignment covers {clusters.n} users, U has {U.n}")
    entries = U.entries.astype(np.int64)
    vectors = np.empty((clusters.K, U.m), dtype=RATING_DTYPE)
    for k in range(clusters.K):
        votes = entries[clusters.labels == k].sum(axis=0)
        vectors[k] = np.where(votes >= 0, 1, -1)
    return vectors


def agreement_matrix(U: ObservedMatrix, vectors: np.ndarray) -> np.ndarray:
    """(n, K) counts |Lambda_i(v_k)| for every user/vector pair.

    Uses the identity agreements = (dot + observed_count) / 2 over the
    ternary entries, which is exact in integer arithmetic.
    """
    entries = U.entries.astype(np.int64)
    obs = np.count_nonzero(entries, axis=1)
    dot = entries @ vectors.astype(np.int64).T
    return (dot + obs[:, None]) // 2


def link_counts(labels: np.ndarray, bundle: HypergraphBundle, d: int) -> np.ndarray:
    """(n, K) counts of layer-d hyperedges joining each user to each cluster:
    entry (i, k) is the number of hyperedges containing i whose remaining
    members all carry label k (the user's own membership never counts
    toward its cluster).
    """
    hg = bundle.layer(d)
    K = int(labels.max()) + 1 if labels.size else 1
    counts = np.zeros((labels.size, K), dtype=np.int64)
    if hg.num_edges == 0:
        return counts
    edges = hg.edges
    lab = labels[edges]
    for k in range(K):
        per_edge = (lab == k).sum(axis=1)
        for j in range(d):
            ok = per_edge - (lab[:, j] == k) == d - 1
            np.add.at(counts[:, k], edges[ok, j], 1)
    return counts


def refine_scores(
    prev: ClusterAssignment,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    vectors: np.ndarray,
    c: Mapping[int, float],
    rating_weight: float = 1.0,
) -> np.ndarray:
    """The (n, K) score matrix of Stage 3:
    n * sum_d c_d * h_d({i}, C_k \\ {i}) / |C_k| + |Lambda_i(v_k)|.

    rating_weight scales the agreement term; the argmax is invariant under
    scaling c and rating_weight by a common positive constant.
    """
    sizes = prev.sizes()
    if sizes.min() == 0:
        raise ValueError("refinement requires all previous clusters nonempty")
    n = prev.n
    scores = np.zeros((n, prev.K), dtype=np.float64)
    for d, weight in sorted(c.items()):
        if weight == 0.0:
            continue
        counts = link_counts(prev.labels, bundle, d)[:, : prev.K]
        scores += (n * weight) * counts / sizes[None, :]
    scores += rating_weight * agreement_matrix(U, vectors)
    return scores


@dataclass(frozen=True)
class RefineConfig:
    """Iteration count and per-layer weights of the refinement score."""

    T: int
    c: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "c", dict(sorted(self.c.items())))
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        for d, w in self.c.items():
            if not math.isfinite(w):
                raise ValueError(f"c_{d} must be finite")


@dataclass(frozen=True)
class EstimatedParams:
    """On-the-fly estimates of (theta, alpha_d, beta_d), clamped away from
    the degenerate boundary. If a clamped alpha'_d does not exceed beta'_d
    the layer is uninformative and its refinement weight is zeroed
    downstream."""

    theta_est: float
    alpha_est: dict[int, float]
    beta_est: dict[int, float]


def estimate_params(
    init_clusters: ClusterAssignment,
    init_vectors: np.ndarray,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    eps_theta: float = EPS_THETA,
    eps_alpha: float = EPS_ALPHA,
) -> EstimatedParams:
    """alpha'_d = (in-cluster hyperedges) / (in-cluster size-d subsets),
    beta'_d = (remaining hyperedges) / (remaining subsets), and
    theta' = 1 - |Lambda_R0| / |U| where row i of R0 is the estimated
    vector of i's cluster.

    With equal cluster sizes the denominators reduce to K * C(n/K, d) and
    C(n, d) - K * C(n/K, d); unbalanced estimates use the actual sizes.
    """
    if U.num_observed == 0:
        raise ValueError("theta' is undefined without observed entries")
    sizes = init_clusters.sizes()
    if sizes.min() == 0:
        raise ValueError("parameter estimation requires nonempty clusters")
    n = init_clusters.n
    r0 = init_vectors[init_clusters.labels]
    agree = int(np.count_nonzero(U.entries == r0))
    theta_raw = 1.0 - agree / U.num_observed
    theta_est = min(max(theta_raw, eps_theta), 0.5 - eps_theta)

    alpha_est: dict[int, float] = {}
    beta_est: dict[int, float] = {}
    for d, hg in bundle.layers():
        in_total = sum(math.comb(int(s), d) for s in sizes)
        cross_total = math.comb(n, d) - in_total
        in_count = in_cluster_edge_count(init_clusters, hg)
        alpha_raw = in_count / in_total if in_total else 0.0
        beta_raw = (hg.num_edges - in_count) / cross_total if cross_total else 0.0
        alpha_est[d] = min(max(alpha_raw, eps_alpha), 1.0 - eps_alpha)
        beta_est[d] = min(max(beta_raw, eps_alpha), 1.0 - eps_alpha)
    return EstimatedParams(theta_est=theta_est, alpha_est=alpha_est, beta_est=beta_est)


def _theta_alpha_beta(params) -> tuple[float, Mapping[int, float], Mapping[int, float]]:
    if isinstance(params, EstimatedParams):
        return params.theta_est, params.alpha_est, params.beta_est
    if isinstance(params, ModelParams):
        return params.theta, params.alpha, params.beta
    raise TypeError("expected ModelParams or EstimatedParams")


def layer_weight(alpha_d: float, beta_d: float, theta: float, K: int) -> float:
    """c_d = log(alpha_d (1-beta_d) / (beta_d (1-alpha_d))) / (K log((1-theta)/theta)).

    A layer whose (clamped) alpha does not exceed beta gets weight 0."""
    if alpha_d <= beta_d:
        return 0.0
    theta = min(max(theta, EPS_THETA), 0.5 - EPS_THETA)
    a_d = math.log(alpha_d * (1.0 - beta_d) / (beta_d * (1.0 - alpha_d)))
    b = math.log((1.0 - theta) / theta)
    return a_d / (K * b)


def default_refine_config(params, n: int, K: int) -> RefineConfig:
    """T = ceil(log2 n) iterations with the closed-form layer weights,
    computed from true parameters when given and estimates otherwise."""
    theta, alpha, beta = _theta_alpha_beta(params)
    theta = min(max(theta, EPS_THETA), 0.5 - EPS_THETA)
    c = {d: layer_weight(alpha[d], beta[d], theta, K) for d in sorted(alpha)}
    return RefineConfig(T=max(1, math.ceil(math.log2(n))), c=c)


@dataclass(frozen=True)
class RefineOutcome:
    assignment: ClusterAssignment
    iterations_run: int
    converged: bool
    halted_empty: bool


def refine_step(
    prev: ClusterAssignment,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    vectors: np.ndarray,
    cfg: RefineConfig,
) -> ClusterAssignment:
    """One synchronous reclassification of every user against the previous
    clusters; ties break toward the smallest cluster index."""
    scores = refine_scores(prev, bundle, U, vectors, cfg.c)
    labels = np.argmax(scores, axis=1).astype(np.int64)
    return ClusterAssignment(labels=labels, K=prev.K)


def refine(
    initial: ClusterAssignment,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    vectors: np.ndarray,
    cfg: RefineConfig,
) -> RefineOutcome:
    """Apply refine_step up to T times, stopping early at a fixed point.

    A step that would empty a cluster is rejected (the 1/|C_k| score is
    undefined from there on) and refinement halts with the previous
    assignment; the outcome records the halt.
    """
    current = initial
    for t in range(cfg.T):
        nxt = refine_step(current, bundle, U, vectors, cfg)
        if np.bincount(nxt.labels, minlength=nxt.K).min() == 0:
            return RefineOutcome(
                assignment=current, iterations_run=t, converged=False, halted_empty=True
            )
        if np.array_equal(nxt.labels, current.labels):
            return RefineOutcome(
                assignment=nxt, iterations_run=t + 1, converged=True, halted_empty=False
            )
        current = nxt
    return RefineOutcome(
        assignment=current, iterations_run=cfg.T, converged=False, halted_empty=False
    )


@dataclass(frozen=True)
class MCHResult:
    completed: np.ndarray
    assignment: ClusterAssignment
    vectors: np.ndarray
    estimates: EstimatedParams | None
    initial_assignment: ClusterAssignment
    refine_outcome: RefineOutcome


def run_mch(
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    K: int,
    params: ModelParams | None = None,
    refine_config: RefineConfig | None = None,
    seed: int = 0,
    trim_degrees: bool = False,
) -> MCHResult:
    """Full pipeline: spectral partition, majority vote, parameter
    estimation when true parameters are absent, refinement, and row-wise
    assembly of the completed matrix from the estimated vectors.
    """
    if bundle.n != U.n:
        raise ValueError(f"bundle covers {bundle.n} users, U has {U.n}")
    adjacency = build_adjacency(bundle)
    initial = spectral_partition(adjacency, K, random_state=seed, trim_degrees=trim_degrees)
    vectors = majority_vote(initial, U)
    estimates: EstimatedParams | None = None
    if refine_config is None:
        if params is not None:
            refine_config = default_refine_config(params, bundle.n, K)
        else:
            estimates = estimate_params(initial, vectors, bundle, U)
            refine_config = default_refine_config(estimates, bundle.n, K)
    outcome = refine(initial, bundle, U, vectors, refine_config)
    completed = vectors[outcome.assignment.labels]
    return MCHResult(
        completed=completed,
        assignment=outcome.assignment,
        vectors=vectors,
        estimates=estimates,
        initial_assignment=initial,
        refine_outcome=outcome,
    )
