"""Instance generation: clusters, nominal rating vectors, personalized and
sub-sampled observations, and HSBM hypergraph layers, all driven by
splittable deterministic substreams so a (master, trial) pair pins the
whole instance bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    RATING_DTYPE,
    ClusterAssignment,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    RatingMatrix,
    UniformHypergraph,
    hamming_target,
)

# Substream ids; layer d uses ARTIFACT_LAYER_BASE + d.
ARTIFACT_CLUSTERS = 0
ARTIFACT_VECTORS = 1
ARTIFACT_RATINGS = 2
ARTIFACT_ALGORITHM = 3
ARTIFACT_DEGRADE = 4
ARTIFACT_LAYER_BASE = 16

REJECTION_BUDGET_FACTOR = 100


@dataclass(frozen=True)
class GenSeed:
    """(master, trial) pair; every generated artifact gets its own substream."""

    master: int
    trial: int = 0

    def rng(self, artifact: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.master, self.trial, artifact])
        )

    def algorithm_seed(self) -> int:
        """Deterministic int seed for solver-internal randomness (k-means)."""
        return int(self.rng(ARTIFACT_ALGORITHM).integers(0, 2**31 - 1))


def gen_clusters(n: int, K: int, rng: np.random.Generator) -> ClusterAssignment:
    """Uniformly random equal-sized partition of [n] into K clusters."""
    if K < 1 or n % K != 0:
        raise ValueError(f"equal-sized clusters require K | n, got n={n}, K={K}")
    labels = np.empty(n, dtype=np.int64)
    labels[rng.permutation(n)] = np.repeat(np.arange(K, dtype=np.int64), n // K)
    return ClusterAssignment(labels=labels, K=K, symmetric=True)


def gen_rating_vectors(m: int, K: int, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """K vectors in {+1,-1}^m with minimum pairwise Hamming distance
    exactly ceil(gamma * m).

    v_1 is uniform; each later vector flips its own block of ceil(gamma * m)
    coordinates of v_1, blocks pairwise disjoint. Distances are then
    D between v_1 and any other and 2D between the rest, so the minimum is D.
    """
    D = hamming_target(gamma, m)
    if D < 1:
        raise ValueError("ceil(gamma * m) must be at least 1 to separate vectors")
    if (K - 1) * D > m:
        raise ValueError(f"(K - 1) * {D} exceeds m = {m}; vectors not constructible")
    base = (rng.integers(0, 2, size=m) * 2 - 1).astype(RATING_DTYPE)
    coords = rng.permutation(m)[: (K - 1) * D]
    vectors = np.tile(base, (K, 1))
    for k in range(1, K):
        block = coords[(k - 1) * D : k * D]
        vectors[k, block] = -vectors[k, block]
    return vectors


def gen_rating_vectors_min_distance(
    m: int, K: int, gamma: float, rng: np.random.Generator, max_tries: int = 1000
) -> np.ndarray:
    """Vectors with min pairwise distance exactly ceil(gamma * m) when the
    disjoint-block construction does not fit ((K-1) * D > m).

    One anchored pair realizes the minimum; the remaining vectors are
    uniform draws, redrawn until every other pairwise distance is >= D.
    """
    D = hamming_target(gamma, m)
    if D < 1 or D > m:
        raise ValueError("ceil(gamma * m) must lie in [1, m]")
    if (K - 1) * D <= m:
        return gen_rating_vectors(m, K, gamma, rng)
    for _ in range(max_tries):
        vectors = (rng.integers(0, 2, size=(K, m)) * 2 - 1).astype(RATING_DTYPE)
        flip = rng.permutation(m)[:D]
        vectors[1] = vectors[0]
        vectors[1, flip] = -vectors[1, flip]
        ok = True
        for a in range(K):
            for b in range(a + 1, K):
                if (a, b) == (0, 1):
                    continue
                if int(np.sum(vectors[a] != vectors[b])) < D:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return vectors
    raise RuntimeError("could not realize the requested minimum distance")


def gen_observed(
    rating: RatingMatrix, theta: float, p: float, rng: np.random.Generator
) -> ObservedMatrix:
    """Sub-sample the personalized ratings: each entry independently equals
    R_ij with probability p(1-theta), -R_ij with probability p*theta, and is
    unobserved with probability 1-p.
    """
    if not (0.0 <= theta < 0.5):
        raise ValueError("theta must lie in [0, 1/2)")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    full = rating.full()
    shape = full.shape
    observed = rng.random(shape) < p
    flip = rng.random(shape) < theta
    signed = np.where(flip, -full, full)
    entries = np.where(observed, signed, 0).astype(RATING_DTYPE)
    return ObservedMatrix(entries=entries)


def _sample_distinct_rows(draw_batch, target: int, budget: int) -> np.ndarray:
    """Accumulate `target` distinct sorted rows from repeated batched draws.

    draw_batch(t) must return a (t, d) int array of candidate rows (already
    restricted to the right stratum). Raises once `budget` total draws are
    spent, which only happens on dense misconfiguration.
    """
    seen: set[bytes] = set()
    rows: list[np.ndarray] = []
    drawn = 0
    while len(rows) < target:
        want = target - len(rows)
        batch = min(max(2 * want, 16), budget - drawn)
        if batch <= 0:
            raise RuntimeError(
                "rejection sampling budget exceeded; parameters too dense"
            )
        cand = draw_batch(batch)
        drawn += batch
        cand = np.sort(np.asarray(cand, dtype=np.int64), axis=1)
        for row in cand:
            key = row.tobytes()
            if key in seen:
                continue
            seen.add(key)
            rows.append(row)
            if len(rows) == target:
                break
    return np.array(rows, dtype=np.int64).reshape(target, -1)


def gen_hypergraph(
    assignment: ClusterAssignment,
    d: int,
    alpha_d: float,
    beta_d: float,
    rng: np.random.Generator,
) -> UniformHypergraph:
    """d-uniform HSBM layer: each size-d subset with all members in one
    cluster appears independently with probability alpha_d, every other
    size-d subset with probability beta_d.

    Stratified and distribution-exact: binomial counts per stratum, then
    that many distinct subsets sampled uniformly inside each stratum by
    rejection (cheap in the sparse regime; a 100x budget guards dense
    misconfiguration).
    """
    if not (0.0 <= beta_d <= alpha_d <= 1.0):
        raise ValueError("need 0 <= beta_d <= alpha_d <= 1")
    n = assignment.n
    if d < 2 or d > max(n, 2):
        raise ValueError(f"uniformity d = {d} out of range for n = {n}")
    sizes = assignment.sizes()
    clusters = assignment.clusters()
    in_totals = [math.comb(int(s), d) for s in sizes]
    in_total = sum(in_totals)
    cross_total = math.comb(n, d) - in_total

    count_in = int(rng.binomial(in_total, alpha_d)) if in_total and alpha_d > 0 else 0
    count_cross = (
        int(rng.binomial(cross_total, beta_d)) if cross_total and beta_d > 0 else 0
    )

    parts: list[np.ndarray] = []
    if count_in:
        weights = np.array(in_totals, dtype=float) / in_total

        def draw_in(t: int) -> np.ndarray:
            picks = rng.choice(assignment.K, size=t, p=weights)
            out = np.empty((t, d), dtype=np.int64)
            for j, k in enumerate(picks):
                members = clusters[k]
                sel = rng.random(members.size).argsort()[:d]
                out[j] = members[sel]
            return out

        parts.append(
            _sample_distinct_rows(draw_in, count_in, REJECTION_BUDGET_FACTOR * count_in)
        )
    if count_cross:
        labels = assignment.labels

        def draw_cross(t: int) -> np.ndarray:
            cand = rng.permuted(
                np.tile(np.arange(n, dtype=np.int64), (t, 1)), axis=1
            )[:, :d]
            lab = labels[cand]
            keep = ~np.all(lab == lab[:, :1], axis=1)
            return cand[keep]

        parts.append(
            _sample_distinct_rows(
                draw_cross, count_cross, REJECTION_BUDGET_FACTOR * count_cross
            )
        )
    if parts:
        edges = np.concatenate(parts, axis=0)
    else:
        edges = np.empty((0, d), dtype=np.int64)
    return UniformHypergraph(n=n, d=d, edges=edges)


def gen_instance(
    params: ModelParams, seed: GenSeed
) -> tuple[ClusterAssignment, RatingMatrix, ObservedMatrix, HypergraphBundle]:
    """Compose the four generators with independent substreams; returns the
    ground truth alongside the observations."""
    assignment = gen_clusters(params.n, params.K, seed.rng(ARTIFACT_CLUSTERS))
    vectors = gen_rating_vectors(
        params.m, params.K, params.gamma, seed.rng(ARTIFACT_VECTORS)
    )
    rating = RatingMatrix(vectors=vectors, assignment=assignment, gamma=params.gamma)
    observed = gen_observed(rating, params.theta, params.p, seed.rng(ARTIFACT_RATINGS))
    graphs = {
        d: gen_hypergraph(
            assignment,
            d,
            params.alpha[d],
            params.beta[d],
            seed.rng(ARTIFACT_LAYER_BASE + d),
        )
        for d in params.layer_ds
    }
    bundle = HypergraphBundle(n=params.n, graphs=graphs)
    return assignment, rating, observed, bundle
