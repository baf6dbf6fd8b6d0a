"""Exact relative log-likelihood of a candidate completion and a
brute-force maximum-likelihood search over tiny instances, used as the
correctness oracle for the solver.

All likelihood values drop the candidate-independent constant (binomial
normalizers and the sampling pattern term); comparisons never need it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping

import numpy as np

from .mch import EPS_ALPHA, EPS_THETA
from .model import (
    RATING_DTYPE,
    ClusterAssignment,
    HypergraphBundle,
    ObservedMatrix,
    RatingMatrix,
    hamming_target,
    in_cluster_edge_count,
)

BRUTE_FORCE_MAX_N = 10
BRUTE_FORCE_MAX_M = 4


@dataclass(frozen=True)
class LikelihoodWeights:
    """a_d = log(alpha_d (1-beta_d) / (beta_d (1-alpha_d))) per layer and
    b = log((1-theta)/theta)."""

    a: Mapping[int, float]
    b: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", dict(sorted(self.a.items())))
        for d, w in self.a.items():
            if not math.isfinite(w):
                raise ValueError(f"a_{d} must be finite")
        if not math.isfinite(self.b):
            raise ValueError("b must be finite")

    @classmethod
    def from_params(
        cls,
        theta: float,
        alpha: Mapping[int, float],
        beta: Mapping[int, float],
        eps_theta: float = EPS_THETA,
        eps_alpha: float = EPS_ALPHA,
    ) -> "LikelihoodWeights":
        theta = min(max(theta, eps_theta), 0.5 - eps_theta)
        a: dict[int, float] = {}
        for d in sorted(alpha):
            al = min(max(alpha[d], eps_alpha), 1.0 - eps_alpha)
            be = min(max(beta[d], eps_alpha), 1.0 - eps_alpha)
            a[d] = math.log(al * (1.0 - be) / (be * (1.0 - al)))
        return cls(a=a, b=math.log((1.0 - theta) / theta))


def log_likelihood_rel(
    candidate: RatingMatrix,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    w: LikelihoodWeights,
) -> float:
    """sum_d a_d * (in-cluster hyperedges under the candidate clustering)
    + b * (observed entries matching the candidate matrix)."""
    terms = [
        w.a[d] * in_cluster_edge_count(candidate.assignment, bundle.layer(d))
        for d in w.a
    ]
    full = candidate.full()
    if full.shape != U.entries.shape:
        raise ValueError("candidate shape does not match the observations")
    terms.append(w.b * float(np.count_nonzero(U.entries == full)))
    return math.fsum(terms)


def enumerate_equal_bipartitions(n: int) -> list[np.ndarray]:
    """All equal-split 2-partitions of [n] as label vectors, in lexicographic
    order of the cluster containing node 0 (which is always cluster 0)."""
    if n % 2 != 0:
        raise ValueError("equal split needs even n")
    half = n // 2
    out = []
    for rest in combinations(range(1, n), half - 1):
        labels = np.ones(n, dtype=np.int64)
        labels[0] = 0
        labels[list(rest)] = 0
        out.append(labels)
    return out


def all_sign_vectors(m: int) -> np.ndarray:
    """All 2^m vectors of {+1,-1}^m in binary order (-1 bit = 0, MSB first)."""
    codes = np.arange(2**m, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1
    return (bits * 2 - 1).astype(RATING_DTYPE)


@dataclass(frozen=True)
class MLResult:
    candidate: RatingMatrix
    value: float
    num_candidates: int


def ml_brute_force(
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    K: int,
    m: int,
    gamma: float,
    w: LikelihoodWeights,
) -> MLResult:
    """Exhaustive maximizer of the relative log-likelihood over equal-split
    clusterings and vector tuples whose minimum pairwise Hamming distance is
    exactly ceil(gamma * m).

    Enumeration budget: K = 2, even n <= 10, m <= 4. Ties break toward the
    first candidate in (partition, vector codes) lexicographic order; the
    returned candidate is canonical up to the simultaneous permutation of
    cluster labels and vectors (node 0 sits in cluster 0).
    """
    n = bundle.n
    if K != 2:
        raise ValueError("brute force supports K = 2 only")
    if n > BRUTE_FORCE_MAX_N or n % 2 != 0:
        raise ValueError(f"brute force supports even n <= {BRUTE_FORCE_MAX_N}")
    if m > BRUTE_FORCE_MAX_M:
        raise ValueError(f"brute force supports m <= {BRUTE_FORCE_MAX_M}")
    if U.n != n or U.m != m:
        raise ValueError("observation shape does not match (n, m)")
    D = hamming_target(gamma, m)
    vectors = all_sign_vectors(m)
    nv = vectors.shape[0]
    # Pairwise Hamming distances between all sign vectors.
    dots = vectors.astype(np.int64) @ vectors.astype(np.int64).T
    dist = (m - dots) // 2
    valid = dist == D

    # Per-user agreement against every vector, then cluster sums per split.
    entries = U.entries.astype(np.int64)
    obs = np.count_nonzero(entries, axis=1)
    agree = (entries @ vectors.astype(np.int64).T + obs[:, None]) // 2

    best_val = -math.inf
    best_labels: np.ndarray | None = None
    best_pair: tuple[int, int] | None = None
    num_candidates = 0
    for labels in enumerate_equal_bipartitions(n):
        assignment = ClusterAssignment(labels=labels, K=2)
        hyper = math.fsum(
            w.a[d] * in_cluster_edge_count(assignment, bundle.layer(d)) for d in w.a
        )
        s0 = agree[labels == 0].sum(axis=0)
        s1 = agree[labels == 1].sum(axis=0)
        for i0 in range(nv):
            row = valid[i0]
            for i1 in range(nv):
                if not row[i1]:
                    continue
                num_candidates += 1
                val = hyper + w.b * float(s0[i0] + s1[i1])
                if val > best_val:
                    best_val = val
                    best_labels = labels
                    best_pair = (i0, i1)
    if best_labels is None or best_pair is None:
        raise ValueError(f"no vector tuple realizes min distance {D} with m = {m}")
    cand = RatingMatrix(
        vectors=np.stack([vectors[best_pair[0]], vectors[best_pair[1]]]),
        assignment=ClusterAssignment(labels=best_labels, K=2),
        gamma=gamma,
    )
    return MLResult(candidate=cand, value=best_val, num_candidates=num_candidates)
