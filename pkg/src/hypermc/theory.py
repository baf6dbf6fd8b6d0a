"""Closed-form information quantities and recovery thresholds.

Natural logarithms throughout; the refinement weights and the threshold
formulas must share a base for the algebra to cancel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import ModelParams

REGIME_CLUSTER = "cluster-recovery"
REGIME_VECTOR = "vector-recovery"


def info_theta(theta: float) -> float:
    """Separation induced by the flip noise: (sqrt(1-theta) - sqrt(theta))^2."""
    if not (0.0 <= theta < 0.5):
        raise ValueError("theta must lie in [0, 1/2)")
    return (math.sqrt(1.0 - theta) - math.sqrt(theta)) ** 2


def info_d(alpha_d: float, beta_d: float) -> float:
    """Layer quality: (sqrt(alpha_d) - sqrt(beta_d))^2."""
    if not (0.0 < alpha_d < 1.0) or not (0.0 <= beta_d < 1.0):
        raise ValueError("alpha_d must lie in (0, 1) and beta_d in [0, 1)")
    return (math.sqrt(alpha_d) - math.sqrt(beta_d)) ** 2


def aggregate_quality(n: int, K: int, i_d: Mapping[int, float]) -> float:
    """I_h = sum_d C(n-1, d-1) * K^(1-d) * I_d, the weighted layer quality."""
    return math.fsum(
        math.comb(n - 1, d - 1) * float(K) ** (1 - d) * q for d, q in sorted(i_d.items())
    )


@dataclass(frozen=True)
class PStar:
    """Sharp-threshold sample probability and which branch produced it."""

    value: float
    regime: str
    raw: float
    clamped: bool

    def __float__(self) -> float:
        return self.value


def p_star(
    n: int,
    m: int,
    K: int,
    gamma: float,
    theta: float,
    i_d: Mapping[int, float],
) -> PStar:
    """max{ (log n - I_h) / (I_theta * gamma * m), K log m / (I_theta * n) },
    with the first term floored at 0 (hypergraphs alone may already settle
    the clusters) and the max clamped at 1 (flagged).
    """
    it = info_theta(theta)
    if it == 0.0:
        raise ValueError("I_theta = 0: the threshold diverges")
    if gamma * m < 1.0 - 1e-9:
        raise ValueError("need gamma * m >= 1")
    cluster_term = max(0.0, (math.log(n) - aggregate_quality(n, K, i_d)) / (it * gamma * m))
    vector_term = K * math.log(m) / (it * n)
    raw = max(cluster_term, vector_term)
    regime = REGIME_CLUSTER if cluster_term > vector_term else REGIME_VECTOR
    return PStar(value=min(raw, 1.0), regime=regime, raw=raw, clamped=raw > 1.0)


def max_gain(n: int, m: int, K: int, gamma: float, theta: float) -> tuple[float, bool]:
    """Largest possible reduction of p* due to the network layers:
    g* = (log n / (gamma * m) - K log m / n) / I_theta.

    Returned as-is; the flag is False when g* <= 0 (no saturation gain).
    """
    it = info_theta(theta)
    if it == 0.0:
        raise ValueError("I_theta = 0: the gain diverges")
    g = (math.log(n) / (gamma * m) - K * math.log(m) / n) / it
    return g, g > 0.0


def kink_quality(n: int, m: int, K: int, gamma: float) -> float:
    """Aggregate quality where the p* curve flattens:
    I_h = log n - K * gamma * m * log(m) / n."""
    return math.log(n) - K * gamma * m * math.log(m) / n


def gain_curve(
    n: int,
    m: int,
    K: int,
    gamma: float,
    theta: float,
    i_h_grid: Sequence[float],
) -> list[tuple[float, float]]:
    """p* as a function of the aggregate quality I_h: linear with slope
    -1/(I_theta * gamma * m) below the kink, constant above it."""
    it = info_theta(theta)
    if it == 0.0:
        raise ValueError("I_theta = 0: the threshold diverges")
    vector_term = K * math.log(m) / (it * n)
    out = []
    for ih in i_h_grid:
        if ih < 0:
            raise ValueError("I_h grid must be nonnegative")
        cluster_term = max(0.0, (math.log(n) - ih) / (it * gamma * m))
        out.append((float(ih), max(cluster_term, vector_term)))
    return out


@dataclass(frozen=True)
class Theorem1Check:
    """Both reformulated sufficient-condition inequalities at a given p."""

    holds: bool
    cluster_lhs: float
    cluster_rhs: float
    cluster_ok: bool
    vector_lhs: float
    vector_rhs: float
    vector_ok: bool


def theorem1_condition(params: ModelParams, epsilon: float) -> Theorem1Check:
    """Evaluate sum_d C(n-1,d-1) I_d / K^(d-1) + gamma*m*p*I_theta >= (1+eps) log n
    and n*p*I_theta / K >= (1+eps) log m; holds iff both are true."""
    it = info_theta(params.theta)
    i_d = {d: info_d(params.alpha[d], params.beta[d]) for d in params.layer_ds}
    cluster_lhs = aggregate_quality(params.n, params.K, i_d) + (
        params.gamma * params.m * params.p * it
    )
    cluster_rhs = (1.0 + epsilon) * math.log(params.n)
    vector_lhs = params.n * params.p * it / params.K
    vector_rhs = (1.0 + epsilon) * math.log(params.m)
    cluster_ok = cluster_lhs >= cluster_rhs
    vector_ok = vector_lhs >= vector_rhs
    return Theorem1Check(
        holds=cluster_ok and vector_ok,
        cluster_lhs=cluster_lhs,
        cluster_rhs=cluster_rhs,
        cluster_ok=cluster_ok,
        vector_lhs=vector_lhs,
        vector_rhs=vector_rhs,
        vector_ok=vector_ok,
    )


@dataclass(frozen=True)
class InfoQuantities:
    """All threshold quantities for one parameterization."""

    i_theta: float
    i_d: dict[int, float]
    i_h: float
    p_star: float
    regime: str
    p_star_clamped: bool
    g_star: float
    g_star_positive: bool
    sample_complexity: float


def info_quantities(
    n: int,
    m: int,
    K: int,
    gamma: float,
    theta: float,
    i_d: Mapping[int, float],
) -> InfoQuantities:
    ps = p_star(n, m, K, gamma, theta, i_d)
    g, g_pos = max_gain(n, m, K, gamma, theta)
    return InfoQuantities(
        i_theta=info_theta(theta),
        i_d=dict(sorted(i_d.items())),
        i_h=aggregate_quality(n, K, i_d),
        p_star=ps.value,
        regime=ps.regime,
        p_star_clamped=ps.clamped,
        g_star=g,
        g_star_positive=g_pos,
        sample_complexity=n * m * ps.value,
    )


def quantities_for_params(params: ModelParams) -> InfoQuantities:
    i_d = {d: info_d(params.alpha[d], params.beta[d]) for d in params.layer_ds}
    return info_quantities(
        params.n, params.m, params.K, params.gamma, params.theta, i_d
    )
