"""Text file formats (hyperedge lists, ternary matrices, cluster files),
clique expansion, and the declarative run configuration.

Every writer emits a leading "# hypermc-format v1" comment; parsers accept
it but never require it. Node and item ids are 1-based on disk and 0-based
in memory.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
    RATING_DTYPE,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    UniformHypergraph,
    params_from_qualities,
)

FORMAT_LINE = "# hypermc-format v1"
LABELS_SENTINEL = "#labels"


class ParseError(ValueError):
    """Malformed input file; carries a 1-based line number where possible."""


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key path."""


@dataclass(frozen=True)
class ParsedNetwork:
    bundle: HypergraphBundle
    labels: np.ndarray | None
    duplicate_count: int


def parse_hyperedge_list(text: str) -> ParsedNetwork:
    """One hyperedge per line (whitespace-separated 1-based node ids),
    comments starting with '#', and an optional '#labels' section of
    "node class" lines. Hyperedges are routed to the layer matching their
    size; duplicates are collapsed and counted.
    """
    edges_by_d: dict[int, dict[tuple[int, ...], int]] = {}
    label_pairs: list[tuple[int, int]] = []
    duplicate_count = 0
    in_labels = False
    max_node = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == LABELS_SENTINEL:
            in_labels = True
            continue
        if line.startswith("#"):
            continue
        tokens = line.split()
        try:
            values = [int(tok) for tok in tokens]
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer token in {line!r}")
        if in_labels:
            if len(values) != 2:
                raise ParseError(f"line {lineno}: label lines need 'node class'")
            node, cls = values
            if node < 1:
                raise ParseError(f"line {lineno}: node id must be >= 1, got {node}")
            label_pairs.append((node, cls))
            max_node = max(max_node, node)
            continue
        if len(values) < 2:
            raise ParseError(f"line {lineno}: hyperedge needs at least 2 nodes")
        if any(v < 1 for v in values):
            raise ParseError(f"line {lineno}: node ids must be >= 1")
        key = tuple(sorted(v - 1 for v in values))
        if len(set(key)) != len(key):
            raise ParseError(f"line {lineno}: repeated node in hyperedge")
        d = len(key)
        layer = edges_by_d.setdefault(d, {})
        if key in layer:
            duplicate_count += 1
        else:
            layer[key] = lineno
        max_node = max(max_node, max(values))

    n = max_node
    graphs = {
        d: UniformHypergraph(
            n=n, d=d, edges=np.array(sorted(layer), dtype=np.int64).reshape(-1, d)
        )
        for d, layer in sorted(edges_by_d.items())
    }
    bundle = HypergraphBundle(n=n, graphs=graphs)

    labels: np.ndarray | None = None
    if label_pairs:
        raw_labels = np.full(n, -1, dtype=np.int64)
        for node, cls in label_pairs:
            raw_labels[node - 1] = cls
        if np.any(raw_labels < 0):
            missing = int(np.flatnonzero(raw_labels < 0)[0]) + 1
            raise ParseError(f"labels section does not cover node {missing}")
        # Remap arbitrary class ids to contiguous 0-based labels, sorted.
        classes = np.unique(raw_labels)
        labels = np.searchsorted(classes, raw_labels)
    return ParsedNetwork(bundle=bundle, labels=labels, duplicate_count=duplicate_count)


def read_network(path: str | Path) -> ParsedNetwork:
    return parse_hyperedge_list(Path(path).read_text())


def write_network(
    bundle: HypergraphBundle, path: str | Path, labels: np.ndarray | None = None
) -> None:
    lines = [FORMAT_LINE]
    for d, hg in bundle.layers():
        for row in hg.edges:
            lines.append(" ".join(str(int(v) + 1) for v in row))
    if labels is not None:
        lines.append(LABELS_SENTINEL)
        for node, cls in enumerate(np.asarray(labels).tolist(), start=1):
            lines.append(f"{node} {int(cls) + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def clique_expand(bundle: HypergraphBundle) -> HypergraphBundle:
    """Replace every size-d hyperedge (d >= 3) by its C(d, 2) pairs, merged
    into the d = 2 layer with simple-graph semantics (multiplicity lost)."""
    pairs: set[tuple[int, int]] = set()
    base = bundle.graphs.get(2)
    if base is not None:
        pairs.update((int(a), int(b)) for a, b in base.edges)
    for d, hg in bundle.layers():
        if d == 2:
            continue
        for row in hg.edges:
            for a, b in combinations(row.tolist(), 2):
                pairs.add((int(a), int(b)))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return HypergraphBundle(
        n=bundle.n, graphs={2: UniformHypergraph(n=bundle.n, d=2, edges=edges)}
    )


_TOKEN_TO_VALUE = {"+1": 1, "-1": -1, "*": 0}
_VALUE_TO_TOKEN = {1: "+1", -1: "-1", 0: "*"}


def _parse_matrix(text: str, allow_unobserved: bool) -> np.ndarray:
    lines = [
        (lineno, line.strip())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty matrix file")
    header_lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise ParseError(f"line {header_lineno}: header must be 'n m'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"line {header_lineno}: header must be 'n m'")
    if n < 0 or m < 0:
        raise ParseError(f"line {header_lineno}: dimensions must be nonnegative")
    body = lines[1:]
    if len(body) != n:
        raise ParseError(f"expected {n} matrix rows, found {len(body)}")
    entries = np.zeros((n, m), dtype=RATING_DTYPE)
    for i, (lineno, line) in enumerate(body):
        tokens = line.split()
        if len(tokens) != m:
            raise ParseError(f"line {lineno}: expected {m} entries, found {len(tokens)}")
        for j, tok in enumerate(tokens):
            value = _TOKEN_TO_VALUE.get(tok)
            if value is None or (value == 0 and not allow_unobserved):
                raise ParseError(
                    f"line {lineno}: invalid token {tok!r} at row {i + 1}, column {j + 1}"
                )
            entries[i, j] = value
    return entries


def read_observed_matrix(path: str | Path) -> ObservedMatrix:
    return ObservedMatrix(entries=_parse_matrix(Path(path).read_text(), True))


def read_completed_matrix(path: str | Path) -> np.ndarray:
    return _parse_matrix(Path(path).read_text(), False)


def _format_matrix(entries: np.ndarray) -> str:
    n, m = entries.shape
    lines = [FORMAT_LINE, f"{n} {m}"]
    for row in entries:
        lines.append(" ".join(_VALUE_TO_TOKEN[int(v)] for v in row))
    return "\n".join(lines) + "\n"


def write_observed_matrix(U: ObservedMatrix, path: str | Path) -> None:
    Path(path).write_text(_format_matrix(U.entries))


def write_completed_matrix(matrix: np.ndarray, path: str | Path) -> None:
    matrix = np.asarray(matrix)
    if matrix.size and not np.all(np.abs(matrix.astype(np.int64)) == 1):
        raise ValueError("completed matrices must be +1/-1 valued")
    Path(path).write_text(_format_matrix(matrix.astype(RATING_DTYPE)))


def write_clusters(labels: np.ndarray, K: int, path: str | Path) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    lines = [FORMAT_LINE, f"{labels.size} {K}"]
    for node, label in enumerate(labels.tolist(), start=1):
        lines.append(f"{node} {label + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_clusters(path: str | Path) -> tuple[np.ndarray, int]:
    lines = [
        (lineno, line.strip())
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1)
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty cluster file")
    header_lineno, header = lines[0]
    try:
        n, K = (int(tok) for tok in header.split())
    except ValueError:
        raise ParseError(f"line {header_lineno}: header must be 'n K'")
    labels = np.full(n, -1, dtype=np.int64)
    for lineno, line in lines[1:]:
        try:
            node, label = (int(tok) for tok in line.split())
        except ValueError:
            raise ParseError(f"line {lineno}: cluster lines need 'node cluster'")
        if not (1 <= node <= n) or not (1 <= label <= K):
            raise ParseError(f"line {lineno}: node or cluster id out of range")
        labels[node - 1] = label - 1
    if np.any(labels < 0):
        missing = int(np.flatnonzero(labels < 0)[0]) + 1
        raise ParseError(f"cluster file does not cover node {missing}")
    return labels, K


# ---------------------------------------------------------------------------
# Run configuration (TOML on disk; JSON manifests reuse the same schema).


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a table")
    return data


def _require(table: Mapping[str, Any], key: str, kind, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing required key")
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}")
    return value


def _layer_table(table: Mapping[str, Any], path: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for key, value in table.items():
        try:
            d = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}: layer keys must be integers")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number")
        out[d] = float(value)
    return out


def model_params_from_config(config: Mapping[str, Any]) -> ModelParams:
    """Build ModelParams from the [model] table. Layer probabilities come
    either from alpha/beta tables or from a quality table
    (I_d = quality * log n / C(n-1, d-1)) split by alpha_beta_ratio."""
    if "model" not in config:
        raise ConfigError("model: missing required table")
    table = config["model"]
    n = _require(table, "n", int, "model")
    m = _require(table, "m", int, "model")
    K = _require(table, "K", int, "model")
    theta = _require(table, "theta", float, "model")
    p = _require(table, "p", float, "model")
    gamma = _require(table, "gamma", float, "model")
    has_direct = "alpha" in table or "beta" in table
    has_quality = "quality" in table
    if has_direct == has_quality:
        raise ConfigError("model: give either alpha/beta tables or a quality table")
    try:
        if has_quality:
            ratio = float(table.get("alpha_beta_ratio", 16.0))
            return params_from_qualities(
                n=n, m=m, K=K, theta=theta, p=p, gamma=gamma,
                qualities=_layer_table(table["quality"], "model.quality"),
                alpha_beta_ratio=ratio,
            )
        alpha = _layer_table(_require(table, "alpha", dict, "model"), "model.alpha")
        beta = _layer_table(_require(table, "beta", dict, "model"), "model.beta")
        return ModelParams(
            n=n, m=m, K=K, theta=theta, p=p, gamma=gamma, alpha=alpha, beta=beta
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}")


def params_to_config(params: ModelParams) -> dict[str, Any]:
    return {
        "n": params.n,
        "m": params.m,
        "K": params.K,
        "theta": params.theta,
        "p": params.p,
        "gamma": params.gamma,
        "alpha": {str(d): v for d, v in params.alpha.items()},
        "beta": {str(d): v for d, v in params.beta.items()},
    }
