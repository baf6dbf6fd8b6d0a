"""Bundled contact network for the semi-real study.

The public contact-high-school interaction dataset (327 students in 9
classes, 5,498 pairwise contacts, 2,320 group contacts of sizes 3 to 5) is
not redistributable here, so the package ships a deterministic synthetic
stand-in with the same node count, class structure, and per-size edge
counts, generated with strong in-class assortativity. Regenerate with
``python -m hypermc.datasets <path>``.
"""
from __future__ import annotations

import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .formats import ParsedNetwork, read_network, write_network
from .model import HypergraphBundle, UniformHypergraph
from .synth import _sample_distinct_rows

DATA_FILENAME = "contact-high-school.txt"
DEFAULT_SEED = 907

CLASS_SIZES = (29, 31, 33, 34, 36, 38, 39, 43, 44)  # sums to 327
# Per-layer (in-class, cross-class) edge counts; totals are 5,498 pairwise
# edges and 2,320 hyperedges, matching the real dataset's summary counts.
EDGE_SPLIT = {2: (4000, 1498), 3: (1873, 99), 4: (264, 14), 5: (66, 4)}


def synthesize_contact_network(
    master_seed: int = DEFAULT_SEED,
) -> tuple[HypergraphBundle, np.ndarray]:
    """Assortative multi-layer contact network with fixed per-stratum counts.

    In-class subsets are drawn uniformly from the classes (weighted by the
    number of size-d subsets each class offers); cross subsets uniformly
    from the complement stratum. Counts are exact, not binomial."""
    rng = np.random.default_rng(np.random.SeedSequence([master_seed]))
    sizes = np.array(CLASS_SIZES, dtype=np.int64)
    n = int(sizes.sum())
    labels = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
    members = [np.flatnonzero(labels == k) for k in range(len(sizes))]

    graphs: dict[int, UniformHypergraph] = {}
    for d, (count_in, count_cross) in sorted(EDGE_SPLIT.items()):
        per_class = np.array([math.comb(int(s), d) for s in sizes], dtype=float)
        weights = per_class / per_class.sum()

        def draw_in(t: int) -> np.ndarray:
            picks = rng.choice(len(sizes), size=t, p=weights)
            out = np.empty((t, d), dtype=np.int64)
            for j, k in enumerate(picks):
                nodes = members[k]
                out[j] = nodes[rng.random(nodes.size).argsort()[:d]]
            return out

        def draw_cross(t: int) -> np.ndarray:
            cand = rng.permuted(
                np.tile(np.arange(n, dtype=np.int64), (t, 1)), axis=1
            )[:, :d]
            lab = labels[cand]
            keep = ~np.all(lab == lab[:, :1], axis=1)
            return cand[keep]

        rows = [
            _sample_distinct_rows(draw_in, count_in, 100 * count_in),
            _sample_distinct_rows(draw_cross, count_cross, 100 * count_cross),
        ]
        graphs[d] = UniformHypergraph(n=n, d=d, edges=np.concatenate(rows, axis=0))
    return HypergraphBundle(n=n, graphs=graphs), labels


def write_contact_network(path: str | Path, master_seed: int = DEFAULT_SEED) -> None:
    bundle, labels = synthesize_contact_network(master_seed)
    write_network(bundle, path, labels=labels)


def contact_network_path() -> Path:
    """Path of the bundled network file."""
    return Path(resources.files("hypermc").joinpath(f"data/{DATA_FILENAME}"))


def load_contact_network() -> ParsedNetwork:
    return read_network(contact_network_path())


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else DATA_FILENAME
    write_contact_network(target)
    print(f"wrote {target}")
