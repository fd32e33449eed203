"""Per-protocol tabular features feeding the forecaster encoder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import ExposureGraph

DEFAULT_CATEGORIES = [
    "bridge",
    "cdp",
    "derivatives",
    "dex",
    "gaming",
    "indexes",
    "insurance",
    "launchpad",
    "lending",
    "liquid_staking",
    "payments",
    "privacy",
    "stablecoin",
    "yield",
    "other",
]

N_SCALAR_FEATURES = 8


@dataclass
class FeatureSpec:
    """Fixed feature layout; the category list pins the one-hot block."""

    categories: list[str] = field(default_factory=lambda: list(DEFAULT_CATEGORIES))

    def __post_init__(self):
        if "other" not in self.categories:
            self.categories = list(self.categories) + ["other"]

    @property
    def dim(self) -> int:
        return N_SCALAR_FEATURES + len(self.categories)

    def names(self) -> list[str]:
        return [
            "log_tvl",
            "token_types",
            "top5_concentration",
            "holdings_entropy",
            "in_degree",
            "out_degree",
            "log_in_strength",
            "log_out_strength",
        ] + [f"sector:{c}" for c in self.categories]


def _holding_stats(holding: dict[str, float]) -> tuple[int, float, float]:
    values = sorted((v for v in holding.values() if v > 0.0), reverse=True)
    count = len(holding)
    total = sum(values)
    if total <= 0.0 or not values:
        return count, 0.0, 0.0
    top5 = sum(values[:5]) / total
    entropy = 0.0
    for v in values:
        s = v / total
        entropy -= s * math.log(s)
    return count, top5, entropy


def node_features(
    g: ExposureGraph,
    holdings: dict[str, dict[str, float]] | None,
    spec: FeatureSpec,
    category_of: dict[str, str] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Feature matrix in sorted-protocol order.

    Holdings come from the snapshot that closes the graph's interval; when
    unavailable the holding-derived columns are zero.
    """
    cats = category_of if category_of is not None else g.categories
    ids = sorted(g.nodes)
    n = len(ids)
    x = np.zeros((n, spec.dim))
    cat_pos = {c: i for i, c in enumerate(spec.categories)}
    other = cat_pos["other"]

    in_deg: dict[str, int] = dict.fromkeys(ids, 0)
    out_deg: dict[str, int] = dict.fromkeys(ids, 0)
    in_str: dict[str, float] = dict.fromkeys(ids, 0.0)
    out_str: dict[str, float] = dict.fromkeys(ids, 0.0)
    for (a, b), w in sorted(g.edges.items()):
        out_deg[a] += 1
        in_deg[b] += 1
        out_str[a] += w
        in_str[b] += w

    for i, p in enumerate(ids):
        count, top5, entropy = _holding_stats((holdings or {}).get(p, {}))
        x[i, 0] = math.log1p(g.nodes[p])
        x[i, 1] = float(count)
        x[i, 2] = top5
        x[i, 3] = entropy
        x[i, 4] = float(in_deg[p])
        x[i, 5] = float(out_deg[p])
        x[i, 6] = math.log1p(in_str[p])
        x[i, 7] = math.log1p(out_str[p])
        x[i, N_SCALAR_FEATURES + cat_pos.get(cats.get(p, "other"), other)] = 1.0
    return ids, x


def aggregation_matrices(g: ExposureGraph, ids: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized neighbor-mix matrices.

    a_in[p] mixes the protocols holding claims issued toward p's row...
    concretely: a_in[p, q] = w(q -> p) / total incoming weight of p, and
    a_out[p, q] = w(p -> q) / total outgoing weight of p. Rows without
    edges stay zero so isolated protocols aggregate to the zero vector.
    """
    idx = {p: i for i, p in enumerate(ids)}
    n = len(ids)
    a_in = np.zeros((n, n))
    a_out = np.zeros((n, n))
    for (a, b), w in sorted(g.edges.items()):
        a_out[idx[a], idx[b]] += w
        a_in[idx[b], idx[a]] += w
    for mat in (a_in, a_out):
        sums = mat.sum(axis=1, keepdims=True)
        nz = sums[:, 0] > 0.0
        mat[nz] /= sums[nz]
    return a_in, a_out
