"""Weekly systemic-risk metrics over one exposure graph.

All metrics are deterministic functions of the graph (plus sector labels);
node order is always sorted protocol id so float accumulation is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllZero,
    EmptyInput,
    MissingCategory,
    TooFewNodes,
    UnknownProtocol,
)
from .graph import ExposureGraph

PAGERANK_DAMPING = 0.85
PAGERANK_MAX_ITER = 200
PAGERANK_TOL = 1e-12
TAIL_K = 5
EARLY_WARNING_WINDOW = 26
EARLY_WARNING_Z = 2.0


@dataclass
class SisWeights:
    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0


def pagerank(
    g: ExposureGraph,
    damping: float = PAGERANK_DAMPING,
    max_iter: int = PAGERANK_MAX_ITER,
    tol: float = PAGERANK_TOL,
) -> dict[str, float]:
    """Edge-weighted pagerank; dangling mass is spread uniformly."""
    if not g.nodes:
        raise EmptyInput("pagerank needs a non-empty graph")
    order = sorted(g.nodes)
    idx = {p: i for i, p in enumerate(order)}
    n = len(order)

    out_sum = np.zeros(n)
    for (a, _), w in g.edges.items():
        out_sum[idx[a]] += w
    # column-stochastic transition restricted to non-dangling rows
    m = np.zeros((n, n))
    for (a, b), w in sorted(g.edges.items()):
        i, j = idx[a], idx[b]
        m[i, j] = w / out_sum[i]
    dangling = out_sum == 0.0

    r = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for _ in range(max_iter):
        dangling_mass = r[dangling].sum()
        r_next = teleport + damping * (m.T @ r + dangling_mass / n)
        if np.abs(r_next - r).sum() < tol:
            r = r_next
            break
        r = r_next
    return {p: float(r[idx[p]]) for p in order}


def tail_exposure(g: ExposureGraph, p: str, k: int = TAIL_K) -> float:
    """Share of p's outgoing exposure carried by its k largest edges."""
    if p not in g.nodes:
        raise UnknownProtocol(f"protocol {p!r} not in graph")
    weights = sorted(g.out_edges(p).values(), reverse=True)
    if not weights:
        return 0.0
    total = sum(weights)
    if total == 0.0:
        return 0.0
    return sum(weights[:k]) / total


def _minmax(values: dict[str, float]) -> dict[str, float]:
    # constant inputs normalize to 0 so the component drops out
    lo = min(values.values())
    hi = max(values.values())
    if hi == lo:
        return {p: 0.0 for p in values}
    span = hi - lo
    return {p: (v - lo) / span for p, v in values.items()}


def sis(
    g: ExposureGraph,
    weights: SisWeights | None = None,
    k: int = TAIL_K,
) -> dict[str, float]:
    """Systemic-importance score: damped-walk centrality, outgoing
    concentration and size, each on a per-graph [0, 1] scale."""
    if not g.nodes:
        return {}
    w = weights or SisWeights()
    pr = _minmax(pagerank(g))
    size = _minmax({p: math.log1p(v) for p, v in g.nodes.items()})
    out = {}
    for p in sorted(g.nodes):
        out[p] = w.alpha * pr[p] + w.beta * tail_exposure(g, p, k) + w.gamma * size[p]
    return out


def spillover_matrix(
    g: ExposureGraph,
    category_of: dict[str, str],
) -> tuple[list[str], np.ndarray]:
    """Aggregate edge weight between sectors; sectors sorted lexically."""
    missing = sorted(p for p in g.nodes if p not in category_of)
    if missing:
        raise MissingCategory(f"protocols without category: {missing}")
    sectors = sorted({category_of[p] for p in g.nodes})
    pos = {s: i for i, s in enumerate(sectors)}
    mat = np.zeros((len(sectors), len(sectors)))
    for (a, b), w in sorted(g.edges.items()):
        mat[pos[category_of[a]], pos[category_of[b]]] += w
    return sectors, mat


def hhi(values: list[float]) -> float:
    """Herfindahl-Hirschman index on shares of the total."""
    if not values:
        raise EmptyInput("hhi needs at least one value")
    total = sum(values)
    if total == 0.0:
        raise AllZero("hhi undefined when all values are zero")
    return sum((v / total) ** 2 for v in values)


def spillover_index(matrix: np.ndarray) -> float:
    """Concentration of cross-sector flow: hhi over off-diagonal entries."""
    k = matrix.shape[0]
    off = [float(matrix[i, j]) for i in range(k) for j in range(k) if i != j]
    if not off:
        raise EmptyInput("spillover index needs at least two sectors")
    return hhi(off)


def network_density(g: ExposureGraph) -> float:
    n = len(g.nodes)
    if n < 2:
        raise TooFewNodes("density needs at least two nodes")
    return len(g.edges) / (n * (n - 1))


def early_warning(
    series: list[tuple[int, float]],
    window: int = EARLY_WARNING_WINDOW,
    z: float = EARLY_WARNING_Z,
) -> list[tuple[int, bool]]:
    """Flag weeks whose concentration jump exceeds z trailing deviations.

    The deviation is the sample std of the previous `window` first
    differences; weeks without a full trailing window are never flagged.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    weeks = [w for w, _ in series]
    values = [v for _, v in series]
    deltas = [values[i] - values[i - 1] for i in range(1, len(values))]
    flags = [(weeks[0], False)] if series else []
    for i in range(1, len(values)):
        d_idx = i - 1  # delta position for week i
        trailing = deltas[d_idx - window : d_idx] if d_idx - window >= 0 else []
        if len(trailing) < window:
            flags.append((weeks[i], False))
            continue
        mean = sum(trailing) / window
        var = sum((x - mean) ** 2 for x in trailing) / (window - 1)
        sigma = math.sqrt(var)
        flags.append((weeks[i], deltas[d_idx] > z * sigma))
    return flags


@dataclass
class RiskReport:
    """One week's dashboard row; degenerate metrics are None with a flag."""

    week: int
    sis: dict[str, float]
    mean_sis: float | None
    sectors: list[str]
    spillover: list[list[float]] | None
    spillover_index: float | None
    density: float | None
    tvl_hhi: float | None
    edge_hhi: float | None
    n_nodes: int
    n_edges: int
    total_tvl: float
    degenerate: list[str] = field(default_factory=list)


def build_risk_report(
    g: ExposureGraph,
    category_of: dict[str, str] | None = None,
    weights: SisWeights | None = None,
    k: int = TAIL_K,
) -> RiskReport:
    """Compute every weekly metric, degrading per-metric on thin graphs."""
    cats = category_of if category_of is not None else g.categories
    flags: list[str] = []

    scores = sis(g, weights, k)
    mean_sis = sum(scores.values()) / len(scores) if scores else None
    if not scores:
        flags.append("empty_graph")

    sectors: list[str] = []
    spill: list[list[float]] | None = None
    spill_idx: float | None = None
    if g.nodes:
        try:
            sectors, mat = spillover_matrix(g, cats)
            spill = [[float(x) for x in row] for row in mat]
            try:
                spill_idx = spillover_index(mat)
            except (EmptyInput, AllZero):
                flags.append("spillover_index_degenerate")
        except MissingCategory:
            flags.append("missing_categories")

    try:
        density = network_density(g)
    except TooFewNodes:
        density = None
        flags.append("density_degenerate")

    try:
        tvl_hhi = hhi(sorted(g.nodes.values()))
    except (EmptyInput, AllZero):
        tvl_hhi = None
        flags.append("tvl_hhi_degenerate")

    try:
        edge_hhi = hhi([w for _, w in sorted(g.edges.items())])
    except (EmptyInput, AllZero):
        edge_hhi = None
        flags.append("edge_hhi_degenerate")

    return RiskReport(
        week=g.week,
        sis=scores,
        mean_sis=mean_sis,
        sectors=sectors,
        spillover=spill,
        spillover_index=spill_idx,
        density=density,
        tvl_hhi=tvl_hhi,
        edge_hhi=edge_hhi,
        n_nodes=len(g.nodes),
        n_edges=len(g.edges),
        total_tvl=sum(g.nodes[p] for p in sorted(g.nodes)),
        degenerate=flags,
    )


def report_to_dict(r: RiskReport) -> dict:
    return {
        "week": r.week,
        "sis": {p: r.sis[p] for p in sorted(r.sis)},
        "mean_sis": r.mean_sis,
        "sectors": r.sectors,
        "spillover": r.spillover,
        "spillover_index": r.spillover_index,
        "density": r.density,
        "tvl_hhi": r.tvl_hhi,
        "edge_hhi": r.edge_hhi,
        "n_nodes": r.n_nodes,
        "n_edges": r.n_edges,
        "total_tvl": round(r.total_tvl, 6),
        "degenerate": r.degenerate,
    }


def report_scalar_rows(r: RiskReport) -> list[tuple[int, str, float | None]]:
    """Long-form (week, metric, value) rows for the weekly CSV."""
    return [
        (r.week, "mean_sis", r.mean_sis),
        (r.week, "spillover_index", r.spillover_index),
        (r.week, "density", r.density),
        (r.week, "tvl_hhi", r.tvl_hhi),
        (r.week, "edge_hhi", r.edge_hhi),
        (r.week, "n_nodes", float(r.n_nodes)),
        (r.week, "n_edges", float(r.n_edges)),
        (r.week, "total_tvl", r.total_tvl),
    ]
