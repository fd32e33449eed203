"""Ranking and error metrics plus the two evaluation harnesses.

The harnesses are deliberately decoupled from the model: they score any
callable that maps (anchor index, horizon, candidate pairs) to a forecast
bundle, so the carry-forward baseline and the trained model run through
identical code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contagion import ScenarioSpec, predictive_stress_compare
from .errors import DegenerateLabels, EmptyInput, NoPositives
from .graph import ExposureGraph
from .risk import build_risk_report
from .sampling import eval_sample_seed, negative_sample

WORST_FRACTION = 0.2


def auroc(scores, labels) -> float:
    """Rank-sum area under the ROC curve; ties count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n_pos = int((labels > 0.5).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both classes, got {n_pos} pos / {n_neg} neg")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[labels > 0.5].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Average precision with step interpolation; tied scores form one
    threshold group."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n_pos = int((labels > 0.5).sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    area = 0.0
    tp = 0
    fp = 0
    prev_recall = 0.0
    i = 0
    n = scores.size
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        tp += int((y[i : j + 1] > 0.5).sum())
        fp += (j - i + 1) - int((y[i : j + 1] > 0.5).sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


def mae_rmse(preds, targets) -> tuple[float, float]:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.size == 0:
        raise EmptyInput("error metrics need at least one prediction")
    err = preds - targets
    return float(np.abs(err).mean()), float(np.sqrt((err * err).mean()))


def pearson(xs, ys) -> float | None:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        return None
    sx = xs.std()
    sy = ys.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((xs - xs.mean()) * (ys - ys.mean())).mean() / (sx * sy))


# -------------------------------------------------------------------------
# link/weight/node forecasting quality
# -------------------------------------------------------------------------


def build_eval_candidates(
    g_anchor: ExposureGraph,
    g_target: ExposureGraph,
    neg_ratio: int,
    seed,
) -> tuple[list[tuple[str, str]], np.ndarray, list[str]]:
    """Positives are target edges over the common node set; negatives are
    seeded uniform non-edges of the target over the same nodes."""
    common = sorted(set(g_anchor.nodes) & set(g_target.nodes))
    common_set = set(common)
    positives = sorted(
        (a, b) for (a, b) in g_target.edges if a in common_set and b in common_set
    )
    negatives = negative_sample(set(positives), common, neg_ratio, seed)
    pairs = positives + negatives
    labels = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    return pairs, labels, common


@dataclass
class HorizonMetrics:
    model: str
    horizon: int
    auroc: float | None
    auprc: float | None
    mae_w: float | None
    rmse_w: float | None
    mae_n: float | None
    rmse_n: float | None
    n_pairs: int
    n_edges: int


def evaluate_task1(
    scorers: dict[str, object],
    graphs: list[ExposureGraph],
    pairs: list[tuple[int, int]],
    neg_ratio: int,
    seed: int,
) -> list[HorizonMetrics]:
    """Pooled ranking/error metrics per scorer per horizon.

    scorers: name -> fn(anchor_idx, horizon, candidate_pairs) -> bundle with
    edge_prob / edge_logweight / node_delta dicts.
    """
    horizons = sorted({h for _, h in pairs})
    out = []
    for name, scorer in scorers.items():
        for h in horizons:
            all_scores: list[float] = []
            all_labels: list[float] = []
            w_pred: list[float] = []
            w_true: list[float] = []
            n_pred: list[float] = []
            n_true: list[float] = []
            for t, hh in pairs:
                if hh != h:
                    continue
                g_a = graphs[t]
                g_t = graphs[t + h]
                cands, labels, common = build_eval_candidates(
                    g_a, g_t, neg_ratio, eval_sample_seed(seed, t, h)
                )
                if not cands:
                    continue
                bundle = scorer(t, h, cands)
                all_scores.extend(bundle.edge_prob[p] for p in cands)
                all_labels.extend(labels.tolist())
                for pair, is_pos in zip(cands, labels):
                    if is_pos > 0.5:
                        w_pred.append(bundle.edge_logweight[pair])
                        w_true.append(math.log1p(g_t.edges[pair]))
                for p in common:
                    n_pred.append(bundle.node_delta.get(p, 0.0))
                    n_true.append(math.log1p(g_t.nodes[p]) - math.log1p(g_a.nodes[p]))
            try:
                roc = auroc(all_scores, all_labels)
            except DegenerateLabels:
                roc = None
            try:
                ap = auprc(all_scores, all_labels) if all_scores else None
            except NoPositives:
                ap = None
            mw = rw = mn = rn = None
            if w_pred:
                mw, rw = mae_rmse(w_pred, w_true)
            if n_pred:
                mn, rn = mae_rmse(n_pred, n_true)
            out.append(
                HorizonMetrics(
                    model=name,
                    horizon=h,
                    auroc=roc,
                    auprc=ap,
                    mae_w=mw,
                    rmse_w=rw,
                    mae_n=mn,
                    rmse_n=rn,
                    n_pairs=len(all_scores),
                    n_edges=len(w_pred),
                )
            )
    return out


# -------------------------------------------------------------------------
# stress-forecast quality
# -------------------------------------------------------------------------


@dataclass
class StressRecord:
    scenario: str
    anchor_week: int
    horizon: int
    loss_baseline: float
    loss_model: float
    loss_realized: float


@dataclass
class StratifiedSummary:
    horizon: int
    n_records: int
    n_worst: int
    delta_mae_all: float
    delta_mae_worst: float
    win_rate_worst: float


def collect_stress_records(
    graphs: list[ExposureGraph],
    predicted: dict[tuple[int, int], ExposureGraph],
    pairs: list[tuple[int, int]],
    scenarios: list[ScenarioSpec],
    category_of: dict[str, str] | None = None,
) -> list[StressRecord]:
    """Run every scenario on (origin, predicted, realized) per (t, h)."""
    records = []
    for t, h in pairs:
        g_pred = predicted.get((t, h))
        if g_pred is None:
            continue
        for spec in scenarios:
            try:
                base, model, real = predictive_stress_compare(
                    graphs[t], g_pred, graphs[t + h], spec, category_of
                )
            except Exception:
                # scenario unsatisfiable on this week (e.g. empty sector)
                continue
            records.append(
                StressRecord(
                    scenario=spec.name,
                    anchor_week=graphs[t].week,
                    horizon=h,
                    loss_baseline=base.system_loss_pct,
                    loss_model=model.system_loss_pct,
                    loss_realized=real.system_loss_pct,
                )
            )
    return records


def evaluate_task2(records: list[StressRecord]) -> list[StratifiedSummary]:
    """Per horizon: error-reduction vs the carry-forward baseline, overall
    and on the hardest fifth of cases (largest baseline error, scenarios
    pooled). Win rate is strict; equal errors count as a loss."""
    horizons = sorted({r.horizon for r in records})
    out = []
    for h in horizons:
        rows = [r for r in records if r.horizon == h]
        if not rows:
            continue
        err_b = [abs(r.loss_baseline - r.loss_realized) for r in rows]
        err_m = [abs(r.loss_model - r.loss_realized) for r in rows]
        n = len(rows)
        k = math.ceil(WORST_FRACTION * n)
        order = sorted(
            range(n), key=lambda i: (-err_b[i], rows[i].anchor_week, rows[i].scenario)
        )
        worst = order[:k]
        mae_b_all = sum(err_b) / n
        mae_m_all = sum(err_m) / n
        mae_b_w = sum(err_b[i] for i in worst) / k
        mae_m_w = sum(err_m[i] for i in worst) / k
        wins = sum(1 for i in worst if err_m[i] < err_b[i])
        out.append(
            StratifiedSummary(
                horizon=h,
                n_records=n,
                n_worst=k,
                delta_mae_all=mae_b_all - mae_m_all,
                delta_mae_worst=mae_b_w - mae_m_w,
                win_rate_worst=wins / k,
            )
        )
    return out


# -------------------------------------------------------------------------
# dashboard-metric calibration
# -------------------------------------------------------------------------

CALIBRATION_METRICS = ("density", "tvl_hhi", "edge_hhi", "spillover_index", "mean_sis")


def risk_metric_calibration(
    predicted: dict[tuple[int, int], ExposureGraph],
    graphs: list[ExposureGraph],
    pairs: list[tuple[int, int]],
    category_of: dict[str, str] | None = None,
) -> dict[int, list[dict]]:
    """Predicted-vs-realized dashboard metrics, grouped by horizon.

    Degenerate weeks surface as None values; the run never aborts on a
    single bad week.
    """
    by_horizon: dict[int, list[dict]] = {}
    for t, h in pairs:
        g_pred = predicted.get((t, h))
        if g_pred is None:
            continue
        g_real = graphs[t + h]
        rep_p = build_risk_report(g_pred, category_of)
        rep_r = build_risk_report(g_real, category_of)
        row = {"anchor_week": graphs[t].week, "horizon": h}
        for metric in CALIBRATION_METRICS:
            row[f"{metric}_pred"] = getattr(rep_p, metric)
            row[f"{metric}_real"] = getattr(rep_r, metric)
        by_horizon.setdefault(h, []).append(row)
    return by_horizon


def calibration_correlations(rows: list[dict]) -> dict[str, float | None]:
    out = {}
    for metric in CALIBRATION_METRICS:
        xs = []
        ys = []
        for row in rows:
            p = row.get(f"{metric}_pred")
            r = row.get(f"{metric}_real")
            if p is not None and r is not None:
                xs.append(p)
                ys.append(r)
        out[metric] = pearson(xs, ys) if len(xs) >= 2 else None
    return out
