"""Ranking and error metric tests against brute-force oracles."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tiny_graph
from dexp.errors import DegenerateLabels, EmptyInput, NoPositives
from dexp.evaluation import (
    CALIBRATION_METRICS,
    StressRecord,
    auprc,
    auroc,
    build_eval_candidates,
    calibration_correlations,
    evaluate_task1,
    evaluate_task2,
    mae_rmse,
    pearson,
    risk_metric_calibration,
)
from dexp.forecaster import persistence_predict
from dexp.sampling import eval_sample_seed


def auroc_oracle(scores, labels) -> float:
    """Pairwise comparison count, ties worth one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def auprc_oracle(scores, labels) -> float:
    """Exhaustive threshold sweep over distinct scores, descending."""
    n_pos = sum(labels)
    area = 0.0
    prev_recall = 0.0
    for th in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= th and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= th and y == 0)
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


# -------------------------------------------------------------------------
# auroc
# -------------------------------------------------------------------------


def test_auroc_perfect_ranking():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0


def test_auroc_inverted_ranking():
    assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auroc_all_tied_is_half():
    assert auroc([0.5] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_auroc_hand_case_with_tie():
    scores = [0.9, 0.8, 0.8, 0.1]
    labels = [1, 0, 1, 0]
    # pairs: (0.9 vs 0.8)=1, (0.9 vs 0.1)=1, (0.8 vs 0.8)=0.5, (0.8 vs 0.1)=1
    assert auroc(scores, labels) == pytest.approx(3.5 / 4.0, abs=1e-15)
    assert auroc(scores, labels) == pytest.approx(auroc_oracle(scores, labels), abs=1e-15)


def test_auroc_single_class_raises():
    with pytest.raises(DegenerateLabels):
        auroc([0.1, 0.9], [1, 1])
    with pytest.raises(DegenerateLabels):
        auroc([0.1, 0.9], [0, 0])


def test_auroc_matches_oracle_on_tie_heavy_random_cases():
    rng = random.Random(401)
    for _ in range(200):
        n = rng.randint(2, 50)
        # coarse score grid forces frequent ties
        scores = [rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(n)]
        labels = [rng.randint(0, 1) for _ in range(n)]
        if sum(labels) in (0, n):
            labels[0] = 1 - labels[0]
        assert auroc(scores, labels) == pytest.approx(
            auroc_oracle(scores, labels), abs=1e-12
        )


# -------------------------------------------------------------------------
# auprc
# -------------------------------------------------------------------------


def test_auprc_perfect_ranking_is_one():
    assert auprc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == pytest.approx(1.0, abs=1e-15)


def test_auprc_all_positive_is_one():
    assert auprc([0.3, 0.9], [1, 1]) == pytest.approx(1.0, abs=1e-15)


def test_auprc_single_positive_ranked_last():
    n = 5
    scores = [0.9, 0.8, 0.7, 0.6, 0.1]
    labels = [0, 0, 0, 0, 1]
    assert auprc(scores, labels) == pytest.approx(1.0 / n, abs=1e-15)


def test_auprc_no_positives_raises():
    with pytest.raises(NoPositives):
        auprc([0.2, 0.4], [0, 0])


def test_auprc_tied_scores_form_one_threshold_group():
    # both 0.5 pairs enter together: single threshold with P=0.5, R=1
    scores = [0.5, 0.5]
    labels = [1, 0]
    assert auprc(scores, labels) == pytest.approx(0.5, abs=1e-15)


def test_auprc_matches_oracle_on_tie_heavy_random_cases():
    rng = random.Random(977)
    for _ in range(200):
        n = rng.randint(1, 50)
        scores = [rng.choice([0.0, 0.1, 0.5, 0.9]) for _ in range(n)]
        labels = [rng.randint(0, 1) for _ in range(n)]
        if sum(labels) == 0:
            labels[rng.randrange(n)] = 1
        assert auprc(scores, labels) == pytest.approx(
            auprc_oracle(scores, labels), abs=1e-12
        )


@given(
    st.lists(
        st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=30
    ).filter(lambda rows: 0 < sum(y for _, y in rows) < len(rows))
)
def test_rank_metrics_invariant_under_monotone_transform(rows):
    scores = [float(s) for s, _ in rows]
    labels = [y for _, y in rows]
    stretched = [3.0 * s + 7.0 for s in scores]
    assert auroc(scores, labels) == pytest.approx(auroc(stretched, labels), abs=1e-12)
    assert auprc(scores, labels) == pytest.approx(auprc(stretched, labels), abs=1e-12)


# -------------------------------------------------------------------------
# error metrics and correlation
# -------------------------------------------------------------------------


def test_mae_rmse_hand_case():
    mae, rmse = mae_rmse([1.0, 2.0, 5.0], [1.0, 4.0, 1.0])
    assert mae == pytest.approx(2.0)
    assert rmse == pytest.approx(math.sqrt((0 + 4 + 16) / 3))


def test_mae_rmse_empty_raises():
    with pytest.raises(EmptyInput):
        mae_rmse([], [])


def test_pearson_exact_line():
    xs = [1.0, 2.0, 3.0, 4.0]
    assert pearson(xs, [2 * x + 1 for x in xs]) == pytest.approx(1.0, abs=1e-12)
    assert pearson(xs, [-x for x in xs]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_degenerate_is_none():
    assert pearson([1.0], [2.0]) is None
    assert pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


def test_pearson_matches_numpy():
    rng = np.random.default_rng(5)
    xs = rng.normal(size=40)
    ys = 0.3 * xs + rng.normal(size=40)
    assert pearson(xs, ys) == pytest.approx(np.corrcoef(xs, ys)[0, 1], abs=1e-12)


# -------------------------------------------------------------------------
# candidate construction
# -------------------------------------------------------------------------


def _pair_of_graphs():
    g_a = tiny_graph(
        {"a": 10.0, "b": 20.0, "c": 5.0, "d": 1.0},
        {("a", "b"): 3.0},
        interval=(0, 1),
    )
    g_t = tiny_graph(
        {"a": 11.0, "b": 19.0, "c": 6.0, "e": 2.0},
        {("a", "b"): 4.0, ("c", "a"): 1.0, ("e", "a"): 9.0},
        interval=(2, 3),
    )
    return g_a, g_t


def test_build_eval_candidates_positives_are_target_edges_over_common_nodes():
    g_a, g_t = _pair_of_graphs()
    pairs, labels, common = build_eval_candidates(g_a, g_t, 2, eval_sample_seed(1, 0, 1))
    assert common == ["a", "b", "c"]
    positives = [p for p, y in zip(pairs, labels) if y == 1]
    # ("e", "a") is dropped: e is not in the anchor graph
    assert positives == [("a", "b"), ("c", "a")]
    negatives = [p for p, y in zip(pairs, labels) if y == 0]
    assert set(negatives).isdisjoint(set(positives))
    for a, b in negatives:
        assert a != b and a in common and b in common


def test_build_eval_candidates_deterministic():
    g_a, g_t = _pair_of_graphs()
    one = build_eval_candidates(g_a, g_t, 3, eval_sample_seed(9, 4, 2))
    two = build_eval_candidates(g_a, g_t, 3, eval_sample_seed(9, 4, 2))
    assert one[0] == two[0]
    assert (one[1] == two[1]).all()


# -------------------------------------------------------------------------
# task 1 wiring
# -------------------------------------------------------------------------


def _frozen_sequence(n_weeks: int = 6):
    nodes = {"a": 100.0, "b": 50.0, "c": 25.0, "d": 10.0}
    edges = {("a", "b"): 7.0, ("c", "a"): 3.0}
    return [
        tiny_graph(nodes, edges, interval=(t, t + 1)) for t in range(n_weeks)
    ]


def test_task1_persistence_is_perfect_on_frozen_sequence():
    graphs = _frozen_sequence()
    pairs = [(0, 1), (1, 1), (2, 1), (0, 2), (1, 2)]

    def scorer(t, h, cands):
        return persistence_predict(graphs[t], h, cands)

    rows = evaluate_task1({"persistence": scorer}, graphs, pairs, 3, seed=11)
    assert len(rows) == 2
    for row in rows:
        assert row.auroc == 1.0
        assert row.auprc == pytest.approx(1.0, abs=1e-15)
        assert row.mae_w == 0.0
        assert row.rmse_w == 0.0
        assert row.mae_n == 0.0
        assert row.n_edges > 0


def test_task1_identical_scorers_get_identical_rows():
    graphs = _frozen_sequence()
    pairs = [(0, 1), (1, 1)]

    def scorer(t, h, cands):
        return persistence_predict(graphs[t], h, cands)

    rows = evaluate_task1({"one": scorer, "two": scorer}, graphs, pairs, 2, seed=3)
    by_name = {r.model: r for r in rows}
    a, b = by_name["one"], by_name["two"]
    assert (a.auroc, a.auprc, a.mae_w, a.n_pairs) == (b.auroc, b.auprc, b.mae_w, b.n_pairs)


def test_task1_empty_target_graphs_degrade_to_none():
    nodes = {"a": 5.0, "b": 6.0}
    graphs = [tiny_graph(nodes, {}, interval=(t, t + 1)) for t in range(4)]

    def scorer(t, h, cands):
        return persistence_predict(graphs[t], h, cands)

    rows = evaluate_task1({"persistence": scorer}, graphs, [(0, 1), (1, 1)], 2, seed=1)
    (row,) = rows
    assert row.auroc is None and row.auprc is None
    assert row.mae_w is None and row.n_edges == 0
    # no positives means no candidates at all, so node errors degrade too
    assert row.mae_n is None and row.n_pairs == 0


# -------------------------------------------------------------------------
# task 2: stratified stress evaluation
# -------------------------------------------------------------------------


def _records(err_pairs, horizon=4):
    """err_pairs: list of (baseline_loss, model_loss); realized loss is 0."""
    return [
        StressRecord(
            scenario=f"s{i % 3}",
            anchor_week=i,
            horizon=horizon,
            loss_baseline=b,
            loss_model=m,
            loss_realized=0.0,
        )
        for i, (b, m) in enumerate(err_pairs)
    ]


def test_task2_model_equals_realized_wins_everywhere():
    records = _records([(5.0, 0.0), (3.0, 0.0), (8.0, 0.0), (1.0, 0.0), (2.0, 0.0)])
    (summary,) = evaluate_task2(records)
    assert summary.n_records == 5
    assert summary.n_worst == 1  # ceil(0.2 * 5)
    assert summary.delta_mae_all == pytest.approx((5 + 3 + 8 + 1 + 2) / 5)
    assert summary.delta_mae_worst == pytest.approx(8.0)
    assert summary.win_rate_worst == 1.0


def test_task2_model_equals_baseline_never_wins():
    records = _records([(5.0, 5.0), (3.0, 3.0), (8.0, 8.0), (1.0, 1.0), (2.0, 2.0)])
    (summary,) = evaluate_task2(records)
    assert summary.delta_mae_all == 0.0
    assert summary.delta_mae_worst == 0.0
    # strict comparison: ties count as losses
    assert summary.win_rate_worst == 0.0


def test_task2_worst_bucket_size_is_ceiling():
    for n, expected in [(1, 1), (4, 1), (5, 1), (6, 2), (10, 2), (11, 3)]:
        records = _records([(float(i + 1), 0.0) for i in range(n)])
        (summary,) = evaluate_task2(records)
        assert summary.n_worst == expected, n


def test_task2_worst_bucket_selected_by_baseline_error_only():
    # model error is enormous on the low-baseline rows; the worst bucket
    # still follows baseline error, so delta_mae_worst stays positive
    records = _records(
        [(10.0, 1.0), (9.0, 1.0), (0.1, 50.0), (0.2, 50.0), (0.3, 50.0)]
    )
    (summary,) = evaluate_task2(records)
    assert summary.n_worst == 1
    assert summary.delta_mae_worst == pytest.approx(9.0)
    assert summary.win_rate_worst == 1.0


def test_task2_groups_by_horizon():
    records = _records([(4.0, 1.0)] * 5, horizon=1) + _records(
        [(2.0, 3.0)] * 5, horizon=8
    )
    summaries = evaluate_task2(records)
    assert [s.horizon for s in summaries] == [1, 8]
    assert summaries[0].delta_mae_all == pytest.approx(3.0)
    assert summaries[1].delta_mae_all == pytest.approx(-1.0)


def test_task2_antisymmetry_between_model_and_baseline():
    pairs = [(5.0, 2.0), (1.0, 4.0), (3.0, 3.0), (6.0, 0.5), (2.5, 2.0)]
    fwd = evaluate_task2(_records(pairs))
    rev = evaluate_task2(_records([(m, b) for b, m in pairs]))
    assert fwd[0].delta_mae_all == pytest.approx(-rev[0].delta_mae_all)


# -------------------------------------------------------------------------
# calibration
# -------------------------------------------------------------------------


def _sequence_with_predictions(perfect: bool):
    rng = random.Random(31)
    graphs = []
    for t in range(8):
        nodes = {f"p{i}": 100.0 + 10 * rng.random() + 5 * t * (i + 1) for i in range(5)}
        edges = {
            ("p0", "p1"): 10.0 + t,
            ("p1", "p2"): 5.0 + 2 * t,
            ("p3", "p0"): 2.0 + 0.5 * t,
        }
        graphs.append(tiny_graph(nodes, edges, interval=(t, t + 1)))
    pairs = [(0, 2), (1, 2), (2, 2), (3, 2), (4, 2)]
    if perfect:
        predicted = {(t, h): graphs[t + h] for t, h in pairs}
    else:
        predicted = {(t, h): graphs[t] for t, h in pairs}
    return graphs, pairs, predicted


def test_calibration_perfect_predictions_match_realized_exactly():
    graphs, pairs, predicted = _sequence_with_predictions(perfect=True)
    by_h = risk_metric_calibration(predicted, graphs, pairs)
    rows = by_h[2]
    assert len(rows) == len(pairs)
    for row in rows:
        for metric in CALIBRATION_METRICS:
            assert row[f"{metric}_pred"] == row[f"{metric}_real"]
    corr = calibration_correlations(rows)
    for metric, value in corr.items():
        if value is not None:
            assert value == pytest.approx(1.0, abs=1e-9)


def test_calibration_degenerate_weeks_are_none_not_fatal():
    graphs, pairs, _ = _sequence_with_predictions(perfect=True)
    # an empty predicted graph has no edges and no nodes: most metrics degrade
    empty = tiny_graph({}, {}, interval=(9, 9))
    predicted = {pairs[0]: empty}
    by_h = risk_metric_calibration(predicted, graphs, pairs)
    (row,) = by_h[2]
    assert row["density_pred"] is None
    assert row["density_real"] is not None
    corr = calibration_correlations(by_h[2])
    assert corr["density"] is None  # fewer than two usable rows


def test_calibration_correlations_need_two_points():
    rows = [
        {"density_pred": 0.5, "density_real": 0.4},
    ]
    assert calibration_correlations(rows)["density"] is None
