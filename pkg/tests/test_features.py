import math

import numpy as np
import pytest

from dexp.features import (
    DEFAULT_CATEGORIES,
    N_SCALAR_FEATURES,
    FeatureSpec,
    aggregation_matrices,
    node_features,
)

from conftest import tiny_graph


def test_spec_dim_counts_scalars_plus_onehot():
    spec = FeatureSpec()
    assert spec.dim == N_SCALAR_FEATURES + len(spec.categories)
    assert len(spec.names()) == spec.dim


def test_spec_appends_other_once():
    spec = FeatureSpec(categories=["dex", "lending"])
    assert spec.categories == ["dex", "lending", "other"]
    again = FeatureSpec(categories=["dex", "other"])
    assert again.categories.count("other") == 1


def test_node_features_hand_check():
    g = tiny_graph(
        nodes={"a": math.e - 1.0, "b": 3.0},
        edges={("a", "b"): math.e - 1.0},
        categories={"a": "dex", "b": "lending"},
    )
    holdings = {
        "a": {"t1": 30.0, "t2": 10.0},
        "b": {"t3": 3.0},
    }
    spec = FeatureSpec(categories=["dex", "lending"])
    ids, x = node_features(g, holdings, spec)
    assert ids == ["a", "b"]
    row_a = x[0]
    assert row_a[0] == pytest.approx(1.0)  # log1p(e-1) = 1
    assert row_a[1] == 2.0
    assert row_a[2] == 1.0  # both tokens inside the top 5
    p = np.array([0.75, 0.25])
    assert row_a[3] == pytest.approx(float(-(p * np.log(p)).sum()))
    assert row_a[4] == 0.0 and row_a[5] == 1.0
    assert row_a[6] == 0.0
    assert row_a[7] == pytest.approx(1.0)  # log1p of outgoing strength e-1
    assert row_a[N_SCALAR_FEATURES + 0] == 1.0  # dex slot

    row_b = x[1]
    assert row_b[4] == 1.0 and row_b[5] == 0.0
    assert row_b[6] == pytest.approx(1.0)
    assert row_b[N_SCALAR_FEATURES + 1] == 1.0


def test_single_token_entropy_zero_top5_one():
    g = tiny_graph(nodes={"a": 5.0}, edges={})
    ids, x = node_features(g, {"a": {"t": 5.0}}, FeatureSpec())
    assert x[0, 2] == 1.0
    assert x[0, 3] == 0.0


def test_missing_holdings_zero_out_holding_columns():
    g = tiny_graph(nodes={"a": 5.0}, edges={})
    ids, x = node_features(g, None, FeatureSpec())
    assert x[0, 1] == 0.0 and x[0, 2] == 0.0 and x[0, 3] == 0.0
    assert np.isfinite(x).all()


def test_unknown_category_lands_in_other():
    g = tiny_graph(nodes={"a": 1.0}, edges={}, categories={"a": "weird"})
    spec = FeatureSpec()
    ids, x = node_features(g, None, spec)
    other_col = N_SCALAR_FEATURES + spec.categories.index("other")
    assert x[0, other_col] == 1.0


def test_onehot_block_sums_to_one_and_finite():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        nodes = {f"p{i}": float(rng.uniform(0, 1e9)) for i in range(n)}
        edges = {}
        for i in range(n):
            for j in range(n):
                if i != j and rng.random() < 0.3:
                    edges[(f"p{i}", f"p{j}")] = float(rng.uniform(0.1, 1e6))
        cats = {
            f"p{i}": str(rng.choice(DEFAULT_CATEGORIES + ["mystery"]))
            for i in range(n)
        }
        g = tiny_graph(nodes=nodes, edges=edges, categories=cats)
        spec = FeatureSpec()
        _, x = node_features(g, None, spec)
        assert np.isfinite(x).all()
        onehot = x[:, N_SCALAR_FEATURES:]
        assert np.allclose(onehot.sum(axis=1), 1.0)


def test_aggregation_two_in_neighbors_weighted_mean():
    # weights 1 and 3 into c: the c row must mix a:b at 1/4 : 3/4
    g = tiny_graph(
        nodes={"a": 1.0, "b": 1.0, "c": 1.0},
        edges={("a", "c"): 1.0, ("b", "c"): 3.0},
    )
    ids = sorted(g.nodes)
    a_in, a_out = aggregation_matrices(g, ids)
    c = ids.index("c")
    assert a_in[c, ids.index("a")] == pytest.approx(0.25)
    assert a_in[c, ids.index("b")] == pytest.approx(0.75)
    h = np.array([[1.0, 10.0], [2.0, 20.0], [0.0, 0.0]])
    h_in = a_in @ h
    assert np.allclose(h_in[c], (1.0 * h[0] + 3.0 * h[1]) / 4.0)


def test_aggregation_single_neighbor_is_identity_mix():
    g = tiny_graph(nodes={"a": 1.0, "b": 1.0}, edges={("a", "b"): 7.0})
    ids = sorted(g.nodes)
    a_in, a_out = aggregation_matrices(g, ids)
    assert a_in[1].tolist() == [1.0, 0.0]
    assert a_out[0].tolist() == [0.0, 1.0]


def test_aggregation_isolated_rows_stay_zero():
    g = tiny_graph(nodes={"a": 1.0, "b": 1.0, "c": 1.0}, edges={("a", "b"): 2.0})
    ids = sorted(g.nodes)
    a_in, a_out = aggregation_matrices(g, ids)
    for mat in (a_in, a_out):
        sums = mat.sum(axis=1)
        assert all(s == 0.0 or abs(s - 1.0) < 1e-12 for s in sums)
    assert a_in[2].sum() == 0.0 and a_out[2].sum() == 0.0
