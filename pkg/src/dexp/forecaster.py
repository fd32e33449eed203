"""Multi-task graph forecaster.

A structural-feature MLP encoder produces node embeddings; a pairwise link
head scores edge existence and a log-weight residual; a node head predicts
the TVL log-delta from the embedding plus weighted neighbor aggregates.
Training is hand-derived reverse mode over the whole composition, one Adam
step per anchor week with the loss averaged over that anchor's horizons.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientHistory,
    InvalidConfig,
    NonFiniteLoss,
    NoPositives,
    UnknownHorizon,
    UnknownProtocol,
)
from .evaluation import auprc
from .features import DEFAULT_CATEGORIES, FeatureSpec, aggregation_matrices, node_features
from .graph import ExposureGraph
from .nn import Adam, Mlp, bce_with_logits, clip_gradients, sigmoid, smooth_l1
from .sampling import Fold, eval_sample_seed, forecast_pairs, negative_sample

PROB_EPS = 1e-15
PERSISTENCE_EPS = 1e-6
EDGE_THRESHOLD = 0.5


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults are the published protocol."""

    horizons: tuple[int, ...] = (1, 4, 8, 12)
    embed_dim: int = 64
    encoder_hidden: tuple[int, ...] = (128, 64)
    link_hidden: tuple[int, ...] = (256, 64)
    node_hidden: tuple[int, ...] = (128, 32)
    neg_ratio: int = 5
    pos_weight: float = 5.0
    lambda_exist: float = 2.0
    lambda_weight: float = 0.5
    lambda_node: float = 20.0
    lr_heads: float = 5e-4
    lr_encoder: float = 5e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip_l2: float = 1.0
    max_epochs: int = 20
    patience: int = 3
    smooth_l1_delta: float = 1.0
    seed: int = 7

    def __post_init__(self):
        self.horizons = tuple(int(h) for h in self.horizons)
        self.encoder_hidden = tuple(int(v) for v in self.encoder_hidden)
        self.link_hidden = tuple(int(v) for v in self.link_hidden)
        self.node_hidden = tuple(int(v) for v in self.node_hidden)
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise InvalidConfig("horizons must be a non-empty set of positive ints")
        positive = (
            self.embed_dim,
            self.neg_ratio,
            self.pos_weight,
            self.lambda_exist,
            self.lambda_weight,
            self.lambda_node,
            self.lr_heads,
            self.lr_encoder,
            self.grad_clip_l2,
            self.max_epochs,
            self.patience,
            self.smooth_l1_delta,
        )
        if any(v <= 0 for v in positive):
            raise InvalidConfig("all training hyperparameters must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("horizons", "encoder_hidden", "link_hidden", "node_hidden"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidConfig(f"unknown training config keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class ForecastBundle:
    """One model's view of week t+h made at week t."""

    horizon: int
    edge_prob: dict[tuple[str, str], float]
    edge_logweight: dict[tuple[str, str], float]
    node_delta: dict[str, float]


def pairwise_features(h_p: np.ndarray, h_q: np.ndarray) -> np.ndarray:
    """[h_p; h_q; h_p*h_q; |h_p-h_q|] for a single embedding pair."""
    h_p = np.asarray(h_p, dtype=float)
    h_q = np.asarray(h_q, dtype=float)
    if h_p.shape != h_q.shape:
        raise DimensionMismatch(f"embedding dims differ: {h_p.shape} vs {h_q.shape}")
    return np.concatenate([h_p, h_q, h_p * h_q, np.abs(h_p - h_q)])


def reconstruct_edge_logweight(w_now_log1p: float, residual: float) -> float:
    return w_now_log1p + residual


def _pair_matrix(h_a: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    return np.concatenate([h_a, h_b, h_a * h_b, np.abs(h_a - h_b)], axis=1)


@dataclass
class _AnchorData:
    """Everything about one anchor week that never changes across epochs."""

    ids: list[str]
    index: dict[str, int]
    x: np.ndarray
    a_in: np.ndarray
    a_out: np.ndarray
    graph: ExposureGraph


@dataclass
class _HorizonTargets:
    """Per (anchor, horizon) supervision; negatives are resampled per epoch."""

    horizon: int
    positives: list[tuple[str, str]]
    w_target_pos: np.ndarray
    common: list[str]
    node_idx: np.ndarray
    node_target: np.ndarray


def build_horizon_targets(
    g_anchor: ExposureGraph,
    g_target: ExposureGraph,
    index: dict[str, int],
    horizon: int,
) -> _HorizonTargets | None:
    common = sorted(set(g_anchor.nodes) & set(g_target.nodes))
    if not common:
        return None
    common_set = set(common)
    positives = sorted(
        (a, b) for (a, b) in g_target.edges if a in common_set and b in common_set
    )
    w_target = np.array(
        [
            math.log1p(g_target.edges[p]) - math.log1p(g_anchor.edges.get(p, 0.0))
            for p in positives
        ]
    )
    node_idx = np.array([index[p] for p in common], dtype=int)
    node_target = np.array(
        [math.log1p(g_target.nodes[p]) - math.log1p(g_anchor.nodes[p]) for p in common]
    )
    return _HorizonTargets(horizon, positives, w_target, common, node_idx, node_target)


class Forecaster:
    def __init__(self, config: TrainConfig, categories: list[str] | None = None):
        self.config = config
        self.spec = FeatureSpec(
            list(categories) if categories is not None else list(DEFAULT_CATEGORIES)
        )
        d = config.embed_dim
        rng = np.random.default_rng(config.seed)
        # construction order fixes the parameter init stream
        self.encoder = Mlp([self.spec.dim, *config.encoder_hidden, d], rng)
        self.link_head = Mlp([4 * d, *config.link_hidden, 2], rng)
        self.node_head = Mlp([3 * d, *config.node_hidden, 1], rng)
        self.mu = np.zeros(self.spec.dim)
        self.sd = np.ones(self.spec.dim)
        self.history: list[dict] = []

    # -- parameter plumbing ------------------------------------------------

    def _params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.link_head.params() + self.node_head.params()

    def _grads(self) -> list[np.ndarray]:
        return self.encoder.grads() + self.link_head.grads() + self.node_head.grads()

    def _lrs(self) -> list[float]:
        n_enc = len(self.encoder.params())
        n_heads = len(self.link_head.params()) + len(self.node_head.params())
        return [self.config.lr_encoder] * n_enc + [self.config.lr_heads] * n_heads

    def _zero_grad(self) -> None:
        self.encoder.zero_grad()
        self.link_head.zero_grad()
        self.node_head.zero_grad()

    def _snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self._params()]

    def _restore(self, saved: list[np.ndarray]) -> None:
        for p, s in zip(self._params(), saved):
            p[:] = s

    # -- features ----------------------------------------------------------

    def fit_normalizer(self, matrices: list[np.ndarray]) -> None:
        stacked = np.concatenate([m for m in matrices if m.size], axis=0)
        self.mu = stacked.mean(axis=0)
        sd = stacked.std(axis=0)
        sd[sd < 1e-12] = 1.0
        self.sd = sd

    def _anchor_data(
        self,
        g: ExposureGraph,
        holdings: dict[str, dict[str, float]] | None,
        category_of: dict[str, str] | None,
    ) -> _AnchorData:
        ids, x = node_features(g, holdings, self.spec, category_of)
        xn = (x - self.mu) / self.sd
        a_in, a_out = aggregation_matrices(g, ids)
        return _AnchorData(ids, {p: i for i, p in enumerate(ids)}, xn, a_in, a_out, g)

    # -- loss and hand-derived gradients ------------------------------------

    def _anchor_step(
        self,
        data: _AnchorData,
        batches: list[tuple[_HorizonTargets, list[tuple[str, str]]]],
        adam: Adam | None,
    ) -> dict[str, float]:
        """Forward + backward over one anchor week; Adam step if given.

        The loss is the horizon-mean of λe*L_exist + λw*L_weight + λn*L_node.
        """
        cfg = self.config
        d = cfg.embed_dim
        n_h = len(batches)
        if n_h == 0:
            return {"loss": 0.0, "l_exist": 0.0, "l_weight": 0.0, "l_node": 0.0}
        scale = 1.0 / n_h

        self._zero_grad()
        h_mat, enc_acts = self.encoder.forward(data.x)
        h_in = data.a_in @ h_mat
        h_out = data.a_out @ h_mat
        node_in = np.concatenate([h_mat, h_in, h_out], axis=1)
        node_out, node_acts = self.node_head.forward(node_in)
        node_pred = node_out[:, 0]

        d_h = np.zeros_like(h_mat)
        d_node_out = np.zeros_like(node_out)
        tot = te = tw = tn = 0.0

        for targets, candidates in batches:
            l_e = l_w = 0.0
            if candidates:
                ia = np.array([data.index[a] for a, _ in candidates], dtype=int)
                ib = np.array([data.index[b] for _, b in candidates], dtype=int)
                n_pos = len(targets.positives)
                labels = np.zeros(len(candidates))
                labels[:n_pos] = 1.0
                h_a = h_mat[ia]
                h_b = h_mat[ib]
                feats = _pair_matrix(h_a, h_b)
                link_out, link_acts = self.link_head.forward(feats)
                l_e, d_logit = bce_with_logits(
                    link_out[:, 0], labels, pos_weight=cfg.pos_weight
                )
                d_link = np.zeros_like(link_out)
                d_link[:, 0] = scale * cfg.lambda_exist * d_logit
                if n_pos:
                    l_w, d_resid = smooth_l1(
                        link_out[:n_pos, 1], targets.w_target_pos, cfg.smooth_l1_delta
                    )
                    d_link[:n_pos, 1] = scale * cfg.lambda_weight * d_resid
                d_feats = self.link_head.backward(link_acts, d_link)
                sign = np.sign(h_a - h_b)
                d_ha = d_feats[:, :d] + d_feats[:, 2 * d : 3 * d] * h_b + d_feats[:, 3 * d :] * sign
                d_hb = d_feats[:, d : 2 * d] + d_feats[:, 2 * d : 3 * d] * h_a - d_feats[:, 3 * d :] * sign
                np.add.at(d_h, ia, d_ha)
                np.add.at(d_h, ib, d_hb)

            l_n, d_node = smooth_l1(
                node_pred[targets.node_idx], targets.node_target, cfg.smooth_l1_delta
            )
            np.add.at(
                d_node_out[:, 0], targets.node_idx, scale * cfg.lambda_node * d_node
            )

            tot += scale * (
                cfg.lambda_exist * l_e + cfg.lambda_weight * l_w + cfg.lambda_node * l_n
            )
            te += scale * l_e
            tw += scale * l_w
            tn += scale * l_n

        d_node_in = self.node_head.backward(node_acts, d_node_out)
        d_h += d_node_in[:, :d]
        d_h += data.a_in.T @ d_node_in[:, d : 2 * d]
        d_h += data.a_out.T @ d_node_in[:, 2 * d :]
        self.encoder.backward(enc_acts, d_h)

        if not math.isfinite(tot):
            raise NonFiniteLoss(
                f"anchor week {data.graph.week}: loss={tot} "
                f"(exist={te}, weight={tw}, node={tn})"
            )
        if adam is not None:
            clip_gradients(self._grads(), cfg.grad_clip_l2)
            adam.step(self._params(), self._grads())
        return {"loss": tot, "l_exist": te, "l_weight": tw, "l_node": tn}

    # -- training ------------------------------------------------------------

    def train(
        self,
        graphs: list[ExposureGraph],
        holdings: list[dict[str, dict[str, float]] | None],
        fold: Fold,
        category_of: dict[str, str] | None = None,
    ) -> list[dict]:
        """Walk one fold: per-anchor Adam steps, early stop on val AUPRC."""
        cfg = self.config
        train_pairs = forecast_pairs(cfg.horizons, fold.train)
        val_pairs = forecast_pairs(cfg.horizons, fold.val)
        if not train_pairs:
            raise InsufficientHistory(
                f"training window {fold.train} has no (anchor, horizon) pairs"
            )

        anchors = sorted({t for t, _ in train_pairs})
        feats = []
        for t in anchors:
            _, x = node_features(graphs[t], holdings[t], self.spec, category_of)
            feats.append(x)
        self.fit_normalizer(feats)

        cache: dict[int, _AnchorData] = {}
        for t in sorted({t for t, _ in train_pairs} | {t for t, _ in val_pairs}):
            cache[t] = self._anchor_data(graphs[t], holdings[t], category_of)

        targets: dict[tuple[int, int], _HorizonTargets] = {}
        for t, h in train_pairs:
            built = build_horizon_targets(graphs[t], graphs[t + h], cache[t].index, h)
            if built is not None:
                targets[(t, h)] = built

        # fixed validation candidate sets, one seed per (anchor, horizon)
        val_sets = []
        for t, h in val_pairs:
            built = build_horizon_targets(graphs[t], graphs[t + h], cache[t].index, h)
            if built is None:
                continue
            negatives = negative_sample(
                set(built.positives), built.common, cfg.neg_ratio,
                eval_sample_seed(cfg.seed, t, h),
            )
            candidates = built.positives + negatives
            if not candidates:
                continue
            labels = np.zeros(len(candidates))
            labels[: len(built.positives)] = 1.0
            ia = np.array([cache[t].index[a] for a, _ in candidates], dtype=int)
            ib = np.array([cache[t].index[b] for _, b in candidates], dtype=int)
            val_sets.append((t, ia, ib, labels))

        adam = Adam(
            self._params(), self._lrs(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
        )
        self.history = []
        best_score = -math.inf
        best_params = self._snapshot()
        stall = 0

        for epoch in range(cfg.max_epochs):
            epoch_loss = 0.0
            n_steps = 0
            for t in anchors:
                batches = []
                for h in sorted(cfg.horizons):
                    built = targets.get((t, h))
                    if built is None:
                        continue
                    negatives = negative_sample(
                        set(built.positives), built.common, cfg.neg_ratio,
                        np.random.SeedSequence([cfg.seed, epoch, t, h]),
                    )
                    batches.append((built, built.positives + negatives))
                if not batches:
                    continue
                stats = self._anchor_step(cache[t], batches, adam)
                epoch_loss += stats["loss"]
                n_steps += 1

            val_score = self._val_auprc(cache, val_sets)
            improved = val_score > best_score
            self.history.append(
                {
                    "epoch": epoch,
                    "train_loss": epoch_loss / max(n_steps, 1),
                    "val_auprc": val_score,
                    "improved": improved,
                }
            )
            if improved:
                best_score = val_score
                best_params = self._snapshot()
                stall = 0
            else:
                stall += 1
                if stall >= cfg.patience:
                    break

        self._restore(best_params)
        return self.history

    def _val_auprc(self, cache: dict[int, _AnchorData], val_sets) -> float:
        if not val_sets:
            return 0.0
        scores: list[np.ndarray] = []
        labels: list[np.ndarray] = []
        h_cache: dict[int, np.ndarray] = {}
        for t, ia, ib, y in val_sets:
            if t not in h_cache:
                h_cache[t] = self.encoder.forward(cache[t].x)[0]
            h_mat = h_cache[t]
            feats = _pair_matrix(h_mat[ia], h_mat[ib])
            logits = self.link_head.forward(feats)[0][:, 0]
            scores.append(logits)
            labels.append(y)
        try:
            return auprc(np.concatenate(scores), np.concatenate(labels))
        except NoPositives:
            return 0.0

    # -- inference -----------------------------------------------------------

    def predict(
        self,
        g: ExposureGraph,
        holdings: dict[str, dict[str, float]] | None,
        horizon: int,
        candidate_pairs,
        category_of: dict[str, str] | None = None,
    ) -> ForecastBundle:
        cfg = self.config
        if horizon not in cfg.horizons:
            raise UnknownHorizon(f"horizon {horizon} not in configured {cfg.horizons}")
        data = self._anchor_data(g, holdings, category_of)
        h_mat = self.encoder.forward(data.x)[0]
        h_in = data.a_in @ h_mat
        h_out = data.a_out @ h_mat
        node_out = self.node_head.forward(
            np.concatenate([h_mat, h_in, h_out], axis=1)
        )[0][:, 0]
        node_delta = {p: float(node_out[i]) for i, p in enumerate(data.ids)}

        pairs = sorted(set(tuple(p) for p in candidate_pairs))
        edge_prob: dict[tuple[str, str], float] = {}
        edge_logweight: dict[tuple[str, str], float] = {}
        if pairs:
            for a, b in pairs:
                if a not in data.index or b not in data.index:
                    raise UnknownProtocol(f"candidate ({a}, {b}) outside graph nodes")
            ia = np.array([data.index[a] for a, _ in pairs], dtype=int)
            ib = np.array([data.index[b] for _, b in pairs], dtype=int)
            out = self.link_head.forward(_pair_matrix(h_mat[ia], h_mat[ib]))[0]
            probs = np.clip(sigmoid(out[:, 0]), PROB_EPS, 1.0 - PROB_EPS)
            for k, pair in enumerate(pairs):
                edge_prob[pair] = float(probs[k])
                edge_logweight[pair] = reconstruct_edge_logweight(
                    math.log1p(g.edges.get(pair, 0.0)), float(out[k, 1])
                )
        return ForecastBundle(horizon, edge_prob, edge_logweight, node_delta)


def persistence_predict(
    g: ExposureGraph, horizon: int, candidate_pairs=None
) -> ForecastBundle:
    """Carry-forward baseline: the week-t graph is the forecast."""
    pairs = (
        sorted(set(tuple(p) for p in candidate_pairs))
        if candidate_pairs is not None
        else sorted(g.edges)
    )
    edge_prob = {}
    edge_logweight = {}
    for pair in pairs:
        w = g.edges.get(pair, 0.0)
        edge_prob[pair] = 1.0 - PERSISTENCE_EPS if w > 0.0 else PERSISTENCE_EPS
        edge_logweight[pair] = math.log1p(w)
    return ForecastBundle(
        horizon, edge_prob, edge_logweight, {p: 0.0 for p in g.nodes}
    )


def materialize_predicted_graph(
    g: ExposureGraph, bundle: ForecastBundle, threshold: float = EDGE_THRESHOLD
) -> ExposureGraph:
    """Discretize a forecast bundle into a graph for downstream metrics.

    Edges survive above the probability threshold with expm1-reconstructed
    weights; node weights apply the predicted log-delta to the origin TVL,
    floored at zero.
    """
    nodes = {}
    for p, tvl in g.nodes.items():
        logw = math.log1p(tvl) + bundle.node_delta.get(p, 0.0)
        nodes[p] = math.expm1(max(0.0, logw))
    edges = {}
    for pair, prob in bundle.edge_prob.items():
        if prob > threshold:
            w = math.expm1(max(0.0, bundle.edge_logweight[pair]))
            if w > 0.0:
                edges[pair] = w
    return ExposureGraph(
        interval=(g.week, g.week + bundle.horizon),
        nodes=nodes,
        edges=edges,
        categories=dict(g.categories),
    )


# -------------------------------------------------------------------------
# checkpoints
# -------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def _mlp_state(mlp: Mlp) -> dict:
    return {
        "dims": list(mlp.dims),
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def _load_mlp_state(mlp: Mlp, state: dict) -> None:
    if list(mlp.dims) != list(state["dims"]):
        raise InvalidConfig(
            f"checkpoint layer dims {state['dims']} != configured {mlp.dims}"
        )
    for w, saved in zip(mlp.weights, state["weights"]):
        w[:] = np.array(saved, dtype=float)
    for b, saved in zip(mlp.biases, state["biases"]):
        b[:] = np.array(saved, dtype=float)


def save_checkpoint(model: Forecaster, path) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "categories": list(model.spec.categories),
        "normalizer": {"mu": model.mu.tolist(), "sd": model.sd.tolist()},
        "encoder": _mlp_state(model.encoder),
        "link_head": _mlp_state(model.link_head),
        "node_head": _mlp_state(model.node_head),
        "history": model.history,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_checkpoint(path) -> Forecaster:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InvalidConfig(f"unsupported checkpoint version {payload.get('version')}")
    config = TrainConfig.from_dict(payload["config"])
    model = Forecaster(config, categories=payload["categories"])
    model.mu = np.array(payload["normalizer"]["mu"], dtype=float)
    model.sd = np.array(payload["normalizer"]["sd"], dtype=float)
    _load_mlp_state(model.encoder, payload["encoder"])
    _load_mlp_state(model.link_head, payload["link_head"])
    _load_mlp_state(model.node_head, payload["node_head"])
    model.history = payload.get("history", [])
    return model
