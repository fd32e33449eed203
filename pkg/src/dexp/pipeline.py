"""Artifact pipeline: stage commands over a shared output directory.

Each stage reads the files earlier stages wrote and writes its own, so
stages can rerun independently from the CLI. A missing upstream file
raises MissingArtifact naming the path instead of silently recomputing.
Stage order: synth, map, build, metrics, stress, train, evaluate,
forecast-measure (build needs the token mapping, so map precedes it).
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .contagion import (
    ScenarioSpec,
    canonical_scenarios,
    result_to_dict,
    run_scenario,
    scenario_from_dict,
)
from .errors import EmptySelection, InvalidConfig, MissingArtifact, MissingCategory
from .evaluation import (
    CALIBRATION_METRICS,
    calibration_correlations,
    collect_stress_records,
    evaluate_task1,
    evaluate_task2,
    risk_metric_calibration,
)
from .forecaster import (
    Forecaster,
    TrainConfig,
    load_checkpoint,
    materialize_predicted_graph,
    persistence_predict,
    save_checkpoint,
)
from .graph import (
    load_graph,
    load_snapshots,
    save_graph,
    save_snapshots,
    sequence_from_snapshots,
)
from .mapper import (
    build_tfidf,
    issuer_map,
    load_manual_map,
    load_mapping,
    load_token_metas,
    map_tokens,
    save_manual_map,
    save_mapping,
    save_token_metas,
)
from .risk import build_risk_report, early_warning, report_scalar_rows, report_to_dict
from .sampling import Fold, eval_sample_seed, forecast_pairs, negative_sample, walk_forward_split
from .synth import SynthConfig, generate

log = logging.getLogger("dexp.pipeline")

CANDIDATE_MODES = ("all", "sampled")


# -------------------------------------------------------------------------
# configuration
# -------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    out_dir: Path = Path("artifacts")
    seed: int = 7
    build_theta: float = 0.0
    map_theta: float = 0.3
    sis_k: int = 5
    tau: float = 0.1
    scenarios: list[ScenarioSpec] = field(default_factory=list)
    candidate_mode: str = "sampled"
    neg_ratio_eval: int = 5
    split_train_min: int = 40
    split_val_len: int = 8
    split_test_len: int = 11
    split_step: int = 8
    serve_port: int = 8787
    train: TrainConfig | None = None
    synth: SynthConfig | None = None

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.train is None:
            self.train = TrainConfig(seed=self.seed)
        if self.synth is None:
            self.synth = SynthConfig(seed=self.seed)
        if not self.scenarios:
            self.scenarios = canonical_scenarios(self.tau)
        if self.candidate_mode not in CANDIDATE_MODES:
            raise InvalidConfig(
                f"candidate_mode must be one of {CANDIDATE_MODES}, "
                f"got {self.candidate_mode!r}"
            )


_SECTIONS = {
    "synth": {f.name for f in fields(SynthConfig)} - {"seed"},
    "build": {"theta"},
    "map": {"theta"},
    "metrics": {"sis_k"},
    "stress": {"tau", "scenarios"},
    "train": {f.name for f in fields(TrainConfig)} - {"seed"},
    "split": {"train_min", "val_len", "test_len", "step"},
    "evaluate": {"candidate_mode", "neg_ratio"},
    "serve": {"port"},
}
_TOP_KEYS = {"seed", "out_dir"} | set(_SECTIONS)


def _section(raw: dict, name: str) -> dict:
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise InvalidConfig(f"[{name}] must be a table")
    extra = sorted(set(data) - _SECTIONS[name])
    if extra:
        raise InvalidConfig(f"unknown key(s) in [{name}]: {', '.join(extra)}")
    return dict(data)


def load_config(
    path: str | Path | None = None,
    seed: int | None = None,
    out_dir: str | Path | None = None,
) -> PipelineConfig:
    """Parse a TOML config; CLI seed/out_dir overrides win over the file."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InvalidConfig(f"config file not found: {p}")
        try:
            raw = tomllib.loads(p.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise InvalidConfig(f"bad TOML in {p}: {exc}") from exc
    extra = sorted(set(raw) - _TOP_KEYS)
    if extra:
        raise InvalidConfig(f"unknown top-level key(s): {', '.join(extra)}")

    seed_val = int(seed if seed is not None else raw.get("seed", 7))
    out_val = Path(out_dir if out_dir is not None else raw.get("out_dir", "artifacts"))

    synth_kw = _section(raw, "synth")
    if "shift_weeks" in synth_kw:
        synth_kw["shift_weeks"] = tuple(synth_kw["shift_weeks"])
    train_kw = _section(raw, "train")
    build_kw = _section(raw, "build")
    map_kw = _section(raw, "map")
    metrics_kw = _section(raw, "metrics")
    stress_kw = _section(raw, "stress")
    split_kw = _section(raw, "split")
    eval_kw = _section(raw, "evaluate")
    serve_kw = _section(raw, "serve")

    tau = float(stress_kw.get("tau", 0.1))
    scenarios = []
    for entry in stress_kw.get("scenarios", []):
        d = dict(entry)
        d.setdefault("tau", tau)
        scenarios.append(scenario_from_dict(d))

    try:
        return PipelineConfig(
            out_dir=out_val,
            seed=seed_val,
            build_theta=float(build_kw.get("theta", 0.0)),
            map_theta=float(map_kw.get("theta", 0.3)),
            sis_k=int(metrics_kw.get("sis_k", 5)),
            tau=tau,
            scenarios=scenarios,
            candidate_mode=str(eval_kw.get("candidate_mode", "sampled")),
            neg_ratio_eval=int(eval_kw.get("neg_ratio", 5)),
            split_train_min=int(split_kw.get("train_min", 40)),
            split_val_len=int(split_kw.get("val_len", 8)),
            split_test_len=int(split_kw.get("test_len", 11)),
            split_step=int(split_kw.get("step", 8)),
            serve_port=int(serve_kw.get("port", 8787)),
            train=TrainConfig(seed=seed_val, **train_kw),
            synth=SynthConfig(seed=seed_val, **synth_kw),
        )
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc


# -------------------------------------------------------------------------
# artifact layout and io helpers
# -------------------------------------------------------------------------


class ArtifactLayout:
    """Canonical file locations under one output root."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.snapshots = self.root / "snapshots.jsonl"
        self.tokens = self.root / "tokens.jsonl"
        self.manual_map = self.root / "manual_map.csv"
        self.protocols = self.root / "protocols.json"
        self.synth_stats = self.root / "synth_stats.json"
        self.mapping = self.root / "mapping.csv"
        self.graphs_dir = self.root / "graphs"
        self.graph_index = self.graphs_dir / "index.json"
        self.metrics_dir = self.root / "metrics"
        self.risk_json = self.metrics_dir / "risk.json"
        self.risk_csv = self.metrics_dir / "risk.csv"
        self.warnings_json = self.metrics_dir / "warnings.json"
        self.stress_dir = self.root / "stress"
        self.stress_json = self.stress_dir / "observed.json"
        self.stress_csv = self.stress_dir / "observed.csv"
        self.model_dir = self.root / "model"
        self.checkpoint = self.model_dir / "checkpoint.json"
        self.history = self.model_dir / "history.json"
        self.fold_json = self.model_dir / "fold.json"
        self.eval_dir = self.root / "eval"
        self.task1_csv = self.eval_dir / "task1.csv"
        self.task2_csv = self.eval_dir / "task2.csv"
        self.stress_records_csv = self.eval_dir / "stress_records.csv"
        self.eval_summary = self.eval_dir / "summary.json"
        self.forecast_dir = self.root / "forecast"
        self.dashboard = self.forecast_dir / "dashboard.json"

    def graph_file(self, week: int) -> Path:
        return self.graphs_dir / f"week_{week:03d}.json"

    def forecast_graph(self, horizon: int) -> Path:
        return self.forecast_dir / f"predicted_h{horizon}.json"

    def calibration_csv(self, horizon: int) -> Path:
        return self.eval_dir / f"calibration_h{horizon}.csv"


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(str(path))
    return path


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _read_json(path: Path):
    with open(_require(path), encoding="utf-8") as fh:
        return json.load(fh)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def load_categories(layout: ArtifactLayout) -> dict[str, str]:
    protocols = _read_json(layout.protocols)
    return {pid: rec["category"] for pid, rec in protocols.items()}


def load_graph_series(layout: ArtifactLayout) -> list:
    index = _read_json(layout.graph_index)
    return [load_graph(_require(layout.graph_file(w))) for w in index["weeks"]]


def load_holdings_series(layout: ArtifactLayout, graphs) -> list:
    snapshots = load_snapshots(_require(layout.snapshots))
    by_week = {s.week: s.holdings for s in snapshots}
    # node weights of graph (t1, t2) are priced at t2, so features join there
    return [by_week.get(g.week) for g in graphs]


# -------------------------------------------------------------------------
# candidate generation (shared by evaluate, forecast-measure and the API)
# -------------------------------------------------------------------------


def candidate_pairs(
    g,
    mode: str,
    neg_ratio: int,
    seed: int,
    anchor_idx: int,
    horizon: int,
) -> list[tuple[str, str]]:
    """Ordered pairs to score when materializing a predicted graph."""
    if mode not in CANDIDATE_MODES:
        raise InvalidConfig(f"unknown candidate mode {mode!r}")
    nodes = sorted(g.nodes)
    if mode == "all":
        return [(a, b) for a in nodes for b in nodes if a != b]
    negs = negative_sample(
        set(g.edges), nodes, neg_ratio, eval_sample_seed(seed, anchor_idx, horizon)
    )
    return sorted(set(g.edges) | set(negs))


def predict_graph(
    model: Forecaster,
    graphs,
    holdings,
    category_of: dict[str, str],
    anchor_idx: int,
    horizon: int,
    mode: str,
    neg_ratio: int,
    seed: int,
):
    """Score candidates from the anchor week and discretize into a graph."""
    g = graphs[anchor_idx]
    cands = candidate_pairs(g, mode, neg_ratio, seed, anchor_idx, horizon)
    bundle = model.predict(g, holdings[anchor_idx], horizon, cands, category_of)
    return materialize_predicted_graph(g, bundle)


# -------------------------------------------------------------------------
# stage commands
# -------------------------------------------------------------------------


def cmd_synth(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    lay.root.mkdir(parents=True, exist_ok=True)
    res = generate(cfg.synth)
    save_snapshots(res.snapshots, lay.snapshots)
    save_token_metas(res.metas, lay.tokens)
    save_manual_map(res.manual_map, lay.manual_map)
    protocols = {
        p: {
            "name": res.names[p],
            "category": res.categories[p],
            "chain": res.chains[p],
        }
        for p in sorted(res.names)
    }
    _write_json(lay.protocols, protocols)
    _write_json(lay.synth_stats, res.stats)
    log.info(
        "synth: %d weeks, %d protocols, variant=%s",
        cfg.synth.n_weeks,
        cfg.synth.n_protocols,
        cfg.synth.variant,
    )
    return res.stats


def cmd_map(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    metas = load_token_metas(_require(lay.tokens))
    manual = load_manual_map(_require(lay.manual_map))
    protocols = _read_json(lay.protocols)
    snapshots = load_snapshots(_require(lay.snapshots))
    corpus = {
        pid: f"{rec['name']} {rec['category']} {rec['chain']}"
        for pid, rec in protocols.items()
    }
    model = build_tfidf(corpus)
    token_ids = set(metas)
    for snap in snapshots:
        for holdings in snap.holdings.values():
            token_ids.update(holdings)
    entries = map_tokens(sorted(token_ids), metas, manual, model, cfg.map_theta)
    save_mapping(entries, lay.mapping)
    counts = Counter(e.provenance for e in entries.values())
    summary = {"n_tokens": len(entries), "provenance": dict(sorted(counts.items()))}
    log.info("map: %s", summary)
    return summary


def cmd_build(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    snapshots = load_snapshots(_require(lay.snapshots))
    issuer_of = issuer_map(load_mapping(_require(lay.mapping)))
    graphs = sequence_from_snapshots(snapshots, issuer_of, cfg.build_theta)
    lay.graphs_dir.mkdir(parents=True, exist_ok=True)
    for g in graphs:
        save_graph(g, lay.graph_file(g.week))
    index = {
        "theta": cfg.build_theta,
        "weeks": [g.week for g in graphs],
        "intervals": [[g.interval[0], g.interval[1]] for g in graphs],
    }
    _write_json(lay.graph_index, index)
    log.info("build: %d graphs, theta=%s", len(graphs), cfg.build_theta)
    return index


def cmd_metrics(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    graphs = load_graph_series(lay)
    cats = load_categories(lay)
    reports = [build_risk_report(g, cats, k=cfg.sis_k) for g in graphs]
    _write_json(lay.risk_json, [report_to_dict(r) for r in reports])
    rows = [row for r in reports for row in report_scalar_rows(r)]
    _write_csv(lay.risk_csv, ["week", "metric", "value"], rows)
    series = [(r.week, r.tvl_hhi) for r in reports if r.tvl_hhi is not None]
    flags = early_warning(series) if series else []
    _write_json(lay.warnings_json, [{"week": w, "flagged": f} for w, f in flags])
    flagged = [w for w, f in flags if f]
    log.info("metrics: %d weeks, %d early warnings", len(reports), len(flagged))
    return {"n_weeks": len(reports), "flagged_weeks": flagged}


def cmd_stress(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    graphs = load_graph_series(lay)
    cats = load_categories(lay)
    results = []
    skipped = 0
    for g in graphs:
        for spec in cfg.scenarios:
            try:
                results.append(run_scenario(g, spec, cats))
            except (EmptySelection, MissingCategory):
                skipped += 1
    payload = [result_to_dict(r) for r in results]
    _write_json(lay.stress_json, payload)
    _write_csv(
        lay.stress_csv,
        [
            "week",
            "scenario",
            "system_loss_usd",
            "system_loss_pct",
            "depth",
            "affected",
            "distressed",
        ],
        [
            (
                r.week,
                r.scenario,
                round(r.system_loss_usd, 6),
                r.system_loss_pct,
                r.depth,
                r.affected,
                r.distressed,
            )
            for r in results
        ],
    )
    log.info("stress: %d runs, %d skipped", len(results), skipped)
    return {"n_runs": len(results), "n_skipped": skipped}


def _split_fold(cfg: PipelineConfig, n_graphs: int) -> Fold:
    folds = walk_forward_split(
        n_graphs,
        cfg.split_train_min,
        cfg.split_val_len,
        cfg.split_test_len,
        cfg.split_step,
    )
    # the last fold has the longest training window
    return folds[-1]


def cmd_train(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    graphs = load_graph_series(lay)
    cats = load_categories(lay)
    holdings = load_holdings_series(lay, graphs)
    fold = _split_fold(cfg, len(graphs))
    model = Forecaster(cfg.train, categories=sorted(set(cats.values())))
    history = model.train(graphs, holdings, fold, cats)
    lay.model_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, lay.checkpoint)
    _write_json(lay.history, history)
    _write_json(
        lay.fold_json,
        {
            "train": [fold.train.start, fold.train.stop],
            "val": [fold.val.start, fold.val.stop],
            "test": [fold.test.start, fold.test.stop],
        },
    )
    best = max(h["val_auprc"] for h in history)
    log.info("train: %d epochs, best val auprc %.4f", len(history), best)
    return {"epochs": len(history), "best_val_auprc": best}


def _load_fold(lay: ArtifactLayout) -> Fold:
    payload = _read_json(lay.fold_json)
    return Fold(
        train=range(*payload["train"]),
        val=range(*payload["val"]),
        test=range(*payload["test"]),
    )


def _metric_cell(value):
    return None if value is None else round(value, 10)


def cmd_evaluate(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    graphs = load_graph_series(lay)
    cats = load_categories(lay)
    holdings = load_holdings_series(lay, graphs)
    model = load_checkpoint(_require(lay.checkpoint))
    fold = _load_fold(lay)
    pairs = forecast_pairs(model.config.horizons, fold.test)

    def model_scorer(t, h, cands):
        return model.predict(graphs[t], holdings[t], h, cands, cats)

    def persistence_scorer(t, h, cands):
        return persistence_predict(graphs[t], h, cands)

    scorers = {"model": model_scorer, "persistence": persistence_scorer}
    task1 = evaluate_task1(scorers, graphs, pairs, cfg.neg_ratio_eval, cfg.seed)
    _write_csv(
        lay.task1_csv,
        [
            "model",
            "horizon",
            "auroc",
            "auprc",
            "mae_w",
            "rmse_w",
            "mae_n",
            "rmse_n",
            "n_pairs",
            "n_edges",
        ],
        [
            (
                m.model,
                m.horizon,
                _metric_cell(m.auroc),
                _metric_cell(m.auprc),
                _metric_cell(m.mae_w),
                _metric_cell(m.rmse_w),
                _metric_cell(m.mae_n),
                _metric_cell(m.rmse_n),
                m.n_pairs,
                m.n_edges,
            )
            for m in task1
        ],
    )

    predicted = {
        (t, h): predict_graph(
            model, graphs, holdings, cats, t, h,
            cfg.candidate_mode, cfg.neg_ratio_eval, cfg.seed,
        )
        for t, h in pairs
    }
    records = collect_stress_records(graphs, predicted, pairs, cfg.scenarios, cats)
    task2 = evaluate_task2(records)
    _write_csv(
        lay.stress_records_csv,
        ["anchor_week", "horizon", "scenario", "loss_baseline", "loss_model", "loss_realized"],
        [
            (r.anchor_week, r.horizon, r.scenario, r.loss_baseline, r.loss_model, r.loss_realized)
            for r in records
        ],
    )
    _write_csv(
        lay.task2_csv,
        ["horizon", "n_records", "n_worst", "delta_mae_all", "delta_mae_worst", "win_rate_worst"],
        [
            (
                s.horizon,
                s.n_records,
                s.n_worst,
                _metric_cell(s.delta_mae_all),
                _metric_cell(s.delta_mae_worst),
                _metric_cell(s.win_rate_worst),
            )
            for s in task2
        ],
    )

    calib = risk_metric_calibration(predicted, graphs, pairs, cats)
    calib_header = ["anchor_week", "horizon"]
    for metric in CALIBRATION_METRICS:
        calib_header += [f"{metric}_pred", f"{metric}_real"]
    correlations = {}
    for h in sorted(calib):
        rows = calib[h]
        _write_csv(
            lay.calibration_csv(h),
            calib_header,
            [
                tuple(
                    _metric_cell(row[k]) if k not in ("anchor_week", "horizon") else row[k]
                    for k in calib_header
                )
                for row in rows
            ],
        )
        correlations[str(h)] = calibration_correlations(rows)

    summary = {
        "fold": _read_json(lay.fold_json),
        "task1": [
            {
                "model": m.model,
                "horizon": m.horizon,
                "auroc": m.auroc,
                "auprc": m.auprc,
                "mae_w": m.mae_w,
                "rmse_w": m.rmse_w,
                "mae_n": m.mae_n,
                "rmse_n": m.rmse_n,
                "n_pairs": m.n_pairs,
                "n_edges": m.n_edges,
            }
            for m in task1
        ],
        "task2": [
            {
                "horizon": s.horizon,
                "n_records": s.n_records,
                "n_worst": s.n_worst,
                "delta_mae_all": s.delta_mae_all,
                "delta_mae_worst": s.delta_mae_worst,
                "win_rate_worst": s.win_rate_worst,
            }
            for s in task2
        ],
        "calibration": correlations,
    }
    _write_json(lay.eval_summary, summary)
    log.info("evaluate: %d forecast pairs, %d stress records", len(pairs), len(records))
    return summary


def cmd_forecast_measure(cfg: PipelineConfig) -> dict:
    lay = ArtifactLayout(cfg.out_dir)
    graphs = load_graph_series(lay)
    cats = load_categories(lay)
    holdings = load_holdings_series(lay, graphs)
    model = load_checkpoint(_require(lay.checkpoint))
    t = len(graphs) - 1
    anchor = graphs[t]
    lay.forecast_dir.mkdir(parents=True, exist_ok=True)
    payload = {"anchor_week": anchor.week, "horizons": {}}
    for h in model.config.horizons:
        ghat = predict_graph(
            model, graphs, holdings, cats, t, h,
            cfg.candidate_mode, cfg.neg_ratio_eval, cfg.seed,
        )
        save_graph(ghat, lay.forecast_graph(h))
        report = build_risk_report(ghat, cats, k=cfg.sis_k)
        watchlist = sorted(report.sis.items(), key=lambda kv: (-kv[1], kv[0]))
        stress_rows = []
        for spec in cfg.scenarios:
            try:
                stress_rows.append(result_to_dict(run_scenario(ghat, spec, cats)))
            except (EmptySelection, MissingCategory):
                continue
        payload["horizons"][str(h)] = {
            "target_week": anchor.week + h,
            "risk": report_to_dict(report),
            "watchlist": [
                {"protocol_id": p, "sis": round(v, 6)}
                for p, v in watchlist[: cfg.sis_k]
            ],
            "stress": stress_rows,
        }
    _write_json(lay.dashboard, payload)
    log.info("forecast: anchor week %d, %d horizons", anchor.week, len(payload["horizons"]))
    return payload


STAGES: dict[str, object] = {
    "synth": cmd_synth,
    "map": cmd_map,
    "build": cmd_build,
    "metrics": cmd_metrics,
    "stress": cmd_stress,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "forecast-measure": cmd_forecast_measure,
}


def run_all(cfg: PipelineConfig, upto: str = "forecast-measure") -> dict:
    """Run every stage through `upto` in dependency order."""
    names = list(STAGES)
    if upto not in STAGES:
        raise InvalidConfig(f"unknown stage {upto!r}")
    out = {}
    for name in names[: names.index(upto) + 1]:
        out[name] = STAGES[name](cfg)
    return out
