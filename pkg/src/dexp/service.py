"""Read-only JSON API over a finished artifact directory.

The service never recomputes pipeline artifacts; it loads them lazily,
caches them for the process lifetime, and answers dashboard queries.
Stress runs in "predicted" mode score candidates through the exact same
helper the evaluate stage uses, so API results match CLI artifacts bit
for bit.
"""

from __future__ import annotations

import csv
import json

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .contagion import canonical_scenarios, result_to_dict, run_scenario, scenario_from_dict
from .errors import EmptySelection, InvalidConfig, MissingArtifact, MissingCategory
from .forecaster import load_checkpoint
from .pipeline import (
    ArtifactLayout,
    PipelineConfig,
    load_categories,
    load_graph_series,
    load_holdings_series,
    predict_graph,
)
from .risk import build_risk_report, report_to_dict

SUMMARY_TOP = 10


class StressRequest(BaseModel):
    week: int
    scenario: dict
    use: str = "observed"
    horizon: int | None = None


class ArtifactStore:
    """Lazy cache over one artifact directory."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.lay = ArtifactLayout(cfg.out_dir)
        self._graphs = None
        self._cats = None
        self._holdings = None
        self._model = None
        self._model_loaded = False
        self._reports: dict[int, dict] = {}

    def graphs(self):
        if self._graphs is None:
            self._graphs = load_graph_series(self.lay)
            self._cats = load_categories(self.lay)
            self._holdings = load_holdings_series(self.lay, self._graphs)
        return self._graphs

    def categories(self) -> dict[str, str]:
        self.graphs()
        return self._cats

    def holdings(self):
        self.graphs()
        return self._holdings

    def week_index(self, week: int) -> int:
        for i, g in enumerate(self.graphs()):
            if g.week == week:
                return i
        raise HTTPException(status_code=404, detail=f"no graph for week {week}")

    def model(self):
        if not self._model_loaded:
            if self.lay.checkpoint.exists():
                self._model = load_checkpoint(self.lay.checkpoint)
            self._model_loaded = True
        return self._model


def _guard(fn):
    try:
        return fn()
    except MissingArtifact as exc:
        raise HTTPException(status_code=404, detail=f"artifact not found: {exc}") from exc


def build_app(cfg: PipelineConfig | str | None = None) -> FastAPI:
    """App factory; accepts a full config or just an artifact directory."""
    if cfg is None:
        cfg = PipelineConfig()
    elif not isinstance(cfg, PipelineConfig):
        cfg = PipelineConfig(out_dir=cfg)
    store = ArtifactStore(cfg)
    app = FastAPI(title="exposure-graph-service")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/weeks")
    def weeks():
        graphs = _guard(store.graphs)
        return {
            "weeks": [g.week for g in graphs],
            "latest": graphs[-1].week if graphs else None,
        }

    @app.get("/scenarios")
    def scenarios():
        specs = cfg.scenarios or canonical_scenarios(cfg.tau)
        return {
            "scenarios": [
                {"name": s.name, "rule": s.rule, "delta0": s.delta0, "tau": s.tau}
                for s in specs
            ]
        }

    @app.get("/graph/{week}/summary")
    def graph_summary(week: int):
        _guard(store.graphs)
        g = store.graphs()[store.week_index(week)]
        top_nodes = sorted(g.nodes.items(), key=lambda kv: (-kv[1], kv[0]))
        top_edges = sorted(g.edges.items(), key=lambda kv: (-kv[1], kv[0]))
        return {
            "week": g.week,
            "interval": [g.interval[0], g.interval[1]],
            "n_nodes": len(g.nodes),
            "n_edges": len(g.edges),
            "total_tvl": round(sum(g.nodes.values()), 6),
            "total_exposure": round(sum(g.edges.values()), 6),
            "top_nodes": [
                {"protocol_id": p, "weight": round(w, 6)}
                for p, w in top_nodes[:SUMMARY_TOP]
            ],
            "top_edges": [
                {"src": a, "dst": b, "weight": round(w, 6)}
                for (a, b), w in top_edges[:SUMMARY_TOP]
            ],
        }

    @app.get("/risk/{week}")
    def risk(week: int):
        _guard(store.graphs)
        idx = store.week_index(week)
        if week not in store._reports:
            g = store.graphs()[idx]
            rep = build_risk_report(g, store.categories(), k=cfg.sis_k)
            watchlist = sorted(rep.sis.items(), key=lambda kv: (-kv[1], kv[0]))
            store._reports[week] = {
                "week": week,
                "report": report_to_dict(rep),
                "watchlist": [
                    {"protocol_id": p, "sis": round(v, 6)}
                    for p, v in watchlist[: cfg.sis_k]
                ],
            }
        return store._reports[week]

    @app.post("/stress")
    def stress(req: StressRequest):
        if req.use not in ("observed", "predicted"):
            raise HTTPException(
                status_code=422, detail="use must be 'observed' or 'predicted'"
            )
        try:
            spec = scenario_from_dict(req.scenario)
        except InvalidConfig as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        _guard(store.graphs)
        idx = store.week_index(req.week)
        if req.use == "observed":
            g = store.graphs()[idx]
            horizon = None
        else:
            model = store.model()
            if model is None:
                raise HTTPException(
                    status_code=409,
                    detail=f"predicted mode needs a trained model at {store.lay.checkpoint}",
                )
            if req.horizon is None:
                raise HTTPException(
                    status_code=422, detail="predicted mode needs a horizon"
                )
            if req.horizon not in model.config.horizons:
                raise HTTPException(
                    status_code=422,
                    detail=f"horizon must be one of {list(model.config.horizons)}",
                )
            horizon = req.horizon
            g = predict_graph(
                model,
                store.graphs(),
                store.holdings(),
                store.categories(),
                idx,
                horizon,
                cfg.candidate_mode,
                cfg.neg_ratio_eval,
                cfg.seed,
            )
        try:
            result = run_scenario(g, spec, store.categories())
        except (EmptySelection, MissingCategory) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "use": req.use,
            "week": req.week,
            "horizon": horizon,
            "result": result_to_dict(result),
        }

    @app.get("/calibration/{horizon}")
    def calibration(horizon: int):
        path = store.lay.calibration_csv(horizon)
        if not path.exists():
            raise HTTPException(
                status_code=404, detail=f"artifact not found: {path}"
            )
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                parsed = {}
                for key, value in row.items():
                    if key in ("anchor_week", "horizon"):
                        parsed[key] = int(value)
                    else:
                        parsed[key] = float(value) if value else None
                rows.append(parsed)
        correlations = None
        if store.lay.eval_summary.exists():
            with open(store.lay.eval_summary, encoding="utf-8") as fh:
                summary = json.load(fh)
            correlations = summary.get("calibration", {}).get(str(horizon))
        return {"horizon": horizon, "rows": rows, "correlations": correlations}

    @app.get("/forecast")
    def forecast():
        path = store.lay.dashboard
        if not path.exists():
            raise HTTPException(
                status_code=404, detail=f"artifact not found: {path}"
            )
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    return app
