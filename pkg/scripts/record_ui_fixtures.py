"""Record real service payloads as fixtures for the dashboard tests.

Runs the small pipeline used by the engine test suite in a temp directory,
queries the HTTP service in-process, and freezes selected responses into
frontend/tests/fixtures/service-payloads.json. The dashboard's tests replay
these payloads through the UI code paths, so every number they assert on
came from the real engine.

Usage: python3 scripts/record_ui_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from dexp.forecaster import TrainConfig
from dexp.pipeline import ArtifactLayout, PipelineConfig, run_all
from dexp.service import build_app
from dexp.synth import SynthConfig

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "frontend" / "tests" / "fixtures" / "service-payloads.json"


def small_config(out_dir: Path) -> PipelineConfig:
    return PipelineConfig(
        out_dir=out_dir,
        seed=5,
        synth=SynthConfig(n_protocols=20, n_tokens=30, n_weeks=30, seed=5),
        train=TrainConfig(
            horizons=(1, 2),
            embed_dim=8,
            encoder_hidden=(16, 8),
            link_hidden=(16, 8),
            node_hidden=(12, 6),
            max_epochs=2,
            seed=5,
        ),
        split_train_min=16,
        split_val_len=4,
        split_test_len=6,
        split_step=4,
    )


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "artifacts"
        cfg = small_config(out)
        run_all(cfg)
        lay = ArtifactLayout(out)
        client = TestClient(build_app(cfg))

        weeks = client.get("/weeks").json()
        latest = weeks["latest"]
        prev = weeks["weeks"][-2]
        scenarios = client.get("/scenarios").json()

        stress_observed = []
        artifact_rows = json.loads(lay.stress_json.read_text())
        for spec in scenarios["scenarios"]:
            req = {"week": latest, "scenario": spec, "use": "observed"}
            resp = client.post("/stress", json=req)
            assert resp.status_code == 200, resp.text
            body = resp.json()
            row = next(
                r
                for r in artifact_rows
                if r["week"] == latest and r["scenario"] == spec["name"]
            )
            assert body["result"] == row, f"service/artifact drift for {spec['name']}"
            stress_observed.append(
                {"request": req, "response": body, "artifact_row": row}
            )

        pred_req = {
            "week": latest,
            "scenario": scenarios["scenarios"][0],
            "use": "predicted",
            "horizon": 1,
        }
        pred_resp = client.post("/stress", json=pred_req)
        assert pred_resp.status_code == 200, pred_resp.text

        # same targets, higher initial loss ratio: loss must not decrease
        mono = []
        for d0 in (0.3, 0.6):
            req = {
                "week": latest,
                "scenario": {
                    "name": f"largest_{d0}",
                    "rule": {"kind": "largest_protocol"},
                    "delta0": d0,
                    "tau": 0.1,
                },
                "use": "observed",
            }
            resp = client.post("/stress", json=req)
            assert resp.status_code == 200, resp.text
            mono.append({"request": req, "response": resp.json()})
        low = mono[0]["response"]["result"]["system_loss_pct"]
        high = mono[1]["response"]["result"]["system_loss_pct"]
        assert low <= high

        fixtures = {
            "weeks": weeks,
            "scenarios": scenarios,
            "graph_summary": client.get(f"/graph/{latest}/summary").json(),
            "risk_latest": client.get(f"/risk/{latest}").json(),
            "risk_previous": client.get(f"/risk/{prev}").json(),
            "stress_observed": stress_observed,
            "stress_predicted": {"request": pred_req, "response": pred_resp.json()},
            "monotonicity_pair": mono,
            "calibration_h1": client.get("/calibration/1").json(),
            "forecast": client.get("/forecast").json(),
            "errors": {
                "unknown_week": {
                    "status": 404,
                    "body": client.get("/risk/99999").json(),
                },
                "bad_scenario": {
                    "status": 422,
                    "body": client.post(
                        "/stress",
                        json={
                            "week": latest,
                            "scenario": {"name": "x", "rule": {"kind": "nope"}, "delta0": 2.0},
                            "use": "observed",
                        },
                    ).json(),
                },
                "predicted_without_horizon": {
                    "status": 422,
                    "body": client.post(
                        "/stress",
                        json={
                            "week": latest,
                            "scenario": scenarios["scenarios"][0],
                            "use": "predicted",
                        },
                    ).json(),
                },
            },
        }

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
