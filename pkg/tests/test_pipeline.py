"""Pipeline stage tests: config parsing, artifact chain, idempotence."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import pytest

from dexp.cli import main
from dexp.errors import InvalidConfig, MissingArtifact
from dexp.forecaster import TrainConfig
from dexp.graph import load_snapshots
from dexp.pipeline import (
    ArtifactLayout,
    PipelineConfig,
    STAGES,
    candidate_pairs,
    load_config,
    load_graph_series,
    load_holdings_series,
    run_all,
)
from dexp.synth import SynthConfig


def tiny_pipeline_config(out_dir) -> PipelineConfig:
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


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    out = tmp_path_factory.mktemp("chain")
    cfg = tiny_pipeline_config(out)
    summaries = run_all(cfg)
    return cfg, ArtifactLayout(out), summaries


def _tree_hash(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


# -------------------------------------------------------------------------
# configuration
# -------------------------------------------------------------------------


def test_load_config_defaults():
    cfg = load_config(None)
    assert cfg.seed == 7
    assert cfg.out_dir == Path("artifacts")
    assert cfg.train.seed == 7
    assert cfg.synth.seed == 7
    assert [s.name for s in cfg.scenarios] == ["largest_50pct", "top5_30pct", "bridge_100pct"]
    assert cfg.candidate_mode == "sampled"


def test_load_config_full_file(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        """
seed = 21
out_dir = "run1"

[synth]
n_protocols = 30
n_tokens = 40
n_weeks = 20
variant = "regime_shift"
shift_weeks = [10]

[build]
theta = 2.5

[map]
theta = 0.4

[metrics]
sis_k = 3

[stress]
tau = 0.2
scenarios = [
  { name = "big", rule = { kind = "largest_protocol" }, delta0 = 0.9 },
  { name = "pair", rule = { kind = "explicit", ids = ["p001"] }, delta0 = 0.5, tau = 0.05 },
]

[train]
horizons = [1, 2]
embed_dim = 16
max_epochs = 4

[split]
train_min = 10
val_len = 3
test_len = 4
step = 2

[evaluate]
candidate_mode = "all"
neg_ratio = 7

[serve]
port = 9999
"""
    )
    cfg = load_config(path)
    assert cfg.seed == 21
    assert cfg.out_dir == Path("run1")
    assert cfg.synth.n_protocols == 30
    assert cfg.synth.shift_weeks == (10,)
    assert cfg.synth.seed == 21
    assert cfg.build_theta == 2.5
    assert cfg.map_theta == 0.4
    assert cfg.sis_k == 3
    assert cfg.tau == 0.2
    assert [s.name for s in cfg.scenarios] == ["big", "pair"]
    assert cfg.scenarios[0].tau == 0.2  # section tau fills the default
    assert cfg.scenarios[1].tau == 0.05  # explicit tau wins
    assert cfg.train.horizons == (1, 2)
    assert cfg.train.embed_dim == 16
    assert cfg.train.seed == 21
    assert cfg.split_train_min == 10
    assert cfg.candidate_mode == "all"
    assert cfg.neg_ratio_eval == 7
    assert cfg.serve_port == 9999


def test_load_config_cli_overrides_beat_file(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('seed = 3\nout_dir = "from_file"\n')
    cfg = load_config(path, seed=99, out_dir=tmp_path / "cli")
    assert cfg.seed == 99
    assert cfg.out_dir == tmp_path / "cli"
    assert cfg.synth.seed == 99 and cfg.train.seed == 99


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("mystery = 1\n")
    with pytest.raises(InvalidConfig, match="mystery"):
        load_config(path)
    path.write_text("[train]\nlearning_rate = 0.1\n")
    with pytest.raises(InvalidConfig, match="learning_rate"):
        load_config(path)
    path.write_text("[synth]\nseed = 4\n")
    with pytest.raises(InvalidConfig, match="seed"):
        load_config(path)


def test_load_config_rejects_bad_sources(tmp_path):
    with pytest.raises(InvalidConfig, match="not found"):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [unclosed\n")
    with pytest.raises(InvalidConfig, match="bad TOML"):
        load_config(bad)


def test_load_config_rejects_bad_scenario(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        '[stress]\nscenarios = [ { name = "x", rule = { kind = "wat" }, delta0 = 0.5 } ]\n'
    )
    with pytest.raises(InvalidConfig, match="rule kind"):
        load_config(path)


def test_pipeline_config_rejects_bad_candidate_mode():
    with pytest.raises(InvalidConfig, match="candidate_mode"):
        PipelineConfig(candidate_mode="everything")


# -------------------------------------------------------------------------
# candidate generation
# -------------------------------------------------------------------------


def test_candidate_pairs_all_mode(chain):
    cfg, lay, _ = chain
    g = load_graph_series(lay)[0]
    pairs = candidate_pairs(g, "all", 5, cfg.seed, 0, 1)
    n = len(g.nodes)
    assert len(pairs) == n * (n - 1)
    assert len(set(pairs)) == len(pairs)
    assert all(a != b for a, b in pairs)


def test_candidate_pairs_sampled_mode_covers_edges(chain):
    cfg, lay, _ = chain
    g = load_graph_series(lay)[0]
    pairs = candidate_pairs(g, "sampled", 5, cfg.seed, 0, 1)
    assert set(g.edges) <= set(pairs)
    assert pairs == candidate_pairs(g, "sampled", 5, cfg.seed, 0, 1)
    assert len(pairs) < len(candidate_pairs(g, "all", 5, cfg.seed, 0, 1))


def test_candidate_pairs_rejects_unknown_mode(chain):
    cfg, lay, _ = chain
    g = load_graph_series(lay)[0]
    with pytest.raises(InvalidConfig):
        candidate_pairs(g, "everything", 5, cfg.seed, 0, 1)


# -------------------------------------------------------------------------
# artifact chain
# -------------------------------------------------------------------------


def test_chain_writes_every_artifact(chain):
    _, lay, _ = chain
    for path in [
        lay.snapshots,
        lay.tokens,
        lay.manual_map,
        lay.protocols,
        lay.synth_stats,
        lay.mapping,
        lay.graph_index,
        lay.risk_json,
        lay.risk_csv,
        lay.warnings_json,
        lay.stress_json,
        lay.stress_csv,
        lay.checkpoint,
        lay.history,
        lay.fold_json,
        lay.task1_csv,
        lay.task2_csv,
        lay.stress_records_csv,
        lay.eval_summary,
        lay.dashboard,
    ]:
        assert path.exists(), path


def test_chain_counts_line_up(chain):
    cfg, lay, summaries = chain
    snapshots = load_snapshots(lay.snapshots)
    assert len(snapshots) == cfg.synth.n_weeks
    graphs = load_graph_series(lay)
    assert len(graphs) == cfg.synth.n_weeks - 1
    assert [g.week for g in graphs] == list(range(1, cfg.synth.n_weeks))
    assert summaries["map"]["n_tokens"] == cfg.synth.n_tokens
    protocols = json.loads(lay.protocols.read_text())
    assert len(protocols) == cfg.synth.n_protocols
    for rec in protocols.values():
        assert set(rec) == {"name", "category", "chain"}


def test_holdings_series_joins_on_target_week(chain):
    _, lay, _ = chain
    graphs = load_graph_series(lay)
    holdings = load_holdings_series(lay, graphs)
    snapshots = {s.week: s.holdings for s in load_snapshots(lay.snapshots)}
    for g, h in zip(graphs, holdings):
        assert h == snapshots[g.week]


def test_graph_files_name_their_week(chain):
    _, lay, _ = chain
    index = json.loads(lay.graph_index.read_text())
    for week in index["weeks"]:
        assert lay.graph_file(week).exists()
        payload = json.loads(lay.graph_file(week).read_text())
        assert payload["interval"][1] == week


def test_task1_csv_has_both_models_and_all_horizons(chain):
    cfg, lay, _ = chain
    with open(lay.task1_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    combos = {(r["model"], int(r["horizon"])) for r in rows}
    assert combos == {
        (m, h) for m in ("model", "persistence") for h in cfg.train.horizons
    }
    for r in rows:
        if r["auroc"]:
            assert 0.0 <= float(r["auroc"]) <= 1.0


def test_eval_summary_structure(chain):
    cfg, lay, _ = chain
    summary = json.loads(lay.eval_summary.read_text())
    assert set(summary) == {"fold", "task1", "task2", "calibration"}
    assert set(summary["calibration"]) == {str(h) for h in cfg.train.horizons}
    fold = summary["fold"]
    assert fold["train"][1] <= fold["val"][0] <= fold["test"][0]


def test_dashboard_covers_all_horizons(chain):
    cfg, lay, _ = chain
    dash = json.loads(lay.dashboard.read_text())
    assert set(dash["horizons"]) == {str(h) for h in cfg.train.horizons}
    graphs = load_graph_series(lay)
    assert dash["anchor_week"] == graphs[-1].week
    for h, block in dash["horizons"].items():
        assert block["target_week"] == dash["anchor_week"] + int(h)
        assert len(block["watchlist"]) <= cfg.sis_k
        assert lay.forecast_graph(int(h)).exists()


def test_rerunning_every_stage_is_byte_idempotent(chain):
    cfg, lay, _ = chain
    before = _tree_hash(lay.root)
    for stage in STAGES.values():
        stage(cfg)
    assert _tree_hash(lay.root) == before


# -------------------------------------------------------------------------
# missing artifacts and cli
# -------------------------------------------------------------------------


def test_stages_fail_loudly_without_upstream(tmp_path):
    cfg = tiny_pipeline_config(tmp_path / "empty")
    for name in ("map", "build", "metrics", "stress", "train", "evaluate", "forecast-measure"):
        with pytest.raises(MissingArtifact):
            STAGES[name](cfg)


def test_evaluate_requires_checkpoint(tmp_path):
    cfg = tiny_pipeline_config(tmp_path / "nockpt")
    run_all(cfg, upto="stress")
    with pytest.raises(MissingArtifact, match="checkpoint"):
        STAGES["evaluate"](cfg)


def test_run_all_rejects_unknown_stage(tmp_path):
    cfg = tiny_pipeline_config(tmp_path / "x")
    with pytest.raises(InvalidConfig):
        run_all(cfg, upto="deploy")


def test_cli_round_trip_and_error_exit(tmp_path, capsys):
    out = tmp_path / "cli"
    assert main(["synth", "--out", str(out), "--seed", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_weeks"] == 60
    assert main(["build", "--out", str(tmp_path / "void")]) == 1
    err = capsys.readouterr().err
    assert "MissingArtifact" in err and "snapshots.jsonl" in err


def test_cli_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("nonsense = true\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "InvalidConfig" in capsys.readouterr().err
