"""Deterministic synthetic holdings generator.

The generator writes weekly token-holdings snapshots whose derived graphs
have controllable week-to-week edge overlap. Mechanics:

- Each sector gets one high-reserve "core" protocol. Every peripheral
  protocol keeps a mandatory position in its sector core's token and sells
  it down at a constant integer rate, producing a persistent backbone edge
  whose weight is exactly that rate.
- Loose positions (targets biased toward cores) churn at a death rate
  derived from the overlap target; a dead position freezes in place (no
  further flow) so its edge vanishes without a spike.
- Regime-shift weeks flip a global intensity regime (mandatory sell rates
  scale by regime_multiplier) and redraw most loose positions, breaking
  carry-forward forecasts while leaving the sector-core attachment law,
  which is visible in node features, intact.

All amounts are integers, so flows and edge weights are float-exact and
the zero-churn variant yields bitwise-identical graphs every week.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import InvalidConfig
from .features import DEFAULT_CATEGORIES
from .graph import ExposureGraph, HoldingsSnapshot, sequence_from_snapshots
from .mapper import TokenMeta

VARIANTS = ("stable", "frozen", "regime_shift")

_NAME_A = (
    "aqua", "bolt", "cinder", "drift", "ember", "flux", "grove", "helix",
    "iris", "jade", "karst", "lumen",
)
_NAME_B = (
    "swap", "port", "forge", "mint", "vault", "loop", "field", "gate",
    "works", "lane",
)
_NAME_SUFFIX = (
    "finance", "protocol", "labs", "exchange", "network", "capital",
    "markets", "reserve", "systems", "trade",
)

START_DATE = date(2024, 1, 5)


@dataclass
class SynthConfig:
    n_protocols: int = 100
    n_tokens: int = 130
    n_weeks: int = 60
    overlap_target: float = 0.985
    tvl_log_mu: float = 13.0
    tvl_log_sigma: float = 1.0
    core_multiplier: float = 40.0
    core_growth: float = 0.004
    n_sectors: int = 5
    rel_per_protocol: int = 3
    hub_bias: float = 0.7
    shift_weeks: tuple[int, ...] = ()
    shift_fraction: float = 0.9
    regime_multiplier: float = 4.0
    variant: str = "stable"
    seed: int = 7

    def __post_init__(self):
        self.shift_weeks = tuple(int(w) for w in self.shift_weeks)
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"variant must be one of {VARIANTS}")
        if not 0.0 < self.overlap_target <= 1.0:
            raise InvalidConfig("overlap_target must be in (0, 1]")
        if self.n_weeks < 2:
            raise InvalidConfig("n_weeks must be at least 2")
        if self.n_protocols < 2 * self.n_sectors or self.n_sectors < 1:
            raise InvalidConfig("need at least two protocols per sector")
        if self.n_sectors > len(DEFAULT_CATEGORIES) - 1:
            raise InvalidConfig(f"at most {len(DEFAULT_CATEGORIES) - 1} sectors")
        if self.n_tokens < self.n_protocols + 1:
            raise InvalidConfig("need one token per protocol plus the reserve")
        if self.rel_per_protocol < 1:
            raise InvalidConfig("rel_per_protocol must be >= 1")
        if not 0.0 <= self.shift_fraction <= 1.0:
            raise InvalidConfig("shift_fraction must be in [0, 1]")
        if self.variant == "regime_shift" and not self.shift_weeks:
            raise InvalidConfig("regime_shift variant needs shift_weeks")
        if any(w < 1 or w >= self.n_weeks for w in self.shift_weeks):
            raise InvalidConfig("shift weeks must fall inside (0, n_weeks)")


@dataclass
class SynthResult:
    snapshots: list[HoldingsSnapshot]
    metas: dict[str, TokenMeta]
    manual_map: dict[str, str]
    names: dict[str, str]
    categories: dict[str, str]
    chains: dict[str, str]
    issuer_truth: dict[str, str]
    stats: dict = field(default_factory=dict)


def _protocol_name(i: int) -> str:
    return (
        f"{_NAME_A[i % len(_NAME_A)]}{_NAME_B[(i // len(_NAME_A)) % len(_NAME_B)]}"
        f" {_NAME_SUFFIX[i % len(_NAME_SUFFIX)]}"
    )


def churn_rate(overlap_target: float, loose_fraction: float) -> float:
    """Weekly loose-position death rate hitting a Jaccard overlap target.

    With death rate d on the loose share phi of edges, consecutive edge
    sets overlap at roughly (1 - phi*d) / (1 + phi*d)."""
    if overlap_target >= 1.0 or loose_fraction <= 0.0:
        return 0.0
    return (1.0 - overlap_target) / (loose_fraction * (1.0 + overlap_target))


@dataclass
class _Position:
    holder: str
    issuer: str
    rate: int
    mandatory: bool


class _Book:
    """Integer holdings ledger with frozen-on-death positions."""

    def __init__(self):
        self.balance: dict[str, dict[str, int]] = {}

    def add(self, holder: str, token: str, amount: int) -> None:
        h = self.balance.setdefault(holder, {})
        h[token] = h.get(token, 0) + amount

    def snapshot(self) -> dict[str, dict[str, float]]:
        return {
            p: {t: float(v) for t, v in tokens.items() if v > 0}
            for p, tokens in self.balance.items()
        }


def generate(cfg: SynthConfig) -> SynthResult:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    sectors = list(DEFAULT_CATEGORIES[: cfg.n_sectors])
    ids = [f"p{i:03d}" for i in range(cfg.n_protocols)]
    names = {p: _protocol_name(i) for i, p in enumerate(ids)}
    # first protocol of each sector is its core; sectors rotate after that
    categories = {p: sectors[i % cfg.n_sectors] for i, p in enumerate(ids)}
    cores = ids[: cfg.n_sectors]
    core_of = {sectors[i]: cores[i] for i in range(cfg.n_sectors)}
    chains = {p: ("ethereum" if i % 3 else "arbitrum") for i, p in enumerate(ids)}

    token_of = {p: f"tk{i:03d}" for i, p in enumerate(ids)}
    metas: dict[str, TokenMeta] = {}
    manual_map: dict[str, str] = {}
    issuer_truth: dict[str, str] = {}
    for i, p in enumerate(ids):
        tid = token_of[p]
        issuer_truth[tid] = p
        symbol = tid.upper()
        if i >= cfg.n_sectors and i % 10 == 7:
            manual_map[tid] = p
            metas[tid] = TokenMeta(
                tid, None, symbol, f"restricted certificate series {i}"
            )
        elif i >= cfg.n_sectors and i % 10 == 8:
            metas[tid] = TokenMeta(
                tid, None, symbol, f"{names[p]} staked position receipt"
            )
        else:
            metas[tid] = TokenMeta(tid, p, symbol, f"{names[p]} native token")
    metas["rsv"] = TokenMeta(
        "rsv", None, "RSV", "omnichain settlement unit"
    )
    for j in range(cfg.n_tokens - len(metas)):
        fid = f"flr{j:03d}"
        metas[fid] = TokenMeta(fid, None, fid.upper(), f"dormant asset listing {j}")

    # reserves: periphery flat, cores large and growing
    budget = cfg.n_weeks + 2
    reserves = {}
    for i, p in enumerate(ids):
        base = int(round(float(rng.lognormal(cfg.tvl_log_mu, cfg.tvl_log_sigma))))
        base = max(base, 10_000)
        reserves[p] = int(round(base * cfg.core_multiplier)) if p in cores else base

    regime = 0

    def mandatory_rate(base: int) -> int:
        return int(round(base * cfg.regime_multiplier)) if regime else base

    mand_base = {
        p: int(rng.integers(5_000, 20_001)) for p in ids if p not in cores
    }

    def draw_loose(holder: str, taken: set[tuple[str, str]]) -> _Position:
        for _ in range(64):
            if rng.random() < cfg.hub_bias:
                target = cores[int(rng.integers(0, len(cores)))]
            else:
                target = ids[int(rng.integers(0, len(ids)))]
            if target != holder and (holder, target) not in taken:
                rate = int(rng.integers(1_000, 10_001))
                return _Position(holder, target, rate, mandatory=False)
        # fully taken neighborhoods settle for any free non-core target
        for target in ids:
            if target != holder and (holder, target) not in taken:
                rate = int(rng.integers(1_000, 10_001))
                return _Position(holder, target, rate, mandatory=False)
        raise InvalidConfig("cannot place a loose position: graph too small")

    book = _Book()
    positions: list[_Position] = []
    taken: set[tuple[str, str]] = set()
    static = cfg.variant == "stable" and cfg.overlap_target >= 1.0

    def open_position(pos: _Position) -> None:
        positions.append(pos)
        taken.add((pos.holder, pos.issuer))
        book.add(pos.holder, token_of[pos.issuer], pos.rate * budget)

    for p in ids:
        book.add(p, "rsv", reserves[p])
        if p not in cores:
            open_position(_Position(p, core_of[categories[p]], mandatory_rate(mand_base[p]), True))
        extra = cfg.rel_per_protocol - (0 if p in cores else 1)
        for _ in range(extra):
            open_position(draw_loose(p, taken))

    loose_share = max(
        1, sum(1 for pos in positions if not pos.mandatory)
    ) / max(1, len(positions))
    death = churn_rate(cfg.overlap_target, loose_share)
    if cfg.variant == "frozen":
        death = 0.0

    snapshots: list[HoldingsSnapshot] = []

    def emit(week: int) -> None:
        snapshots.append(
            HoldingsSnapshot(
                week=week,
                date=(START_DATE + timedelta(weeks=week)).isoformat(),
                holdings=book.snapshot(),
                categories=dict(categories),
                chains=dict(chains),
            )
        )

    emit(0)
    for week in range(1, cfg.n_weeks):
        if not static:
            # sells first: positions alive at the start of the week flow
            for pos in positions:
                book.add(pos.holder, token_of[pos.issuer], -pos.rate)
            if cfg.variant != "frozen" and cfg.core_growth > 0.0:
                for c in cores:
                    grown = int(round(reserves[c] * (1.0 + cfg.core_growth) ** week))
                    book.balance[c]["rsv"] = grown

            shifting = cfg.variant == "regime_shift" and week in cfg.shift_weeks
            if shifting:
                regime ^= 1
                for pos in positions:
                    if pos.mandatory:
                        new_rate = mandatory_rate(mand_base[pos.holder])
                        book.add(pos.holder, token_of[pos.issuer], new_rate * budget)
                        pos.rate = new_rate

            if death > 0.0 or shifting:
                survivors: list[_Position] = []
                reborn: list[str] = []
                for pos in positions:
                    if pos.mandatory:
                        survivors.append(pos)
                        continue
                    p_dead = cfg.shift_fraction if shifting else death
                    if rng.random() < p_dead:
                        taken.discard((pos.holder, pos.issuer))
                        reborn.append(pos.holder)  # frozen balance stays put
                    else:
                        survivors.append(pos)
                positions = survivors
                for holder in reborn:
                    pos = draw_loose(holder, taken)
                    positions.append(pos)
                    taken.add((pos.holder, pos.issuer))
                    book.add(pos.holder, token_of[pos.issuer], pos.rate * budget)
        emit(week)

    result = SynthResult(
        snapshots=snapshots,
        metas=metas,
        manual_map=manual_map,
        names=names,
        categories=categories,
        chains=chains,
        issuer_truth=issuer_truth,
    )
    result.stats = measure_stats(snapshots, issuer_truth)
    result.stats["variant"] = cfg.variant
    result.stats["n_protocols"] = cfg.n_protocols
    result.stats["n_weeks"] = cfg.n_weeks
    return result


def edge_overlap(g1: ExposureGraph, g2: ExposureGraph) -> float:
    """Jaccard overlap of the two edge-key sets."""
    e1, e2 = set(g1.edges), set(g2.edges)
    if not e1 and not e2:
        return 1.0
    return len(e1 & e2) / len(e1 | e2)


def measure_stats(
    snapshots: list[HoldingsSnapshot], issuer_of: dict[str, str]
) -> dict:
    """Re-derive the graphs and report the statistics the generator aims at."""
    graphs = sequence_from_snapshots(snapshots, issuer_of)
    overlaps = [edge_overlap(a, b) for a, b in zip(graphs, graphs[1:])]
    return {
        "n_graphs": len(graphs),
        "mean_nodes": float(np.mean([len(g.nodes) for g in graphs])),
        "mean_edges": float(np.mean([len(g.edges) for g in graphs])),
        "mean_overlap": float(np.mean(overlaps)) if overlaps else 1.0,
        "min_overlap": float(np.min(overlaps)) if overlaps else 1.0,
    }
