"""Shock propagation over an exposure graph.

An edge (q, p) means q holds claims on p, so when debtor p is distressed
its capped cumulative loss is allocated across the holders of incoming
claims in proportion to edge weight. Each protocol propagates at most
once, in the wave after it first crossed the distress threshold, passing
on its current capped loss at the moment of its turn.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptySelection, InvalidTau, MissingCategory, UnknownProtocol
from .graph import ExposureGraph

DEFAULT_TAU = 0.1


@dataclass
class ScenarioSpec:
    """A named shock: a target-selection rule plus loss ratio and threshold."""

    name: str
    rule: dict
    delta0: float
    tau: float = DEFAULT_TAU


@dataclass
class ContagionResult:
    scenario: str
    week: int
    losses: dict[str, float]  # only protocols with positive loss
    system_loss_usd: float
    system_loss_pct: float
    depth: int
    affected: int
    distressed: int
    targets: list[str] = field(default_factory=list)


def canonical_scenarios(tau: float = DEFAULT_TAU) -> list[ScenarioSpec]:
    """The three standing desk scenarios."""
    return [
        ScenarioSpec("largest_50pct", {"kind": "largest_protocol"}, 0.5, tau),
        ScenarioSpec("top5_30pct", {"kind": "top_n", "n": 5}, 0.3, tau),
        ScenarioSpec("bridge_100pct", {"kind": "sector", "label": "bridge"}, 1.0, tau),
    ]


def resolve_scenario(
    g: ExposureGraph,
    spec: ScenarioSpec,
    category_of: dict[str, str] | None = None,
) -> list[tuple[str, float]]:
    """Turn a selection rule into concrete (protocol, loss-ratio) targets.

    Size ties resolve to the smaller protocol id.
    """
    kind = spec.rule.get("kind")
    by_size = sorted(g.nodes.items(), key=lambda kv: (-kv[1], kv[0]))
    if kind == "largest_protocol":
        chosen = [p for p, _ in by_size[:1]]
    elif kind == "top_n":
        n = int(spec.rule.get("n", 0))
        if n < 1:
            raise ValueError("top_n rule needs n >= 1")
        chosen = [p for p, _ in by_size[:n]]
    elif kind == "sector":
        label = spec.rule.get("label")
        if not label:
            raise ValueError("sector rule needs a label")
        cats = category_of if category_of is not None else g.categories
        if not cats and g.nodes:
            raise MissingCategory("sector rule needs category labels")
        chosen = sorted(p for p in g.nodes if cats.get(p) == label)
    elif kind == "explicit":
        ids = list(spec.rule.get("ids", []))
        for p in ids:
            if p not in g.nodes:
                raise UnknownProtocol(f"scenario target {p!r} not in graph")
        chosen = sorted(set(ids))
    else:
        raise ValueError(f"unknown scenario rule kind {kind!r}")
    if not chosen:
        raise EmptySelection(f"scenario {spec.name!r} selected no protocols")
    return [(p, spec.delta0) for p in chosen]


def run_contagion(
    g: ExposureGraph,
    shocked: list[tuple[str, float]],
    tau: float = DEFAULT_TAU,
    scenario_name: str = "",
) -> ContagionResult:
    """Deterministic wave-synchronized cascade.

    Initially shocked protocols are distressed regardless of tau. Losses
    are capped at TVL. Depth is the index of the last wave that delivered
    a positive loss increase to some creditor; the initial shock is wave 0.
    """
    if not 0.0 < tau < 1.0:
        raise InvalidTau(f"tau must be in (0, 1), got {tau}")
    if not shocked:
        raise EmptySelection("no shock targets")
    for p, d0 in shocked:
        if p not in g.nodes:
            raise UnknownProtocol(f"shock target {p!r} not in graph")
        if not 0.0 <= d0 <= 1.0:
            raise ValueError(f"loss ratio must be in [0, 1], got {d0}")

    tvl = g.nodes
    creditors: dict[str, list[tuple[str, float]]] = {p: [] for p in tvl}
    for (q, p), w in sorted(g.edges.items()):
        creditors[p].append((q, w))
    in_total = {p: sum(w for _, w in cs) for p, cs in creditors.items()}

    loss = {p: 0.0 for p in tvl}
    distressed: set[str] = set()
    propagated: set[str] = set()
    frontier: list[str] = []
    for p, d0 in sorted(shocked):
        loss[p] = min(tvl[p], loss[p] + d0 * tvl[p])
        if p not in distressed:
            distressed.add(p)
            frontier.append(p)

    depth = 0
    wave = 0
    while frontier:
        wave += 1
        delivered = False
        next_frontier: list[str] = []
        for p in sorted(frontier):
            propagated.add(p)
            amount = loss[p]
            total_w = in_total[p]
            if amount <= 0.0 or total_w <= 0.0:
                continue
            for q, w in creditors[p]:
                share = amount * w / total_w
                before = loss[q]
                loss[q] = min(tvl[q], before + share)
                if loss[q] > before:
                    delivered = True
                if q not in distressed and loss[q] > tau * tvl[q]:
                    distressed.add(q)
                    if q not in propagated:
                        next_frontier.append(q)
        if delivered:
            depth = wave
        frontier = next_frontier

    total_tvl = sum(tvl[p] for p in sorted(tvl))
    system_loss = sum(loss[p] for p in sorted(loss))
    return ContagionResult(
        scenario=scenario_name,
        week=g.week,
        losses={p: v for p, v in sorted(loss.items()) if v > 0.0},
        system_loss_usd=system_loss,
        system_loss_pct=100.0 * system_loss / total_tvl if total_tvl > 0.0 else 0.0,
        depth=depth,
        affected=sum(1 for v in loss.values() if v > 0.0),
        distressed=len(distressed),
        targets=[p for p, _ in shocked],
    )


def run_scenario(
    g: ExposureGraph,
    spec: ScenarioSpec,
    category_of: dict[str, str] | None = None,
) -> ContagionResult:
    targets = resolve_scenario(g, spec, category_of)
    return run_contagion(g, targets, spec.tau, scenario_name=spec.name)


def restrict_graph(g: ExposureGraph, keep: set[str]) -> ExposureGraph:
    """Subgraph induced on `keep`; incident edges of dropped nodes go too."""
    nodes = {p: w for p, w in g.nodes.items() if p in keep}
    edges = {(a, b): w for (a, b), w in g.edges.items() if a in nodes and b in nodes}
    cats = {p: c for p, c in g.categories.items() if p in nodes}
    return ExposureGraph(interval=g.interval, nodes=nodes, edges=edges, categories=cats)


def predictive_stress_compare(
    g_origin: ExposureGraph,
    g_predicted: ExposureGraph,
    g_realized: ExposureGraph,
    spec: ScenarioSpec,
    category_of: dict[str, str] | None = None,
) -> tuple[ContagionResult, ContagionResult, ContagionResult]:
    """Same scenario on origin (carry-forward baseline), predicted and
    realized graphs, restricted to their common protocols.

    Targets are resolved once, on the restricted realized graph, and reused
    on all three so the comparison is apples to apples.
    """
    common = set(g_origin.nodes) & set(g_realized.nodes)
    origin_r = restrict_graph(g_origin, common)
    pred_r = restrict_graph(g_predicted, common)
    real_r = restrict_graph(g_realized, common)
    targets = resolve_scenario(real_r, spec, category_of)
    baseline = run_contagion(origin_r, targets, spec.tau, scenario_name=spec.name)
    model = run_contagion(pred_r, targets, spec.tau, scenario_name=spec.name)
    realized = run_contagion(real_r, targets, spec.tau, scenario_name=spec.name)
    return baseline, model, realized


# -------------------------------------------------------------------------
# serialization
# -------------------------------------------------------------------------


def result_to_dict(r: ContagionResult) -> dict:
    return {
        "scenario": r.scenario,
        "week": r.week,
        "targets": r.targets,
        "losses": {p: round(v, 6) for p, v in sorted(r.losses.items())},
        "system_loss_usd": round(r.system_loss_usd, 6),
        "system_loss_pct": r.system_loss_pct,
        "depth": r.depth,
        "affected": r.affected,
        "distressed": r.distressed,
    }


def scenario_from_dict(d: dict) -> ScenarioSpec:
    """Parse and validate a scenario payload (config file or API body)."""
    from .errors import InvalidConfig

    try:
        name = str(d["name"])
        rule = dict(d["rule"])
        delta0 = float(d["delta0"])
        tau = float(d.get("tau", DEFAULT_TAU))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad scenario payload: {exc}") from exc
    if not 0.0 <= delta0 <= 1.0:
        raise InvalidConfig(f"delta0 must be in [0, 1], got {delta0}")
    if not 0.0 < tau < 1.0:
        raise InvalidConfig(f"tau must be in (0, 1), got {tau}")
    kind = rule.get("kind")
    if kind not in {"largest_protocol", "top_n", "sector", "explicit"}:
        raise InvalidConfig(f"unknown scenario rule kind {kind!r}")
    n = rule.get("n")
    # bool passes isinstance(int); JSON true must not read as n=1
    if kind == "top_n" and (not isinstance(n, int) or isinstance(n, bool) or n < 1):
        raise InvalidConfig("top_n rule needs integer n >= 1")
    if kind == "sector" and not rule.get("label"):
        raise InvalidConfig("sector rule needs a non-empty label")
    if kind == "explicit" and not rule.get("ids"):
        raise InvalidConfig("explicit rule needs a non-empty id list")
    return ScenarioSpec(name=name, rule=rule, delta0=delta0, tau=tau)
