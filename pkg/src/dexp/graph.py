"""Weekly inter-protocol exposure graphs built from token-holdings snapshots.

A snapshot records, per protocol, the USD value held in each token. Two
consecutive snapshots define an interval; node weights are the persistent
holdings valued at the end of the interval, and directed edge weights are
the USD value that flowed from a holder toward the issuer of a token over
the interval.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import EmptySnapshot, InsufficientSnapshots, UnknownProtocol

# serialized USD values are rounded to this many decimals
USD_DECIMALS = 6


@dataclass
class HoldingsSnapshot:
    """Holdings of every protocol at one weekly observation."""

    week: int
    date: str
    # protocol id -> token id -> USD value held
    holdings: dict[str, dict[str, float]]
    categories: dict[str, str] = field(default_factory=dict)
    chains: dict[str, str] = field(default_factory=dict)


@dataclass
class ExposureGraph:
    """Directed exposure graph for one interval.

    An edge (p, q) means p moved value toward issuer q over the interval,
    i.e. p carries exposure to q. Node weight is the protocol's persistent
    holdings (TVL proxy) valued at the end of the interval.
    """

    interval: tuple[int, int]
    nodes: dict[str, float]
    edges: dict[tuple[str, str], float]
    # sector labels carried along for downstream consumers; not part of
    # the serialized graph payload
    categories: dict[str, str] = field(default_factory=dict)

    @property
    def week(self) -> int:
        """Graphs are labeled by the closing week of their interval."""
        return self.interval[1]

    def out_edges(self, p: str) -> dict[str, float]:
        return {q: w for (a, q), w in self.edges.items() if a == p}

    def in_edges(self, p: str) -> dict[str, float]:
        return {a: w for (a, q), w in self.edges.items() if q == p}


def compute_value_flow(ds_p: float, ds_q: float) -> float:
    """USD flow from holder p toward issuer q for one token.

    ds_p is the change in p's holding of the token over the interval,
    ds_q the change in the issuer's own holding. First matching case wins:
    a decrease at the holder counts in full; otherwise a non-negative
    change at the issuer counts; otherwise no flow.
    """
    if ds_p < 0:
        return -ds_p
    if ds_q >= 0:
        return max(0.0, ds_q)
    return 0.0


def compute_node_weight(snap1: HoldingsSnapshot, snap2: HoldingsSnapshot, p: str) -> float:
    """Value of p's persistent holdings (held at both endpoints), at end prices."""
    h1 = snap1.holdings.get(p)
    h2 = snap2.holdings.get(p)
    if h1 is None and h2 is None:
        raise UnknownProtocol(f"protocol {p!r} absent from both snapshots")
    if h1 is None or h2 is None:
        return 0.0
    common = set(h1) & set(h2)
    return sum(h2[t] for t in sorted(common))


def compute_edge_weight(
    snap1: HoldingsSnapshot,
    snap2: HoldingsSnapshot,
    p: str,
    q: str,
    issuer_of: dict[str, str],
) -> float:
    """Sum of value flows from p to q over tokens issued by q."""
    candidates: set[str] = set()
    for snap in (snap1, snap2):
        candidates.update(snap.holdings.get(p, {}))
        candidates.update(snap.holdings.get(q, {}))
    total = 0.0
    for tok in sorted(candidates):
        if issuer_of.get(tok) != q:
            continue
        ds_p = snap2.holdings.get(p, {}).get(tok, 0.0) - snap1.holdings.get(p, {}).get(tok, 0.0)
        ds_q = snap2.holdings.get(q, {}).get(tok, 0.0) - snap1.holdings.get(q, {}).get(tok, 0.0)
        total += compute_value_flow(ds_p, ds_q)
    return total


def build_exposure_graph(
    snap1: HoldingsSnapshot,
    snap2: HoldingsSnapshot,
    issuer_of: dict[str, str],
    theta: float = 0.0,
) -> ExposureGraph:
    """Build the directed exposure graph for the interval (snap1, snap2).

    Nodes are protocols whose persistent-holdings weight is at least theta;
    pruning happens before any edge is computed, so edges never touch a
    pruned protocol. Self-loops are dropped and zero-weight edges omitted.
    """
    if not snap1.holdings:
        raise EmptySnapshot(f"snapshot for week {snap1.week} has no holdings")
    if not snap2.holdings:
        raise EmptySnapshot(f"snapshot for week {snap2.week} has no holdings")

    universe = set(snap1.holdings) | set(snap2.holdings)
    nodes = {}
    for p in sorted(universe):
        w = compute_node_weight(snap1, snap2, p)
        if w >= theta:
            nodes[p] = w

    edges: dict[tuple[str, str], float] = {}
    if nodes:
        node_list = sorted(nodes)
        all_tokens: set[str] = set()
        for snap in (snap1, snap2):
            for h in snap.holdings.values():
                all_tokens.update(h)
        # token-major accumulation in sorted token order keeps the per-pair
        # float addition order canonical (holders of a token are few)
        for tok in sorted(all_tokens):
            q = issuer_of.get(tok)
            if q is None or q not in nodes:
                continue
            ds = {}
            for x in node_list:
                v = snap2.holdings.get(x, {}).get(tok, 0.0) - snap1.holdings.get(x, {}).get(tok, 0.0)
                if v != 0.0:
                    ds[x] = v
            ds_q = ds.get(q, 0.0)
            if ds_q > 0.0:
                # issuer accumulation counts as inflow from every
                # non-reducing holder
                for p in node_list:
                    if p == q:
                        continue
                    ds_p = ds.get(p, 0.0)
                    flow = compute_value_flow(ds_p, ds_q)
                    if flow > 0.0:
                        edges[(p, q)] = edges.get((p, q), 0.0) + flow
            else:
                for p, ds_p in ds.items():
                    if p == q or ds_p >= 0.0:
                        continue
                    flow = compute_value_flow(ds_p, ds_q)
                    if flow > 0.0:
                        edges[(p, q)] = edges.get((p, q), 0.0) + flow
        edges = {e: w for e, w in edges.items() if w > 0.0}

    categories = dict(snap1.categories)
    categories.update(snap2.categories)
    categories = {p: c for p, c in categories.items() if p in nodes}
    return ExposureGraph(
        interval=(snap1.week, snap2.week),
        nodes=nodes,
        edges=edges,
        categories=categories,
    )


def sequence_from_snapshots(
    snapshots: list[HoldingsSnapshot],
    issuer_of: dict[str, str],
    theta: float = 0.0,
) -> list[ExposureGraph]:
    """Graphs for every consecutive snapshot pair, ordered by week."""
    if len(snapshots) < 2:
        raise InsufficientSnapshots(f"need at least 2 snapshots, got {len(snapshots)}")
    ordered = sorted(snapshots, key=lambda s: s.week)
    return [
        build_exposure_graph(ordered[i], ordered[i + 1], issuer_of, theta)
        for i in range(len(ordered) - 1)
    ]


# -------------------------------------------------------------------------
# serialization
# -------------------------------------------------------------------------


def _round_usd(x: float) -> float:
    return round(float(x), USD_DECIMALS)


def graph_to_dict(g: ExposureGraph) -> dict:
    return {
        "interval": [g.interval[0], g.interval[1]],
        "nodes": [{"id": p, "weight": _round_usd(w)} for p, w in sorted(g.nodes.items())],
        "edges": [
            {"src": a, "dst": b, "weight": _round_usd(w)}
            for (a, b), w in sorted(g.edges.items())
        ],
    }


def graph_from_dict(d: dict) -> ExposureGraph:
    return ExposureGraph(
        interval=(int(d["interval"][0]), int(d["interval"][1])),
        nodes={n["id"]: float(n["weight"]) for n in d["nodes"]},
        edges={(e["src"], e["dst"]): float(e["weight"]) for e in d["edges"]},
    )


def save_graph(g: ExposureGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, sort_keys=True, separators=(",", ":"))


def load_graph(path: str) -> ExposureGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def save_snapshots(snapshots: list[HoldingsSnapshot], path: str) -> None:
    """One JSONL row per (week, protocol)."""
    with open(path, "w", encoding="utf-8") as fh:
        for snap in sorted(snapshots, key=lambda s: s.week):
            for p in sorted(snap.holdings):
                row = {
                    "week": snap.week,
                    "date": snap.date,
                    "protocol_id": p,
                    "chain": snap.chains.get(p, ""),
                    "category": snap.categories.get(p, ""),
                    "holdings": [
                        {"token_id": t, "usd_value": _round_usd(v)}
                        for t, v in sorted(snap.holdings[p].items())
                    ],
                }
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def load_snapshots(path: str) -> list[HoldingsSnapshot]:
    by_week: dict[int, HoldingsSnapshot] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            week = int(row["week"])
            snap = by_week.get(week)
            if snap is None:
                snap = HoldingsSnapshot(week=week, date=row.get("date", ""), holdings={})
                by_week[week] = snap
            p = row["protocol_id"]
            snap.holdings[p] = {
                h["token_id"]: float(h["usd_value"]) for h in row.get("holdings", [])
            }
            if row.get("category"):
                snap.categories[p] = row["category"]
            if row.get("chain"):
                snap.chains[p] = row["chain"]
    return [by_week[w] for w in sorted(by_week)]
