"""Shared fixtures and generators used across the test suite."""

from __future__ import annotations

import random

from dexp.graph import ExposureGraph, HoldingsSnapshot


def make_random_snapshot_pair(
    rng: random.Random,
    n_protocols: int = 10,
    n_tokens: int = 30,
    integer_values: bool = False,
):
    """Random consecutive snapshot pair plus an issuer map.

    Exercises every flow branch: holders that sell, holders that buy,
    issuers that accumulate their own token, unmapped tokens, protocols
    present in only one snapshot.
    """
    protocols = [f"P{i:03d}" for i in range(n_protocols)]
    tokens = [f"T{i:03d}" for i in range(n_tokens)]
    issuer_of = {}
    for t in tokens:
        if rng.random() < 0.9:
            issuer_of[t] = rng.choice(protocols)

    def draw_value():
        if integer_values:
            return float(rng.randint(0, 5000))
        return round(rng.uniform(0.0, 5000.0), 6)

    def draw_holdings():
        holdings = {}
        for p in protocols:
            if rng.random() < 0.1:
                continue
            basket = rng.sample(tokens, rng.randint(1, min(8, n_tokens)))
            holdings[p] = {t: draw_value() for t in basket}
        if not holdings:
            holdings[protocols[0]] = {tokens[0]: draw_value()}
        return holdings

    snap1 = HoldingsSnapshot(week=0, date="2024-01-01", holdings=draw_holdings())
    snap2 = HoldingsSnapshot(week=1, date="2024-01-08", holdings=draw_holdings())
    return snap1, snap2, issuer_of


def tiny_graph(
    nodes: dict[str, float],
    edges: dict[tuple[str, str], float],
    categories: dict[str, str] | None = None,
    interval: tuple[int, int] = (0, 1),
) -> ExposureGraph:
    return ExposureGraph(
        interval=interval, nodes=dict(nodes), edges=dict(edges), categories=categories or {}
    )
