"""Split management and negative sampling for the forecasting tasks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory


@dataclass(frozen=True)
class Fold:
    """Index ranges into the ordered weekly graph list."""

    train: range
    val: range
    test: range


def walk_forward_split(
    n_weeks: int,
    train_min: int,
    val_len: int,
    test_len: int,
    step: int,
) -> list[Fold]:
    """Expanding-window folds; only folds with a full test window survive."""
    if train_min < 1 or val_len < 1 or test_len < 1 or step < 1:
        raise ValueError("train_min, val_len, test_len and step must all be >= 1")
    folds = []
    train_end = train_min
    while train_end + val_len + test_len <= n_weeks:
        folds.append(
            Fold(
                train=range(0, train_end),
                val=range(train_end, train_end + val_len),
                test=range(train_end + val_len, train_end + val_len + test_len),
            )
        )
        train_end += step
    if not folds:
        raise InsufficientHistory(
            f"{n_weeks} weeks cannot fit train_min={train_min} "
            f"+ val={val_len} + test={test_len}"
        )
    return folds


def forecast_pairs(
    horizons: tuple[int, ...],
    target_range: range,
    max_anchor: int | None = None,
) -> list[tuple[int, int]]:
    """(anchor, horizon) pairs whose target week lands in target_range.

    Anchors may precede the range (forecasts are made from known weeks);
    max_anchor additionally caps the anchor index when training pairs must
    stay inside the training window.
    """
    pairs = []
    for target in target_range:
        for h in sorted(horizons):
            anchor = target - h
            if anchor < 0:
                continue
            if max_anchor is not None and anchor > max_anchor:
                continue
            pairs.append((anchor, h))
    return sorted(pairs)


def _pair_from_index(k: int, n: int) -> tuple[int, int]:
    # ordered pairs without self-loops, row-major
    i = k // (n - 1)
    j = k % (n - 1)
    if j >= i:
        j += 1
    return i, j


def negative_sample(
    positives: set[tuple[str, str]],
    nodes: list[str],
    ratio: int,
    seed,
) -> list[tuple[str, str]]:
    """Uniform ordered non-edges: no self-loops, no positives, no repeats.

    Returns ratio * len(positives) pairs, or the whole complement when it
    is smaller. Deterministic in (positives, nodes, ratio, seed).
    """
    order = sorted(nodes)
    n = len(order)
    want = ratio * len(positives)
    if want <= 0 or n < 2:
        return []
    universe = n * (n - 1)
    n_complement = universe - sum(
        1 for (a, b) in positives if a in set(order) and b in set(order) and a != b
    )
    rng = np.random.default_rng(seed)
    if want >= n_complement:
        out = []
        for i, a in enumerate(order):
            for b in order:
                if a != b and (a, b) not in positives:
                    out.append((a, b))
        return out
    chosen: list[tuple[str, str]] = []
    seen: set[int] = set()
    while len(chosen) < want:
        draw = rng.integers(0, universe, size=max(64, 2 * (want - len(chosen))))
        for k in draw:
            k = int(k)
            if k in seen:
                continue
            seen.add(k)
            i, j = _pair_from_index(k, n)
            pair = (order[i], order[j])
            if pair in positives:
                continue
            chosen.append(pair)
            if len(chosen) == want:
                break
    return chosen


def eval_sample_seed(global_seed: int, anchor: int, horizon: int) -> np.random.SeedSequence:
    """Evaluation negatives are reproducible per (seed, anchor, horizon)."""
    return np.random.SeedSequence([int(global_seed), int(anchor), int(horizon)])
