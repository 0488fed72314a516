"""Subgroup search: coordinate ascent over features with random restarts.

Each restart starts from a random descriptor and repeatedly sweeps the
features. A feature step relaxes that feature's constraint, aggregates
(count, positives) per category over the records passing every other
constraint, orders categories by positive rate, and scores every prefix of
that ordering; the best prefix becomes the feature's new value set. For this
score the best prefix matches the best of all value subsets (checkable via
``validate_steps``), which is what keeps the step linear instead of
exponential in the feature's cardinality. A restart has converged when a full
sweep changes nothing.

Results are deterministic for a given seed and independent of the worker
count: every restart draws from its own pre-spawned random stream and the
cross-restart reduction is an index-ordered max.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product
from typing import Literal

import numpy as np

from .errors import BudgetError, ContractError, DegenerateDataError
from .scoring import EffectMeasures, ScorePanel, bernoulli_score, odds_ratio, score_array
from .tabular import Dataset, SubsetDescriptor, membership_mask

_STEP_TOL = 1e-9          # slack for float-noise in ascent/LTSS assertions
_LTSS_AUDIT_MAX_CARD = 12  # enumeration guard for validate_steps


@dataclass(frozen=True)
class ScanConfig:
    """Knobs for the restart search.

    feature_order "fixed" sweeps features in schema order; "shuffled" draws a
    per-restart order from that restart's random stream.
    """

    n_restarts: int = 10
    max_passes: int = 20
    seed: int = 0
    feature_order: Literal["fixed", "shuffled"] = "fixed"

    def __post_init__(self) -> None:
        if self.n_restarts < 1:
            raise ContractError("n_restarts must be >= 1")
        if self.max_passes < 1:
            raise ContractError("max_passes must be >= 1")
        if self.seed < 0:
            raise ContractError("seed must be a non-negative integer")
        if self.feature_order not in ("fixed", "shuffled"):
            raise ContractError("feature_order must be 'fixed' or 'shuffled'")


@dataclass(frozen=True)
class ScanResult:
    """Best descriptor found, its score panel, effect measures, and provenance."""

    descriptor: SubsetDescriptor
    panel: ScorePanel
    effects: EffectMeasures | None
    restart_index: int


def _check_not_degenerate(dataset: Dataset) -> None:
    pos = dataset.n_positive
    if pos == 0 or pos == dataset.n_records:
        raise DegenerateDataError(
            "outcomes are all 0 or all 1; the scan statistic is undefined"
        )


def _random_nonempty_subset(rng: np.random.Generator, cardinality: int) -> np.ndarray:
    """Uniform over nonempty category subsets: p=0.5 inclusion, redrawn if empty."""
    while True:
        inc = rng.random(cardinality) < 0.5
        if inc.any():
            return inc


def _ltss_step_audit(
    counts: np.ndarray, positives: np.ndarray, mu: float, best_prefix_score: float
) -> None:
    """Check the adopted prefix against brute-force enumeration of value subsets."""
    cardinality = len(counts)
    if cardinality > _LTSS_AUDIT_MAX_CARD:
        return
    best = 0.0
    for size in range(1, cardinality + 1):
        for subset in combinations(range(cardinality), size):
            idx = list(subset)
            tot = float(counts[idx].sum())
            pos = float(positives[idx].sum())
            s = float(score_array(pos, tot, mu))
            if s > best:
                best = s
    if best > best_prefix_score + _STEP_TOL * (1.0 + abs(best)):
        raise AssertionError(
            f"prefix step missed the optimal value subset: {best_prefix_score} < {best}"
        )


def _run_restart(
    dataset: Dataset,
    seed_seq: np.random.SeedSequence,
    config: ScanConfig,
    validate_steps: bool,
) -> tuple[float, tuple[tuple[int, ...], ...]]:
    """One restart; returns (score, per-feature included-value tuples)."""
    rng = np.random.default_rng(seed_seq)
    rows = dataset.rows
    y = dataset.outcomes
    y_bool = y.astype(bool)
    mu = dataset.global_mean
    n_features = dataset.schema.n_features
    cards = dataset.schema.cardinalities()

    included = [_random_nonempty_subset(rng, card) for card in cards]
    if config.feature_order == "shuffled":
        order = rng.permutation(n_features)
    else:
        order = np.arange(n_features)

    full_mask = np.ones(dataset.n_records, dtype=bool)
    for z in range(n_features):
        full_mask &= included[z][rows[:, z]]
    current_score = float(
        score_array(float(y[full_mask].sum()), float(full_mask.sum()), mu)
    )

    for _ in range(config.max_passes):
        changed = False
        for z in order:
            others = np.ones(dataset.n_records, dtype=bool)
            for w in range(n_features):
                if w != z:
                    others &= included[w][rows[:, w]]
            rows_z = rows[others, z]
            counts = np.bincount(rows_z, minlength=cards[z])
            positives = np.bincount(rows_z[y_bool[others]], minlength=cards[z])

            rates = np.where(counts > 0, positives / np.maximum(counts, 1), 0.0)
            # priority: rate desc, then count desc, then category index asc
            perm = np.lexsort((np.arange(cards[z]), -counts, -rates))
            cum_tot = counts[perm].cumsum().astype(np.float64)
            cum_pos = positives[perm].cumsum().astype(np.float64)
            prefix_scores = score_array(cum_pos, cum_tot, mu)
            k = int(np.argmax(prefix_scores))  # first max -> fewest categories
            best_score = float(prefix_scores[k])

            if validate_steps:
                _ltss_step_audit(counts, positives, mu, best_score)
            if best_score < current_score - _STEP_TOL * (1.0 + abs(current_score)):
                raise AssertionError(
                    f"ascent step decreased the score: {current_score} -> {best_score}"
                )

            new_inc = np.zeros(cards[z], dtype=bool)
            new_inc[perm[: k + 1]] = True
            if not np.array_equal(new_inc, included[z]):
                included[z] = new_inc
                changed = True
            current_score = best_score
        if not changed:
            break

    return current_score, tuple(
        tuple(int(v) for v in np.flatnonzero(inc)) for inc in included
    )


def _restart_task(
    args: tuple[Dataset, np.random.SeedSequence, ScanConfig, bool],
) -> tuple[float, tuple[tuple[int, ...], ...]]:
    return _run_restart(*args)


def _finalize(
    dataset: Dataset,
    included: tuple[tuple[int, ...], ...],
    restart_index: int,
) -> ScanResult:
    cards = dataset.schema.cardinalities()
    constraints = tuple(
        (z, vals) for z, vals in enumerate(included) if len(vals) < cards[z]
    )
    descriptor = SubsetDescriptor(constraints)
    mask = membership_mask(dataset, descriptor)
    n_subset = int(mask.sum())
    n_positive = int(dataset.outcomes[mask].sum())
    if n_subset == 0:
        panel = ScorePanel(0.0, 1.0, 0, 0, dataset.global_mean, 0.0)
        return ScanResult(descriptor, panel, None, restart_index)
    panel = bernoulli_score(n_positive, n_subset, dataset.global_mean)
    n = dataset.n_records
    effects = None
    if n_subset < n:
        total_pos = dataset.n_positive
        effects = odds_ratio(
            n_positive,
            n_subset - n_positive,
            total_pos - n_positive,
            (n - n_subset) - (total_pos - n_positive),
        )
    return ScanResult(descriptor, panel, effects, restart_index)


def scan(
    dataset: Dataset,
    config: ScanConfig = ScanConfig(),
    *,
    workers: int = 1,
    validate_steps: bool = False,
) -> ScanResult:
    """Find the highest-scoring subgroup over ``config.n_restarts`` restarts.

    Ties across restarts go to the lowest restart index; a feature whose
    adopted value set covers all of its categories is dropped from the
    returned descriptor as vacuous. ``validate_steps`` audits every feature
    step against subset enumeration (cardinality <= 12) and is meant for
    tests.
    """
    _check_not_degenerate(dataset)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_restarts)
    tasks = [(dataset, seeds[r], config, validate_steps) for r in range(config.n_restarts)]
    if workers > 1 and config.n_restarts > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_restart_task, tasks, chunksize=max(1, len(tasks) // (workers * 2))))
    else:
        outcomes = [_restart_task(t) for t in tasks]

    best_index = 0
    best_score = outcomes[0][0]
    for r in range(1, len(outcomes)):
        if outcomes[r][0] > best_score:
            best_score = outcomes[r][0]
            best_index = r
    return _finalize(dataset, outcomes[best_index][1], best_index)


def _descriptor_sort_key(
    constraints: tuple[tuple[int, tuple[int, ...]], ...],
) -> tuple[int, tuple[tuple[int, tuple[int, ...]], ...]]:
    return (len(constraints), constraints)


def exhaustive_scan(dataset: Dataset, limit: int = 1_000_000) -> ScanResult:
    """Global maximum by full descriptor enumeration; the oracle for scan().

    Refuses to run when the descriptor count (product over features of
    2**cardinality) exceeds ``limit``. Ties resolve to the descriptor with the
    fewest constrained features, then lexicographically.
    """
    _check_not_degenerate(dataset)
    cards = dataset.schema.cardinalities()
    total = 1
    for card in cards:
        total *= 2 ** card
        if total > limit:
            raise BudgetError(
                f"descriptor space exceeds the evaluation budget ({limit})"
            )

    rows = dataset.rows
    y = dataset.outcomes
    mu = dataset.global_mean
    n = dataset.n_records

    # Per-feature choices: unconstrained, or any nonempty proper value subset
    # (the full subset is identical to unconstrained).
    choice_lists = []
    for z, card in enumerate(cards):
        choices: list[tuple[int, tuple[int, ...]] | None] = [None]
        for size in range(1, card):
            for vals in combinations(range(card), size):
                choices.append((z, vals))
        choice_lists.append(choices)

    value_masks = [
        [rows[:, z] == v for v in range(card)] for z, card in enumerate(cards)
    ]

    best_score = -1.0
    best_key: tuple[int, tuple] | None = None
    best_constraints: tuple[tuple[int, tuple[int, ...]], ...] = ()
    for combo in product(*choice_lists):
        constraints = tuple(c for c in combo if c is not None)
        mask = np.ones(n, dtype=bool)
        for z, vals in constraints:
            allowed = value_masks[z][vals[0]].copy()
            for v in vals[1:]:
                allowed |= value_masks[z][v]
            mask &= allowed
        n_subset = float(mask.sum())
        n_positive = float(y[mask].sum())
        s = float(score_array(n_positive, n_subset, mu))
        key = _descriptor_sort_key(constraints)
        if s > best_score or (s == best_score and (best_key is None or key < best_key)):
            best_score = s
            best_key = key
            best_constraints = constraints

    included = tuple(
        dict(best_constraints).get(z, tuple(range(card)))
        for z, card in enumerate(cards)
    )
    return _finalize(dataset, included, 0)
