"""Empirical significance of scan scores via parametric bootstrap.

Each replicate redraws every outcome independently as Bernoulli(global mean)
with the feature table fixed, reruns the full scan (restarts included, so the
null distribution reflects the same maximization that produced the observed
score), and records the replicate's best score. The empirical p-value is

    p = (1 + #{replicate score >= observed}) / (1 + n_replicates)

whose floor 1/(R+1) is reported explicitly through ``at_floor`` so a run of
identical floor values is not misread as insensitivity.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DegenerateDataError
from .scan import ScanConfig, scan
from .tabular import Dataset

_MAX_REDRAWS = 100  # attempts before giving up on an all-0/all-1 replicate


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, seed, and the scan configuration reused per replicate."""

    n_replicates: int = 50
    seed: int = 0
    scan_config: ScanConfig = field(default_factory=ScanConfig)

    def __post_init__(self) -> None:
        if self.n_replicates < 1:
            raise ContractError("n_replicates must be >= 1")
        if self.seed < 0:
            raise ContractError("seed must be a non-negative integer")


@dataclass(frozen=True)
class PValueResult:
    p_value: float
    replicate_scores: tuple[float, ...]
    at_floor: bool


def _replicate_score(
    dataset: Dataset,
    config: BootstrapConfig,
    replicate_index: int,
    max_redraws: int = _MAX_REDRAWS,
) -> float:
    """Best scan score of one null replicate; degenerate draws are redrawn."""
    mu = dataset.global_mean
    for attempt in range(max_redraws):
        seq = np.random.SeedSequence([config.seed, replicate_index, attempt])
        outcome_seq, scan_seq = seq.spawn(2)
        rng = np.random.default_rng(outcome_seq)
        y = (rng.random(dataset.n_records) < mu).astype(np.int8)
        total = int(y.sum())
        if total == 0 or total == dataset.n_records:
            continue
        replicate = dataset.with_outcomes(y)
        rep_config = replace(config.scan_config, seed=int(scan_seq.generate_state(1)[0]))
        return scan(replicate, rep_config).panel.score
    raise DegenerateDataError(
        f"replicate {replicate_index} drew degenerate outcomes "
        f"{max_redraws} times in a row"
    )


def _replicate_task(args: tuple[Dataset, BootstrapConfig, int]) -> float:
    return _replicate_score(*args)


def null_score_distribution(
    dataset: Dataset, config: BootstrapConfig, *, workers: int = 1
) -> np.ndarray:
    """Replicate max-score sample under the null; deterministic given the seed.

    Replicate streams derive from (seed, replicate index), so results do not
    depend on the worker count.
    """
    tasks = [(dataset, config, r) for r in range(config.n_replicates)]
    if workers > 1 and config.n_replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(
                pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (workers * 2)))
            )
    else:
        scores = [_replicate_task(t) for t in tasks]
    return np.asarray(scores, dtype=np.float64)


def p_from_null_scores(
    observed_score: float, null_scores: np.ndarray
) -> tuple[float, bool]:
    """(empirical p, at-floor flag) of an observed score against null scores."""
    if observed_score < 0:
        raise ContractError("observed_score must be >= 0")
    exceed = int(np.count_nonzero(np.asarray(null_scores) >= observed_score))
    p = (1 + exceed) / (1 + len(null_scores))
    return p, exceed == 0


def empirical_p_value(
    dataset: Dataset,
    observed_score: float,
    config: BootstrapConfig,
    *,
    workers: int = 1,
) -> PValueResult:
    """Empirical p-value of an observed scan score on this dataset."""
    if observed_score < 0:
        raise ContractError("observed_score must be >= 0")
    null_scores = null_score_distribution(dataset, config, workers=workers)
    p, at_floor = p_from_null_scores(observed_score, null_scores)
    return PValueResult(p, tuple(float(s) for s in null_scores), at_floor)
