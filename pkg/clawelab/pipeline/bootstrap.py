"""
Bootstrap uncertainties for raw and mitigated observables.

Each resample redraws every input ShotRecord from its own empirical outcome
distribution (same shot count) and reruns the whole estimation recipe, so
calibration and target statistics propagate jointly. Exact (shot-free) records
are never redrawn.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from tqdm import tqdm

from ..config import DEFAULT_RESAMPLES
from ..errors import CalibrationWarning, InvalidStateError, MitigationError
from .qpu import ShotRecord


@dataclass(frozen=True)
class BootstrapResult:
    estimate: float  # statistic on the original records
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    n_resamples: int
    drop_rate: float = 0.0


def resample_record(rec: ShotRecord, rng: np.random.Generator) -> ShotRecord:
    if rec.is_exact:
        return rec
    labels = list(rec.counts)
    probs = np.array([rec.counts[b] for b in labels], dtype=float) / rec.n_shots
    draws = rng.multinomial(rec.n_shots, probs)
    return ShotRecord({b: int(n) for b, n in zip(labels, draws) if n > 0}, rec.n_shots)


def propagate_through_mitigation(
    records: Sequence[ShotRecord],
    pipeline: Callable[[Sequence[ShotRecord]], float],
    n_resamples: int = DEFAULT_RESAMPLES,
    rng_seed: int = 0,
    verbose: bool = False,
) -> BootstrapResult:
    """
    Bootstrap a recipe that maps aligned ShotRecords to one number.

    Args:
        records: Inputs of the recipe (target and calibration records)
        pipeline: The estimation recipe, e.g. a CLAWE inversion or ZNE fit
        n_resamples: Number of joint resamples
        rng_seed: Seed; resample r uses the r-th spawned child stream

    Returns:
        BootstrapResult; resamples on which the recipe raises MitigationError are
        dropped and counted in drop_rate
    """
    if n_resamples < 2:
        raise MitigationError(f"n_resamples must be >= 2, got {n_resamples}")
    if not records:
        raise InvalidStateError("no records to resample")

    estimate = float(pipeline(records))
    if all(r.is_exact for r in records):
        return BootstrapResult(estimate, estimate, 0.0, estimate, estimate, n_resamples, 0.0)

    children = np.random.SeedSequence(rng_seed).spawn(n_resamples)
    values = []
    dropped = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        for child in tqdm(children, desc="Bootstrap", disable=not verbose, leave=False):
            rng = np.random.default_rng(child)
            redrawn = [resample_record(r, rng) for r in records]
            try:
                values.append(float(pipeline(redrawn)))
            except MitigationError:
                dropped += 1

    if not values:
        raise MitigationError(f"all {n_resamples} bootstrap resamples failed")
    values = np.asarray(values)
    return BootstrapResult(
        estimate=estimate,
        mean=float(values.mean()),
        stderr=float(values.std(ddof=1)) if len(values) > 1 else 0.0,
        ci_low=float(np.percentile(values, 2.5)),
        ci_high=float(np.percentile(values, 97.5)),
        n_resamples=n_resamples,
        drop_rate=dropped / n_resamples,
    )


def bootstrap(
    rec: ShotRecord,
    statistic: Callable[[ShotRecord], float],
    n_resamples: int = DEFAULT_RESAMPLES,
    rng_seed: int = 0,
) -> BootstrapResult:
    """Plain bootstrap of one record's statistic."""
    if not rec.is_exact and not rec.counts:
        raise InvalidStateError("empty shot record")
    return propagate_through_mitigation([rec], lambda recs: statistic(recs[0]), n_resamples, rng_seed)
