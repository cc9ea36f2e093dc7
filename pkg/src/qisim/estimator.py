"""Measurement pipeline on frames: covariance, epsilon, SNR, error rate.

Conventions follow the receiver definition: the per-frame covariance uses
the plug-in estimator with divisor K, while SNR sample variances use
divisor n-1.  All pooled reductions run on exact integer sums of the
counts, so results are independent of summation order by construction
(we never accumulate in floating point until the final division).
"""
from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .types import (
    DegenerateStatisticError,
    Frame,
    InsufficientDataError,
)


@dataclass(frozen=True)
class CovarianceRecord:
    """Covariance estimate of one frame under one hypothesis."""

    delta12: float
    frame_index: int
    hypothesis: str


class PerrEstimate(NamedTuple):
    p_err: float
    threshold: float
    batches_in: int
    batches_out: int


def _frame_sums(frame: Frame) -> tuple[int, int, int]:
    n1 = frame.n1
    n2 = frame.n2
    return int(n1.sum()), int(n2.sum()), int(np.dot(n1, n2))


def covariance_hat(frame: Frame) -> float:
    """Plug-in covariance over the K pixel pairs of one frame:
    E[N1 N2] - E[N1] E[N2] with divisor K."""
    k = frame.pixel_pairs
    if k < 2:
        raise InsufficientDataError(f"need at least 2 pixel pairs (got {k})")
    s1, s2, s12 = _frame_sums(frame)
    return (k * s12 - s1 * s2) / k**2


def covariance_records(frames: Sequence[Frame], hypothesis: str) -> list[CovarianceRecord]:
    return [
        CovarianceRecord(
            delta12=covariance_hat(frame),
            frame_index=frame.frame_index,
            hypothesis=hypothesis,
        )
        for frame in frames
    ]


def _pooled_stats(frames: Sequence[Frame]) -> np.ndarray:
    """Per-frame integer sufficient statistics (S1, S2, S11, S22, S12, K)."""
    rows = np.empty((len(frames), 6), dtype=np.int64)
    for i, frame in enumerate(frames):
        n1 = frame.n1
        n2 = frame.n2
        rows[i] = (
            n1.sum(),
            n2.sum(),
            np.dot(n1, n1),
            np.dot(n2, n2),
            np.dot(n1, n2),
            n1.size,
        )
    return rows


def _epsilon_from_sums(sums: np.ndarray) -> np.ndarray:
    """Vectorized epsilon over rows of pooled sufficient statistics."""
    s1, s2, s11, s22, s12, n = (sums[..., i].astype(float) for i in range(6))
    mean1 = s1 / n
    mean2 = s2 / n
    var1 = s11 / n - mean1**2
    var2 = s22 / n - mean2**2
    cov = s12 / n - mean1 * mean2
    nv1 = var1 - mean1
    nv2 = var2 - mean2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where((nv1 > 0) & (nv2 > 0), cov / np.sqrt(nv1 * nv2), np.nan)
    return out


def epsilon_hat(frames: Sequence[Frame]) -> float:
    """Nonclassicality parameter from pooled sample moments over all
    pixels and frames; normally ordered variances are sample variance
    minus sample mean per arm."""
    if len(frames) < 2:
        raise InsufficientDataError("need at least 2 frames")
    total = _pooled_stats(frames).sum(axis=0)
    value = float(_epsilon_from_sums(total))
    if math.isnan(value):
        raise DegenerateStatisticError(
            "estimated normally ordered variance is not positive"
        )
    return value


def bootstrap_epsilon(
    frames: Sequence[Frame],
    resamples: int = 200,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """(epsilon_hat, bootstrap sigma), resampling whole frames."""
    point = epsilon_hat(frames)
    rng = rng if rng is not None else np.random.default_rng(0)
    stats = _pooled_stats(frames)
    idx = rng.integers(0, len(frames), size=(resamples, len(frames)))
    values = _epsilon_from_sums(stats[idx].sum(axis=1))
    good = values[np.isfinite(values)]
    if good.size < 2:
        raise DegenerateStatisticError("bootstrap resamples all degenerate")
    return point, float(np.std(good, ddof=1))


def _values(records: Sequence) -> np.ndarray:
    return np.asarray(
        [r.delta12 if isinstance(r, CovarianceRecord) else float(r) for r in records],
        dtype=float,
    )


def snr_hat(in_records: Sequence, out_records: Sequence) -> float:
    """|mean(in) - mean(out)| / sqrt(var(in) + var(out)), variances with
    divisor n-1.  This is the per-frame SNR; divide by sqrt(K) to compare
    against the per-pixel-pair analytic value."""
    a = _values(in_records)
    b = _values(out_records)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("need at least 2 records per hypothesis")
    denom_sq = a.var(ddof=1) + b.var(ddof=1)
    if denom_sq <= 0.0:
        raise DegenerateStatisticError("zero sample variance in both hypotheses")
    return float(abs(a.mean() - b.mean()) / math.sqrt(denom_sq))


def perr_hat(
    in_records: Sequence,
    out_records: Sequence,
    images_per_decision: int,
) -> PerrEstimate:
    """Empirical minimum error probability of the threshold receiver.

    Records are batched into decisions of `images_per_decision` frames,
    batch covariances averaged, and every midpoint between adjacent
    pooled batch means is scanned; ties resolve to the smallest
    threshold.  The batch counts are reported alongside.
    """
    if images_per_decision < 1:
        raise InsufficientDataError("images_per_decision must be >= 1")
    a = _values(in_records)
    b = _values(out_records)
    batches_in = a.size // images_per_decision
    batches_out = b.size // images_per_decision
    if batches_in < 10 or batches_out < 10:
        raise InsufficientDataError(
            f"need >= 10 batches per hypothesis (got {batches_in}, {batches_out})"
        )
    in_means = a[: batches_in * images_per_decision].reshape(batches_in, -1).mean(axis=1)
    out_means = b[: batches_out * images_per_decision].reshape(batches_out, -1).mean(axis=1)

    pooled = np.unique(np.concatenate([in_means, out_means]))
    candidates = [pooled[0] - 1.0]
    candidates.extend(0.5 * (pooled[:-1] + pooled[1:]))
    candidates.append(pooled[-1] + 1.0)

    best_p = math.inf
    best_tau = candidates[0]
    for tau in candidates:
        false_alarm = float(np.mean(out_means > tau))
        miss = float(np.mean(in_means <= tau))
        p = 0.5 * (false_alarm + miss)
        if p < best_p:
            best_p = p
            best_tau = float(tau)
    return PerrEstimate(best_p, best_tau, batches_in, batches_out)


def bootstrap_statistic(
    values: Sequence,
    stat_fn,
    resamples: int = 200,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """(stat_fn on full data, bootstrap sigma of stat_fn)."""
    data = _values(values)
    if data.size < 2:
        raise InsufficientDataError("need at least 2 values to bootstrap")
    rng = rng if rng is not None else np.random.default_rng(0)
    point = float(stat_fn(data))
    draws = np.empty(resamples)
    for i in range(resamples):
        draws[i] = stat_fn(data[rng.integers(0, data.size, size=data.size)])
    return point, float(np.std(draws, ddof=1))


def write_records_csv(path: str, records: Sequence[CovarianceRecord]) -> None:
    """Columns: frame,hypothesis,delta12."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "hypothesis", "delta12"])
        for record in records:
            writer.writerow([record.frame_index, record.hypothesis, repr(record.delta12)])


def load_records_csv(path: str) -> list[CovarianceRecord]:
    records = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            records.append(
                CovarianceRecord(
                    delta12=float(row["delta12"]),
                    frame_index=int(row["frame"]),
                    hypothesis=row["hypothesis"],
                )
            )
    return records
