"""Brute-force exact reference for small instances.

Builds the full joint probability table of the detected pair (N1, N2) by
mixing the conditional detection laws over the enumerated photon-number
distribution of the source, then convolving in uncorrelated components
(mode-mismatched light, background).  Moments are then plain weighted
sums over the table.  Nothing here shares code or algebra with the
closed-form `analytic` module, which is the point: the two must agree.

Instances are small by contract; full-experiment mode counts are rejected by
the state budget guard.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy import stats

from .types import (
    BackgroundSpec,
    ChannelSpec,
    InfeasibleInstanceError,
    MomentSet,
    SourceKind,
    SourceSpec,
)

# Cap on the n-loop work of the conditional mixture (sum of (n+1)^2 terms).
_MIX_COST_LIMIT = 2 * 10**8


@dataclass(frozen=True)
class JointDistribution:
    """Probability table over (n1, n2); index equals count."""

    probs: np.ndarray
    tail_bound: float

    def validate(self) -> None:
        if (self.probs < -1e-15).any():
            raise AssertionError("negative probability in joint table")
        total = float(self.probs.sum())
        if not (1.0 - 1e-12 <= total + self.tail_bound <= 1.0 + 1e-12):
            raise AssertionError(f"mass {total} + tail {self.tail_bound} not ~1")

    def marginal1(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def marginal2(self) -> np.ndarray:
        return self.probs.sum(axis=0)


def _negbin_weights(modes: float, total_mean: float, cutoff: float) -> np.ndarray:
    """pmf of an `modes`-mode thermal beam with the given total mean,
    truncated where the upper tail falls below `cutoff` (plus margin so
    that fourth moments are unaffected by the truncation)."""
    if total_mean == 0.0:
        return np.ones(1)
    mean_per_mode = total_mean / modes
    p = 1.0 / (1.0 + mean_per_mode)
    n_hi = int(stats.nbinom.ppf(1.0 - cutoff, modes, p))
    variance = total_mean * (1.0 + mean_per_mode)
    n_hi += 30 + int(6.0 * np.sqrt(variance))
    return stats.nbinom.pmf(np.arange(n_hi + 1), modes, p)


def _pair_table_twin(weights: np.ndarray, e1: float, e2: float) -> np.ndarray:
    """Joint table for a shared-photon-number pair: both arms see the same
    n photons, each independently thinned."""
    n_max = weights.size - 1
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        k = np.arange(n + 1)
        table[: n + 1, : n + 1] += weights[n] * np.outer(
            stats.binom.pmf(k, n, e1), stats.binom.pmf(k, n, e2)
        )
    return table


def _pair_table_split(
    weights: np.ndarray, t: float, e1: float, e2: float
) -> np.ndarray:
    """Joint table for a split beam: each of the n photons is routed to
    arm 1 with probability t*e1, to arm 2 with probability (1-t)*e2,
    otherwise lost (exact per-photon trinomial)."""
    p1 = t * e1
    p2 = (1.0 - t) * e2
    p2_given_not1 = p2 / (1.0 - p1)
    n_max = weights.size - 1
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        a = np.arange(n + 1)
        pa = stats.binom.pmf(a, n, p1)
        pb = stats.binom.pmf(a[None, :], (n - a)[:, None], p2_given_not1)
        table[: n + 1, : n + 1] += weights[n] * (pa[:, None] * pb)
    return table


def _thinned_component(
    modes: float, pre_detection_mean_per_mode: float, efficiency: float, cutoff: float
) -> np.ndarray:
    """pmf of detected counts from `modes` thermal modes after binomial
    thinning, computed by explicit mixing (no thinning-closure shortcut)."""
    weights = _negbin_weights(modes, modes * pre_detection_mean_per_mode, cutoff)
    n_max = weights.size - 1
    pmf = np.zeros(n_max + 1)
    k = np.arange(n_max + 1)
    for n in range(n_max + 1):
        pmf[: n + 1] += weights[n] * stats.binom.pmf(k[: n + 1], n, efficiency)
    return pmf


def _convolve_axis(table: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    if kernel.size == 1:
        return table * kernel[0]
    shape = (kernel.size, 1) if axis == 0 else (1, kernel.size)
    return signal.convolve(table, kernel.reshape(shape), method="direct")


def joint_distribution(
    source: SourceSpec,
    channel: ChannelSpec,
    background: BackgroundSpec,
    cutoff_tail: float = 1e-12,
    max_states: int = 10**7,
) -> JointDistribution:
    """Enumerate the exact joint distribution of the detected pair."""
    e1 = channel.eta1
    e2 = channel.arm2_efficiency if channel.target_present else 0.0
    matched = channel.mode_match * source.modes
    unmatched = (1.0 - channel.mode_match) * source.modes

    if source.kind is SourceKind.TWIN_BEAM:
        pre_mean = source.mu
        arm2_detected_per_mode = e2 * source.mu
    else:
        pre_mean = source.pre_split_mean
        arm2_detected_per_mode = e2 * (1.0 - source.split_ratio) * pre_mean

    shared_weights = _negbin_weights(matched, matched * pre_mean, cutoff_tail)
    mix_cost = int(np.sum((np.arange(shared_weights.size) + 1.0) ** 2))
    if mix_cost > _MIX_COST_LIMIT:
        raise InfeasibleInstanceError(
            f"conditional mixture needs {mix_cost} terms (> {_MIX_COST_LIMIT})"
        )

    kernels_axis0 = []
    kernels_axis1 = []
    if unmatched > 0.0 and source.mu > 0.0:
        if source.kind is SourceKind.TWIN_BEAM:
            kernels_axis0.append(_thinned_component(unmatched, source.mu, e1, cutoff_tail))
        else:
            kernels_axis0.append(
                _thinned_component(unmatched, pre_mean, source.split_ratio * e1, cutoff_tail)
            )
        if e2 > 0.0:
            if source.kind is SourceKind.TWIN_BEAM:
                kernels_axis1.append(_thinned_component(unmatched, source.mu, e2, cutoff_tail))
            else:
                kernels_axis1.append(
                    _thinned_component(
                        unmatched, pre_mean, (1.0 - source.split_ratio) * e2, cutoff_tail
                    )
                )
    if background.mean_total > 0.0:
        kernels_axis1.append(
            _negbin_weights(background.modes_b, background.mean_total, cutoff_tail)
        )

    size1 = shared_weights.size + sum(k.size - 1 for k in kernels_axis0)
    size2 = shared_weights.size + sum(k.size - 1 for k in kernels_axis1)
    if size1 * size2 > max_states:
        raise InfeasibleInstanceError(
            f"joint support {size1}x{size2} exceeds {max_states} states"
        )

    if source.kind is SourceKind.TWIN_BEAM:
        table = _pair_table_twin(shared_weights, e1, e2)
    else:
        table = _pair_table_split(shared_weights, source.split_ratio, e1, e2)

    for kernel in kernels_axis0:
        table = _convolve_axis(table, kernel, axis=0)
    for kernel in kernels_axis1:
        table = _convolve_axis(table, kernel, axis=1)

    tail = max(0.0, 1.0 - float(table.sum()))
    return JointDistribution(probs=table, tail_bound=tail)


def enumerate_moments(
    source: SourceSpec,
    channel: ChannelSpec,
    background: BackgroundSpec,
    cutoff_tail: float = 1e-12,
    max_states: int = 10**7,
) -> MomentSet:
    """Exact MomentSet by direct summation over the enumerated joint."""
    joint = joint_distribution(source, channel, background, cutoff_tail, max_states)
    probs = joint.probs
    mass = probs.sum()
    n1 = np.arange(probs.shape[0], dtype=float)[:, None]
    n2 = np.arange(probs.shape[1], dtype=float)[None, :]
    mean1 = float((probs * n1).sum() / mass)
    mean2 = float((probs * n2).sum() / mass)
    d1 = n1 - mean1
    d2 = n2 - mean2
    var1 = float((probs * d1**2).sum() / mass)
    var2 = float((probs * d2**2).sum() / mass)
    cov = float((probs * d1 * d2).sum() / mass)
    m22 = float((probs * d1**2 * d2**2).sum() / mass)
    return MomentSet(mean1=mean1, mean2=mean2, var1=var1, var2=var2, cov=cov, m22=m22)
