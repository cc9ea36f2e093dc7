"""Seeded Monte Carlo generation of photon-count frames.

Counts are drawn at the aggregate level: the total photon number of M
i.i.d. thermal modes is negative binomial, and binomial thinning encodes
losses, reflectivity and the classical splitter.  This is exact (sums of
independent thermal modes stay negative binomial; thinning a thermal beam
keeps it thermal) and removes any per-mode loop, which is what makes
full-experiment mode counts (~1e5 modes per pixel) affordable.

Reproducibility: every frame draws from its own child stream derived from
(master_seed, hypothesis, frame_index), and pixels of a frame are drawn
in one fixed vectorized sequence, so output is bit-identical no matter
how frames are distributed over workers or in which order they run.
"""
from __future__ import annotations

import csv
from collections.abc import Sequence

import numpy as np

from .types import (
    BackgroundSpec,
    ChannelSpec,
    Frame,
    ParameterError,
    Scenario,
    SeedSpec,
    SourceKind,
    SourceSpec,
)

# Above this many expected photons per pixel, int64 sums of squared
# counts in the estimators stop being safe.
_MEAN_PHOTON_LIMIT = 1e6


def _negbin(
    rng: np.random.Generator, modes: float, total_mean: float, size: int
) -> np.ndarray:
    """Total counts of `modes` i.i.d. thermal modes with the given total mean."""
    if total_mean == 0.0:
        return np.zeros(size, dtype=np.int64)
    if total_mean > _MEAN_PHOTON_LIMIT:
        raise ParameterError(
            f"expected photon number {total_mean} exceeds sampling limit"
        )
    p = modes / (modes + total_mean)
    return rng.negative_binomial(modes, p, size=size).astype(np.int64)


def _sample_pair_counts(
    source: SourceSpec,
    channel: ChannelSpec,
    rng: np.random.Generator,
    size: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vector draw of `size` pixel pairs (n1, n2_correlated).

    Draw order is fixed: shared component, arm-1 thinning, arm-2 thinning,
    then the mode-mismatched replacements. Changing it changes every
    downstream stream, so treat it as part of the wire format.
    """
    e1 = channel.eta1
    e2 = channel.arm2_efficiency
    target = channel.target_present
    matched = channel.mode_match * source.modes
    unmatched = source.modes - matched

    if source.kind is SourceKind.TWIN_BEAM:
        shared = (
            _negbin(rng, matched, matched * source.mu, size)
            if matched > 0
            else np.zeros(size, np.int64)
        )
        n1 = rng.binomial(shared, e1).astype(np.int64)
        n2 = rng.binomial(shared, e2).astype(np.int64) if target else np.zeros(size, np.int64)
        arm2_per_mode = e2 * source.mu
    else:
        nu = source.pre_split_mean
        t = source.split_ratio
        shared = (
            _negbin(rng, matched, matched * nu, size)
            if matched > 0
            else np.zeros(size, np.int64)
        )
        to_arm1 = rng.binomial(shared, t).astype(np.int64)
        n1 = rng.binomial(to_arm1, e1).astype(np.int64)
        if target:
            n2 = rng.binomial(shared - to_arm1, e2).astype(np.int64)
        else:
            n2 = np.zeros(size, np.int64)
        arm2_per_mode = e2 * (1.0 - t) * nu

    if unmatched > 0.0:
        n1 = n1 + _negbin(rng, unmatched, unmatched * channel.eta1 * source.mu, size)
        if target:
            n2 = n2 + _negbin(rng, unmatched, unmatched * arm2_per_mode, size)
    return n1, n2


def sample_pixel_pair(
    source: SourceSpec, channel: ChannelSpec, rng: np.random.Generator
) -> tuple[int, int]:
    """One (n1, n2_correlated) draw from the given stream."""
    n1, n2 = _sample_pair_counts(source, channel, rng, size=1)
    return int(n1[0]), int(n2[0])


def _sample_background_counts(
    background: BackgroundSpec, rng: np.random.Generator, size: int
) -> np.ndarray:
    return _negbin(rng, background.modes_b, background.mean_total, size)


def sample_background(background: BackgroundSpec, rng: np.random.Generator) -> int:
    """One multithermal background draw (detected units)."""
    return int(_sample_background_counts(background, rng, size=1)[0])


def generate_frame(
    scenario: Scenario,
    target_present: bool,
    seed: SeedSpec,
    frame_index: int,
    read_noise_sigma: float = 0.0,
) -> Frame:
    """One frame of K independent pixel pairs; deterministic in
    (scenario, target_present, seed, frame_index)."""
    rng = seed.frame_rng(target_present, frame_index)
    k = scenario.pixel_pairs
    channel = scenario.channel
    if channel.target_present != target_present:
        scenario = scenario.with_target(target_present)
        channel = scenario.channel
    n1, n2 = _sample_pair_counts(scenario.source, channel, rng, k)
    if scenario.background.mean_total > 0.0:
        n2 = n2 + _sample_background_counts(scenario.background, rng, k)
    if read_noise_sigma > 0.0:
        n1 = np.maximum(n1 + np.rint(rng.normal(0.0, read_noise_sigma, k)).astype(np.int64), 0)
        n2 = np.maximum(n2 + np.rint(rng.normal(0.0, read_noise_sigma, k)).astype(np.int64), 0)
    return Frame(n1=n1, n2=n2, target_present=target_present, frame_index=frame_index)


def generate_image_set(
    scenario: Scenario,
    seed: SeedSpec,
    read_noise_sigma: float = 0.0,
) -> tuple[list[Frame], list[Frame]]:
    """N_img frames per hypothesis: ("in" = scenario as configured,
    "out" = target removed), on disjoint seed streams."""
    in_seed = seed.derive(1)
    out_seed = seed.derive(0)
    in_frames = [
        generate_frame(scenario, scenario.channel.target_present, in_seed, i, read_noise_sigma)
        for i in range(scenario.images)
    ]
    out_frames = [
        generate_frame(scenario, False, out_seed, i, read_noise_sigma)
        for i in range(scenario.images)
    ]
    return in_frames, out_frames


def write_frames_csv(
    path: str,
    in_frames: Sequence[Frame],
    out_frames: Sequence[Frame],
) -> None:
    """Dump one image set: columns frame,pixel,n1,n2,hypothesis."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frame", "pixel", "n1", "n2", "hypothesis"])
        for label, frames in (("in", in_frames), ("out", out_frames)):
            for frame in frames:
                for pixel in range(frame.pixel_pairs):
                    writer.writerow(
                        [frame.frame_index, pixel, int(frame.n1[pixel]), int(frame.n2[pixel]), label]
                    )
