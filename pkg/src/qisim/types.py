"""Domain types shared across the simulator, estimators and sweep harness.

All value types are frozen dataclasses validated at construction, so any
function receiving one can trust the physical ranges.  Everything here is
immutable and safe to share across threads.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """A field of a domain type is out of its physical range."""


class DegenerateStatisticError(ValueError):
    """A denominator (normally ordered variance, sample variance) is not positive."""


class InsufficientDataError(ValueError):
    """Too few realizations to evaluate an estimator."""


class InfeasibleInstanceError(ValueError):
    """Exact enumeration would exceed the configured state budget."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite (got {value!r})")


class SourceKind(enum.Enum):
    """Illumination source: entangled pair or classically split thermal beam."""

    TWIN_BEAM = "twin_beam"
    SPLIT_THERMAL = "split_thermal"

    @classmethod
    def parse(cls, text: str) -> "SourceKind":
        for kind in cls:
            if kind.value == text:
                return kind
        raise ParameterError(
            f"kind must be one of {[k.value for k in cls]} (got {text!r})"
        )


@dataclass(frozen=True)
class SourceSpec:
    """Illumination source model.

    mu is the mean photon number per spatiotemporal mode of each arm;
    modes is the number of modes collected per pixel pair.  For the split
    thermal source the pre-split beam carries mu/split_ratio photons per
    mode so that arm 1 keeps a per-mode mean of mu regardless of the
    splitting ratio.
    """

    kind: SourceKind
    mu: float
    modes: int
    split_ratio: float = 0.5

    def __post_init__(self) -> None:
        _require_finite("mu", self.mu)
        _require(self.mu >= 0.0, f"mu must be >= 0 (got {self.mu})")
        _require(
            isinstance(self.modes, (int, np.integer)) and self.modes >= 1,
            f"modes must be a positive integer (got {self.modes})",
        )
        _require_finite("split_ratio", self.split_ratio)
        _require(
            0.0 < self.split_ratio < 1.0,
            f"split_ratio must lie strictly inside (0, 1) (got {self.split_ratio})",
        )

    @property
    def pre_split_mean(self) -> float:
        """Per-mode mean of the beam before the classical splitter."""
        return self.mu / self.split_ratio


@dataclass(frozen=True)
class ChannelSpec:
    """Detection efficiencies and target model.

    When the target is present, the probe arm is attenuated by
    eta2 * reflectivity; mode_match is the fraction of probe modes that
    remain pairwise correlated with the pixel on the reference arm (the
    remainder is replaced by statistically identical but uncorrelated
    light, which lowers the measured cross correlation without touching
    the local statistics).  When the target is absent nothing correlated
    reaches arm 2 at all.
    """

    eta1: float
    eta2: float
    reflectivity: float = 0.5
    target_present: bool = True
    mode_match: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta1", "eta2", "reflectivity", "mode_match"):
            value = getattr(self, name)
            _require_finite(name, value)
            _require(0.0 <= value <= 1.0, f"{name} must lie in [0, 1] (got {value})")

    @property
    def arm2_efficiency(self) -> float:
        """Detected fraction of probe-arm light when the target is present."""
        return self.eta2 * self.reflectivity


@dataclass(frozen=True)
class BackgroundSpec:
    """Multithermal background on the probe arm: modes_b modes, total
    detected mean mean_total, variance mean_total * (1 + mean_total/modes_b)."""

    modes_b: int = 1
    mean_total: float = 0.0

    def __post_init__(self) -> None:
        _require(
            isinstance(self.modes_b, (int, np.integer)) and self.modes_b >= 1,
            f"modes_b must be a positive integer (got {self.modes_b})",
        )
        _require_finite("mean_total", self.mean_total)
        _require(self.mean_total >= 0.0, f"mean_total must be >= 0 (got {self.mean_total})")

    @property
    def mean_per_mode(self) -> float:
        return self.mean_total / self.modes_b


@dataclass(frozen=True)
class Scenario:
    """A complete experiment configuration: source, channel, background,
    number of pixel pairs per frame (K) and frames per hypothesis."""

    source: SourceSpec
    channel: ChannelSpec
    background: BackgroundSpec
    pixel_pairs: int
    images: int

    def __post_init__(self) -> None:
        _require(
            isinstance(self.pixel_pairs, (int, np.integer)) and self.pixel_pairs >= 1,
            f"pixel_pairs must be a positive integer (got {self.pixel_pairs})",
        )
        _require(
            isinstance(self.images, (int, np.integer)) and self.images >= 1,
            f"images must be a positive integer (got {self.images})",
        )

    def with_target(self, present: bool) -> "Scenario":
        return dataclasses.replace(
            self, channel=dataclasses.replace(self.channel, target_present=present)
        )

    def with_background_mean(self, mean_total: float) -> "Scenario":
        return dataclasses.replace(
            self,
            background=dataclasses.replace(self.background, mean_total=mean_total),
        )

    def with_mu(self, mu: float) -> "Scenario":
        return dataclasses.replace(self, source=dataclasses.replace(self.source, mu=mu))

    def with_images(self, images: int) -> "Scenario":
        return dataclasses.replace(self, images=images)

    def with_source_kind(self, kind: SourceKind) -> "Scenario":
        return dataclasses.replace(self, source=dataclasses.replace(self.source, kind=kind))


@dataclass(frozen=True)
class MomentSet:
    """Joint central moments of the detected counts (N1, N2) per pixel pair.

    m22 is the fourth-order joint central moment <dN1^2 dN2^2>; together
    with cov it gives the variance of the product statistic,
    var(dN1 dN2) = m22 - cov^2, which drives every noise figure.
    """

    mean1: float
    mean2: float
    var1: float
    var2: float
    cov: float
    m22: float

    @property
    def normally_ordered_var1(self) -> float:
        return self.var1 - self.mean1

    @property
    def normally_ordered_var2(self) -> float:
        return self.var2 - self.mean2

    @property
    def delta_product_variance(self) -> float:
        return self.m22 - self.cov**2

    def check_consistency(self, rtol: float = 1e-9) -> None:
        """Assert the defining inequalities, tolerating float roundoff."""
        scale = max(abs(self.var1), abs(self.var2), 1.0)
        if self.var1 < -rtol * scale or self.var2 < -rtol * scale:
            raise AssertionError(f"negative variance in {self}")
        if self.cov**2 > self.var1 * self.var2 * (1.0 + rtol) + rtol * scale**2:
            raise AssertionError(f"cov^2 exceeds var1*var2 in {self}")
        if self.m22 < self.cov**2 * (1.0 - rtol) - rtol * scale**2:
            raise AssertionError(f"m22 below cov^2 in {self}")


@dataclass(frozen=True)
class Frame:
    """One acquired image: K pixel-pair count records."""

    n1: np.ndarray
    n2: np.ndarray
    target_present: bool
    frame_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "n1", np.asarray(self.n1, dtype=np.int64))
        object.__setattr__(self, "n2", np.asarray(self.n2, dtype=np.int64))
        if self.n1.shape != self.n2.shape or self.n1.ndim != 1:
            raise ParameterError("n1 and n2 must be 1-d arrays of equal length")
        if self.n1.size < 1:
            raise ParameterError("frame must contain at least one pixel pair")
        if (self.n1 < 0).any() or (self.n2 < 0).any():
            raise ParameterError("counts must be non-negative")

    @property
    def pixel_pairs(self) -> int:
        return int(self.n1.size)


# Stream domains hashed into every child seed, so that "in" and "out"
# hypothesis frames can never collide on the same random stream.
STREAM_OUT = 0
STREAM_IN = 1
STREAM_BOOTSTRAP = 2


@dataclass(frozen=True)
class SeedSpec:
    """Root of all randomness.

    Child streams are derived by hashing (master_seed, *tags) through
    numpy's SeedSequence, so generation is reproducible bit-for-bit no
    matter in which order or on how many workers frames are produced.
    """

    master_seed: int

    def __post_init__(self) -> None:
        _require(
            isinstance(self.master_seed, (int, np.integer)) and 0 <= self.master_seed < 2**64,
            f"master_seed must be an unsigned 64-bit integer (got {self.master_seed})",
        )

    def child_sequence(self, *tags: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((self.master_seed, *tags))

    def rng(self, *tags: int) -> np.random.Generator:
        return np.random.default_rng(self.child_sequence(*tags))

    def derive(self, *tags: int) -> "SeedSpec":
        """A new independent SeedSpec, e.g. one per sweep point."""
        child = int(self.child_sequence(*tags).generate_state(1, np.uint64)[0])
        return SeedSpec(child)

    def frame_rng(self, target_present: bool, frame_index: int) -> np.random.Generator:
        domain = STREAM_IN if target_present else STREAM_OUT
        return self.rng(domain, frame_index)
