"""Shared factories for test scenarios."""
from __future__ import annotations

from qisim.types import (
    BackgroundSpec,
    ChannelSpec,
    Scenario,
    SourceKind,
    SourceSpec,
)


def make_scenario(
    kind: SourceKind = SourceKind.TWIN_BEAM,
    mu: float = 0.075,
    modes: int = 90000,
    split_ratio: float = 0.5,
    eta1: float = 0.62,
    eta2: float = 0.62,
    reflectivity: float = 0.5,
    target_present: bool = True,
    mode_match: float = 1.0,
    modes_b: int = 1300,
    background_mean: float = 0.0,
    pixel_pairs: int = 80,
    images: int = 10,
) -> Scenario:
    return Scenario(
        source=SourceSpec(kind=kind, mu=mu, modes=modes, split_ratio=split_ratio),
        channel=ChannelSpec(
            eta1=eta1,
            eta2=eta2,
            reflectivity=reflectivity,
            target_present=target_present,
            mode_match=mode_match,
        ),
        background=BackgroundSpec(modes_b=modes_b, mean_total=background_mean),
        pixel_pairs=pixel_pairs,
        images=images,
    )


def rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0.0 else abs(a - b)
