"""Declarative parameter sweeps with Monte Carlo and closed-form columns.

A sweep runs one (source kind, swept value) job per grid point, each on
its own derived seed, so results are byte-identical no matter how many
workers execute the grid.  Estimator failures flag the affected row and
never abort the sweep.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analytic
from .estimator import (
    bootstrap_epsilon,
    covariance_records,
    perr_hat,
    snr_hat,
    _values,
)
from .sampler import generate_frame
from .types import (
    DegenerateStatisticError,
    InsufficientDataError,
    ParameterError,
    Scenario,
    SeedSpec,
    SourceKind,
    STREAM_BOOTSTRAP,
)

KNOWN_OUTPUTS = ("epsilon", "snr", "covariance", "perr")


class SweepParameter(enum.Enum):
    BACKGROUND_MEAN = "background_mean"
    IMAGES_PER_DECISION = "images_per_decision"
    MU = "mu"

    @classmethod
    def parse(cls, text: str) -> "SweepParameter":
        for member in cls:
            if member.value == text:
                return member
        raise ParameterError(
            f"parameter must be one of {[m.value for m in cls]} (got {text!r})"
        )


@dataclass(frozen=True)
class SweepSpec:
    """One experiment grid: base scenario, the swept axis and its values,
    the sources to compare and the figures of merit to emit."""

    base: Scenario
    parameter: SweepParameter
    values: tuple
    sources: tuple
    outputs: tuple
    seed: SeedSpec
    emit_analytic: bool = True
    images_per_decision: int = 10
    read_noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ParameterError("values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ParameterError("values must be strictly increasing")
        unknown = [o for o in self.outputs if o not in KNOWN_OUTPUTS]
        if unknown:
            raise ParameterError(f"unknown outputs {unknown}; known: {KNOWN_OUTPUTS}")
        if len(self.sources) == 0:
            raise ParameterError("sources must be non-empty")
        if self.images_per_decision < 1:
            raise ParameterError("images_per_decision must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    source: str
    param: str
    value: float
    metric: str
    estimate: float | None
    uncertainty: float | None
    analytic: float | None
    flag: str = ""


@dataclass(frozen=True)
class SweepResult:
    rows: tuple

    def to_csv_text(self) -> str:
        def fmt(x) -> str:
            return "" if x is None else repr(float(x))

        lines = ["source,param,value,metric,estimate,uncertainty,analytic,flag"]
        for r in self.rows:
            lines.append(
                f"{r.source},{r.param},{fmt(r.value)},{r.metric},"
                f"{fmt(r.estimate)},{fmt(r.uncertainty)},{fmt(r.analytic)},{r.flag}"
            )
        return "\n".join(lines) + "\n"


def _scenario_at(spec: SweepSpec, kind: SourceKind, value: float) -> tuple[Scenario, int]:
    scn = spec.base.with_source_kind(kind)
    ipd = spec.images_per_decision
    if spec.parameter is SweepParameter.BACKGROUND_MEAN:
        scn = scn.with_background_mean(value)
    elif spec.parameter is SweepParameter.MU:
        scn = scn.with_mu(value)
    else:
        ipd = int(value)
    return scn, ipd


def _analytic_value(metric: str, scn: Scenario, ipd: int):
    if metric == "epsilon":
        return analytic.epsilon(scn)
    if metric == "snr":
        return analytic.snr(scn)
    if metric == "covariance_in":
        return analytic.moments(scn).cov
    if metric == "covariance_out":
        return 0.0
    if metric == "perr":
        return analytic.error_probability(scn, ipd)
    raise ParameterError(f"no analytic form for metric {metric!r}")


_ESTIMATOR_ERRORS = (DegenerateStatisticError, InsufficientDataError, ParameterError)


def _point_rows(spec: SweepSpec, source_index: int, value_index: int) -> list[SweepRow]:
    kind = spec.sources[source_index]
    value = spec.values[value_index]
    scn, ipd = _scenario_at(spec, kind, value)
    point_seed = spec.seed.derive(source_index, value_index)

    needs_out = any(o in spec.outputs for o in ("snr", "perr", "covariance"))
    in_seed = point_seed.derive(1)
    in_frames = [
        generate_frame(scn, scn.channel.target_present, in_seed, i, spec.read_noise_sigma)
        for i in range(scn.images)
    ]
    out_frames = []
    if needs_out:
        out_seed = point_seed.derive(0)
        out_frames = [
            generate_frame(scn, False, out_seed, i, spec.read_noise_sigma)
            for i in range(scn.images)
        ]
    in_records = covariance_records(in_frames, "in")
    out_records = covariance_records(out_frames, "out") if needs_out else []

    rows: list[SweepRow] = []

    def emit(metric: str, boot_tag: int, compute) -> None:
        estimate = uncertainty = None
        flags = []
        rng = point_seed.rng(STREAM_BOOTSTRAP, boot_tag)
        try:
            estimate, uncertainty = compute(rng)
        except _ESTIMATOR_ERRORS as exc:
            flags.append(f"error:{type(exc).__name__}")
        reference = None
        if spec.emit_analytic:
            try:
                reference = _analytic_value(metric, scn, ipd)
            except _ESTIMATOR_ERRORS as exc:
                flags.append(f"analytic_error:{type(exc).__name__}")
        rows.append(
            SweepRow(
                source=kind.value,
                param=spec.parameter.value,
                value=value,
                metric=metric,
                estimate=estimate,
                uncertainty=uncertainty,
                analytic=reference,
                flag=";".join(flags),
            )
        )

    def mc_epsilon(rng):
        return bootstrap_epsilon(in_frames, rng=rng)

    def mc_cov(records):
        def compute(rng):
            data = _values(records)
            if data.size < 2:
                raise InsufficientDataError("need at least 2 records")
            means = np.empty(200)
            for i in range(200):
                means[i] = data[rng.integers(0, data.size, data.size)].mean()
            return float(data.mean()), float(np.std(means, ddof=1))

        return compute

    def mc_snr(rng):
        k = scn.pixel_pairs
        point = snr_hat(in_records, out_records) / math.sqrt(k)
        a = _values(in_records)
        b = _values(out_records)
        draws = []
        for _ in range(200):
            ra = a[rng.integers(0, a.size, a.size)]
            rb = b[rng.integers(0, b.size, b.size)]
            try:
                draws.append(snr_hat(ra, rb) / math.sqrt(k))
            except DegenerateStatisticError:
                continue
        if len(draws) < 2:
            raise DegenerateStatisticError("bootstrap resamples all degenerate")
        return point, float(np.std(draws, ddof=1))

    def mc_perr(rng):
        point = perr_hat(in_records, out_records, ipd)
        a = _values(in_records)
        b = _values(out_records)
        draws = np.empty(200)
        for i in range(200):
            ra = a[rng.integers(0, a.size, a.size)]
            rb = b[rng.integers(0, b.size, b.size)]
            draws[i] = perr_hat(ra, rb, ipd).p_err
        return float(point.p_err), float(np.std(draws, ddof=1))

    for output in spec.outputs:
        if output == "epsilon":
            emit("epsilon", 0, mc_epsilon)
        elif output == "covariance":
            emit("covariance_in", 1, mc_cov(in_records))
            emit("covariance_out", 2, mc_cov(out_records))
        elif output == "snr":
            emit("snr", 3, mc_snr)
        elif output == "perr":
            emit("perr", 4, mc_perr)
    return rows


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Run every (source, value) job; deterministic under `spec.seed`
    regardless of `threads`, since jobs own disjoint derived streams and
    rows are assembled in grid order, not completion order."""
    jobs = [
        (si, vi)
        for si in range(len(spec.sources))
        for vi in range(len(spec.values))
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _point_rows(spec, *job), jobs))
    else:
        results = [_point_rows(spec, *job) for job in jobs]
    rows: list[SweepRow] = []
    for point in results:
        rows.extend(point)
    return SweepResult(rows=tuple(rows))


def write_sweep_csv(result: SweepResult, path: str) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(result.to_csv_text())


def sidecar_text(spec: SweepSpec) -> str:
    """Resolved configuration of a sweep, in the same key-value format the
    CLI accepts, so any output can be regenerated from its sidecar."""
    base = spec.base
    lines = [
        "# resolved sweep configuration; feed back via --config to reproduce",
        "# background mean_total is the detected per-pixel mean",
        "[source]",
        f"kind = {base.source.kind.value}",
        f"mu = {base.source.mu!r}",
        f"modes = {base.source.modes}",
        f"split_ratio = {base.source.split_ratio!r}",
        "[channel]",
        f"eta1 = {base.channel.eta1!r}",
        f"eta2 = {base.channel.eta2!r}",
        f"reflectivity = {base.channel.reflectivity!r}",
        f"target_present = {'true' if base.channel.target_present else 'false'}",
        f"mode_match = {base.channel.mode_match!r}",
        "[background]",
        f"modes_b = {base.background.modes_b}",
        f"mean_total = {base.background.mean_total!r}",
        "[scenario]",
        f"pixel_pairs = {base.pixel_pairs}",
        f"images = {base.images}",
        f"images_per_decision = {spec.images_per_decision}",
        "[sampler]",
        f"read_noise_sigma = {spec.read_noise_sigma!r}",
        "[sweep]",
        f"parameter = {spec.parameter.value}",
        "values = " + ",".join(repr(float(v)) for v in spec.values),
        "sources = " + ",".join(k.value for k in spec.sources),
        "outputs = " + ",".join(spec.outputs),
        f"emit_analytic = {'true' if spec.emit_analytic else 'false'}",
        "[run]",
        f"seed = {spec.seed.master_seed}",
    ]
    return "\n".join(lines) + "\n"


def write_sidecar(spec: SweepSpec, path: str) -> None:
    with open(path, "w") as handle:
        handle.write(sidecar_text(spec))
