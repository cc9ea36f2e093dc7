"""Closed-form moments and figures of merit against the enumeration oracle
and against hand-checkable limits."""
from __future__ import annotations

import pytest

from conftest import make_scenario, rel_err
from qisim import analytic, oracle
from qisim.types import (
    DegenerateStatisticError,
    ParameterError,
    SourceKind,
)

MOMENT_FIELDS = ("mean1", "mean2", "var1", "var2", "cov", "m22")


# ---------------------------------------------------------------------------
# variance_law
# ---------------------------------------------------------------------------
def test_variance_law_vacuum():
    assert analytic.variance_law(0.0, 7) == 0.0


def test_variance_law_single_mode():
    assert analytic.variance_law(100.0, 1) == 10100.0


def test_variance_law_reference_point():
    # 4185 detected photons over 9e4 modes
    assert rel_err(analytic.variance_law(4185.0, 90000), 4379.6025) < 1e-12


def test_variance_law_rejects_bad_input():
    with pytest.raises(ParameterError):
        analytic.variance_law(-1.0, 5)
    with pytest.raises(ParameterError):
        analytic.variance_law(1.0, 0)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------
def test_reference_arm_mean_matches_detected_rate():
    scn = make_scenario(reflectivity=1.0)
    m = analytic.moments(scn)
    assert abs(m.mean1 - 4185.0) < 1e-6  # 9e4 * 0.62 * 0.075
    # the nominal detected rate sits within 1% of the round 4200 figure
    assert abs(4185.0 - 4200.0) / 4200.0 < 0.01


def test_target_absent_has_zero_covariance():
    for kind in SourceKind:
        scn = make_scenario(kind=kind, target_present=False, background_mean=3.0, modes_b=4)
        assert analytic.moments(scn).cov == 0.0


# Frozen from oracle.enumerate_moments (exact enumeration, tail 1e-12):
# twin beam, mu=0.2, M=3, eta=(0.7, 0.5), r=1, no background.
_TWIN_FROZEN = dict(
    mean1=0.42, mean2=0.3, var1=0.4788, var2=0.33, cov=0.252, m22=0.71442
)
# split thermal, mu=0.2, M=2, t=0.5, eta=(0.9, 0.8), r=1, background (2, 0.5).
_SPLIT_FROZEN = dict(
    mean1=0.36, mean2=0.82, var1=0.4248, var2=0.9962, cov=0.0576, m22=0.53654256
)


def test_twin_moments_match_frozen_oracle_values():
    scn = make_scenario(
        mu=0.2, modes=3, eta1=0.7, eta2=0.5, reflectivity=1.0, pixel_pairs=2
    )
    m = analytic.moments(scn)
    for field, expected in _TWIN_FROZEN.items():
        assert rel_err(getattr(m, field), expected) < 1e-9, field


def test_split_moments_match_frozen_oracle_values():
    scn = make_scenario(
        kind=SourceKind.SPLIT_THERMAL,
        mu=0.2,
        modes=2,
        eta1=0.9,
        eta2=0.8,
        reflectivity=1.0,
        modes_b=2,
        background_mean=0.5,
        pixel_pairs=2,
    )
    m = analytic.moments(scn)
    for field, expected in _SPLIT_FROZEN.items():
        assert rel_err(getattr(m, field), expected) < 1e-9, field


_GRID = [
    # (kind, M, mu, e1, e2, r, mm, (modes_b, mean_b), target)
    (SourceKind.TWIN_BEAM, 3, 0.2, 0.7, 0.5, 1.0, 1.0, (1, 0.0), True),
    (SourceKind.TWIN_BEAM, 5, 0.1, 0.7, 0.7, 0.5, 0.7, (2, 0.5), True),
    (SourceKind.TWIN_BEAM, 2, 0.4, 1.0, 0.3, 0.8, 0.6, (1, 1.0), True),
    (SourceKind.TWIN_BEAM, 4, 0.3, 0.3, 1.0, 1.0, 1.0, (4, 2.0), False),
    (SourceKind.SPLIT_THERMAL, 3, 0.2, 0.7, 0.5, 1.0, 1.0, (1, 0.0), True),
    (SourceKind.SPLIT_THERMAL, 5, 0.1, 0.7, 0.7, 0.5, 0.7, (2, 0.5), True),
    (SourceKind.SPLIT_THERMAL, 2, 0.4, 1.0, 0.3, 0.8, 0.6, (1, 1.0), True),
    (SourceKind.SPLIT_THERMAL, 4, 0.3, 0.3, 1.0, 1.0, 1.0, (4, 2.0), False),
]


@pytest.mark.parametrize("case", _GRID)
def test_moments_agree_with_oracle(case):
    kind, modes, mu, e1, e2, r, mm, (modes_b, mean_b), target = case
    scn = make_scenario(
        kind=kind,
        mu=mu,
        modes=modes,
        eta1=e1,
        eta2=e2,
        reflectivity=r,
        mode_match=mm,
        target_present=target,
        modes_b=modes_b,
        background_mean=mean_b,
        pixel_pairs=2,
    )
    m = analytic.moments(scn)
    ref = oracle.enumerate_moments(scn.source, scn.channel, scn.background)
    # hybrid tolerance: structural zeros (absent target) carry only
    # summation roundoff in the oracle, where a pure ratio is meaningless
    scale = max(1.0, ref.var1, ref.var2, abs(ref.m22))
    for field in MOMENT_FIELDS:
        a, b = getattr(m, field), getattr(ref, field)
        assert abs(a - b) <= 1e-9 * max(abs(a), abs(b)) + 1e-12 * scale, field
    m.check_consistency()


# ---------------------------------------------------------------------------
# epsilon
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("mu", [0.01, 0.075, 1.0])
def test_epsilon_twin_no_background_is_ideal(mu):
    scn = make_scenario(mu=mu)
    assert rel_err(analytic.epsilon(scn), (1.0 + mu) / mu) < 1e-12


def test_epsilon_split_no_background_is_unity():
    for t in (0.3, 0.5, 0.8):
        scn = make_scenario(kind=SourceKind.SPLIT_THERMAL, split_ratio=t)
        assert abs(analytic.epsilon(scn) - 1.0) < 1e-12


def test_epsilon_loss_independent_without_background():
    for kind in SourceKind:
        reference = analytic.epsilon(make_scenario(kind=kind))
        for e1 in (0.05, 0.4, 1.0):
            for e2 in (0.3, 0.9):
                for r in (0.1, 0.6, 1.0):
                    scn = make_scenario(kind=kind, eta1=e1, eta2=e2, reflectivity=r)
                    assert rel_err(analytic.epsilon(scn), reference) < 1e-12


def test_epsilon_mode_match_scales_ideal_value():
    scn = make_scenario(mode_match=0.7)
    assert rel_err(analytic.epsilon(scn), 0.7 * (1.075 / 0.075)) < 1e-12


def test_epsilon_vanishes_under_dominant_background():
    scn = make_scenario(background_mean=1e7, modes_b=1300)
    assert analytic.epsilon(scn) < 1e-2


def test_epsilon_degenerate_cases_raise():
    with pytest.raises(DegenerateStatisticError):
        analytic.epsilon(make_scenario(mu=0.0))
    with pytest.raises(DegenerateStatisticError):
        analytic.epsilon(make_scenario(target_present=False))
    with pytest.raises(DegenerateStatisticError):
        analytic.epsilon(make_scenario(eta1=0.0))


def test_epsilon_ratio_equals_enhancement():
    for mu in (0.05, 0.075, 0.5):
        qi = analytic.epsilon(make_scenario(mu=mu))
        ci = analytic.epsilon(make_scenario(kind=SourceKind.SPLIT_THERMAL, mu=mu))
        assert rel_err(qi / ci, analytic.enhancement(mu)) < 1e-12


# ---------------------------------------------------------------------------
# snr
# ---------------------------------------------------------------------------
def test_snr_zero_when_target_absent_in_both():
    scn = make_scenario(target_present=False, background_mean=50.0)
    assert analytic.snr(scn) == 0.0


def test_snr_monotone_decreasing_in_background():
    values = [100.0, 500.0, 2000.0, 10000.0, 50000.0]
    f = [analytic.snr(make_scenario(background_mean=v)) for v in values]
    assert all(b < a for a, b in zip(f, f[1:]))


def test_snr_dominant_background_agrees_when_dominant():
    # condition: var1*var_b at least 100x the rest of the "in" noise
    for nb in (3e4, 1e5, 1e6):
        for modes_b in (57, 1300):
            scn = make_scenario(background_mean=nb, modes_b=modes_b)
            m_in = analytic.moments(scn)
            var_b = analytic.variance_law(nb, modes_b)
            rest = m_in.delta_product_variance - m_in.var1 * var_b
            if m_in.var1 * var_b < 100.0 * rest:
                continue
            exact = analytic.snr(scn)
            approx = analytic.snr_dominant_background(scn)
            assert abs(exact - approx) / approx < 0.05


def test_snr_dominant_background_requires_background():
    with pytest.raises(DegenerateStatisticError):
        analytic.snr_dominant_background(make_scenario(background_mean=0.0))


# ---------------------------------------------------------------------------
# enhancement
# ---------------------------------------------------------------------------
def test_enhancement_values():
    assert rel_err(analytic.enhancement(0.075), 14.333333333333334) < 1e-12
    assert analytic.enhancement(1.0) == 2.0
    assert abs(analytic.enhancement(1e9) - 1.0) < 1e-8


def test_enhancement_rejects_nonpositive():
    with pytest.raises(ParameterError):
        analytic.enhancement(0.0)
    with pytest.raises(ParameterError):
        analytic.enhancement(-0.1)


# ---------------------------------------------------------------------------
# error_probability
# ---------------------------------------------------------------------------
def test_error_probability_half_when_indistinguishable():
    scn = make_scenario(target_present=False, background_mean=100.0)
    assert analytic.error_probability(scn, 10) == 0.5


def test_error_probability_trivial_limits():
    # deterministic statistics: cov > 0 -> perfect decision, cov = 0 -> coin flip
    assert analytic._min_error_two_gaussians(0.0, 0.0, 1.0, 0.0) == (0.0, 0.5)
    assert analytic._min_error_two_gaussians(0.0, 0.0, 0.0, 0.0)[0] == 0.5
    p_small, _ = analytic._min_error_two_gaussians(0.0, 1e-9, 1.0, 1e-9)
    assert p_small < 1e-12


def test_error_probability_monotone_in_images():
    scn = make_scenario(background_mean=5000.0)
    p = [analytic.error_probability(scn, n) for n in (1, 3, 10, 30, 100)]
    assert all(b <= a + 1e-15 for a, b in zip(p, p[1:]))


def test_error_probability_monotone_in_background():
    p = [
        analytic.error_probability(make_scenario(background_mean=nb), 10)
        for nb in (100.0, 1000.0, 5000.0, 20000.0, 100000.0)
    ]
    assert all(b >= a - 1e-15 for a, b in zip(p, p[1:]))


def test_error_probability_bounded():
    for nb in (0.0, 100.0, 1e6):
        p = analytic.error_probability(make_scenario(background_mean=nb), 10)
        assert 0.0 <= p <= 0.5


def test_error_probability_rejects_bad_images():
    with pytest.raises(ParameterError):
        analytic.error_probability(make_scenario(), 0)


# ---------------------------------------------------------------------------
# covariance closed forms against effective efficiencies
# ---------------------------------------------------------------------------
def test_covariance_effective_efficiency_forms():
    mu, modes = 0.3, 4
    for r in (0.5, 1.0):
        for mm in (0.6, 1.0):
            twin = make_scenario(
                mu=mu, modes=modes, eta1=0.7, eta2=0.5, reflectivity=r, mode_match=mm
            )
            split = make_scenario(
                kind=SourceKind.SPLIT_THERMAL,
                mu=mu,
                modes=modes,
                eta1=0.7,
                eta2=0.5,
                reflectivity=r,
                mode_match=mm,
            )
            e1, e2 = 0.7, 0.5 * r * mm
            assert rel_err(analytic.moments(twin).cov, modes * e1 * e2 * mu * (1 + mu)) < 1e-12
            assert rel_err(analytic.moments(split).cov, modes * e1 * e2 * mu**2) < 1e-12
