"""Closed-form photon-number moments and figures of merit.

The detected pair (N1, N2) is a sum of independent per-mode contributions,
so its bivariate cumulants are per-mode cumulants scaled by the mode
count.  Per-mode raw moments come from factorial-moment identities of the
thermal law, E[(n)_k] = k! mu^k, pushed through the conditional detection
laws (independent thinning for the shared-photon pair, per-photon
trinomial routing for the split beam).  No fourth-order expression is
hand-expanded anywhere: raw -> central -> cumulants -> scaled -> central
is done by the generic conversions below, and the `oracle` module checks
the result by exhaustive enumeration.

All functions are pure and operate on immutable specs.
"""
from __future__ import annotations

import math

from scipy import stats

from .types import (
    DegenerateStatisticError,
    MomentSet,
    ParameterError,
    Scenario,
    SourceKind,
    SourceSpec,
)

# Stirling numbers of the second kind for orders 0..2: x^i = sum_a S(i,a) (x)_a.
_STIRLING2 = {(0, 0): 1.0, (1, 1): 1.0, (2, 1): 1.0, (2, 2): 1.0}
_ORDERS = [(i, j) for i in range(3) for j in range(3)]


def _thermal_factorial_product(mu: float, a: int, b: int) -> float:
    """E[(n)_a (n)_b] for a single thermal mode with mean mu.

    Uses (n)_a (n)_b = sum_k C(a,k) C(b,k) k! (n)_{a+b-k} together with
    the thermal factorial moments E[(n)_m] = m! mu^m.
    """
    total = 0.0
    for k in range(min(a, b) + 1):
        order = a + b - k
        total += (
            math.comb(a, k)
            * math.comb(b, k)
            * math.factorial(k)
            * math.factorial(order)
            * mu**order
        )
    return total


def _pair_raw_moments(source: SourceSpec, e1: float, e2: float) -> dict:
    """Per-mode raw joint moments E[n1^i n2^j], i, j <= 2, of one
    correlated mode pair after detection."""
    raw = {}
    if source.kind is SourceKind.TWIN_BEAM:
        mu = source.mu
        for i, j in _ORDERS:
            total = 0.0
            for a in range(i + 1):
                for b in range(j + 1):
                    s = _STIRLING2.get((i, a), 0.0) * _STIRLING2.get((j, b), 0.0)
                    if s == 0.0:
                        continue
                    total += s * e1**a * e2**b * _thermal_factorial_product(mu, a, b)
            raw[(i, j)] = total
    else:
        t = source.split_ratio
        nu = source.pre_split_mean
        p1 = t * e1
        p2 = (1.0 - t) * e2
        for i, j in _ORDERS:
            total = 0.0
            for a in range(i + 1):
                for b in range(j + 1):
                    s = _STIRLING2.get((i, a), 0.0) * _STIRLING2.get((j, b), 0.0)
                    if s == 0.0:
                        continue
                    order = a + b
                    total += s * p1**a * p2**b * math.factorial(order) * nu**order
            raw[(i, j)] = total
    return raw


def _raw_to_central(raw: dict) -> dict:
    m1 = raw[(1, 0)]
    m2 = raw[(0, 1)]
    central = {}
    for i, j in _ORDERS:
        total = 0.0
        for p in range(i + 1):
            for q in range(j + 1):
                total += (
                    math.comb(i, p)
                    * math.comb(j, q)
                    * (-m1) ** (i - p)
                    * (-m2) ** (j - q)
                    * raw[(p, q)]
                )
        central[(i, j)] = total
    return central


def _pair_cumulants(source: SourceSpec, e1: float, e2: float) -> dict:
    """Per-mode bivariate cumulants (k10, k01, k20, k02, k11, k22)."""
    raw = _pair_raw_moments(source, e1, e2)
    c = _raw_to_central(raw)
    return {
        "k10": raw[(1, 0)],
        "k01": raw[(0, 1)],
        "k20": c[(2, 0)],
        "k02": c[(0, 2)],
        "k11": c[(1, 1)],
        "k22": c[(2, 2)] - c[(2, 0)] * c[(0, 2)] - 2.0 * c[(1, 1)] ** 2,
    }


def variance_law(mean_total: float, modes: int) -> float:
    """Variance of a multithermal beam: mean_total * (1 + mean_total/modes)."""
    if not math.isfinite(mean_total) or mean_total < 0.0:
        raise ParameterError(f"mean_total must be finite and >= 0 (got {mean_total})")
    if modes < 1:
        raise ParameterError(f"modes must be >= 1 (got {modes})")
    return mean_total * (1.0 + mean_total / modes)


def _per_mode_arm_means(scenario: Scenario) -> tuple[float, float]:
    """Detected per-mode means of each arm (arm 2 excluding background)."""
    source = scenario.source
    channel = scenario.channel
    e2 = channel.arm2_efficiency if channel.target_present else 0.0
    m1 = channel.eta1 * source.mu
    if source.kind is SourceKind.TWIN_BEAM:
        m2 = e2 * source.mu
    else:
        m2 = e2 * (1.0 - source.split_ratio) * source.pre_split_mean
    return m1, m2


def moments(scenario: Scenario) -> MomentSet:
    """Exact detected-count moments of one pixel pair.

    Composition: matched mode pairs contribute the full bivariate pair
    cumulants; mode-mismatched light replaces the correlated partner with
    statistically identical but independent thermal light on each arm;
    the background adds independently to arm 2.  Cumulants add across
    all of these, and the fourth-order central moment is reconstructed
    from them at the end.
    """
    source = scenario.source
    channel = scenario.channel
    background = scenario.background
    e1 = channel.eta1
    e2 = channel.arm2_efficiency if channel.target_present else 0.0

    matched = channel.mode_match * source.modes
    unmatched = source.modes - matched
    pair = _pair_cumulants(source, e1, e2)
    m1_pm, m2_pm = _per_mode_arm_means(scenario)

    k10 = matched * pair["k10"] + unmatched * m1_pm
    k01 = matched * pair["k01"] + unmatched * m2_pm
    k20 = matched * pair["k20"] + unmatched * m1_pm * (1.0 + m1_pm)
    k02 = matched * pair["k02"] + unmatched * m2_pm * (1.0 + m2_pm)
    k11 = matched * pair["k11"]
    k22 = matched * pair["k22"]

    k01 += background.mean_total
    k02 += variance_law(background.mean_total, background.modes_b)

    return MomentSet(
        mean1=k10,
        mean2=k01,
        var1=k20,
        var2=k02,
        cov=k11,
        m22=k22 + k20 * k02 + 2.0 * k11**2,
    )


def epsilon(scenario: Scenario) -> float:
    """Normally ordered cross correlation over the geometric mean of the
    normally ordered variances; > 1 certifies nonclassical correlation."""
    m = moments(scenario)
    nv1 = m.normally_ordered_var1
    nv2 = m.normally_ordered_var2
    if nv1 <= 0.0 or nv2 <= 0.0:
        raise DegenerateStatisticError(
            f"normally ordered variances must be positive (got {nv1}, {nv2})"
        )
    return m.cov / math.sqrt(nv1 * nv2)


def snr(scenario: Scenario) -> float:
    """Contrast-to-noise ratio of the covariance receiver, per single
    pixel pair; multiply by sqrt(K * frames averaged) for an acquisition."""
    m_in = moments(scenario)
    m_out = moments(scenario.with_target(False))
    numerator = abs(m_in.cov)
    denom_sq = m_in.delta_product_variance + m_out.delta_product_variance
    if denom_sq <= 0.0:
        return 0.0
    return numerator / math.sqrt(denom_sq)


def snr_dominant_background(scenario: Scenario) -> float:
    """Large-background limit of `snr`: cov / sqrt(2 var1 var_b)."""
    m_in = moments(scenario)
    var_b = variance_law(scenario.background.mean_total, scenario.background.modes_b)
    denom_sq = 2.0 * m_in.var1 * var_b
    if denom_sq <= 0.0:
        raise DegenerateStatisticError(
            "dominant-background form needs fluctuating arm 1 and background"
        )
    return abs(m_in.cov) / math.sqrt(denom_sq)


def enhancement(mu: float) -> float:
    """Quantum-over-classical SNR ratio at equal local resources: (1+mu)/mu."""
    if not math.isfinite(mu) or mu <= 0.0:
        raise ParameterError(f"mu must be finite and > 0 (got {mu})")
    return (1.0 + mu) / mu


def _min_error_two_gaussians(
    m0: float, s0: float, m1: float, s1: float
) -> tuple[float, float]:
    """Minimum equal-prior error of a threshold test between
    Normal(m0, s0^2) (declare below) and Normal(m1, s1^2) (declare above),
    with the optimum at a likelihood-ratio crossing."""
    if m1 <= m0:
        return 0.5, m0
    if s0 == 0.0 and s1 == 0.0:
        return 0.0, 0.5 * (m0 + m1)
    if s0 == 0.0:
        return 0.5 * stats.norm.cdf((m0 - m1) / s1), m0
    if s1 == 0.0:
        return 0.5 * stats.norm.sf((m1 - m0) / s0), m1

    a = 1.0 / s1**2 - 1.0 / s0**2
    b = -2.0 * (m1 / s1**2 - m0 / s0**2)
    c = m1**2 / s1**2 - m0**2 / s0**2 - 2.0 * math.log(s0 / s1)
    if abs(a) < 1e-300:
        candidates = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            candidates = [0.5 * (m0 + m1)]
        else:
            root = math.sqrt(disc)
            candidates = [(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)]

    best_p, best_tau = 0.5, m1
    for tau in candidates:
        p = 0.5 * (stats.norm.sf((tau - m0) / s0) + stats.norm.cdf((tau - m1) / s1))
        if p < best_p:
            best_p, best_tau = float(p), float(tau)
    return best_p, best_tau


def error_probability(scenario: Scenario, images_per_decision: int) -> float:
    """Equal-prior error probability of the covariance threshold receiver.

    The decision statistic (covariance averaged over images_per_decision
    frames of pixel_pairs pairs each) is treated as Gaussian under both
    hypotheses, with the threshold at the likelihood-ratio crossing that
    minimizes the average of false-alarm and miss probabilities.
    """
    if images_per_decision < 1:
        raise ParameterError(
            f"images_per_decision must be >= 1 (got {images_per_decision})"
        )
    m_in = moments(scenario)
    m_out = moments(scenario.with_target(False))
    n_eff = scenario.pixel_pairs * images_per_decision
    s_in = math.sqrt(max(0.0, m_in.delta_product_variance) / n_eff)
    s_out = math.sqrt(max(0.0, m_out.delta_product_variance) / n_eff)
    p_err, _ = _min_error_two_gaussians(0.0, s_out, m_in.cov, s_in)
    return p_err
