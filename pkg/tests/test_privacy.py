import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpmepf import (CalibrationError, DomainError, PrivacySpec, Release, analytic_delta,
                    calibrate_sigma, effective_sigma)
from dpmepf.privacy import classical_sigma, parse_ratios

# hockey-stick divergence between N(1, 1) and N(0, 1) at eps=1, integrated
# with mpmath at 40 digits
DELTA_EPS1_SIGMA1 = 0.12693673750664394580


def hockey_stick_delta(eps, sigma):
    mpmath.mp.dps = 30
    s = mpmath.mpf(sigma)
    x0 = eps * s**2 + mpmath.mpf(1) / 2
    return float(mpmath.quad(
        lambda x: mpmath.npdf(x, 1, s) - mpmath.e**eps * mpmath.npdf(x, 0, s),
        [x0, x0 + 10 * s, mpmath.inf]))


def test_analytic_delta_matches_quadrature_oracle():
    assert analytic_delta(1.0, 1.0, 1.0) == pytest.approx(DELTA_EPS1_SIGMA1, abs=1e-12)


@pytest.mark.parametrize("eps,sigma", [(0.5, 2.0), (2.0, 0.7), (5.0, 0.4), (1.0, 4.0)])
def test_analytic_delta_matches_hockey_stick(eps, sigma):
    assert analytic_delta(eps, sigma) == pytest.approx(hockey_stick_delta(eps, sigma), rel=1e-9, abs=1e-15)


def test_sensitivity_cancels():
    assert analytic_delta(1.0, 1.3, 0.01) == pytest.approx(analytic_delta(1.0, 1.3, 5.0), rel=1e-12)


def test_infinite_noise_gives_zero_delta():
    assert analytic_delta(1.0, math.inf, 1.0) == 0.0
    assert analytic_delta(1.0, 1e4, 1.0) < 1e-300 or analytic_delta(1.0, 1e4, 1.0) == 0.0


def test_more_noise_smaller_delta():
    assert analytic_delta(1.0, 2.0) < analytic_delta(1.0, 1.0)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, 0), (-1, 1, 1), (1, -2, 1)])
def test_analytic_delta_rejects_nonpositive(args):
    with pytest.raises(DomainError):
        analytic_delta(*args)


def test_analytic_delta_large_epsilon_no_overflow():
    assert 0.0 <= analytic_delta(800.0, 0.01) <= 1.0


def test_monotone_grids():
    sigmas = np.geomspace(0.2, 8.0, 120)
    deltas = [analytic_delta(1.0, s) for s in sigmas]
    assert all(b < a for a, b in zip(deltas, deltas[1:]))
    epsilons = np.linspace(0.05, 5.0, 120)
    deltas = [analytic_delta(e, 1.0) for e in epsilons]
    assert all(b < a for a, b in zip(deltas, deltas[1:]))


def test_effective_sigma_examples():
    s = 3.0
    assert effective_sigma([Release()], s) == s
    assert effective_sigma([Release(), Release()], s) == pytest.approx(s / math.sqrt(2), rel=1e-15)
    three = [Release(1, 1), Release(1, 1), Release(1, 10)]
    # 1/s^2 + 1/s^2 + 1/(100 s^2) = 2.01 / s^2
    assert effective_sigma(three, s) == pytest.approx(s / math.sqrt(2.01), rel=1e-15)


def test_effective_sigma_empty():
    with pytest.raises(DomainError):
        effective_sigma([], 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 50), min_size=1, max_size=6), st.floats(0.01, 100), st.randoms())
def test_effective_sigma_permutation_and_scaling(ratios, base, rand):
    releases = [Release(1.0, r) for r in ratios]
    shuffled = releases[:]
    rand.shuffle(shuffled)
    assert effective_sigma(shuffled, base) == effective_sigma(releases, base)
    assert effective_sigma(releases, 2.5 * base) == pytest.approx(2.5 * effective_sigma(releases, base), rel=1e-14)


def test_rdp_additivity_symbolic():
    # RDP of a Gaussian at order alpha is alpha / (2 s^2); composition adds them
    alpha = 7.0
    ratios = [1.0, 1.0, 10.0]
    base = 2.0
    total = sum(alpha / (2 * (base * r) ** 2) for r in ratios)
    s_eff = effective_sigma([Release(1, r) for r in ratios], base)
    assert alpha / (2 * s_eff**2) == pytest.approx(total, rel=1e-14)


def test_calibrate_single_release_tight():
    spec = PrivacySpec.from_ratios(1.0, 1e-5, [1])
    s = calibrate_sigma(spec)
    assert analytic_delta(1.0, s) <= 1e-5
    assert analytic_delta(1.0, 0.999 * s) > 1e-5
    assert s == pytest.approx(3.7306316348, rel=1e-6)


@pytest.mark.parametrize("eps", [0.2, 0.5, 1.0, 2.0])
def test_calibrate_below_classical(eps):
    assert calibrate_sigma(PrivacySpec.from_ratios(eps, 1e-5, [1])) <= classical_sigma(eps, 1e-5)


def test_two_releases_scale_by_sqrt2():
    one = calibrate_sigma(PrivacySpec.from_ratios(1.0, 1e-5, [1]))
    two = calibrate_sigma(PrivacySpec.from_ratios(1.0, 1e-5, [1, 1]))
    assert two == pytest.approx(math.sqrt(2) * one, rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_composition_consistency(k):
    single = calibrate_sigma(PrivacySpec.from_ratios(0.7, 1e-6, [1]))
    multi = calibrate_sigma(PrivacySpec.from_ratios(0.7, 1e-6, [1] * k))
    assert multi == pytest.approx(math.sqrt(k) * single, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20), st.floats(1e-9, 0.1), st.lists(st.sampled_from([1.0, 2.0, 10.0]), min_size=1, max_size=4))
def test_calibration_minimal(eps, delta, ratios):
    spec = PrivacySpec.from_ratios(eps, delta, ratios)
    s = calibrate_sigma(spec)
    assert analytic_delta(eps, effective_sigma(spec.releases, s)) <= delta
    assert analytic_delta(eps, effective_sigma(spec.releases, s * (1 - 1e-3))) > delta


def test_calibration_failure_outside_bracket():
    with pytest.raises(CalibrationError):
        calibrate_sigma(PrivacySpec.from_ratios(1e-9, 1e-300, [1]))


@pytest.mark.parametrize("kwargs", [dict(epsilon=0, delta=0.1), dict(epsilon=1, delta=1.0),
                                    dict(epsilon=1, delta=0.0), dict(epsilon=1, delta=0.1, releases=())])
def test_privacy_spec_validation(kwargs):
    with pytest.raises(DomainError):
        PrivacySpec(**kwargs)


def test_release_validation():
    with pytest.raises(DomainError):
        Release(-1.0, 1.0)
    with pytest.raises(DomainError):
        Release(1.0, 0.0)


def test_parse_ratios():
    assert parse_ratios("1,1,10") == [1.0, 1.0, 10.0]
    with pytest.raises(DomainError):
        parse_ratios("1,x")
    with pytest.raises(DomainError):
        parse_ratios("")
