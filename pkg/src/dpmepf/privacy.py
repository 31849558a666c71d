"""Gaussian mechanism calibration and composition.

Every release handled here is a Gaussian mechanism whose noise standard
deviation is ``base_sigma * noise_multiplier_ratio * sensitivity``.  A list of
such releases composes exactly into a single Gaussian mechanism (their Renyi
divergences add order by order), whose privacy profile is then evaluated with
the analytic Gaussian mechanism of Balle & Wang (2018).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.special import log_ndtr, ndtr

from .exceptions import CalibrationError, DomainError

SIGMA_BRACKET = (1e-6, 1e6)
RELATIVE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Release:
    """One Gaussian release of a statistic with L2 sensitivity ``sensitivity``."""

    sensitivity: float = 1.0
    noise_multiplier_ratio: float = 1.0

    def __post_init__(self):
        if not self.sensitivity >= 0:
            raise DomainError(f"sensitivity must be >= 0, got {self.sensitivity}")
        if not self.noise_multiplier_ratio > 0:
            raise DomainError(
                f"noise_multiplier_ratio must be > 0, got {self.noise_multiplier_ratio}"
            )


@dataclass(frozen=True)
class PrivacySpec:
    """Target (epsilon, delta) for a collection of releases."""

    epsilon: float
    delta: float
    releases: tuple[Release, ...] = field(default_factory=lambda: (Release(),))

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        object.__setattr__(self, "releases", tuple(self.releases))
        if not self.releases:
            raise DomainError("at least one release is required")

    @classmethod
    def from_ratios(cls, epsilon: float, delta: float, ratios: Sequence[float]) -> "PrivacySpec":
        return cls(epsilon, delta, tuple(Release(1.0, float(r)) for r in ratios))


def analytic_delta(epsilon: float, sigma: float, sensitivity: float = 1.0) -> float:
    """Exact delta of the Gaussian mechanism at privacy loss ``epsilon``.

    The mechanism adds noise with standard deviation ``sigma * sensitivity`` to
    a statistic of L2 sensitivity ``sensitivity``, so the result depends only on
    ``epsilon`` and ``sigma``.

    Parameters
    ----------
    epsilon : float
        Privacy loss bound, > 0.
    sigma : float
        Noise multiplier (standard deviation per unit sensitivity), > 0.
    sensitivity : float
        L2 global sensitivity, > 0.

    Returns
    -------
    float
        ``Phi(s/2 - eps/s) - exp(eps) * Phi(-s/2 - eps/s)`` with ``s = 1/sigma``,
        clipped to [0, 1].
    """
    for name, value in (("epsilon", epsilon), ("sigma", sigma), ("sensitivity", sensitivity)):
        if not value > 0:
            raise DomainError(f"{name} must be > 0, got {value}")
    if math.isinf(sigma):
        return 0.0
    std = sigma * sensitivity
    half = sensitivity / (2.0 * std)
    shift = epsilon * std / sensitivity
    # exp(eps) * Phi(b) evaluated in log space so large epsilon cannot overflow
    second = math.exp(epsilon + float(log_ndtr(-half - shift)))
    delta = float(ndtr(half - shift)) - second
    return min(max(delta, 0.0), 1.0)


def _ratio_factor(releases: Sequence[Release]) -> float:
    # sigma_eff = base_sigma * factor
    if len(releases) == 0:
        raise DomainError("at least one release is required")
    # fsum is exact, so the result does not depend on release order
    precision = math.fsum(1.0 / r.noise_multiplier_ratio**2 for r in releases)
    return 1.0 / math.sqrt(precision)


def effective_sigma(releases: Sequence[Release], base_sigma: float) -> float:
    """Noise multiplier of the single Gaussian equivalent to ``releases``.

    ``1 / sigma_eff**2 = sum_i 1 / (base_sigma * ratio_i)**2``.
    """
    if not base_sigma > 0:
        raise DomainError(f"base_sigma must be > 0, got {base_sigma}")
    return base_sigma * _ratio_factor(releases)


def _calibrate_single(epsilon: float, delta: float) -> float:
    lo, hi = SIGMA_BRACKET
    if analytic_delta(epsilon, hi) > delta:
        raise CalibrationError(
            f"no sigma in [{lo}, {hi}] achieves delta={delta} at epsilon={epsilon}"
        )
    if analytic_delta(epsilon, lo) <= delta:
        return lo
    # invariant: delta(lo) > target >= delta(hi)
    while hi - lo > RELATIVE_TOLERANCE * hi:
        mid = math.sqrt(lo * hi) if hi / lo > 4.0 else 0.5 * (lo + hi)
        if analytic_delta(epsilon, mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_sigma(spec: PrivacySpec) -> float:
    """Smallest base noise multiplier making all releases jointly (eps, delta)-DP.

    The effective single-Gaussian multiplier is found by bisection on
    :func:`analytic_delta` and then mapped back to the base multiplier, so
    ``k`` identical releases calibrate to exactly ``sqrt(k)`` times a single
    release.
    """
    sigma_eff = _calibrate_single(spec.epsilon, spec.delta)
    base = sigma_eff / _ratio_factor(spec.releases)
    # guard against the round trip through the ratio factor losing an ulp
    while analytic_delta(spec.epsilon, effective_sigma(spec.releases, base)) > spec.delta:
        base = math.nextafter(base, math.inf)
    return base


def classical_sigma(epsilon: float, delta: float) -> float:
    """The textbook ``sqrt(2 ln(1.25/delta)) / epsilon`` multiplier (valid for epsilon < 1)."""
    if not epsilon > 0 or not 0 < delta < 1:
        raise DomainError("epsilon must be > 0 and delta in (0, 1)")
    return math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def parse_ratios(text: str) -> list[float]:
    """Parse a comma-separated list such as ``"1,1,10"``."""
    try:
        ratios = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse release ratios {text!r}") from exc
    if not ratios:
        raise DomainError("release list is empty")
    return ratios
