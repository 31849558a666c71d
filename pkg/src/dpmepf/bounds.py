"""Error bounds for the privatized squared MMD, and Monte-Carlo checks of them.

All bounds are expressed through the noise covariance ``Sigma`` of the target
embedding and ``||Sigma^{1/2} a||`` where ``a = mu(D) - mu(D~)``.  With
``L = log(2 / rho)``:

* expected absolute error   ``Tr + 2 sqrt(2/pi) s``
* high probability (fixed a) ``Tr + sqrt(2/pi) s + 2 (F + sqrt2 s) sqrt(L) + 2 op L``
* uniform over all datasets ``Tr + 4B sqrt(Tr) + 2 (F + 2B sqrt(op)) sqrt(L) + 2 op L``
* minimizer gap             twice the uniform bound
* optimistic minimizer gap  ``9 Tr + 4 sqrt(Tr) M + 2 (9 F + 2 sqrt(2 op) M) sqrt(L) + 18 op L``

where ``s = ||Sigma^{1/2} a||``, ``Tr``, ``F`` and ``op`` are the trace,
Frobenius and operator norms, ``B`` bounds ``||Phi(x)||`` and ``M`` is the
non-private MMD at the non-private minimizer.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .embedding import NoiseCovariance
from .exceptions import DomainError

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
MC_CHUNK = 2048


@dataclass(frozen=True)
class BoundInputs:
    """Everything the closed-form bounds depend on.

    ``a_part_norms`` holds ``||a_t||`` for each embedding part.
    """

    cov: NoiseCovariance
    a_part_norms: tuple = (0.0, 0.0)
    B: float = math.sqrt(2.0)
    rho: float = 0.05
    mmd_hat_at_optimum: float | None = None

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.B > 0:
            raise DomainError("B must be positive")
        if min(self.a_part_norms) < 0:
            raise DomainError("norms must be nonnegative")
        if self.mmd_hat_at_optimum is not None and self.mmd_hat_at_optimum < 0:
            raise DomainError("mmd_hat_at_optimum must be nonnegative")

    @classmethod
    def from_difference(cls, cov, a, **kwargs):
        """Split a difference vector in ``[part1, part2]`` layout into part norms."""
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        if a.size != cov.moments * cov.dim:
            raise DomainError(f"difference vector has {a.size} entries, expected {cov.moments * cov.dim}")
        norms = tuple(float(np.linalg.norm(p)) for p in np.split(a, cov.moments))
        return cls(cov, norms, **kwargs)

    @property
    def log_term(self):
        return math.log(2.0 / self.rho)

    @property
    def sigma_a(self):
        """``||Sigma^{1/2} a||``."""
        return self.cov.sqrt_quadratic(self.a_part_norms)


def expected_abs_error_bound(inputs: BoundInputs) -> float:
    return inputs.cov.trace + 2.0 * SQRT_2_OVER_PI * inputs.sigma_a


def high_prob_error_bound(inputs: BoundInputs) -> float:
    cov, s, L = inputs.cov, inputs.sigma_a, inputs.log_term
    return (cov.trace + SQRT_2_OVER_PI * s
            + 2.0 * (cov.frobenius + math.sqrt(2.0) * s) * math.sqrt(L)
            + 2.0 * cov.operator_norm * L)


def uniform_error_bound(inputs: BoundInputs) -> float:
    cov, B, L = inputs.cov, inputs.B, inputs.log_term
    return (cov.trace + 4.0 * B * math.sqrt(cov.trace)
            + 2.0 * (cov.frobenius + 2.0 * B * math.sqrt(cov.operator_norm)) * math.sqrt(L)
            + 2.0 * cov.operator_norm * L)


def minimizer_gap_bound(inputs: BoundInputs) -> float:
    return 2.0 * uniform_error_bound(inputs)


def optimistic_gap_bound(inputs: BoundInputs) -> float:
    if inputs.mmd_hat_at_optimum is None:
        raise DomainError("optimistic bound needs mmd_hat_at_optimum")
    cov, M, L = inputs.cov, inputs.mmd_hat_at_optimum, inputs.log_term
    return (9.0 * cov.trace + 4.0 * math.sqrt(cov.trace) * M
            + 2.0 * (9.0 * cov.frobenius + 2.0 * math.sqrt(2.0 * cov.operator_norm) * M) * math.sqrt(L)
            + 18.0 * cov.operator_norm * L)


@dataclass
class MonteCarloReport:
    kind: str
    bound: float
    statistic: float
    threshold: float
    margin: float
    passed: bool
    draws: int
    rho: float | None = None

    def to_dict(self):
        return asdict(self)


KINDS = ("expected", "high_prob", "uniform")


def _noise_errors(cov, a, draws, seed):
    """``(||a + n||^2 - ||a||^2, ||n||)`` for ``draws`` noise vectors, in fixed chunks."""
    std = cov.std_vector()
    # Philox is counter based: chunk k always sees the same slice of the stream
    rng = np.random.Generator(np.random.Philox(key=seed))
    base = float(a @ a)
    errors, norms = np.empty(draws), np.empty(draws)
    for start in range(0, draws, MC_CHUNK):
        stop = min(start + MC_CHUNK, draws)
        n = rng.standard_normal((stop - start, std.size)) * std
        errors[start:stop] = np.sum((a + n) ** 2, axis=1) - base
        norms[start:stop] = np.sqrt(np.sum(n * n, axis=1))
    return errors, norms


def monte_carlo_verify(kind: str, cov: NoiseCovariance, a, draws: int = 10_000, rho: float = 0.05,
                       B: float | None = None, seed: int = 0) -> MonteCarloReport:
    """Sample ``n ~ N(0, Sigma)`` and check one bound empirically.

    Parameters
    ----------
    kind : {"expected", "high_prob", "uniform"}
        ``"expected"`` compares the mean of ``|private - non-private|`` with the
        expected-error bound.  ``"high_prob"`` compares the violation rate of the
        fixed-``a`` bound with ``rho + 3 sqrt(rho (1 - rho) / N)``.  ``"uniform"``
        does the same for the uniform bound, using the worst case over
        ``||a|| <= 2B``, which is ``n^T n + 4 B ||n||``.
    cov : NoiseCovariance
    a : array_like
        Difference vector ``mu(D) - mu(D~)`` in ``[part1, part2]`` layout.
    draws : int
        At least 1000.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown bound kind {kind!r}; expected one of {KINDS}")
    if draws < 1000:
        raise DomainError("at least 1000 draws are required")
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    B = math.sqrt(cov.moments) if B is None else B
    inputs = BoundInputs.from_difference(cov, a, B=B, rho=rho)
    errors, norms = _noise_errors(cov, a, draws, seed)

    if kind == "expected":
        bound = expected_abs_error_bound(inputs)
        statistic = float(np.mean(np.abs(errors)))
        threshold = bound
        return MonteCarloReport(kind, bound, statistic, threshold, threshold - statistic,
                                statistic <= threshold, draws)

    if kind == "high_prob":
        bound = high_prob_error_bound(inputs)
        worst = np.abs(errors)
    else:
        bound = uniform_error_bound(inputs)
        worst = norms**2 + 4.0 * B * norms
    statistic = float(np.mean(worst > bound))
    threshold = rho + 3.0 * math.sqrt(rho * (1.0 - rho) / draws)
    return MonteCarloReport(kind, bound, statistic, threshold, threshold - statistic,
                            statistic <= threshold, draws, rho)
