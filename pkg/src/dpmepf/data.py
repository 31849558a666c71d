"""Seeded Gaussian-mixture datasets used as private data at desk scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


@dataclass
class SyntheticDatasetSpec:
    """Gaussian mixture description.

    ``means`` and ``covariances`` may be omitted; means are then drawn from
    ``N(0, mean_scale^2 I)`` with ``component_seed`` and covariances default to
    ``component_std^2 I``.
    """

    num_samples: int
    input_dim: int = 2
    num_components: int = 2
    means: list | None = None
    covariances: list | None = None
    weights: list | None = None
    labeled: bool = False
    mean_scale: float = 2.0
    component_std: float = 0.5
    component_seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1 or self.input_dim < 1 or self.num_components < 1:
            raise DomainError("num_samples, input_dim and num_components must be positive")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown dataset options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def resolved(self):
        """Return ``(means, covariances, weights)`` as validated arrays."""
        k, d = self.num_components, self.input_dim
        if self.means is None:
            rng = np.random.default_rng(self.component_seed)
            means = self.mean_scale * rng.standard_normal((k, d))
        else:
            means = np.asarray(self.means, dtype=np.float64).reshape(k, d)
        if self.covariances is None:
            covs = np.broadcast_to(self.component_std**2 * np.eye(d), (k, d, d)).copy()
        else:
            covs = np.asarray(self.covariances, dtype=np.float64).reshape(k, d, d)
        for j, c in enumerate(covs):
            if not np.allclose(c, c.T, atol=1e-12):
                raise DomainError(f"covariance {j} is not symmetric")
            if np.linalg.eigvalsh(c).min() < -1e-10:
                raise DomainError(f"covariance {j} is not positive semidefinite")
        if self.weights is None:
            weights = np.full(k, 1.0 / k)
        else:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != (k,) or weights.min() < 0 or not np.isclose(weights.sum(), 1.0):
                raise DomainError("weights must be a probability vector over components")
        return means, covs, weights


def sample_dataset(spec: SyntheticDatasetSpec, seed: int):
    """Draw ``spec.num_samples`` points.

    Returns
    -------
    X : ndarray of shape (m, input_dim)
    labels : ndarray of int or None
        Component index of every point when ``spec.labeled``.
    """
    means, covs, weights = spec.resolved()
    rng = np.random.default_rng(seed)
    components = rng.choice(spec.num_components, size=spec.num_samples, p=weights)
    noise = rng.standard_normal((spec.num_samples, spec.input_dim))
    factors = []
    for c in covs:
        vals, vecs = np.linalg.eigh(c)
        factors.append(vecs * np.sqrt(np.clip(vals, 0.0, None)))
    factors = np.stack(factors)
    X = means[components] + np.einsum("nij,nj->ni", factors[components], noise)
    return X, (components.astype(np.int64) if spec.labeled else None)


def two_component_mixture(num_samples, labeled=False):
    """Two well-separated isotropic components in 2-D, the default toy target."""
    return SyntheticDatasetSpec(num_samples, input_dim=2, num_components=2,
                                means=[[-1.5, 0.0], [1.5, 0.5]],
                                covariances=[np.diag([0.3, 0.2]).tolist(), np.diag([0.2, 0.4]).tolist()],
                                labeled=labeled)
