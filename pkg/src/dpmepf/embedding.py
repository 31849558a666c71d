"""Mean embeddings, their sensitivity, and one-shot Gaussian privatization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError, ShapeError
from .features import FeatureMap

# rows per accumulation chunk; the chunking is fixed so sums are reproducible
CHUNK_ROWS = 4096


@dataclass(frozen=True, eq=False)
class MeanEmbedding:
    """Per-part mean feature vectors of a dataset.

    With ``num_classes = K > 1`` each part is the concatenation of ``K`` class
    blocks of length ``D``, each divided by the total sample count ``m``.

    Attributes
    ----------
    part1, part2 : ndarray
        ``part2`` is ``None`` for one-moment embeddings.
    sample_count : int
        ``m``.
    class_counts : tuple of int or None
    sigma : float
        Noise multiplier used to privatize this embedding (0 if released as is).
    noise_seed : int or None
    private : bool
        Whether the Gaussian mechanism has been applied.
    feature_config : dict or None
        Recipe of the feature map that produced the embedding.
    """

    part1: np.ndarray
    part2: np.ndarray | None
    sample_count: int
    class_counts: tuple | None = None
    sigma: float = 0.0
    noise_seed: int | None = None
    private: bool = False
    feature_config: dict | None = field(default=None)

    def __post_init__(self):
        part1 = np.asarray(self.part1, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "part1", part1)
        if self.part2 is not None:
            part2 = np.asarray(self.part2, dtype=np.float64).reshape(-1)
            if part2.shape != part1.shape:
                raise ShapeError(f"part shapes differ: {part1.shape} vs {part2.shape}")
            object.__setattr__(self, "part2", part2)
        if int(self.sample_count) < 1:
            raise DomainError(f"sample_count must be >= 1, got {self.sample_count}")
        object.__setattr__(self, "sample_count", int(self.sample_count))
        if self.class_counts is not None:
            counts = tuple(int(c) for c in self.class_counts)
            if sum(counts) != self.sample_count:
                raise DomainError("class counts must sum to the sample count")
            if part1.size % len(counts):
                raise ShapeError("part length is not a multiple of the number of classes")
            object.__setattr__(self, "class_counts", counts)

    @property
    def moments(self):
        return 1 if self.part2 is None else 2

    @property
    def num_classes(self):
        return 1 if self.class_counts is None else len(self.class_counts)

    @property
    def dim(self):
        """Per-class feature dimension ``D``."""
        return self.part1.size // self.num_classes

    @property
    def vector(self):
        """All parts concatenated, ``[part1, part2]``."""
        return self.part1 if self.part2 is None else np.concatenate([self.part1, self.part2])

    def blocks(self, part=1):
        """``(K, D)`` view of one part."""
        values = self.part1 if part == 1 else self.part2
        return values.reshape(self.num_classes, self.dim)

    def compatible_with(self, other):
        return (self.moments == other.moments and self.part1.shape == other.part1.shape
                and self.num_classes == other.num_classes)


def _accumulate(fmap, X, rows=None):
    """Sum of ``phi1`` and ``phi2`` over the selected rows, in fixed chunk order."""
    D = fmap.total_dim
    s1 = np.zeros(D)
    s2 = np.zeros(D) if fmap.moments == 2 else None
    if rows is not None:
        X = X[rows]
    for start in range(0, X.shape[0], CHUNK_ROWS):
        phi1, phi2 = fmap.phi(X[start:start + CHUNK_ROWS])
        s1 += phi1.sum(axis=0)
        if s2 is not None:
            s2 += phi2.sum(axis=0)
    return s1, s2


def _as_dataset(fmap, dataset):
    X = np.asarray(dataset, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == fmap.input_dim else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != fmap.input_dim:
        raise ShapeError(f"dataset must have shape (m, {fmap.input_dim}), got {np.shape(dataset)}")
    if X.shape[0] == 0:
        raise DomainError("dataset is empty")
    return X


def embed(fmap: FeatureMap, dataset) -> MeanEmbedding:
    """Empirical mean embedding ``(1/m) sum_i Phi(x_i)``."""
    X = _as_dataset(fmap, dataset)
    m = X.shape[0]
    s1, s2 = _accumulate(fmap, X)
    return MeanEmbedding(s1 / m, None if s2 is None else s2 / m, m,
                         feature_config=fmap.config and fmap.to_config())


def embed_labeled(fmap: FeatureMap, dataset, labels, num_classes: int) -> MeanEmbedding:
    """Class-conditional embedding with block ``k`` equal to ``(1/m) sum_{y_i = k} Phi(x_i)``.

    Labels are integers in ``[0, num_classes)``.  Empty classes give zero blocks.
    """
    X = _as_dataset(fmap, dataset)
    y = np.asarray(labels)
    if num_classes < 1:
        raise DomainError(f"num_classes must be >= 1, got {num_classes}")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"expected {X.shape[0]} labels, got shape {y.shape}")
    if y.size and (not np.all(np.equal(np.mod(y, 1), 0)) or y.min() < 0 or y.max() >= num_classes):
        raise DomainError(f"labels must be integers in [0, {num_classes})")
    y = y.astype(np.int64)
    m = X.shape[0]
    D = fmap.total_dim
    p1 = np.zeros((num_classes, D))
    p2 = np.zeros((num_classes, D)) if fmap.moments == 2 else None
    counts = []
    for k in range(num_classes):
        rows = np.flatnonzero(y == k)
        counts.append(rows.size)
        if rows.size == 0:
            continue
        s1, s2 = _accumulate(fmap, X, rows)
        p1[k] = s1 / m
        if p2 is not None:
            p2[k] = s2 / m
    return MeanEmbedding(p1.reshape(-1), None if p2 is None else p2.reshape(-1), m,
                         class_counts=None if num_classes == 1 else tuple(counts),
                         feature_config=fmap.config and fmap.to_config())


def sensitivity(m: int) -> float:
    """L2 sensitivity ``2/m`` of each part under replace-one neighbors."""
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    return 2.0 / m


def privatize(embedding: MeanEmbedding, sigma: float, rng_seed: int) -> MeanEmbedding:
    """Add ``N(0, (2 sigma / m)^2 I)`` noise to every part (and class block).

    Noise for part 1 is drawn before part 2 from one seeded stream.
    """
    if not sigma >= 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    std = sigma * sensitivity(embedding.sample_count)
    if sigma == 0:
        part1, part2 = embedding.part1.copy(), None if embedding.part2 is None else embedding.part2.copy()
    else:
        rng = np.random.default_rng(rng_seed)
        part1 = embedding.part1 + std * rng.standard_normal(embedding.part1.size)
        part2 = None if embedding.part2 is None else \
            embedding.part2 + std * rng.standard_normal(embedding.part2.size)
    return replace(embedding, part1=part1, part2=part2, sigma=float(sigma),
                   noise_seed=int(rng_seed), private=True)


@dataclass(frozen=True)
class NoiseCovariance:
    """Diagonal covariance of the noise added to a (possibly two-part) embedding.

    Part ``t`` gets per-coordinate variance ``(2 C_t sigma / m)^2`` over ``dim``
    coordinates, where ``dim = D * K``.
    """

    sigma: float
    m: int
    dim: int
    moments: int = 2
    part_scales: tuple = (1.0, 1.0)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError("sigma must be >= 0")
        if self.m < 1 or self.dim < 1:
            raise DomainError("m and dim must be positive")
        if self.moments not in (1, 2):
            raise DomainError("moments must be 1 or 2")
        if min(self.part_scales) <= 0:
            raise DomainError("part scales must be positive")

    @classmethod
    def for_embedding(cls, embedding: MeanEmbedding, sigma=None, part_scales=(1.0, 1.0)):
        return cls(embedding.sigma if sigma is None else sigma, embedding.sample_count,
                   embedding.part1.size, embedding.moments, part_scales)

    @property
    def unit(self):
        return 4.0 * self.sigma**2 / self.m**2

    @property
    def _scales_sq(self):
        c1, c2 = self.part_scales
        return (c1**2,) if self.moments == 1 else (c1**2, c2**2)

    def part_stds(self):
        return tuple(2.0 * math.sqrt(c) * self.sigma / self.m for c in self._scales_sq)

    def std_vector(self):
        """Per-coordinate standard deviations in ``[part1, part2]`` layout."""
        return np.concatenate([np.full(self.dim, s) for s in self.part_stds()])

    @property
    def trace(self):
        return self.unit * sum(self._scales_sq) * self.dim

    @property
    def frobenius(self):
        # closed form (C1^2 + C2^2) sqrt(D): an upper bound on the exact value
        # sqrt(C1^4 + C2^4) sqrt(D) when both parts are present
        return self.unit * sum(self._scales_sq) * math.sqrt(self.dim)

    @property
    def operator_norm(self):
        return self.unit * max(self._scales_sq)

    def sqrt_quadratic(self, part_norms):
        """``||Sigma^{1/2} a||`` from the per-part norms ``||a_t||``."""
        part_norms = tuple(part_norms)[: self.moments]
        total = sum(c * n**2 for c, n in zip(self._scales_sq, part_norms))
        return 2.0 * self.sigma / self.m * math.sqrt(total)


def noise_covariance_terms(cov: NoiseCovariance) -> tuple[float, float, float]:
    """``(Tr(Sigma), ||Sigma||_F, ||Sigma||_op)``."""
    return cov.trace, cov.frobenius, cov.operator_norm
