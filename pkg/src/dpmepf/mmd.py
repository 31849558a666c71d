"""Squared MMD between mean embeddings and its gradient w.r.t. synthetic samples."""

from __future__ import annotations

import numpy as np

from .embedding import MeanEmbedding, embed, embed_labeled
from .exceptions import DomainError, ShapeError
from .features import FeatureMap


def _check(target, synthetic):
    if not target.compatible_with(synthetic):
        raise ShapeError(
            f"embeddings differ: moments {target.moments}/{synthetic.moments}, "
            f"length {target.part1.size}/{synthetic.part1.size}, "
            f"classes {target.num_classes}/{synthetic.num_classes}"
        )


def mmd_parts(target: MeanEmbedding, synthetic: MeanEmbedding) -> tuple[float, ...]:
    """Squared distance of each part, ``(||d_1||^2,)`` or ``(||d_1||^2, ||d_2||^2)``."""
    _check(target, synthetic)
    d1 = target.part1 - synthetic.part1
    parts = [float(d1 @ d1)]
    if target.part2 is not None:
        d2 = target.part2 - synthetic.part2
        parts.append(float(d2 @ d2))
    return tuple(parts)


def mmd_squared(target: MeanEmbedding, synthetic: MeanEmbedding) -> float:
    """``||mu(D) - mu(D~)||^2`` summed over parts."""
    return float(sum(mmd_parts(target, synthetic)))


def private_mmd_squared(private_target: MeanEmbedding, synthetic: MeanEmbedding) -> float:
    """Squared distance from a privatized target; the synthetic side carries no noise."""
    return mmd_squared(private_target, synthetic)


def synthetic_embedding(fmap: FeatureMap, samples, labels=None, num_classes=1):
    """Embedding of generated samples, class-conditional when ``labels`` is given.

    Class blocks are divided by the number of synthetic samples ``n``.
    """
    if labels is None or num_classes == 1:
        return embed(fmap, samples)
    return embed_labeled(fmap, samples, labels, num_classes)


def mmd_loss_and_gradient(fmap: FeatureMap, private_target: MeanEmbedding, samples, labels=None):
    """Private squared MMD of ``samples`` and its gradient with respect to each sample.

    Returns
    -------
    loss : float
    grad : ndarray of shape (n, input_dim)
        ``(2/n) (dPhi/dx_j)^T (mu(D~) - mu~)`` restricted to the class block of
        sample ``j``.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.shape[0] == 0:
        raise DomainError("no synthetic samples")
    K = private_target.num_classes
    if K > 1 and labels is None:
        raise DomainError("class-conditional target requires synthetic labels")
    synthetic = synthetic_embedding(fmap, X, labels, K)
    _check(private_target, synthetic)
    n = X.shape[0]
    D = fmap.total_dim
    diff1 = (synthetic.part1 - private_target.part1).reshape(K, D)
    loss = float(np.sum(diff1 * diff1))
    rows = np.zeros(n, dtype=np.int64) if K == 1 else np.asarray(labels, dtype=np.int64)
    cot = diff1[rows]
    if private_target.part2 is not None:
        diff2 = (synthetic.part2 - private_target.part2).reshape(K, D)
        loss += float(np.sum(diff2 * diff2))
        cot = np.concatenate([cot, diff2[rows]], axis=1)
    grad = fmap.vjp(X, (2.0 / n) * cot)
    return loss, grad


def mmd_gradient_wrt_samples(fmap: FeatureMap, private_target: MeanEmbedding, synthetic_samples,
                             labels=None) -> np.ndarray:
    """Gradient of :func:`private_mmd_squared` with respect to every synthetic sample."""
    return mmd_loss_and_gradient(fmap, private_target, synthetic_samples, labels)[1]
