"""Scikit-learn style front end for the full private generation pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.preprocessing import LabelEncoder
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .embedding import embed, embed_labeled, privatize
from .features import DEFAULT_WIDTHS, FeatureMap
from .mmd import mmd_squared, synthetic_embedding
from .privacy import PrivacySpec, calibrate_sigma, effective_sigma
from .training import (EarlyStopConfig, Generator, TrainingConfig, make_proxy_target, make_seeds,
                       train)


class DPMEPF(BaseEstimator):
    """Generative model fit to a once-privatized mean embedding of the data.

    ``fit`` calibrates the noise multiplier for the requested ``(epsilon,
    delta)``, privatizes the mean embedding of the data under a fixed random
    tanh feature extractor, and trains a small generator to minimize the
    squared distance to it.  Passing ``y`` trains a class-conditional
    generator against per-class embedding blocks.

    Parameters
    ----------
    epsilon, delta : float
        Total privacy budget covering every release made by ``fit``.
    noise_multiplier : float or None
        Use this base noise multiplier instead of calibrating; ``0`` gives a
        non-private fit.
    moments : {1, 2}
    feature_widths : tuple of int
    generator_hidden : tuple of int
    latent_dim : int
    n_synthetic : int
        Number of fixed latent seeds used during training.
    iterations, learning_rate, optimizer, eval_every
        Passed to :class:`~dpmepf.training.TrainingConfig`.
    early_stopping : bool
        Release a proxy embedding at ``sigma_stopping_ratio`` times the base
        noise and keep the checkpoint with the lowest proxy score.
    sigma_stopping_ratio : float
    check_every : int
    random_state : int, RandomState instance or None

    Attributes
    ----------
    sigma_ : float
        Base noise multiplier applied to each embedding part.
    feature_map_ : FeatureMap
    embedding_ : MeanEmbedding
        The released (privatized) embedding.
    generator_ : Generator
        Generator carrying the selected parameters.
    history_ : list of dict
    selected_iteration_ : int
    classes_ : ndarray or None
    """

    def __init__(self, epsilon=1.0, delta=1e-5, noise_multiplier=None, moments=2,
                 feature_widths=DEFAULT_WIDTHS, generator_hidden=(32,), latent_dim=2,
                 n_synthetic=256, iterations=2000, learning_rate=1e-2, optimizer="adam",
                 eval_every=10, early_stopping=False, sigma_stopping_ratio=10.0, check_every=50,
                 random_state=0):
        self.epsilon = epsilon
        self.delta = delta
        self.noise_multiplier = noise_multiplier
        self.moments = moments
        self.feature_widths = feature_widths
        self.generator_hidden = generator_hidden
        self.latent_dim = latent_dim
        self.n_synthetic = n_synthetic
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.eval_every = eval_every
        self.early_stopping = early_stopping
        self.sigma_stopping_ratio = sigma_stopping_ratio
        self.check_every = check_every
        self.random_state = random_state

    def release_ratios(self):
        """Noise multiplier ratios of every release ``fit`` makes."""
        ratios = [1.0] * self.moments
        if self.early_stopping:
            ratios += [float(self.sigma_stopping_ratio)] * 2
        return ratios

    def fit(self, X, y=None):
        if y is None:
            X = check_array(X, dtype=np.float64)
            self.classes_ = None
            labels, K = None, 1
        else:
            X, y = check_X_y(X, y, dtype=np.float64)
            encoder = LabelEncoder().fit(y)
            self.classes_ = encoder.classes_
            labels, K = encoder.transform(y), len(encoder.classes_)
        self.n_features_in_ = X.shape[1]
        rs = check_random_state(self.random_state)
        feature_seed, noise_seed, proxy_seed, gen_seed, latent_seed = (
            int(s) for s in rs.randint(0, 2**31 - 1, size=5))

        if self.noise_multiplier is None:
            spec = PrivacySpec.from_ratios(self.epsilon, self.delta, self.release_ratios())
            self.sigma_ = calibrate_sigma(spec)
            self.sigma_eff_ = effective_sigma(spec.releases, self.sigma_)
        else:
            self.sigma_ = float(self.noise_multiplier)
            self.sigma_eff_ = None

        self.feature_map_ = FeatureMap.random(X.shape[1], tuple(self.feature_widths), feature_seed,
                                              self.moments)
        clean = embed(self.feature_map_, X) if K == 1 else \
            embed_labeled(self.feature_map_, X, labels, K)
        self.embedding_ = privatize(clean, self.sigma_, noise_seed)

        proxy = None
        stop_cfg = None
        if self.early_stopping:
            stop_cfg = EarlyStopConfig(self.sigma_stopping_ratio, self.check_every)
            proxy = make_proxy_target(self.feature_map_, X, stop_cfg.sigma_stopping(self.sigma_),
                                      proxy_seed)

        gen = Generator.random(self.latent_dim, X.shape[1], tuple(self.generator_hidden), gen_seed,
                               num_classes=K)
        cfg = TrainingConfig(iterations=self.iterations, batch_size=self.n_synthetic,
                             learning_rate=self.learning_rate, optimizer=self.optimizer,
                             eval_every=self.eval_every, seed=latent_seed, early_stopping=stop_cfg)
        result = train(gen, self.embedding_, self.feature_map_, cfg, proxy_target=proxy)
        self.generator_ = gen.with_theta(result.selected_theta)
        self.history_ = result.history
        self.proxy_scores_ = result.proxy_scores
        self.selected_iteration_ = result.selected_iteration
        self._train_seeds = (result.seeds, result.labels)
        return self

    def sample(self, n_samples=1, random_state=None):
        """Draw fresh samples from the fitted generator.

        Returns
        -------
        X : ndarray of shape (n_samples, n_features)
        y : ndarray or None
            Balanced class labels for conditional models, else ``None``.
        """
        check_is_fitted(self, "generator_")
        seed = check_random_state(random_state).randint(0, 2**31 - 1)
        K = 1 if self.classes_ is None else len(self.classes_)
        seeds, labels = make_seeds(n_samples, self.generator_.latent_dim, seed, K)
        X = self.generator_.forward(seeds)
        return X, (None if labels is None else self.classes_[labels])

    def score(self, X, y=None):
        """Negative non-private squared MMD between ``X`` and the training-seed samples.

        This touches ``X`` without noise, so use it only on public or held-out data.
        """
        check_is_fitted(self, "generator_")
        X = check_array(X, dtype=np.float64)
        seeds, labels = self._train_seeds
        samples = self.generator_.forward(seeds)
        if labels is None:
            target = embed(self.feature_map_, X)
        else:
            if y is None:
                raise ValueError("conditional model needs y to score")
            target = embed_labeled(self.feature_map_, X, np.searchsorted(self.classes_, y),
                                   len(self.classes_))
        synthetic = synthetic_embedding(self.feature_map_, samples, labels, target.num_classes)
        return -mmd_squared(target, synthetic)
