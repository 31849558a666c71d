"""Generator networks trained against a privatized target embedding.

Training uses a fixed set of latent seeds for the whole run, so the synthetic
dataset is a deterministic function of the generator parameters.  Optional DP
early stopping scores checkpoints against a separately privatized proxy
embedding built from the extractor's final layer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _mlp
from .embedding import MeanEmbedding, embed, privatize
from .exceptions import DomainError, ShapeError, TrainingError
from .features import FeatureMap
from .mmd import mmd_loss_and_gradient, mmd_squared, synthetic_embedding

logger = logging.getLogger(__name__)

DEFAULT_SIGMA_STOPPING_RATIO = 10.0


class Generator:
    """Dense generator ``g_theta``: tanh hidden layers and a linear output layer.

    Parameters are stored in one flat vector ``theta``; ``layer_sizes`` is
    ``(input_dim, *hidden, output_dim)`` where ``input_dim`` counts the latent
    dimension plus one one-hot slot per class for conditional generators.
    """

    def __init__(self, layer_sizes, theta=None, num_classes=1):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise DomainError(f"invalid layer sizes {layer_sizes}")
        self.num_classes = int(num_classes)
        self.latent_dim = self.layer_sizes[0] - (self.num_classes if self.num_classes > 1 else 0)
        if self.latent_dim < 1:
            raise DomainError("latent dimension must be positive")
        self.activations = ("tanh",) * (len(self.layer_sizes) - 2) + ("identity",)
        self._shapes = [(o, i) for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
        n_params = sum(o * i + o for o, i in self._shapes)
        if theta is None:
            theta = np.zeros(n_params)
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != n_params:
            raise ShapeError(f"theta has {theta.size} entries, architecture needs {n_params}")
        self.theta = theta

    @classmethod
    def random(cls, latent_dim, output_dim, hidden=(32,), seed=0, num_classes=1):
        """Seeded ``N(0, 1/fan_in)`` weights and zero biases."""
        extra = num_classes if num_classes > 1 else 0
        gen = cls((latent_dim + extra, *hidden, output_dim), num_classes=num_classes)
        rng = np.random.default_rng(seed)
        pieces = []
        for o, i in gen._shapes:
            pieces.append((rng.standard_normal((o, i)) / np.sqrt(i)).ravel())
            pieces.append(np.zeros(o))
        gen.theta = np.concatenate(pieces)
        return gen

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    @property
    def num_params(self):
        return self.theta.size

    def with_theta(self, theta):
        return Generator(self.layer_sizes, np.array(theta, dtype=np.float64), self.num_classes)

    def unpack(self, theta=None):
        theta = self.theta if theta is None else theta
        weights, biases = [], []
        start = 0
        for o, i in self._shapes:
            weights.append(theta[start:start + o * i].reshape(o, i))
            start += o * i
            biases.append(theta[start:start + o])
            start += o
        return weights, biases

    def _check_seeds(self, seeds):
        Z = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
        if Z.shape[1] != self.input_dim:
            raise ShapeError(f"seeds must have {self.input_dim} columns, got shape {Z.shape}")
        return Z

    def forward(self, seeds, theta=None):
        Z = self._check_seeds(seeds)
        weights, biases = self.unpack(theta)
        outputs, _ = _mlp.forward(Z, weights, biases, self.activations)
        return outputs[-1]

    def value_and_vjp(self, seeds, theta=None):
        """Return samples and a function pulling sample cotangents back to ``theta``."""
        Z = self._check_seeds(seeds)
        weights, biases = self.unpack(theta)
        outputs, _ = _mlp.forward(Z, weights, biases, self.activations)

        def pullback(cotangent):
            grads = [None] * len(weights)
            grads[-1] = cotangent
            _, gW, gb = _mlp.backward(Z, weights, self.activations, outputs, grads, need_params=True)
            return np.concatenate([p.ravel() for pair in zip(gW, gb) for p in pair])

        return outputs[-1], pullback

    def config(self):
        return {"layer_sizes": list(self.layer_sizes), "num_classes": self.num_classes}


def make_seeds(n, latent_dim, seed, num_classes=1):
    """Fixed latent seeds ``z_i ~ N(0, I)``, with balanced one-hot labels appended if conditional.

    Returns ``(seeds, labels)``; ``labels`` is ``None`` for unconditional generators.
    """
    if n < 1:
        raise DomainError("need at least one seed")
    Z = np.random.default_rng(seed).standard_normal((n, latent_dim))
    if num_classes <= 1:
        return Z, None
    labels = np.arange(n) % num_classes
    return np.concatenate([Z, np.eye(num_classes)[labels]], axis=1), labels


def generate(gen: Generator, seeds) -> np.ndarray:
    """``x_i = g_theta(z_i)`` for each seed row."""
    return gen.forward(seeds)


@dataclass
class EarlyStopConfig:
    """DP early stopping via a final-layer, two-moment proxy embedding."""

    sigma_stopping_ratio: float = DEFAULT_SIGMA_STOPPING_RATIO
    check_every: int = 50

    def __post_init__(self):
        if not self.sigma_stopping_ratio > 0:
            raise DomainError("sigma_stopping_ratio must be positive")
        if self.check_every < 1:
            raise DomainError("check_every must be positive")

    def sigma_stopping(self, sigma):
        return self.sigma_stopping_ratio * sigma


@dataclass
class TrainingConfig:
    iterations: int = 2000
    batch_size: int = 256
    learning_rate: float = 1e-2
    optimizer: str = "adam"
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    eval_every: int = 10
    seed: int = 0
    early_stopping: EarlyStopConfig | None = None

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size < 1 or self.eval_every < 1:
            raise DomainError("iterations must be >= 0, batch_size and eval_every >= 1")
        if self.learning_rate < 0:
            raise DomainError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if isinstance(self.early_stopping, dict):
            self.early_stopping = EarlyStopConfig(**self.early_stopping)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown training options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["betas"] = list(self.betas)
        if self.early_stopping is not None:
            d["early_stopping"] = {"sigma_stopping_ratio": self.early_stopping.sigma_stopping_ratio,
                                   "check_every": self.early_stopping.check_every}
        return d


class _Adam:
    def __init__(self, size, lr, betas, eps):
        self.lr, (self.b1, self.b2), self.eps = lr, betas, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, grad):
        return theta - self.lr * grad


@dataclass
class TrainResult:
    theta: np.ndarray
    history: list
    selected_iteration: int
    selected_theta: np.ndarray
    seeds: np.ndarray
    labels: np.ndarray | None = None
    proxy_scores: list = field(default_factory=list)
    checkpoint_thetas: list = field(default_factory=list)


def proxy_feature_map(fmap: FeatureMap) -> FeatureMap:
    """Final-layer, two-moment version of ``fmap`` used for early stopping."""
    return fmap.last_layer().with_moments(2)


def make_proxy_target(fmap: FeatureMap, dataset, sigma_stopping: float, rng_seed: int) -> MeanEmbedding:
    """Privatized final-layer two-moment embedding of the private data."""
    return privatize(embed(proxy_feature_map(fmap), dataset), sigma_stopping, rng_seed)


def private_early_stopping_score(gen: Generator, proxy_target: MeanEmbedding, fmap: FeatureMap,
                                 seeds) -> float:
    """Squared distance between the proxy target and the generator's final-layer embedding."""
    return mmd_squared(proxy_target, embed(proxy_feature_map(fmap), gen.forward(seeds)))


def select_checkpoint(scores) -> int:
    """Index of the earliest minimum score."""
    scores = list(scores)
    if not scores:
        raise DomainError("no checkpoint scores")
    best = 0
    for i, s in enumerate(scores):
        if s < scores[best]:
            best = i
    return best


def train(gen: Generator, private_target: MeanEmbedding, fmap: FeatureMap, cfg: TrainingConfig,
          proxy_target: MeanEmbedding | None = None, true_target: MeanEmbedding | None = None,
          callback=None) -> TrainResult:
    """Minimize the private squared MMD over the generator parameters.

    Parameters
    ----------
    gen : Generator
        Supplies the architecture and the initial parameters.
    private_target : MeanEmbedding
        Privatized embedding of the private data.
    fmap : FeatureMap
    cfg : TrainingConfig
    proxy_target : MeanEmbedding, optional
        Privatized proxy embedding; required when ``cfg.early_stopping`` is set.
    true_target : MeanEmbedding, optional
        Non-private embedding, only used to log the true loss for diagnostics.
    callback : callable, optional
        Called with each history record.

    Returns
    -------
    TrainResult
        ``history`` holds ``{"iteration", "private_loss"[, "true_loss"]}`` records
        every ``eval_every`` steps and at the end.  Without early stopping the
        final parameters are selected.
    """
    if cfg.early_stopping is not None and proxy_target is None:
        raise DomainError("early stopping needs a privatized proxy target")
    K = private_target.num_classes
    seeds, labels = make_seeds(cfg.batch_size, gen.latent_dim, cfg.seed, K)
    if seeds.shape[1] != gen.input_dim:
        raise ShapeError("generator input dimension does not match target classes")
    if gen.output_dim != fmap.input_dim:
        raise ShapeError("generator output dimension does not match the feature map")
    pfmap = proxy_feature_map(fmap) if proxy_target is not None else None

    theta = gen.theta.copy()
    if cfg.optimizer == "adam":
        opt = _Adam(theta.size, cfg.learning_rate, cfg.betas, cfg.adam_eps)
    else:
        opt = _SGD(cfg.learning_rate)

    history, checkpoints = [], []
    for it in range(cfg.iterations + 1):
        X, pullback = gen.value_and_vjp(seeds, theta)
        loss, grad_x = mmd_loss_and_gradient(fmap, private_target, X, labels)
        if not math.isfinite(loss) or not np.all(np.isfinite(grad_x)):
            raise TrainingError(f"loss diverged at iteration {it}", iteration=it)
        last = it == cfg.iterations
        if it % cfg.eval_every == 0 or last:
            record = {"iteration": it, "private_loss": loss}
            if true_target is not None:
                record["true_loss"] = mmd_squared(true_target, synthetic_embedding(fmap, X, labels, K))
            history.append(record)
            if callback is not None:
                callback(record)
        if cfg.early_stopping is not None and (it % cfg.early_stopping.check_every == 0 or last):
            score = mmd_squared(proxy_target, embed(pfmap, X))
            checkpoints.append((it, score, theta.copy()))
        if last:
            break
        theta = opt.step(theta, pullback(grad_x))
        if not np.all(np.isfinite(theta)):
            raise TrainingError(f"parameters diverged at iteration {it}", iteration=it)

    if checkpoints:
        best = select_checkpoint([c[1] for c in checkpoints])
        selected_iteration, selected_theta = checkpoints[best][0], checkpoints[best][2]
        logger.info("early stopping selected iteration %d", selected_iteration)
    else:
        selected_iteration, selected_theta = cfg.iterations, theta.copy()
    return TrainResult(theta, history, selected_iteration, selected_theta, seeds, labels,
                       [{"iteration": c[0], "proxy_score": c[1]} for c in checkpoints],
                       [c[2] for c in checkpoints])


def true_mmd_squared(gen: Generator, theta, seeds, fmap: FeatureMap, target: MeanEmbedding,
                     labels=None) -> float:
    """Non-private squared MMD of the generator's fixed-seed samples."""
    X = gen.forward(seeds, theta)
    return mmd_squared(target, synthetic_embedding(fmap, X, labels, target.num_classes))
