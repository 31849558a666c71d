"""Fixed multi-layer feature extractors and the normalized two-moment feature map.

A :class:`FeatureMap` concatenates the activations of every layer of a fixed
network into a raw feature vector ``r(x)`` of length ``D``.  The map used for
mean embeddings is

    phi1(x) = r(x) / ||r(x)||,    phi2(x) = r(x)**2 / ||r(x)**2||

so that each part has unit norm and ``||Phi(x)|| <= sqrt(moments)``.  Inputs
whose raw features vanish are mapped to the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from . import _mlp
from .exceptions import DomainError, ShapeError

DEFAULT_WIDTHS = (32, 32)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A fixed network whose layer activations serve as features.

    Parameters
    ----------
    weights, biases : tuple of ndarray
        ``weights[j]`` has shape ``(d_j, d_{j-1})``.
    activations : tuple of str
        ``"tanh"`` or ``"identity"`` per layer.
    moments : int
        1 for ``Phi = phi1``, 2 for ``Phi = [phi1, phi2]``.
    normalize : bool
        Normalize each part to unit norm.  Only disabled for linear toy problems.
    last_only : bool
        Use only the final layer's activations as raw features.
    config : dict, optional
        Construction recipe, kept so the map can be serialized.
    """

    weights: tuple
    biases: tuple
    activations: tuple
    moments: int = 2
    normalize: bool = True
    last_only: bool = False
    config: dict | None = None

    def __post_init__(self):
        if self.moments not in (1, 2):
            raise DomainError(f"moments must be 1 or 2, got {self.moments}")
        if not (len(self.weights) == len(self.biases) == len(self.activations) >= 1):
            raise ShapeError("weights, biases and activations must have equal nonzero length")
        weights = tuple(np.array(W, dtype=np.float64) for W in self.weights)
        biases = tuple(np.array(b, dtype=np.float64).reshape(-1) for b in self.biases)
        for j, (W, b) in enumerate(zip(weights, biases)):
            if W.ndim != 2 or W.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {j}: weight {W.shape} and bias {b.shape} disagree")
            if j and W.shape[1] != weights[j - 1].shape[0]:
                raise ShapeError(f"layer {j} expects {W.shape[1]} inputs, previous has {weights[j - 1].shape[0]}")
            W.setflags(write=False)
            b.setflags(write=False)
        for act in self.activations:
            _mlp.check_activation(act)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "activations", tuple(self.activations))

    @classmethod
    def random(cls, input_dim, widths=DEFAULT_WIDTHS, seed=0, moments=2, normalize=True):
        """Seeded random tanh network with ``N(0, 1/fan_in)`` weights and ``N(0, 0.01)`` biases."""
        if input_dim < 1 or not widths or min(widths) < 1:
            raise DomainError("input_dim and all widths must be positive")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        fan_in = input_dim
        for width in widths:
            weights.append(rng.standard_normal((width, fan_in)) / np.sqrt(fan_in))
            biases.append(0.1 * rng.standard_normal(width))
            fan_in = width
        config = {"kind": "random", "input_dim": int(input_dim), "widths": [int(w) for w in widths],
                  "seed": int(seed), "moments": int(moments), "normalize": bool(normalize)}
        return cls(tuple(weights), tuple(biases), ("tanh",) * len(widths), moments, normalize,
                   config=config)

    @classmethod
    def identity(cls, input_dim, moments=1, normalize=True):
        """Single identity layer: raw features equal the input."""
        config = {"kind": "identity", "input_dim": int(input_dim), "moments": int(moments),
                  "normalize": bool(normalize)}
        return cls((np.eye(input_dim),), (np.zeros(input_dim),), ("identity",), moments,
                   normalize, config=config)

    @classmethod
    def from_config(cls, config):
        """Rebuild a map from :meth:`to_config` output (or a hand-written JSON config)."""
        config = dict(config)
        kind = config.get("kind", "random")
        moments = int(config.get("moments", 2))
        normalize = bool(config.get("normalize", True))
        if kind == "identity":
            fmap = cls.identity(int(config["input_dim"]), moments, normalize)
        elif kind == "random":
            fmap = cls.random(int(config["input_dim"]), tuple(config.get("widths", DEFAULT_WIDTHS)),
                              int(config.get("seed", 0)), moments, normalize)
        else:
            raise DomainError(f"unknown feature map kind {kind!r}")
        return fmap.last_layer() if config.get("last_only", False) else fmap

    def to_config(self):
        if self.config is None:
            raise DomainError("feature map built from explicit weights has no config")
        return {**self.config, "last_only": self.last_only}

    def last_layer(self):
        """The same network, keeping only its final layer's activations."""
        return FeatureMap(self.weights, self.biases, self.activations, self.moments,
                          self.normalize, last_only=True, config=self.config)

    def with_moments(self, moments):
        config = None if self.config is None else {**self.config, "moments": int(moments)}
        return FeatureMap(self.weights, self.biases, self.activations, moments,
                          self.normalize, self.last_only, config)

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def layer_dims(self):
        dims = [W.shape[0] for W in self.weights]
        return dims[-1:] if self.last_only else dims

    @property
    def total_dim(self):
        """``D``, the length of ``phi1``."""
        return int(sum(self.layer_dims))

    @property
    def output_dim(self):
        return self.moments * self.total_dim

    @property
    def norm_bound(self):
        """``B`` with ``||Phi(x)|| <= B`` for every ``x``."""
        return float(np.sqrt(self.moments)) if self.normalize else np.inf

    # batched internals -------------------------------------------------

    def _as_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"expected inputs of dimension {self.input_dim}, got shape {np.shape(X)}")
        return X, single

    def _forward(self, X):
        outputs, _ = _mlp.forward(X, self.weights, self.biases, self.activations)
        raw = outputs[-1] if self.last_only else np.concatenate(outputs, axis=1)
        return raw, outputs

    def _parts(self, raw):
        if not self.normalize:
            return raw, (raw**2 if self.moments == 2 else None), None
        norm1 = np.linalg.norm(raw, axis=1, keepdims=True)
        safe1 = np.where(norm1 > 0, norm1, 1.0)
        phi1 = np.where(norm1 > 0, raw / safe1, 0.0)
        if self.moments == 1:
            return phi1, None, (norm1, None)
        sq = raw**2
        norm2 = np.linalg.norm(sq, axis=1, keepdims=True)
        safe2 = np.where(norm2 > 0, norm2, 1.0)
        phi2 = np.where(norm2 > 0, sq / safe2, 0.0)
        return phi1, phi2, (norm1, norm2)

    def raw_features(self, X):
        """Concatenated activations ``[e_1(x), ..., e_J(x)]`` before normalization."""
        X, single = self._as_batch(X)
        raw, _ = self._forward(X)
        return raw[0] if single else raw

    def phi(self, X):
        """Return ``(phi1, phi2)``; ``phi2`` is ``None`` for one moment."""
        X, single = self._as_batch(X)
        raw, _ = self._forward(X)
        phi1, phi2, _ = self._parts(raw)
        if single:
            return phi1[0], (None if phi2 is None else phi2[0])
        return phi1, phi2

    def features(self, X):
        """``Phi(x) = [phi1(x), phi2(x)]`` as rows of length ``moments * D``."""
        phi1, phi2 = self.phi(X)
        return phi1 if phi2 is None else np.concatenate([phi1, phi2], axis=-1)

    def vjp(self, X, cotangent):
        """``(dPhi/dx)^T c`` for each row, including the normalization Jacobian."""
        X, single = self._as_batch(X)
        C = np.atleast_2d(np.asarray(cotangent, dtype=np.float64))
        if C.shape != (X.shape[0], self.output_dim):
            raise ShapeError(f"cotangent shape {np.shape(cotangent)} does not match "
                             f"{X.shape[0]} inputs with {self.output_dim} features")
        raw, outputs = self._forward(X)
        phi1, phi2, norms = self._parts(raw)
        D = self.total_dim
        c1 = C[:, :D]
        if self.normalize:
            norm1 = norms[0]
            radial = np.sum(phi1 * c1, axis=1, keepdims=True)
            g_raw = np.where(norm1 > 0, (c1 - phi1 * radial) / np.where(norm1 > 0, norm1, 1.0), 0.0)
        else:
            g_raw = c1.copy()
        if self.moments == 2:
            c2 = C[:, D:]
            if self.normalize:
                norm2 = norms[1]
                radial = np.sum(phi2 * c2, axis=1, keepdims=True)
                g_sq = np.where(norm2 > 0, (c2 - phi2 * radial) / np.where(norm2 > 0, norm2, 1.0), 0.0)
            else:
                g_sq = c2
            g_raw = g_raw + 2.0 * raw * g_sq
        n_layers = len(self.weights)
        layer_grads = [None] * n_layers
        if self.last_only:
            layer_grads[-1] = g_raw
        else:
            start = 0
            for j, W in enumerate(self.weights):
                layer_grads[j] = g_raw[:, start:start + W.shape[0]]
                start += W.shape[0]
        g_x, _, _ = _mlp.backward(X, self.weights, self.activations, outputs, layer_grads)
        return g_x[0] if single else g_x


def extract_features(fmap: FeatureMap, x) -> np.ndarray:
    """Raw concatenated per-layer activations of ``x`` (one vector or a batch)."""
    return fmap.raw_features(x)


def phi(fmap: FeatureMap, x):
    """Unit-normalized first and (optional) second moment features of ``x``."""
    return fmap.phi(x)


def phi_jacobian_vector_product(fmap: FeatureMap, x, cotangent) -> np.ndarray:
    """Reverse-mode product ``(dPhi/dx)^T cotangent``."""
    return fmap.vjp(x, cotangent)


class PerceptualFeatures(TransformerMixin, BaseEstimator):
    """Transformer mapping samples to ``Phi(x)`` through a seeded random tanh network.

    Parameters
    ----------
    widths : tuple of int, default=(32, 32)
        Hidden layer widths; their sum is the feature dimension ``D``.
    moments : {1, 2}, default=2
        Whether to append the normalized squared features.
    random_state : int, RandomState instance or None, default=0
        Seed for the network weights.

    Attributes
    ----------
    feature_map_ : FeatureMap
    n_features_in_ : int
    """

    def __init__(self, widths=DEFAULT_WIDTHS, moments=2, random_state=0):
        self.widths = widths
        self.moments = moments
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        seed = check_random_state(self.random_state).randint(np.iinfo(np.int32).max) \
            if not isinstance(self.random_state, (int, np.integer)) else int(self.random_state)
        self.feature_map_ = FeatureMap.random(X.shape[1], tuple(self.widths), seed, self.moments)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_map_")
        X = check_array(X, dtype=np.float64)
        return self.feature_map_.features(X)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_map_")
        D = self.feature_map_.total_dim
        names = [f"phi1_{i}" for i in range(D)]
        if self.moments == 2:
            names += [f"phi2_{i}" for i in range(D)]
        return np.asarray(names, dtype=object)
