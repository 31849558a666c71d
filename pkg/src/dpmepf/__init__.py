"""Differentially private generative modeling with once-privatized feature mean embeddings."""

__version__ = "0.1.0"

from .bounds import (BoundInputs, expected_abs_error_bound, high_prob_error_bound,
                     minimizer_gap_bound, monte_carlo_verify, optimistic_gap_bound,
                     uniform_error_bound)
from .data import SyntheticDatasetSpec, sample_dataset, two_component_mixture
from .embedding import (MeanEmbedding, NoiseCovariance, embed, embed_labeled,
                        noise_covariance_terms, privatize, sensitivity)
from .estimator import DPMEPF
from .exceptions import (CalibrationError, DomainError, FormatError, ShapeError, TrainingError,
                         UnsupportedVersionError)
from .features import (FeatureMap, PerceptualFeatures, extract_features, phi,
                       phi_jacobian_vector_product)
from .mmd import (mmd_gradient_wrt_samples, mmd_squared, private_mmd_squared)
from .privacy import PrivacySpec, Release, analytic_delta, calibrate_sigma, effective_sigma
from .training import (EarlyStopConfig, Generator, TrainingConfig, generate,
                       private_early_stopping_score, select_checkpoint, train)

__all__ = [
    "BoundInputs", "CalibrationError", "DPMEPF", "DomainError", "EarlyStopConfig", "FeatureMap",
    "FormatError", "Generator", "MeanEmbedding", "NoiseCovariance", "PerceptualFeatures",
    "PrivacySpec", "Release", "ShapeError", "SyntheticDatasetSpec", "TrainingConfig",
    "TrainingError", "UnsupportedVersionError", "analytic_delta", "calibrate_sigma",
    "effective_sigma", "embed", "embed_labeled", "expected_abs_error_bound", "extract_features",
    "generate", "high_prob_error_bound", "minimizer_gap_bound", "mmd_gradient_wrt_samples",
    "mmd_squared", "monte_carlo_verify", "noise_covariance_terms", "optimistic_gap_bound", "phi",
    "phi_jacobian_vector_product", "private_early_stopping_score", "private_mmd_squared",
    "privatize", "sample_dataset", "two_component_mixture", "select_checkpoint", "sensitivity", "train",
    "uniform_error_bound",
]
