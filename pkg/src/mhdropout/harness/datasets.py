"""Synthetic datasets for the toy studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass
class MultipointData:
    x: np.ndarray  # (d_in,) shared input
    targets: np.ndarray  # (N, d_out)


def gen_multipoint(n_targets: int, rng: np.random.Generator, input_size: int = 2, output_size: int = 2) -> MultipointData:
    """One standard-normal input shared by ``n_targets`` uniform targets on [0, 1]^d."""
    if n_targets < 1:
        raise ValidationError(f"need at least one target, got {n_targets}")
    x = rng.normal(size=input_size)
    return MultipointData(x, rng.uniform(size=(n_targets, output_size)))


@dataclass
class InverseSineData:
    x: np.ndarray  # (n,) model input
    y: np.ndarray  # (n,) model target
    noise: np.ndarray  # (n,)


def inverse_sine_forward(y, noise=0.0):
    return y + 0.3 * np.sin(2 * np.pi * y) + noise


def gen_inverse_sine(count: int, rng: np.random.Generator, noise: float = 0.1) -> InverseSineData:
    """Evenly spaced ``y`` in (0, 1) mapped to ``x = y + 0.3 sin(2 pi y) + eps``.

    ``eps`` is uniform on (-noise, noise). The model learns the inverse map x -> y.
    """
    if count < 2:
        raise ValidationError(f"need at least two points, got {count}")
    y = np.linspace(0.0, 1.0, count + 2)[1:-1]
    eps = rng.uniform(-noise, noise, count)
    return InverseSineData(inverse_sine_forward(y, eps), y, eps)


DEFAULT_GMM_MEANS = ((0.25, 0.25), (0.75, 0.3), (0.5, 0.75))
DEFAULT_GMM_SDS = ((0.05, 0.08), (0.08, 0.04), (0.06, 0.06))
DEFAULT_GMM_WEIGHTS = (0.5, 0.3, 0.2)


@dataclass
class GaussianMixtureData:
    samples: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    means: np.ndarray  # (M, d)
    covariances: np.ndarray  # (M, d, d), diagonal
    weights: np.ndarray  # (M,)


def gen_gaussian_mixture(
    rng: np.random.Generator,
    count: int = 2000,
    means=DEFAULT_GMM_MEANS,
    sds=DEFAULT_GMM_SDS,
    weights=DEFAULT_GMM_WEIGHTS,
) -> GaussianMixtureData:
    """Samples from a mixture of axis-aligned Gaussians (default: three in the unit box)."""
    means = np.asarray(means, dtype=np.float64)
    sds = np.asarray(sds, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if means.shape != sds.shape or len(weights) != len(means):
        raise ValidationError("means, sds and weights disagree on the component count")
    if np.any(sds < 0) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
        raise ValidationError("sds must be >= 0 and weights a probability vector")
    labels = rng.choice(len(weights), size=count, p=weights)
    samples = means[labels] + sds[labels] * rng.standard_normal((count, means.shape[1]))
    covs = np.stack([np.diag(s**2) for s in sds])
    return GaussianMixtureData(samples, labels, means, covs, weights)


DEFAULT_CLUSTER_CENTRES = ((0.2, 0.2), (0.8, 0.2), (0.2, 0.8), (0.8, 0.8))


def gen_clusters(rng: np.random.Generator, count: int = 2000, centres=DEFAULT_CLUSTER_CENTRES, spread: float = 0.05):
    """Isotropic Gaussian clusters with equal weights; returns ``(samples, labels)``."""
    centres = np.asarray(centres, dtype=np.float64)
    labels = rng.integers(0, len(centres), count)
    return centres[labels] + spread * rng.standard_normal((count, centres.shape[1])), labels
