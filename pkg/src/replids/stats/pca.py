"""PCA over memory-access samples and Hotelling's T-squared in full component space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DetectionError
from .linalg import eigendecompose_symmetric

# components with latent <= DEGENERATE_RATIO * max(latent) are left out of T^2
DEGENERATE_RATIO = 1e-10


def _as_matrix(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if x.size else x.reshape(0, 0)
    if x.ndim != 2:
        raise DetectionError("empty-sample", f"expected a 2-D sample matrix, got ndim={x.ndim}")
    if x.size and not np.all(np.isfinite(x)):
        raise DetectionError("non-finite-sample")
    return x


def column_means(samples) -> np.ndarray:
    """Per-feature sample mean of an ``n x p`` matrix."""
    x = _as_matrix(samples)
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise DetectionError("empty-sample")
    return x.sum(axis=0) / x.shape[0]


def covariance_matrix(samples) -> np.ndarray:
    """Sample covariance with ``n - 1`` degrees of freedom."""
    x = _as_matrix(samples)
    if x.shape[0] < 2:
        raise DetectionError("insufficient-observations", f"need at least 2 rows, got {x.shape[0]}")
    xc = x - column_means(x)
    cov = xc.T @ xc / (x.shape[0] - 1)
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class PcaModel:
    """Result of :func:`pca`.

    ``coefficients`` holds the principal axes as columns, ``latents`` the
    component variances (descending) and ``scores`` the centred samples
    expressed in component coordinates.
    """

    mean: np.ndarray
    coefficients: np.ndarray
    latents: np.ndarray
    scores: np.ndarray

    @property
    def n_observations(self) -> int:
        return self.scores.shape[0]

    @property
    def n_features(self) -> int:
        return self.scores.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.scores @ self.coefficients.T + self.mean


def pca(samples) -> PcaModel:
    """Principal component analysis keeping every component.

    The covariance matrix is diagonalised with cyclic Jacobi rotations;
    no dimensionality reduction is applied.
    """
    x = _as_matrix(samples)
    mean = column_means(x)
    cov = covariance_matrix(x)
    latents, coeffs = eigendecompose_symmetric(cov)
    # round-off can leave tiny negative variances
    latents = np.clip(latents, 0.0, None)
    scores = (x - mean) @ coeffs
    return PcaModel(mean=mean, coefficients=coeffs, latents=latents, scores=scores)


def hotelling_t2(model: PcaModel) -> np.ndarray:
    """Per-observation T-squared: ``sum_j score_ij**2 / latent_j``.

    Components whose latent is at most ``1e-10`` times the largest one
    carry no variance worth normalising and contribute zero instead of
    being pseudo-inverted.
    """
    latents = np.asarray(model.latents, dtype=float)
    scores = np.asarray(model.scores, dtype=float)
    if latents.size == 0 or scores.shape[0] == 0:
        return np.zeros(scores.shape[0])
    top = float(latents.max())
    if top <= 0.0:
        return np.zeros(scores.shape[0])
    keep = latents > DEGENERATE_RATIO * top
    return np.sum(scores[:, keep] ** 2 / latents[keep], axis=1)
