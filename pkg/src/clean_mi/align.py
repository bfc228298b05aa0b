"""Euclidean alignment: whiten each subject by its mean trial covariance.

The reference matrix is the plain average of ``X @ X.T`` over trials (no
mean removal, no normalisation by sample count). Every trial is then
replaced by ``W @ X`` with ``W`` the inverse square root of that reference,
which makes the mean covariance of the aligned trials the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DataError, TrialSet

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class CovMatrix:
    values: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class WhiteningMatrix:
    values: np.ndarray
    source_cov: CovMatrix
    eps_used: Optional[float] = None  # eigenvalue floor, when it was applied
    n_floored: int = 0


def mean_covariance(ts: TrialSet) -> CovMatrix:
    """Average of ``X @ X.T`` over trials, accumulated in float64 in trial order."""
    if ts.n_trials == 0:
        raise DataError(f"{ts.key}: cannot compute a mean covariance of zero trials")
    c = ts.n_channels
    acc = np.zeros((c, c))
    for trial in ts.trials:
        x = trial.data.astype(np.float64, copy=False)
        acc += x @ x.T
    acc /= ts.n_trials
    return CovMatrix((acc + acc.T) / 2.0)


def identity_deviation(cov: CovMatrix) -> float:
    """Frobenius distance between ``cov`` and the identity."""
    return float(np.linalg.norm(cov.values - np.eye(cov.n_channels), "fro"))


def inv_sqrt_spd(cov: CovMatrix, eps_rel: float = 1e-10) -> WhiteningMatrix:
    """Inverse square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below ``eps_rel * trace / C`` are raised to that floor so
    rank-deficient references still yield a finite transform.
    """
    r = np.asarray(cov.values, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    scale = max(np.max(np.abs(r)), np.finfo(float).tiny)
    if np.max(np.abs(r - r.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("covariance matrix is not symmetric")
    if not np.all(np.isfinite(r)):
        raise DataError("covariance matrix has non-finite entries")
    c = r.shape[0]
    floor = eps_rel * np.trace(r) / c
    if not floor > 0:
        raise DataError("covariance matrix has zero trace; cannot whiten")
    lam, q = np.linalg.eigh((r + r.T) / 2.0)
    low = lam < floor
    lam = np.where(low, floor, lam)
    w = (q * (1.0 / np.sqrt(lam))) @ q.T
    w = (w + w.T) / 2.0
    n_low = int(low.sum())
    return WhiteningMatrix(w, cov, floor if n_low else None, n_low)


def apply_whitening(ts: TrialSet, whitening: WhiteningMatrix) -> TrialSet:
    w = whitening.values
    return ts.with_data([w @ t.data.astype(np.float64, copy=False) for t in ts.trials])


def euclidean_align(ts: TrialSet, eps_rel: float = 1e-10) -> tuple[TrialSet, WhiteningMatrix]:
    """Whiten ``ts`` by the inverse square root of its mean covariance."""
    whitening = inv_sqrt_spd(mean_covariance(ts), eps_rel)
    return apply_whitening(ts, whitening), whitening
