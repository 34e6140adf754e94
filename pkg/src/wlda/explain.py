"""Correlation diagnostics and exact Shapley attributions for a fitted model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from wlda.dataset import MaskedDataset
from wlda.discriminant import WldaModel, weight_matrix

MAX_SHAPLEY_FEATURES = 20


@dataclass(frozen=True)
class CorrelationReport:
    estimated: np.ndarray
    truth: Optional[np.ndarray] = None
    subtraction: Optional[np.ndarray] = None
    squared_error: Optional[np.ndarray] = None

    @classmethod
    def from_covariances(cls, estimated_cov, truth_cov=None) -> "CorrelationReport":
        est = corr_from_cov(estimated_cov)
        if truth_cov is None:
            return cls(est)
        truth = corr_from_cov(truth_cov)
        sub, sq = correlation_diffs(truth, est)
        return cls(est, truth, sub, sq)


@dataclass(frozen=True)
class ShapleyReport:
    sample_index: Optional[int]
    class_id: int
    phi: np.ndarray
    v_full: float
    v_empty: float


def corr_from_cov(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    d = np.diag(cov)
    if np.any(d <= 0):
        raise ValueError("covariance diagonal must be positive")
    s = np.sqrt(d)
    R = cov / np.outer(s, s)
    np.fill_diagonal(R, 1.0)
    return R


def correlation_diffs(truth, est) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {est.shape}")
    sub = truth - est
    return sub, sub * sub


def _coalition_masks(p: int) -> np.ndarray:
    """Row ``s`` has feature ``i`` set iff bit ``i`` of ``s`` is set."""
    idx = np.arange(1 << p)
    return ((idx[:, None] >> np.arange(p)) & 1).astype(bool)


def coalition_values(model: WldaModel, x, mask, g: int) -> np.ndarray:
    """Class-``g`` score for every coalition, indexed by bitmask."""
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    gi = model._class_index(g)
    C = _coalition_masks(model.p) & mask
    dev = np.where(mask, x - model.params.means[gi], 0.0)
    V = weight_matrix(C, model.profile) * dev
    return model.params.priors[gi] - 0.5 * np.einsum("ij,jk,ik->i", V, model.precision, V)


def shapley(model: WldaModel, x, mask, g: int, sample_index: Optional[int] = None) -> ShapleyReport:
    """Exact Shapley values of the class-``g`` score.

    A feature outside the coalition is treated as missing, so the model's
    own masking defines the game; features already missing get zero.
    """
    p = model.p
    if p > MAX_SHAPLEY_FEATURES:
        raise ValueError(f"exact Shapley needs p <= {MAX_SHAPLEY_FEATURES} (got {p}); use a sampling estimator")
    mask = np.asarray(mask, dtype=bool)
    v = coalition_values(model, x, mask, g)
    idx = np.arange(1 << p)
    sizes = _coalition_masks(p).sum(axis=1)
    fact = _factorials(p)

    phi = np.zeros(p)
    for i in range(p):
        if not mask[i]:
            continue
        without = idx[((idx >> i) & 1) == 0]
        k = sizes[without]
        weights = fact[k] * fact[p - k - 1] / fact[p]
        phi[i] = np.sum(weights * (v[without | (1 << i)] - v[without]))
    return ShapleyReport(sample_index, g, phi, float(v[-1]), float(v[0]))


def _factorials(p: int) -> np.ndarray:
    out = np.ones(p + 1)
    for k in range(2, p + 1):
        out[k] = out[k - 1] * k
    return out


def mean_abs_shapley(model: WldaModel, data: MaskedDataset) -> np.ndarray:
    """``G x p`` matrix of mean ``|phi|`` over the samples of ``data``, per class score."""
    if data.n == 0:
        raise ValueError("dataset is empty")
    total = np.zeros((model.n_classes, model.p))
    for i in range(data.n):
        for g in range(1, model.n_classes + 1):
            total[g - 1] += np.abs(shapley(model, data.values[i], data.mask[i], g).phi)
    return total / data.n
