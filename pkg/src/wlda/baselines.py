"""Two-step comparators: impute the missing entries, then run classical LDA."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from wlda.dataset import DatasetError, MaskedDataset
from wlda.estimation import pooled_scatter, repair_pd

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImputedDataset:
    values: np.ndarray
    method: str
    params: dict
    original_mask: np.ndarray
    warnings: tuple[str, ...] = ()
    history: tuple[float, ...] = ()

    @property
    def provenance(self) -> dict:
        return {"method": self.method, **self.params}


def _column_means(data: MaskedDataset) -> np.ndarray:
    counts = data.mask.sum(axis=0)
    if np.any(counts == 0):
        bad = [data.feature_names[j] for j in np.flatnonzero(counts == 0)]
        raise DatasetError(f"features with no observed values cannot be imputed: {bad}")
    return data.filled(0.0).sum(axis=0) / counts


def mean_impute(data: MaskedDataset) -> ImputedDataset:
    means = _column_means(data)
    return ImputedDataset(np.where(data.mask, data.values, means), "mean", {}, data.mask)


def knn_impute(data: MaskedDataset, k: int = 5) -> ImputedDataset:
    """Fill each hole with the mean of its ``k`` nearest donors for that feature.

    Distances use the coordinates both rows observe, scaled by
    ``sqrt(p / shared)``; rows that share nothing are never donors.
    """
    if k < 1:
        raise ValueError("k must be positive")
    X, M = data.filled(0.0), data.mask
    n, p = X.shape
    out = np.where(M, data.values, np.nan)
    warnings = []
    col_means = None

    shared = M.astype(float) @ M.T.astype(float)
    sq = np.zeros((n, n))
    for j in range(p):
        both = np.outer(M[:, j], M[:, j])
        sq += both * (X[:, j][:, None] - X[:, j][None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(shared > 0, np.sqrt(sq * p / shared), np.inf)

    for i in np.flatnonzero(~M.all(axis=1)):
        for j in np.flatnonzero(~M[i]):
            donors = np.flatnonzero(M[:, j] & np.isfinite(dist[i]))
            donors = donors[donors != i]
            if donors.size == 0:
                if col_means is None:
                    col_means = _column_means(data)
                msg = f"no donor for row {i}, feature {data.feature_names[j]!r}; used the column mean"
                log.warning(msg)
                warnings.append(msg)
                out[i, j] = col_means[j]
                continue
            # lexsort: last key is primary, so distance first then row index
            order = np.lexsort((donors, dist[i, donors]))
            out[i, j] = X[donors[order[:k]], j].mean()
    return ImputedDataset(out, "knn", {"k": k}, M, tuple(warnings))


def default_lambda(data: MaskedDataset) -> float:
    return float(np.linalg.svd(mean_impute(data).values, compute_uv=False)[0] / 10.0)


def soft_impute(
    data: MaskedDataset,
    lam: Optional[float] = None,
    max_iters: int = 200,
    tol: float = 1e-5,
    max_rank: Optional[int] = None,
) -> ImputedDataset:
    """Iterative singular-value soft-thresholding, warm-started from the mean fill.

    ``max_rank`` additionally truncates each iterate to its leading singular
    triplets; with ``lam=0`` this is hard-impute.
    ``history`` records ``0.5 * ||P_obs(X - Z)||^2 + lam * ||Z||_*`` per iterate.
    """
    M = data.mask
    if np.any(M.sum(axis=0) == 0) or np.any(M.sum(axis=1) == 0):
        raise DatasetError("soft-impute needs an observed entry in every row and column")
    if lam is None:
        lam = default_lambda(data)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = data.filled(0.0)
    missing = ~M
    Z = mean_impute(data).values
    history = []
    converged = False
    for it in range(max_iters):
        U, s, Vt = np.linalg.svd(np.where(M, X, Z), full_matrices=False)
        s = np.maximum(s - lam, 0.0)
        if max_rank is not None:
            s[max_rank:] = 0.0
        Z_new = (U * s) @ Vt
        history.append(0.5 * float(np.sum((X - Z_new)[M] ** 2)) + lam * float(s.sum()))
        if not missing.any():
            Z = Z_new
            converged = True
            break
        old = Z[missing]
        change = np.sum((Z_new[missing] - old) ** 2)
        denom = np.sum(old**2)
        Z = Z_new
        if (change / denom if denom > 0 else change) < tol:
            converged = True
            break
    warnings = () if converged else (f"soft-impute did not converge in {max_iters} iterations",)
    for w in warnings:
        log.warning(w)
    params = {"lambda": float(lam), "max_iters": max_iters, "tol": tol, "iterations": it + 1, "converged": converged}
    if max_rank is not None:
        params["max_rank"] = max_rank
    return ImputedDataset(np.where(M, data.values, Z), "soft", params, M, warnings, tuple(history))


class ClassicalLDA:
    """Gaussian LDA with a pooled within-class MLE covariance."""

    def fit(self, X, y, n_classes: Optional[int] = None) -> "ClassicalLDA":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        G = n_classes or int(y.max())
        if G < 2:
            raise ValueError("LDA needs at least two classes")
        counts = np.bincount(y, minlength=G + 1)[1:]
        self.means_ = np.array([X[y == g].mean(axis=0) for g in range(1, G + 1)])
        self.covariance_ = repair_pd(pooled_scatter(X, y))
        self.precision_ = np.linalg.inv(self.covariance_)
        self.priors_ = np.log(counts / counts.sum())
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.means_.shape[0]))
        for g, mu in enumerate(self.means_):
            d = X - mu
            out[:, g] = self.priors_[g] - 0.5 * np.einsum("ij,jk,ik->i", d, self.precision_, d)
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1) + 1


def classical_lda_fit_predict(train: ImputedDataset, labels, test: ImputedDataset, n_classes=None) -> np.ndarray:
    return ClassicalLDA().fit(train.values, labels, n_classes).predict(test.values)


IMPUTERS = {
    "mean": lambda data, **kw: mean_impute(data),
    "knn": lambda data, k=5, **kw: knn_impute(data, k=k),
    "soft": lambda data, lam=None, **kw: soft_impute(data, lam=lam),
}
