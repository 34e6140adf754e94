"""Direct parameter estimation from incomplete data.

Class means and marginal variances come from the observed entries of each
feature. Every off-diagonal covariance entry is the maximiser of the pooled
bivariate normal log-likelihood over the rows observing both features, with
the means and marginal variances held fixed. No imputation takes place.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from wlda.dataset import MaskedDataset

log = logging.getLogger(__name__)


class EstimationError(ValueError):
    """Raised when the data cannot support a parameter estimate."""


class InsufficientPairsError(EstimationError):
    pass


class DegenerateVarianceError(EstimationError):
    pass


@dataclass(frozen=True)
class PairStats:
    """Centered sufficient statistics over rows observing both features."""

    m: int
    s_jj: float
    s_kk: float
    s_jk: float

    def __post_init__(self):
        if self.m < 0 or self.s_jj < 0 or self.s_kk < 0:
            raise ValueError("pair statistics must be non-negative")


@dataclass(frozen=True)
class ModelParams:
    means: np.ndarray  # G x p
    covariance: np.ndarray  # p x p
    priors: np.ndarray  # log(n_g / n)
    class_counts: np.ndarray
    class_names: tuple[str, ...] = ()
    feature_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariance": self.covariance.tolist(),
            "priors": self.priors.tolist(),
            "class_counts": self.class_counts.tolist(),
            "class_names": list(self.class_names),
            "feature_names": list(self.feature_names),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(
            means=np.array(d["means"], dtype=float),
            covariance=np.array(d["covariance"], dtype=float),
            priors=np.array(d["priors"], dtype=float),
            class_counts=np.array(d["class_counts"], dtype=int),
            class_names=tuple(d.get("class_names", ())),
            feature_names=tuple(d.get("feature_names", ())),
            warnings=tuple(d.get("warnings", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def estimate_means(train: MaskedDataset) -> np.ndarray:
    train._require_labels()
    G, p = train.n_classes, train.p
    means = np.empty((G, p))
    for g in range(G):
        rows = train.labels == g + 1
        counts = train.mask[rows].sum(axis=0)
        for j in np.flatnonzero(counts == 0):
            raise EstimationError(
                f"class {train.class_names[g]!r} has no observed values for feature {train.feature_names[j]!r}"
            )
        means[g] = np.where(train.mask[rows], train.values[rows], 0.0).sum(axis=0) / counts
    return means


def _centered(train: MaskedDataset, means: np.ndarray) -> np.ndarray:
    """Deviation of every entry from its row's class mean; 0 where unobserved."""
    return np.where(train.mask, train.values - means[train.labels - 1], 0.0)


def estimate_diagonal(train: MaskedDataset, means: np.ndarray) -> np.ndarray:
    """Pooled within-class MLE variance of each feature over its observed entries."""
    counts = train.mask.sum(axis=0)
    for j in np.flatnonzero(counts < 2):
        raise EstimationError(f"feature {train.feature_names[j]!r} has fewer than 2 observed values")
    dev = _centered(train, means)
    var = (dev**2).sum(axis=0) / counts
    scale = np.nanmax(np.abs(np.where(train.mask, train.values, np.nan)), axis=0)
    for j in np.flatnonzero(var <= (1e-14 * np.maximum(scale, 1.0)) ** 2):
        raise DegenerateVarianceError(
            f"feature {train.feature_names[j]!r} has zero within-class variance; add jitter or drop it"
        )
    return var


def pair_log_likelihood(sigma, stats: PairStats, sjj_hat: float, skk_hat: float):
    det = sjj_hat * skk_hat - np.square(sigma)
    quad = stats.s_jj * skk_hat - 2.0 * stats.s_jk * sigma + stats.s_kk * sjj_hat
    return -0.5 * stats.m * np.log(det) - quad / (2.0 * det)


def estimate_pair_covariance(stats: PairStats, sjj_hat: float, skk_hat: float) -> float:
    """Maximise the pairwise log-likelihood over the admissible open interval.

    Stationary points are the real roots of
    ``m s^3 - s_jk s^2 - (m a b - s_jj b - s_kk a) s - s_jk a b`` with
    ``a, b`` the fixed marginal variances.
    """
    if stats.m < 2:
        raise InsufficientPairsError(f"need at least 2 jointly observed rows, got {stats.m}")
    if sjj_hat <= 0 or skk_hat <= 0:
        raise EstimationError("marginal variances must be positive")
    a, b, m = sjj_hat, skk_hat, stats.m
    bound = np.sqrt(a * b)

    coeffs = [m, -stats.s_jk, -(m * a * b - stats.s_jj * b - stats.s_kk * a), -stats.s_jk * a * b]
    roots = np.roots(np.array(coeffs, dtype=float) / np.array([1.0, bound, bound**2, bound**3]))
    # roots are in units of the interval half-width
    candidates = []
    for r in roots:
        if abs(r.imag) > 1e-7 or abs(r.real) >= 1.0:
            continue
        s = _polish(r.real * bound, coeffs, bound)
        if abs(s) < bound:
            candidates.append(s)

    if not candidates:
        res = minimize_scalar(
            lambda s: -pair_log_likelihood(s, stats, a, b),
            bounds=(-bound * (1 - 1e-12), bound * (1 - 1e-12)),
            method="bounded",
            options={"xatol": 1e-12 * bound},
        )
        return float(res.x)

    values = [pair_log_likelihood(s, stats, a, b) for s in candidates]
    best = max(values)
    tol = 1e-12 * max(1.0, abs(best))
    return float(min((s for s, v in zip(candidates, values) if v >= best - tol), key=abs))


def _polish(s: float, coeffs, bound: float, steps: int = 3) -> float:
    c3, c2, c1, c0 = coeffs
    for _ in range(steps):
        f = ((c3 * s + c2) * s + c1) * s + c0
        df = (3 * c3 * s + 2 * c2) * s + c1
        if df == 0:
            break
        step = f / df
        if not np.isfinite(step) or abs(step) > 1e-3 * bound:
            break
        s -= step
    return s


def pair_stats(dev: np.ndarray, mask: np.ndarray, j: int, k: int) -> PairStats:
    both = mask[:, j] & mask[:, k]
    dj, dk = dev[both, j], dev[both, k]
    return PairStats(int(both.sum()), float(dj @ dj), float(dk @ dk), float(dj @ dk))


def assemble_covariance(train: MaskedDataset, means: np.ndarray, warnings: list | None = None) -> np.ndarray:
    diag = estimate_diagonal(train, means)
    dev = _centered(train, means)
    p = train.p
    cov = np.diag(diag)
    for j in range(p):
        for k in range(j + 1, p):
            stats = pair_stats(dev, train.mask, j, k)
            try:
                s = estimate_pair_covariance(stats, diag[j], diag[k])
            except InsufficientPairsError:
                msg = (
                    f"features {train.feature_names[j]!r} and {train.feature_names[k]!r} share "
                    f"{stats.m} observed row(s); covariance set to 0"
                )
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
                s = 0.0
            cov[j, k] = cov[k, j] = s
    return cov


def pd_floor(cov: np.ndarray) -> float:
    """Eigenvalue floor used by :func:`repair_pd`: 1e-6 of the mean variance."""
    p = cov.shape[0]
    tr = float(np.trace(cov))
    return 1e-6 * tr / p if tr > 0 else 1e-6


def spectral_floor(cov: np.ndarray) -> float:
    """Floor that lifts non-positive eigenvalues to the smallest positive one.

    Never below :func:`pd_floor`.
    """
    evals = np.linalg.eigvalsh(cov)
    positive = evals[evals > 0]
    return max(pd_floor(cov), float(positive.min()) if positive.size else 0.0)


def conditioning_floor(cov: np.ndarray, ratio: float) -> float:
    """Eigenvalue floor of ``ratio`` times the mean variance, or :func:`spectral_floor` if larger.

    Pairwise estimates at high missing rates can be indefinite or nearly
    singular; a tiny floor then turns sampling noise into a huge precision
    along one direction.
    """
    p = cov.shape[0]
    return max(spectral_floor(cov), ratio * float(np.trace(cov)) / p)


def repair_pd(cov: np.ndarray, floor: float | None = None) -> np.ndarray:
    """Clip eigenvalues below ``floor`` (default :func:`pd_floor`).

    With the default floor, positive-definite input is returned unchanged;
    clipping raises the trace and hence the floor, so this is what makes
    the repair idempotent. An explicit floor is fixed, and input whose
    eigenvalues already clear it is returned unchanged.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    eps = pd_floor(cov) if floor is None else floor
    evals, evecs = np.linalg.eigh(cov)
    # slack absorbs the rounding of a previous reconstruction
    threshold = 0.0 if floor is None else eps * (1 - 1e-6)
    if evals[0] > threshold:
        return cov
    evals = np.maximum(evals, eps)
    out = (evecs * evals) @ evecs.T
    return 0.5 * (out + out.T)


def fit_params(train: MaskedDataset) -> ModelParams:
    train._require_labels()
    counts = train.class_counts()
    if np.any(counts == 0):
        missing = [train.class_names[g] for g in np.flatnonzero(counts == 0)]
        raise EstimationError(f"classes without training samples: {missing}")
    warnings: list[str] = []
    means = estimate_means(train)
    cov = assemble_covariance(train, means, warnings)
    return ModelParams(
        means=means,
        covariance=cov,
        priors=np.log(counts / counts.sum()),
        class_counts=counts,
        class_names=train.class_names,
        feature_names=train.feature_names,
        warnings=tuple(warnings),
    )


def pooled_scatter(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Classical pooled within-class MLE covariance of complete data."""
    values = np.asarray(values, dtype=float)
    dev = np.empty_like(values)
    for g in np.unique(labels):
        rows = labels == g
        dev[rows] = values[rows] - values[rows].mean(axis=0)
    return dev.T @ dev / values.shape[0]
