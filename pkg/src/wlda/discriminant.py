"""Weighted missing LDA: scoring, prediction, decision boundaries and moments.

Each sample ``x`` with mask ``m`` is scored against class ``g`` as::

    pi_g - 1/2 (x - mu_g)^T  W_x S^-1 W_x  (x - mu_g)

with ``W_x = diag(m * w)`` and ``w_i = 1 / (1 - r_i)`` for the missing rate
``r_i`` of feature ``i``. Missing coordinates contribute nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from wlda.dataset import DatasetError, MaskedDataset, feature_missing_rates
from wlda.estimation import ModelParams, conditioning_floor, fit_params, repair_pd

WEIGHT_SCOPES = ("train_only", "train_plus_test")
# eigenvalue floor for the fitted covariance, as a fraction of the mean variance
DEFAULT_FLOOR_RATIO = 0.03


@dataclass(frozen=True)
class WeightProfile:
    rates: np.ndarray
    weights: np.ndarray

    @property
    def p(self) -> int:
        return self.rates.shape[0]


def build_weight_profile(rates) -> WeightProfile:
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 1 or np.any(~np.isfinite(rates)) or np.any((rates < 0) | (rates > 1)):
        raise ValueError("missing rates must be a vector with entries in [0, 1]")
    weights = np.zeros_like(rates)
    seen = rates < 1
    # a never-observed feature is always masked out, so its weight is irrelevant
    weights[seen] = 1.0 / (1.0 - rates[seen])
    return WeightProfile(rates, weights)


def weight_matrix(mask, profile: WeightProfile) -> np.ndarray:
    """Diagonal of ``W_x`` for one mask (or a row per mask)."""
    return np.asarray(mask, dtype=float) * profile.weights


@dataclass(frozen=True)
class BoundarySpec:
    class_pair: tuple[int, int]
    mask: np.ndarray
    u: np.ndarray
    u0: float
    normalized_u: Optional[np.ndarray]

    @property
    def normalized_defined(self) -> bool:
        return self.normalized_u is not None


@dataclass(frozen=True)
class MomentReport:
    expectation: float
    variance: float
    bias: float
    class_id: int
    mask: np.ndarray


@dataclass(frozen=True)
class WldaModel:
    params: ModelParams
    profile: WeightProfile
    precision: np.ndarray
    weight_scope: str = "train_only"

    @property
    def covariance(self) -> np.ndarray:
        return self.params.covariance

    @property
    def n_classes(self) -> int:
        return self.params.n_classes

    @property
    def p(self) -> int:
        return self.params.p

    def _class_index(self, g: int) -> int:
        if not 1 <= g <= self.n_classes:
            raise ValueError(f"class id must lie in 1..{self.n_classes}, got {g}")
        return g - 1

    def scores(self, X, M) -> np.ndarray:
        """Score matrix (n x G) for rows of ``X`` observed where ``M`` is set."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        M = np.atleast_2d(np.asarray(M, dtype=bool))
        W = weight_matrix(M, self.profile)
        out = np.empty((X.shape[0], self.n_classes))
        for g in range(self.n_classes):
            v = W * np.where(M, X - self.params.means[g], 0.0)
            out[:, g] = self.params.priors[g] - 0.5 * np.einsum("ij,jk,ik->i", v, self.precision, v)
        return out

    def score(self, x, mask, g: int) -> float:
        gi = self._class_index(g)
        return float(self.scores(x, mask)[0, gi])

    def predict_batch(self, X, M) -> np.ndarray:
        # argmax returns the first maximum: ties go to the smallest class id
        return np.argmax(self.scores(X, M), axis=1) + 1

    def predict(self, x, mask) -> int:
        return int(self.predict_batch(x, mask)[0])

    def predict_dataset(self, data: MaskedDataset) -> np.ndarray:
        return self.predict_batch(data.values, data.mask)

    def quadratic_matrix(self, mask) -> np.ndarray:
        d = weight_matrix(mask, self.profile)
        return d[:, None] * self.precision * d[None, :]

    def boundary(self, g: int, h: int, mask) -> BoundarySpec:
        if g == h:
            raise ValueError("a boundary needs two distinct classes")
        gi, hi = self._class_index(g), self._class_index(h)
        mask = np.asarray(mask, dtype=bool)
        P = self.quadratic_matrix(mask)
        mu_g, mu_h = self.params.means[gi], self.params.means[hi]
        u = P @ (mu_g - mu_h)
        u0 = 0.5 * (mu_h @ P @ mu_h - mu_g @ P @ mu_g) + (self.params.priors[gi] - self.params.priors[hi])
        normalized = u / u0 if abs(u0) > 1e-12 else None
        return BoundarySpec((g, h), mask, u, float(u0), normalized)

    def to_dict(self) -> dict:
        return {
            "schema": "wlda-model/1",
            "params": self.params.to_dict(),
            "profile": {"rates": self.profile.rates.tolist(), "weights": self.profile.weights.tolist()},
            "weight_scope": self.weight_scope,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "WldaModel":
        params = ModelParams.from_dict(d["params"])
        return from_params(params, build_weight_profile(d["profile"]["rates"]), d.get("weight_scope", "train_only"), None)

    @classmethod
    def from_json(cls, text: str) -> "WldaModel":
        return cls.from_dict(json.loads(text))


def from_params(
    params: ModelParams,
    profile: WeightProfile,
    weight_scope: str = "train_only",
    floor_ratio: Optional[float] = DEFAULT_FLOOR_RATIO,
) -> WldaModel:
    """Repair the covariance, invert it and bundle everything into a model.

    ``floor_ratio=None`` applies only the minimal positive-definite repair.
    """
    floor = None if floor_ratio is None else conditioning_floor(params.covariance, floor_ratio)
    cov = repair_pd(params.covariance, floor)
    if cov is not params.covariance:
        params = ModelParams(
            params.means, cov, params.priors, params.class_counts,
            params.class_names, params.feature_names, params.warnings,
        )
    precision = np.linalg.inv(cov)
    precision = 0.5 * (precision + precision.T)
    return WldaModel(params, profile, precision, weight_scope)


def fit(
    train: MaskedDataset,
    weight_scope: str = "train_only",
    test_masks: Optional[Sequence[np.ndarray]] = None,
    floor_ratio: Optional[float] = DEFAULT_FLOOR_RATIO,
) -> WldaModel:
    """Estimate parameters on ``train`` and attach the missing-rate weights.

    With ``weight_scope="train_plus_test"`` the rates are pooled over the
    training mask and every mask in ``test_masks``.
    """
    if weight_scope not in WEIGHT_SCOPES:
        raise ValueError(f"weight_scope must be one of {WEIGHT_SCOPES}")
    if train.labels is None:
        raise DatasetError("fitting requires class labels")
    masks = [train.mask]
    if weight_scope == "train_plus_test":
        masks.extend(test_masks or ())
    profile = build_weight_profile(feature_missing_rates(*masks))
    return from_params(fit_params(train), profile, weight_scope, floor_ratio)


def theoretical_moments(profile: WeightProfile, mask, g: int, priors) -> MomentReport:
    """Closed-form expectation, variance and bias of the class-``g`` score.

    These forms take ``trace(W S^-1 W S) = trace(W^2)``, which is exact when
    ``W`` commutes with the class covariance (e.g. diagonal covariance or
    equal weights on a fully observed sample). :func:`exact_moments` gives
    the general values.
    """
    mask = np.asarray(mask, dtype=float)
    if mask.shape != profile.weights.shape:
        raise ValueError("mask and weights must have equal length")
    mw2 = (mask * profile.weights) ** 2
    s2 = float(mw2.sum())
    return MomentReport(
        expectation=float(priors[g - 1]) - 0.5 * s2,
        variance=0.5 * float((mw2**2).sum()),
        bias=0.5 * (mask.size - s2),
        class_id=g,
        mask=mask.astype(bool),
    )


def exact_moments(model: WldaModel, mask, g: int, cov: Optional[np.ndarray] = None) -> tuple[float, float]:
    """Mean and variance of the class-``g`` score for ``x ~ N(mu_g, cov)``."""
    cov = model.covariance if cov is None else np.asarray(cov, dtype=float)
    P = model.quadratic_matrix(mask)
    mean_q, var_q = quadratic_form_moments(P, np.zeros(model.p), cov)
    return float(model.params.priors[g - 1]) - 0.5 * mean_q, 0.25 * var_q


def quadratic_form_moments(A, mean, cov) -> tuple[float, float]:
    """Mean and variance of ``x^T A x`` for Gaussian ``x``."""
    A = np.asarray(A, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if A.shape != cov.shape or A.shape[0] != mean.shape[0]:
        raise ValueError("shape mismatch")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12):
        raise ValueError("A must be symmetric")
    AS = A @ cov
    expectation = mean @ A @ mean + np.trace(AS)
    variance = 4.0 * mean @ AS @ A @ mean + 2.0 * np.trace(AS @ AS)
    return float(expectation), float(variance)
