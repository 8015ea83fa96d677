"""Sparse Projected Averaged Regression.

An ensemble of small least-squares models, each fitted on a HOLP-weighted
random subset of the predictors compressed by a data-informed CW projection.
Per-model coefficients are hard-thresholded and averaged; the number of
models and the threshold are picked by K-fold cross-validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import Dataset, Standardization, holp, ols_reduced, standardize
from .errors import (
    DegenerateReducedFit,
    DimensionMismatch,
    FoldTooSmall,
    SingularGram,
)
from .projection import CwProjection, apply_projection, cw_projection
from .screening import probabilistic_screen, top_k

FORMAT_NAME = "sparpy-model"
FORMAT_VERSION = 1

SeedLike = Union[None, int, np.random.SeedSequence]


@dataclass
class SparConfig:
    """Estimator settings.

    ``m_lower``/``m_upper`` override the goal-dimension range, which
    otherwise runs from ``ceil(log p)`` to ``floor(n/2)`` clamped so that the
    reduced fit stays solvable on every CV training split. With
    ``screening=False`` every predictor enters the projection (projection-only
    ensemble). With ``select_models=False`` the ensemble size is fixed at
    ``max_models`` and CV only picks the threshold.
    """

    max_models: int = 20
    screen_factor: float = 2.0
    m_lower: Optional[int] = None
    m_upper: Optional[int] = None
    threshold_grid_size: int = 20
    folds: int = 10
    rule: str = "best"
    seed: SeedLike = 0
    screening: bool = True
    select_models: bool = True
    holp_jitter: Optional[float] = None
    ols_jitter: float = 0.01

    def __post_init__(self):
        if self.max_models < 1:
            raise ValueError("max_models must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.rule not in ("best", "1se"):
            raise ValueError("rule must be 'best' or '1se'")
        if self.threshold_grid_size < 1:
            raise ValueError("threshold_grid_size must be >= 1")

    def screen_size(self, n: int, p: int, n_positive: int) -> int:
        if not self.screening:
            return p
        return max(1, min(math.ceil(self.screen_factor * n), p - 1, n_positive))

    def m_range(self, n: int, p: int, n_screen: int) -> tuple[int, int]:
        lower = self.m_lower if self.m_lower is not None else max(1, math.ceil(math.log(p)))
        fold_size = math.ceil(n / self.folds)
        cap = min(n // 2, n_screen, n - fold_size - 1)
        if self.m_upper is not None:
            cap = min(cap, self.m_upper)
        return lower, max(lower, cap)


@dataclass
class MarginalModel:
    index_set: np.ndarray
    projection: CwProjection
    gamma: np.ndarray
    beta: np.ndarray
    m_target: int

    def refit(self, X, y, jitter: float = 0.01) -> tuple[np.ndarray, np.ndarray, float]:
        """Refit only the reduced coefficients on ``(X, y)`` with centering.

        Returns the coefficient on ``index_set``, the column means of
        ``X[:, index_set]`` and the mean of ``y``.
        """
        Xi = X[:, self.index_set]
        xm, ym = Xi.mean(axis=0), float(y.mean())
        Z = apply_projection(self.projection, Xi - xm)
        gamma = _reduced_fit(Z, y - ym, jitter)
        return self.projection.d * gamma[self.projection.h], xm, ym


def _reduced_fit(Z, y, jitter):
    try:
        return ols_reduced(Z, y)
    except SingularGram:
        return ols_reduced(Z, y, jitter=jitter)


def threshold(beta, lam: float) -> np.ndarray:
    """Hard threshold: entries with ``|beta| < lam`` become 0 (ties survive)."""
    beta = np.asarray(beta, dtype=float)
    return np.where(np.abs(beta) < lam, 0.0, beta)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def fit_marginal(data_std: Dataset, weights, config: SparConfig,
                 rng: np.random.Generator, k: int = 0,
                 deterministic: bool = False) -> MarginalModel:
    """Fit one screened + projected least-squares model on standardized data.

    ``weights`` are the signed HOLP coefficients; their absolute values drive
    the screening and their signed values become the projection diagonal.
    """
    X, y = data_std.X, data_std.y
    n, p = X.shape
    w = np.asarray(weights, dtype=float)
    scores = np.abs(w)
    n_screen = config.screen_size(n, p, int(np.count_nonzero(scores)))
    if not config.screening:
        idx = np.arange(p)
    elif deterministic:
        idx = top_k(scores, n_screen)
    else:
        idx = probabilistic_screen(scores, n_screen, rng)

    lo, hi = config.m_range(n, p, idx.size)
    m_k = int(rng.integers(lo, hi + 1))
    if m_k >= n:
        raise DegenerateReducedFit(f"goal dimension {m_k} >= n={n}")
    proj = cw_projection(min(m_k, idx.size), idx.size, w[idx], rng)
    Z = apply_projection(proj, X[:, idx])
    gamma = _reduced_fit(Z, y, config.ols_jitter)
    beta = np.zeros(p)
    beta[idx] = proj.d * gamma[proj.h]
    return MarginalModel(idx, proj, gamma, beta, m_k)


@dataclass
class Ensemble:
    data_std: Dataset
    standardization: Standardization
    holp_weights: np.ndarray
    models: list


def fit_ensemble(data: Dataset, config: SparConfig) -> Ensemble:
    """Standardize, compute HOLP weights and fit ``max_models`` marginal models.

    Model ``k`` draws from its own child of the seed sequence, so the
    first ``M`` models are identical for any ``max_models >= M`` (except
    for the deterministic single-model path).
    """
    data_std, std = standardize(data)
    n, p = data_std.X.shape
    try:
        w = holp(data_std.X, data_std.y)
    except SingularGram:
        lam = config.holp_jitter if config.holp_jitter is not None else math.sqrt(n) + math.sqrt(p)
        w = holp(data_std.X, data_std.y, jitter=lam)
    children = _seed_children(config.seed, config.max_models + 1)
    deterministic = config.max_models == 1
    models = [
        fit_marginal(data_std, w, config, _rng(children[k + 1]), k=k, deterministic=deterministic)
        for k in range(config.max_models)
    ]
    return Ensemble(data_std, std, w, models)


def _seed_children(seed, count):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(count) if count else []


def threshold_grid(models, size: int) -> np.ndarray:
    """``{0}`` plus the ``i/(size-1)`` quantiles of pooled nonzero ``|beta_j^k|``."""
    pooled = np.concatenate([np.abs(mdl.beta[mdl.index_set]) for mdl in models])
    pooled = pooled[pooled > 0]
    if size == 1 or pooled.size == 0:
        return np.zeros(1)
    q = np.arange(1, size) / (size - 1)
    # repeated quantiles (few distinct magnitudes) collapse to one grid point
    return np.unique(np.concatenate([[0.0], np.quantile(pooled, q)]))


def _prefix_supports(models, p, lambdas):
    """num_active[M-1, g] = size of the union of supports after thresholding."""
    out = np.zeros((len(models), lambdas.size), dtype=int)
    union = np.zeros((lambdas.size, p), dtype=bool)
    for k, mdl in enumerate(models):
        b = np.abs(mdl.beta[mdl.index_set])
        union[:, mdl.index_set] |= (b[None, :] >= lambdas[:, None]) & (b[None, :] > 0)
        out[k] = union.sum(axis=1)
    return out


def _fold_assignment(n, folds, rng):
    fold_of = np.empty(n, dtype=int)
    fold_of[rng.permutation(n)] = np.arange(n) % folds
    return fold_of


def _fold_errors(ens: Ensemble, train, test, lambdas, jitter):
    """Mean squared test error for every (M, lambda) on one split."""
    X, y = ens.data_std.X, ens.data_std.y
    Xtr, ytr, Xte, yte = X[train], y[train], X[test], y[test]
    cum = np.zeros((Xte.shape[0], lambdas.size))
    mse = np.zeros((len(ens.models), lambdas.size))
    ybar = float(ytr.mean())
    for k, mdl in enumerate(ens.models):
        b, xm, _ = mdl.refit(Xtr, ytr, jitter)
        keep = np.abs(b)[:, None] >= lambdas[None, :]
        B = b[:, None] * keep
        # intercept after thresholding: ybar - xbar' b_thresh
        cum += (Xte[:, mdl.index_set] - xm) @ B
        resid = yte[:, None] - ybar - cum / (k + 1)
        mse[k] = np.mean(resid ** 2, axis=0)
    return mse


@dataclass
class SparModel:
    standardization: Standardization
    chosen_M: int
    chosen_lambda: float
    coefficients_std: np.ndarray
    coefficients_orig: np.ndarray
    intercept: float
    lambdas: np.ndarray
    cv_mse: np.ndarray
    cv_se: np.ndarray
    num_active: np.ndarray
    rule: str = "best"
    best: tuple = (1, 0.0)
    one_se: tuple = (1, 0.0)
    models: list = field(default_factory=list)
    holp_weights: Optional[np.ndarray] = None

    @property
    def p(self) -> int:
        return self.coefficients_orig.shape[0]

    def coef_std_at(self, M: int, lam: float) -> np.ndarray:
        if not self.models:
            raise ValueError("model was loaded without its ensemble")
        acc = np.zeros(self.p)
        for mdl in self.models[:M]:
            acc += threshold(mdl.beta, lam)
        return acc / M

    def cv_table(self) -> list[dict]:
        rows = []
        for i in range(self.cv_mse.shape[0]):
            for g, lam in enumerate(self.lambdas):
                rows.append({
                    "M": i + 1,
                    "lambda": float(lam),
                    "mse": float(self.cv_mse[i, g]),
                    "mse_se": float(self.cv_se[i, g]),
                    "num_active": int(self.num_active[i, g]),
                })
        return rows

    def predict(self, X_new) -> np.ndarray:
        return predict(self, X_new)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "rule": self.rule,
            "chosen_M": int(self.chosen_M),
            "chosen_lambda": float(self.chosen_lambda),
            "best": [int(self.best[0]), float(self.best[1])],
            "one_se": [int(self.one_se[0]), float(self.one_se[1])],
            "intercept": float(self.intercept),
            "coefficients": self.coefficients_orig.tolist(),
            "coefficients_std": self.coefficients_std.tolist(),
            "standardization": self.standardization.to_dict(),
            "cv_table": self.cv_table(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SparModel":
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a sparpy model document")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        table = d["cv_table"]
        n_M = max((r["M"] for r in table), default=0)
        lambdas = np.array(sorted({r["lambda"] for r in table}))
        shape = (n_M, lambdas.size)
        mse, se, act = np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=int)
        for r in table:
            g = int(np.searchsorted(lambdas, r["lambda"]))
            mse[r["M"] - 1, g] = r["mse"]
            se[r["M"] - 1, g] = r["mse_se"]
            act[r["M"] - 1, g] = r["num_active"]
        return cls(
            standardization=Standardization.from_dict(d["standardization"]),
            chosen_M=int(d["chosen_M"]),
            chosen_lambda=float(d["chosen_lambda"]),
            coefficients_std=np.asarray(d["coefficients_std"], dtype=float),
            coefficients_orig=np.asarray(d["coefficients"], dtype=float),
            intercept=float(d["intercept"]),
            lambdas=lambdas, cv_mse=mse, cv_se=se, num_active=act,
            rule=d["rule"], best=tuple(d["best"]), one_se=tuple(d["one_se"]),
        )


def _select(mse_mean, mse_se, num_active, lambdas, select_models):
    """Return ((M_best, g_best), (M_1se, g_1se)) as 0-based grid indices."""
    rows = range(mse_mean.shape[0]) if select_models else [mse_mean.shape[0] - 1]
    cand = [(mse_mean[i, g], i, -g) for i in rows for g in range(lambdas.size)]
    best_mse, ib, neg_gb = min(cand)
    gb = -neg_gb
    limit = best_mse + mse_se[ib, gb]
    within = [(num_active[i, g], mse_mean[i, g], i, g)
              for i in rows for g in range(lambdas.size) if mse_mean[i, g] <= limit]
    _, _, i1, g1 = min(within)
    return (ib, gb), (i1, g1)


def back_transform(coef_std, std: Standardization) -> tuple[np.ndarray, float]:
    coef = coef_std * (std.y_scale / std.x_scale)
    coef[std.constant_columns] = 0.0
    intercept = std.y_center - std.x_center @ coef
    return coef, float(intercept)


def cross_validate(data: Dataset, config: Optional[SparConfig] = None) -> SparModel:
    """Fit SPAR and choose ``(M, lambda)`` by K-fold cross-validation.

    The ensemble (index sets and projections) is drawn once on the full
    standardized data; each fold refits only the reduced coefficients.
    """
    config = config or SparConfig()
    n = data.n
    if n < 2 * config.folds:
        raise FoldTooSmall(f"n={n} is too small for {config.folds} folds")
    ens = fit_ensemble(data, config)
    p = ens.data_std.p
    lambdas = threshold_grid(ens.models, config.threshold_grid_size)
    num_active = _prefix_supports(ens.models, p, lambdas)

    fold_rng = _rng(_seed_children(config.seed, config.max_models + 1)[0])
    fold_of = _fold_assignment(n, config.folds, fold_rng)
    per_fold = np.stack([
        _fold_errors(ens, fold_of != f, fold_of == f, lambdas, config.ols_jitter)
        for f in range(config.folds)
    ])
    mse_mean = per_fold.mean(axis=0)
    mse_se = per_fold.std(axis=0, ddof=1) / math.sqrt(config.folds)

    (ib, gb), (i1, g1) = _select(mse_mean, mse_se, num_active, lambdas, config.select_models)
    best = (ib + 1, float(lambdas[gb]))
    one_se = (i1 + 1, float(lambdas[g1]))
    M, lam = best if config.rule == "best" else one_se

    model = SparModel(
        standardization=ens.standardization, chosen_M=M, chosen_lambda=lam,
        coefficients_std=np.zeros(p), coefficients_orig=np.zeros(p), intercept=0.0,
        lambdas=lambdas, cv_mse=mse_mean, cv_se=mse_se, num_active=num_active,
        rule=config.rule, best=best, one_se=one_se, models=ens.models,
        holp_weights=ens.holp_weights,
    )
    model.coefficients_std = model.coef_std_at(M, lam)
    model.coefficients_orig, model.intercept = back_transform(
        model.coefficients_std, ens.standardization)
    return model


def predict(model: SparModel, X_new) -> np.ndarray:
    """``intercept + X_new @ coefficients`` on the original scale."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    if X_new.shape[1] != model.p:
        raise DimensionMismatch(f"expected {model.p} columns, got {X_new.shape[1]}")
    return model.intercept + X_new @ model.coefficients_orig
