"""Variable screening: importance scores, subset selection and quality measures."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, holp, ridge_dual
from .errors import InsufficientPositiveScores, ZeroVarianceResponse


class ScoreSource(str, enum.Enum):
    MARGINAL_CORRELATION = "marginal_correlation"
    HOLP = "holp"
    RIDGE_FIXED = "ridge_fixed"
    RIDGE_CV = "ridge_cv"


@dataclass
class ScreeningScores:
    scores: np.ndarray
    source: ScoreSource
    lam: Optional[float] = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("screening scores must be finite and non-negative")

    def __len__(self):
        return self.scores.shape[0]


@dataclass
class ScreeningReport:
    k: int
    precision: float
    recall: float
    sign_ratio: float
    coef_correlation: float


def marginal_correlation_scores(data: Dataset) -> ScreeningScores:
    """Absolute sample correlation of every column with the response."""
    X, y = data.X, data.y
    if X.shape[0] < 3:
        raise ValueError("need at least three observations")
    yc = y - y.mean()
    y_norm = np.sqrt(yc @ yc)
    if y_norm == 0:
        raise ZeroVarianceResponse("response is constant")
    Xc = X - X.mean(axis=0)
    x_norm = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    constant = np.ptp(X, axis=0) == 0
    x_norm[constant] = 1.0
    cor = (Xc.T @ yc) / (x_norm * y_norm)
    cor[constant] = 0.0
    return ScreeningScores(np.minimum(np.abs(cor), 1.0), ScoreSource.MARGINAL_CORRELATION)


def holp_scores(data: Dataset, jitter: float = 0.0) -> ScreeningScores:
    """``|holp(X, y)|`` on the data as given (pass standardized data)."""
    return ScreeningScores(np.abs(holp(data.X, data.y, jitter=jitter)), ScoreSource.HOLP)


def ridge_scores(data: Dataset, lam: float) -> ScreeningScores:
    return ScreeningScores(np.abs(ridge_dual(data.X, data.y, lam)),
                           ScoreSource.RIDGE_FIXED, lam=lam)


def ridge_cv_scores(data: Dataset, lambdas: Sequence[float], rng: np.random.Generator,
                    folds: int = 10) -> ScreeningScores:
    """Ridge scores with the penalty picked by K-fold CV over ``lambdas``."""
    n = data.n
    fold_of = np.empty(n, dtype=int)
    fold_of[rng.permutation(n)] = np.arange(n) % folds
    lambdas = np.asarray(lambdas, dtype=float)
    err = np.zeros(lambdas.size)
    for f in range(folds):
        tr, te = fold_of != f, fold_of == f
        Xtr, ytr = data.X[tr], data.y[tr]
        xm, ym = Xtr.mean(axis=0), ytr.mean()
        for i, lam in enumerate(lambdas):
            b = ridge_dual(Xtr - xm, ytr - ym, lam)
            resid = data.y[te] - ym - (data.X[te] - xm) @ b
            err[i] += resid @ resid
    best = float(lambdas[np.argmin(err)])
    return ScreeningScores(np.abs(ridge_dual(data.X, data.y, best)),
                           ScoreSource.RIDGE_CV, lam=best)


def _as_array(scores) -> np.ndarray:
    return scores.scores if isinstance(scores, ScreeningScores) else np.asarray(scores, float)


def top_k(scores, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, ties going to the lower index.

    Returned in ascending index order.
    """
    s = _as_array(scores)
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k must lie in [1, {s.shape[0]}]")
    order = np.lexsort((np.arange(s.shape[0]), -s))
    return np.sort(order[:k])


def probabilistic_screen(scores, size: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted sampling without replacement, probability proportional to score.

    Uses exponential keys (Efraimidis-Spirakis): item ``j`` gets key
    ``E_j / s_j`` with ``E_j ~ Exp(1)`` (compared on the log scale) and the ``size`` smallest keys win.
    This has the same law as drawing sequentially proportional to score among
    the remaining items. Zero scores are never drawn; if fewer than ``size``
    scores are positive the size is reduced and
    :class:`InsufficientPositiveScores` is warned.
    """
    s = _as_array(scores)
    if size < 1:
        raise ValueError("size must be at least 1")
    positive = np.flatnonzero(s > 0)
    if size > positive.size:
        warnings.warn(
            f"requested {size} variables but only {positive.size} have positive score",
            InsufficientPositiveScores, stacklevel=2)
        size = positive.size
        if size == 0:
            return np.zeros(0, dtype=int)
    # log-space keys stay finite even for subnormal scores
    keys = np.log(rng.standard_exponential(s.shape[0]))
    keys = np.where(s > 0, keys - np.log(np.where(s > 0, s, 1.0)), np.inf)
    chosen = np.argpartition(keys, size - 1)[:size] if size < s.shape[0] else np.arange(s.shape[0])
    return np.sort(chosen)


def screening_report(selected, estimate, truth) -> ScreeningReport:
    """Precision/recall of a selected set plus sign and correlation agreement."""
    selected = np.asarray(selected, dtype=int)
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    k = selected.size
    active = truth != 0
    hits = selected[active[selected]]
    precision = hits.size / k if k else 0.0
    n_active = int(active.sum())
    recall = hits.size / n_active if n_active else 0.0

    if hits.size:
        sign_ratio = float(np.mean(np.sign(estimate[hits]) == np.sign(truth[hits])))
    else:
        sign_ratio = 0.0
    corr = 0.0
    if hits.size >= 2:
        e, t = estimate[hits], truth[hits]
        if np.ptp(e) > 0 and np.ptp(t) > 0:
            corr = float(np.corrcoef(e, t)[0, 1])
    return ScreeningReport(k, precision, recall, sign_ratio, corr)
