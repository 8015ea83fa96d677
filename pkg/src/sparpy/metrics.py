"""Prediction and variable-selection error measures."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateDenominator, DimensionMismatch


@dataclass
class EvalResult:
    rmspe: float
    mspe: float
    precision: float
    recall: float
    f1: float
    num_active: int
    runtime_seconds: float = float("nan")

    def to_dict(self):
        return asdict(self)


def mspe(y_hat, y_test) -> float:
    y_hat, y_test = np.asarray(y_hat, float), np.asarray(y_test, float)
    if y_hat.shape != y_test.shape:
        raise DimensionMismatch("prediction and test vectors differ in length")
    return float(np.mean((y_hat - y_test) ** 2))


def rmspe(y_hat, y_test, y_bar_train: float) -> float:
    """Squared prediction error relative to predicting the training mean.

    The naive zero-coefficient model scores exactly 1.
    """
    y_hat, y_test = np.asarray(y_hat, float), np.asarray(y_test, float)
    if y_hat.shape != y_test.shape:
        raise DimensionMismatch("prediction and test vectors differ in length")
    denom = float(np.sum((y_test - y_bar_train) ** 2))
    if denom <= 0:
        raise DegenerateDenominator("test responses all equal the training mean")
    return float(np.sum((y_hat - y_test) ** 2)) / denom


def f1_score(precision: float, recall: float) -> float:
    if precision > 0 and recall > 0:
        return 2 * precision * recall / (precision + recall)
    return 0.0


def selection_scores(beta_hat, beta_true) -> tuple[float, float, float, int]:
    """(precision, recall, F1, number of nonzero estimates).

    Precision is 0 for an all-zero estimate.
    """
    est = np.asarray(beta_hat) != 0
    act = np.asarray(beta_true) != 0
    if est.shape != act.shape:
        raise DimensionMismatch("coefficient vectors differ in length")
    if not act.any():
        raise ValueError("beta_true has no active entries")
    tp = int(np.sum(est & act))
    k = int(est.sum())
    precision = tp / k if k else 0.0
    recall = tp / int(act.sum())
    return precision, recall, f1_score(precision, recall), k


def evaluate(y_hat, y_test, y_bar_train, beta_hat=None, beta_true=None,
             runtime_seconds: float = float("nan")) -> EvalResult:
    if beta_hat is not None and beta_true is not None:
        prec, rec, f1, k = selection_scores(beta_hat, beta_true)
    else:
        prec = rec = f1 = float("nan")
        k = int(np.count_nonzero(beta_hat)) if beta_hat is not None else -1
    return EvalResult(rmspe(y_hat, y_test, y_bar_train), mspe(y_hat, y_test),
                      prec, rec, f1, k, runtime_seconds)
