"""Shared linear-algebra and data-preparation primitives.

Everything here works in whatever units it is handed; the estimator keeps
all coefficients in standardized units until the final back-transform.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import (
    DimensionMismatch,
    SingularGram,
    SingularSystem,
    ZeroVarianceResponse,
)

_EPS = np.finfo(float).eps


@dataclass
class Truth:
    """Ground truth attached to simulated data."""

    beta: np.ndarray
    mu: float = 0.0
    sigma2: float = 0.0

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    truth: Optional[Truth] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"X has {self.X.shape[0]} rows but y has length {self.y.shape[0]}")
        if self.truth is not None and self.truth.beta.shape[0] != self.X.shape[1]:
            raise DimensionMismatch("truth.beta length differs from number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return replace(self, X=self.X[rows], y=self.y[rows])


@dataclass
class Standardization:
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: float
    y_scale: float
    constant_columns: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def transform_X(self, X):
        Z = (np.asarray(X, dtype=float) - self.x_center) / self.x_scale
        if self.constant_columns.size:
            Z[:, self.constant_columns] = 0.0
        return Z

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_center) / self.y_scale

    def inverse_X(self, Z):
        return np.asarray(Z) * self.x_scale + self.x_center

    def inverse_y(self, y_std):
        return np.asarray(y_std) * self.y_scale + self.y_center

    def to_dict(self) -> dict:
        return {
            "x_center": self.x_center.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_center": float(self.y_center),
            "y_scale": float(self.y_scale),
            "constant_columns": self.constant_columns.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(
            x_center=np.asarray(d["x_center"], dtype=float),
            x_scale=np.asarray(d["x_scale"], dtype=float),
            y_center=float(d["y_center"]),
            y_scale=float(d["y_scale"]),
            constant_columns=np.asarray(d["constant_columns"], dtype=int),
        )


def standardize(data: Dataset) -> tuple[Dataset, Standardization]:
    """Center and scale predictors and response (sample sd, divisor n-1).

    Constant columns are mapped to all-zero columns and recorded in
    ``constant_columns`` with a scale of 1.
    """
    X, y = data.X, data.y
    n = X.shape[0]
    if n < 2:
        raise ValueError("standardize needs at least two observations")
    y_sd = float(np.std(y, ddof=1))
    if not y_sd > 0.0:
        raise ZeroVarianceResponse("response has zero sample variance")

    x_center = X.mean(axis=0)
    constant = np.flatnonzero(np.ptp(X, axis=0) == 0)
    x_scale = X.std(axis=0, ddof=1)
    x_scale[constant] = 1.0

    std = Standardization(x_center, x_scale, float(y.mean()), y_sd, constant)
    out = replace(data, X=std.transform_X(X), y=std.transform_y(y))
    return out, std


def _equilibrated_cholesky(A):
    """Cholesky of the unit-diagonal rescaling of A, or None if not SPD."""
    d = np.diag(A)
    if not np.all(np.isfinite(A)) or np.any(d <= 0):
        return None
    s = np.sqrt(d)
    As = A / s[:, None] / s[None, :]
    try:
        c, lower = linalg.cho_factor(As, lower=False, check_finite=False)
    except linalg.LinAlgError:
        return None
    anorm = np.abs(As).sum(axis=0).max()
    rcond, info = lapack.dpocon(c, anorm)
    if info != 0 or rcond < A.shape[0] * _EPS:
        return None
    return c, lower, s


def spd_solve(A, b, jitter: float = 0.0):
    """Solve ``A x = b`` for a symmetric positive semi-definite ``A``.

    With ``jitter > 0`` the system ``(A + jitter*I) x = b`` is solved directly.
    With ``jitter == 0`` an exact factorization is tried first, then a
    retry with ``1e-10 * trace(A) / n`` on the diagonal; if both fail
    :class:`SingularGram` is raised so the caller can supply a jitter.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if jitter > 0:
        ladder = [jitter]
    else:
        ladder = [0.0, 1e-10 * np.trace(A) / n]
    for lam in ladder:
        M = A + lam * np.eye(n) if lam > 0 else A
        fac = _equilibrated_cholesky(M)
        if fac is None:
            continue
        c, lower, s = fac
        rhs = b / s if b.ndim == 1 else b / s[:, None]
        x = linalg.cho_solve((c, lower), rhs, check_finite=False)
        return x / s if b.ndim == 1 else x / s[:, None]
    raise SingularGram(f"{n}x{n} Gram matrix is numerically singular")


def _check_rows(X, y):
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X is {X.shape}, y is {y.shape}")


def ridge_dual(X, y, lam: float):
    """Ridge coefficient via the n x n dual system: ``X' (lam I + X X')^{-1} y``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_rows(X, y)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise SingularSystem("non-finite input to ridge_dual")
    try:
        alpha = spd_solve(X @ X.T, y, jitter=lam)
    except SingularGram as exc:
        raise SingularSystem(str(exc)) from exc
    return X.T @ alpha


def holp(X, y, jitter: float = 0.0):
    """Minimum-norm interpolant ``X' (X X')^{-1} y``.

    A positive ``jitter`` turns this into the dual ridge form with penalty
    ``jitter``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_rows(X, y)
    alpha = spd_solve(X @ X.T, y, jitter=jitter)
    return X.T @ alpha


def ols_reduced(Z, y, jitter: float = 0.0):
    """Least squares ``(Z'Z)^{-1} Z'y`` in a reduced space (m < n)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    y = np.asarray(y, dtype=float)
    _check_rows(Z, y)
    return spd_solve(Z.T @ Z, Z.T @ y, jitter=jitter)
