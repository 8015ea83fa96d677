"""Random projections (Gaussian, sparse, CW) and their closed-form theory."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import AllZeroValues, DimensionMismatch, InconsistentTau


@dataclass
class CwProjection:
    """Sparse projection ``Phi = B D``: column j goes to goal dimension ``h[j]``
    with weight ``d[j]``. Goal dimensions are 0-based and contiguous.
    """

    h: np.ndarray
    d: np.ndarray
    m: int

    @classmethod
    def from_map(cls, h, d) -> "CwProjection":
        """Build from an arbitrary map, dropping unused goal dimensions.

        Surviving dimensions keep their relative order.
        """
        h = np.asarray(h)
        d = np.asarray(d, dtype=float)
        if h.shape != d.shape:
            raise DimensionMismatch("h and d must have the same length")
        labels, h_new = np.unique(h, return_inverse=True)
        return cls(h_new.astype(np.intp), d.copy(), int(labels.size))

    @property
    def p_cols(self) -> int:
        return self.h.shape[0]

    def bucket_norms(self) -> np.ndarray:
        """Diagonal of ``Phi Phi'``: sum of squared d per goal dimension."""
        return np.bincount(self.h, weights=self.d ** 2, minlength=self.m)

    def to_dense(self) -> np.ndarray:
        M = np.zeros((self.m, self.p_cols))
        M[self.h, np.arange(self.p_cols)] = self.d
        return M

    def to_dict(self) -> dict:
        return {"m": self.m, "h": self.h.tolist(), "d": self.d.tolist()}


@dataclass
class DenseProjection:
    matrix: np.ndarray
    kind: str
    psi: Optional[float] = None

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def p_cols(self) -> int:
        return self.matrix.shape[1]


Projection = Union[CwProjection, DenseProjection]


def gaussian_projection(m: int, p: int, rng: np.random.Generator) -> DenseProjection:
    if not 1 <= m <= p:
        raise ValueError("need 1 <= m <= p")
    return DenseProjection(rng.standard_normal((m, p)), "gaussian")


def sparse_projection(m: int, p: int, psi: float, rng: np.random.Generator) -> DenseProjection:
    """iid entries ``+-1/sqrt(psi)`` with probability ``psi/2`` each, else 0."""
    if not 0 < psi <= 1:
        raise ValueError("psi must lie in (0, 1]")
    if not 1 <= m <= p:
        raise ValueError("need 1 <= m <= p")
    u = rng.random((m, p))
    val = 1.0 / np.sqrt(psi)
    M = np.where(u < psi / 2, val, np.where(u < psi, -val, 0.0))
    return DenseProjection(M, "sparse", psi=psi)


def cw_projection(m_target: int, p: int, diagonal: Union[str, np.ndarray],
                  rng: np.random.Generator, h=None) -> CwProjection:
    """Draw a CW projection.

    Parameters
    ----------
    m_target : int
        Requested goal dimension; empty goal dimensions are discarded so the
        result may have fewer rows.
    p : int
        Number of columns being projected.
    diagonal : "random_sign" or array of length p
        Random +-1 signs, or data-informed values (e.g. HOLP coefficients).
        For values, any goal dimension whose columns are all zero gets its
        lowest-index column set to a random sign times the smallest nonzero
        ``|value|`` so that the projection keeps full row rank.
    rng : numpy.random.Generator
    h : array of int, optional
        Forced goal-dimension map (0-based); drawn uniformly if omitted.
    """
    if not 1 <= m_target <= p:
        raise ValueError("need 1 <= m_target <= p")
    if h is None:
        h = rng.integers(0, m_target, size=p)
    else:
        h = np.asarray(h)
        if h.shape != (p,):
            raise DimensionMismatch("forced h must have length p")

    if isinstance(diagonal, str):
        if diagonal != "random_sign":
            raise ValueError(f"unknown diagonal policy {diagonal!r}")
        d = rng.choice(np.array([-1.0, 1.0]), size=p)
        return CwProjection.from_map(h, d)

    v = np.asarray(diagonal, dtype=float)
    if v.shape != (p,):
        raise DimensionMismatch("diagonal values must have length p")
    nonzero = v != 0
    if not nonzero.any():
        raise AllZeroValues("all diagonal values are zero")
    proj = CwProjection.from_map(h, v)
    covered = np.bincount(proj.h, weights=nonzero.astype(float), minlength=proj.m) > 0
    empty = np.flatnonzero(~covered)
    if empty.size:
        floor = np.abs(v[nonzero]).min()
        signs = rng.choice(np.array([-1.0, 1.0]), size=empty.size)
        # lowest column index in each bucket
        first = np.full(proj.m, p, dtype=np.intp)
        np.minimum.at(first, proj.h, np.arange(p))
        proj.d[first[empty]] = signs * floor
    return proj


def apply_projection(proj: Projection, X) -> np.ndarray:
    """Reduced predictors ``Z = X Phi'``.

    For a CW projection this is a signed bucket sum over columns, O(n p),
    without forming ``Phi``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != proj.p_cols:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, projection expects {proj.p_cols}")
    if isinstance(proj, DenseProjection):
        return X @ proj.matrix.T
    order = np.argsort(proj.h, kind="stable")
    starts = np.searchsorted(proj.h[order], np.arange(proj.m))
    Xd = X[:, order] * proj.d[order]
    return np.add.reduceat(Xd, starts, axis=1)


def project_coefficient(proj: CwProjection, beta) -> np.ndarray:
    """Orthogonal projection of ``beta`` onto the row span of ``Phi``.

    Bucket-wise: ``d_j * sum_k d_k beta_k / sum_k d_k^2`` over the goal
    dimension of ``j``.
    """
    beta = np.asarray(beta, dtype=float)
    num = np.bincount(proj.h, weights=proj.d * beta, minlength=proj.m)
    den = proj.bucket_norms()
    return proj.d * (num / den)[proj.h]


def theorem1_bound(beta, lambda_min: float, m: int, p: int, a: int, tau: float) -> float:
    """Lower bound on the MSPE gap between random-sign and oracle CW projections.

    ``|beta|^2 lam (1 - 2m/p) + a/(p-1) m lam tau^2 (1 - (m+1)/(p-1))``, with
    the O(p^-2) remainder dropped. May be negative for large ``m/p``.
    """
    beta = np.asarray(beta, dtype=float)
    nz = np.abs(beta[beta != 0])
    if nz.size == 0 or abs(nz.min() - tau) > 1e-12:
        raise InconsistentTau(f"tau={tau} is not the smallest nonzero |beta_j|")
    if not m < p:
        raise ValueError("need m < p")
    first = (beta @ beta) * lambda_min * (1 - 2 * m / p)
    second = a / (p - 1) * m * lambda_min * tau ** 2 * (1 - (m + 1) / (p - 1))
    return float(first + second)


def inverse_preimage_moments(p: int, m: int) -> tuple[float, float]:
    """``E[1/N]`` (exact) and ``E[1/N^2]`` (to O(p^-3)) for ``N = 1 + Binom(p-1, 1/m)``."""
    if not (1 <= m <= p and p >= 2):
        raise ValueError("need 1 <= m <= p and p >= 2")
    first = (m / p) * (1 - ((m - 1) / m) ** p)
    second = m ** 2 / (p - 1) ** 2 + (m - 3) * m ** 2 / (p - 1) ** 3
    return first, second


def active_ratio_moments(p: int, m: int, a: int, j_active: bool) -> tuple[float, float]:
    """Moments of ``|A ∩ h^-1(h_j) \\ {j}| / |h^-1(h_j)|`` and the same over the squared size.

    The first is exact; the second drops an O(p^-3) term inside the bracket.
    """
    if not 1 <= a < p:
        raise ValueError("need 1 <= a < p")
    aj = a - int(bool(j_active))
    shrink = 1 - (m / p) * (1 - ((m - 1) / m) ** p)
    first = aj / (p - 1) * shrink
    second = m * aj / (p - 1) * (1 / (p - 1) - (m + 1) / (p - 1) ** 2)
    return first, second
