"""Synthetic regression data with structured predictor covariances.

Settings
--------
1 independent      Sigma = I
2 compound         Sigma = rho 11' + (1 - rho) I            (rho = 0.5)
3 ar               Sigma_ij = rho^|i-j|                      (rho = 0.9)
4 group            block diagonal, blocks of 100: compound(0.5) for the
                   first half, ar(0.9) for the rest, identity last block
5 factor           Sigma = F F' + 0.01 I, F p x k standard normal, k = a
6 extreme          latent construction where inactive predictors are more
                   correlated with y than active ones
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, signal

from .core import Dataset, Truth
from .errors import NonPositiveDefinite

SETTINGS = ("independent", "compound", "ar", "group", "factor", "extreme")
REGIMES = ("sparse", "medium", "dense", "example_one")
_DEFAULT_RHO = {"compound": 0.5, "ar": 0.9}
_MAX_DENSE_P = 2000


@dataclass
class CovarianceSpec:
    kind: str
    p: int
    rho: float = 0.0
    block_size: int = 100
    loadings: Optional[np.ndarray] = None   # factor setting: p x k
    n_active: int = 0                       # extreme setting

    def __post_init__(self):
        if self.kind not in SETTINGS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind in ("compound", "ar"):
            if not -1 < self.rho < 1:
                raise NonPositiveDefinite(f"rho={self.rho} outside (-1, 1)")
            if self.kind == "compound" and self.p > 1 and self.rho <= -1 / (self.p - 1):
                raise NonPositiveDefinite(f"compound symmetry with rho={self.rho} is not PD")
        if self.kind == "factor" and (self.loadings is None or self.loadings.shape[0] != self.p):
            raise ValueError("factor setting needs a p x k loadings matrix")
        if self.kind == "extreme" and not 1 <= self.n_active < self.p:
            raise ValueError("extreme setting needs 1 <= n_active < p")

    @classmethod
    def make(cls, kind: str, p: int, rng: Optional[np.random.Generator] = None,
             rho: Optional[float] = None, a: int = 0) -> "CovarianceSpec":
        """Build a spec with the default parameters for ``kind``.

        The factor setting draws its loadings from ``rng`` with ``k = a``.
        """
        if kind == "factor":
            if rng is None or a < 1:
                raise ValueError("factor setting needs rng and a >= 1")
            return cls(kind, p, loadings=rng.standard_normal((p, a)))
        if kind == "extreme":
            return cls(kind, p, n_active=a)
        r = _DEFAULT_RHO.get(kind, 0.0) if rho is None else rho
        return cls(kind, p, rho=r)

    def blocks(self) -> list[tuple[str, int, int]]:
        """Group setting layout as (kind, start, stop) triples."""
        nb = max(1, self.p // self.block_size)
        bounds = [(b * self.block_size, (b + 1) * self.block_size) for b in range(nb)]
        bounds[-1] = (bounds[-1][0], self.p)
        half = nb // 2
        out = []
        for b, (lo, hi) in enumerate(bounds):
            if b == nb - 1:
                kind = "independent"
            elif b < half:
                kind = "compound"
            else:
                kind = "ar"
            out.append((kind, lo, hi))
        return out

    @property
    def partial_last_block(self) -> bool:
        return self.kind == "group" and self.p % self.block_size != 0

    def dense(self) -> np.ndarray:
        """Materialize Sigma (only for p <= 2000)."""
        p = self.p
        if p > _MAX_DENSE_P:
            raise ValueError("refusing to materialize Sigma for p > 2000")
        if self.kind == "independent":
            return np.eye(p)
        if self.kind == "compound":
            return self.rho * np.ones((p, p)) + (1 - self.rho) * np.eye(p)
        if self.kind == "ar":
            return linalg.toeplitz(self.rho ** np.arange(p))
        if self.kind == "group":
            S = np.zeros((p, p))
            for kind, lo, hi in self.blocks():
                sub = CovarianceSpec(kind, hi - lo, rho=_DEFAULT_RHO.get(kind, 0.0))
                S[lo:hi, lo:hi] = sub.dense()
            return S
        if self.kind == "factor":
            F = self.loadings
            return F @ F.T + 0.01 * np.eye(p)
        a = self.n_active
        S = np.full((p, p), a / (a + 1))
        S[:a, :] = S[:, :a] = 1 / math.sqrt(2 * (a + 1))
        S[:a, :a] = 0.0
        np.fill_diagonal(S, 1.0)
        return S

    @property
    def min_eigenvalue(self) -> float:
        if self.kind == "independent":
            return 1.0
        if self.kind == "compound":
            return min(1 - self.rho, 1 - self.rho + self.p * self.rho)
        return float(linalg.eigvalsh(self.dense(), subset_by_index=[0, 0])[0])


def _compound(n, p, rho, rng):
    Z = rng.standard_normal((n, p))
    if rho >= 0:
        common = rng.standard_normal((n, 1))
        return math.sqrt(rho) * common + math.sqrt(1 - rho) * Z
    L = linalg.cholesky(CovarianceSpec("compound", p, rho=rho).dense(), lower=True)
    return Z @ L.T


def _ar(n, p, rho, rng):
    Z = rng.standard_normal((n, p))
    s = math.sqrt(1 - rho ** 2)
    Z[:, 0] /= s
    return signal.lfilter([s], [1.0, -rho], Z, axis=1)


def sample_predictors(spec: CovarianceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows from N(0, Sigma) using a structural factor of Sigma."""
    p = spec.p
    if spec.kind == "independent":
        return rng.standard_normal((n, p))
    if spec.kind == "compound":
        return _compound(n, p, spec.rho, rng)
    if spec.kind == "ar":
        return _ar(n, p, spec.rho, rng)
    if spec.kind == "group":
        X = np.empty((n, p))
        for kind, lo, hi in spec.blocks():
            if kind == "compound":
                X[:, lo:hi] = _compound(n, hi - lo, 0.5, rng)
            elif kind == "ar":
                X[:, lo:hi] = _ar(n, hi - lo, 0.9, rng)
            else:
                X[:, lo:hi] = rng.standard_normal((n, hi - lo))
        return X
    if spec.kind == "factor":
        F = spec.loadings
        U = rng.standard_normal((n, F.shape[1]))
        return U @ F.T + 0.1 * rng.standard_normal((n, p))
    a = spec.n_active
    Z = rng.standard_normal((n, p))
    W = rng.standard_normal((n, a))
    X = np.empty((n, p))
    X[:, :a] = (Z[:, :a] + W) / math.sqrt(2)
    X[:, a:] = (Z[:, a:] + Z[:, :a].sum(axis=1, keepdims=True)) / math.sqrt(a + 1)
    return X


def _cs_form(beta, rho):
    return rho * beta.sum() ** 2 + (1 - rho) * (beta @ beta)


def _ar_form(beta, rho):
    # beta' T beta for T_ij = rho^|i-j| via the recursion of the AR filter
    s = signal.lfilter([1.0], [1.0, -rho], beta)   # s_j = sum_{k<=j} rho^(j-k) beta_k
    return float(2 * (beta @ s) - beta @ beta)


def quadratic_form(spec: CovarianceSpec, beta) -> float:
    """``beta' Sigma beta`` without materializing Sigma."""
    beta = np.asarray(beta, dtype=float)
    if spec.kind == "independent":
        return float(beta @ beta)
    if spec.kind == "compound":
        return float(_cs_form(beta, spec.rho))
    if spec.kind == "ar":
        return _ar_form(beta, spec.rho)
    if spec.kind == "group":
        total = 0.0
        for kind, lo, hi in spec.blocks():
            b = beta[lo:hi]
            if kind == "compound":
                total += _cs_form(b, 0.5)
            elif kind == "ar":
                total += _ar_form(b, 0.9)
            else:
                total += b @ b
        return float(total)
    if spec.kind == "factor":
        Fb = spec.loadings.T @ beta
        return float(Fb @ Fb + 0.01 * (beta @ beta))
    a = spec.n_active
    ba, bi = beta[:a], beta[a:]
    inactive = (bi @ bi) / (a + 1) + a / (a + 1) * bi.sum() ** 2
    cross = 2 * ba.sum() * bi.sum() / math.sqrt(2 * (a + 1))
    return float(ba @ ba + inactive + cross)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def active_count(regime: str, n: int, p: int) -> int:
    """Number of active coefficients for the sparse / medium / dense regimes."""
    if regime == "sparse":
        a = round_half_up(2 * math.log(p))
    elif regime == "medium":
        a = round_half_up(n / 2 + 2 * math.log(p))
    elif regime == "dense":
        a = round_half_up(p / 4)
    else:
        raise ValueError(f"no default active count for regime {regime!r}")
    return max(1, min(a, p - 1))


@dataclass
class CoefficientSpec:
    """``scheme`` is one of ``fanlv`` (random positions, magnitudes
    ``4 log(n)/sqrt(n) + |z|`` with 40% negative signs), ``ladder``
    (``beta_j = j`` on the first ``a``) or ``example_one`` (first ``a``
    entries uniform on +-{1, 2, 3})."""

    scheme: str
    a: int

    def __post_init__(self):
        if self.scheme not in ("fanlv", "ladder", "example_one"):
            raise ValueError(f"unknown coefficient scheme {self.scheme!r}")
        if self.a < 1:
            raise ValueError("a must be >= 1")


def sample_coefficients(spec: CoefficientSpec, n: int, p: int,
                        rng: np.random.Generator) -> np.ndarray:
    a = spec.a
    if a > p:
        raise ValueError("a must not exceed p")
    beta = np.zeros(p)
    if spec.scheme == "ladder":
        beta[:a] = np.arange(1, a + 1)
    elif spec.scheme == "example_one":
        beta[:a] = rng.choice([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], size=a)
    else:
        pos = rng.choice(p, size=a, replace=False)
        u = rng.random(a) < 0.4
        z = rng.standard_normal(a)
        beta[pos] = np.where(u, -1.0, 1.0) * (4 * math.log(n) / math.sqrt(n) + np.abs(z))
    return beta


@dataclass
class SimulationDesign:
    setting: str
    regime: str
    n: int
    p: int
    n_test: int = 100
    rho_snr: float = 10.0
    mu: float = 1.0
    a: Optional[int] = None
    rho: Optional[float] = None

    def active(self) -> int:
        if self.a is not None:
            return self.a
        if self.regime == "example_one":
            raise ValueError("example_one regime needs an explicit a")
        return active_count(self.regime, self.n, self.p)

    def coefficient_spec(self) -> CoefficientSpec:
        a = self.active()
        if self.regime == "example_one":
            return CoefficientSpec("example_one", a)
        if self.setting == "extreme":
            return CoefficientSpec("ladder", a)
        return CoefficientSpec("fanlv", a)


@dataclass
class Simulated:
    train: Dataset
    test: Dataset
    covariance: CovarianceSpec
    beta: np.ndarray = field(repr=False)
    sigma2: float = 0.0


def simulate(design: SimulationDesign, seed) -> Simulated:
    """Draw beta, calibrate the noise to the SNR, then draw train and test sets."""
    if not design.rho_snr > 0:
        raise ValueError("rho_snr must be positive")
    rng = np.random.default_rng(seed)
    cspec = design.coefficient_spec()
    beta = sample_coefficients(cspec, design.n, design.p, rng)
    cov = CovarianceSpec.make(design.setting, design.p, rng=rng, rho=design.rho, a=cspec.a)
    sigma2 = quadratic_form(cov, beta) / design.rho_snr
    truth = Truth(beta=beta, mu=design.mu, sigma2=sigma2)

    def draw(m):
        X = sample_predictors(cov, m, rng)
        y = design.mu + X @ beta + math.sqrt(sigma2) * rng.standard_normal(m)
        return Dataset(X, y, truth)

    train = draw(design.n)
    test = draw(design.n_test)
    return Simulated(train, test, cov, beta, sigma2)


def generate(setting: str, regime: str, n: int, p: int, n_test: int = 100,
             rho_snr: float = 10.0, mu: float = 1.0, seed=None, a: Optional[int] = None,
             rho: Optional[float] = None) -> tuple[Dataset, Dataset]:
    sim = simulate(SimulationDesign(setting, regime, n, p, n_test, rho_snr, mu, a, rho), seed)
    return sim.train, sim.test
