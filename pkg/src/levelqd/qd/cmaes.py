"""Covariance matrix adaptation evolution strategy core (ask/tell interface).

Standard (mu/mu_w, lambda)-CMA-ES with non-negative log-decreasing
recombination weights, cumulative step-size adaptation and rank-one plus
rank-mu covariance updates. The caller supplies a full ranking of the
sampled candidates (best first), which is what lets the quality-diversity
emitters rank by archive improvement instead of raw fitness.

Sampling uses a Cholesky factor of C rather than an eigendecomposition: the
candidate distribution N(m, sigma^2 C) is identical and the factorization is
several times cheaper at the genome sizes used here (~2-5k parameters). The
conjugate evolution path is accumulated from the raw normal draws z_k, which
sidesteps C^(-1/2) entirely. The factor is refreshed lazily every
`decomp_interval` generations (the standard 0.5 / ((c1 + cmu) * n) schedule),
and the eigendecomposition is kept only for repairing a covariance matrix
that has lost positive definiteness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CmaNumericalError(RuntimeError):
    """Raised when an update produces non-finite state or an unrepairable C."""


def default_population(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


@dataclass(frozen=True)
class CmaesParams:
    dim: int
    lam: int
    mu: int
    weights: np.ndarray  # length mu, sums to 1
    mueff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float
    chi_n: float
    decomp_interval: int

    @classmethod
    def for_dimension(cls, dim: int, popsize: int | None = None) -> "CmaesParams":
        n = dim
        lam = popsize if popsize else default_population(n)
        if lam < 2:
            raise ValueError("population size must be at least 2")
        mu = lam // 2
        raw = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
        weights = raw / raw.sum()
        mueff = float(weights.sum() ** 2 / (weights**2).sum())
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        cs = (mueff + 2) / (n + mueff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
        chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        interval = max(1, int(0.5 / ((c1 + cmu) * n)))
        return cls(n, lam, mu, weights, mueff, cc, cs, c1, cmu, damps, chi_n, interval)


class CmaEs:
    """One adaptive Gaussian search distribution over R^dim."""

    def __init__(
        self,
        mean: np.ndarray,
        sigma: float,
        rng: np.random.Generator,
        popsize: int | None = None,
    ):
        self.mean = np.array(mean, dtype=np.float64).ravel()
        if self.mean.ndim != 1 or self.mean.size == 0:
            raise ValueError("mean must be a non-empty vector")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.params = CmaesParams.for_dimension(self.mean.size, popsize)
        self.sigma = float(sigma)
        self.rng = rng
        n = self.mean.size
        self.cov = np.eye(n)
        self._factor = np.eye(n)  # lower-triangular A with A @ A.T == C
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self._last_decomp = 0
        self._z: np.ndarray | None = None
        self._y: np.ndarray | None = None

    @property
    def population(self) -> int:
        return self.params.lam

    def ask(self) -> np.ndarray:
        """Sample lambda candidates x_k = mean + sigma * A z_k, z_k ~ N(0, I)."""
        p = self.params
        self._z = self.rng.standard_normal((p.lam, p.dim))
        self._y = self._z @ self._factor.T
        return self.mean[None, :] + self.sigma * self._y

    def tell_ranked(self, order: np.ndarray) -> None:
        """Update mean, paths, C and sigma given candidate indices best-first.

        `order` must be a permutation of range(lambda) for the candidates of
        the matching ask() call.
        """
        if self._z is None:
            raise RuntimeError("tell_ranked called before ask")
        p = self.params
        order = np.asarray(order, dtype=np.int64)
        if order.shape != (p.lam,) or np.sort(order).tolist() != list(range(p.lam)):
            raise ValueError("order must be a permutation of the candidate indices")
        sel = order[: p.mu]
        z_w = p.weights @ self._z[sel]
        y_w = p.weights @ self._y[sel]

        self.mean = self.mean + self.sigma * y_w
        self.generation += 1

        self.p_sigma = (1 - p.cs) * self.p_sigma + math.sqrt(p.cs * (2 - p.cs) * p.mueff) * z_w
        ps_sq = float(self.p_sigma @ self.p_sigma)
        bias = 1 - (1 - p.cs) ** (2 * self.generation)
        h_sig = 1.0 if ps_sq / p.dim / bias < 2 + 4 / (p.dim + 1) else 0.0
        self.p_c = (1 - p.cc) * self.p_c + h_sig * math.sqrt(p.cc * (2 - p.cc) * p.mueff) * y_w

        # Rank-one and rank-mu updates fused into a single weighted Gram product.
        c1a = p.c1 * (1 - (1 - h_sig**2) * p.cc * (2 - p.cc))
        rows = np.concatenate([self.p_c[None, :], self._y[sel]], axis=0)
        row_w = np.concatenate([[c1a], p.cmu * p.weights])
        self.cov *= 1 - c1a - p.cmu
        self.cov += (rows.T * row_w) @ rows

        self.sigma *= math.exp((p.cs / p.damps) * (math.sqrt(ps_sq) / p.chi_n - 1))

        if not (
            math.isfinite(self.sigma)
            and np.isfinite(self.mean).all()
            and np.isfinite(self.cov).all()
        ):
            raise CmaNumericalError("non-finite optimizer state after update")
        self._z = None
        self._y = None

        if self.generation - self._last_decomp >= p.decomp_interval:
            self._decompose()

    def _decompose(self) -> None:
        self.cov = (self.cov + self.cov.T) / 2
        try:
            self._factor = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            self.repair_covariance()
        self._last_decomp = self.generation

    def repair_covariance(self) -> None:
        """Clamp eigenvalues to restore positive definiteness."""
        self.cov = (self.cov + self.cov.T) / 2
        try:
            evals, evecs = np.linalg.eigh(self.cov)
        except np.linalg.LinAlgError as exc:
            raise CmaNumericalError("covariance eigendecomposition failed") from exc
        if not np.isfinite(evals).all():
            raise CmaNumericalError("non-finite covariance eigenvalues")
        floor = max(1e-11, 1e-14 * float(evals.max()))
        evals = np.maximum(evals, floor)
        self.cov = (evecs * evals) @ evecs.T
        self.cov = (self.cov + self.cov.T) / 2
        self._factor = np.linalg.cholesky(self.cov)

    def min_covariance_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.cov + self.cov.T) / 2).min())


def rank_by_objective(objectives) -> np.ndarray:
    """Best-first candidate order for plain maximization (stable on ties)."""
    values = np.asarray(objectives, dtype=np.float64)
    return np.argsort(-values, kind="stable")
