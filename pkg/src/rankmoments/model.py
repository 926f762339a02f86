"""Uniform-correlation normal model, ranking constraints and their conversions.

A vector with a uniform correlation structure admits the one-factor form

    X_i = sigma_i * (sqrt(rho) * M + sqrt(1 - rho) * Z_i) + mu_i

with ``M, Z_1, ..., Z_n`` iid N(0, 1). Given ``M = m`` the components are
independent, which is what the recursive integration engine relies on.

Indices are 0-based throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class UniformCorrelationModel:
    """Normal vector with means ``mu``, SDs ``sigma`` and common correlation ``rho``."""

    mu: np.ndarray
    sigma: np.ndarray
    rho: float

    def __post_init__(self):
        mu = _frozen(self.mu, "mu")
        sigma = _frozen(self.sigma, "sigma")
        if mu.shape != sigma.shape:
            raise DomainError(f"mu has {mu.size} entries but sigma has {sigma.size}")
        if mu.size < 2:
            raise DomainError(f"need at least 2 variables, got {mu.size}")
        if np.any(sigma <= 0):
            raise DomainError("sigma entries must be positive")
        rho = float(self.rho)
        if not 0.0 <= rho <= 1.0:
            raise DomainError(f"rho must lie in [0, 1], got {rho!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def standard(cls, n: int, rho: float) -> UniformCorrelationModel:
        return cls(np.zeros(n), np.ones(n), rho)

    @property
    def n(self) -> int:
        return self.mu.size

    def is_standard(self) -> bool:
        return bool(np.all(self.mu == 0.0) and np.all(self.sigma == 1.0))

    def __eq__(self, other):
        if not isinstance(other, UniformCorrelationModel):
            return NotImplemented
        return (
            self.rho == other.rho
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sigma, other.sigma)
        )

    def __hash__(self):
        return hash((self.rho, self.mu.tobytes(), self.sigma.tobytes()))


@dataclass(frozen=True)
class Ranking:
    """Complete ordering ``X[order[0]] <= X[order[1]] <= ... <= X[order[-1]]``."""

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise DomainError(f"order must be a permutation of 0..{len(order) - 1}, got {order}")
        object.__setattr__(self, "order", order)

    @classmethod
    def identity(cls, n: int) -> Ranking:
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.order)

    def inverse(self) -> Ranking:
        return Ranking(tuple(np.argsort(self.order).tolist()))

    def is_identity(self) -> bool:
        return self.order == tuple(range(self.n))


@dataclass(frozen=True, eq=False)
class ConditionalMoments:
    """Per-component moments of X given the ranking, in original index order.

    ``log_prob`` is the natural log of the probability of the ranking.
    """

    mean: np.ndarray
    second_moment: np.ndarray
    variance: np.ndarray
    log_prob: float
    sd: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("mean", "second_moment", "variance"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        sd = np.sqrt(self.variance)
        sd.setflags(write=False)
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "log_prob", float(self.log_prob))


def covariance_matrix(model: UniformCorrelationModel) -> np.ndarray:
    """Joint covariance: ``sigma_i**2`` on the diagonal, ``rho*sigma_i*sigma_j`` off it."""
    s = model.sigma
    cov = model.rho * np.outer(s, s)
    np.fill_diagonal(cov, s * s)
    return cov


def one_factor_sample(model: UniformCorrelationModel, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from the model through its one-factor representation.

    With ``size=None`` a single vector of length n is returned; otherwise an
    array of shape ``(size, n)``. Each row consumes one common factor draw
    followed by n idiosyncratic draws.
    """
    rows = 1 if size is None else int(size)
    draws = rng.standard_normal((rows, model.n + 1))
    common = draws[:, :1]
    idio = draws[:, 1:]
    x = model.sigma * (np.sqrt(model.rho) * common + np.sqrt(1.0 - model.rho) * idio) + model.mu
    return x[0] if size is None else x


def extract_ranking(x) -> Ranking:
    """Ranking that sorts ``x`` ascending; ties keep the lower index first."""
    x = np.asarray(x, dtype=float)
    return Ranking(tuple(np.argsort(x, kind="stable").tolist()))


def apply_ranking(model: UniformCorrelationModel, ranking: Ranking) -> UniformCorrelationModel:
    """Permute the model so the ranking becomes the canonical ``x_0 <= ... <= x_{n-1}``.

    Uniform correlation is permutation invariant, so only ``mu`` and ``sigma``
    move. Applying ``ranking.inverse()`` to the result restores the input.
    """
    if ranking.n != model.n:
        raise DomainError(f"ranking has {ranking.n} entries but model has {model.n}")
    idx = np.asarray(ranking.order)
    return UniformCorrelationModel(model.mu[idx], model.sigma[idx], model.rho)
