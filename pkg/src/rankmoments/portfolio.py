r"""Mean-variance portfolio with a budget constraint.

Solves

.. math::

   \max_{\mathbf{1}'w = 1} \hat\mu' w - \frac{\gamma}{2} w' \Xi w

in closed form. Stationarity gives :math:`w = \Xi^{-1}(\hat\mu - \lambda 1)/\gamma`
and the budget fixes :math:`\lambda = (1'\Xi^{-1}\hat\mu - \gamma) / (1'\Xi^{-1}1)`.
Short positions are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DomainError, SingularCovarianceError


@dataclass(frozen=True, eq=False)
class PortfolioProblem:
    mu_hat: np.ndarray
    big_xi: np.ndarray
    gamma: float = 4.0

    def __post_init__(self):
        mu_hat = np.asarray(self.mu_hat, dtype=float)
        big_xi = np.asarray(self.big_xi, dtype=float)
        n = mu_hat.size
        if mu_hat.ndim != 1 or big_xi.shape != (n, n):
            raise DomainError(f"mu_hat has {n} entries but covariance has shape {big_xi.shape}")
        scale = max(np.abs(big_xi).max(), 1.0)
        if np.abs(big_xi - big_xi.T).max() > 1e-12 * scale:
            raise DomainError("covariance matrix is not symmetric")
        if not self.gamma > 0:
            raise DomainError(f"risk aversion must be positive, got {self.gamma!r}")
        object.__setattr__(self, "mu_hat", mu_hat)
        object.__setattr__(self, "big_xi", big_xi)
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True, eq=False)
class PortfolioSolution:
    weights: np.ndarray
    lagrange_multiplier: float


def solve_mean_variance(problem: PortfolioProblem) -> PortfolioSolution:
    """Optimal weights from one Cholesky factorisation.

    Raises
    ------
    SingularCovarianceError
        If the covariance is not positive definite.
    """
    try:
        factor = linalg.cho_factor(problem.big_xi, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"covariance is not positive definite: {exc}") from exc
    ones = np.ones(problem.mu_hat.size)
    inv_mu = linalg.cho_solve(factor, problem.mu_hat)
    inv_one = linalg.cho_solve(factor, ones)
    lam = (ones @ inv_mu - problem.gamma) / (ones @ inv_one)
    w = (inv_mu - lam * inv_one) / problem.gamma
    return PortfolioSolution(w, float(lam))


def certainty_equivalent(weights, x_true, big_xi, gamma: float) -> float:
    """Realised certainty-equivalent return ``x'w - gamma/2 * w' Xi w``."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x_true, dtype=float)
    big_xi = np.asarray(big_xi, dtype=float)
    if x.shape != w.shape or big_xi.shape != (w.size, w.size):
        raise DomainError(
            f"dimension mismatch: weights {w.shape}, returns {x.shape}, covariance {big_xi.shape}"
        )
    if not gamma > 0:
        raise DomainError(f"risk aversion must be positive, got {gamma!r}")
    return float(x @ w - 0.5 * gamma * (w @ big_xi @ w))
