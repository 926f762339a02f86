"""Monte Carlo ground truth and closed-form limits.

Everything here is deliberately brute force and independent of the
recursive engine: rejection sampling from the one-factor representation for
rank-conditioned moments, and sorting iid normals for order statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InsufficientAcceptanceError
from .gauss import std_normal_quantile
from .model import Ranking, UniformCorrelationModel, apply_ranking, one_factor_sample

_BATCH = 65536


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_accepted: int
    n_proposed: int


@dataclass(frozen=True)
class RejectionMoments:
    """Per-component estimates in original index order."""

    mean: list[McEstimate]
    variance: list[McEstimate]
    sd: list[McEstimate]
    acceptance_rate: float


def _mean_estimate(x: np.ndarray, proposed: int) -> McEstimate:
    n = x.size
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), n, proposed)


def _variance_estimate(x: np.ndarray, proposed: int) -> McEstimate:
    # SE of the sample variance from the fourth central moment:
    # Var(s^2) ~ (m4 - (n-3)/(n-1) * s^4) / n
    n = x.size
    d = x - x.mean()
    s2 = float(d @ d / (n - 1))
    m4 = float(np.mean(d ** 4))
    se = math.sqrt(max(m4 - (n - 3) / (n - 1) * s2 * s2, 0.0) / n)
    return McEstimate(s2, se, n, proposed)


def _sd_estimate(var: McEstimate) -> McEstimate:
    sd = math.sqrt(var.value)
    se = var.std_error / (2.0 * sd) if sd > 0 else 0.0
    return McEstimate(sd, se, var.n_accepted, var.n_proposed)


def rejection_conditional_moments(
    model: UniformCorrelationModel,
    ranking: Ranking | None = None,
    target_accepted: int = 100_000,
    max_proposed: int = 200_000_000,
    seed=None,
) -> RejectionMoments:
    """Estimate E[X | ranking] and Var[X | ranking] by rejection sampling.

    Draws are proposed in fixed batches and accepted when they satisfy the
    ranking; the first ``target_accepted`` acceptances are kept, so the result
    depends only on the seed.

    Raises
    ------
    InsufficientAcceptanceError
        If ``max_proposed`` draws yield fewer than ``target_accepted``.
    """
    ranking = ranking or Ranking.identity(model.n)
    canon = apply_ranking(model, ranking)
    rng = np.random.default_rng(seed)
    kept = []
    accepted = proposed = 0
    while accepted < target_accepted:
        if proposed >= max_proposed:
            raise InsufficientAcceptanceError(accepted, proposed, target_accepted)
        batch = min(_BATCH, max_proposed - proposed)
        x = one_factor_sample(canon, rng, size=batch)
        ok = np.all(np.diff(x, axis=1) >= 0.0, axis=1)
        hits = x[ok]
        need = target_accepted - accepted
        if hits.shape[0] >= need:
            # Count proposals up to and including the last draw we keep.
            last = np.flatnonzero(ok)[need - 1]
            proposed += last + 1
            hits = hits[:need]
        else:
            proposed += batch
        kept.append(hits)
        accepted += hits.shape[0]
    sample = np.concatenate(kept)

    means, variances, sds = [None] * model.n, [None] * model.n, [None] * model.n
    for pos, orig in enumerate(ranking.order):
        col = sample[:, pos]
        means[orig] = _mean_estimate(col, proposed)
        variances[orig] = _variance_estimate(col, proposed)
        sds[orig] = _sd_estimate(variances[orig])
    return RejectionMoments(means, variances, sds, accepted / proposed)


def _order_statistic_draws(n: int, k: int, replications: int, seed) -> np.ndarray:
    if not 1 <= k <= n:
        raise DomainError(f"rank k must satisfy 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    out = np.empty(replications)
    done = 0
    rows = max(1, _BATCH * 4 // n)
    while done < replications:
        r = min(rows, replications - done)
        z = rng.standard_normal((r, n))
        out[done:done + r] = np.partition(z, k - 1, axis=1)[:, k - 1]
        done += r
    return out


def expected_order_statistic_mc(n: int, k: int, replications: int = 100_000, seed=None) -> McEstimate:
    """Monte Carlo E[Z_(k)] for the k-th smallest (1-based) of n iid N(0, 1)."""
    z = _order_statistic_draws(n, k, replications, seed)
    return _mean_estimate(z, replications)


def order_statistic_variance_mc(n: int, k: int, replications: int = 100_000, seed=None) -> McEstimate:
    """Monte Carlo Var[Z_(k)], with a fourth-moment standard error."""
    z = _order_statistic_draws(n, k, replications, seed)
    return _variance_estimate(z, replications)


def limit_mean(p: float, rho: float, variant: str = "proof") -> float:
    """Large-n limit of the conditional mean of component ceil(p*n), standard model.

    ``variant="proof"`` gives ``sqrt(1 - rho) * Phi^-1(p)``, which is what the
    one-factor argument yields; ``variant="statement"`` gives the
    ``(1 - rho) * Phi^-1(p)`` form.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho!r}")
    q = std_normal_quantile(p)
    if variant == "proof":
        return math.sqrt(1.0 - rho) * q
    if variant == "statement":
        return (1.0 - rho) * q
    raise DomainError(f"variant must be 'proof' or 'statement', got {variant!r}")


def limit_variance(rho: float) -> float:
    """Large-n limit of the conditional variance of an interior quantile: rho."""
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho!r}")
    return float(rho)


def expected_order_statistic_exact(n: int, k: int) -> float:
    """E[Z_(k)] by adaptive quadrature of the order-statistic density.

    A deterministic cross-check for :func:`expected_order_statistic_mc`.
    """
    if not 1 <= k <= n:
        raise DomainError(f"rank k must satisfy 1 <= k <= n, got k={k}, n={n}")
    log_c = math.lgamma(n + 1) - math.lgamma(k) - math.lgamma(n - k + 1)

    def density(x):
        return math.exp(
            log_c
            + (k - 1) * special.log_ndtr(x)
            + (n - k) * special.log_ndtr(-x)
            - 0.5 * x * x
            - 0.5 * math.log(2.0 * math.pi)
        )

    value, _ = integrate.quad(lambda x: x * density(x), -12.0, 12.0, limit=400, epsabs=1e-12)
    return float(value)
