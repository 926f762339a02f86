"""Seeded batch studies: convergence in n, reinforcement index, portfolio simulation.

Every study returns plain row tuples in a fixed order, independent of the
number of worker processes. Per-instance seeds for the portfolio study are
derived with :func:`derive_seed`, so any single instance can be rerun from
the seed recorded in its row.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .model import UniformCorrelationModel, extract_ranking, one_factor_sample
from .portfolio import PortfolioProblem, certainty_equivalent, solve_mean_variance
from .recursive import QuadratureSpec, component_moments, conditional_moments

log = logging.getLogger(__name__)


def quantile_index(q: float, n: int) -> int:
    """1-based component index ``ceil(q * n)``, robust to float round-off."""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"quantile must lie in (0, 1], got {q!r}")
    return min(n, max(1, math.ceil(q * n - 1e-9)))


def reinforcement_mu(n: int, r: float) -> np.ndarray:
    """Equi-spaced increasing prior means scaled to Euclidean length ``|r|``.

    Negative ``r`` reverses the direction, i.e. the prior opposes the ranking.
    """
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    nu = -1.0 + 2.0 * np.arange(n) / (n - 1)
    return r * nu / np.linalg.norm(nu)


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# -- convergence ------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceConfig:
    n_values: tuple[int, ...] = (5, 15, 25, 75)
    rho_values: tuple[float, ...] = (0.0, 0.25, 0.50, 0.75)
    quantiles: tuple[float, ...] = (0.25, 0.50, 0.75, 1.00)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        for q in self.quantiles:
            quantile_index(q, 2)


class ConvergenceRow(NamedTuple):
    n: int
    rho: float
    quantile: float
    index: int
    sd: float


def _convergence_job(args):
    n, rho, quantiles, spec = args
    t0 = time.perf_counter()
    index = [quantile_index(q, n) for q in quantiles]
    cm = component_moments(UniformCorrelationModel.standard(n, rho), [i - 1 for i in index], None, spec)
    log.info("convergence n=%d rho=%g done in %.1fs", n, rho, time.perf_counter() - t0)
    return [ConvergenceRow(n, rho, q, i, float(sd)) for q, i, sd in zip(quantiles, index, cm.sd)]


def run_convergence(config: ConvergenceConfig = ConvergenceConfig(), workers: int = 1) -> list[ConvergenceRow]:
    """Conditional SD of the ``ceil(q*n)``-th component of the standard model.

    Rows are ordered by n, then rho, then quantile.
    """
    jobs = [
        (n, rho, tuple(config.quantiles), config.quadrature)
        for n in config.n_values
        for rho in config.rho_values
    ]
    return [row for rows in _map(_convergence_job, jobs, workers) for row in rows]


# -- reinforcement ----------------------------------------------------------

@dataclass(frozen=True)
class ReinforcementConfig:
    n_values: tuple[int, ...] = (5, 75)
    rho_values: tuple[float, ...] = (0.0, 0.5)
    r_values: tuple[float, ...] = tuple(np.round(np.linspace(-2.0, 2.0, 21), 12).tolist())
    quantile: float = 0.5
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if min(self.n_values, default=2) < 2:
            raise DomainError("reinforcement needs n >= 2")
        quantile_index(self.quantile, 2)


class ReinforcementRow(NamedTuple):
    n: int
    rho: float
    r: float
    sd: float


def _reinforcement_job(args):
    n, rho, r, q, spec = args
    model = UniformCorrelationModel(reinforcement_mu(n, r), np.ones(n), rho)
    cm = component_moments(model, [quantile_index(q, n) - 1], None, spec)
    log.info("reinforce n=%d rho=%g r=%g", n, rho, r)
    return ReinforcementRow(n, rho, r, float(cm.sd[0]))


def run_reinforcement(config: ReinforcementConfig = ReinforcementConfig(), workers: int = 1) -> list[ReinforcementRow]:
    """Conditional SD of the median component versus the reinforcement index."""
    jobs = [
        (n, rho, r, config.quantile, config.quadrature)
        for n in config.n_values
        for rho in config.rho_values
        for r in config.r_values
    ]
    return _map(_reinforcement_job, jobs, workers)


# -- portfolio simulation ---------------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    n_values: tuple[int, ...] = (5, 15, 25, 75)
    rho_values: tuple[float, ...] = (0.0, 0.25, 0.50, 0.75)
    instances: int = 100
    sigma_mu: float = 2.5e-7
    sigma2_big_sigma: float = 1e-3
    tau: float = 0.1
    gamma: float = 4.0
    master_seed: int = 0
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        for name in ("sigma_mu", "sigma2_big_sigma", "tau", "gamma"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.instances < 1:
            raise DomainError("instances must be >= 1")
        if any(not 0.0 <= rho < 1.0 for rho in self.rho_values):
            raise DomainError("rho values must lie in [0, 1)")


@dataclass(frozen=True)
class InstanceResult:
    n: int
    rho: float
    instance: int
    seed: int
    ceq_prior: float
    ceq_clair: float
    ceq_rank: float
    error: str | None = None
    runtime_ms: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None


class AggregateRow(NamedTuple):
    n: int
    rho: float
    completed: int
    mean_prior: float
    mean_clair: float
    mean_rank: float
    pct_diff_clair_rank: float


@dataclass
class PortfolioStudy:
    instances: list[InstanceResult]
    aggregate: list[AggregateRow]

    @property
    def failures(self) -> list[InstanceResult]:
        return [r for r in self.instances if not r.ok]


def derive_seed(master_seed: int, n: int, rho: float, instance: int) -> int:
    """Instance seed: first 64-bit word of ``SeedSequence(master_seed, spawn_key=(n, round(rho*1e6), instance))``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(n, int(round(rho * 1_000_000)), instance))
    return int(ss.generate_state(1, np.uint64)[0])


def simulate_instance(n: int, rho: float, config: SimulationConfig, seed: int, instance: int = 0) -> InstanceResult:
    """One draw of the simulation: prior, covariance, realised returns, three portfolios.

    1. ``mu_i ~ N(0, sigma_mu**2)``
    2. ``s_i ~ chi2_n``; ``Xi = S D S`` with ``S = diag(sqrt(s_i * sigma2_big_sigma))``
       and ``D`` the uniform correlation matrix
    3. ``x ~ N(mu, tau * Xi)`` through the one-factor form
    4. ranking of ``x``
    5. solve with ``mu``, ``x`` and ``E[X | ranking]``; score each by CEQ on ``x``

    Failures are caught and returned as a result with ``error`` set.
    """
    rng = np.random.default_rng(seed)
    runtime = {}
    try:
        mu = rng.normal(0.0, config.sigma_mu, n)
        s = rng.gamma(n / 2.0, 2.0, n)
        sd_xi = np.sqrt(s * config.sigma2_big_sigma)
        corr = np.full((n, n), rho)
        np.fill_diagonal(corr, 1.0)
        big_xi = sd_xi[:, None] * corr * sd_xi[None, :]

        model = UniformCorrelationModel(mu, math.sqrt(config.tau) * sd_xi, rho)
        x = one_factor_sample(model, rng)
        ranking = extract_ranking(x)

        t0 = time.perf_counter()
        rank_mean = conditional_moments(model, ranking, config.quadrature).mean
        runtime["rank_estimate"] = 1e3 * (time.perf_counter() - t0)

        ceq = {}
        for name, mu_hat in (("prior", mu), ("clair", x), ("rank", rank_mean)):
            t0 = time.perf_counter()
            w = solve_mean_variance(PortfolioProblem(mu_hat, big_xi, config.gamma)).weights
            ceq[name] = certainty_equivalent(w, x, big_xi, config.gamma)
            runtime[name] = 1e3 * (time.perf_counter() - t0)
    except Exception as exc:  # recorded, not raised: the study keeps going
        log.warning("instance n=%d rho=%g #%d (seed %d) failed: %s", n, rho, instance, seed, exc)
        nan = float("nan")
        return InstanceResult(n, rho, instance, seed, nan, nan, nan, f"{type(exc).__name__}: {exc}", runtime)
    return InstanceResult(n, rho, instance, seed, ceq["prior"], ceq["clair"], ceq["rank"], None, runtime)


def _instance_job(args):
    n, rho, i, config = args
    return simulate_instance(n, rho, config, derive_seed(config.master_seed, n, rho, i), i)


def aggregate_instances(results: list[InstanceResult]) -> list[AggregateRow]:
    """Average CEQ per (n, rho) over completed instances, in first-seen order.

    The percent difference is ``100 * (clair - rank) / |clair|`` on the averages.
    """
    groups: dict[tuple[int, float], list[InstanceResult]] = {}
    for r in results:
        groups.setdefault((r.n, r.rho), []).append(r)
    rows = []
    for (n, rho), group in groups.items():
        done = [r for r in group if r.ok]
        if done:
            prior = float(np.mean([r.ceq_prior for r in done]))
            clair = float(np.mean([r.ceq_clair for r in done]))
            rank = float(np.mean([r.ceq_rank for r in done]))
            pct = 100.0 * (clair - rank) / abs(clair)
        else:
            prior = clair = rank = pct = float("nan")
        rows.append(AggregateRow(n, rho, len(done), prior, clair, rank, pct))
    return rows


def run_portfolio_study(config: SimulationConfig = SimulationConfig(), workers: int = 1) -> PortfolioStudy:
    jobs = [
        (n, rho, i, config)
        for n in config.n_values
        for rho in config.rho_values
        for i in range(config.instances)
    ]
    results = _map(_instance_job, jobs, workers)
    return PortfolioStudy(results, aggregate_instances(results))
