"""Named cross-validation checks behind ``rankmoments oracle``.

Each check takes a parameter dict and a seed and returns a JSON-ready verdict
with ``pass``, the observed and expected values and the tolerance used.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .experiments import quantile_index
from .model import UniformCorrelationModel
from .oracle import (
    expected_order_statistic_exact,
    expected_order_statistic_mc,
    limit_mean,
    order_statistic_variance_mc,
    rejection_conditional_moments,
)
from .portfolio import PortfolioProblem, solve_mean_variance
from .recursive import conditional_moments


def parse_params(tokens) -> dict:
    params = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise DomainError(f"parameter {tok!r} is not key=value")
        params[key.strip()] = value.strip()
    return params


def _take(params: dict, key: str, kind, default):
    return kind(params[key]) if key in params else default


def order_stat(params: dict, seed: int) -> dict:
    """MC mean of the k-th smallest of n normals against exact quadrature (3 SE)."""
    n = _take(params, "n", int, 100)
    k = _take(params, "k", int, 96)
    reps = _take(params, "reps", int, 100_000)
    est = expected_order_statistic_mc(n, k, reps, seed)
    exact = expected_order_statistic_exact(n, k)
    tol = 3.0 * est.std_error
    return {
        "pass": abs(est.value - exact) <= tol,
        "observed": est.value,
        "expected": exact,
        "se": est.std_error,
        "tolerance": tol,
        "n": n,
        "k": k,
    }


def shift_invariance(params: dict, seed: int) -> dict:
    """Largest weight change when every expected return moves by the same constant."""
    n = _take(params, "n", int, 10)
    problems = _take(params, "problems", int, 100)
    shift = _take(params, "c", float, 7.3)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(problems):
        root = rng.standard_normal((n, n))
        xi = root @ root.T / n + 0.1 * np.eye(n)
        mu = rng.normal(0.0, 0.1, n)
        w0 = solve_mean_variance(PortfolioProblem(mu, xi, 4.0)).weights
        w1 = solve_mean_variance(PortfolioProblem(mu + shift, xi, 4.0)).weights
        worst = max(worst, float(np.abs(w1 - w0).max()))
    return {"pass": worst < 1e-10, "observed": worst, "expected": 0.0, "tolerance": 1e-10}


def engine_vs_rejection(params: dict, seed: int) -> dict:
    """Engine means and SDs within 3 SE of rejection sampling on a random prior."""
    n = _take(params, "n", int, 4)
    rho = _take(params, "rho", float, 0.5)
    accepted = _take(params, "accepted", int, 100_000)
    rng = np.random.default_rng(seed)
    model = UniformCorrelationModel(rng.uniform(-0.5, 0.5, n), np.ones(n), rho)
    mc = rejection_conditional_moments(model, None, accepted, seed=rng.integers(2**63))
    cm = conditional_moments(model)
    z_mean = [(cm.mean[i] - mc.mean[i].value) / mc.mean[i].std_error for i in range(n)]
    z_sd = [(cm.sd[i] - mc.sd[i].value) / mc.sd[i].std_error for i in range(n)]
    worst = max(abs(z) for z in z_mean + z_sd)
    return {
        "pass": worst <= 3.0,
        "observed": cm.mean.tolist(),
        "expected": [e.value for e in mc.mean],
        "se": [e.std_error for e in mc.mean],
        "observed_sd": cm.sd.tolist(),
        "expected_sd": [e.value for e in mc.sd],
        "se_sd": [e.std_error for e in mc.sd],
        "max_abs_z": worst,
        "tolerance": 3.0,
    }


def limit_mean_check(params: dict, seed: int) -> dict:
    """Engine mean of component ceil(p*n) against both limit formulas.

    Passes when it sits within ``tol`` of ``sqrt(1 - rho) * E[Z_(k)]`` (the
    finite-n value the one-factor argument gives).
    """
    n = _take(params, "n", int, 75)
    rho = _take(params, "rho", float, 0.75)
    p = _take(params, "p", float, 0.75)
    reps = _take(params, "reps", int, 100_000)
    tol = _take(params, "tol", float, 0.05)
    k = quantile_index(p, n)
    engine = float(conditional_moments(UniformCorrelationModel.standard(n, rho)).mean[k - 1])
    ez = expected_order_statistic_mc(n, k, reps, seed)
    anchored = math.sqrt(1.0 - rho) * ez.value
    statement = limit_mean(p, rho, "statement")
    return {
        "pass": abs(engine - anchored) <= tol and abs(engine - statement) > tol,
        "observed": engine,
        "expected": anchored,
        "se": math.sqrt(1.0 - rho) * ez.std_error,
        "tolerance": tol,
        "index": k,
        "limit_proof": limit_mean(p, rho, "proof"),
        "limit_statement": statement,
    }


def variance_identity(params: dict, seed: int) -> dict:
    """Engine variance of the median against ``rho + (1 - rho) * Var[Z_(k)]`` (3 SE)."""
    n = _take(params, "n", int, 5)
    rho = _take(params, "rho", float, 0.5)
    reps = _take(params, "reps", int, 200_000)
    k = quantile_index(0.5, n)
    engine = float(conditional_moments(UniformCorrelationModel.standard(n, rho)).variance[k - 1])
    vz = order_statistic_variance_mc(n, k, reps, seed)
    expected = rho + (1.0 - rho) * vz.value
    se = (1.0 - rho) * vz.std_error
    return {
        "pass": abs(engine - expected) <= 3.0 * se,
        "observed": engine,
        "expected": expected,
        "se": se,
        "tolerance": 3.0 * se,
        "index": k,
    }


CHECKS = {
    "order-stat": order_stat,
    "shift-invariance": shift_invariance,
    "engine-vs-rejection": engine_vs_rejection,
    "limit-mean": limit_mean_check,
    "variance-identity": variance_identity,
}
