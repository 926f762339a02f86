"""Recursive two-dimensional integration for rank-conditioned moments.

Conditioning on the common factor ``M = m`` makes the components independent
normals ``N(mu_i + sigma_i*sqrt(rho)*m, sigma_i**2*(1 - rho))`` with densities
``phi_i(m, .)``. For the canonical cone ``x_0 <= ... <= x_{n-1}``::

    b_0 = 1,   b_{k+1}(m, x) = int_{-inf}^x b_k(m, t) phi_k(m, t) dt
    B = int phi(m) int b_{n-1}(m, x) phi_{n-1}(m, x) dx dm

The numerator ``A`` for component ``l`` runs the same recursion with the
integrand multiplied by ``g(x) = x`` (or ``x**2``) at step ``l``. The h
recursion branches off the shared b recursion at step ``l``, so all n means
and second moments cost O(n**2) cumulative integrals per m node.

The inner integrals are end-corrected cumulative trapezoid sums on a uniform
x-grid shared by every step at a given m. The outer integral is Simpson's rule on a fixed
symmetric m-grid. After every step the running function is divided by its
maximum and the log of that factor is accumulated, which keeps B representable
for n in the hundreds; A is divided by the same factors, so A/B needs no
exponentiation of the accumulated scale until the final m reduction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateModelError, DomainError, NumericalError
from .model import ConditionalMoments, Ranking, UniformCorrelationModel, apply_ranking

__all__ = [
    "QuadratureSpec",
    "RecursionState",
    "component_moments",
    "conditional_moments",
    "conditional_moments_all_n",
    "log_ranking_probability",
]

# m-nodes are always processed in blocks of this size so that per-node
# arithmetic is identical no matter how many workers share the blocks.
_BLOCK = 16
_NEGATIVE_VARIANCE_TOL = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid sizes for the outer (m) and inner (x) integrals.

    ``m_nodes`` must be odd (Simpson's rule). ``m_halfwidth`` is in units of
    the standard deviation of M; ``x_padding`` counts the largest conditional
    SD beyond the extreme conditional means.
    """

    m_nodes: int = 101
    x_nodes: int = 2001
    m_halfwidth: float = 8.0
    x_padding: float = 8.0

    def __post_init__(self):
        if self.m_nodes < 21 or self.m_nodes % 2 == 0:
            raise DomainError(f"m_nodes must be odd and >= 21, got {self.m_nodes}")
        if self.x_nodes < 201:
            raise DomainError(f"x_nodes must be >= 201, got {self.x_nodes}")
        if self.m_halfwidth < 6:
            raise DomainError(f"m_halfwidth must be >= 6, got {self.m_halfwidth}")
        if self.x_padding < 6:
            raise DomainError(f"x_padding must be >= 6, got {self.x_padding}")

    def refined(self) -> QuadratureSpec:
        """Spec with twice as many intervals on both grids."""
        return QuadratureSpec(
            2 * self.m_nodes - 1, 2 * self.x_nodes - 1, self.m_halfwidth, self.x_padding
        )

    def m_grid(self):
        """Nodes and log quadrature weights (Simpson times the N(0,1) density)."""
        m = np.linspace(-self.m_halfwidth, self.m_halfwidth, self.m_nodes)
        h = m[1] - m[0]
        w = np.full(self.m_nodes, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        log_w = np.log(w * h / 3.0) - 0.5 * m * m - _LOG_SQRT_2PI
        return m, log_w


@dataclass
class RecursionState:
    """Running b or h function on the x-grid of a block of m nodes.

    ``values`` has shape ``(..., block, x_nodes)``; ``log_scale`` has shape
    ``(block,)`` and holds the log of every factor divided out so far.
    """

    values: np.ndarray
    log_scale: np.ndarray


def _cumtrapz(f: np.ndarray) -> np.ndarray:
    """Running trapezoid integral with the Euler-Maclaurin end correction.

    Unit spacing; the grid step is booked in the log scale. Subtracting
    ``(f'(x_j) - f'(x_0)) / 12`` lifts the plain O(dx**2) running sum to
    O(dx**4), which the error build-up over n chained steps needs. The
    slopes are second-order finite differences.
    """
    out = np.empty_like(f)
    # out holds 12 * (trapezoid sum) - (slope_j - slope_0), scaled at the end
    np.add(f[..., 1:], f[..., :-1], out=out[..., 1:])
    out[..., 0] = 0.0
    np.cumsum(out, axis=-1, out=out)
    out *= 6.0
    slope = np.empty_like(f)
    np.subtract(f[..., 2:], f[..., :-2], out=slope[..., 1:-1])
    slope[..., 1:-1] *= 0.5
    slope[..., 0] = -1.5 * f[..., 0] + 2.0 * f[..., 1] - 0.5 * f[..., 2]
    slope[..., -1] = 1.5 * f[..., -1] - 2.0 * f[..., -2] + 0.5 * f[..., -3]
    out -= slope
    out += slope[..., :1]
    out *= 1.0 / 12.0
    return out


def _cumtrapz_monotone(f: np.ndarray) -> np.ndarray:
    """:func:`_cumtrapz` for a nonnegative integrand, kept nonnegative and nondecreasing.

    The end correction can leave round-off sized dips in the far tail.
    """
    out = _cumtrapz(f)
    np.maximum(out, 0.0, out=out)
    np.maximum.accumulate(out, axis=-1, out=out)
    return out


def _trapz(f: np.ndarray) -> np.ndarray:
    slope_end = 1.5 * (f[..., -1] - f[..., 0]) - 2.0 * (f[..., -2] - f[..., 1]) + 0.5 * (f[..., -3] - f[..., 2])
    return f.sum(axis=-1) - 0.5 * (f[..., 0] + f[..., -1]) - slope_end / 12.0


class _Block:
    """Grid and conditional densities for one block of m nodes."""

    def __init__(self, model: UniformCorrelationModel, center: float, m: np.ndarray, spec: QuadratureSpec):
        n = model.n
        loc = (model.mu - center)[None, :] + model.sigma[None, :] * math.sqrt(model.rho) * m[:, None]
        scale = model.sigma * math.sqrt(1.0 - model.rho)
        pad = spec.x_padding * scale.max()
        lo = loc.min(axis=1) - pad
        hi = loc.max(axis=1) + pad
        t = np.linspace(0.0, 1.0, spec.x_nodes)
        self.u = lo[:, None] + (hi - lo)[:, None] * t[None, :]
        self.log_dx = np.log((hi - lo) / (spec.x_nodes - 1))
        self.phi = np.empty((n,) + self.u.shape)
        for k in range(n):
            z = (self.u - loc[:, k, None]) / scale[k]
            self.phi[k] = np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / scale[k]


def _step(state: RecursionState, phi_k: np.ndarray, log_dx: np.ndarray, rescale: bool):
    raw = _cumtrapz_monotone(state.values * phi_k)
    peak = np.ones(raw.shape[0])
    log_factor = log_dx.copy()
    if rescale:
        top = raw.max(axis=-1)
        ok = top > 0.0
        peak[ok] = top[ok]
        log_factor[ok] += np.log(top[ok])
        log_factor[~ok] = -np.inf
        raw /= peak[:, None]
    return RecursionState(raw, state.log_scale + log_factor), peak


def _forward(block: _Block, rescale: bool):
    """Run the b recursion.

    Returns the divisor applied at each step (``peaks[k]`` produced b_k), the
    total log scale of B(m) and the scaled B(m) integral.
    """
    n = block.phi.shape[0]
    state = RecursionState(np.ones_like(block.u), np.zeros(block.u.shape[0]))
    peaks = np.ones((n, block.u.shape[0]))
    for k in range(n - 1):
        state, peaks[k + 1] = _step(state, block.phi[k], block.log_dx, rescale)
    tail = _trapz(state.values * block.phi[n - 1])
    return peaks, state.log_scale + block.log_dx, tail


def _moments_block(block: _Block, rescale: bool, positions: np.ndarray):
    """Per-node log scale, scaled B(m) and scaled A numerators.

    ``positions`` are sorted canonical components. Returns ``log_scale`` and
    ``b_tail`` of shape ``(block,)`` and ``a`` of shape
    ``(2, len(positions), block)`` with ``B(m) = exp(log_scale) * b_tail`` and
    ``A_l(m) = exp(log_scale) * a[:, j]`` (first and second moment) for
    ``l = positions[j]``.
    """
    n = block.phi.shape[0]
    peaks, log_scale, b_tail = _forward(block, rescale)
    g = np.stack([block.u, block.u * block.u])
    a = np.empty((2, positions.size, block.u.shape[0]))
    b = np.ones_like(block.u)
    for j, l in enumerate(positions):
        # advance the shared b recursion from its current step to step l
        start = positions[j - 1] if j else 0
        for k in range(start, l):
            b = _cumtrapz_monotone(b * block.phi[k]) / peaks[k + 1][:, None]
        if l == n - 1:
            a[:, j] = _trapz(b * g * block.phi[l])
            continue
        h = _cumtrapz(b * g * block.phi[l])
        for k in range(l + 1, n):
            h /= peaks[k][:, None]
            if k == n - 1:
                a[:, j] = _trapz(h * block.phi[k])
            else:
                h = _cumtrapz(h * block.phi[k])
    return log_scale, b_tail, a


def _validate(model: UniformCorrelationModel):
    if model.rho >= 1.0:
        raise DegenerateModelError(
            "rho = 1 leaves no idiosyncratic variance; the conditional densities are degenerate"
        )


def _blocks(spec: QuadratureSpec):
    m, log_w = spec.m_grid()
    return [(m[i:i + _BLOCK], log_w[i:i + _BLOCK]) for i in range(0, m.size, _BLOCK)]


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def log_ranking_probability(
    model: UniformCorrelationModel,
    spec: QuadratureSpec | None = None,
    *,
    rescale: bool = True,
    workers: int = 1,
) -> float:
    """Natural log of ``P(X_0 <= X_1 <= ... <= X_{n-1})``.

    Raises
    ------
    DegenerateModelError
        If ``model.rho == 1``.
    """
    spec = spec or QuadratureSpec()
    _validate(model)
    center = float(np.mean(model.mu))

    def run(item):
        m, log_w = item
        _, log_scale, tail = _forward(_Block(model, center, m, spec), rescale)
        with np.errstate(divide="ignore"):
            return log_w + log_scale + np.log(tail)

    return float(logsumexp(np.concatenate(_map(run, _blocks(spec), workers))))


def _ratio_moments(canon: UniformCorrelationModel, center: float, positions: np.ndarray,
                   spec: QuadratureSpec, rescale: bool, workers: int):
    def run(item):
        m, log_w = item
        log_scale, tail, a = _moments_block(_Block(canon, center, m, spec), rescale, positions)
        return log_w + log_scale, tail, a

    parts = _map(run, _blocks(spec), workers)
    log_node = np.concatenate([p[0] for p in parts])
    tail = np.concatenate([p[1] for p in parts])
    a = np.concatenate([p[2] for p in parts], axis=-1)

    with np.errstate(divide="ignore"):
        log_b = float(logsumexp(log_node + np.log(tail)))
    finite = np.isfinite(log_node)
    weight = np.zeros_like(log_node)
    weight[finite] = np.exp(log_node[finite] - log_node[finite].max())
    b_sum = np.sum(weight * tail)
    if not b_sum > 0:
        raise NumericalError("ranking probability underflowed on every m node")
    first = np.sum(a[0] * weight, axis=-1) / b_sum
    second = np.sum(a[1] * weight, axis=-1) / b_sum

    var = second - first * first
    worst = var.min()
    if worst < -_NEGATIVE_VARIANCE_TOL:
        raise NumericalError(
            f"conditional variance {worst:.3e} is negative; refine the quadrature grid"
        )
    return first + center, np.maximum(var, 0.0), log_b


def conditional_moments(
    model: UniformCorrelationModel,
    ranking: Ranking | None = None,
    spec: QuadratureSpec | None = None,
    *,
    rescale: bool = True,
    workers: int = 1,
) -> ConditionalMoments:
    """Means, second moments and variances of X given the ranking.

    Parameters
    ----------
    model : UniformCorrelationModel
        Prior; ``rho`` must be below 1.
    ranking : Ranking, optional
        Ordering constraint. Defaults to the identity (``x_0 <= ... <= x_{n-1}``).
    spec : QuadratureSpec, optional
        Grid sizes; defaults to ``QuadratureSpec()``.
    rescale : bool
        Renormalise after every recursion step. Only worth disabling to test
        that the result does not depend on it (small n).
    workers : int
        Threads over blocks of m nodes. The result is bitwise identical for
        any value.

    Returns
    -------
    ConditionalMoments
        Indexed like the input model.

    Raises
    ------
    DegenerateModelError
        If ``model.rho == 1``.
    NumericalError
        If a variance comes out below ``-1e-8``; the grid is too coarse.
    """
    ranking = ranking or Ranking.identity(model.n)
    return component_moments(model, range(model.n), ranking, spec, rescale=rescale, workers=workers)


def component_moments(
    model: UniformCorrelationModel,
    components: Sequence[int],
    ranking: Ranking | None = None,
    spec: QuadratureSpec | None = None,
    *,
    rescale: bool = True,
    workers: int = 1,
) -> ConditionalMoments:
    """Like :func:`conditional_moments` for a subset of components only.

    The arrays of the result follow the order of ``components`` (0-based,
    original indexing). Costs O(n * len(components)) cumulative integrals per
    m node instead of O(n**2).
    """
    spec = spec or QuadratureSpec()
    ranking = ranking or Ranking.identity(model.n)
    canon = apply_ranking(model, ranking)
    _validate(canon)
    components = [int(c) for c in components]
    if any(not 0 <= c < model.n for c in components):
        raise DomainError(f"components must lie in 0..{model.n - 1}, got {components}")
    # canonical position of each requested component
    where = np.asarray(ranking.inverse().order)[components] if components else np.array([], dtype=int)
    positions = np.unique(where)
    # Work in coordinates centred on the average prior mean so that a common
    # shift of mu cancels exactly and x**2 does not lose precision.
    center = float(np.mean(canon.mu))
    mean, var, log_b = _ratio_moments(canon, center, positions, spec, rescale, workers)
    pick = np.searchsorted(positions, where)
    mean, var = mean[pick], var[pick]
    return ConditionalMoments(mean, var + mean * mean, var, log_b)


def conditional_moments_all_n(
    models: Sequence[UniformCorrelationModel],
    rankings: Sequence[Ranking] | None = None,
    spec: QuadratureSpec | None = None,
    *,
    workers: int = 1,
) -> list[ConditionalMoments]:
    """Run :func:`conditional_moments` over a family of models (e.g. a sweep in n).

    ``rankings`` defaults to the identity for every model. Errors are
    re-raised with the offending dimension prepended.
    """
    if rankings is None:
        rankings = [None] * len(models)
    if len(rankings) != len(models):
        raise DomainError(f"{len(models)} models but {len(rankings)} rankings")
    out = []
    for model, ranking in zip(models, rankings):
        try:
            out.append(conditional_moments(model, ranking, spec, workers=workers))
        except (DegenerateModelError, NumericalError, DomainError) as exc:
            raise type(exc)(f"n={model.n}: {exc}") from exc
    return out
