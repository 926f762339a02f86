"""Standard normal special functions.

The pdf functions accept scalars or numpy arrays. The cdf uses the
complementary error function so that the lower tail keeps full relative
precision.
"""

import math
from statistics import NormalDist

import numpy as np
from scipy import special

from .errors import DomainError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_HALF = math.sqrt(0.5)


def std_normal_pdf(x):
    """Density of N(0, 1)."""
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def std_normal_cdf(x):
    """Distribution function of N(0, 1), ``0.5 * erfc(-x / sqrt(2))``."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) * _SQRT_HALF)[()]


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf`.

    Starts from the rational approximation in :class:`statistics.NormalDist`
    and polishes with Newton steps on the erfc-based cdf.

    Raises
    ------
    DomainError
        If ``p`` is not strictly inside (0, 1).
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    # Work in the lower tail, where the cdf has full relative precision.
    q = min(p, 1.0 - p)
    x = NormalDist().inv_cdf(q)
    for _ in range(3):
        step = (float(std_normal_cdf(x)) - q) / float(std_normal_pdf(x))
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x if p < 0.5 else -x


def normal_pdf(x, mean, sd):
    """Density of N(mean, sd**2)."""
    if np.any(np.asarray(sd) <= 0):
        raise DomainError(f"standard deviation must be positive, got {sd!r}")
    return std_normal_pdf((np.asarray(x, dtype=float) - mean) / sd) / sd
