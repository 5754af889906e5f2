"""Digamma and log-gamma, exact and in the truncated forms used for ELBO traces."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

# shift arguments above this before using the asymptotic series
_ASYMPTOTIC_FROM = 10.0

# B_2k / (2k) for k = 1..7
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def _positive(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} requires x > 0")
    return arr


def _scalar_or_array(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def digamma(x):
    """Digamma function for positive arguments.

    Small arguments are pushed up with psi(x) = psi(x + 1) - 1/x, then the
    asymptotic Bernoulli series is summed. Accepts scalars or arrays.
    """
    x = _positive(x, "digamma")
    shift = np.zeros_like(x)
    z = x.copy()
    while True:
        small = z < _ASYMPTOTIC_FROM
        if not np.any(small):
            break
        shift = shift - np.where(small, 1.0 / np.where(small, z, 1.0), 0.0)
        z = np.where(small, z + 1.0, z)
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    power = inv2.copy()
    for coef in _DIGAMMA_SERIES:
        series = series + coef * power
        power = power * inv2
    out = np.log(z) - 0.5 / z - series + shift
    return _scalar_or_array(out)


def log_gamma(x):
    """Exact log-gamma for positive arguments."""
    x = _positive(x, "log_gamma")
    if x.ndim == 0:
        return math.lgamma(float(x))
    return gammaln(x)


def digamma_closed_form(x):
    """Two-term asymptotic digamma: ``log x - 1/(2x)``."""
    x = _positive(x, "digamma_closed_form")
    return _scalar_or_array(np.log(x) - 0.5 / x)


def log_gamma_stirling(x):
    """Truncated Stirling series ``x log x - x - log(x)/2``.

    The ``log(2 pi)/2`` term is deliberately absent, so this sits roughly
    0.919 below the exact value for large ``x``.
    """
    x = _positive(x, "log_gamma_stirling")
    return _scalar_or_array(x * np.log(x) - x - 0.5 * np.log(x))
