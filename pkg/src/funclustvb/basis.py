"""Clamped B-spline bases evaluated by the Cox-de Boor recursion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidBasisError, InvalidDomainError, OutOfDomainError


@dataclass(frozen=True)
class BasisSpec:
    """A clamped B-spline basis of ``M`` functions of a given order on an interval.

    The knot vector repeats each endpoint ``order`` times and places
    ``M - order`` interior knots at equal spacing.
    """

    domain_lo: float
    domain_hi: float
    M: int
    order: int
    knots: np.ndarray

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.order:self.M]


@dataclass(frozen=True)
class BasisMatrix:
    """Basis values on a grid: ``values[j, m] = B_m(grid[j])``."""

    values: np.ndarray
    grid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def make_basis(domain_lo: float, domain_hi: float, M: int, order: int = 4) -> BasisSpec:
    """Build a clamped basis with equally spaced interior knots.

    Args:
        domain_lo: left end of the interval.
        domain_hi: right end of the interval.
        M: number of basis functions.
        order: spline order (4 = cubic).

    Raises:
        InvalidDomainError: if the interval is empty or not finite.
        InvalidBasisError: if ``order < 1`` or ``M < order``.
    """
    lo, hi = float(domain_lo), float(domain_hi)
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidDomainError(f"need domain_lo < domain_hi, got [{lo}, {hi}]")
    if int(order) != order or order < 1:
        raise InvalidBasisError(f"order must be a positive integer, got {order}")
    if int(M) != M or M < order:
        raise InvalidBasisError(f"need M >= order, got M={M}, order={order}")
    M, order = int(M), int(order)
    n_interior = M - order
    interior = lo + (hi - lo) * np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    knots.setflags(write=False)
    return BasisSpec(lo, hi, M, order, knots)


def eval_basis(spec: BasisSpec, grid) -> BasisMatrix:
    """Evaluate every basis function of ``spec`` at each grid point.

    The right endpoint belongs to the last knot span, so the final row at
    ``t = domain_hi`` is ``(0, ..., 0, 1)``.
    """
    t = np.asarray(grid, dtype=float).ravel()
    if t.size and (np.any(t < spec.domain_lo) or np.any(t > spec.domain_hi)
                   or not np.all(np.isfinite(t))):
        raise OutOfDomainError(
            f"grid points must lie in [{spec.domain_lo}, {spec.domain_hi}]")

    knots, k, M = spec.knots, spec.order, spec.M
    # span index s with knots[s] <= t < knots[s+1], restricted to non-empty spans
    span = np.searchsorted(knots, t, side="right") - 1
    span = np.clip(span, k - 1, M - 1)

    # order-1 values live on the span; raise the degree one step at a time,
    # keeping only the k functions that can be nonzero on each span
    local = np.zeros((t.size, k))
    local[:, 0] = 1.0
    for d in range(1, k):
        new = np.zeros_like(local)
        for r in range(d):
            left_idx = span - d + 1 + r
            right_idx = span + 1 + r
            t_left = knots[left_idx]
            t_right = knots[right_idx]
            denom = t_right - t_left
            with np.errstate(invalid="ignore", divide="ignore"):
                w = np.where(denom > 0, local[:, r] / np.where(denom > 0, denom, 1.0), 0.0)
            new[:, r] += w * (t_right - t)
            new[:, r + 1] += w * (t - t_left)
        local = new

    values = np.zeros((t.size, M))
    cols = span[:, None] - (k - 1) + np.arange(k)[None, :]
    np.put_along_axis(values, cols, local, axis=1)
    values.setflags(write=False)
    t.setflags(write=False)
    return BasisMatrix(values, t)


def basis_matrix(domain_lo: float, domain_hi: float, M: int, grid, order: int = 4) -> BasisMatrix:
    """Shortcut for ``eval_basis(make_basis(...), grid)``."""
    return eval_basis(make_basis(domain_lo, domain_hi, M, order), grid)
