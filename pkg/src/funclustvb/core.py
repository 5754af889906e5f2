"""Shared data model and expectation helpers for both variational engines."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .basis import BasisMatrix
from .errors import DataError, ShapeError
from .special import digamma


class SpecialFn(str, Enum):
    """How the Gamma-entropy part of the ELBO is evaluated."""

    EXACT = "exact"
    PAPER_APPROX = "paper_approx"


def as_matrix(B) -> np.ndarray:
    """Accept a BasisMatrix or a bare 2-D array."""
    values = B.values if isinstance(B, BasisMatrix) else np.asarray(B, dtype=float)
    if values.ndim != 2:
        raise ShapeError(f"basis matrix must be 2-D, got shape {values.shape}")
    return values


@dataclass(frozen=True)
class FunctionalDataset:
    """``N`` curves observed on a shared grid of ``n`` points.

    ``true_labels`` (1..K) is carried along for evaluation only.
    """

    Y: np.ndarray
    grid: np.ndarray
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        grid = np.asarray(self.grid, dtype=float).ravel()
        if Y.ndim != 2:
            raise ShapeError(f"Y must be N x n, got shape {Y.shape}")
        N, n = Y.shape
        if N < 1 or n < 2:
            raise ShapeError(f"need at least one curve and two grid points, got {Y.shape}")
        if grid.size != n:
            raise ShapeError(f"grid has {grid.size} points but curves have {n}")
        if not np.all(np.isfinite(Y)) or not np.all(np.isfinite(grid)):
            raise DataError("Y and grid must be finite")
        if np.any(np.diff(grid) <= 0):
            raise DataError("grid must be strictly increasing")
        labels = self.true_labels
        if labels is not None:
            labels = np.asarray(labels).astype(int).ravel()
            if labels.size != N:
                raise ShapeError(f"{labels.size} labels for {N} curves")
            if labels.min() < 1:
                raise DataError("labels must be 1-based")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "true_labels", labels)

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def n(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters shared by both models.

    ``shape_tau`` is the Gamma shape of each cluster precision (``a0`` in
    Model 1, ``b0`` in Model 2) and ``rate_tau`` its rate. ``alpha0`` and
    ``beta0`` are only read by Model 2. ``v0`` is a scalar precision or one
    precision per cluster.
    """

    K: int
    d0: np.ndarray
    m0: np.ndarray
    v0: float | np.ndarray
    shape_tau: float
    rate_tau: float
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        K = int(self.K)
        if K < 1:
            raise DataError(f"K must be >= 1, got {self.K}")
        d0 = np.broadcast_to(np.asarray(self.d0, dtype=float), (K,)).copy()
        m0 = np.atleast_2d(np.asarray(self.m0, dtype=float))
        if m0.shape[0] == 1 and K > 1:
            m0 = np.repeat(m0, K, axis=0)
        if m0.shape[0] != K:
            raise ShapeError(f"m0 needs {K} rows, got {m0.shape[0]}")
        v0 = np.asarray(self.v0, dtype=float)
        if v0.ndim not in (0, 1) or (v0.ndim == 1 and v0.size != K):
            raise ShapeError("v0 must be a scalar or have one entry per cluster")
        scalars = [self.shape_tau, self.rate_tau, self.alpha0, self.beta0]
        if np.any(d0 <= 0) or np.any(v0 <= 0) or any(not s > 0 for s in scalars):
            raise DataError("all prior hyperparameters must be strictly positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "v0", float(v0) if v0.ndim == 0 else v0.copy())

    @property
    def M(self) -> int:
        return self.m0.shape[1]

    @property
    def v0_per_cluster(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.v0, dtype=float), (self.K,)).copy()

    def permuted(self, order) -> "PriorConfig":
        """Reorder cluster-indexed fields, ``new[k] = old[order[k]]``."""
        order = np.asarray(order)
        v0 = self.v0 if np.ndim(self.v0) == 0 else self.v0[order]
        return dataclasses.replace(self, d0=self.d0[order], m0=self.m0[order], v0=v0)


@dataclass
class VariationalState:
    """Parameters of every variational factor.

    Model 1 leaves ``mu_a`` and ``sigma2_a`` at zero and the ``tau_a``
    parameters unset.
    """

    p_star: np.ndarray
    d_star: np.ndarray
    m_star: np.ndarray
    Sigma_star: np.ndarray
    A_star: np.ndarray
    R_star: np.ndarray
    mu_a: np.ndarray
    sigma2_a: np.ndarray
    alpha_star: float | None = None
    beta_star: float | None = None

    @property
    def E_tau(self) -> np.ndarray:
        return self.A_star / self.R_star

    @property
    def E_log_tau(self) -> np.ndarray:
        return expected_log_tau(self.A_star, self.R_star)

    @property
    def E_log_pi(self) -> np.ndarray:
        return expected_log_pi(self.d_star)

    @property
    def E_tau_a(self) -> float:
        return self.alpha_star / self.beta_star

    def copy(self) -> "VariationalState":
        return dataclasses.replace(
            self, **{f.name: np.copy(getattr(self, f.name))
                     for f in dataclasses.fields(self)
                     if isinstance(getattr(self, f.name), np.ndarray)})

    def check(self, atol: float = 1e-12) -> None:
        """Assert the structural invariants. Used by tests and debug runs."""
        rows = self.p_star.sum(axis=1)
        assert np.all(self.p_star >= 0), "negative responsibility"
        assert np.allclose(rows, 1.0, rtol=0, atol=atol), "responsibility rows do not sum to 1"
        assert np.all(self.A_star > 0) and np.all(self.R_star > 0), "Gamma parameters not positive"
        for S in self.Sigma_star:
            assert np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max()))
            np.linalg.cholesky(S)
        if self.beta_star is not None:
            assert np.all(self.sigma2_a > 0) and self.beta_star > 0


@dataclass
class FitResult:
    """Outcome of one variational fit. ``assignments`` are 1-based."""

    assignments: np.ndarray
    state: VariationalState
    mean_curves: np.ndarray
    elbo_trace: np.ndarray
    iterations: int
    converged: bool
    seed: int | None = None
    model: str = "m1"
    special_fn: SpecialFn = SpecialFn.EXACT
    elbo_parts: dict = field(default_factory=dict)

    @property
    def elbo(self) -> float:
        return float(self.elbo_trace[-1])

    @property
    def K(self) -> int:
        return self.state.p_star.shape[1]


def expected_log_tau(A, R):
    return digamma(A) - np.log(R)


def expected_log_pi(d):
    d = np.asarray(d, dtype=float)
    return digamma(d) - digamma(d.sum())


def hard_assignments(p_star: np.ndarray) -> np.ndarray:
    """Row argmax, ties to the lowest index, returned 1-based."""
    return np.argmax(p_star, axis=1) + 1


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def _check_quadform_shapes(Y_i, B, m_k, Sigma_k):
    Y_i = np.asarray(Y_i, dtype=float).ravel()
    B = as_matrix(B)
    m_k = np.asarray(m_k, dtype=float).ravel()
    Sigma_k = np.asarray(Sigma_k, dtype=float)
    n, M = B.shape
    if Y_i.size != n or m_k.size != M or Sigma_k.shape != (M, M):
        raise ShapeError(
            f"inconsistent shapes: Y {Y_i.shape}, B {B.shape}, m {m_k.shape}, Sigma {Sigma_k.shape}")
    return Y_i, B, m_k, Sigma_k


def expected_quadform_m1(Y_i, B, m_k, Sigma_k) -> float:
    """``E ||Y_i - B phi||^2`` for ``phi ~ MVN(m_k, Sigma_k)``."""
    Y_i, B, m_k, Sigma_k = _check_quadform_shapes(Y_i, B, m_k, Sigma_k)
    resid = Y_i - B @ m_k
    return float(np.sum((B @ Sigma_k) * B) + resid @ resid)


def expected_quadform_m2(Y_i, B, m_k, Sigma_k, mu_ai: float, sigma2_ai: float) -> float:
    """``E ||Y_i - B phi - a 1||^2`` with independent ``phi`` and ``a ~ N(mu, sigma2)``."""
    Y_i, B, m_k, Sigma_k = _check_quadform_shapes(Y_i, B, m_k, Sigma_k)
    if sigma2_ai < 0:
        raise DataError("sigma2_ai must be nonnegative")
    resid = Y_i - B @ m_k - mu_ai
    return float(np.sum((B @ Sigma_k) * B) + Y_i.size * sigma2_ai + resid @ resid)


def quadform_table(Y, B, m_star, Sigma_star, mu_a=None, sigma2_a=None) -> np.ndarray:
    """All ``N x K`` expected squared residuals at once.

    Without ``mu_a``/``sigma2_a`` this is the Model 1 expectation.
    """
    B = as_matrix(B)
    n = B.shape[0]
    fitted = m_star @ B.T                                # K x n
    traces = np.einsum("nm,kml,nl->k", B, Sigma_star, B)  # trace(B S_k B^T)
    Yc = Y if mu_a is None else Y - np.asarray(mu_a)[:, None]
    resid = Yc[:, None, :] - fitted[None, :, :]
    out = np.einsum("ikj,ikj->ik", resid, resid) + traces[None, :]
    if sigma2_a is not None:
        out = out + n * np.asarray(sigma2_a)[:, None]
    return out
