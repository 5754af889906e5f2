"""Deviance information criterion for independent-error fits, and a K scan."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import FitResult, FunctionalDataset, PriorConfig, as_matrix, quadform_table
from .errors import DataError, FunclustError, NotConvergedError
from .initialization import InitConfig, default_priors, kmeans_init
from .model1 import DEFAULT_MAX_ITER, DEFAULT_THRESHOLD, fit_model1

_LOG_2PI = float(np.log(2.0 * np.pi))
# restarts per K; fewer lets over-split local optima through to the DIC table
DEFAULT_FITS_PER_K = 10


def expected_loglik(Y, B, state) -> float:
    """``E_q log p(Y | Z, phi, tau)`` including the Gaussian constant."""
    B = as_matrix(B)
    n = B.shape[0]
    quad = quadform_table(Y, B, state.m_star, state.Sigma_star)
    per = 0.5 * n * (state.E_log_tau[None, :] - _LOG_2PI) - 0.5 * state.E_tau[None, :] * quad
    return float(np.sum(state.p_star * per))


def plugin_loglik(Y, B, state) -> float:
    """Log-likelihood at the posterior means, ``Z`` averaged over ``p*``.

    ``log tau_k`` is replaced by ``log(A_k / R_k)`` and ``phi_k`` by ``m_k``.
    The mixing weights do not enter ``p(Y | Z, phi, tau)``.
    """
    B = as_matrix(B)
    n = B.shape[0]
    tau_bar = state.A_star / state.R_star
    resid = Y[:, None, :] - (state.m_star @ B.T)[None, :, :]
    sq = np.einsum("ikj,ikj->ik", resid, resid)
    per = 0.5 * n * (np.log(tau_bar)[None, :] - _LOG_2PI) - 0.5 * tau_bar[None, :] * sq
    return float(np.sum(state.p_star * per))


def dic_from_parts(expected: float, plugin: float) -> float:
    """``-4 E[log p] + 2 log p(theta_bar)``."""
    return -4.0 * expected + 2.0 * plugin


def dic(fit: FitResult, data: FunctionalDataset, B) -> float:
    """DIC of a converged independent-error fit (lower is better).

    Raises:
        NotConvergedError: if the fit stopped at its iteration cap.
        DataError: for random-intercept fits, which have no DIC here.
    """
    if fit.model != "m1":
        raise DataError("DIC is only defined for the independent-error model")
    if not fit.converged:
        raise NotConvergedError(
            f"fit did not converge after {fit.iterations} iterations; raise max_iter or threshold")
    return dic_from_parts(expected_loglik(data.Y, B, fit.state),
                          plugin_loglik(data.Y, B, fit.state))


PriorFactory = Callable[[FunctionalDataset, np.ndarray, int, np.ndarray], PriorConfig]


def _default_factory(data, B, K, init_p):
    return default_priors(data, B, K, init_p)


@dataclass
class KScanRow:
    K: int
    dic: float | None
    fit: FitResult | None
    error: str | None = None


@dataclass
class KScanResult:
    """Per-K rows of a scan.

    ``best_K`` is the smallest K whose DIC lies within ``dic_tol`` of the
    minimum. Fits whose extra clusters empty out reproduce the smaller
    model's DIC up to rounding, and the tolerance resolves such ties.
    """

    rows: list[KScanRow] = field(default_factory=list)
    dic_tol: float = 1.0

    @property
    def best_K(self) -> int | None:
        ok = [r for r in self.rows if r.dic is not None and np.isfinite(r.dic)]
        if not ok:
            return None
        floor = min(r.dic for r in ok)
        return min(r.K for r in ok if r.dic <= floor + self.dic_tol)

    def table(self) -> list[tuple[int, float | None]]:
        return [(r.K, r.dic) for r in self.rows]


def _unique_in_order(values):
    seen, out = set(), []
    for v in values:
        v = int(v)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _fit_once(data, B, K, prior_factory, restart_seed, threshold, max_iter, special_fn):
    init_p = kmeans_init(data, InitConfig(K=K, seed=restart_seed))
    priors = prior_factory(data, B, K, init_p)
    return fit_model1(data, B, priors, init_p, threshold=threshold, max_iter=max_iter,
                      special_fn=special_fn, seed=restart_seed)


def k_scan(data: FunctionalDataset, B, K_range, fits_per_K: int = DEFAULT_FITS_PER_K,
           seed: int = 0, prior_factory: PriorFactory | None = None,
           threshold: float = DEFAULT_THRESHOLD, max_iter: int = DEFAULT_MAX_ITER,
           special_fn="exact", workers: int = 1, dic_tol: float = 1.0) -> KScanResult:
    """Fit each K ``fits_per_K`` times, keep the highest-ELBO fit and score it.

    Restart ``r`` for ``K`` seeds k-means from ``SeedSequence(seed, spawn_key=(K, r))``,
    so results for a given K do not depend on the rest of ``K_range``.
    ``prior_factory(data, B, K, init_p)`` builds the priors for a restart.
    A failure for one K is recorded in its row and the scan carries on.
    """
    Ks = _unique_in_order(K_range)
    if not Ks:
        raise DataError("K_range is empty")
    if dic_tol < 0:
        raise DataError("dic_tol must be nonnegative")
    if fits_per_K < 1:
        raise DataError("fits_per_K must be >= 1")
    factory = prior_factory or _default_factory
    B = as_matrix(B)
    jobs = []
    for K in Ks:
        for r in range(fits_per_K):
            ss = np.random.SeedSequence(int(seed), spawn_key=(K, r))
            jobs.append((K, int(ss.generate_state(1)[0])))

    def run(job):
        K, s = job
        try:
            return _fit_once(data, B, K, factory, s, threshold, max_iter, special_fn)
        except FunclustError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        outcomes = list(pool.map(run, jobs))

    result = KScanResult(dic_tol=dic_tol)
    for K in Ks:
        fits = [o for (k, _), o in zip(jobs, outcomes) if k == K]
        good = [f for f in fits if isinstance(f, FitResult)]
        if not good:
            result.rows.append(KScanRow(K, None, None, "; ".join(str(e) for e in fits)))
            continue
        best = max(good, key=lambda f: f.elbo)
        try:
            result.rows.append(KScanRow(K, dic(best, data, B), best))
        except FunclustError as exc:
            result.rows.append(KScanRow(K, None, best, str(exc)))
    return result
