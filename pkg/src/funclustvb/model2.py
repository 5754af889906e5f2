"""Coordinate-ascent variational Bayes with a random intercept per curve.

Each curve is ``Y_i | Z_i = k, a_i ~ MVN(B phi_k + a_i 1, I / tau_k)`` with
``a_i ~ N(0, 1 / tau_a)`` and ``tau_a ~ Gamma(alpha0, beta0)``. One sweep runs
A -> Sigma -> m -> sigma2_a -> mu_a -> R -> beta -> d -> p, then the ELBO.
"""

from __future__ import annotations

import numpy as np

from .core import (
    FitResult,
    FunctionalDataset,
    PriorConfig,
    SpecialFn,
    VariationalState,
    as_matrix,
    expected_log_pi,
    expected_log_tau,
    hard_assignments,
    quadform_table,
    softmax_rows,
)
from .errors import ShapeError
from .model1 import (
    DEFAULT_MAX_ITER,
    DEFAULT_THRESHOLD,
    _validate,
    diff_phi,
    diff_pi,
    diff_tau,
    dirichlet_normalizer_gap,
    entropy_z,
    initial_state,
    responsibility_logits,
    run_cavi,
    update_A_star,
    update_d_star,
    update_m_star,
    update_R_star,
    update_Sigma_star,
)

# Model 2 shares these with Model 1; shape_tau plays the role of b0.
update_d_star_m2 = update_d_star
update_A_star_m2 = update_A_star
update_R_star_m2 = update_R_star


def update_Sigma_m_star_m2(p_star_col, E_tau: float, B, Y_star, v0: float, m0):
    """``(Sigma_k, m_k)`` from intercept-adjusted curves ``Y_star = Y - mu_a 1'``."""
    Sigma = update_Sigma_star(p_star_col, E_tau, B, v0)
    return Sigma, update_m_star(p_star_col, E_tau, B, Y_star, v0, m0, Sigma)


def update_a_posteriors(Y, B, m_star, p_star, E_tau, E_tau_a: float):
    """Gaussian factors of the intercepts.

    Returns ``(mu_a, sigma2_a)`` with
    ``sigma2_a_i = (n sum_k p_ik E[tau_k] + E[tau_a])^-1`` and
    ``mu_a_i = sigma2_a_i sum_k p_ik E[tau_k] 1'(Y_i - B m_k)``.
    """
    B = as_matrix(B)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    p_star = np.asarray(p_star, dtype=float)
    E_tau = np.asarray(E_tau, dtype=float).ravel()
    if not E_tau_a > 0:
        raise ValueError("E_tau_a must be positive")
    if Y.shape[1] != B.shape[0] or p_star.shape != (Y.shape[0], E_tau.size):
        raise ShapeError(f"inconsistent shapes: Y {Y.shape}, B {B.shape}, p {p_star.shape}")
    n = B.shape[0]
    weights = p_star * E_tau[None, :]                        # N x K
    sigma2 = 1.0 / (n * weights.sum(axis=1) + E_tau_a)
    resid_sums = Y.sum(axis=1)[:, None] - (np.asarray(m_star) @ B.T).sum(axis=1)[None, :]
    mu = sigma2 * np.sum(weights * resid_sums, axis=1)
    return mu, sigma2


def update_tau_a_posterior(mu_a, sigma2_a, alpha0: float, beta0: float, N: int):
    """Gamma parameters ``(alpha*, beta*)`` of the intercept precision."""
    mu_a = np.asarray(mu_a, dtype=float)
    sigma2_a = np.asarray(sigma2_a, dtype=float)
    alpha = alpha0 + 0.5 * N
    beta = beta0 + 0.5 * float(np.sum(sigma2_a + mu_a ** 2))
    return alpha, beta


def update_p_star_m2(Y, B, state: VariationalState) -> np.ndarray:
    B = as_matrix(B)
    quad = quadform_table(Y, B, state.m_star, state.Sigma_star, state.mu_a, state.sigma2_a)
    logits = responsibility_logits(B.shape[0], state.E_log_tau, state.E_tau, state.E_log_pi, quad)
    return softmax_rows(logits)


# ---------------------------------------------------------------------------
# ELBO
# ---------------------------------------------------------------------------

def expected_loglik_m2(Y, B, state: VariationalState) -> float:
    n = as_matrix(B).shape[0]
    quad = quadform_table(Y, B, state.m_star, state.Sigma_star, state.mu_a, state.sigma2_a)
    per = 0.5 * n * state.E_log_tau[None, :] - 0.5 * state.E_tau[None, :] * quad
    return float(np.sum(state.p_star * per))


def diff_a(state: VariationalState) -> float:
    """``-1/2 E[tau_a] sum E[a_i^2] + sum log sigma_a_i``."""
    E_a2 = state.sigma2_a + state.mu_a ** 2
    return float(-0.5 * state.E_tau_a * np.sum(E_a2) + 0.5 * np.sum(np.log(state.sigma2_a)))


def diff_tau_a(state: VariationalState, priors: PriorConfig) -> float:
    alpha, beta = state.alpha_star, state.beta_star
    E_log = float(expected_log_tau(alpha, beta))
    return float((priors.alpha0 - alpha) * E_log - (priors.beta0 - beta) * state.E_tau_a
                 - alpha * np.log(beta))


def elbo_terms_m2(Y, B, state: VariationalState, priors: PriorConfig,
                  special_fn=SpecialFn.EXACT) -> dict[str, float]:
    """Named ELBO parts.

    Exact mode adds ``dirichlet_norm`` and ``tau_a_norm``, the
    ``N/2 E[log tau_a]`` contributed by the intercept prior density; with
    both, the total is the ELBO up to an iteration-invariant constant.
    """
    special_fn = SpecialFn(special_fn)
    E_log_pi = expected_log_pi(state.d_star)
    terms = {
        "loglik": expected_loglik_m2(Y, B, state),
        "diff_z": float(np.sum(state.p_star * E_log_pi[None, :])) + entropy_z(state.p_star),
        "diff_phi": diff_phi(state, priors),
        "diff_tau": diff_tau(state, priors, special_fn),
        "diff_pi": diff_pi(state, priors),
        "diff_a": diff_a(state),
        "diff_tau_a": diff_tau_a(state, priors),
    }
    if special_fn is SpecialFn.EXACT:
        terms["dirichlet_norm"] = dirichlet_normalizer_gap(state, priors)
        N = state.mu_a.size
        terms["tau_a_norm"] = 0.5 * N * float(expected_log_tau(state.alpha_star, state.beta_star))
    return terms


def compute_elbo_m2(Y, B, state: VariationalState, priors: PriorConfig,
                    special_fn=SpecialFn.EXACT) -> float:
    return float(sum(elbo_terms_m2(Y, B, state, priors, special_fn).values()))


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def initial_state_m2(p_star: np.ndarray, priors: PriorConfig) -> VariationalState:
    """Model 1 start plus ``mu_a = 0``, ``beta* = beta0`` and ``alpha* = alpha0 + N/2``."""
    state = initial_state(p_star, priors)
    N = state.p_star.shape[0]
    state.alpha_star = priors.alpha0 + 0.5 * N
    state.beta_star = float(priors.beta0)
    return state


def sweep_model2(Y, B, priors: PriorConfig, state: VariationalState) -> VariationalState:
    """One full coordinate-ascent sweep; returns a new state."""
    B = as_matrix(B)
    n = B.shape[0]
    p = state.p_star
    v0 = priors.v0_per_cluster

    A = update_A_star(p, n, priors.shape_tau)
    E_tau = A / state.R_star                  # uses the previous rates
    Y_star = Y - state.mu_a[:, None]
    Sigma = np.empty_like(state.Sigma_star)
    m = np.empty_like(state.m_star)
    for k in range(priors.K):
        Sigma[k], m[k] = update_Sigma_m_star_m2(p[:, k], E_tau[k], B, Y_star, v0[k], priors.m0[k])
    mu_a, sigma2_a = update_a_posteriors(Y, B, m, p, E_tau, state.alpha_star / state.beta_star)
    quad = quadform_table(Y, B, m, Sigma, mu_a, sigma2_a)
    R = priors.rate_tau + 0.5 * np.sum(p * quad, axis=0)
    _, beta = update_tau_a_posterior(mu_a, sigma2_a, priors.alpha0, priors.beta0, Y.shape[0])
    d = update_d_star(p, priors.d0)

    new = VariationalState(p_star=p, d_star=d, m_star=m, Sigma_star=Sigma, A_star=A, R_star=R,
                           mu_a=mu_a, sigma2_a=sigma2_a,
                           alpha_star=state.alpha_star, beta_star=beta)
    logits = responsibility_logits(n, new.E_log_tau, new.E_tau, new.E_log_pi, quad)
    new.p_star = softmax_rows(logits)
    return new


def fit_model2(data: FunctionalDataset, B, priors: PriorConfig, init_p,
               threshold: float = DEFAULT_THRESHOLD, max_iter: int = DEFAULT_MAX_ITER,
               special_fn=SpecialFn.EXACT, seed: int | None = None,
               callback=None) -> FitResult:
    """Fit the random-intercept model from initial responsibilities ``init_p``.

    Stopping and callbacks behave as in :func:`funclustvb.model1.fit_model1`.
    ``mean_curves`` are the cluster curves ``B m_k`` without intercepts.
    """
    special_fn = SpecialFn(special_fn)
    B, init_p = _validate(data, B, priors, init_p, threshold)
    Y = data.Y
    state, trace, converged = run_cavi(
        lambda s: sweep_model2(Y, B, priors, s),
        lambda s: compute_elbo_m2(Y, B, s, priors, special_fn),
        initial_state_m2(init_p, priors), threshold, max_iter, callback)
    return FitResult(
        assignments=hard_assignments(state.p_star),
        state=state,
        mean_curves=state.m_star @ B.T,
        elbo_trace=trace,
        iterations=len(trace),
        converged=converged,
        seed=seed,
        model="m2",
        special_fn=special_fn,
        elbo_parts=elbo_terms_m2(Y, B, state, priors, special_fn),
    )
