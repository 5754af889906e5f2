import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from funclustvb import model1, model2, simgen
from funclustvb.basis import basis_matrix
from funclustvb.core import PriorConfig, SpecialFn
from funclustvb.errors import NumericFailure
from funclustvb.initialization import InitConfig, default_priors, kmeans_init
from funclustvb.metrics import mismatch_rate

import oracles
from conftest import tiny_instance


def test_shared_updates_are_model1():
    assert model2.update_A_star_m2 is model1.update_A_star
    p = np.zeros((4, 2))
    p[0, 0] = 1
    assert model2.update_A_star_m2(p, 4, 2.0)[0] == 4.0


def test_Sigma_m_with_zero_intercepts_is_model1(instance):
    data, B, pr, s = instance
    for k in range(pr.K):
        S2, m2 = model2.update_Sigma_m_star_m2(s.p_star[:, k], s.E_tau[k], B, data.Y, pr.v0, pr.m0[k])
        S1 = model1.update_Sigma_star(s.p_star[:, k], s.E_tau[k], B, pr.v0)
        m1 = model1.update_m_star(s.p_star[:, k], s.E_tau[k], B, data.Y, pr.v0, pr.m0[k], S1)
        np.testing.assert_array_equal(S2, S1)
        np.testing.assert_array_equal(m2, m1)


def test_Sigma_m_empty_cluster_is_prior():
    B = np.eye(3)
    S, m = model2.update_Sigma_m_star_m2(np.zeros(2), 3.0, B, np.ones((2, 3)), 4.0, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(S, np.eye(3) / 4)
    np.testing.assert_allclose(m, [1, 2, 3])


@given(st.integers(0, 10_000))
def test_Sigma_m_matches_solver_oracle(seed):
    data, B, pr, s = tiny_instance(seed)
    Y_star = data.Y - s.mu_a[:, None]
    for k in range(pr.K):
        S, m = model2.update_Sigma_m_star_m2(s.p_star[:, k], s.E_tau[k], B, Y_star, pr.v0, pr.m0[k])
        np.testing.assert_allclose(S, oracles.sigma_star(s.p_star[:, k], s.E_tau[k], B.values, pr.v0),
                                   rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(
            m, oracles.m_star(s.p_star[:, k], s.E_tau[k], B.values, Y_star, pr.v0, pr.m0[k]),
            rtol=1e-10, atol=1e-10)


def test_intercept_examples():
    B = np.zeros((4, 1))
    mu, s2 = model2.update_a_posteriors(np.ones((1, 4)), B, np.zeros((1, 1)), np.ones((1, 1)), [1.0], 1.0)
    assert s2[0] == pytest.approx(1 / 5)
    assert mu[0] == pytest.approx(4 / 5)
    mu, s2 = model2.update_a_posteriors(np.ones((1, 4)), B, np.zeros((1, 1)), np.ones((1, 1)), [1.0], 1e12)
    assert abs(mu[0]) < 1e-11 and s2[0] < 1e-11
    with pytest.raises(ValueError):
        model2.update_a_posteriors(np.ones((1, 4)), B, np.zeros((1, 1)), np.ones((1, 1)), [1.0], 0.0)


@given(st.integers(0, 10_000))
def test_intercepts_match_oracle(seed):
    data, B, pr, s = tiny_instance(seed)
    mu, s2 = model2.update_a_posteriors(data.Y, B, s.m_star, s.p_star, s.E_tau, s.E_tau_a)
    o_mu, o_s2 = oracles.intercepts(data.Y, B.values, s.m_star, s.p_star, s.E_tau, s.E_tau_a)
    np.testing.assert_allclose(mu, o_mu, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(s2, o_s2, rtol=1e-10)
    assert np.all(s2 <= 1 / s.E_tau_a)


def test_tau_a_examples():
    alpha, _ = model2.update_tau_a_posterior(np.zeros(10), np.ones(10), 1.0, 1.0, 10)
    assert alpha == 6
    _, beta = model2.update_tau_a_posterior([0.0, 1.0], [1.0, 2.0], 1.0, 1.0, 2)
    assert beta == 3
    _, beta = model2.update_tau_a_posterior(np.zeros(3), np.zeros(3), 0.7, 2.5, 3)
    assert beta == 2.5


@given(st.integers(0, 10_000))
def test_responsibilities_match_oracle(seed):
    data, B, pr, s = tiny_instance(seed)
    p = model2.update_p_star_m2(data.Y, B, s)
    o = oracles.responsibilities(data.Y, B.values, s.m_star, s.Sigma_star, s.A_star, s.R_star,
                                 s.d_star, s.mu_a, s.sigma2_a)
    np.testing.assert_allclose(p, o, atol=1e-10)


def test_diff_a_example(instance):
    _, _, _, s = instance
    s = s.copy()
    s.mu_a[:] = 0
    s.sigma2_a[:] = 1
    assert model2.diff_a(s) == pytest.approx(-0.5 * s.E_tau_a * s.mu_a.size)


@pytest.mark.parametrize("mode,exact", [(SpecialFn.EXACT, True), (SpecialFn.PAPER_APPROX, False)])
@given(seed=st.integers(0, 10_000))
def test_elbo_matches_oracle(mode, exact, seed):
    data, B, pr, s = tiny_instance(seed)
    got = model2.compute_elbo_m2(data.Y, B, s, pr, mode)
    assert got == pytest.approx(oracles.elbo_m2(data.Y, B.values, s, pr, exact), rel=1e-10, abs=1e-9)


def test_nesting_limit_matches_model1_sweep():
    for seed in range(10):
        data, B, pr, s = tiny_instance(seed)
        pr = PriorConfig(K=pr.K, d0=pr.d0, m0=pr.m0, v0=pr.v0, shape_tau=pr.shape_tau,
                         rate_tau=pr.rate_tau, alpha0=1e14, beta0=1e-14)
        s = s.copy()
        s.mu_a[:] = 0.0
        s.sigma2_a[:] = 1e-300
        s.alpha_star, s.beta_star = pr.alpha0 + data.N / 2, pr.beta0
        one = model1.sweep_model1(data.Y, B.values, pr, s)
        two = model2.sweep_model2(data.Y, B.values, pr, s)
        for name in ("p_star", "d_star", "m_star", "Sigma_star", "A_star", "R_star"):
            np.testing.assert_allclose(getattr(two, name), getattr(one, name), rtol=1e-8, atol=1e-8)
        assert np.max(np.abs(two.mu_a)) < 1e-8


def _fit_pair(scenario, seed):
    data, _ = simgen.generate(scenario, seed=seed)
    B = basis_matrix(0, 1, 6, data.grid)
    init = kmeans_init(data, InitConfig(K=3, seed=seed))
    pr = default_priors(data, B, 3, init)
    return data, B, pr, init


def test_zero_intercept_data_agrees_with_model1():
    # Scenario 3 is Scenario 8 with the intercept variance set to zero
    for seed in range(3):
        data, B, pr, init = _fit_pair(3, seed)
        a = model1.fit_model1(data, B, pr, init).assignments
        b = model2.fit_model2(data, B, pr, init).assignments
        assert np.mean(a == b) >= 0.95


def test_fit_invariants_hold_every_iteration():
    data, B, pr, init = _fit_pair(8, 1)
    prev = {"E_tau_a": (pr.alpha0 + data.N / 2) / pr.beta0}
    alphas = []

    def check(it, s, elbo):
        alphas.append(s.alpha_star)
        assert s.beta_star >= pr.beta0
        assert np.all(s.sigma2_a <= 1 / prev["E_tau_a"] * (1 + 1e-12))
        np.testing.assert_allclose(s.p_star.sum(axis=1), 1.0, atol=1e-12)
        prev["E_tau_a"] = s.E_tau_a

    fit = model2.fit_model2(data, B, pr, init, threshold=0, max_iter=25, callback=check)
    assert set(alphas) == {pr.alpha0 + data.N / 2}
    assert np.all(np.diff(fit.elbo_trace) >= -1e-8 * np.abs(fit.elbo_trace[1:]))
    assert mismatch_rate(fit.assignments, data.true_labels) <= 0.05
    assert fit.model == "m2"
    assert {"diff_a", "diff_tau_a", "tau_a_norm"} <= set(fit.elbo_parts)


def test_single_cluster_intercepts_are_shrunk_residual_means():
    data, B, pr, _ = _fit_pair(8, 2)
    pr = PriorConfig(K=1, d0=1.0, m0=pr.m0[:1], v0=pr.v0, shape_tau=1.0, rate_tau=1.0)
    fit = model2.fit_model2(data, B, pr, np.ones((data.N, 1)), threshold=1e-12, max_iter=500)
    s = fit.state
    assert np.all(s.p_star == 1.0)
    resid = data.Y - (B.values @ s.m_star[0])[None, :]
    shrink = data.n * s.E_tau[0] / (data.n * s.E_tau[0] + s.E_tau_a)
    np.testing.assert_allclose(s.mu_a, shrink * resid.mean(axis=1), rtol=1e-5, atol=1e-8)


def test_non_finite_elbo_raises(monkeypatch):
    data, B, pr, s = tiny_instance(4)
    monkeypatch.setattr(model2, "compute_elbo_m2", lambda *a, **k: np.inf)
    with pytest.raises(NumericFailure):
        model2.fit_model2(data, B, pr, s.p_star)
