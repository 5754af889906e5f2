"""Randomized property checks shared by the property and acceptance suites.

Each check sweeps a batch of tiny random instances and returns a small
report; callers decide how to assert on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from funclustvb import model1, model2
from funclustvb.basis import basis_matrix
from funclustvb.core import PriorConfig, SpecialFn, quadform_table, softmax_rows
from funclustvb.selection import dic_from_parts, expected_loglik, plugin_loglik

import oracles
from conftest import tiny_instance

FITTERS = {"m1": model1.fit_model1, "m2": model2.fit_model2}


@dataclass
class Report:
    checked: int = 0
    failures: list = field(default_factory=list)
    worst: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures


def elbo_monotonicity(model="m1", instances=200, rel_tol=1e-8, special_fn="exact",
                      max_iter=40, first_seed=0) -> Report:
    """Worst relative one-step ELBO drop over random starts on tiny instances."""
    rep = Report()
    for seed in range(first_seed, first_seed + instances):
        data, B, pr, st = tiny_instance(seed)
        fit = FITTERS[model](data, B, pr, st.p_star, threshold=0.0, max_iter=max_iter,
                             special_fn=special_fn)
        tr = fit.elbo_trace
        rel = np.diff(tr) / np.maximum(np.abs(tr[1:]), 1.0)
        rep.checked += 1
        rep.worst = min(rep.worst, float(rel.min(initial=0.0)))
        if rel.size and rel.min() < -rel_tol:
            rep.failures.append((seed, float(rel.min())))
    return rep


def bookkeeping(model="m1", instances=50) -> Report:
    """Row sums of p* equal 1 and sum(d*) - sum(d0) equals N after every sweep."""
    rep = Report()
    for seed in range(instances):
        data, B, pr, st = tiny_instance(seed)
        bad = []

        def check(it, s, elbo):
            row_err = float(np.max(np.abs(s.p_star.sum(axis=1) - 1.0)))
            d_err = abs(s.d_star.sum() - pr.d0.sum() - data.N)
            rep.worst = max(rep.worst, row_err, d_err)
            if row_err > 1e-12 or d_err > 1e-9:
                bad.append(it)

        FITTERS[model](data, B, pr, st.p_star, threshold=0.0, max_iter=20, callback=check)
        rep.checked += 1
        if bad:
            rep.failures.append((seed, bad))
    return rep


def permutation_equivariance(model="m1", instances=30) -> Report:
    """Relabelling the start and the priors relabels the fit and nothing else."""
    rep = Report()
    for seed in range(instances):
        data, B, pr, st = tiny_instance(seed, K=3)
        perm = np.random.default_rng(seed).permutation(3)
        fit = FITTERS[model](data, B, pr, st.p_star, threshold=0.0, max_iter=15)
        alt = FITTERS[model](data, B, pr.permuted(perm), st.p_star[:, perm], threshold=0.0,
                             max_iter=15)
        errs = [
            np.max(np.abs(alt.state.p_star - fit.state.p_star[:, perm])),
            np.max(np.abs(alt.state.m_star - fit.state.m_star[perm])),
            np.max(np.abs(alt.state.R_star - fit.state.R_star[perm])),
            np.max(np.abs(alt.elbo_trace - fit.elbo_trace) / np.abs(fit.elbo_trace)),
        ]
        if model == "m2":
            errs.append(np.max(np.abs(alt.state.mu_a - fit.state.mu_a)))
        worst = float(max(errs))
        rep.checked += 1
        rep.worst = max(rep.worst, worst)
        # labels may differ only where a row of p* is tied to rounding
        same = np.array_equal(perm[alt.assignments - 1] + 1, fit.assignments)
        if worst > 1e-9 or not same:
            rep.failures.append((seed, worst))
    return rep


def _intercept_free(pr: PriorConfig) -> PriorConfig:
    return PriorConfig(K=pr.K, d0=pr.d0, m0=pr.m0, v0=pr.v0, shape_tau=pr.shape_tau,
                       rate_tau=pr.rate_tau, alpha0=1e14, beta0=1e-14)


def nesting(instances=20, sweeps=15, tol=1e-8) -> Report:
    """With tau_a concentrated at +inf the random-intercept fit reproduces Model 1."""
    rep = Report()
    for seed in range(instances):
        data, B, pr, st = tiny_instance(seed)
        pr = _intercept_free(pr)
        one = model1.fit_model1(data, B, pr, st.p_star, threshold=0.0, max_iter=sweeps)
        two = model2.fit_model2(data, B, pr, st.p_star, threshold=0.0, max_iter=sweeps)
        errs = [float(np.max(np.abs(getattr(two.state, f) - getattr(one.state, f))
                             / np.maximum(np.abs(getattr(one.state, f)), 1.0)))
                for f in ("p_star", "d_star", "m_star", "Sigma_star", "A_star", "R_star")]
        errs.append(float(np.max(np.abs(two.state.mu_a))))
        worst = max(errs)
        rep.checked += 1
        rep.worst = max(rep.worst, worst)
        if worst > tol or not np.array_equal(one.assignments, two.assignments):
            rep.failures.append((seed, worst))
    return rep


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))


def update_oracles(instances=25) -> Report:
    """Every update and objective against its loop-based oracle."""
    rep = Report()
    for seed in range(instances):
        data, B, pr, s = tiny_instance(seed)
        Y, Bv = data.Y, B.values
        n, K = data.n, pr.K
        errs = {}
        errs["d"] = _rel(model1.update_d_star(s.p_star, pr.d0),
                         [pr.d0[k] + sum(s.p_star[:, k]) for k in range(K)])
        errs["A"] = _rel(model1.update_A_star(s.p_star, n, pr.shape_tau),
                         [pr.shape_tau + n / 2 * sum(s.p_star[:, k]) for k in range(K)])
        quad = quadform_table(Y, B, s.m_star, s.Sigma_star)
        errs["quad"] = _rel(quad, [[oracles.quadform(Y[i], Bv, s.m_star[k], s.Sigma_star[k])
                                    for k in range(K)] for i in range(data.N)])
        errs["R"] = max(_rel(model1.update_R_star(s.p_star[:, k], pr.rate_tau, quad[:, k]),
                             pr.rate_tau + 0.5 * sum(
                                 s.p_star[i, k] * oracles.quadform(Y[i], Bv, s.m_star[k],
                                                                   s.Sigma_star[k])
                                 for i in range(data.N)))
                        for k in range(K))
        sig, mm = 0.0, 0.0
        for k in range(K):
            S = model1.update_Sigma_star(s.p_star[:, k], s.E_tau[k], B, pr.v0)
            sig = max(sig, _rel(S, oracles.sigma_star(s.p_star[:, k], s.E_tau[k], Bv, pr.v0)))
            m = model1.update_m_star(s.p_star[:, k], s.E_tau[k], B, Y, pr.v0, pr.m0[k], S)
            mm = max(mm, _rel(m, oracles.m_star(s.p_star[:, k], s.E_tau[k], Bv, Y, pr.v0,
                                                pr.m0[k])))
        errs["Sigma"], errs["m"] = sig, mm
        logits = model1.responsibility_logits(n, s.E_log_tau, s.E_tau, s.E_log_pi, quad)
        errs["p"] = _rel(softmax_rows(logits),
                         oracles.responsibilities(Y, Bv, s.m_star, s.Sigma_star, s.A_star,
                                                  s.R_star, s.d_star))
        errs["p_m2"] = _rel(model2.update_p_star_m2(Y, B, s),
                            oracles.responsibilities(Y, Bv, s.m_star, s.Sigma_star, s.A_star,
                                                     s.R_star, s.d_star, s.mu_a, s.sigma2_a))
        mu, s2 = model2.update_a_posteriors(Y, B, s.m_star, s.p_star, s.E_tau, s.E_tau_a)
        o_mu, o_s2 = oracles.intercepts(Y, Bv, s.m_star, s.p_star, s.E_tau, s.E_tau_a)
        errs["mu_a"], errs["sigma2_a"] = _rel(mu, o_mu), _rel(s2, o_s2)
        alpha, beta = model2.update_tau_a_posterior(s.mu_a, s.sigma2_a, pr.alpha0, pr.beta0,
                                                    data.N)
        errs["tau_a"] = max(_rel(alpha, pr.alpha0 + data.N / 2),
                            _rel(beta, pr.beta0 + 0.5 * sum(s.sigma2_a[i] + s.mu_a[i] ** 2
                                                            for i in range(data.N))))
        for mode, exact in ((SpecialFn.EXACT, True), (SpecialFn.PAPER_APPROX, False)):
            errs[f"elbo_m1_{mode.value}"] = _rel(model1.compute_elbo_m1(Y, B, s, pr, mode),
                                                 oracles.elbo_m1(Y, Bv, s, pr, exact))
            errs[f"elbo_m2_{mode.value}"] = _rel(model2.compute_elbo_m2(Y, B, s, pr, mode),
                                                 oracles.elbo_m2(Y, Bv, s, pr, exact))
        errs["dic"] = _rel(dic_from_parts(expected_loglik(Y, B, s), plugin_loglik(Y, B, s)),
                           oracles.dic(Y, Bv, s))
        worst_name = max(errs, key=errs.get)
        rep.checked += 1
        rep.worst = max(rep.worst, errs[worst_name])
        if errs[worst_name] > 1e-10:
            rep.failures.append((seed, worst_name, errs[worst_name]))
    return rep


def spline_identities(cases=60) -> Report:
    """Partition of unity and equality with the Cox-de Boor recursion."""
    rep = Report()
    rng = np.random.default_rng(0)
    for _ in range(cases):
        order = int(rng.integers(1, 6))
        M = int(rng.integers(order, order + 8))
        lo = float(rng.uniform(-5, 5))
        hi = lo + float(rng.uniform(0.5, 30))
        grid = np.concatenate([[lo, hi], rng.uniform(lo, hi, 15)])
        Bv = basis_matrix(lo, hi, M, grid, order).values
        ref = np.array([oracles.basis_row(lo, hi, M, order, t) for t in grid])
        err = max(float(np.max(np.abs(Bv.sum(axis=1) - 1.0))), float(np.max(np.abs(Bv - ref))))
        rep.checked += 1
        rep.worst = max(rep.worst, err)
        if err > 1e-12:
            rep.failures.append((order, M, lo, hi, err))
    return rep
