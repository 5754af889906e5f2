"""Simulation replication: generate, initialise, fit, score, summarise.

Every replicate is a pure function of ``(config, replicate index)``. Seeds
for the k-means start, the k-means baseline and the prior perturbation come
from ``SeedSequence(seed, spawn_key=(replicate, STREAM_BASE + purpose))``;
curve noise uses ``(replicate, curve)`` keys, so streams never collide.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import simgen
from .basis import basis_matrix
from .core import PriorConfig, SpecialFn
from .errors import DataError, FunclustError
from .initialization import (
    InitConfig,
    align_to_prior,
    kmeans,
    least_squares_coefs,
    one_hot,
    prior_preset,
)
from .metrics import (
    ReplicationSummary,
    align_mean_curves,
    emse,
    mismatch_rate,
    summarize,
    v_measure,
)
from .model1 import DEFAULT_MAX_ITER, DEFAULT_THRESHOLD, fit_model1
from .model2 import fit_model2

STREAM_BASE = 1 << 40
_INIT, _BASELINE, _PRIOR = 1, 2, 3


@dataclass(frozen=True)
class ReplicationConfig:
    """Settings for :func:`run_replication`.

    The VB start is k-means++ with ``restarts`` restarts. The baseline
    column is a separate k-means run with ``baseline_seeding`` and
    ``baseline_restarts`` (default: one uniformly seeded start).
    """

    scenario: int
    replicates: int = 50
    seed: int = 0
    model: str = "m1"
    prior_preset: str = "setting1"
    K: int | None = None
    n_basis: int | None = None
    order: int = 4
    threshold: float = DEFAULT_THRESHOLD
    max_iter: int = DEFAULT_MAX_ITER
    special_fn: str = SpecialFn.EXACT.value
    restarts: int = 10
    baseline_restarts: int = 1
    baseline_seeding: str = "random"
    shape_tau: float = 1.0
    rate_tau: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0
    align_init: bool = True
    workers: int = 1

    def __post_init__(self):
        simgen.get_scenario(self.scenario)
        if self.replicates < 1:
            raise DataError("replicates must be >= 1")
        if self.model not in ("m1", "m2"):
            raise DataError(f"model must be 'm1' or 'm2', got {self.model!r}")
        SpecialFn(self.special_fn)

    @property
    def spec(self) -> simgen.ScenarioSpec:
        return simgen.get_scenario(self.scenario)

    @property
    def n_clusters(self) -> int:
        return self.K or self.spec.K

    @property
    def basis_size(self) -> int:
        return self.n_basis or self.spec.n_basis


@dataclass
class ReplicateOutcome:
    replicate: int
    vb_mismatch: float = float("nan")
    vb_v: float = float("nan")
    km_mismatch: float = float("nan")
    km_v: float = float("nan")
    init_mismatch: float = float("nan")
    iterations: int = 0
    converged: bool = False
    elbo: float = float("nan")
    runtime_s: float = 0.0
    aligned_means: np.ndarray | None = field(default=None, repr=False)
    error: str | None = None

    def row(self) -> dict:
        out = asdict(self)
        out.pop("aligned_means")
        return out


@dataclass
class ReplicationReport:
    config: ReplicationConfig
    outcomes: list[ReplicateOutcome]
    vb: ReplicationSummary
    kmeans: ReplicationSummary
    true_means: np.ndarray
    emse: np.ndarray                   # K x n pointwise EMSE of the VB curves
    grid: np.ndarray

    @property
    def failed(self) -> list[int]:
        return [o.replicate for o in self.outcomes if o.error is not None]

    def as_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "config": cfg,
            "vb": self.vb.as_dict(),
            "kmeans_baseline": self.kmeans.as_dict(),
            "init_mismatch_mean": float(np.nanmean([o.init_mismatch for o in self.outcomes])),
            "failed": self.failed,
        }


def stream_seed(seed: int, replicate: int, purpose: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), STREAM_BASE + purpose))
    return int(ss.generate_state(1)[0])


def truth_coefficients(spec: simgen.ScenarioSpec, B) -> np.ndarray:
    """Table coefficients when the scenario has them, else least-squares projections."""
    if spec.coefs is not None and spec.coefs.shape[1] == np.shape(getattr(B, "values", B))[1]:
        return np.array(spec.coefs, dtype=float)
    return least_squares_coefs(simgen.true_means(spec), B)


def run_one(cfg: ReplicationConfig, replicate: int) -> ReplicateOutcome:
    """Run a single replicate; errors are captured in ``outcome.error``."""
    out = ReplicateOutcome(replicate)
    spec = cfg.spec
    K = cfg.n_clusters
    try:
        data, _ = simgen.generate(spec, cfg.seed, replicate)
        B = basis_matrix(spec.domain[0], spec.domain[1], cfg.basis_size, data.grid, cfg.order)

        baseline = kmeans(data.Y, InitConfig(K=K, restarts=cfg.baseline_restarts,
                                             seed=stream_seed(cfg.seed, replicate, _BASELINE),
                                             seeding=cfg.baseline_seeding))
        out.km_mismatch = mismatch_rate(baseline.labels + 1, data.true_labels)
        out.km_v = v_measure(baseline.labels + 1, data.true_labels)

        start = time.perf_counter()
        init = kmeans(data.Y, InitConfig(K=K, restarts=cfg.restarts,
                                         seed=stream_seed(cfg.seed, replicate, _INIT)))
        out.init_mismatch = mismatch_rate(init.labels + 1, data.true_labels)
        truth = truth_coefficients(spec, B)
        if truth.shape[0] != K:
            raise DataError(f"prior presets need K = {truth.shape[0]} for scenario {spec.id}")
        frag = prior_preset(cfg.prior_preset, truth, seed=stream_seed(cfg.seed, replicate, _PRIOR))
        priors = PriorConfig(K=K, d0=1.0 / K, m0=frag["m0"], v0=frag["v0"],
                             shape_tau=cfg.shape_tau, rate_tau=cfg.rate_tau,
                             alpha0=cfg.alpha0, beta0=cfg.beta0)
        init_p = one_hot(init.labels, K)
        if cfg.align_init:
            init_p = align_to_prior(init_p, data.Y, B, priors.m0)
        fitter = fit_model1 if cfg.model == "m1" else fit_model2
        fit = fitter(data, B, priors, init_p, threshold=cfg.threshold, max_iter=cfg.max_iter,
                     special_fn=cfg.special_fn, seed=cfg.seed)
        out.runtime_s = time.perf_counter() - start

        out.vb_mismatch = mismatch_rate(fit.assignments, data.true_labels)
        out.vb_v = v_measure(fit.assignments, data.true_labels)
        out.iterations = fit.iterations
        out.converged = fit.converged
        out.elbo = fit.elbo
        out.aligned_means = align_mean_curves(fit.assignments, data.true_labels,
                                              fit.mean_curves, spec.K)
    except FunclustError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _run_one_packed(args):
    return run_one(*args)


def run_replication(cfg: ReplicationConfig) -> ReplicationReport:
    """Run all replicates (in a process pool when ``cfg.workers > 1``)."""
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_one_packed, jobs))
    else:
        outcomes = [run_one(*job) for job in jobs]
    outcomes.sort(key=lambda o: o.replicate)

    spec = cfg.spec
    grid = spec.grid
    truth = simgen.true_means(spec, grid)
    ok = [o for o in outcomes if o.error is None]
    failed = [o.replicate for o in outcomes if o.error is not None]
    if not ok:
        raise DataError("every replicate failed: " + "; ".join(o.error for o in outcomes))
    aligned = np.stack([o.aligned_means for o in ok])
    vb = summarize([o.vb_mismatch for o in ok], [o.vb_v for o in ok],
                   [o.runtime_s for o in ok], truth, aligned, spec.interval_length, failed)
    km = summarize([o.km_mismatch for o in ok], [o.km_v for o in ok], failed=failed)
    pointwise = np.full_like(truth, np.nan)
    for k in range(spec.K):
        rows = aligned[:, k, :]
        rows = rows[~np.isnan(rows).any(axis=1)]
        if rows.size:
            pointwise[k] = emse(truth[k], rows)
    return ReplicationReport(cfg, outcomes, vb, km, truth, pointwise, grid)
