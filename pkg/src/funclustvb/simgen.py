"""Simulation scenarios 1-10 with ground-truth labels and mean curves.

Every curve draws from its own PCG64 stream keyed by
``SeedSequence(seed, spawn_key=(replicate, curve))``, so datasets do not
depend on the order or parallelism in which replicates are produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import basis_matrix
from .core import FunctionalDataset
from .errors import DataError

CURVES_PER_CLUSTER = 50

# rows are clusters, columns the six cubic B-spline coefficients on [0, 1]
SCENARIO3_COEFS = np.array([
    [1.5, 1.0, 1.8, 2.0, 1.0, 1.5],
    [2.8, 1.4, 1.8, 0.5, 1.5, 2.5],
    [0.4, 0.6, 2.4, 2.6, 0.1, 0.4],
])
SCENARIO4_COEFS = np.array([
    [1.5, 1.0, 1.6, 1.8, 1.0, 1.5],
    [1.8, 0.6, 0.4, 2.6, 2.8, 1.6],
    [1.2, 1.8, 2.2, 0.8, 0.6, 1.8],
])


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to simulate one scenario.

    ``intercept`` is ``("uniform", h)`` for U(-h, h) shifts, ``("normal", sd)``
    for Gaussian shifts, or ``None``.
    """

    id: int
    K: int
    n: int
    domain: tuple[float, float]
    noise_sd: float
    intercept: tuple[str, float] | None
    mean_fn: Callable[[int, np.ndarray], np.ndarray] = field(repr=False)
    n_basis: int = 6
    curves_per_cluster: int = CURVES_PER_CLUSTER
    coefs: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.K * self.curves_per_cluster

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], self.n)

    @property
    def interval_length(self) -> float:
        return self.domain[1] - self.domain[0]


def _sine_family(b, c):
    def f(k, t):
        return b[k] + c[k] * np.sin(1.3 * t) + t ** 3
    return f


def _exp_family(b, c):
    def f(k, t):
        return b[k] * np.exp(c[k] * t) - t ** 3
    return f


def _neg_sine_family(b, c):
    def f(k, t):
        return b[k] - np.sin(c[k] * np.pi * t) + t ** 3
    return f


def _spline_family(coefs, domain):
    def f(k, t):
        B = basis_matrix(domain[0], domain[1], coefs.shape[1], t).values
        return B @ coefs[k]
    return f


def _energy(k, t):
    if k == 0:
        inner = (0.4 + np.exp(-(t - 6) ** 2 / 3) + 0.2 * np.exp(-(t - 12) ** 2 / 25)
                 + 0.5 * np.exp(-(t - 19) ** 2 / 4))
    elif k == 1:
        inner = 0.2 + np.exp(-(t - 5) ** 2 / 4) + 0.25 * np.exp(-(t - 18) ** 2 / 5)
    else:
        inner = 0.2 + np.exp(-(t - 3) ** 2 / 4) + 0.25 * np.exp(-(t - 16) ** 2 / 5)
    return 0.1 * inner


def _build_scenarios() -> dict[int, ScenarioSpec]:
    third_pi = (0.0, np.pi / 3)
    unit = (0.0, 1.0)
    s1_b, s1_c = (0.3, 1.0, 0.2), (1 / 1.3, 1 / 1.2, 1 / 4)
    s7_b = (-0.25, 1.25, 2.50)
    specs = [
        ScenarioSpec(1, 3, 100, third_pi, 0.4, ("uniform", 0.25), _sine_family(s1_b, s1_c)),
        ScenarioSpec(2, 3, 100, third_pi, 0.3, ("uniform", 0.25),
                     _exp_family((1 / 1.8, 1 / 1.7, 1 / 1.5), (1.1, 1.4, 1.5))),
        ScenarioSpec(3, 3, 100, unit, 0.4, None, _spline_family(SCENARIO3_COEFS, unit),
                     coefs=SCENARIO3_COEFS),
        ScenarioSpec(4, 3, 100, unit, 0.4, None, _spline_family(SCENARIO4_COEFS, unit),
                     coefs=SCENARIO4_COEFS),
        ScenarioSpec(5, 3, 96, (0.0, 24.0), 0.012, None, _energy, n_basis=12),
        # four clusters, so four intercepts b1..b4
        ScenarioSpec(6, 4, 100, third_pi, 0.4, ("uniform", 1 / 3),
                     _neg_sine_family((0.2, 0.5, 0.7, 1.3), (1.1, 1.4, 1.6, 1.8))),
        ScenarioSpec(7, 3, 100, third_pi, 0.2, ("normal", 0.4), _sine_family(s7_b, s1_c)),
        ScenarioSpec(8, 3, 100, unit, 0.4, ("normal", 0.05), _spline_family(SCENARIO3_COEFS, unit),
                     coefs=SCENARIO3_COEFS),
        ScenarioSpec(9, 3, 100, unit, 0.15, ("normal", 0.3), _spline_family(SCENARIO3_COEFS, unit),
                     coefs=SCENARIO3_COEFS),
        ScenarioSpec(10, 3, 100, unit, 0.4, ("normal", 0.6), _spline_family(SCENARIO3_COEFS, unit),
                     coefs=SCENARIO3_COEFS),
    ]
    return {s.id: s for s in specs}


SCENARIOS = _build_scenarios()


def get_scenario(scenario_id: int) -> ScenarioSpec:
    try:
        return SCENARIOS[int(scenario_id)]
    except (KeyError, ValueError, TypeError):
        raise DataError(f"unknown scenario {scenario_id!r}; choose from 1-10") from None


def true_mean(spec: ScenarioSpec, k: int, grid=None) -> np.ndarray:
    """Noise-free mean curve of cluster ``k`` (1-based)."""
    if not 1 <= k <= spec.K:
        raise DataError(f"cluster {k} outside 1..{spec.K}")
    t = spec.grid if grid is None else np.asarray(grid, dtype=float)
    return np.asarray(spec.mean_fn(k - 1, t), dtype=float) + np.zeros_like(t)


def true_means(spec: ScenarioSpec, grid=None) -> np.ndarray:
    return np.stack([true_mean(spec, k, grid) for k in range(1, spec.K + 1)])


def curve_rng(seed: int, replicate: int, curve: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(curve)))
    return np.random.Generator(np.random.PCG64(ss))


def generate(spec: ScenarioSpec | int, seed: int, replicate: int = 0):
    """Simulate one dataset.

    Returns:
        ``(dataset, means)`` where ``dataset.true_labels`` are 1..K in blocks
        of ``curves_per_cluster`` and ``means`` is the K x n truth.
    """
    if not isinstance(spec, ScenarioSpec):
        spec = get_scenario(spec)
    grid = spec.grid
    means = true_means(spec, grid)
    labels = np.repeat(np.arange(1, spec.K + 1), spec.curves_per_cluster)
    Y = np.empty((spec.N, spec.n))
    for i, lab in enumerate(labels):
        rng = curve_rng(seed, replicate, i)
        shift = 0.0
        if spec.intercept is not None:
            law, scale = spec.intercept
            shift = rng.uniform(-scale, scale) if law == "uniform" else rng.normal(0.0, scale)
        Y[i] = means[lab - 1] + shift + rng.normal(0.0, spec.noise_sd, size=spec.n)
    return FunctionalDataset(Y, grid, labels), means
