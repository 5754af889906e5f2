"""k-means starting responsibilities and prior presets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import FunctionalDataset, PriorConfig
from .errors import DataError, InfeasibleError


@dataclass(frozen=True)
class InitConfig:
    """Settings for :func:`kmeans_init`.

    ``seeding`` is ``"kmeans++"`` (D^2 sampling) or ``"random"`` (K distinct
    curves drawn uniformly, the classic Forgy start).
    """

    K: int
    restarts: int = 10
    max_iter: int = 100
    seed: int = 0
    seeding: str = "kmeans++"

    def __post_init__(self):
        if self.K < 1:
            raise DataError(f"K must be >= 1, got {self.K}")
        if self.restarts < 1:
            raise DataError(f"restarts must be >= 1, got {self.restarts}")
        if self.seeding not in ("kmeans++", "random"):
            raise DataError(f"unknown seeding {self.seeding!r}")


@dataclass
class KMeansResult:
    labels: np.ndarray      # 0-based
    centers: np.ndarray
    wcss: float
    iterations: int


def _sq_dists(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ikj,ikj->ik", diff, diff)


def _seed_centers(X, K, rng, seeding):
    N = X.shape[0]
    if seeding == "random":
        return X[rng.choice(N, size=K, replace=False)].copy()
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, K):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(N)
        else:
            idx = rng.choice(N, p=closest / total)
        centers[j] = X[idx]
        closest = np.minimum(closest, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def lloyd(X, centers, max_iter: int = 100) -> KMeansResult:
    """Lloyd iterations from the given centers.

    A cluster that loses all its points is re-seeded at the point farthest
    from its current center.
    """
    X = np.asarray(X, dtype=float)
    centers = np.array(centers, dtype=float)
    K = centers.shape[0]
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, centers)
        new_labels = np.argmin(d2, axis=1)
        counts = np.bincount(new_labels, minlength=K)
        own = d2[np.arange(X.shape[0]), new_labels]
        for k in np.flatnonzero(counts == 0):
            # farthest point whose cluster can spare it
            donors = np.where(counts[new_labels] > 1, own, -np.inf)
            far = int(np.argmax(donors))
            counts[new_labels[far]] -= 1
            counts[k] += 1
            new_labels[far] = k
            own[far] = 0.0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(K):
            centers[k] = X[labels == k].mean(axis=0)
    d2 = _sq_dists(X, centers)
    wcss = float(np.sum(d2[np.arange(X.shape[0]), labels]))
    return KMeansResult(labels, centers, wcss, it)


def kmeans(X, cfg: InitConfig) -> KMeansResult:
    """Best-of-``restarts`` k-means on the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < cfg.K:
        raise InfeasibleError(f"cannot form {cfg.K} clusters from {X.shape[0]} curves")
    streams = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.restarts)
    best = None
    for ss in streams:
        rng = np.random.default_rng(ss)
        res = lloyd(X, _seed_centers(X, cfg.K, rng, cfg.seeding), cfg.max_iter)
        if best is None or res.wcss < best.wcss:
            best = res
    return best


def one_hot(labels, K: int) -> np.ndarray:
    """0-based labels to an N x K indicator matrix."""
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, K))
    out[np.arange(labels.size), labels] = 1.0
    return out


def kmeans_init(data: FunctionalDataset, cfg: InitConfig) -> np.ndarray:
    """One-hot responsibilities from k-means on the raw curves."""
    return one_hot(kmeans(data.Y, cfg).labels, cfg.K)


def align_to_prior(init_p, Y, B, m0) -> np.ndarray:
    """Permute the columns of ``init_p`` so cluster ``k`` sits nearest prior curve ``B m0_k``.

    k-means labels are arbitrary while cluster-specific prior means are not;
    matching them (optimal assignment on squared distance between init
    centroids and prior curves) keeps each prior with the curves it describes.
    """
    init_p = np.asarray(init_p, dtype=float)
    B = np.asarray(getattr(B, "values", B), dtype=float)
    sizes = init_p.sum(axis=0)
    centroids = (init_p.T @ np.asarray(Y, dtype=float)) / np.maximum(sizes, 1e-300)[:, None]
    prior_curves = np.atleast_2d(m0) @ B.T
    cost = np.sum((centroids[:, None, :] - prior_curves[None, :, :]) ** 2, axis=2)
    cost[sizes == 0] = 0.0
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(init_p.shape[1], dtype=int)
    order[cols] = rows
    return init_p[:, order]


# ---------------------------------------------------------------------------
# prior presets
# ---------------------------------------------------------------------------

PRESETS = ("setting1", "setting2", "setting3", "setting4")

# prior coefficient variances
_PRESET_S0 = {"setting1": 0.01, "setting2": 1.0, "setting3": 0.01, "setting4": 0.01}
SETTING3_PERTURBATION_VAR = 0.5


def prior_preset(name: str, truth, seed: int = 0) -> dict:
    """Coefficient-prior fragment for the sensitivity settings.

    Returns ``{"m0": K x M array, "v0": precision}``; ``truth`` holds the
    true coefficient vectors, one row per cluster.
    """
    if name not in PRESETS:
        raise DataError(f"unknown prior preset {name!r}; choose from {PRESETS}")
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if name == "setting3":
        rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
        m0 = truth + rng.normal(0.0, np.sqrt(SETTING3_PERTURBATION_VAR), size=truth.shape)
    elif name == "setting4":
        m0 = np.zeros_like(truth)
    else:
        m0 = truth.copy()
    return {"m0": m0, "v0": 1.0 / _PRESET_S0[name]}


def least_squares_coefs(Y, B) -> np.ndarray:
    """Per-row least-squares basis coefficients (rows of ``Y`` are curves)."""
    B = np.asarray(getattr(B, "values", B), dtype=float)
    coefs, *_ = np.linalg.lstsq(B, np.atleast_2d(Y).T, rcond=None)
    return coefs.T


def default_priors(data: FunctionalDataset, B, K: int, init_p=None, *,
                   s0: float = 0.1, shape_tau: float = 1.0, rate_tau: float = 1.0,
                   alpha0: float = 1.0, beta0: float = 1.0) -> PriorConfig:
    """Weakly informative priors built from the data.

    Each ``m0_k`` is the least-squares fit to the mean of the curves that
    ``init_p`` places in cluster ``k`` (the pooled mean if ``init_p`` is
    omitted or the cluster is empty); ``d0 = 1/K``.
    """
    Ybar = data.Y.mean(axis=0)
    centers = np.tile(Ybar, (K, 1))
    if init_p is not None:
        w = np.asarray(init_p, dtype=float)
        sizes = w.sum(axis=0)
        for k in range(K):
            if sizes[k] > 0:
                centers[k] = w[:, k] @ data.Y / sizes[k]
    m0 = least_squares_coefs(centers, B)
    return PriorConfig(K=K, d0=np.full(K, 1.0 / K), m0=m0, v0=1.0 / s0,
                       shape_tau=shape_tau, rate_tau=rate_tau, alpha0=alpha0, beta0=beta0)
