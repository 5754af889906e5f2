"""Clustering and curve-recovery metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ShapeError

# exhaustive search over label bijections up to this many labels
EXHAUSTIVE_MAX_K = 8


def _paired(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ShapeError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ShapeError("empty label vectors")
    return pred, truth


def contingency(pred, truth):
    """Counts table ``C[a, b]`` = #(pred == a-th label, truth == b-th label)."""
    pred, truth = _paired(pred, truth)
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    C = np.zeros((p_vals.size, t_vals.size), dtype=np.int64)
    np.add.at(C, (p_idx, t_idx), 1)
    return C, p_vals, t_vals


def _best_matching(C):
    """Row/col pairs maximising total matched count."""
    rows, cols = C.shape
    if max(rows, cols) > EXHAUSTIVE_MAX_K:
        r, c = linear_sum_assignment(C, maximize=True)
        return list(zip(r.tolist(), c.tolist()))
    size = max(rows, cols)
    square = np.zeros((size, size), dtype=C.dtype)
    square[:rows, :cols] = C
    best, best_perm = -1, None
    for perm in itertools.permutations(range(size)):
        total = square[np.arange(size), perm].sum()
        if total > best:
            best, best_perm = total, perm
    return [(r, c) for r, c in enumerate(best_perm) if r < rows and c < cols]


def label_mapping(pred, truth) -> dict:
    """Mismatch-optimal map from predicted labels to true labels.

    Predicted labels left unmatched (more clusters than classes) are absent.
    """
    C, p_vals, t_vals = contingency(pred, truth)
    return {p_vals[r].item(): t_vals[c].item() for r, c in _best_matching(C)}


def mismatch_rate(pred, truth) -> float:
    """Fraction misclassified under the best bijection of labels."""
    C, _, _ = contingency(pred, truth)
    matched = sum(C[r, c] for r, c in _best_matching(C))
    return float(1.0 - matched / C.sum())


def _entropy(counts):
    counts = counts[counts > 0].astype(float)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def homogeneity_completeness_v(pred, truth, beta: float = 1.0):
    """Homogeneity, completeness and V-measure (natural-log entropies)."""
    C, _, _ = contingency(pred, truth)
    total = C.sum()
    H_C = _entropy(C.sum(axis=0))   # classes (truth)
    H_K = _entropy(C.sum(axis=1))   # clusters (pred)
    nz = C > 0
    joint = C[nz] / total
    # H(C|K) = -sum n_ck/N log(n_ck / n_k)
    pred_tot = np.broadcast_to(C.sum(axis=1, keepdims=True), C.shape)[nz]
    true_tot = np.broadcast_to(C.sum(axis=0, keepdims=True), C.shape)[nz]
    H_C_given_K = float(-np.sum(joint * np.log(C[nz] / pred_tot)))
    H_K_given_C = float(-np.sum(joint * np.log(C[nz] / true_tot)))
    h = 1.0 if H_C == 0 else 1.0 - H_C_given_K / H_C
    c = 1.0 if H_K == 0 else 1.0 - H_K_given_C / H_K
    if h + c == 0:
        return h, c, 0.0
    v = (1 + beta) * h * c / (beta * h + c)
    return h, c, float(v)


def v_measure(pred, truth) -> float:
    return homogeneity_completeness_v(pred, truth)[2]


def emse(true_curve, estimates) -> np.ndarray:
    """Pointwise mean squared error over replicates (length n)."""
    true_curve = np.asarray(true_curve, dtype=float).ravel()
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if estimates.shape[1] != true_curve.size:
        raise ShapeError(f"estimates have {estimates.shape[1]} points, truth has {true_curve.size}")
    return np.mean((estimates - true_curve[None, :]) ** 2, axis=0)


def emise(true_curve, estimates, T: float) -> float:
    """``(T / n) * sum_j EMSE(t_j)``."""
    e = emse(true_curve, estimates)
    return float(T / e.size * e.sum())


def align_mean_curves(pred, truth, mean_curves, K_true: int):
    """Reorder estimated cluster curves to the true clusters.

    Returns a ``K_true x n`` array; rows of unmatched true clusters are NaN.
    ``pred`` and ``truth`` are 1-based labels; ``mean_curves`` row ``k-1``
    belongs to predicted label ``k``.
    """
    mean_curves = np.asarray(mean_curves, dtype=float)
    out = np.full((K_true, mean_curves.shape[1]), np.nan)
    for p, t in label_mapping(pred, truth).items():
        out[int(t) - 1] = mean_curves[int(p) - 1]
    return out


def _sd(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


@dataclass
class ReplicationSummary:
    mismatch: np.ndarray
    v_measure: np.ndarray
    runtimes: np.ndarray
    emise: np.ndarray | None = None
    failed: list = field(default_factory=list)

    @property
    def mismatch_mean(self) -> float:
        return float(np.mean(self.mismatch))

    @property
    def mismatch_sd(self) -> float:
        return _sd(self.mismatch)

    @property
    def v_mean(self) -> float:
        return float(np.mean(self.v_measure))

    @property
    def v_sd(self) -> float:
        return _sd(self.v_measure)

    def as_dict(self) -> dict:
        return {
            "replicates": int(self.mismatch.size),
            "mismatch_mean": self.mismatch_mean,
            "mismatch_sd": self.mismatch_sd,
            "v_measure_mean": self.v_mean,
            "v_measure_sd": self.v_sd,
            "runtime_total_s": float(np.sum(self.runtimes)),
            "emise": None if self.emise is None else [float(e) for e in self.emise],
            "failed": list(self.failed),
        }


def summarize(mismatches, v_measures, runtimes=None, true_means=None, aligned_estimates=None,
              T: float | None = None, failed=()) -> ReplicationSummary:
    """Means and sample SDs (divisor S-1; a single replicate reports SD 0).

    If ``true_means`` (K x n) and ``aligned_estimates`` (S x K x n, NaN where a
    cluster was not recovered) are given, per-cluster EMISE is added; NaN
    rows are skipped for that cluster.
    """
    mismatches = np.asarray(mismatches, dtype=float)
    if mismatches.size < 1:
        raise ShapeError("need at least one replicate")
    runtimes = np.zeros_like(mismatches) if runtimes is None else np.asarray(runtimes, float)
    per_cluster = None
    if true_means is not None and aligned_estimates is not None:
        est = np.asarray(aligned_estimates, dtype=float)
        per_cluster = []
        for k, f in enumerate(np.atleast_2d(true_means)):
            rows = est[:, k, :]
            rows = rows[~np.isnan(rows).any(axis=1)]
            per_cluster.append(emise(f, rows, T) if rows.size else float("nan"))
        per_cluster = np.asarray(per_cluster)
    return ReplicationSummary(mismatches, np.asarray(v_measures, dtype=float), runtimes,
                              per_cluster, list(failed))
