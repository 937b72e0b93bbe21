"""Friedman aligned-ranks omnibus test and Holm post-hoc procedure."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, ndtr


class DegenerateVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreMatrix:
    """n samples (rows) of one error value per method (columns)."""

    methods: tuple
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        n, k = self.samples.shape
        if k != len(self.methods):
            raise ValueError("method count must match sample columns")
        if k < 2 or n < 2:
            raise ValueError("need k >= 2 methods and n >= 2 samples")
        if np.isnan(self.samples).any():
            raise ValueError("missing cells are not allowed")


def rank_average_ties(values):
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def chi2_sf(x, df):
    """Chi-square survival function via the regularized incomplete gamma."""
    return float(gammaincc(df / 2.0, x / 2.0))


def friedman_aligned(matrix):
    """Average aligned ranks, the aligned-ranks chi-square statistic and its
    p-value (k-1 degrees of freedom).  Lower average rank is better."""
    x = matrix.samples
    n, k = x.shape
    aligned = x - x.mean(axis=1, keepdims=True)
    if np.all(aligned == aligned.ravel()[0]):
        raise DegenerateVarianceError("all aligned values identical")
    ranks = rank_average_ties(aligned.ravel()).reshape(n, k)
    col_sums = ranks.sum(axis=0)
    row_sums = ranks.sum(axis=1)
    total = k * n
    num = (k - 1) * (float(col_sums @ col_sums) - (k * n**2 / 4.0) * (k * n + 1) ** 2)
    den = total * (total + 1) * (2 * total + 1) / 6.0 - float(row_sums @ row_sums) / k
    if den <= 0:
        raise DegenerateVarianceError("degenerate rank variance")
    statistic = num / den
    return {
        "avg_ranks": dict(zip(matrix.methods, col_sums / n)),
        "statistic": statistic,
        "p_value": chi2_sf(statistic, k - 1),
    }


def holm_adjust(raw_p):
    """Holm step-down adjustment: sort ascending, scale by remaining count,
    enforce the running maximum, clamp at 1."""
    raw_p = np.asarray(raw_p, dtype=np.float64)
    if np.any((raw_p < 0) | (raw_p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(raw_p)
    order = np.argsort(raw_p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, min(1.0, (m - i) * raw_p[idx]))
        adjusted[idx] = running
    return adjusted


def _pairwise_z(rank_i, rank_j, n, k):
    se = math.sqrt(k * (n * k + 1) / 6.0 / n)
    return (rank_i - rank_j) / se


def _two_sided_p(z):
    return float(2.0 * (1.0 - ndtr(abs(z))))


@dataclass
class RankingReport:
    avg_ranks: dict
    omnibus_p: float
    control: str
    adjusted_p: dict          # per non-control method, Holm-adjusted vs control
    pairwise: np.ndarray      # k x k Holm-adjusted matrix, rank order
    rank_order: tuple


def holm_vs_control(matrix, control=None):
    """Compare every method against the control (lowest average rank by
    default) with Holm-adjusted normal-approximation p-values."""
    res = friedman_aligned(matrix)
    avg = res["avg_ranks"]
    order = tuple(sorted(avg, key=lambda m: (avg[m], m)))
    control = control or order[0]
    if control not in avg:
        raise ValueError(f"unknown control method {control!r}")
    n, k = matrix.samples.shape
    others = [m for m in matrix.methods if m != control]
    raw = [_two_sided_p(_pairwise_z(avg[m], avg[control], n, k)) for m in others]
    adjusted = dict(zip(others, holm_adjust(raw)))
    pair, _ = pairwise_matrix(matrix, precomputed=(avg, order, n, k))
    return RankingReport(
        avg_ranks=avg,
        omnibus_p=res["p_value"],
        control=control,
        adjusted_p=adjusted,
        pairwise=pair,
        rank_order=order,
    )


def pairwise_matrix(matrix, precomputed=None):
    """k x k Holm-adjusted p matrix with methods ordered best to worst."""
    if precomputed is None:
        res = friedman_aligned(matrix)
        avg = res["avg_ranks"]
        order = tuple(sorted(avg, key=lambda m: (avg[m], m)))
        n, k = matrix.samples.shape
    else:
        avg, order, n, k = precomputed
    raw, pairs = [], []
    for i in range(k):
        for j in range(i + 1, k):
            raw.append(_two_sided_p(_pairwise_z(avg[order[i]], avg[order[j]], n, k)))
            pairs.append((i, j))
    adjusted = holm_adjust(raw) if raw else np.zeros(0)
    out = np.ones((k, k))
    for (i, j), p in zip(pairs, adjusted):
        out[i, j] = out[j, i] = p
    return out, order
