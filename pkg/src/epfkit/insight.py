"""Embedding-table analysis: cosine distances, nearest neighbours and a 2-D
PCA projection via cyclic Jacobi eigen-decomposition."""

from dataclasses import dataclass

import numpy as np


class UndefinedDistanceError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledVectors:
    labels: tuple
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float64))
        if len(self.labels) != len(self.vectors):
            raise ValueError("one label per vector required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")


MONTH_LABELS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
WEEKDAY10_LABELS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday",
                    "Saturday", "Sunday", "bridge day", "partial holiday",
                    "public holiday")


def default_labels(variable, vocab):
    if variable == "month" and vocab == 12:
        return MONTH_LABELS
    if variable == "weekday10" and vocab == 10:
        return WEEKDAY10_LABELS
    if variable == "hour" and vocab == 24:
        return tuple(f"h{h:02d}" for h in range(24))
    if variable == "year":
        from .calendar import BASE_YEAR
        return tuple(str(BASE_YEAR + i) for i in range(vocab))
    return tuple(f"{variable}_{i}" for i in range(vocab))


def cosine_distance(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("vectors must have equal dimension")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedDistanceError("cosine distance undefined for zero vector")
    return float(1.0 - (u @ v) / (nu * nv))


def nearest_neighbors(lv, query_label, k):
    """k nearest labels by ascending cosine distance, ties lexicographic."""
    if query_label not in lv.labels:
        raise KeyError(f"unknown label {query_label!r}")
    if not 0 < k < len(lv.labels):
        raise ValueError("k must be in 1..label count-1")
    q = lv.vectors[lv.labels.index(query_label)]
    pairs = [
        (cosine_distance(q, vec), label)
        for label, vec in zip(lv.labels, lv.vectors)
        if label != query_label
    ]
    pairs.sort()
    return [(label, dist) for dist, label in pairs[:k]]


def jacobi_eigh(a, max_sweeps=100, tol=1e-12):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
    rotations; returns eigenvalues (descending) and column eigenvectors."""
    a = np.asarray(a, dtype=np.float64).copy()
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < tol * 1e-3:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]


def pca2(lv):
    """2-D PCA coordinates per label; sign fixed so the largest-magnitude
    loading of each axis is positive.  Rank-deficient input zeroes axis 2."""
    x = lv.vectors
    if len(x) < 3 or x.shape[1] < 2:
        raise ValueError("need at least 3 vectors of dimension >= 2")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / len(x)
    eigvals, eigvecs = jacobi_eigh(cov)
    rank_deficient = eigvals[1] <= max(eigvals[0], 0.0) * 1e-12
    coords = np.zeros((len(x), 2))
    for axis in range(2):
        if axis == 1 and rank_deficient:
            break
        vec = eigvecs[:, axis]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        coords[:, axis] = centered @ vec
    return {
        "coords": coords,
        "eigenvalues": eigvals,
        "rank_deficient": bool(rank_deficient),
    }


def export_tsv(lv, vectors_path, metadata_path):
    """Projector-style export: tab-separated vectors plus a label column."""
    with open(vectors_path, "w") as fh:
        for vec in lv.vectors:
            fh.write("\t".join(repr(float(v)) for v in vec) + "\n")
    with open(metadata_path, "w") as fh:
        fh.write("label\n")
        for label in lv.labels:
            fh.write(f"{label}\n")
