"""Seeded Lloyd k-means with k-means++ initialization.

Kept small and explicit so the objective can be tracked per iteration and the
result is a pure function of ``(X, n_clusters, random_state)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted


def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = np.empty((n_clusters, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, n_clusters):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[c] = X[idx]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


class LloydKMeans(ClusterMixin, BaseEstimator):
    """Plain Lloyd iterations until every center moves less than ``tol``.

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    labels_ : ndarray of shape (n_samples,)
    inertia_history_ : list of float
        Objective after each assignment step; non-increasing.
    n_iter_ : int
    """

    def __init__(self, n_clusters=3, max_iter=100, tol=1e-4, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0:
            raise ValueError(f"X must be a non-empty 2-D array, got shape {X.shape}")
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        k = min(self.n_clusters, len(X))
        rng = np.random.default_rng(self.random_state)
        centers = kmeans_plusplus(X, k, rng)
        history = []
        for it in range(1, self.max_iter + 1):
            d2 = _sq_distances(X, centers)
            labels = d2.argmin(axis=1)
            history.append(float(d2[np.arange(len(X)), labels].sum()))
            new_centers = centers.copy()
            for c in range(k):
                members = labels == c
                if members.any():
                    new_centers[c] = X[members].mean(axis=0)
            shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
            centers = new_centers
            if shift < self.tol:
                break
        d2 = _sq_distances(X, centers)
        self.labels_ = d2.argmin(axis=1)
        self.cluster_centers_ = centers
        self.inertia_ = float(d2[np.arange(len(X)), self.labels_].sum())
        self.inertia_history_ = history + [self.inertia_]
        self.n_iter_ = it
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = np.asarray(X, dtype=np.float64)
        return _sq_distances(X, self.cluster_centers_).argmin(axis=1)
