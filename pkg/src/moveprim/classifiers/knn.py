"""Brute-force k-nearest-neighbor classifier."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..core import N_CLASSES
from ..errors import DimensionMismatch, EmptyModel
from ._base import check_query

BLOCK_ELEMENTS = 1 << 19


class KNearestNeighbors(ClassifierMixin, BaseEstimator):
    """Brute-force k-nearest-neighbor vote under Euclidean distance.

    Fitting only keeps references to the training arrays; validation and
    all work happen at prediction time. Class scores are the fraction of
    the ``k`` nearest rows carrying each label. Vote ties go to the tied
    class whose neighbors have the smallest summed distance, then to the
    lowest code.

    Parameters
    ----------
    n_neighbors : int, default 5
    n_classes : int, default 4
    chunk_size : int or None
        Query rows per distance block; ``None`` sizes blocks to about
        ``2**19`` distances so they stay cache-resident.
    """

    def __init__(self, n_neighbors=5, n_classes=N_CLASSES, chunk_size=None):
        self.n_neighbors = n_neighbors
        self.n_classes = n_classes
        self.chunk_size = chunk_size

    def fit(self, X, y):
        self.X_train_ = X
        self.y_train_ = y
        return self

    def _training_arrays(self):
        check_is_fitted(self, "X_train_")
        if "_train" not in self.__dict__ or self._train[0] is not self.X_train_:
            X = np.asarray(self.X_train_, dtype=np.float64)
            y = np.asarray(self.y_train_)
            if X.ndim != 2 or y.shape != (X.shape[0],):
                raise DimensionMismatch(f"X of shape {X.shape} does not match y of shape {y.shape}")
            if y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise ValueError(f"labels must be integer codes in [0, {self.n_classes})")
            self._train = (self.X_train_, X, y.astype(np.intp), np.einsum("ij,ij->i", X, X))
        return self._train[1:]

    @property
    def n_features_in_(self):
        return np.shape(self.X_train_)[1]

    @property
    def classes_(self):
        return np.arange(self.n_classes)

    def kneighbors(self, X):
        """Indices and distances of the k nearest training rows, nearest first."""
        train, _, train_sq = self._training_arrays()
        X = check_query(self, X, "X_train_")
        n = train.shape[0]
        k = self.n_neighbors
        if n == 0:
            raise EmptyModel("no training rows stored")
        if not 1 <= k <= n:
            raise ValueError(f"n_neighbors={k} must lie in [1, {n}]")
        chunk = self.chunk_size or max(1, BLOCK_ELEMENTS // n)
        idx = np.empty((X.shape[0], k), dtype=np.intp)
        dist = np.empty((X.shape[0], k))
        for lo in range(0, X.shape[0], chunk):
            q = X[lo:lo + chunk]
            d2 = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * (q @ train.T) + train_sq[None, :]
            np.maximum(d2, 0.0, out=d2)
            if k < n:
                part = np.argpartition(d2, k - 1, axis=1)[:, :k]
            else:
                part = np.broadcast_to(np.arange(n), (q.shape[0], n)).copy()
            pd = np.take_along_axis(d2, part, axis=1)
            order = np.lexsort((part, pd), axis=1)
            idx[lo:lo + q.shape[0]] = np.take_along_axis(part, order, axis=1)
            dist[lo:lo + q.shape[0]] = np.sqrt(np.take_along_axis(pd, order, axis=1))
        return idx, dist

    def _vote(self, X):
        idx, dist = self.kneighbors(X)
        labels = self._training_arrays()[1][idx]
        rows = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
        votes = np.zeros((idx.shape[0], self.n_classes))
        np.add.at(votes, (rows, labels.ravel()), 1.0)
        dsum = np.zeros_like(votes)
        np.add.at(dsum, (rows, labels.ravel()), dist.ravel())
        return votes, dsum

    def decision_function(self, X):
        votes, _ = self._vote(X)
        return votes / self.n_neighbors

    def predict_with_scores(self, X):
        votes, dsum = self._vote(X)
        tied = votes == votes.max(axis=1, keepdims=True)
        pred = np.argmin(np.where(tied, dsum, np.inf), axis=1)
        return pred, votes / self.n_neighbors

    def predict(self, X):
        return self.predict_with_scores(X)[0]
