"""Fisher linear discriminant with nearest-mean (Mahalanobis) assignment."""
import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, ClassifierMixin

from ..core import N_CLASSES
from ..errors import DegenerateScatter
from ._base import argmax_lowest, check_query, check_training_data


def scatter_matrices(X, y, n_classes):
    """Within-class and between-class scatter plus the class means."""
    counts = np.bincount(y, minlength=n_classes)
    means = np.zeros((n_classes, X.shape[1]))
    np.add.at(means, y, X)
    means /= counts[:, None]
    centered = X - means[y]
    within = centered.T @ centered
    dev = means - X.mean(axis=0)
    between = (dev * counts[:, None]).T @ dev
    return within, between, means


class LinearDiscriminant(ClassifierMixin, BaseEstimator):
    """Multiclass Fisher discriminant.

    Projects onto the top ``K-1`` generalized eigenvectors of the
    between-class and (shrunk) within-class scatter, then assigns a sample
    to the class whose projected mean is nearest in Mahalanobis distance
    under the pooled projected covariance.

    Parameters
    ----------
    shrinkage : float, default 1e-6
        Ridge added to the within-class scatter, relative to its mean
        eigenvalue ``trace(S_w) / n_features``.
    n_classes : int, default 4
    """

    def __init__(self, shrinkage=1e-6, n_classes=N_CLASSES):
        self.shrinkage = shrinkage
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y, counts = check_training_data(X, y, self.n_classes, min_per_class=2)
        n, d = X.shape
        K = self.n_classes
        within, between, means = scatter_matrices(X, y, K)
        scale = np.trace(within) / d
        if not scale > 0:
            raise DegenerateScatter("within-class scatter is zero; samples are identical within classes")
        within_reg = within + self.shrinkage * scale * np.eye(d)
        _, vecs = scipy.linalg.eigh(between, within_reg, subset_by_index=[max(d - (K - 1), 0), d - 1])
        W = vecs[:, ::-1]
        # fix eigenvector signs so repeated fits agree
        flip = np.sign(W[np.argmax(np.abs(W), axis=0), np.arange(W.shape[1])])
        W = W * np.where(flip == 0, 1.0, flip)

        self.classes_ = np.arange(K)
        self.n_features_in_ = d
        self.priors_ = counts / n
        self.means_ = means
        self.scalings_ = W
        self.projected_means_ = means @ W
        self.covariance_ = W.T @ within_reg @ W / max(n - K, 1)
        self.precision_ = np.linalg.inv(self.covariance_)
        return self

    def transform(self, X):
        X = check_query(self, X, "scalings_")
        return X @ self.scalings_

    def decision_function(self, X):
        """Negative squared Mahalanobis distance to each projected class mean."""
        Z = self.transform(X)
        diff = Z[:, None, :] - self.projected_means_[None, :, :]
        return -np.einsum("nkd,de,nke->nk", diff, self.precision_, diff)

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))
