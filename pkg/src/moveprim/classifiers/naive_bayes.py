import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..core import N_CLASSES
from ._base import argmax_lowest, check_query, check_training_data

VAR_FLOOR = 1e-9


class GaussianNaiveBayes(ClassifierMixin, BaseEstimator):
    """Naive Bayes with independent Gaussian feature likelihoods.

    Priors are the empirical class frequencies; variances are the
    maximum-likelihood estimates floored at 1e-9.
    """

    def __init__(self, n_classes=N_CLASSES):
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y, counts = check_training_data(X, y, self.n_classes, min_per_class=2)
        K, d = self.n_classes, X.shape[1]
        self.theta_ = np.empty((K, d))
        self.var_ = np.empty((K, d))
        for k in range(K):
            Xk = X[y == k]
            self.theta_[k] = Xk.mean(axis=0)
            self.var_[k] = np.maximum(Xk.var(axis=0), VAR_FLOOR)
        self.class_prior_ = counts / counts.sum()
        self.classes_ = np.arange(K)
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        """Joint log-likelihood ``log p(C_k) + sum_i log N(x_i; mu_ki, var_ki)``."""
        X = check_query(self, X, "theta_")
        norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_), axis=1)
        quad = np.empty((X.shape[0], self.n_classes))
        for k in range(self.n_classes):
            quad[:, k] = np.sum((X - self.theta_[k]) ** 2 / self.var_[k], axis=1)
        return np.log(self.class_prior_) + norm - 0.5 * quad

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))
