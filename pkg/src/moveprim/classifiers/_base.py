"""Shared validation for the classifiers."""
import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import DimensionMismatch, MissingClass


def check_training_data(X, y, n_classes, min_per_class=1):
    """Validate a training set whose labels are integer codes ``0..n_classes-1``.

    Returns ``(X, y, counts)``.
    """
    X, y = check_X_y(X, y, dtype=np.float64)
    y = y.astype(np.intp, copy=False)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must be integer codes in [0, {n_classes})")
    counts = np.bincount(y, minlength=n_classes)
    absent = np.flatnonzero(counts == 0)
    if absent.size:
        raise MissingClass(f"classes {absent.tolist()} have no training samples")
    short = np.flatnonzero(counts < min_per_class)
    if short.size:
        raise MissingClass(f"classes {short.tolist()} have fewer than {min_per_class} samples")
    return X, y, counts


def check_query(estimator, X, attribute):
    check_is_fitted(estimator, attribute)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != estimator.n_features_in_:
        raise DimensionMismatch(f"expected {estimator.n_features_in_} features, got {X.shape[1]}")
    return X


def argmax_lowest(scores):
    """Row-wise argmax; ties resolve to the lowest class code."""
    return np.argmax(scores, axis=1)
