"""The four primitive classifiers behind a common estimator interface.

Every classifier takes integer class codes, exposes ``decision_function``
returning one score per class, and predicts the highest-scoring class.
"""
from .knn import KNearestNeighbors
from .lda import LinearDiscriminant
from .naive_bayes import GaussianNaiveBayes
from .svm import BinarySVM, LinearKernel, OneVsAllSVM, smo_binary

ALGORITHMS = {
    "lda": LinearDiscriminant,
    "nbc": GaussianNaiveBayes,
    "svm": OneVsAllSVM,
    "knn": KNearestNeighbors,
}


def make_classifier(name, **params):
    """Build a classifier by short name (``lda``, ``nbc``, ``svm``, ``knn``)."""
    try:
        cls = ALGORITHMS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown algorithm {name!r}; valid names: {', '.join(ALGORITHMS)}") from None
    return cls(**params)


__all__ = ["ALGORITHMS", "BinarySVM", "GaussianNaiveBayes", "KNearestNeighbors", "LinearDiscriminant",
           "LinearKernel", "OneVsAllSVM", "make_classifier", "smo_binary"]
