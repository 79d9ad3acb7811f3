import warnings

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.svm import SVC

from moveprim.classifiers import (
    ALGORITHMS,
    BinarySVM,
    GaussianNaiveBayes,
    KNearestNeighbors,
    LinearDiscriminant,
    OneVsAllSVM,
    make_classifier,
    smo_binary,
)
from moveprim.classifiers.persist import load_model, model_from_dict, model_to_dict, save_model
from moveprim.classifiers.svm import LinearKernel
from moveprim.errors import DimensionMismatch, EmptyModel, MissingClass, SingleClass, ValidationError


def blobs(seed=0, n=30, d=2, spread=0.3, k=4, sep=6.0):
    rng = np.random.default_rng(seed)
    centers = sep * rng.standard_normal((k, d))
    y = np.repeat(np.arange(k), n)
    return centers[y] + spread * rng.standard_normal((k * n, d)), y, centers


def overlapping(seed, n=40, d=3, k=4):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(k), n)
    return rng.standard_normal((k, d))[y] + rng.standard_normal((k * n, d)), y


# interface ---------------------------------------------------------------------

def test_make_classifier_names():
    assert set(ALGORITHMS) == {"lda", "nbc", "svm", "knn"}
    assert isinstance(make_classifier("LDA"), LinearDiscriminant)
    with pytest.raises(KeyError, match="valid names: lda, nbc, svm, knn"):
        make_classifier("rf")


@pytest.mark.parametrize("name", list(ALGORITHMS))
def test_get_params_and_clone(name):
    est = make_classifier(name)
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params and twin is not est


@pytest.mark.parametrize("name", list(ALGORITHMS))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_predict_is_argmax_of_scores(name, seed):
    X, y = overlapping(seed)
    clf = make_classifier(name).fit(X, y)
    scores = clf.decision_function(X)
    assert scores.shape == (X.shape[0], 4)
    if name == "knn":
        # the distance-sum tie rule only applies where votes tie
        pred = clf.predict(X)
        top = scores.max(axis=1, keepdims=True)
        assert np.all(scores[np.arange(len(pred)), pred] == top[:, 0])
        clear = (scores == top).sum(axis=1) == 1
        assert np.array_equal(pred[clear], np.argmax(scores[clear], axis=1))
    else:
        assert np.array_equal(clf.predict(X), np.argmax(scores, axis=1))


@pytest.mark.parametrize("name", ["lda", "nbc", "svm"])
def test_missing_class(name):
    X, y = overlapping(0)
    keep = y < 3
    with pytest.raises(MissingClass):
        make_classifier(name).fit(X[keep], y[keep]).predict(X)


@pytest.mark.parametrize("name", list(ALGORITHMS))
def test_dimension_mismatch(name):
    X, y = overlapping(0)
    clf = make_classifier(name).fit(X, y)
    with pytest.raises(DimensionMismatch):
        clf.predict(np.zeros((2, X.shape[1] + 1)))


@pytest.mark.parametrize("name", ["lda", "nbc", "knn"])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(0.01, 100))
def test_scale_covariance_of_predictions(name, seed, c):
    X, y = overlapping(seed, n=25)
    Xq = np.random.default_rng(seed + 1).standard_normal((50, X.shape[1]))
    a = make_classifier(name).fit(X, y).predict(Xq)
    b = make_classifier(name).fit(c * X, y).predict(c * Xq)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("name", list(ALGORITHMS))
def test_persist_round_trip(name, tmp_path):
    X, y = overlapping(5)
    clf = make_classifier(name).fit(X, y)
    save_model(clf, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert type(back) is type(clf) and back.get_params() == clf.get_params()
    np.testing.assert_array_equal(back.decision_function(X), clf.decision_function(X))


def test_persist_rejects_unfitted():
    with pytest.raises(ValidationError):
        model_to_dict(LinearDiscriminant())
    with pytest.raises(ValidationError):
        model_from_dict({"format": 1, "class": "Forest", "params": {}, "fitted": {}})


# LDA ---------------------------------------------------------------------------

def test_lda_one_dimensional_midpoint():
    X = np.array([[-1.2], [-0.8], [-1.0], [0.8], [1.2], [1.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    lda = LinearDiscriminant(n_classes=2).fit(X, y)
    assert lda.scalings_.shape == (1, 1)
    s = lda.decision_function([[0.0]])[0]
    assert s[0] == pytest.approx(s[1], abs=1e-12)
    assert lda.predict([[0.0], [-1e-3], [1e-3]]).tolist() == [0, 0, 1]


def test_lda_aligned_with_separating_dimension():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((400, 2)) * [0.5, 3.0]
    y = np.repeat([0, 1], 200)
    X[y == 1, 0] += 4.0
    w = LinearDiscriminant(n_classes=2).fit(X, y).scalings_[:, 0]
    angle = np.degrees(np.arccos(abs(w[0]) / np.linalg.norm(w)))
    assert angle < 1.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 3))
def test_lda_matches_closed_form_fisher_direction(seed, d):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d)) + 2 * np.eye(d)
    X = rng.standard_normal((120, d)) @ A
    y = np.repeat([0, 1], 60)
    X[y == 1] += rng.standard_normal(d) * 2
    w = LinearDiscriminant(n_classes=2).fit(X, y).scalings_[:, 0]
    m0, m1 = X[y == 0].mean(0), X[y == 1].mean(0)
    Sw = np.cov(X[y == 0].T, bias=True) * 60 + np.cov(X[y == 1].T, bias=True) * 60
    ref = np.linalg.solve(np.atleast_2d(Sw), m1 - m0)
    cos = abs(w @ ref) / np.linalg.norm(w) / np.linalg.norm(ref)
    assert cos >= 0.999


def test_lda_class_mean_scores_zero():
    X, y, _ = blobs(2, d=5)
    lda = LinearDiscriminant().fit(X, y)
    s = lda.decision_function(lda.means_[2:3])[0]
    assert s[2] == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.delete(s, 2) < 0)


def test_lda_equidistant_tie_goes_low():
    cross = np.array([[0.1, 0.0], [-0.1, 0.0], [0.0, 0.1], [0.0, -0.1]])
    means = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 10.0], [0.0, -10.0]])
    X = np.vstack([m + cross for m in means])
    y = np.repeat(np.arange(4), 4)
    lda = LinearDiscriminant().fit(X, y)
    s = lda.decision_function([[0.0, 0.0]])[0]
    assert s[0] == s[1] and s[2] < s[0]
    assert lda.predict([[0.0, 0.0]])[0] == 0


def test_lda_single_class():
    with pytest.raises(MissingClass):
        LinearDiscriminant().fit(np.zeros((4, 2)) + np.arange(4)[:, None], np.zeros(4, int))


# NBC ---------------------------------------------------------------------------

def test_nbc_hand_posterior():
    X = np.array([[-1.0], [1.0], [3.0], [5.0]])
    y = np.array([0, 0, 1, 1])
    nbc = GaussianNaiveBayes(n_classes=2).fit(X, y)
    s = nbc.decision_function([[1.0]])[0]
    assert s[0] - s[1] == pytest.approx(4.0, abs=1e-12)
    assert nbc.predict([[1.0]])[0] == 0


def test_nbc_prior_dominates():
    base = np.array([[-1.0], [1.0]])
    X = np.vstack([np.tile(base, (9, 1)), base])
    y = np.array([0] * 18 + [1] * 2)
    nbc = GaussianNaiveBayes(n_classes=2).fit(X, y)
    assert nbc.class_prior_.tolist() == [0.9, 0.1]
    assert np.all(nbc.predict(np.linspace(-5, 5, 21)[:, None]) == 0)


def test_nbc_symmetric_tie_goes_low():
    X = np.array([[-1.0], [1.0], [3.0], [5.0]])
    nbc = GaussianNaiveBayes(n_classes=2).fit(X, [0, 0, 1, 1])
    s = nbc.decision_function([[2.0]])[0]
    assert s[0] == s[1] and nbc.predict([[2.0]])[0] == 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 6))
def test_nbc_matches_direct_log_density(seed, d):
    rng = np.random.default_rng(seed)
    y = rng.permutation(np.repeat(np.arange(4), 5))
    X = rng.standard_normal((20, d)) * rng.uniform(0.5, 3, d) + y[:, None]
    nbc = GaussianNaiveBayes().fit(X, y)
    Xq = rng.standard_normal((7, d)) * 2
    ref = np.empty((7, 4))
    for k in range(4):
        Xk = X[y == k]
        mu, sd = Xk.mean(0), Xk.std(0)
        ref[:, k] = np.log(np.mean(y == k)) + scipy.stats.norm.logpdf(Xq, mu, sd).sum(axis=1)
    np.testing.assert_allclose(nbc.decision_function(Xq), ref, rtol=0, atol=1e-9)


# SVM ---------------------------------------------------------------------------

def test_svm_two_antipodal_points():
    m = smo_binary(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]), C=1e6)
    assert m.coef[0] == pytest.approx(1.0, abs=1e-2)
    assert m.intercept == pytest.approx(0.0, abs=1e-2)
    assert 2.0 / np.linalg.norm(m.coef) == pytest.approx(2.0, abs=2e-2)


def test_svm_separable_blobs_margins():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 0.5, (50, 2)), rng.normal(3, 0.5, (50, 2))])
    y = np.repeat([-1.0, 1.0], 50)
    svm = BinarySVM(C=10.0).fit(X, y)
    assert np.all(svm.predict(X) == y)
    assert np.all(y * svm.decision_function(X) >= 1 - 1e-3)


def test_svm_single_class():
    with pytest.raises(SingleClass):
        smo_binary(np.ones((3, 2)), np.ones(3))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(6, 80), C=st.sampled_from([0.1, 1.0, 10.0]),
       shrinking=st.booleans())
def test_svm_dual_feasibility(seed, n, C, shrinking):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[:2] = [-1.0, 1.0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = smo_binary(X, y, C=C, shrinking=shrinking)
    assert np.all(m.alpha >= 0) and np.all(m.alpha <= C)
    assert abs(m.alpha @ y) <= 1e-6
    np.testing.assert_allclose(m.coef, X.T @ (m.alpha * y), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("budget", [None, 4096])
def test_svm_matches_libsvm(seed, budget):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((120, 4))
    y = np.where(X @ rng.standard_normal(4) + 0.5 * rng.standard_normal(120) > 0, 1.0, -1.0)
    kernel = LinearKernel(X) if budget is None else LinearKernel(X, cache_bytes=budget)
    m = smo_binary(X, y, C=1.0, tol=1e-6, kernel=kernel)
    ref = SVC(kernel="linear", C=1.0, tol=1e-8).fit(X, y)
    np.testing.assert_allclose(m.coef, ref.coef_[0], atol=1e-4)
    assert m.intercept == pytest.approx(ref.intercept_[0], abs=1e-3)


def test_svm_kernel_cache_modes_agree():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 3))
    y = np.where(rng.random(60) < 0.5, -1.0, 1.0)
    full = smo_binary(X, y, kernel=LinearKernel(X))
    lru = smo_binary(X, y, kernel=LinearKernel(X, cache_bytes=8 * 60 * 3))
    assert LinearKernel(X, cache_bytes=8 * 60 * 3).full.size == 0
    # rank-3 Gram matrix: alpha is not unique, the primal solution is
    np.testing.assert_allclose(full.coef, lru.coef, atol=1e-3)
    assert full.intercept == pytest.approx(lru.intercept, abs=1e-2)


def test_ova_separable_blobs():
    X, y, centers = blobs(4, d=3, sep=8.0)
    svm = OneVsAllSVM().fit(X, y)
    assert np.all(svm.predict(X) == y)
    f = svm.decision_function(centers[3:4])[0]
    assert f[3] > 0 and np.all(np.delete(f, 3) < 0)


def test_ova_folds_standardization_into_raw_space():
    X, y = overlapping(2)
    X = X * [100.0, 0.01, 1.0] + 50
    svm = OneVsAllSVM().fit(X, y)
    Z = (X - svm.center_) / svm.scale_
    raw = np.column_stack([m.decision_function(Z) for m in svm.machines_])
    np.testing.assert_allclose(svm.decision_function(X), raw, rtol=1e-9, atol=1e-9)


# KNN ---------------------------------------------------------------------------

def knn_oracle(Xt, yt, Xq, k, n_classes=4):
    """Exhaustive scan; neighbors ordered by (distance, index)."""
    preds, scores = [], []
    for q in Xq:
        d = np.sqrt(((Xt - q) ** 2).sum(axis=1))
        nn = sorted(range(len(Xt)), key=lambda i: (d[i], i))[:k]
        votes = np.zeros(n_classes)
        dsum = np.zeros(n_classes)
        for i in nn:
            votes[yt[i]] += 1
            dsum[yt[i]] += d[i]
        tied = [c for c in range(n_classes) if votes[c] == votes.max()]
        preds.append(min(tied, key=lambda c: (dsum[c], c)))
        scores.append(votes / k)
    return np.array(preds), np.array(scores)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 9), n=st.integers(20, 200))
def test_knn_matches_brute_force(seed, k, n):
    rng = np.random.default_rng(seed)
    Xt = rng.standard_normal((n, 10))
    yt = rng.permutation(np.arange(n) % 4)
    Xq = rng.standard_normal((30, 10))
    knn = KNearestNeighbors(n_neighbors=k, chunk_size=7).fit(Xt, yt)
    pred, scores = knn.predict_with_scores(Xq)
    ref_pred, ref_scores = knn_oracle(Xt, yt, Xq, k)
    assert np.array_equal(pred, ref_pred)
    np.testing.assert_array_equal(scores, ref_scores)


def test_knn_majority_scores():
    Xt = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [50.0], [60.0], [70.0]])
    yt = np.array([0, 0, 0, 1, 1, 2, 3, 1])
    knn = KNearestNeighbors(n_neighbors=5).fit(Xt, yt)
    pred, scores = knn.predict_with_scores([[0.0]])
    assert pred[0] == 0 and scores[0].tolist() == [0.6, 0.4, 0.0, 0.0]


def test_knn_exact_training_row():
    X, y = overlapping(1)
    knn = KNearestNeighbors(n_neighbors=1).fit(X, y)
    assert np.array_equal(knn.predict(X), y)


def test_knn_tie_by_summed_distance():
    Xt = np.array([[1.0], [1.1], [0.5], [2.0], [90.0], [91.0]])
    yt = np.array([0, 0, 1, 1, 2, 3])
    knn = KNearestNeighbors(n_neighbors=4).fit(Xt, yt)
    assert knn.kneighbors([[0.0]])[0][0, 0] == 2
    assert knn.predict([[0.0]])[0] == 0


def test_knn_absent_class_is_never_predicted():
    X, y = overlapping(0)
    keep = y < 3
    pred, scores = KNearestNeighbors().fit(X[keep], y[keep]).predict_with_scores(X)
    assert np.all(pred < 3) and np.all(scores[:, 3] == 0)


def test_knn_fit_is_lazy_but_validates_on_use():
    knn = KNearestNeighbors().fit(np.zeros((3, 2)), [0, 1, 7])
    with pytest.raises(ValueError):
        knn.predict(np.zeros((1, 2)))
    with pytest.raises(DimensionMismatch):
        KNearestNeighbors().fit(np.zeros((3, 2)), [0, 1]).predict(np.zeros((1, 2)))
    with pytest.raises(EmptyModel):
        KNearestNeighbors(n_classes=1).fit(np.zeros((0, 2)), np.zeros(0, int)).predict(np.zeros((1, 2)))


def test_knn_k_larger_than_training_set():
    knn = KNearestNeighbors(n_neighbors=9).fit(np.arange(4.0)[:, None], [0, 1, 2, 3])
    with pytest.raises(ValueError):
        knn.predict([[0.0]])
