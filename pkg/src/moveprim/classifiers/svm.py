"""Linear soft-margin SVM trained by sequential minimal optimization."""
from dataclasses import dataclass
import warnings

import numba
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_X_y

from ..core import N_CLASSES
from ..errors import SingleClass
from ._base import argmax_lowest, check_query, check_training_data

TAU = 1e-12
DEFAULT_CACHE_BYTES = 2 << 30


class LinearKernel:
    """Gram-matrix storage for a fixed sample matrix.

    The full Gram matrix is materialized when it fits in ``cache_bytes``;
    otherwise columns are computed on demand into an LRU slot cache. One
    instance may be shared by several machines trained on the same rows.
    """

    def __init__(self, X, cache_bytes=DEFAULT_CACHE_BYTES):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        n = self.X.shape[0]
        self.diag = np.einsum("ij,ij->i", self.X, self.X)
        if n * n * 8 <= cache_bytes:
            self.full = self.X @ self.X.T
            slots = 0
        else:
            self.full = np.empty((0, 0))
            slots = int(min(n, max(2, cache_bytes // (8 * n))))
        self.cache = np.empty((slots, n if slots else 0))
        self.slot_of = np.full(n, -1, dtype=np.int64)
        self.owner = np.full(slots, -1, dtype=np.int64)
        self.last_used = np.zeros(slots, dtype=np.int64)
        self.clock = np.zeros(1, dtype=np.int64)

    def column(self, i):
        if self.full.shape[0]:
            return self.full[i]
        return _column(self.X, self.cache, self.slot_of, self.owner, self.last_used, self.clock, i)


@numba.njit(cache=True)
def _column(X, cache, slot_of, owner, last_used, clock, i):
    clock[0] += 1
    slot = slot_of[i]
    if slot < 0:
        slot = 0
        for s in range(owner.shape[0]):
            if last_used[s] < last_used[slot]:
                slot = s
        if owner[slot] >= 0:
            slot_of[owner[slot]] = -1
        cache[slot] = np.dot(X, X[i])
        owner[slot] = i
        slot_of[i] = slot
    last_used[slot] = clock[0]
    return cache[slot]


@numba.njit(cache=True)
def _in_up(y, a, C):
    return a < C if y > 0 else a > 0


@numba.njit(cache=True)
def _in_low(y, a, C):
    return a > 0 if y > 0 else a < C


@numba.njit(cache=True)
def _reconstruct(X, y, alpha, grad):
    # linear kernel: G = y * (X w) - 1 with w = sum_i alpha_i y_i x_i
    w = np.zeros(X.shape[1])
    for t in range(y.shape[0]):
        if alpha[t] != 0.0:
            w += (alpha[t] * y[t]) * X[t]
    grad[:] = y * np.dot(X, w) - 1.0


@numba.njit(cache=True)
def _shrink(y, alpha, grad, C, act, m):
    # drop bound variables that cannot re-enter the working set soon
    gmax1 = -np.inf
    gmax2 = -np.inf
    for k in range(m):
        t = act[k]
        if _in_up(y[t], alpha[t], C):
            gmax1 = max(gmax1, -y[t] * grad[t])
        if _in_low(y[t], alpha[t], C):
            gmax2 = max(gmax2, y[t] * grad[t])
    keep = 0
    out = np.empty(m, dtype=np.int64)
    dropped = 0
    for k in range(m):
        t = act[k]
        g = grad[t]
        shrunk = False
        if alpha[t] >= C:
            shrunk = -g > gmax1 if y[t] > 0 else -g > gmax2
        elif alpha[t] <= 0:
            shrunk = g > gmax2 if y[t] > 0 else g > gmax1
        if shrunk:
            out[m - 1 - dropped] = t
            dropped += 1
        else:
            out[keep] = t
            keep += 1
    act[:m] = out
    return keep, gmax1 + gmax2


@numba.njit(cache=True)
def _select(X, y, C, tol, act, m, full, diag, cache, slot_of, owner, last_used, clock, alpha, grad):
    # i: maximal violator in I_up; j: second-order choice in I_low
    gmax = -np.inf
    i = -1
    gmin = np.inf
    for k in range(m):
        t = act[k]
        v = -y[t] * grad[t]
        if _in_up(y[t], alpha[t], C) and v > gmax:
            gmax = v
            i = t
        if _in_low(y[t], alpha[t], C) and v < gmin:
            gmin = v
    if i < 0 or gmax - gmin < tol:
        return i, -1
    if full.shape[0] > 0:
        Ki = full[i]
    else:
        Ki = _column(X, cache, slot_of, owner, last_used, clock, i)
    j = -1
    best = np.inf
    for k in range(m):
        t = act[k]
        if not _in_low(y[t], alpha[t], C):
            continue
        diff = gmax + y[t] * grad[t]
        if diff > 0:
            quad = diag[i] + diag[t] - 2.0 * Ki[t]
            if quad <= 0:
                quad = TAU
            obj = -(diff * diff) / quad
            if obj < best:
                best = obj
                j = t
    return i, j


@numba.njit(cache=True)
def _smo_loop(X, y, C, tol, max_iter, shrinking, full, diag, cache, slot_of, owner, last_used, clock,
              alpha, grad):
    n = y.shape[0]
    use_full = full.shape[0] > 0
    act = np.arange(n)
    m = n
    unshrunk = False
    period = min(n, 1000)
    counter = period
    it = 0
    converged = False
    while it < max_iter:
        if shrinking:
            counter -= 1
            if counter == 0:
                counter = period
                m_new, gap = _shrink(y, alpha, grad, C, act, m)
                if not unshrunk and gap <= 10 * tol:
                    # close to optimal: restore everything once before finishing
                    unshrunk = True
                    _reconstruct(X, y, alpha, grad)
                    act[:] = np.arange(n)
                    m, gap = _shrink(y, alpha, grad, C, act, n)
                else:
                    m = m_new
        i, j = _select(X, y, C, tol, act, m, full, diag, cache, slot_of, owner, last_used, clock, alpha, grad)
        if j < 0:
            if m == n:
                converged = True
                break
            # optimal on the active set; verify on all variables
            _reconstruct(X, y, alpha, grad)
            act[:] = np.arange(n)
            m = n
            i, j = _select(X, y, C, tol, act, m, full, diag, cache, slot_of, owner, last_used, clock, alpha, grad)
            if j < 0:
                converged = True
                break
            counter = 1
        if use_full:
            Ki = full[i]
            Kj = full[j]
        else:
            Kj = _column(X, cache, slot_of, owner, last_used, clock, j)
            Ki = _column(X, cache, slot_of, owner, last_used, clock, i)

        ai = alpha[i]
        aj = alpha[j]
        yi = y[i]
        yj = y[j]
        a = diag[i] + diag[j] - 2.0 * Ki[j]
        if a <= 0:
            a = TAU
        if yi != yj:
            delta = (-grad[i] - grad[j]) / a
            d = ai - aj
            ni = ai + delta
            nj = aj + delta
            if d > 0:
                if nj < 0:
                    nj = 0.0
                    ni = d
            elif ni < 0:
                ni = 0.0
                nj = -d
            if d > 0:
                if ni > C:
                    ni = C
                    nj = C - d
            elif nj > C:
                nj = C
                ni = C + d
        else:
            delta = (grad[i] - grad[j]) / a
            s = ai + aj
            ni = ai - delta
            nj = aj + delta
            if s > C:
                if ni > C:
                    ni = C
                    nj = s - C
                if nj > C:
                    nj = C
                    ni = s - C
            else:
                if nj < 0:
                    nj = 0.0
                    ni = s
                if ni < 0:
                    ni = 0.0
                    nj = s
        alpha[i] = ni
        alpha[j] = nj
        ci = yi * (ni - ai)
        cj = yj * (nj - aj)
        for k in range(m):
            t = act[k]
            grad[t] += y[t] * (ci * Ki[t] + cj * Kj[t])
        it += 1
    if m < n:
        _reconstruct(X, y, alpha, grad)
    return it, converged


@dataclass
class BinaryMachine:
    """Solution of one two-class dual problem."""

    alpha: np.ndarray
    y: np.ndarray
    coef: np.ndarray
    intercept: float
    C: float
    n_iter: int
    converged: bool

    def decision_function(self, X):
        return X @ self.coef + self.intercept


def smo_binary(X, y, C=1.0, tol=1e-3, max_iter=None, kernel=None, shrinking=True):
    """Solve the soft-margin dual with second-order working-set selection.

    ``y`` holds -1/+1 labels. Iterates until the maximal KKT violation
    ``max_{I_up} -y G - min_{I_low} -y G`` drops below ``tol``. With
    ``shrinking`` the scan periodically skips bound variables unlikely to
    move; the stopping rule is always re-checked on all variables.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise SingleClass("both classes (-1 and +1) must be present")
    n = X.shape[0]
    if kernel is None:
        kernel = LinearKernel(X)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it, converged = _smo_loop(kernel.X, y, float(C), float(tol), int(max_iter), bool(shrinking), kernel.full, kernel.diag,
                              kernel.cache, kernel.slot_of, kernel.owner, kernel.last_used, kernel.clock,
                              alpha, grad)
    if not converged:
        warnings.warn(f"SMO stopped after {max_iter} iterations without reaching tol={tol}",
                      ConvergenceWarning, stacklevel=2)

    pos = y > 0
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = np.min(yg[ub_mask]) if ub_mask.any() else np.inf
        lb = np.max(yg[lb_mask]) if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub + lb) else float(ub if np.isfinite(ub) else lb)
    coef = X.T @ (alpha * y)
    return BinaryMachine(alpha, y, coef, -rho, float(C), int(it), bool(converged))


class BinarySVM(ClassifierMixin, BaseEstimator):
    """Two-class linear SVM on -1/+1 labels."""

    def __init__(self, C=1.0, tol=1e-3, max_iter=None, shrinking=True):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.shrinking = shrinking

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.machine_ = smo_binary(X, y, self.C, self.tol, self.max_iter, shrinking=self.shrinking)
        self.coef_ = self.machine_.coef
        self.intercept_ = self.machine_.intercept
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_query(self, X, "coef_")
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)


class OneVsAllSVM(ClassifierMixin, BaseEstimator):
    """One binary linear SVM per class (class k against the rest).

    Parameters
    ----------
    C : float, default 1.0
        Box constraint on the dual coefficients.
    tol : float, default 1e-3
        KKT violation tolerance of the SMO stopping rule.
    max_iter : int or None
        SMO iteration cap per machine; ``None`` means ``max(1e5, 100 n)``.
    cache_bytes : int
        Memory allowed for Gram-matrix storage, shared by all machines.
    standardize : bool, default True
        Scale each feature to zero mean and unit variance (training rows)
        before solving. ``coef_`` and ``intercept_`` are always expressed
        in the original feature space.
    shrinking : bool, default True
        Use active-set shrinking inside the SMO solver.
    """

    def __init__(self, C=1.0, tol=1e-3, max_iter=None, n_classes=N_CLASSES,
                 cache_bytes=DEFAULT_CACHE_BYTES, standardize=True, shrinking=True):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.n_classes = n_classes
        self.cache_bytes = cache_bytes
        self.standardize = standardize
        self.shrinking = shrinking

    def fit(self, X, y):
        X, y, _ = check_training_data(X, y, self.n_classes)
        if self.standardize:
            self.center_ = X.mean(axis=0)
            scale = X.std(axis=0)
            self.scale_ = np.where(scale > 1e-12, scale, 1.0)
        else:
            self.center_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = (X - self.center_) / self.scale_
        kernel = LinearKernel(Z, self.cache_bytes)
        self.machines_ = []
        for k in range(self.n_classes):
            yk = np.where(y == k, 1.0, -1.0)
            self.machines_.append(smo_binary(Z, yk, self.C, self.tol, self.max_iter, kernel, self.shrinking))
        del kernel
        W = np.stack([m.coef for m in self.machines_]) / self.scale_
        self.coef_ = W
        self.intercept_ = np.array([m.intercept for m in self.machines_]) - W @ self.center_
        self.classes_ = np.arange(self.n_classes)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_query(self, X, "coef_")
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        return argmax_lowest(self.decision_function(X))
