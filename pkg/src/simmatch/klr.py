"""Kernel logistic regression with an RBF kernel, fitted by damped Newton (IRLS)."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import entr, expit

log = logging.getLogger(__name__)

PROB_EPS = 1e-12
DEFAULT_WIDTH = 0.05
DEFAULT_RIDGE = 1e-4


class ConvergenceWarning(UserWarning):
    pass


def rbf_kernel(x, y, width: float) -> float:
    """exp(-||x - y||^2 / (2 width^2))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if width <= 0:
        raise ValueError("kernel width must be positive")
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * width * width)))


def kernel_matrix(a: np.ndarray, b: np.ndarray, width: float) -> np.ndarray:
    """Pairwise RBF kernel between the rows of ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sq = (
        np.einsum("ij,ij->i", a, a)[:, None]
        + np.einsum("ij,ij->i", b, b)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * width * width))


def objective(params: np.ndarray, K: np.ndarray, y: np.ndarray, ridge: float) -> float:
    """Negative log-likelihood plus ``ridge/2 * ||alpha||^2``.

    ``params`` is ``alpha`` followed by the bias.
    """
    alpha, b = params[:-1], params[-1]
    f = K @ alpha + b
    s = 2.0 * y - 1.0
    return float(np.logaddexp(0.0, -s * f).sum() + 0.5 * ridge * alpha @ alpha)


def gradient(params: np.ndarray, K: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    alpha, b = params[:-1], params[-1]
    r = expit(K @ alpha + b) - y
    return np.concatenate([K @ r + ridge * alpha, [r.sum()]])


def _hessian(params, K, ridge):
    alpha, b = params[:-1], params[-1]
    p = expit(K @ alpha + b)
    w = p * (1.0 - p)
    n = len(alpha)
    H = np.empty((n + 1, n + 1))
    KW = K * w
    H[:n, :n] = KW @ K
    H[:n, :n].flat[:: n + 1] += ridge
    H[:n, n] = H[n, :n] = KW.sum(axis=1)
    H[n, n] = w.sum()
    return H


@dataclass(frozen=True)
class KlrModel:
    support_indices: np.ndarray
    support: np.ndarray
    dual_weights: np.ndarray
    bias: float
    kernel_width: float
    ridge: float
    converged: bool = True
    iterations: int = 0

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.support.shape[1]:
            raise ValueError(
                f"dimension mismatch: model has {self.support.shape[1]} features, got {x.shape[1]}"
            )
        return kernel_matrix(x, self.support, self.kernel_width) @ self.dual_weights + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """P(class 1) for each row of ``x``, clamped into (0, 1)."""
        return np.clip(expit(self.decision_function(x)), PROB_EPS, 1.0 - PROB_EPS)


def fit_arrays(
    X: np.ndarray,
    y: np.ndarray,
    width: float = DEFAULT_WIDTH,
    ridge: float = DEFAULT_RIDGE,
    *,
    indices: Optional[np.ndarray] = None,
    init: Optional[np.ndarray] = None,
    tol: float = 1e-6,
    max_iter: int = 100,
    K: Optional[np.ndarray] = None,
    history: Optional[list] = None,
) -> KlrModel:
    """Fit KLR on raw arrays. Newton steps with backtracking line search.

    Stops when the gradient 2-norm drops to ``tol``; after ``max_iter``
    iterations a :class:`ConvergenceWarning` is issued and the last iterate
    is returned.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if width <= 0:
        raise ValueError("kernel width must be positive")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise ValueError("training labels must contain both classes")
    n = len(y)
    if K is None:
        K = kernel_matrix(X, X, width)
    params = np.zeros(n + 1) if init is None else np.array(init, dtype=np.float64)
    obj = objective(params, K, y, ridge)
    if history is not None:
        history.append(obj)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(params, K, y, ridge)
        if np.linalg.norm(g) <= tol:
            converged = True
            it -= 1
            break
        H = _hessian(params, K, ridge)
        # tiny jitter keeps the bias row solvable when ridge == 0
        H.flat[:: n + 2] += 1e-12
        try:
            step = linalg.solve(H, g, assume_a="pos", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        slope = g @ step
        if not slope > 0:
            step, slope = g, g @ g
        elif slope <= 8 * np.finfo(float).eps * max(1.0, abs(obj)):
            # Newton decrement below the objective's resolution: no representable progress left
            converged = True
            it -= 1
            break
        t = 1.0
        while True:
            cand = params - t * step
            new_obj = objective(cand, K, y, ridge)
            if new_obj <= obj - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if not new_obj < obj:
            # objective differences are below rounding noise; judge the
            # full Newton step by the gradient norm instead
            full = params - step
            if np.linalg.norm(gradient(full, K, y, ridge)) < np.linalg.norm(g):
                params, obj = full, objective(full, K, y, ridge)
                if history is not None:
                    history.append(obj)
                continue
            converged = np.linalg.norm(g) <= 10 * tol
            break
        params, obj = cand, new_obj
        if history is not None:
            history.append(obj)
    else:
        converged = np.linalg.norm(gradient(params, K, y, ridge)) <= tol
    if not converged:
        warnings.warn(
            f"KLR fit stopped after {it} iterations without reaching gradient norm {tol}",
            ConvergenceWarning,
            stacklevel=2,
        )
    if indices is None:
        indices = np.arange(n)
    return KlrModel(
        support_indices=np.asarray(indices, dtype=np.int64),
        support=X,
        dual_weights=params[:-1],
        bias=float(params[-1]),
        kernel_width=float(width),
        ridge=float(ridge),
        converged=converged,
        iterations=it,
    )


def fit(pool, width: float = DEFAULT_WIDTH, ridge: float = DEFAULT_RIDGE, **kw) -> KlrModel:
    """Fit on the labeled part of a :class:`~simmatch.data.Pool`."""
    X = pool.dataset.features[pool.labeled]
    return fit_arrays(X, pool.labeled_y, width, ridge, indices=pool.labeled, **kw)


def predict_proba(model: KlrModel, x) -> np.ndarray:
    return model.predict_proba(x)


def entropy(p):
    """Binary class entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probability outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = entr(p) - np.where(p < 1, (1.0 - p) * np.log1p(-p), 0.0)
    return float(h) if h.ndim == 0 else h


def predict(model: KlrModel, x) -> np.ndarray:
    """Hard labels; p = 0.5 goes to class 0."""
    return (model.predict_proba(x) > 0.5).astype(np.int64)


def accuracy(model: KlrModel, dataset, test) -> float:
    test = np.asarray(test, dtype=np.int64)
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = predict(model, dataset.features[test])
    return float(np.mean(pred == dataset.labels[test]))
