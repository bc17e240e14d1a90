"""MAJORITY baseline and the three classical classifiers.

All models expose an n x C score matrix (log-posteriors, probabilities
or decision values) so the same ranking-based ROC-AUC applies to each,
and all are deterministic given data and hyperparameters. Argmax ties
resolve toward the smaller class id throughout.

Feature matrices may be dense ndarrays or scipy CSR; fitting never
densifies anything larger than d x d.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import (
    DegenerateLabels,
    DimensionMismatch,
    EmptyTrainingSet,
    InvalidConfig,
    IoFailure,
    NonFiniteLoss,
)

RIDGE_DENSE_LIMIT = 20000  # normal equations up to this many columns, CG above


def _as_2d(X):
    if sp.issparse(X):
        return X.tocsr()
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _check_dim(X, d: int) -> None:
    if X.shape[1] != d:
        raise DimensionMismatch(f"input has dim {X.shape[1]}, model expects {d}")


# --- MAJORITY ----------------------------------------------------------------

@dataclass
class MajorityModel:
    majority_class: int
    class_count: int


def majority_fit(labels, class_count: int | None = None) -> MajorityModel:
    """Most frequent training class; ties go to the smaller class id."""
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise EmptyTrainingSet("majority baseline needs at least one label")
    counts = np.bincount(y, minlength=class_count or 0)
    return MajorityModel(majority_class=int(np.argmax(counts)), class_count=len(counts))


def majority_predict(model: MajorityModel, n: int) -> np.ndarray:
    return np.full(n, model.majority_class, dtype=np.int64)


def majority_scores(model: MajorityModel, n: int) -> np.ndarray:
    """Constant per-class scores (indicator of the majority class)."""
    scores = np.zeros((n, model.class_count))
    scores[:, model.majority_class] = 1.0
    return scores


# --- Gaussian Naive Bayes ----------------------------------------------------

@dataclass
class GaussianNbModel:
    log_priors: np.ndarray  # (C,)
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C, d), floored
    class_count: int
    input_dim: int


def gnb_fit(X, y, class_count: int | None = None) -> GaussianNbModel:
    """Per-class Gaussian likelihoods with a relative variance floor.

    The floor is 1e-9 times the largest per-feature variance of the whole
    training matrix (an absolute 1e-9 when all features are constant), so
    singleton classes and constant features stay finite.
    """
    X = _as_2d(X)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise EmptyTrainingSet("gnb_fit needs at least one sample")
    n, d = X.shape
    C = class_count or int(y.max()) + 1

    if sp.issparse(X):
        Xsq = X.multiply(X)
        global_mean = np.asarray(X.mean(axis=0)).ravel()
        global_var = np.asarray(Xsq.mean(axis=0)).ravel() - global_mean**2
    else:
        global_var = X.var(axis=0)
    max_var = float(global_var.max()) if d else 0.0
    eps = 1e-9 * max_var if max_var > 0 else 1e-9

    priors = np.bincount(y, minlength=C).astype(np.float64) / n
    means = np.zeros((C, d))
    variances = np.zeros((C, d))
    for c in range(C):
        rows = np.flatnonzero(y == c)
        if rows.size == 0:
            variances[c] = eps
            continue
        Xc = X[rows]
        if sp.issparse(Xc):
            mu = np.asarray(Xc.mean(axis=0)).ravel()
            ex2 = np.asarray(Xc.multiply(Xc).mean(axis=0)).ravel()
        else:
            mu = Xc.mean(axis=0)
            ex2 = (Xc**2).mean(axis=0)
        means[c] = mu
        variances[c] = np.maximum(ex2 - mu**2, 0.0) + eps

    with np.errstate(divide="ignore"):
        log_priors = np.log(priors)
    return GaussianNbModel(log_priors, means, variances, C, d)


def gnb_scores(model: GaussianNbModel, X) -> np.ndarray:
    """Per-class log-posteriors (up to the shared evidence term).

    Written as a quadratic form const_c + x . a_c + (x*x) . b_c so sparse
    inputs never densify.
    """
    X = _as_2d(X)
    _check_dim(X, model.input_dim)
    inv_var = 1.0 / model.variances
    a = (model.means * inv_var).T  # (d, C)
    b = (-0.5 * inv_var).T  # (d, C)
    const = (
        model.log_priors
        - 0.5 * np.sum(np.log(2.0 * np.pi * model.variances), axis=1)
        - 0.5 * np.sum(model.means**2 * inv_var, axis=1)
    )
    if sp.issparse(X):
        Xf = X.astype(np.float64)
        scores = np.asarray(Xf @ a) + np.asarray(Xf.multiply(Xf) @ b)
    else:
        scores = X @ a + (X * X) @ b
    return scores + const


def gnb_predict(model: GaussianNbModel, X) -> np.ndarray:
    return np.argmax(gnb_scores(model, X), axis=1)


# --- multinomial logistic regression ------------------------------------------

@dataclass
class LogisticRegressionModel:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    l2_lambda: float
    n_iters: int
    loss_trace: list[float]


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_grad(weights, bias, X, y, l2_lambda):
    """Multinomial cross-entropy plus (lambda/2)||W||^2 and its gradients."""
    n = X.shape[0]
    logits = np.asarray(X @ weights.T) + bias
    probs = _softmax(logits)
    point = probs[np.arange(n), y]
    loss = -np.mean(np.log(np.maximum(point, 1e-300))) + 0.5 * l2_lambda * np.sum(weights**2)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    if sp.issparse(X):
        grad_w = np.asarray((X.T @ delta)).T + l2_lambda * weights
    else:
        grad_w = delta.T @ X + l2_lambda * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def logreg_fit(
    X,
    y,
    l2_lambda: float = 1e-4,
    max_iters: int = 1000,
    tol: float = 1e-6,
    seed: int = 0,
    class_count: int | None = None,
) -> LogisticRegressionModel:
    """Full-batch gradient descent with Armijo backtracking from zero init.

    The objective decreases monotonically across accepted steps; iteration
    stops when the joint gradient norm drops below ``tol``. ``seed`` is
    accepted for interface symmetry but the zero init makes it inert.
    """
    X = _as_2d(X)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    C = class_count or (int(y.max()) + 1 if y.size else 0)
    if C < 2:
        raise DegenerateLabels(f"logistic regression needs >= 2 classes, got {C}")
    if sp.issparse(X):
        X = X.astype(np.float64)

    weights = np.zeros((C, d))
    bias = np.zeros(C)
    step = 1.0
    loss, grad_w, grad_b = logreg_loss_grad(weights, bias, X, y, l2_lambda)
    trace = [loss]
    iters = 0
    for iters in range(1, max_iters + 1):
        gnorm_sq = float(np.sum(grad_w**2) + np.sum(grad_b**2))
        if np.sqrt(gnorm_sq) <= tol:
            iters -= 1
            break
        accepted = False
        for _ in range(60):
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            cand_loss, cand_gw, cand_gb = logreg_loss_grad(cand_w, cand_b, X, y, l2_lambda)
            if not np.isfinite(cand_loss):
                raise NonFiniteLoss("logistic loss became non-finite; rescale the features")
            if cand_loss <= loss - 1e-4 * step * gnorm_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # step underflow: gradient no longer improves the objective
        weights, bias = cand_w, cand_b
        loss, grad_w, grad_b = cand_loss, cand_gw, cand_gb
        trace.append(loss)
        step = min(step * 2.0, 1e6)
    return LogisticRegressionModel(weights, bias, l2_lambda, iters, trace)


def logreg_proba(model: LogisticRegressionModel, X) -> np.ndarray:
    X = _as_2d(X)
    _check_dim(X, model.weights.shape[1])
    if sp.issparse(X):
        X = X.astype(np.float64)
    return _softmax(np.asarray(X @ model.weights.T) + model.bias)


def logreg_predict(model: LogisticRegressionModel, X) -> np.ndarray:
    return np.argmax(logreg_proba(model, X), axis=1)


# --- ridge classifier ----------------------------------------------------------

@dataclass
class RidgeClassifierModel:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    alpha: float


def ridge_fit(X, y, alpha: float = 1.0, class_count: int | None = None) -> RidgeClassifierModel:
    """One-vs-rest regularized least squares against +/-1 targets.

    The intercept rides on an unpenalized constant column. Up to
    RIDGE_DENSE_LIMIT columns the d x d normal equations are solved
    directly; above that a matrix-free conjugate-gradient solve (rtol
    1e-8) runs per class. Both paths are deterministic.
    """
    if not alpha > 0:
        raise InvalidConfig(f"ridge alpha must be positive, got {alpha}")
    X = _as_2d(X)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise EmptyTrainingSet("ridge_fit needs at least one sample")
    n, d = X.shape
    C = class_count or int(y.max()) + 1
    targets = np.full((n, C), -1.0)
    targets[np.arange(n), y] = 1.0

    if sp.issparse(X):
        X = X.astype(np.float64)
        A = sp.hstack([X, np.ones((n, 1))], format="csr")
    else:
        A = np.hstack([X, np.ones((n, 1))])
    penalty = np.ones(d + 1)
    penalty[d] = 0.0  # intercept stays unpenalized

    if d + 1 <= RIDGE_DENSE_LIMIT:
        if sp.issparse(A):
            gram = (A.T @ A).toarray()
        else:
            gram = A.T @ A
        gram[np.diag_indices_from(gram)] += alpha * penalty
        rhs = np.asarray(A.T @ targets)
        solution = np.linalg.solve(gram, rhs)  # (d+1, C)
    else:
        def matvec(v):
            return np.asarray(A.T @ (A @ v)).ravel() + alpha * penalty * v

        op = LinearOperator((d + 1, d + 1), matvec=matvec, dtype=np.float64)
        solution = np.zeros((d + 1, C))
        for c in range(C):
            rhs_c = np.asarray(A.T @ targets[:, c]).ravel()
            sol, info = cg(op, rhs_c, rtol=1e-8, atol=0.0, maxiter=10 * (d + 1))
            if info != 0:
                raise NonFiniteLoss(f"ridge CG failed to converge for class {c} (info={info})")
            solution[:, c] = sol

    return RidgeClassifierModel(weights=solution[:d].T.copy(), bias=solution[d].copy(), alpha=alpha)


def ridge_scores(model: RidgeClassifierModel, X) -> np.ndarray:
    X = _as_2d(X)
    _check_dim(X, model.weights.shape[1])
    if sp.issparse(X):
        X = X.astype(np.float64)
    return np.asarray(X @ model.weights.T) + model.bias


def ridge_predict(model: RidgeClassifierModel, X) -> np.ndarray:
    return np.argmax(ridge_scores(model, X), axis=1)


# --- serialization ---------------------------------------------------------------

_MODEL_KINDS = {
    MajorityModel: "majority",
    GaussianNbModel: "gnb",
    LogisticRegressionModel: "logreg",
    RidgeClassifierModel: "ridge",
}


def save_model(path: str, model) -> None:
    """Versioned binary blob: model tag, hyperparameters, weight arrays."""
    kind = _MODEL_KINDS.get(type(model))
    if kind is None:
        raise InvalidConfig(f"cannot serialize model of type {type(model).__name__}")
    arrays: dict[str, np.ndarray] = {}
    meta: dict = {"format": "seqclass-model/1", "kind": kind}
    if kind == "majority":
        meta.update(majority_class=model.majority_class, class_count=model.class_count)
    elif kind == "gnb":
        meta.update(class_count=model.class_count, input_dim=model.input_dim)
        arrays = {"log_priors": model.log_priors, "means": model.means, "variances": model.variances}
    elif kind == "logreg":
        meta.update(l2_lambda=model.l2_lambda, n_iters=model.n_iters, loss_trace=model.loss_trace)
        arrays = {"weights": model.weights, "bias": model.bias}
    else:
        meta.update(alpha=model.alpha)
        arrays = {"weights": model.weights, "bias": model.bias}
    try:
        with open(path, "wb") as f:  # file handle keeps np.savez from renaming to *.npz
            np.savez(f, __meta__=json.dumps(meta, sort_keys=True), **arrays)
    except OSError as exc:
        raise IoFailure(f"cannot write model {path!r}: {exc}") from exc


def load_model(path: str):
    try:
        blob = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise IoFailure(f"cannot read model {path!r}: {exc}") from exc
    meta = json.loads(str(blob["__meta__"]))
    kind = meta["kind"]
    if kind == "majority":
        return MajorityModel(meta["majority_class"], meta["class_count"])
    if kind == "gnb":
        return GaussianNbModel(
            blob["log_priors"], blob["means"], blob["variances"],
            meta["class_count"], meta["input_dim"],
        )
    if kind == "logreg":
        return LogisticRegressionModel(
            blob["weights"], blob["bias"], meta["l2_lambda"], meta["n_iters"], meta["loss_trace"]
        )
    if kind == "ridge":
        return RidgeClassifierModel(blob["weights"], blob["bias"], meta["alpha"])
    raise IoFailure(f"unknown model kind {kind!r} in {path!r}")


def model_summary(model) -> dict:
    """JSON-friendly hyperparameters and training diagnostics."""
    kind = _MODEL_KINDS.get(type(model))
    if kind == "majority":
        return {"kind": kind, "majority_class": model.majority_class, "class_count": model.class_count}
    if kind == "gnb":
        return {"kind": kind, "class_count": model.class_count, "input_dim": model.input_dim}
    if kind == "logreg":
        return {
            "kind": kind,
            "l2_lambda": model.l2_lambda,
            "n_iters": model.n_iters,
            "final_loss": model.loss_trace[-1] if model.loss_trace else None,
        }
    if kind == "ridge":
        return {"kind": kind, "alpha": model.alpha}
    raise InvalidConfig(f"unknown model type {type(model).__name__}")
