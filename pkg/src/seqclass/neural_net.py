"""One-hidden-layer fully connected classifier trained with Adam.

Architecture: input -> dense(hidden, ReLU) -> dense(classes, softmax),
optimized with mini-batch Adam against integer-label cross-entropy.
Hidden width defaults to the input dimension (one hidden unit per
feature); batch size defaults to 100 and training runs a fixed 10
epochs with a seeded shuffle per epoch. Inputs may be dense or CSR;
batches are the only thing ever densified.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    InvalidConfig,
    IoFailure,
    LabelOutOfRange,
    NonFiniteLoss,
)

PROB_FLOOR = 1e-12  # keeps the loss finite under confident mistakes


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    class_count: int
    hidden_width: int | None = None  # None means one hidden unit per feature
    batch_size: int = 100
    epochs: int = 10
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def resolved_hidden(self) -> int:
        return self.input_dim if self.hidden_width is None else self.hidden_width

    def validate(self) -> None:
        if self.input_dim < 1 or self.class_count < 1:
            raise InvalidConfig("input_dim and class_count must be >= 1")
        if self.resolved_hidden() < 1:
            raise InvalidConfig("hidden_width must be >= 1")
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidConfig("batch_size and epochs must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be positive")


@dataclass
class FeedForwardNet:
    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (C, h)
    b2: np.ndarray  # (C,)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def nn_init(config: NetConfig) -> FeedForwardNet:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    config.validate()
    d, h, C = config.input_dim, config.resolved_hidden(), config.class_count
    rng = np.random.default_rng([config.seed, 0])
    lim1 = np.sqrt(6.0 / (d + h))
    lim2 = np.sqrt(6.0 / (h + C))
    return FeedForwardNet(
        w1=rng.uniform(-lim1, lim1, size=(h, d)),
        b1=np.zeros(h),
        w2=rng.uniform(-lim2, lim2, size=(C, h)),
        b2=np.zeros(C),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def nn_forward(net: FeedForwardNet, X) -> np.ndarray:
    """Class probabilities; rows sum to 1 within 1e-9."""
    if X.shape[1] != net.w1.shape[1]:
        raise DimensionMismatch(f"input has dim {X.shape[1]}, net expects {net.w1.shape[1]}")
    if sp.issparse(X):
        hidden = np.asarray(X.astype(np.float64) @ net.w1.T) + net.b1
    else:
        hidden = np.asarray(X, dtype=np.float64) @ net.w1.T + net.b1
    np.maximum(hidden, 0.0, out=hidden)
    return _softmax(hidden @ net.w2.T + net.b2)


def nn_scores(net: FeedForwardNet, X) -> np.ndarray:
    return nn_forward(net, X)


def nn_predict(net: FeedForwardNet, X) -> np.ndarray:
    return np.argmax(nn_forward(net, X), axis=1)


def nn_loss(probs: np.ndarray, y) -> float:
    """Mean integer-label cross-entropy with a 1e-12 probability floor."""
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= probs.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {probs.shape[1]})")
    point = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.maximum(point, PROB_FLOOR))))


def nn_loss_and_grads(net: FeedForwardNet, X, y) -> tuple[float, list[np.ndarray]]:
    """Loss on a batch plus gradients for (w1, b1, w2, b2)."""
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    sparse_in = sp.issparse(X)
    Xf = X.astype(np.float64) if sparse_in else np.asarray(X, dtype=np.float64)
    pre = np.asarray(Xf @ net.w1.T) + net.b1
    hidden = np.maximum(pre, 0.0)
    probs = _softmax(hidden @ net.w2.T + net.b2)
    loss = nn_loss(probs, y)

    delta2 = probs.copy()
    delta2[np.arange(n), y] -= 1.0
    delta2 /= n
    g_w2 = delta2.T @ hidden
    g_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ net.w2) * (pre > 0.0)
    if sparse_in:
        g_w1 = np.asarray(Xf.T @ delta1).T
    else:
        g_w1 = delta1.T @ Xf
    g_b1 = delta1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2]


def adam_init(net: FeedForwardNet) -> AdamState:
    params = [net.w1, net.b1, net.w2, net.b2]
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
    )


def adam_step(net: FeedForwardNet, grads: list[np.ndarray], state: AdamState, config: NetConfig) -> None:
    """Bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    params = [net.w1, net.b1, net.w2, net.b2]
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + config.adam_eps)


def epoch_shuffle_orders(seed: int, n: int, epochs: int) -> list[np.ndarray]:
    """The per-epoch visit orders nn_train uses for a given seed."""
    rng = np.random.default_rng([seed, 1])
    return [rng.permutation(n) for _ in range(epochs)]


def nn_train(
    config: NetConfig,
    X,
    y,
    *,
    epoch_orders: list[np.ndarray] | None = None,
) -> tuple[FeedForwardNet, list[float]]:
    """Train for the configured number of epochs; returns per-epoch mean loss.

    The seeded shuffle alone defines the visit order; ``epoch_orders``
    overrides it (index arrays, one per epoch) so callers can reproduce a
    run on re-ordered inputs. The final partial batch is trained, not
    dropped. Raises NonFiniteLoss if the loss diverges.
    """
    config.validate()
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n < 1:
        raise InvalidConfig("training needs at least one sample")
    if y.min() < 0 or y.max() >= config.class_count:
        raise LabelOutOfRange(f"labels must lie in [0, {config.class_count})")
    if X.shape[1] != config.input_dim:
        raise DimensionMismatch(f"X has dim {X.shape[1]}, config says {config.input_dim}")

    net = nn_init(config)
    state = adam_init(net)
    if epoch_orders is None:
        epoch_orders = epoch_shuffle_orders(config.seed, n, config.epochs)
    if len(epoch_orders) != config.epochs:
        raise InvalidConfig("epoch_orders must supply one index array per epoch")

    sparse_in = sp.issparse(X)
    trace: list[float] = []
    for order in epoch_orders:
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            Xb = X[batch_idx] if sparse_in else np.asarray(X)[batch_idx]
            yb = y[batch_idx]
            loss, grads = nn_loss_and_grads(net, Xb, yb)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training loss diverged at step {state.t + 1}")
            adam_step(net, grads, state, config)
            total += loss * len(batch_idx)
        trace.append(total / n)
    return net, trace


# --- checkpointing ------------------------------------------------------------

def save_checkpoint(path: str, net: FeedForwardNet, config: NetConfig) -> None:
    meta = {
        "format": "seqclass-net/1",
        "config": {
            "input_dim": config.input_dim,
            "class_count": config.class_count,
            "hidden_width": config.hidden_width,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "beta1": config.beta1,
            "beta2": config.beta2,
            "adam_eps": config.adam_eps,
            "seed": config.seed,
        },
    }
    try:
        with open(path, "wb") as f:
            np.savez(f, __meta__=json.dumps(meta, sort_keys=True),
                     w1=net.w1, b1=net.b1, w2=net.w2, b2=net.b2)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path!r}: {exc}") from exc


def load_checkpoint(path: str) -> tuple[FeedForwardNet, NetConfig]:
    try:
        blob = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path!r}: {exc}") from exc
    meta = json.loads(str(blob["__meta__"]))
    if meta.get("format") != "seqclass-net/1":
        raise IoFailure(f"{path!r} is not a network checkpoint")
    config = NetConfig(**meta["config"])
    net = FeedForwardNet(w1=blob["w1"], b1=blob["b1"], w2=blob["w2"], b2=blob["b2"])
    return net, config


def save_loss_trace(path: str, trace: list[float]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "mean_loss"])
            for epoch, loss in enumerate(trace, start=1):
                writer.writerow([epoch, f"{loss:.12g}"])
    except OSError as exc:
        raise IoFailure(f"cannot write loss trace {path!r}: {exc}") from exc
