"""Dense MLP classifier in numpy: weighted CE and diffMCC losses, AdamW, warm-up + cosine.

diffMCC builds a soft confusion matrix from the predicted probabilities,

    C[k, l] = sum over samples i with y_i = k of  w_k * p[i, l]

computes the K-category MCC from it, and returns ``(1 - MCC)**gamma``. The
exponent is the focal part: it shrinks the loss (and the gradient) of
batches that are already well separated, more so for larger gamma.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataprep import Dataset
from .metrics import macro_f1, ConfusionMatrix

log = logging.getLogger(__name__)

GAMMAS = (1.0, 1.5, 2.0)
LR_FLOOR_RATIO = 1 / 16
CHECKPOINT_MAGIC = "lcenclf-mlp-checkpoint"
CHECKPOINT_VERSION = 1

# hidden-layer templates as multiples of the input width F
ARCHITECTURE_TEMPLATES: tuple[tuple[float, ...], ...] = (
    tuple((a, b, c) for a in range(6, 1, -1) for b in range(a, 1, -1) for c in range(b, 1, -1))
    + ((6, 6), (6, 5), (6, 4), (6, 3), (6, 2), (5, 5), (5, 4), (5, 3), (5, 2), (5, 1), (4, 4),
       (4, 3), (4, 2), (4, 1), (3, 3), (3, 2), (3, 1), (2, 2), (2, 1), (1, 1), (1, 0.5))
    + ((6,), (5,), (4,), (3,), (2,), (1,), (0.5,))
)


def architectures(n_features: int, templates=ARCHITECTURE_TEMPLATES) -> list[tuple[int, ...]]:
    return [tuple(max(1, int(m * n_features)) for m in t) for t in templates]


@dataclass(frozen=True)
class MlpSpec:
    hidden_sizes: tuple[int, ...]
    activation: str = "relu"
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 32
    epochs: int = 50
    warmup_epochs: int = 10
    lr_floor_ratio: float = LR_FLOOR_RATIO
    class_weights: tuple[float, ...] | None = None   # None: all ones
    loss: str = "weighted_ce"
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 1 <= len(self.hidden_sizes) <= 3 or min(self.hidden_sizes) < 1:
            raise ValueError(f"need 1-3 hidden layers of positive width, got {self.hidden_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.loss not in ("weighted_ce", "diffmcc"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.loss == "diffmcc" and self.gamma not in GAMMAS:
            raise ValueError(f"gamma must be one of {GAMMAS}")
        if self.lr_floor_ratio != LR_FLOOR_RATIO:
            raise ValueError("lr_floor_ratio is fixed at 1/16")
        if self.epochs <= self.warmup_epochs or self.warmup_epochs < 1:
            raise ValueError("need epochs > warmup_epochs >= 1")
        if self.lr <= 0 or self.weight_decay < 0 or self.batch_size < 2:
            raise ValueError("lr > 0, weight_decay >= 0 and batch_size >= 2 required")
        if self.class_weights is not None:
            cw = tuple(float(w) for w in self.class_weights)
            if min(cw) <= 0:
                raise ValueError("class weights must be positive")
            object.__setattr__(self, "class_weights", cw)


# ---------------------------------------------------------------------------
# activations and losses


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0).astype(x.dtype)


def _tanhshrink(x):
    return x - np.tanh(x)


def _tanhshrink_grad(x):
    return np.tanh(x) ** 2


ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanhshrink": (_tanhshrink, _tanhshrink_grad)}


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_backward(probs: np.ndarray, g_probs: np.ndarray) -> np.ndarray:
    return probs * (g_probs - (g_probs * probs).sum(axis=1, keepdims=True))


def _weights(class_weights, K):
    w = np.ones(K) if class_weights is None else np.asarray(class_weights, dtype=float)
    if w.shape != (K,):
        raise ValueError(f"expected {K} class weights, got {w.shape}")
    return w


def weighted_ce_loss(probs: np.ndarray, labels: np.ndarray, class_weights=None) -> tuple[float, np.ndarray]:
    """Weighted mean of -log p_true; gradient is with respect to the logits."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, K = probs.shape
    w = _weights(class_weights, K)[labels]
    p_true = probs[np.arange(n), labels]
    if (p_true < 1e-12).any():
        log.debug("weighted_ce_loss: %d true-class probabilities clamped at 1e-12", int((p_true < 1e-12).sum()))
    loss = float((w * -np.log(np.maximum(p_true, 1e-12))).sum() / w.sum())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad *= (w / w.sum())[:, None]
    return loss, grad


def soft_confusion(probs: np.ndarray, labels: np.ndarray, class_weights=None) -> np.ndarray:
    n, K = probs.shape
    w = _weights(class_weights, K)
    onehot = np.zeros((n, K))
    onehot[np.arange(n), labels] = w[labels]
    return onehot.T @ probs


def mcc_from_confusion(C: np.ndarray) -> float:
    """K-category MCC of a (possibly fractional) confusion matrix, as a fraction."""
    s = C.sum()
    t, q = C.sum(axis=1), C.sum(axis=0)
    den = (s * s - q @ q) * (s * s - t @ t)
    return 0.0 if den <= 0 else float((np.trace(C) * s - q @ t) / math.sqrt(den))


def diffmcc_loss(probs: np.ndarray, labels: np.ndarray, class_weights=None,
                 gamma: float = 1.0) -> tuple[float, np.ndarray]:
    """``(1 - MCC_soft)**gamma`` and its gradient with respect to the logits."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n, K = probs.shape
    if np.unique(labels).size < 2:
        raise ValueError("diffMCC needs at least 2 classes in a batch; use a stratified batcher")
    C = soft_confusion(probs, labels, class_weights)
    s, c = C.sum(), np.trace(C)
    t, q = C.sum(axis=1), C.sum(axis=0)   # true and predicted (soft) counts
    d1, d2 = s * s - q @ q, s * s - t @ t
    if d1 * d2 <= (1e-12 * s * s) ** 2:
        log.warning("diffmcc_loss: MCC denominator underflow; loss set to 1 with zero gradient")
        return 1.0, np.zeros_like(probs)
    root = math.sqrt(d1 * d2)
    m = (c * s - q @ t) / root
    # dMCC/dC[k, l]
    d_num = np.eye(K) * s + c - (t[None, :] + q[:, None])
    d_d1 = (2 * s - 2 * q)[None, :]
    d_d2 = (2 * s - 2 * t)[:, None]
    G = d_num / root - 0.5 * m * (d_d1 / d1 + d_d2 / d2)
    base = max(1.0 - m, 0.0)
    loss = base ** gamma
    dloss_dm = -gamma * base ** (gamma - 1) if base > 0 else (-1.0 if gamma == 1 else 0.0)
    w = _weights(class_weights, K)
    g_probs = dloss_dm * w[labels][:, None] * G[labels]
    return float(loss), _softmax_backward(probs, g_probs)


LOSSES = {"weighted_ce": weighted_ce_loss, "diffmcc": diffmcc_loss}


# ---------------------------------------------------------------------------
# network


@dataclass
class TrainedMlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    spec: MlpSpec
    train_loss_curve: list[float] = field(default_factory=list)
    val_f1_curve: list[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def param_count(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))


def param_count(n_inputs: int, hidden_sizes: Sequence[int], n_classes: int) -> int:
    sizes = [n_inputs, *hidden_sizes, n_classes]
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_network(spec: MlpSpec, n_inputs: int, n_classes: int) -> TrainedMlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    rng = np.random.default_rng(spec.seed)
    sizes = [n_inputs, *spec.hidden_sizes, n_classes]
    Ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(a)
        Ws.append(rng.uniform(-bound, bound, size=(a, b)))
        bs.append(rng.uniform(-bound, bound, size=b))
    return TrainedMlp(Ws, bs, spec)


def _forward_cache(net: TrainedMlp, X: np.ndarray):
    act, _ = ACTIVATIONS[net.spec.activation]
    pre, post = [], [X]
    h = X
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        a = h @ W + b
        pre.append(a)
        h = act(a)
        post.append(h)
    logits = h @ net.weights[-1] + net.biases[-1]
    return logits, pre, post


def forward(net: TrainedMlp, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != net.n_inputs:
        raise ValueError(f"batch has {batch.shape[-1]} columns, network expects {net.n_inputs}")
    logits, _, _ = _forward_cache(net, batch)
    return logits, softmax(logits)


def predict(net: TrainedMlp, X: np.ndarray) -> np.ndarray:
    return np.argmax(forward(net, X)[0], axis=1)


def _backward(net: TrainedMlp, pre, post, g_logits):
    _, act_grad = ACTIVATIONS[net.spec.activation]
    gW, gb = [None] * len(net.weights), [None] * len(net.weights)
    g = g_logits
    for layer in range(len(net.weights) - 1, -1, -1):
        gW[layer] = post[layer].T @ g
        gb[layer] = g.sum(axis=0)
        if layer:
            g = (g @ net.weights[layer].T) * act_grad(pre[layer - 1])
    return gW, gb


def lr_at(spec: MlpSpec, epoch: int) -> float:
    """Linear warm-up to ``lr`` over the first epochs, then cosine down to ``lr/16``."""
    W, E = spec.warmup_epochs, spec.epochs
    if epoch < W:
        return spec.lr * (epoch + 1) / W
    floor = spec.lr * spec.lr_floor_ratio
    span = E - 1 - W
    progress = 1.0 if span <= 0 else (epoch - W) / span
    return floor + (spec.lr - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))


def stratified_batches(y: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled batches in which every class is spread round-robin.

    Each class starts at a random batch and deals its (shuffled) samples out
    in turn, so class proportions per batch are close to the global ones.
    A batch that still ends up single-class is merged into its neighbour.
    """
    n = len(y)
    n_batches = max(1, math.ceil(n / batch_size))
    slots: list[list[int]] = [[] for _ in range(n_batches)]
    for k in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == k))
        start = int(rng.integers(n_batches))
        for j, i in enumerate(idx):
            slots[(start + j) % n_batches].append(int(i))
    batches = [np.array(s) for s in slots if s]
    merged: list[np.ndarray] = []
    for b in batches:
        if merged and (np.unique(y[merged[-1]]).size < 2 or np.unique(y[b]).size < 2):
            merged[-1] = np.concatenate([merged[-1], b])
        else:
            merged.append(b)
    if len(merged) > 1 and np.unique(y[merged[-1]]).size < 2:
        last = merged.pop()
        merged[-1] = np.concatenate([merged[-1], last])
    order = rng.permutation(len(merged))
    return [merged[i] for i in order]


def _val_f1(net: TrainedMlp, X: np.ndarray, y: np.ndarray) -> float:
    cm = ConfusionMatrix.from_labels(y, predict(net, X), net.n_classes)
    return macro_f1(cm)


def train(spec: MlpSpec, train: Dataset, val: Dataset | None = None) -> TrainedMlp:
    """Mini-batch AdamW training; returns the epoch with the best validation macro F1.

    Without ``val`` the training set doubles as the selection set.
    """
    X, y, K = np.asarray(train.X, float), train.y, train.n_classes
    val = val if val is not None else train
    net = init_network(spec, X.shape[1], K)
    loss_fn = LOSSES[spec.loss]
    extra = {"gamma": spec.gamma} if spec.loss == "diffmcc" else {}
    rng = np.random.default_rng([spec.seed, 1])
    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    best = (-np.inf, None, -1)
    for epoch in range(spec.epochs):
        lr = lr_at(spec, epoch)
        total, seen = 0.0, 0
        for idx in stratified_batches(y, spec.batch_size, rng):
            logits, pre, post = _forward_cache(net, X[idx])
            loss, g_logits = loss_fn(softmax(logits), y[idx], spec.class_weights, **extra)
            if not np.isfinite(loss) or not np.isfinite(g_logits).all():
                raise FloatingPointError(f"non-finite loss at epoch {epoch} (lr={lr:g}, loss={loss})")
            gW, gb = _backward(net, pre, post, g_logits)
            step += 1
            for p, g, mi, vi in zip(params, gW + gb, m, v):
                p *= 1.0 - lr * spec.weight_decay   # decoupled decay
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                m_hat = mi / (1 - beta1 ** step)
                v_hat = vi / (1 - beta2 ** step)
                p -= lr * m_hat / (np.sqrt(v_hat) + eps)
            total += loss * len(idx)
            seen += len(idx)
        net.train_loss_curve.append(total / seen)
        f1 = _val_f1(net, val.X, val.y)
        net.val_f1_curve.append(f1)
        if f1 > best[0]:
            best = (f1, ([W.copy() for W in net.weights], [b.copy() for b in net.biases]), epoch)
    (Ws, bs), net.best_epoch = best[1], best[2]
    for p, q in zip(net.weights + net.biases, Ws + bs):
        p[...] = q
    return net


# ---------------------------------------------------------------------------
# checkpoints: plain text, floats as C99 hex literals so a round trip is exact


def save_checkpoint(net: TrainedMlp, path: str | Path) -> None:
    lines = [f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}",
             "spec " + json.dumps(asdict(net.spec), sort_keys=True),
             f"best_epoch {net.best_epoch}",
             f"layers {len(net.weights)}"]
    for W, b in zip(net.weights, net.biases):
        lines.append(f"W {W.shape[0]} {W.shape[1]}")
        lines += [" ".join(float(x).hex() for x in row) for row in W]
        lines.append("b " + " ".join(float(x).hex() for x in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path: str | Path) -> TrainedMlp:
    it = iter(Path(path).read_text().splitlines())
    header = next(it)
    if header != f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}":
        raise ValueError(f"unrecognized checkpoint header {header!r}")
    spec_json = next(it).removeprefix("spec ")
    spec = MlpSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in json.loads(spec_json).items()})
    best_epoch = int(next(it).split()[1])
    n_layers = int(next(it).split()[1])
    Ws, bs = [], []
    for _ in range(n_layers):
        _, r, c = next(it).split()
        Ws.append(np.array([[float.fromhex(x) for x in next(it).split()] for _ in range(int(r))]).reshape(int(r), int(c)))
        bs.append(np.array([float.fromhex(x) for x in next(it).split()[1:]]))
    return TrainedMlp(Ws, bs, spec, best_epoch=best_epoch)
