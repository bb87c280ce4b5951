"""Dense ReLU network with a single sigmoid output.

Point evaluation, input gradients, minibatch training, interval bounds over a
parameter ball, and a JSON file format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, bootstrap_resample


class ModelError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass(frozen=True, eq=False)
class DenseModel:
    """Weights are stored as ``(fan_out, fan_in)`` matrices."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        Ws = tuple(np.array(W, dtype=float) for W in self.weights)
        bs = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if not Ws or len(Ws) != len(bs):
            raise ModelError("need one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(Ws, bs)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ModelError(f"layer {i}: weight {W.shape} and bias {b.shape} do not match")
            if i and W.shape[1] != Ws[i - 1].shape[0]:
                raise ModelError(f"layer {i}: fan-in {W.shape[1]} != previous fan-out {Ws[i - 1].shape[0]}")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ModelError(f"layer {i}: non-finite parameters")
            W.setflags(write=False)
            b.setflags(write=False)
        if Ws[-1].shape[0] != 1:
            raise ModelError("output layer must have exactly one unit")
        object.__setattr__(self, "weights", Ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def logits(self, X) -> np.ndarray:
        """Batched logits for an ``(n, d)`` array."""
        A = np.asarray(X, dtype=float)
        if A.ndim != 2 or A.shape[1] != self.n_inputs:
            raise ModelError(f"expected inputs of shape (n, {self.n_inputs}), got {A.shape}")
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            A = A @ W.T + b
            if i < last:
                A = np.maximum(A, 0.0)
        return A[:, 0]

    def predict_label(self, X) -> np.ndarray:
        return (self.logits(X) > 0).astype(int)

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.logits(X))

    def params_equal(self, other: DenseModel) -> bool:
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


def _check_dims(layer_dims):
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ModelError(f"layer_dims {layer_dims} has no output layer")
    if any(d < 1 for d in dims):
        raise ModelError(f"layer_dims {layer_dims} must be positive")
    if dims[-1] != 1:
        raise ModelError("output dimension must be 1")
    return dims


def init_model(layer_dims, seed: int) -> DenseModel:
    dims = _check_dims(layer_dims)
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = 1.0 / math.sqrt(fan_in)
        Ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(rng.uniform(-lim, lim, size=fan_out))
    return DenseModel(tuple(Ws), tuple(bs))


def forward_logit(m: DenseModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_inputs,):
        raise ModelError(f"expected a vector of length {m.n_inputs}, got shape {x.shape}")
    return float(m.logits(x[None, :])[0])


def predict_label(m: DenseModel, x) -> int:
    """1 iff the logit is strictly positive."""
    return int(forward_logit(m, x) > 0)


def input_gradient(m: DenseModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_inputs,):
        raise ModelError(f"expected a vector of length {m.n_inputs}, got shape {x.shape}")
    masks = []
    a = x
    for W, b in zip(m.weights[:-1], m.biases[:-1]):
        z = W @ a + b
        masks.append(z > 0)  # relu'(0) = 0
        a = np.maximum(z, 0.0)
    g = m.weights[-1][0].copy()
    for W, mask in zip(reversed(m.weights[:-1]), reversed(masks)):
        g = (g * mask) @ W
    return g


def param_gradient(m: DenseModel, x):
    """Gradient of the logit at ``x`` with respect to every weight and bias."""
    x = np.asarray(x, dtype=float)
    acts = [x]
    pre = []
    a = x
    last = len(m.weights) - 1
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        z = W @ a + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    grads = [None] * len(m.weights)
    g = np.ones(1)
    for i in range(last, -1, -1):
        grads[i] = (np.outer(g, acts[i]), g.copy())
        if i > 0:
            g = (g @ m.weights[i]) * (pre[i - 1] > 0)
    return grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ModelError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ModelError("epochs must be >= 0 and batch_size >= 1")


def _bce_step(Ws, bs, X, y, lr):
    """One gradient step on mean binary cross-entropy; updates in place, returns the loss."""
    acts = [X]
    A = X
    last = len(Ws) - 1
    for i, (W, b) in enumerate(zip(Ws, bs)):
        Z = A @ W.T + b
        A = np.maximum(Z, 0.0) if i < last else Z
        acts.append(A)
    z = acts[-1][:, 0]
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    delta = ((sigmoid(z) - y) / len(y))[:, None]
    for i in range(last, -1, -1):
        gW = delta.T @ acts[i]
        gb = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ Ws[i]) * (acts[i] > 0)
        Ws[i] -= lr * gW
        bs[i] -= lr * gb
    return loss


def train(m: DenseModel, ds: Dataset, cfg: TrainConfig) -> DenseModel:
    """Minibatch gradient descent on binary cross-entropy. Returns a new model."""
    if len(ds) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if ds.n_features != m.n_inputs:
        raise ModelError(f"model expects {m.n_inputs} features, dataset has {ds.n_features}")
    Ws = [W.copy() for W in m.weights]
    bs = [b.copy() for b in m.biases]
    X, y = ds.X, ds.y.astype(float)
    rng = np.random.default_rng(cfg.seed)
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for k, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss = _bce_step(Ws, bs, X[idx], y[idx], cfg.learning_rate)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {k}")
    return DenseModel(tuple(Ws), tuple(bs))


def retrain_variant(m: DenseModel, ds: Dataset, cfg: TrainConfig, variant_seed: int) -> DenseModel:
    """Fine-tune a copy of ``m`` on a bootstrap resample drawn with ``variant_seed``."""
    if cfg.epochs == 0:
        return m
    boot = bootstrap_resample(ds, variant_seed)
    return train(m, boot, replace(cfg, seed=variant_seed))


# ---------------------------------------------------------------- intervals

@dataclass(frozen=True)
class IntervalVector:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or (lo > hi).any():
            raise ModelError("interval needs lo <= hi with matching shapes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class ParamBall:
    """Every weight (and, by default, every bias) may move by at most ``delta``."""

    center: DenseModel
    delta: float
    perturb_biases: bool = True

    def __post_init__(self):
        if not self.delta >= 0:
            raise ModelError("delta must be >= 0")

    @property
    def bias_delta(self) -> float:
        return self.delta if self.perturb_biases else 0.0


_EPS = np.finfo(float).eps


def _interval_affine(W, dW, b, db, lo, hi):
    """Bounds of ``W' x + b'`` for ``W' in [W-dW, W+dW]``, ``b' in [b-db, b+db]``, ``x in [lo, hi]``."""
    Wl, Wu = W - dW, W + dW
    p = np.stack([Wl * lo, Wl * hi, Wu * lo, Wu * hi])
    pmin = p.min(axis=0)
    pmax = p.max(axis=0)
    out_lo = pmin.sum(axis=1) + (b - db)
    out_hi = pmax.sum(axis=1) + (b + db)
    # outward rounding so float summation order cannot break soundness
    pad = 4 * _EPS * (np.abs(p).max(axis=0).sum(axis=1) + np.abs(b) + db)
    return out_lo - pad, out_hi + pad


def propagate_bounds(m: DenseModel, lo, hi, delta: float = 0.0, bias_delta: float | None = None):
    """Interval bounds of every layer's pre-activation over an input box and a parameter ball.

    Returns a list of ``(lo, hi)`` pairs, one per layer (the last is the logit).
    """
    bias_delta = delta if bias_delta is None else bias_delta
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = []
    last = len(m.weights) - 1
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        zl, zh = _interval_affine(W, delta, b, bias_delta, lo, hi)
        out.append((zl, zh))
        if i < last:
            lo, hi = np.maximum(zl, 0.0), np.maximum(zh, 0.0)
    return out


def interval_logit(ball: ParamBall, x) -> tuple[float, float]:
    m = ball.center
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_inputs,):
        raise ModelError(f"expected a vector of length {m.n_inputs}, got shape {x.shape}")
    if ball.delta == 0:
        v = forward_logit(m, x)
        return v, v
    zl, zh = propagate_bounds(m, x, x, ball.delta, ball.bias_delta)[-1]
    return float(zl[0]), float(zh[0])


def is_certified(ball: ParamBall, x, target_class: int) -> bool:
    """True iff every model in the ball assigns ``x`` to ``target_class``."""
    lo, hi = interval_logit(ball, x)
    return lo > 0 if target_class == 1 else hi <= 0


def sample_ball_logits(ball: ParamBall, x, unit_draws) -> np.ndarray:
    """Logits at ``x`` for parameters ``center + delta * u`` for each draw ``u``.

    ``unit_draws`` is a list of ``(dW, db)`` arrays with a leading sample axis
    and entries in [-1, 1].
    """
    m = ball.center
    n = unit_draws[0][0].shape[0]
    if ball.delta == 0:
        # a degenerate ball holds only the centre; keep its exact logit
        return np.full(n, forward_logit(m, x))
    a = np.broadcast_to(np.asarray(x, dtype=float), (n, m.n_inputs))
    last = len(m.weights) - 1
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        uW, ub = unit_draws[i]
        Wp = W + ball.delta * uW
        bp = b + ball.bias_delta * ub
        a = np.einsum("soi,si->so", Wp, a) + bp
        if i < last:
            a = np.maximum(a, 0.0)
    return a[:, 0]


def perturbed_model(ball: ParamBall, draw, k: int) -> DenseModel:
    """Materialise sample ``k`` of a ``unit_draws`` batch as a model."""
    m = ball.center
    return DenseModel(
        tuple(W + ball.delta * uW[k] for W, (uW, _) in zip(m.weights, draw)),
        tuple(b + ball.bias_delta * ub[k] for b, (_, ub) in zip(m.biases, draw)),
    )


# ---------------------------------------------------------------- file format

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def model_to_json(m: DenseModel) -> str:
    # numbers are written by hand so they carry 17 significant digits
    def mat(W):
        return "[" + ", ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in W) + "]"

    def vec(b):
        return "[" + ", ".join(_fmt(v) for v in b) + "]"

    return (
        "{\n"
        f'  "layer_dims": {json.dumps(m.layer_dims)},\n'
        f'  "activation": "relu",\n'
        f'  "head": "sigmoid",\n'
        f'  "weights": [{", ".join(mat(W) for W in m.weights)}],\n'
        f'  "biases": [{", ".join(vec(b) for b in m.biases)}]\n'
        "}\n"
    )


def model_from_json(text: str, source: str = "<string>") -> DenseModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"{source}: line {e.lineno} column {e.colno}: {e.msg}") from None
    for key in ("layer_dims", "weights", "biases"):
        if key not in doc:
            raise ModelError(f"{source}: missing field {key!r}")
    if doc.get("activation", "relu") != "relu" or doc.get("head", "sigmoid") != "sigmoid":
        raise ModelError(f"{source}: only relu activation with sigmoid head is supported")
    dims = _check_dims(doc["layer_dims"])
    Ws, bs = doc["weights"], doc["biases"]
    if len(Ws) != len(dims) - 1 or len(bs) != len(dims) - 1:
        raise ModelError(f"{source}: {len(dims) - 1} layers declared, found {len(Ws)} weight / {len(bs)} bias arrays")
    for i, (W, b) in enumerate(zip(Ws, bs)):
        shape = (dims[i + 1], dims[i])
        arr = np.array(W, dtype=float)
        if arr.shape != shape:
            raise ModelError(f"{source}: layer {i} weights have shape {arr.shape}, declared {shape}")
        if np.array(b, dtype=float).shape != (dims[i + 1],):
            raise ModelError(f"{source}: layer {i} bias has wrong length")
    return DenseModel(tuple(np.array(W, float) for W in Ws), tuple(np.array(b, float) for b in bs))


def save_model(m: DenseModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(m))


def load_model(path) -> DenseModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), str(path))
