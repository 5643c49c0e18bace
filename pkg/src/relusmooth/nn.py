"""Minimal dense ReLU network engine.

Networks are immutable values once constructed: forward passes and gradients
are pure functions, and training returns a new network instead of mutating
its input.  A unit whose pre-activation is exactly zero counts as *inactive*,
both for the forward mask and for gradients, so the geometry and gradient
modules agree about region boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InputShapeError,
    InvalidLabelError,
    ModelParseError,
    TrainingDivergedError,
)

_ACTIVATIONS = ("relu", "identity")


def _lock(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DenseLayer:
    """One affine layer: weights (out_dim, in_dim), biases (out_dim,)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str

    def __post_init__(self):
        object.__setattr__(self, "weights", _lock(self.weights))
        object.__setattr__(self, "biases", _lock(self.biases))
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise InputShapeError("weights must be 2-D and biases 1-D")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise InputShapeError(
                f"bias length {self.biases.shape[0]} != output dim {self.weights.shape[0]}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    """Layered dense classifier: ReLU hidden layers, identity (logit) output."""

    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise InputShapeError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise InputShapeError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )
        for layer in self.layers[:-1]:
            if layer.activation != "relu":
                raise ValueError("hidden layers must use relu")
        if self.layers[-1].activation != "identity":
            raise ValueError("final layer must use identity (logits)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def class_count(self) -> int:
        return self.layers[-1].out_dim

    @property
    def hidden_layer_sizes(self) -> tuple[int, ...]:
        return tuple(l.out_dim for l in self.layers[:-1])

    @property
    def hidden_unit_count(self) -> int:
        return sum(self.hidden_layer_sizes)

    def is_unbiased(self) -> bool:
        return all(np.all(l.biases == 0.0) for l in self.layers)


@dataclass(frozen=True)
class ForwardTrace:
    """Cached activations from one forward pass."""

    pre_activations: tuple[np.ndarray, ...]
    post_activations: tuple[np.ndarray, ...]

    @property
    def logits(self) -> np.ndarray:
        return self.post_activations[-1]


def init_network(dims, seed=0, biased=False) -> Network:
    """Build a network with the given layer widths, e.g. (2, 8, 3).

    Weights are uniform in +-sqrt(6/(fan_in+fan_out)), seeded; biases start
    at zero (and stay absent when ``biased`` is false).
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InputShapeError(f"need at least input and output dims >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out) if biased else np.zeros(fan_out)
        act = "identity" if i == len(dims) - 2 else "relu"
        layers.append(DenseLayer(w, b, act))
    return Network(tuple(layers))


def _check_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise InputShapeError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    if not np.isfinite(x).all():
        raise InputShapeError("input contains non-finite entries")
    return x


def forward(net: Network, x) -> ForwardTrace:
    """Forward pass caching every pre/post activation."""
    x = _check_input(net, x)
    pre, post = [], []
    h = x
    for layer in net.layers:
        a = layer.weights @ h + layer.biases
        pre.append(a)
        h = np.maximum(a, 0.0) if layer.activation == "relu" else a
        post.append(h)
    return ForwardTrace(tuple(pre), tuple(post))


def forward_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs, shape (N, input_dim) -> (N, class_count)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_dim:
        raise InputShapeError(f"expected batch of shape (N, {net.input_dim}), got {xs.shape}")
    h = xs
    for layer in net.layers:
        a = h @ layer.weights.T + layer.biases
        h = np.maximum(a, 0.0) if layer.activation == "relu" else a
    return h


def _output_seed(net: Network, logits: np.ndarray, loss) -> np.ndarray:
    """Gradient of the requested scalar with respect to the logits."""
    kind = loss[0]
    if kind == "cross_entropy":
        y = int(loss[1])
        if not 0 <= y < net.class_count:
            raise InvalidLabelError(f"label {y} out of range for {net.class_count} classes")
        z = logits - logits.max()
        p = np.exp(z)
        p /= p.sum()
        seed = p.copy()
        seed[y] -= 1.0
        return seed
    if kind == "logit":
        j = int(loss[1])
        if not 0 <= j < net.class_count:
            raise InvalidLabelError(f"logit index {j} out of range")
        seed = np.zeros(net.class_count)
        seed[j] = 1.0
        return seed
    if kind == "margin":
        i, j = int(loss[1]), int(loss[2])
        if not (0 <= i < net.class_count and 0 <= j < net.class_count):
            raise InvalidLabelError(f"margin pair ({i}, {j}) out of range")
        seed = np.zeros(net.class_count)
        seed[i] += 1.0
        seed[j] -= 1.0
        return seed
    raise ValueError(f"unknown loss spec {loss!r}")


def input_gradient(net: Network, x, loss, trace: ForwardTrace | None = None) -> np.ndarray:
    """Gradient of a scalar loss with respect to the input.

    ``loss`` is one of ("cross_entropy", y), ("logit", j) or ("margin", i, j).
    Reverse accumulation through the cached trace; pre-activations equal to
    zero are treated as inactive.
    """
    x = _check_input(net, x)
    if trace is None:
        trace = forward(net, x)
    g = _output_seed(net, trace.logits, loss)
    for layer, a in zip(reversed(net.layers), reversed(trace.pre_activations)):
        if layer.activation == "relu":
            g = g * (a > 0.0)
        g = layer.weights.T @ g
    return g


def cross_entropy(logits: np.ndarray, y: int) -> float:
    """log-sum-exp(logits) - logits[y], computed with max-subtraction."""
    m = logits.max()
    return float(m + math.log(np.exp(logits - m).sum()) - logits[y])


def predict_topk(net: Network, x, k: int) -> list[int]:
    """Labels of the k largest logits; ties broken by lower index."""
    if not 1 <= k <= net.class_count:
        raise InvalidLabelError(f"k={k} outside [1, {net.class_count}]")
    logits = forward(net, x).logits
    order = np.argsort(-logits, kind="stable")
    return [int(i) for i in order[:k]]


@dataclass(frozen=True)
class SgdConfig:
    epochs: int
    learning_rate: float
    momentum: float = 0.0
    batch_size: int | None = None
    seed: int = 0
    shuffle: bool = True
    train_biases: bool = True  # False keeps an unbiased net unbiased


def train(net: Network, inputs: np.ndarray, labels: np.ndarray, cfg: SgdConfig) -> Network:
    """SGD with cross-entropy loss; deterministic given cfg.seed.

    Returns a new network; ``net`` itself is never modified.
    """
    X = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputShapeError("dataset must be a non-empty (N, n) array")
    if X.shape[1] != net.input_dim:
        raise InputShapeError(f"dataset dim {X.shape[1]} != network input dim {net.input_dim}")
    if len(y) != len(X):
        raise InputShapeError("inputs and labels must have equal length")
    if y.min() < 0 or y.max() >= net.class_count:
        raise InvalidLabelError("labels must be in [0, class_count)")

    w = [l.weights.copy() for l in net.layers]
    b = [l.biases.copy() for l in net.layers]
    vw = [np.zeros_like(m) for m in w]
    vb = [np.zeros_like(v) for v in b]
    rng = np.random.default_rng(cfg.seed)
    n = len(X)
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    onehot = np.eye(net.class_count)[y]

    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            xb, tb = X[idx], onehot[idx]

            pre, post = [], []
            h = xb
            for wi, bi, layer in zip(w, b, net.layers):
                a = h @ wi.T + bi
                pre.append(a)
                h = np.maximum(a, 0.0) if layer.activation == "relu" else a
                post.append(h)

            logits = post[-1]
            m = logits.max(axis=1, keepdims=True)
            e = np.exp(logits - m)
            p = e / e.sum(axis=1, keepdims=True)
            loss = float(np.mean(np.log(e.sum(axis=1)) + m[:, 0] - (logits * tb).sum(axis=1)))
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at update step {step}")

            g = (p - tb) / len(idx)
            for li in range(len(w) - 1, -1, -1):
                inp = post[li - 1] if li > 0 else xb
                gw = g.T @ inp
                gb = g.sum(axis=0)
                if li > 0:
                    g = (g @ w[li]) * (pre[li - 1] > 0.0)
                vw[li] = cfg.momentum * vw[li] - cfg.learning_rate * gw
                w[li] = w[li] + vw[li]
                if cfg.train_biases:
                    vb[li] = cfg.momentum * vb[li] - cfg.learning_rate * gb
                    b[li] = b[li] + vb[li]
            step += 1

    layers = tuple(
        DenseLayer(wi, bi, layer.activation)
        for wi, bi, layer in zip(w, b, net.layers)
    )
    return Network(layers)


_FMT = "%.17g"


def save_model(net: Network, path) -> None:
    """Write the versioned plain-text model format (round-trip exact)."""
    lines = [f"relu-net v1 {net.input_dim} {net.class_count} {len(net.layers)}"]
    for layer in net.layers:
        lines.append(f"layer {layer.out_dim} {layer.in_dim} {layer.activation}")
        for row in layer.weights:
            lines.append("w " + " ".join(_FMT % v for v in row))
        lines.append("b " + " ".join(_FMT % v for v in layer.biases))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> Network:
    """Parse a model file; malformed input raises ModelParseError with context."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip()]
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise ModelParseError(f"line {len(raw) + 1}: file truncated, expected {what}")
        item = lines[pos]
        pos += 1
        return item

    lineno, header = take("header")
    parts = header.split()
    if len(parts) != 5 or parts[0] != "relu-net" or parts[1] != "v1":
        raise ModelParseError(f"line {lineno}: bad header {header!r}")
    try:
        input_dim, class_count, n_layers = (int(p) for p in parts[2:])
    except ValueError:
        raise ModelParseError(f"line {lineno}: non-integer header fields") from None

    layers = []
    for li in range(n_layers):
        lineno, ln = take(f"layer header {li}")
        parts = ln.split()
        if len(parts) != 4 or parts[0] != "layer":
            raise ModelParseError(f"line {lineno}: expected 'layer <out> <in> <act>'")
        try:
            out_dim, in_dim = int(parts[1]), int(parts[2])
        except ValueError:
            raise ModelParseError(f"line {lineno}: non-integer layer dims") from None
        act = parts[3]
        rows = []
        for r in range(out_dim):
            lineno, ln = take(f"weight row {r} of layer {li}")
            parts = ln.split()
            if parts[0] != "w" or len(parts) != in_dim + 1:
                raise ModelParseError(
                    f"line {lineno}: expected 'w' with {in_dim} values, got {len(parts) - 1}"
                )
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError:
                raise ModelParseError(f"line {lineno}: non-numeric weight") from None
        lineno, ln = take(f"bias row of layer {li}")
        parts = ln.split()
        if parts[0] != "b" or len(parts) != out_dim + 1:
            raise ModelParseError(
                f"line {lineno}: expected 'b' with {out_dim} values, got {len(parts) - 1}"
            )
        try:
            biases = [float(v) for v in parts[1:]]
        except ValueError:
            raise ModelParseError(f"line {lineno}: non-numeric bias") from None
        try:
            layers.append(DenseLayer(np.array(rows), np.array(biases), act))
        except ValueError as exc:
            raise ModelParseError(f"layer {li}: {exc}") from None

    if pos != len(lines):
        raise ModelParseError(f"line {lines[pos][0]}: trailing content after last layer")
    try:
        net = Network(tuple(layers))
    except ValueError as exc:
        raise ModelParseError(str(exc)) from None
    if net.input_dim != input_dim or net.class_count != class_count:
        raise ModelParseError(
            f"header dims ({input_dim}, {class_count}) disagree with layers "
            f"({net.input_dim}, {net.class_count})"
        )
    return net
