"""Post-averaging defense.

A defended prediction replaces f(x) by the mean of f over a small ball
around x, approximated by sampling K unit directions and walking six steps
along each (+-r/3, +-2r/3, +-r), 6K+1 points per input including x itself.
Directions are drawn either isotropically at random or along the normals of
the nearest ReLU hyperplanes estimated layer by layer ("approx").
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputShapeError
from .geometry import approx_layer_distances, hidden_unit_gradient
from .nn import Network, forward, forward_batch

LAMBDA_FRACTIONS = (-1.0, -2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)


@dataclass(frozen=True)
class DirectionSet:
    """K unit-length direction vectors, plus the backprops spent finding them."""

    vectors: np.ndarray
    gradient_calls: int = 0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 2:
            raise InputShapeError("directions must be a (K, n) array")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("direction vectors must have unit length")

    def __len__(self):
        return len(self.vectors)


@dataclass(frozen=True)
class DefenseConfig:
    """Neighborhood radius, direction budget and aggregation domain."""

    radius: float
    directions: int
    sampler: str = "random"
    approx_per_layer: dict | None = None
    aggregation: str = "logits"
    seed: int = 0
    clip_to_bounds: bool = False

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if self.directions < 1:
            raise ValueError("need at least one direction")
        if self.sampler not in ("random", "approx"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.aggregation not in ("logits", "probabilities"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.approx_per_layer is not None:
            total = sum(self.approx_per_layer.values())
            if total != self.directions:
                raise ValueError(
                    f"approx_per_layer counts sum to {total}, expected {self.directions}"
                )

    @property
    def points_per_input(self) -> int:
        return 6 * self.directions + 1


def random_directions(n: int, k: int, seed: int = 0) -> DirectionSet:
    """K standard-normal vectors normalized to unit length, seeded."""
    if k < 1:
        raise ValueError("need at least one direction")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((k, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return DirectionSet(v)


def default_per_layer(net: Network, k: int) -> dict:
    """Spread K directions over the last three hidden layers (or all, if fewer).

    Counts are as even as possible, earlier layers taking the remainder.
    """
    hidden = len(net.hidden_layer_sizes)
    if hidden == 0:
        raise InputShapeError("network has no hidden layers to sample from")
    chosen = list(range(max(0, hidden - 3), hidden))
    base, extra = divmod(k, len(chosen))
    return {layer: base + (1 if i < extra else 0) for i, layer in enumerate(chosen)}


def approx_directions(net: Network, x, per_layer: dict) -> DirectionSet:
    """Normals of the nearest hyperplanes, estimated per layer.

    Units are ranked by the cheap within-layer relative distance; only the
    selected units are backpropagated, so the gradient-call count equals the
    sum of the per-layer counts (plus substitutions for zero-gradient units,
    which are skipped in favor of the next closest).
    """
    x = np.asarray(x, dtype=np.float64)
    trace = forward(net, x)
    vectors = []
    calls = 0
    for layer, count in sorted(per_layer.items()):
        if count < 1:
            raise ValueError(f"per-layer count for layer {layer} must be >= 1")
        ranked = approx_layer_distances(net, trace, layer)
        picked = 0
        for unit, _ in ranked:
            if picked == count:
                break
            g = hidden_unit_gradient(net, trace, layer, unit)
            calls += 1
            norm = float(np.linalg.norm(g))
            if norm == 0.0:
                continue  # constant unit: substitute the next closest
            vectors.append(g / norm)
            picked += 1
        if picked < count:
            warnings.warn(
                f"layer {layer} exhausted: {picked} of {count} usable directions",
                stacklevel=2,
            )
    if not vectors:
        raise ValueError("no usable directions found")
    return DirectionSet(np.array(vectors), gradient_calls=calls)


def sample_points(x, dirs: DirectionSet, radius: float) -> np.ndarray:
    """The input plus six steps along each direction: 6K+1 points.

    Order is deterministic: x first, then direction-major with step sizes
    ascending (-r, -2r/3, -r/3, r/3, 2r/3, r).
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=np.float64)
    steps = np.array(LAMBDA_FRACTIONS) * radius
    pts = [x[None, :]]
    for v in dirs.vectors:
        pts.append(x[None, :] + steps[:, None] * v[None, :])
    return np.vstack(pts)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def post_average_predict(
    net: Network,
    x,
    cfg: DefenseConfig,
    bounds: tuple | None = None,
) -> tuple[np.ndarray, list[int]]:
    """Averaged output over the sampled neighborhood, and its top-k labels.

    Points are evaluated as one batch and averaged in the configured domain
    (logits by default) in a fixed order, so results are reproducible.
    Out-of-domain points are averaged as-is unless clipping was requested.
    """
    x = np.asarray(x, dtype=np.float64)
    if cfg.sampler == "random":
        dirs = random_directions(net.input_dim, cfg.directions, cfg.seed)
    else:
        per_layer = cfg.approx_per_layer or default_per_layer(net, cfg.directions)
        dirs = approx_directions(net, x, per_layer)
    pts = sample_points(x, dirs, cfg.radius)
    if cfg.clip_to_bounds:
        if bounds is None:
            raise ValueError("clip_to_bounds requires bounds")
        pts = np.clip(pts, bounds[0], bounds[1])
    outputs = forward_batch(net, pts)
    if cfg.aggregation == "probabilities":
        outputs = _softmax(outputs)
    avg = outputs.mean(axis=0)
    order = np.argsort(-avg, kind="stable")
    return avg, [int(i) for i in order]
