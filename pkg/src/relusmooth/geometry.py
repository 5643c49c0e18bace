"""Piecewise-linear geometry of ReLU networks.

Activation patterns, exact and per-layer approximate hyperplane distances,
hyperplane-crossing counts, the hyperplane-arrangement region bound, and the
decomposition of small unbiased 2-D networks into cone-supported linear terms
("infinite simplices": cones spanned by two rays with positive coefficients,
truncated where the dominant coordinate reaches 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputShapeError
from .nn import Network, ForwardTrace, forward, input_gradient

RAY_DEDUP_TOL = 1e-9
MIN_SECTOR_WIDTH = 1e-9


def hidden_unit_index(net: Network) -> list[tuple[int, int]]:
    """(layer, unit) pairs for all hidden units, layer-major."""
    return [(l, k) for l, size in enumerate(net.hidden_layer_sizes) for k in range(size)]


def activation_pattern(net: Network, x) -> np.ndarray:
    """Boolean bit per hidden unit (pre-activation > 0), layer-major."""
    trace = forward(net, x)
    bits = [a > 0.0 for a in trace.pre_activations[:-1]]
    if not bits:
        return np.zeros(0, dtype=bool)
    return np.concatenate(bits)


def hidden_unit_gradient(net: Network, trace: ForwardTrace, layer: int, unit: int) -> np.ndarray:
    """Input gradient of one hidden unit's pre-activation (local linear map)."""
    if not 0 <= layer < len(net.layers) - 1:
        raise InputShapeError(f"hidden layer index {layer} out of range")
    if not 0 <= unit < net.layers[layer].out_dim:
        raise InputShapeError(f"unit index {unit} out of range for layer {layer}")
    g = net.layers[layer].weights[unit].copy()
    for li in range(layer - 1, -1, -1):
        g = g * (trace.pre_activations[li] > 0.0) @ net.layers[li].weights
    return g


@dataclass(frozen=True)
class HyperplaneDistance:
    layer: int
    unit: int
    distance: float
    normal: np.ndarray


def exact_distances(net: Network, x) -> list[HyperplaneDistance]:
    """Input-space distance to every hidden unit's hyperplane, ascending.

    d = |a| / ||grad_x a|| for the unit's local linear extension.  A unit
    with zero gradient (constant within the region) gets distance inf.
    """
    x = np.asarray(x, dtype=np.float64)
    trace = forward(net, x)
    out = []
    for layer, unit in hidden_unit_index(net):
        a = float(trace.pre_activations[layer][unit])
        g = hidden_unit_gradient(net, trace, layer, unit)
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            out.append(HyperplaneDistance(layer, unit, math.inf, np.zeros_like(g)))
        else:
            out.append(HyperplaneDistance(layer, unit, abs(a) / norm, g / norm))
    out.sort(key=lambda h: h.distance)
    return out


def approx_layer_distances(net: Network, trace: ForwardTrace, layer: int) -> list[tuple[int, float]]:
    """Relative distances |a_k| / ||weight row k|| within one layer, ascending.

    No backprop: the layer's own weight rows stand in for the full input
    Jacobian, so rankings for deeper layers are only approximate.
    """
    if not 0 <= layer < len(net.layers) - 1:
        raise InputShapeError(f"hidden layer index {layer} out of range")
    a = trace.pre_activations[layer]
    norms = np.linalg.norm(net.layers[layer].weights, axis=1)
    rel = np.where(norms > 0.0, np.abs(a) / np.where(norms > 0.0, norms, 1.0), math.inf)
    order = np.argsort(rel, kind="stable")
    return [(int(k), float(rel[k])) for k in order]


def crossing_count(net: Network, x, x2) -> int:
    """Hamming distance between activation patterns at the two points.

    A lower bound on the number of hyperplane crossings along the segment:
    a unit that flips an even number of times along the way is not counted.
    """
    return int(np.sum(activation_pattern(net, x) != activation_pattern(net, x2)))


def max_region_count(N: int, n: int) -> int:
    """Most regions N hyperplanes in general position cut R^n into.

    Sum of C(N, k) for k = 0..n, exact integer arithmetic.  This is the
    general-position bound for affine hyperplanes; arrangements of planes
    through a common point realize fewer regions.
    """
    if N < 0 or n < 1:
        raise ValueError("need N >= 0 and n >= 1")
    return sum(math.comb(N, k) for k in range(min(N, n) + 1))


def fluctuation_scale(net: Network, x, x2) -> float:
    """Crossing count times the product of per-layer mean |weight|.

    A diagnostic heuristic for how strongly the output may move between the
    two points, not a bound.
    """
    scale = 1.0
    for layer in net.layers:
        scale *= float(np.mean(np.abs(layer.weights)))
    return crossing_count(net, x, x2) * scale


@dataclass(frozen=True)
class SimplexTerm:
    """One cone-supported linear term of a 2-D decomposition.

    ``basis`` columns are the sector's two boundary rays, scaled so that
    coordinate ``trunc_index`` equals 1 on each; within the cone that
    coordinate dominates, so the truncation plane is where it reaches 1.
    ``weight_bar`` is the sector's linear map expressed in that basis, and
    ``first`` marks the sector owning its lower boundary ray (boundary
    points belong to exactly one sector: the lower angle wins).
    """

    basis: np.ndarray
    basis_inv: np.ndarray
    weight_bar: np.ndarray
    trunc_index: int
    first: bool
    lo_angle: float
    hi_angle: float

    def __post_init__(self):
        resid = np.abs(self.basis_inv @ self.basis - np.eye(len(self.basis))).max()
        if resid > 1e-10:
            raise ValueError(f"basis_inv is not the inverse of basis (residual {resid:.2e})")


@dataclass(frozen=True)
class Decomposition:
    terms: tuple[SimplexTerm, ...]
    dropped_sectors: int

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)


def _ray_angles(net: Network, sweep_samples: int = 8193) -> list[float]:
    """Angles in [0, pi/2] where some hidden unit's pre-activation crosses zero.

    Dense sweep along the unit quarter-circle plus bisection per sign change.
    The axes and the diagonal are always included (they keep coordinate signs
    and the dominant coordinate fixed within each sector).
    """
    angles = {0.0, math.pi / 4.0, math.pi / 2.0}
    if net.hidden_unit_count == 0:
        return sorted(angles)

    thetas = np.linspace(0.0, math.pi / 2.0, sweep_samples)
    dirs = np.column_stack([np.cos(thetas), np.sin(thetas)])

    h = dirs
    pres = []
    for layer in net.layers[:-1]:
        a = h @ layer.weights.T
        pres.append(a)
        h = np.maximum(a, 0.0)
    acts = np.concatenate(pres, axis=1)  # (samples, hidden units)

    def unit_value(theta, col):
        v = np.array([math.cos(theta), math.sin(theta)])
        trace = forward(net, v)
        flat = np.concatenate(trace.pre_activations[:-1])
        return float(flat[col])

    for col in range(acts.shape[1]):
        vals = acts[:, col]
        if np.max(np.abs(vals)) < 1e-12:
            continue  # dead unit along the whole arc
        sign = vals > 0.0
        for k in np.nonzero(sign[:-1] != sign[1:])[0]:
            lo, hi = thetas[k], thetas[k + 1]
            flo = vals[k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fmid = unit_value(mid, col)
                if (fmid > 0.0) == (flo > 0.0):
                    lo, flo = mid, fmid
                else:
                    hi = mid
            angles.add(0.5 * (lo + hi))

    ordered = sorted(angles)
    merged = [ordered[0]]
    for a in ordered[1:]:
        if a - merged[-1] >= RAY_DEDUP_TOL:
            merged.append(a)
    if merged[-1] < math.pi / 2.0 - RAY_DEDUP_TOL:
        merged.append(math.pi / 2.0)
    else:
        merged[-1] = math.pi / 2.0
    merged[0] = 0.0
    return merged


def decompose_2d(net: Network, output_index: int = 0, sweep_samples: int = 8193) -> Decomposition:
    """Split an unbiased 2-D network's output into cone-supported linear terms.

    Enumerates boundary rays by an angle sweep over the positive quadrant,
    probes each sector's linear map at its angular midpoint, and builds one
    SimplexTerm per sector.  The terms sum back to the network output on the
    unit square.
    """
    if net.input_dim != 2:
        raise InputShapeError("decomposition requires input_dim == 2")
    if not net.is_unbiased():
        raise ValueError("decomposition requires an unbiased network")
    if not 0 <= output_index < net.class_count:
        raise InputShapeError(f"output index {output_index} out of range")

    rays = _ray_angles(net, sweep_samples)
    terms = []
    dropped = 0
    for i in range(len(rays) - 1):
        lo, hi = rays[i], rays[i + 1]
        if hi - lo < MIN_SECTOR_WIDTH:
            dropped += 1
            continue
        mid = 0.5 * (lo + hi)
        probe = np.array([math.cos(mid), math.sin(mid)])
        w = input_gradient(net, probe, ("logit", output_index))
        r = 0 if mid < math.pi / 4.0 else 1
        u1 = np.array([math.cos(lo), math.sin(lo)])
        u2 = np.array([math.cos(hi), math.sin(hi)])
        v1 = u1 / u1[r]
        v2 = u2 / u2[r]
        basis = np.column_stack([v1, v2])
        det = np.linalg.det(basis)
        if abs(det) <= 1e-12 * np.linalg.norm(v1) * np.linalg.norm(v2):
            dropped += 1
            continue
        terms.append(
            SimplexTerm(
                basis=basis,
                basis_inv=np.linalg.inv(basis),
                weight_bar=w @ basis,
                trunc_index=r,
                first=(len(terms) == 0),
                lo_angle=lo,
                hi_angle=hi,
            )
        )
    return Decomposition(tuple(terms), dropped)


def _member_mask(term: SimplexTerm, points: np.ndarray) -> np.ndarray:
    """Half-open angular sector test, exact across shared rays.

    Adjacent sectors evaluate the same cross product against the shared ray
    (same stored angle, same arithmetic), so every quadrant point belongs to
    exactly one sector: its lower boundary ray goes to the sector below,
    except the first sector keeps both edges.
    """
    above_lo = math.cos(term.lo_angle) * points[:, 1] - math.sin(term.lo_angle) * points[:, 0]
    above_hi = math.cos(term.hi_angle) * points[:, 1] - math.sin(term.hi_angle) * points[:, 0]
    lo_ok = above_lo >= 0.0 if term.first else above_lo > 0.0
    return lo_ok & (above_hi <= 0.0)


def evaluate_term(term: SimplexTerm, x) -> float:
    """Value of one term: its linear map inside the truncated cone, else 0."""
    x = np.asarray(x, dtype=np.float64).reshape(1, 2)
    if not _member_mask(term, x)[0]:
        return 0.0
    if x[0, term.trunc_index] >= 1.0:
        return 0.0
    return float(term.weight_bar @ (term.basis_inv @ x[0]))


def evaluate_decomposition(terms, points: np.ndarray) -> np.ndarray:
    """Sum of all terms at each point, vectorized over (N, 2) points."""
    points = np.asarray(points, dtype=np.float64)
    total = np.zeros(len(points))
    for term in terms:
        member = _member_mask(term, points) & (points[:, term.trunc_index] < 1.0)
        if member.any():
            bc = points[member] @ term.basis_inv.T
            total[member] += bc @ term.weight_bar
    return total
