"""Closed-form Fourier machinery for ReLU networks.

The spectrum of the truncated-corner simplex indicator has a closed form as a
divided difference of exp(-i t) over the nodes {0, w_1, ..., w_n}; the printed
partial-fraction sum is numerically catastrophic near coincident components,
while the divided-difference table with a Taylor fallback for confluent node
clusters is stable to machine precision.  A whole 2-D network's spectrum is
assembled from its simplex decomposition, and everything here is verifiable
against brute-force quadrature (`quadrature_ft`).

Convention: unitary transform, F(w) = (2*pi)^(-n/2) * Int f(x) exp(-i w.x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputShapeError
from .nn import DenseLayer, Network

CONFLUENT_TOL = 1e-6
_CLUSTER_TERMS = 12


def _homogeneous_sums(deltas, max_order):
    """Complete homogeneous symmetric polynomials h_0..h_max of the deltas."""
    h = [1.0 + 0.0j] + [0.0j] * max_order
    for x in deltas:
        for p in range(1, max_order + 1):
            h[p] = h[p] + x * h[p - 1]
    return h


def _confluent_cluster(nodes: np.ndarray) -> complex:
    """Divided difference of exp(-i t) over a cluster of nearly equal nodes.

    Expansion about the cluster mean: the divided difference of t^m over j+1
    nodes is the homogeneous sum h_{m-j} of the offsets, which shrink like
    the cluster spread, so a few terms reach machine precision.
    """
    c = float(nodes.mean())
    deltas = nodes - c
    j = len(nodes) - 1
    h = _homogeneous_sums(deltas, _CLUSTER_TERMS)
    total = 0.0j
    for p in range(_CLUSTER_TERMS + 1):
        total += (-1j) ** (j + p) * h[p] / math.factorial(j + p)
    return np.exp(-1j * c) * total


def _divided_difference_exp(nodes) -> complex:
    """Divided difference of t -> exp(-i t) over arbitrary real nodes.

    Standard recursive table; any window of nodes closer than CONFLUENT_TOL
    is evaluated by the cluster expansion instead of the unstable quotient.
    """
    t = np.sort(np.asarray(nodes, dtype=np.float64))
    cur = [np.exp(-1j * ti) for ti in t]
    for j in range(1, len(t)):
        nxt = []
        for i in range(len(t) - j):
            span = t[i + j] - t[i]
            if span < CONFLUENT_TOL:
                nxt.append(_confluent_cluster(t[i : i + j + 1]))
            else:
                nxt.append((cur[i + 1] - cur[i]) / span)
        cur = nxt
    return cur[0]


def _as_freq(omega) -> np.ndarray:
    w = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    if w.ndim != 1 or w.size < 1 or not np.isfinite(w).all():
        raise InputShapeError("frequency vector must be 1-D with finite entries")
    return w


def simplex_spectrum(omega) -> complex:
    """Unitary Fourier transform of the unit-simplex indicator at frequency omega.

    The indicator of {x : all x_i > 0, sum x_i < 1}; the implicit zero node
    joins the frequency components in the divided difference.
    """
    w = _as_freq(omega)
    n = w.size
    nodes = np.concatenate(([0.0], w))
    return complex((1j / math.sqrt(2.0 * math.pi)) ** n * _divided_difference_exp(nodes))


def simplex_spectrum_grad(omega) -> np.ndarray:
    """Gradient of simplex_spectrum: each partial doubles one node."""
    w = _as_freq(omega)
    n = w.size
    pref = (1j / math.sqrt(2.0 * math.pi)) ** n
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        nodes = np.concatenate(([0.0], w, [w[k]]))
        out[k] = pref * _divided_difference_exp(nodes)
    return out


def network_spectrum(terms, omega) -> complex:
    """Closed-form spectrum of a decomposed 2-D network output.

    Per term the change of variables into the cone basis contributes the
    factor i * |det basis| on top of weight_bar . grad S(omega . basis);
    both factors were pinned by matching quadrature on a single simplex
    (the bare weight_bar . grad S form does not reproduce the transform).
    """
    omega = _as_freq(omega)
    total = 0.0j
    for term in terms:
        om_bar = omega @ term.basis
        g = simplex_spectrum_grad(om_bar)
        total += 1j * abs(np.linalg.det(term.basis)) * complex(term.weight_bar @ g)
    return total


@dataclass(frozen=True)
class QuadConfig:
    points_per_axis: int = 128
    rule: str = "simpson"  # or "gauss"
    domain: str = "cube"  # or "simplex"
    tol: float = 1e-6

    def __post_init__(self):
        if self.points_per_axis < 64:
            raise ValueError("need at least 64 points per axis")
        if self.rule not in ("simpson", "gauss"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.domain not in ("cube", "simplex"):
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error_estimate: float
    converged: bool


def _nodes_weights(m: int, rule: str):
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(m)
        return 0.5 * (x + 1.0), 0.5 * w
    if m % 2 == 1:
        m += 1
    x = np.linspace(0.0, 1.0, m + 1)
    w = np.full(m + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w / (3.0 * m)


_GRID_CACHE: dict = {}


def _cube_grid(n, m, rule):
    key = ("cube", n, m, rule)
    if key not in _GRID_CACHE:
        x, w = _nodes_weights(m, rule)
        grids = np.meshgrid(*([x] * n), indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        for a in (x, w, pts):
            a.setflags(write=False)
        _GRID_CACHE[key] = (x, w, pts)
    return _GRID_CACHE[key]


def _cube_ft(f, omega, m, rule) -> complex:
    """Tensor-product transform over [0,1]^n with factorized phases."""
    n = omega.size
    x, w, pts = _cube_grid(n, m, rule)
    vals = np.asarray(f(pts), dtype=np.float64).reshape([len(x)] * n)
    acc = vals.astype(np.complex128)
    for k in range(n - 1, -1, -1):
        phase = w * np.exp(-1j * omega[k] * x)
        acc = np.tensordot(acc, phase, axes=([k], [0]))
    return complex(acc)


def _simplex_grid(n, m, rule):
    key = ("simplex", n, m, rule)
    if key not in _GRID_CACHE:
        u, w = _nodes_weights(m, rule)
        grids = np.meshgrid(*([u] * n), indexing="ij")
        U = np.column_stack([g.ravel() for g in grids])
        X = np.empty_like(U)
        jac = np.ones(len(U))
        remaining = np.ones(len(U))
        for k in range(n):
            X[:, k] = U[:, k] * remaining
            jac *= remaining
            remaining = remaining - X[:, k]
        wgrid = w
        for _ in range(n - 1):
            wgrid = np.multiply.outer(wgrid, w)
        weights = jac * wgrid.ravel()
        for a in (X, weights):
            a.setflags(write=False)
        _GRID_CACHE[key] = (X, weights)
    return _GRID_CACHE[key]


def _simplex_ft(f, omega, m, rule) -> complex:
    """Transform over the open unit simplex via a smooth cube map.

    x_1 = u_1, x_k = u_k * (1 - x_1 - ... - x_{k-1}); the Jacobian keeps the
    integrand smooth, so Gauss-Legendre converges spectrally here.
    """
    X, weights = _simplex_grid(omega.size, m, rule)
    vals = np.asarray(f(X), dtype=np.float64)
    phase = np.exp(-1j * (X @ omega))
    return complex(np.sum(vals * weights * phase))


def quadrature_ft(f, omega, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """Brute-force unitary Fourier transform of a scalar field.

    ``f`` maps an (N, n) array of points to N values.  Two resolutions give
    the value (finer) and an error estimate (their difference); a result
    whose estimate exceeds cfg.tol comes back flagged, not raised.
    """
    omega = _as_freq(omega)
    n = omega.size
    if n > 3:
        raise InputShapeError("quadrature oracle supports n <= 3")
    engine = _cube_ft if cfg.domain == "cube" else _simplex_ft
    coarse = engine(f, omega, cfg.points_per_axis, cfg.rule)
    fine = engine(f, omega, 2 * cfg.points_per_axis, cfg.rule)
    unitary = (2.0 * math.pi) ** (-n / 2.0)
    err = abs(fine - coarse) * unitary
    return QuadResult(fine * unitary, err, err <= cfg.tol)


# --- first-kind Bessel functions -------------------------------------------

_SERIES_CUTOFF = 12.0


def _bessel_series(nu: float, z: float) -> float:
    """Ascending power series; accurate for moderate z at any order nu >= 0."""
    half = 0.5 * z
    if half == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    log_half = math.log(half)
    total = 0.0
    for k in range(0, 80):
        log_term = (2 * k + nu) * log_half - math.lgamma(k + 1) - math.lgamma(k + nu + 1)
        term = (-1.0) ** k * math.exp(log_term)
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300) and k > nu / 2 + half:
            break
    return total


def _bessel_asymptotic(nu: float, z: float) -> float:
    """Hankel large-argument expansion, truncated where terms stop shrinking."""
    mu = 4.0 * nu * nu
    p, q = 1.0, (mu - 1.0) / (8.0 * z)
    term = 1.0
    sign = -1.0
    for k in range(1, 14):
        factor = (mu - (4 * k - 3) ** 2) * (mu - (4 * k - 1) ** 2) / ((2 * k - 1) * 2 * k * 64.0 * z * z)
        if abs(factor) >= 1.0:
            break  # divergent tail: stop at the optimal truncation
        term *= factor
        p += sign * term
        q += sign * term * (mu - (4 * k + 1) ** 2) / ((2 * k + 1) * 8.0 * z)
        sign = -sign
    chi = z - (0.5 * nu + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * z)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j(nu: float, z: float) -> float:
    """J_nu(z) for z >= 0: closed forms for half-integer orders 1/2 and 3/2,
    ascending series for small arguments, Hankel expansion for large."""
    if z < 0.0:
        raise ValueError("argument must be nonnegative")
    if z == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if nu == 0.5:
        return math.sqrt(2.0 / (math.pi * z)) * math.sin(z)
    if nu == 1.5:
        return math.sqrt(2.0 / (math.pi * z)) * (math.sin(z) / z - math.cos(z))
    if z <= _SERIES_CUTOFF:
        return _bessel_series(nu, z)
    return _bessel_asymptotic(nu, z)


def ball_average_multiplier(n: int, radius: float, omega_norm: float) -> float:
    """Factor by which averaging over a radius-r ball scales frequency |w|.

    The true mean of exp(-i x.w) over the ball:
        2^(n/2) * Gamma(n/2 + 1) * J_{n/2}(r|w|) / (r|w|)^(n/2),
    normalized so the value at |w| = 0 is exactly 1.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if omega_norm < 0.0:
        raise ValueError("|omega| must be nonnegative")
    z = radius * omega_norm
    if z < 1e-12:
        return 1.0
    nu = 0.5 * n
    return (2.0 ** nu) * math.gamma(nu + 1.0) * bessel_j(nu, z) / (z ** nu)


def alt_convention_ratio(n: int, z: float = 2.0) -> float:
    """Measured ratio of the true ball mean to the Gamma(n/2+1)/pi^(n/2) variant.

    The variant normalization floats around in the literature; the ratio is
    reported alongside decay tables so readers can translate.
    """
    nu = 0.5 * n
    variant = math.gamma(nu + 1.0) / (math.pi ** nu) * bessel_j(nu, z) / (z ** nu)
    true = ball_average_multiplier(n, 1.0, z)
    return true / variant


@dataclass(frozen=True)
class DecayRow:
    omega: tuple
    omega_norm: float
    spectrum_mag: float
    averaged_mag: float


def spectrum_decay_report(terms, omegas, radius: float) -> list[DecayRow]:
    """Spectrum magnitude before/after ball averaging, sorted by |omega|."""
    rows = []
    for om in omegas:
        om = _as_freq(om)
        norm = float(np.linalg.norm(om))
        mag = abs(network_spectrum(terms, om))
        mult = ball_average_multiplier(om.size, radius, norm)
        rows.append(DecayRow(tuple(float(v) for v in om), norm, mag, mag * abs(mult)))
    rows.sort(key=lambda r: r.omega_norm)
    return rows


def lift_biased_network(net: Network) -> Network:
    """Rewrite a biased network as an unbiased one with a constant input.

    Inputs gain one trailing component that must be fed the constant 1; each
    hidden layer gains a pass-through unit carrying that constant forward
    (ReLU keeps it intact since 1 > 0).  Lifted logits match the original's
    exactly at [x, 1].
    """
    layers = []
    n_layers = len(net.layers)
    for li, layer in enumerate(net.layers):
        w, b = layer.weights, layer.biases
        block = np.hstack([w, b[:, None]])
        if li < n_layers - 1:
            carry = np.zeros((1, block.shape[1]))
            carry[0, -1] = 1.0
            block = np.vstack([block, carry])
        layers.append(DenseLayer(block, np.zeros(block.shape[0]), layer.activation))
    return Network(tuple(layers))
