"""White-box adversarial attacks under an l-inf budget.

FGSM, PGD, DeepFool and the Carlini-Wagner L2 attack against the raw
(undefended) model, plus the top-k-miss adversariality test.  Every
successful result respects the budget: DeepFool and C&W are minimal-
perturbation methods, so instead of clipping them into the ball (which
would break their semantics) an over-budget result is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .nn import Network, forward, input_gradient, predict_topk

BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class ThreatModel:
    """l-inf budget, valid input box and the top-k-miss criterion."""

    epsilon: float
    lo: np.ndarray
    hi: np.ndarray
    miss_k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("domain bounds need lo < hi componentwise")
        if self.miss_k < 1:
            raise ValueError("miss_k must be >= 1")

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def in_domain(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12))


def box_threat_model(n: int, epsilon: float, lo=0.0, hi=1.0, miss_k: int = 1) -> ThreatModel:
    return ThreatModel(epsilon, np.full(n, float(lo)), np.full(n, float(hi)), miss_k)


@dataclass(frozen=True)
class AttackResult:
    success: bool
    adversarial_x: np.ndarray | None
    forward_calls: int
    gradient_calls: int
    linf: float
    l2: float


def is_adversarial(net: Network, x, true_label: int, miss_k: int = 1) -> bool:
    """True iff the true label is missing from the model's top-k prediction."""
    return true_label not in predict_topk(net, x, miss_k)


def _finalize(net, x0, candidate, y, tm, fwd, grad) -> AttackResult:
    """Package a candidate point, enforcing the success invariant."""
    delta = candidate - x0
    linf = float(np.max(np.abs(delta)))
    l2 = float(np.linalg.norm(delta))
    ok = (
        linf <= tm.epsilon + BUDGET_SLACK
        and tm.in_domain(candidate)
        and is_adversarial(net, candidate, y, tm.miss_k)
    )
    fwd += 1
    if not ok:
        return AttackResult(False, None, fwd, grad, linf, l2)
    result = AttackResult(True, candidate.copy(), fwd, grad, linf, l2)
    if result.linf > tm.epsilon + BUDGET_SLACK:
        raise InvariantViolation("successful attack exceeded the l-inf budget")
    return result


def fgsm(net: Network, x, y: int, tm: ThreatModel) -> AttackResult:
    """Single signed-gradient step of size epsilon, clipped to the domain."""
    x = np.asarray(x, dtype=np.float64)
    g = input_gradient(net, x, ("cross_entropy", y))
    candidate = tm.clip(x + tm.epsilon * np.sign(g))
    return _finalize(net, x, candidate, y, tm, fwd=0, grad=1)


def pgd(
    net: Network,
    x,
    y: int,
    tm: ThreatModel,
    steps: int = 40,
    step_size: float | None = None,
    random_start: bool = True,
    seed: int = 0,
) -> AttackResult:
    """Iterated signed-gradient ascent projected onto the budget ball.

    Each step is projected onto the l-inf ball around x intersected with the
    domain box; the loop exits on the first adversarial iterate.  With one
    step, no random start and step_size = epsilon this reproduces fgsm
    bit for bit, query counts included.
    """
    x = np.asarray(x, dtype=np.float64)
    if step_size is None:
        step_size = tm.epsilon / 10.0
    if step_size <= 0.0:
        raise ValueError("step_size must be positive")

    cur = x
    fwd = grad = 0
    if random_start:
        rng = np.random.default_rng(seed)
        cur = tm.clip(x + rng.uniform(-tm.epsilon, tm.epsilon, size=x.shape))

    for i in range(steps):
        if i > 0 or random_start:
            fwd += 1
            if is_adversarial(net, cur, y, tm.miss_k):
                return _finalize(net, x, cur, y, tm, fwd, grad)
        g = input_gradient(net, cur, ("cross_entropy", y))
        grad += 1
        stepped = cur + step_size * np.sign(g)
        cur = tm.clip(x + np.clip(stepped - x, -tm.epsilon, tm.epsilon))
    return _finalize(net, x, cur, y, tm, fwd, grad)


def deepfool(
    net: Network,
    x,
    y: int,
    tm: ThreatModel,
    max_iter: int = 50,
    overshoot: float = 0.02,
) -> AttackResult:
    """Steps to the nearest linearized decision boundary over all classes.

    The full linearized step can land far beyond the boundary when the
    margin bends along the path, so once the class flips the accumulated
    perturbation is bisected down to the smallest still-flipping scale.
    The result is scaled by (1 + overshoot); a final point whose
    perturbation exceeds the budget is rejected rather than clipped.
    """
    x = np.asarray(x, dtype=np.float64)
    fwd = grad = 0

    fwd += 1
    if is_adversarial(net, x, y, tm.miss_k):
        return _finalize(net, x, x.copy(), y, tm, fwd, grad)

    cur = x.copy()
    total = np.zeros_like(x)
    for _ in range(max_iter):
        trace = forward(net, cur)
        fwd += 1
        logits = trace.logits
        grads = np.array(
            [input_gradient(net, cur, ("logit", j), trace=trace) for j in range(net.class_count)]
        )
        grad += net.class_count

        best_step = None
        best_dist = math.inf
        for j in range(net.class_count):
            if j == y:
                continue
            w = grads[j] - grads[y]
            fj = logits[j] - logits[y]
            norm = float(np.linalg.norm(w))
            if norm < 1e-12:
                continue
            dist = abs(fj) / norm
            if dist < best_dist:
                best_dist = dist
                best_step = (abs(fj) + 1e-12) / (norm * norm) * w
        if best_step is None:
            break
        total += best_step
        cur = x + (1.0 + overshoot) * total
        fwd += 1
        if is_adversarial(net, tm.clip(cur), y, tm.miss_k):
            break

    def flips(t):
        return is_adversarial(net, tm.clip(x + t * total), y, tm.miss_k)

    fwd += 1
    if flips(1.0):
        lo, hi = 0.0, 1.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            fwd += 1
            if flips(mid):
                hi = mid
            else:
                lo = mid
        total = hi * total

    candidate = tm.clip(x + (1.0 + overshoot) * total)
    return _finalize(net, x, candidate, y, tm, fwd, grad)


@dataclass(frozen=True)
class CwConfig:
    confidence: float = 0.0
    binary_search_steps: int = 9
    max_iter: int = 1000
    learning_rate: float = 0.01
    initial_c: float = 1e-2


def _kth_best_other(logits: np.ndarray, y: int, k: int) -> int:
    others = [j for j in range(len(logits)) if j != y]
    others.sort(key=lambda j: -logits[j])
    return others[min(k, len(others)) - 1]


def cw_l2(net: Network, x, y: int, tm: ThreatModel, cfg: CwConfig = CwConfig()) -> AttackResult:
    """Carlini-Wagner L2: minimize ||delta||^2 + c * margin hinge.

    The box constraint is enforced by a tanh change of variables, c is tuned
    by binary search, and the inner minimization is Adam as in the attack's
    standard formulation.  The hinge compares the true logit against the
    k-th best other logit so top-k-miss threat models are supported.  The
    best (smallest-l2) success is kept; an over-budget result is rejected.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = tm.lo, tm.hi
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("cw_l2 needs finite domain bounds for the tanh box map")
    span = hi - lo
    fwd = grad = 0

    def to_box(w):
        return lo + span * 0.5 * (np.tanh(w) + 1.0)

    def to_w(xx):
        t = np.clip(2.0 * (xx - lo) / span - 1.0, -1.0 + 1e-9, 1.0 - 1e-9)
        return np.arctanh(t)

    w0 = to_w(x)
    c = cfg.initial_c
    c_lo, c_hi = 0.0, math.inf
    best_x = None
    best_l2 = math.inf

    for _ in range(cfg.binary_search_steps):
        w = w0.copy()
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        found = False
        for it in range(1, cfg.max_iter + 1):
            xx = to_box(w)
            delta = xx - x
            trace = forward(net, xx)
            fwd += 1
            logits = trace.logits
            j = _kth_best_other(logits, y, tm.miss_k)
            margin = logits[y] - logits[j] + cfg.confidence
            if margin > 0.0:
                g_margin = input_gradient(net, xx, ("margin", y, j), trace=trace)
                grad += 1
            else:
                g_margin = np.zeros_like(x)
                l2 = float(np.linalg.norm(delta))
                fwd += 1
                if is_adversarial(net, xx, y, tm.miss_k) and l2 < best_l2:
                    best_l2, best_x = l2, xx.copy()
                    found = True
            g_total = 2.0 * delta + c * g_margin
            g_w = g_total * span * 0.5 * (1.0 - np.tanh(w) ** 2)
            m = 0.9 * m + 0.1 * g_w
            v = 0.999 * v + 0.001 * g_w * g_w
            mh = m / (1.0 - 0.9 ** it)
            vh = v / (1.0 - 0.999 ** it)
            w = w - cfg.learning_rate * mh / (np.sqrt(vh) + 1e-8)

        if found:
            c_hi = c
            c = 0.5 * (c_lo + c_hi)
        else:
            c_lo = c
            c = c * 10.0 if math.isinf(c_hi) else 0.5 * (c_lo + c_hi)

    if best_x is None:
        return AttackResult(False, None, fwd, grad, 0.0, 0.0)
    return _finalize(net, x, best_x, y, tm, fwd, grad)
