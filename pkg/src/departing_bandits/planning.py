"""Exact planners.

Single type: the best fixed arm maximizes P / (L (1 - P)).
Two types, two categories, immediate departure on no-click: returns have a
closed form along the belief-category walk, and the optimal policy is
found in O(1) from the structure of the click matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    VALUE_TOL,
    Instance,
    InstanceError,
    PlanResult,
    Policy,
    Structure,
    denormalize_policy,
    normalize_2x2,
)

# Switch points above this are treated as "never switch" and flagged.
MAX_SWITCH = 10**6


def fixed_arm_value(p: float, l: float = 1.0) -> float:
    """Expected clicks from one user of a single type under a fixed arm."""
    return p / (l * (1.0 - p))


def single_type_optimal_arm(instance: Instance) -> tuple[int, float]:
    """Best fixed arm (one-based, lowest index on ties) and its value."""
    if instance.num_types != 1:
        raise InstanceError("single_type_optimal_arm needs M = 1")
    values = [fixed_arm_value(row[0], lrow[0])
              for row, lrow in zip(instance.click_probs, instance.depart_probs)]
    best = int(np.argmax(values))
    return best + 1, values[best]


def policy_value(instance: Instance, policy: Policy, prior: Sequence[float] | None = None) -> float:
    """Exact expected return of an open-loop policy, any M, K and L.

    Per type, the user survives iteration j with probability
    1 - L (1 - P); the prefix is summed term by term and the constant tail
    is a geometric series.
    """
    q = instance.q if prior is None else np.asarray(prior, dtype=float)
    P, L = instance.P, instance.L
    survive = np.ones(instance.num_types)
    total = np.zeros(instance.num_types)
    for a in policy.prefix:
        total += survive * P[a - 1]
        survive = survive * (1.0 - L[a - 1] * (1.0 - P[a - 1]))
    t = policy.tail - 1
    total += survive * P[t] / (L[t] * (1.0 - P[t]))
    return float(q @ total)


# -- beliefs -----------------------------------------------------------------

def belief_update(b: float, a: int, P: Sequence[Sequence[float]]) -> float:
    """Posterior that the user is type x after a click on category ``a``."""
    px, py = P[a - 1][0], P[a - 1][1]
    return b * px / (b * px + (1.0 - b) * py)


def belief_update_vector(b: Sequence[float], a: int, P: Sequence[Sequence[float]]) -> np.ndarray:
    w = np.asarray(b, dtype=float) * np.asarray(P[a - 1], dtype=float)
    return w / w.sum()


@dataclass(frozen=True)
class BeliefWalk:
    """Beliefs before each step, chosen categories, and running counts."""

    beliefs: tuple[float, ...]
    categories: tuple[int, ...]
    m1: tuple[int, ...]
    m2: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.categories)


def belief_category_walk(policy: Policy, b0: float, length: int, instance: Instance) -> BeliefWalk:
    """The walk a policy induces when every recommendation is clicked."""
    if not instance.always_departs:
        raise InstanceError("belief-category walk is deterministic only when all L = 1")
    if instance.num_categories != 2 or instance.num_types != 2:
        raise InstanceError("belief-category walk is defined for 2x2 instances")
    beliefs, cats, m1, m2 = [], [], [], []
    b, c1, c2 = b0, 0, 0
    for j in range(1, length + 1):
        a = policy.action(j)
        beliefs.append(b)
        cats.append(a)
        c1 += a == 1
        c2 += a == 2
        m1.append(c1)
        m2.append(c2)
        b = belief_update(b, a, instance.click_probs)
    return BeliefWalk(tuple(beliefs), tuple(cats), tuple(m1), tuple(m2))


def tail_bound(epsilon: float, H: int) -> float:
    """Upper bound on the expected clicks after iteration H."""
    return (1.0 - epsilon) ** H / epsilon


def expected_return_truncated(
    instance: Instance, policy: Policy, b: float | None = None, H: int = 100
) -> tuple[float, float]:
    """Partial sum of the closed-form return over the first H iterations.

    The true value lies in ``[value, value + bound]``.
    """
    if H < 1:
        raise ValueError("H must be positive")
    b = instance.prior[0] if b is None else b
    walk = belief_category_walk(policy, b, H, instance)
    (p1x, p1y), (p2x, p2y) = instance.click_probs
    m1 = np.array(walk.m1, dtype=float)
    m2 = np.array(walk.m2, dtype=float)
    terms = b * p1x**m1 * p2x**m2 + (1.0 - b) * p1y**m1 * p2y**m2
    return float(terms.sum()), tail_bound(instance.epsilon, H)


# -- threshold policies --------------------------------------------------------

def _threshold_coefficients(instance: Instance, first: int, b: float) -> tuple[float, float, float]:
    """(c1, c2, c3) with value(first, N) = c1 * p_x^N + c2 * p_y^N + c3.

    p_x, p_y are the click probabilities of ``first`` for types x and y.
    """
    P = instance.click_probs
    fx, fy = P[first - 1]
    ox, oy = P[2 - first]
    c1 = b * (fx / (fx - 1.0) + ox / (1.0 - ox))
    c2 = (1.0 - b) * (fy / (fy - 1.0) + oy / (1.0 - oy))
    c3 = b * fx / (1.0 - fx) + (1.0 - b) * fy / (1.0 - fy)
    return c1, c2, c3


def threshold_value_exact(
    instance: Instance, N: float, b: float | None = None, first: int = 2
) -> float:
    """Exact value of the (first, N)-threshold policy; ``N = inf`` means never switch."""
    if instance.num_types != 2 or instance.num_categories != 2 or not instance.always_departs:
        raise InstanceError("threshold_value_exact needs a 2x2 instance with all L = 1")
    b = instance.prior[0] if b is None else b
    c1, c2, c3 = _threshold_coefficients(instance, first, b)
    if math.isinf(N):
        return c3
    fx, fy = instance.click_probs[first - 1]
    return c1 * fx**N + c2 * fy**N + c3


@dataclass(frozen=True)
class SaddleComputation:
    c1: float
    c2: float
    c3: float
    N_tilde: float
    N_star: float
    capped: bool = False


def saddle_point(instance: Instance, b: float | None = None) -> SaddleComputation:
    """Stationary point of the dominant-column value as a function of N.

    ``instance`` must already be normalized and dominant-column with
    P_2x > P_2y and P_1x > P_2x.
    """
    b = instance.prior[0] if b is None else b
    (p1x, p1y), (p2x, p2y) = instance.click_probs
    if not (p1x >= p2x >= p2y > p1y):
        raise InstanceError("saddle_point needs a normalized dominant-column matrix")
    if p2x == p2y:
        raise InstanceError("saddle point undefined when P_2x == P_2y")
    if p1x == p2x:
        raise InstanceError("c1 vanishes (P_1x == P_2x); instance should be dominant-row")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"belief {b} outside [0, 1]")
    c1, c2, c3 = _threshold_coefficients(instance, 2, b)
    if c1 == 0.0:
        n_tilde = math.inf
    elif c2 == 0.0:
        n_tilde = -math.inf
    else:
        ratio = -c2 * math.log(p2y) / (c1 * math.log(p2x))
        n_tilde = math.log(ratio) / math.log(p2x / p2y)
    n_star = max(0.0, n_tilde)
    capped = n_star > MAX_SWITCH
    return SaddleComputation(c1, c2, c3, n_tilde, min(n_star, MAX_SWITCH), capped)


def _pick(candidates: list[tuple[Policy, float]]) -> tuple[Policy, float]:
    """First candidate whose value is not beaten by more than VALUE_TOL."""
    best_policy, best_value = candidates[0]
    for policy, value in candidates[1:]:
        if value > best_value + VALUE_TOL:
            best_policy, best_value = policy, value
    return best_policy, best_value


def optimal_policy_2x2(instance: Instance) -> PlanResult:
    """Optimal policy for two types and two categories with all L = 1.

    Candidates are compared in order of increasing time spent on the
    category-2 prefix, so ties favour the earlier switch and then pi^1.
    """
    if instance.num_types != 2 or instance.num_categories != 2:
        raise InstanceError("optimal_policy_2x2 needs M = K = 2")
    if not instance.always_departs:
        raise InstanceError("optimal_policy_2x2 needs all L = 1")
    norm, structure = normalize_2x2(instance)
    b = norm.prior[0]
    pi1, pi2 = Policy.fixed(1), Policy.fixed(2)
    v1 = threshold_value_exact(norm, 0, b)
    v2 = threshold_value_exact(norm, math.inf, b)

    if structure.variant is Structure.DOMINANT_ROW:
        cands = [(pi1, v1)]
    elif structure.variant is Structure.DOMINANT_COLUMN:
        (p1x, p1y), (p2x, p2y) = norm.click_probs
        cands = [(pi1, v1)]
        if p2x > p2y:
            sp = saddle_point(norm, b)
            for n in sorted({math.floor(sp.N_star), math.ceil(sp.N_star)} - {0}):
                cands.append((Policy.threshold(2, n), threshold_value_exact(norm, n, b)))
        cands.append((pi2, v2))
    else:
        cands = [(pi1, v1), (pi2, v2)]

    policy, value = _pick(cands)
    candidates = {denormalize_policy(p, structure).label: v for p, v in cands}
    return PlanResult(denormalize_policy(policy, structure), value, structure, candidates)
