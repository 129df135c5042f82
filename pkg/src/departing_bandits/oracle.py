"""Independent ways to compute policy values, used to check the planners.

Nothing here imports the planning or DP code.
"""

from __future__ import annotations

import math

import numpy as np

from .core import VALUE_TOL, Instance, InstanceError, Policy
from .environment import RngStream, run_episodes

MAX_TREE_DEPTH = 14


def monte_carlo_value(
    instance: Instance, policy: Policy, n_episodes: int, rng: RngStream, batch: int = 200_000
) -> tuple[float, float]:
    """Sample mean and standard error of the return over simulated users."""
    if n_episodes < 1:
        raise ValueError("need at least one episode")
    total = 0.0
    total_sq = 0.0
    for start in range(0, n_episodes, batch):
        clicks, _ = run_episodes(instance, policy, rng, min(batch, n_episodes - start), start=start)
        total += float(clicks.sum())
        total_sq += float((clicks.astype(float) ** 2).sum())
    mean = total / n_episodes
    if n_episodes == 1:
        return mean, math.inf
    var = (total_sq - n_episodes * mean**2) / (n_episodes - 1)
    return mean, math.sqrt(max(var, 0.0) / n_episodes)


def brute_force_value(instance: Instance, policy: Policy, H: int) -> float:
    """Expected clicks in the first H iterations when a no-click always ends the episode.

    For each type, the i-th click happens only if all of the first i
    recommendations were clicked, so its probability is a running product.
    """
    if not instance.always_departs:
        raise InstanceError("brute_force_value assumes all L = 1")
    if H > 10**4:
        raise ValueError("H too large for brute force")
    value = 0.0
    for x, qx in enumerate(instance.prior):
        survive = 1.0
        acc = 0.0
        for j in range(1, H + 1):
            survive *= instance.click_probs[policy.action(j) - 1][x]
            acc += survive
        value += qx * acc
    return value


def brute_force_value_general(instance: Instance, policy: Policy, H: int) -> float:
    """Expected clicks in the first H iterations by walking the outcome tree.

    Every iteration branches into click, no-click-and-stay and departure;
    only departure ends a path. Exponential in H.
    """
    if H > MAX_TREE_DEPTH:
        raise ValueError(f"H = {H} exceeds the tree-enumeration limit {MAX_TREE_DEPTH}")
    actions = policy.actions(H)
    P, L = instance.click_probs, instance.depart_probs

    def expand(x: int, j: int, prob: float, clicks: int) -> float:
        if j == H:
            return prob * clicks
        a = actions[j] - 1
        p, l = P[a][x], L[a][x]
        out = expand(x, j + 1, prob * p, clicks + 1)
        out += prob * (1 - p) * l * clicks
        if l < 1.0:
            out += expand(x, j + 1, prob * (1 - p) * (1 - l), clicks)
        return out

    return sum(qx * expand(x, 0, 1.0, 0) for x, qx in enumerate(instance.prior) if qx > 0)


def _threshold_value(instance: Instance, first: int, h: int) -> float:
    # per type: h clicks-in-a-row terms of p_first, then a geometric tail of p_other
    other = 3 - first
    value = 0.0
    for x, qx in enumerate(instance.prior):
        pf = instance.click_probs[first - 1][x]
        po = instance.click_probs[other - 1][x]
        head = pf * (1 - pf**h) / (1 - pf)
        value += qx * (head + pf**h * po / (1 - po))
    return value


def grid_search_threshold(instance: Instance, H_max: int) -> tuple[Policy, float]:
    """Best (a, h)-threshold policy with h <= H_max by exhaustive evaluation.

    Scans h upward, trying a = 2 before a = 1, and keeps the first policy
    not beaten by more than VALUE_TOL.
    """
    if instance.num_types != 2 or instance.num_categories != 2 or not instance.always_departs:
        raise InstanceError("grid_search_threshold needs a 2x2 instance with all L = 1")
    if H_max < 1:
        raise ValueError("H_max must be at least 1")
    best, best_value = None, -np.inf
    for h in range(H_max + 1):
        for first in (2, 1):
            v = _threshold_value(instance, first, h)
            if v > best_value + VALUE_TOL:
                best, best_value = Policy.threshold(first, h), v
    return best, best_value


def exhaustive_best_sequence(instance: Instance, H: int) -> tuple[tuple[int, ...], float]:
    """Best length-H two-category action sequence by trying all 2^H of them."""
    if instance.num_categories != 2 or not instance.always_departs:
        raise InstanceError("exhaustive search needs K = 2 and all L = 1")
    if H > 20:
        raise ValueError("H too large for exhaustive search")
    P = instance.P
    q = instance.q
    n = 1 << H
    # bit j of the sequence index selects category 2 at step j + 1
    bits = (np.arange(n)[:, None] >> np.arange(H)[None, :]) & 1
    values = np.zeros(n)
    for x in range(instance.num_types):
        step_p = np.where(bits == 1, P[1, x], P[0, x])
        values += q[x] * np.cumprod(step_p, axis=1).sum(axis=1)
    i = int(np.argmax(values))
    return tuple(int(b) + 1 for b in bits[i]), float(values[i])
