"""UCB-Hybrid over a finite set of policies, plus regret bookkeeping.

Each policy is treated as one arm whose samples are whole-episode returns.
Confidence radii are linear in 1/n while n < 8 eta ln T and switch to a
sqrt(1/n) radius afterwards; the constants come from sub-exponential
parameters that depend only on the margin epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Instance, Policy
from .environment import RngStream, StreamResult, run_stream


@dataclass(frozen=True)
class SubExpParams:
    tilde_tau: float
    eta: float = 1.0


def fixed_arm_tau(p: float, l: float = 1.0) -> float:
    """Sub-exponential parameter tau_a = b_a of a fixed arm's return."""
    return -8.0 * math.e / math.log1p(-l * (1.0 - p))


def subexp_params_single_type(epsilon: float) -> SubExpParams:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return SubExpParams(8.0 * math.e / -math.log1p(-epsilon), 1.0)


def subexp_params_two_type(epsilon: float) -> SubExpParams:
    # Threshold policies admit the same bounds as fixed arms.
    return subexp_params_single_type(epsilon)


def build_fixed_arm_policy_set(K: int) -> list[Policy]:
    if K < 1:
        raise ValueError("K must be positive")
    return [Policy.fixed(a) for a in range(1, K + 1)]


def build_threshold_policy_set(H: int) -> list[Policy]:
    """All (a, h)-threshold policies with a in {1, 2} and h <= H, 2H + 2 of them."""
    if H < 0:
        raise ValueError("H must be non-negative")
    return [Policy.threshold(a, h) for a in (1, 2) for h in range(H + 1)]


def horizon_for_T(T: int, epsilon: float) -> int:
    """Smallest H whose per-user truncation loss (1-eps)^H / eps is at most 1/T."""
    if T < 2:
        raise ValueError("T must be at least 2")
    return max(0, math.ceil(math.log(T / epsilon) / -math.log1p(-epsilon)))


def confidence_radius(n: int, T: int, params: SubExpParams) -> float:
    """Hybrid radius after ``n`` samples of a policy; infinite when n == 0."""
    if n == 0:
        return math.inf
    log_T = math.log(T)
    if n < 8.0 * params.eta * log_T:
        return 8.0 * math.sqrt(params.eta) * params.tilde_tau * log_T / n
    return math.sqrt(8.0 * params.tilde_tau**2 * log_T / n)


@dataclass
class LearnerState:
    """Per-policy pull counts, return sums and upper confidence bounds."""

    policies: list[Policy]
    T: int
    params: SubExpParams
    counts: np.ndarray = field(init=False)
    sums: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)
    t: int = 0
    last: int | None = None

    def __post_init__(self) -> None:
        if self.T < 2:
            raise ValueError("T must be at least 2 so that ln T > 0")
        if not self.policies:
            raise ValueError("empty policy set")
        n = len(self.policies)
        self.counts = np.zeros(n, dtype=np.int64)
        self.sums = np.zeros(n)
        self.upper = np.full(n, np.inf)

    @property
    def means(self) -> np.ndarray:
        return np.divide(self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0)

    def observe(self, episode_return: float) -> None:
        if self.last is None:
            raise RuntimeError("observed a return before any policy was chosen")
        i = self.last
        self.counts[i] += 1
        self.sums[i] += episode_return
        n = int(self.counts[i])
        self.upper[i] = self.sums[i] / n + confidence_radius(n, self.T, self.params)
        self.t += 1
        self.last = None

    def choose(self) -> int:
        # np.argmax returns the lowest index among ties
        self.last = int(np.argmax(self.upper))
        return self.last


def ucb_hybrid_step(state: LearnerState, last_return: float | None) -> tuple[int, Policy]:
    """Record the previous return (if any) and pick the next policy."""
    if last_return is not None:
        state.observe(last_return)
    i = state.choose()
    return i, state.policies[i]


class UCBHybrid:
    """Learner wrapper around :class:`LearnerState` for :func:`run_stream`."""

    def __init__(self, policies: Sequence[Policy], T: int, params: SubExpParams) -> None:
        self.state = LearnerState(list(policies), T, params)

    def select(self) -> tuple[int, Policy]:
        i = self.state.choose()
        return i, self.state.policies[i]

    def update(self, episode_return: int, length: int) -> None:
        self.state.observe(episode_return)


def run_ucb_hybrid(
    instance: Instance,
    policies: Sequence[Policy],
    T: int,
    seed: int,
    params: SubExpParams | None = None,
) -> StreamResult:
    params = params or subexp_params_two_type(instance.epsilon)
    learner = UCBHybrid(policies, T, params)
    return run_stream(instance, learner, T, RngStream(seed))


def regret_curve(trace: StreamResult | Sequence[float], v_star: float) -> np.ndarray:
    """Cumulative regret t * v_star - (sum of the first t realized returns)."""
    returns = trace.returns if isinstance(trace, StreamResult) else np.asarray(trace, dtype=float)
    t = np.arange(1, returns.size + 1)
    return t * v_star - np.cumsum(returns)


def pseudo_regret_curve(
    policy_ids: Sequence[int], policy_values: Sequence[float], v_star: float
) -> np.ndarray:
    """Cumulative regret with each realized return replaced by its policy's exact mean.

    Unbiased for the expected regret and far less noisy than
    :func:`regret_curve`.
    """
    gaps = v_star - np.asarray(policy_values, dtype=float)[np.asarray(policy_ids, dtype=int)]
    return np.cumsum(gaps)


def doubling_ratio(curve: np.ndarray) -> float:
    """Regret after all T episodes over regret after the first T/2."""
    T = len(curve)
    return float(curve[T - 1] / curve[T // 2 - 1])


@dataclass
class RegretStudy:
    """Regret curves of one learner over several seeds (rows = seeds)."""

    seeds: list[int]
    realized: np.ndarray
    expected: np.ndarray
    pull_counts: np.ndarray
    late_pull_counts: np.ndarray  # pulls during the last 10% of episodes

    @staticmethod
    def _summary(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean = curves.mean(axis=0)
        if len(curves) < 2:
            return mean, np.zeros_like(mean)
        return mean, curves.std(axis=0, ddof=1) / math.sqrt(len(curves))

    def realized_summary(self) -> tuple[np.ndarray, np.ndarray]:
        return self._summary(self.realized)

    def expected_summary(self) -> tuple[np.ndarray, np.ndarray]:
        return self._summary(self.expected)

    def doubling_ratios(self, expected: bool = True) -> list[float]:
        curves = self.expected if expected else self.realized
        return [doubling_ratio(c) for c in curves]

    def mean_doubling_ratio(self, expected: bool = True) -> float:
        """Ratio of seed-averaged regret at T and at T/2."""
        curves = self.expected if expected else self.realized
        return doubling_ratio(curves.mean(axis=0))


def _one_seed(args) -> tuple[np.ndarray, np.ndarray]:
    instance, policies, T, seed, params = args
    trace = run_ucb_hybrid(instance, policies, T, seed, params)
    return np.asarray(trace.policy_ids), trace.returns


def regret_study(
    instance: Instance,
    policies: Sequence[Policy],
    T: int,
    seeds: Sequence[int],
    v_star: float,
    policy_values: Sequence[float],
    params: SubExpParams | None = None,
    workers: int = 1,
) -> RegretStudy:
    """Run UCB-Hybrid once per seed; seeds may run in parallel processes."""
    params = params or subexp_params_two_type(instance.epsilon)
    jobs = [(instance, list(policies), T, s, params) for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_seed, jobs))
    else:
        results = [_one_seed(j) for j in jobs]
    realized = np.stack([regret_curve(r, v_star) for _, r in results])
    expected = np.stack([pseudo_regret_curve(ids, policy_values, v_star) for ids, _ in results])
    pulls = np.stack([np.bincount(ids, minlength=len(policies)) for ids, _ in results])
    late = np.stack([np.bincount(ids[T - max(1, T // 10):], minlength=len(policies)) for ids, _ in results])
    return RegretStudy(list(seeds), realized, expected, pulls, late)
