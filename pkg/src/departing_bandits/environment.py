"""Simulator for the departing-bandits interaction protocol.

Randomness comes from a counter-based generator: draw ``k`` of stream
``(seed, stream)`` is ``u = mix(mix(key) + GAMMA * (k + 1)) >> 11 / 2**53``
with ``key = mix(seed + GAMMA * (stream + 1))`` and ``mix`` the SplitMix64
finalizer. Any draw can be recomputed from its coordinates, so a batch of
episodes simulated with numpy produces the same outcomes as running them
one at a time.

Per iteration the draws are consumed in a fixed order: one uniform for the
click, then (only after a no-click) one uniform for departure. The user's
type takes one uniform at the start of the episode.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .core import EpisodeResult, Instance, Policy

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MAX_EPISODE_LENGTH = 10**7


class EpisodeTooLong(RuntimeError):
    """Raised when an episode exceeds the length guard (L close to 0)."""


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RngStream:
    """Coordinates of a reproducible random stream."""

    seed: int
    stream: int = 0

    @property
    def key(self) -> int:
        return _mix64((self.seed + GAMMA * (self.stream + 1)) & MASK64)

    def uniform(self, k: int) -> float:
        """The ``k``-th uniform in [0, 1) of this stream."""
        return (_mix64((self.key + GAMMA * (k + 1)) & MASK64) >> 11) * 2.0**-53

    def substream(self, index: int) -> RngStream:
        """Independent child stream, e.g. one per episode."""
        return RngStream(self.key, index)

    def cursor(self) -> _Cursor:
        return _Cursor(self)


@dataclass
class _Cursor:
    rng: RngStream
    k: int = 0
    _key: int = field(init=False)

    def __post_init__(self) -> None:
        self._key = self.rng.key

    def __call__(self) -> float:
        self.k += 1
        return (_mix64((self._key + GAMMA * self.k) & MASK64) >> 11) * 2.0**-53


def uniforms_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vectorized ``RngStream.uniform`` for precomputed stream keys."""
    with np.errstate(over="ignore"):
        z = keys.astype(np.uint64) + np.uint64(GAMMA) * (counters.astype(np.uint64) + np.uint64(1))
        return (_mix64_np(z) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def sample_type(prior: Sequence[float], u: float) -> int:
    """Zero-based type index for uniform ``u`` by inverse CDF."""
    acc = 0.0
    for x, p in enumerate(prior):
        acc += p
        if u < acc:
            return x
    return len(prior) - 1


def run_episode(
    instance: Instance,
    policy: Policy,
    rng: RngStream,
    max_length: int = MAX_EPISODE_LENGTH,
) -> EpisodeResult:
    """Simulate one user under ``policy`` until departure."""
    if policy.max_category() > instance.num_categories:
        raise ValueError(f"policy {policy.label} uses a category outside [K]")
    draw = rng.cursor()
    x = sample_type(instance.prior, draw())
    P = [row[x] for row in instance.click_probs]
    L = [row[x] for row in instance.depart_probs]
    prefix, tail = policy.prefix, policy.tail
    clicks = 0
    j = 0
    while j < max_length:
        a = prefix[j] if j < len(prefix) else tail
        j += 1
        if draw() < P[a - 1]:
            clicks += 1
        elif draw() < L[a - 1]:
            return EpisodeResult(clicks, j)
    raise EpisodeTooLong(f"episode exceeded {max_length} iterations")


def run_episodes(
    instance: Instance,
    policy: Policy,
    rng: RngStream,
    n_episodes: int,
    start: int = 0,
    max_length: int = MAX_EPISODE_LENGTH,
) -> tuple[np.ndarray, np.ndarray]:
    """Returns and lengths of episodes ``start .. start + n - 1``.

    Episode ``i`` uses ``rng.substream(i)``; results equal calling
    :func:`run_episode` on each substream.
    """
    idx = np.arange(start, start + n_episodes, dtype=np.uint64)
    with np.errstate(over="ignore"):
        keys = _mix64_np(np.uint64(rng.key) + np.uint64(GAMMA) * (idx + np.uint64(1)))
    counters = np.zeros(n_episodes, dtype=np.uint64)

    cdf = np.cumsum(instance.prior)
    cdf[-1] = np.inf
    types = np.searchsorted(cdf, uniforms_np(keys, counters), side="right")
    counters += np.uint64(1)

    P = instance.P[:, types]
    L = instance.L[:, types]
    plan = np.array(list(policy.prefix) + [policy.tail]) - 1
    clicks = np.zeros(n_episodes, dtype=np.int64)
    lengths = np.zeros(n_episodes, dtype=np.int64)
    active = np.arange(n_episodes)
    j = 0
    while active.size:
        if j >= max_length:
            raise EpisodeTooLong(f"episode exceeded {max_length} iterations")
        a = plan[min(j, plan.size - 1)]
        j += 1
        u = uniforms_np(keys[active], counters[active])
        counters[active] += np.uint64(1)
        hit = u < P[a, active]
        clicks[active[hit]] += 1
        miss = active[~hit]
        v = uniforms_np(keys[miss], counters[miss])
        counters[miss] += np.uint64(1)
        gone = miss[v < L[a, miss]]
        lengths[gone] = j
        keep = np.ones(active.size, dtype=bool)
        keep[np.searchsorted(active, gone)] = False
        active = active[keep]
    return clicks, lengths


class Learner(Protocol):
    """Chooses a policy per user and learns from the realized return.

    The learner never sees the user's type.
    """

    def select(self) -> tuple[int, Policy]: ...

    def update(self, episode_return: int, length: int) -> None: ...


@dataclass(frozen=True)
class StreamResult:
    policy_ids: list[int]
    policy_labels: list[str]
    episodes: list[EpisodeResult]

    @property
    def returns(self) -> np.ndarray:
        return np.array([e.return_clicks for e in self.episodes], dtype=float)

    @property
    def total_value(self) -> int:
        return sum(e.return_clicks for e in self.episodes)

    def __len__(self) -> int:
        return len(self.episodes)

    def to_csv(self, path: str | Path) -> None:
        write_results_csv(self, path)


def run_stream(instance: Instance, learner: Learner, T: int, rng: RngStream) -> StreamResult:
    """Serve ``T`` users sequentially; user ``t`` uses ``rng.substream(t)``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    ids, labels, episodes = [], [], []
    for t in range(T):
        pid, policy = learner.select()
        res = run_episode(instance, policy, rng.substream(t))
        learner.update(res.return_clicks, res.length)
        ids.append(pid)
        labels.append(policy.label)
        episodes.append(res)
    return StreamResult(ids, labels, episodes)


class FixedLearner:
    """Plays the same policy for every user."""

    def __init__(self, policy: Policy, policy_id: int = 0) -> None:
        self.policy = policy
        self.policy_id = policy_id

    def select(self) -> tuple[int, Policy]:
        return self.policy_id, self.policy

    def update(self, episode_return: int, length: int) -> None:
        pass


class RoundRobinLearner:
    """Cycles through a list of policies in order."""

    def __init__(self, policies: Sequence[Policy]) -> None:
        self.policies = list(policies)
        self.t = 0

    def select(self) -> tuple[int, Policy]:
        i = self.t % len(self.policies)
        return i, self.policies[i]

    def update(self, episode_return: int, length: int) -> None:
        self.t += 1


def write_results_csv(result: StreamResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "policy_id", "return", "length"])
        for t, (pid, ep) in enumerate(zip(result.policy_ids, result.episodes), start=1):
            w.writerow([t, pid, ep.return_clicks, ep.length])


def geometric_cdf(k: np.ndarray, p: float) -> np.ndarray:
    """P(N <= k) for N ~ Geometric(p) on {1, 2, ...}."""
    k = np.asarray(k, dtype=float)
    return np.where(k < 1, 0.0, -np.expm1(np.floor(k) * math.log1p(-p)))
