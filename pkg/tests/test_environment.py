import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from departing_bandits.core import Policy, validate_instance
from departing_bandits.environment import (
    EpisodeTooLong,
    FixedLearner,
    RngStream,
    RoundRobinLearner,
    geometric_cdf,
    run_episode,
    run_episodes,
    run_stream,
    write_results_csv,
)

from conftest import TABLE1_OPT, TABLE1_PI2, instances_2x2, policies


def within_3se(x: np.ndarray, mu: float) -> bool:
    return abs(x.mean() - mu) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_rng_stream_is_pinned():
    # regression values: the generator is part of the reproducibility contract
    r = RngStream(12345, 3)
    assert [r.uniform(k) for k in range(3)] == [
        0.6324916553096765, 0.5739827318787692, 0.7433926012876407,
    ]
    draw = r.cursor()
    assert [draw() for _ in range(3)] == [r.uniform(k) for k in range(3)]


def test_substreams_differ():
    r = RngStream(1)
    assert r.substream(0).uniform(0) != r.substream(1).uniform(0)
    assert RngStream(1, 0).uniform(0) != RngStream(2, 0).uniform(0)


def test_uniforms_look_uniform():
    r = RngStream(99)
    u = np.array([r.uniform(k) for k in range(20_000)])
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01
    counts = np.histogram(u, bins=10, range=(0, 1))[0]
    assert counts.min() > 1800


def test_no_clicks_when_click_prob_tiny():
    inst = validate_instance({"q": [0.5, 0.5], "P": [[1e-9, 1e-9], [1e-9, 1e-9]]})
    clicks, lengths = run_episodes(inst, Policy.fixed(1), RngStream(0), 100_000)
    assert (clicks == 0).mean() >= 1 - 1e-6
    assert lengths.min() >= 1


def test_single_type_mean_matches_geometric_series():
    inst = validate_instance({"q": [1.0], "P": [[0.5]], "L": [[1.0]]})
    clicks, _ = run_episodes(inst, Policy.fixed(1), RngStream(3), 100_000)
    assert within_3se(clicks, 0.5 / (1 * (1 - 0.5)))


def test_table1_pi2_mean(table1):
    clicks, _ = run_episodes(table1, Policy.fixed(2), RngStream(5), 100_000)
    assert within_3se(clicks, TABLE1_PI2)


def test_episode_length_is_geometric():
    p, l = 0.6, 0.7
    inst = validate_instance({"q": [1.0], "P": [[p]], "L": [[l]]})
    _, lengths = run_episodes(inst, Policy.fixed(1), RngStream(11), 100_000)
    ks = np.arange(1, lengths.max() + 1)
    emp = np.searchsorted(np.sort(lengths), ks, side="right") / lengths.size
    assert np.abs(emp - geometric_cdf(ks, l * (1 - p))).max() < 0.01


@settings(max_examples=40, deadline=None)
@given(instances_2x2(departing=True), policies(), st.integers(0, 2**32))
def test_batch_matches_serial(inst, policy, seed):
    rng = RngStream(seed)
    clicks, lengths = run_episodes(inst, policy, rng, 50, start=7)
    for i in range(50):
        ep = run_episode(inst, policy, rng.substream(7 + i))
        assert (ep.return_clicks, ep.length) == (clicks[i], lengths[i])


@settings(max_examples=30, deadline=None)
@given(instances_2x2(), policies(), st.integers(0, 2**32))
def test_immediate_departure_means_one_miss(inst, policy, seed):
    clicks, lengths = run_episodes(inst, policy, RngStream(seed), 200)
    assert np.array_equal(clicks, lengths - 1)


def test_clicks_plus_misses_equal_length():
    inst = validate_instance({"q": [1.0], "P": [[0.3]], "L": [[0.4]]})
    rng = RngStream(2)
    for i in range(200):
        ep = run_episode(inst, Policy.fixed(1), rng.substream(i))
        assert ep.return_clicks <= ep.length
    clicks, lengths = run_episodes(inst, Policy.fixed(1), rng, 2000)
    assert (lengths - clicks >= 1).all()
    # misses per episode are geometric too: mean 1 / L
    assert within_3se((lengths - clicks).astype(float), 1 / 0.4)


def test_length_guard():
    inst = validate_instance({"q": [1.0], "P": [[0.5]], "L": [[1e-9]]})
    with pytest.raises(EpisodeTooLong):
        run_episode(inst, Policy.fixed(1), RngStream(0), max_length=1000)
    with pytest.raises(EpisodeTooLong):
        run_episodes(inst, Policy.fixed(1), RngStream(0), 10, max_length=1000)


def test_policy_outside_categories(table1):
    with pytest.raises(ValueError):
        run_episode(table1, Policy.fixed(3), RngStream(0))


def test_stream_single_episode(table1):
    res = run_stream(table1, FixedLearner(Policy.fixed(1)), 1, RngStream(0))
    assert len(res) == 1 and res.policy_ids == [0]


def test_stream_constant_optimal_policy(table1):
    res = run_stream(table1, FixedLearner(Policy.threshold(2, 6)), 10_000, RngStream(8))
    assert within_3se(res.returns, TABLE1_OPT)
    assert res.total_value == res.returns.sum()


def test_stream_alternating_ids(table1):
    res = run_stream(table1, RoundRobinLearner([Policy.fixed(1), Policy.fixed(2)]), 10_000, RngStream(4))
    assert res.policy_ids[:4] == [0, 1, 0, 1]
    assert all(a != b for a, b in zip(res.policy_ids, res.policy_ids[1:]))
    assert res.policy_labels[:2] == ["pi1", "pi2"]


def test_stream_is_deterministic(tmp_path, table1):
    paths = []
    for k in range(2):
        res = run_stream(table1, RoundRobinLearner([Policy.fixed(1), Policy.threshold(2, 3)]),
                         500, RngStream(21))
        paths.append(tmp_path / f"run{k}.csv")
        write_results_csv(res, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "episode,policy_id,return,length"
    assert len(lines) == 501
    assert lines[1].startswith("1,0,")


def test_learner_never_sees_type(table1):
    seen = []

    class Spy(FixedLearner):
        def update(self, episode_return, length):
            seen.append((episode_return, length))

    run_stream(table1, Spy(Policy.fixed(1)), 20, RngStream(0))
    assert all(len(s) == 2 for s in seen)


def test_stream_needs_positive_T(table1):
    with pytest.raises(ValueError):
        run_stream(table1, FixedLearner(Policy.fixed(1)), 0, RngStream(0))
