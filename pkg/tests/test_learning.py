import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from departing_bandits.core import Policy, validate_instance
from departing_bandits.environment import FixedLearner, RngStream, run_stream
from departing_bandits.learning import (
    LearnerState,
    SubExpParams,
    UCBHybrid,
    build_fixed_arm_policy_set,
    build_threshold_policy_set,
    confidence_radius,
    doubling_ratio,
    fixed_arm_tau,
    horizon_for_T,
    pseudo_regret_curve,
    regret_curve,
    run_ucb_hybrid,
    subexp_params_single_type,
    subexp_params_two_type,
    ucb_hybrid_step,
)

from conftest import TABLE1_OPT, TABLE1_PI1


def test_tau_examples():
    assert subexp_params_single_type(0.5).tilde_tau == pytest.approx(8 * math.e / math.log(2), abs=1e-12)
    assert subexp_params_single_type(0.5).tilde_tau == pytest.approx(31.374, abs=1e-3)
    assert subexp_params_single_type(1 - 1 / math.e).tilde_tau == pytest.approx(8 * math.e, abs=1e-12)
    assert subexp_params_two_type(0.3) == subexp_params_single_type(0.3)
    assert subexp_params_single_type(0.3).eta == 1.0
    with pytest.raises(ValueError):
        subexp_params_single_type(1.0)


@given(st.floats(0.001, 0.998), st.floats(0.0001, 0.001))
def test_tau_decreasing_in_epsilon(eps, d):
    assert subexp_params_single_type(eps + d).tilde_tau < subexp_params_single_type(eps).tilde_tau


def test_fixed_arm_tau_matches_margin_formula():
    # an arm whose stop probability L(1 - P) equals epsilon has the worst-case parameter
    assert fixed_arm_tau(0.5, 1.0) == pytest.approx(subexp_params_single_type(0.5).tilde_tau)


@pytest.mark.parametrize("K", [1, 2, 5])
def test_fixed_arm_set(K):
    pols = build_fixed_arm_policy_set(K)
    assert len(pols) == len(set(pols)) == K
    assert pols[0] == Policy.fixed(1)


def test_threshold_set_examples():
    assert set(build_threshold_policy_set(0)) == {Policy.fixed(1), Policy.fixed(2)}
    assert len(build_threshold_policy_set(3)) == 8
    pols = build_threshold_policy_set(18)
    assert len(pols) == 38
    assert Policy.threshold(2, 6) in pols


@pytest.mark.parametrize("T, eps, H", [(10_000, 0.5, 15), (2, 0.5, 2), (100_000, 0.5, 18), (10_000, 0.99, 3)])
def test_horizon_for_T(T, eps, H):
    assert horizon_for_T(T, eps) == H
    assert (1 - eps) ** H / eps <= 1 / T


def test_radius_examples():
    params = subexp_params_single_type(0.5)
    T = 10_000
    assert confidence_radius(1, T, params) == pytest.approx(8 * params.tilde_tau * math.log(T), abs=1e-9)
    # 8 * (8e / ln 2) * ln 1e4, evaluated by hand in a separate interpreter
    assert confidence_radius(1, T, params) == pytest.approx(2311.6638145996526, abs=1e-9)
    n = math.ceil(8 * math.log(T))
    assert confidence_radius(n, T, params) == pytest.approx(math.sqrt(8 * params.tilde_tau**2 * math.log(T) / n))
    assert confidence_radius(n - 1, T, params) == pytest.approx(8 * params.tilde_tau * math.log(T) / (n - 1))
    assert confidence_radius(0, T, params) == math.inf


def test_radius_strictly_decreasing():
    params = SubExpParams(31.374, 1.0)
    r = [confidence_radius(n, 10_000, params) for n in range(1, 500)]
    assert all(b < a for a, b in zip(r, r[1:]))


def test_first_pick_and_state_bookkeeping():
    pols = build_threshold_policy_set(3)
    state = LearnerState(pols, 100, SubExpParams(1.0))
    assert ucb_hybrid_step(state, None) == (0, pols[0])
    i, _ = ucb_hybrid_step(state, 2.0)
    assert i == 1
    assert state.counts.sum() == state.t == 1
    assert state.means[0] == 2.0
    assert np.isinf(state.upper[1:]).all()


def test_observe_before_choose_raises():
    state = LearnerState([Policy.fixed(1)], 10, SubExpParams(1.0))
    with pytest.raises(RuntimeError):
        state.observe(1.0)
    with pytest.raises(ValueError):
        LearnerState([Policy.fixed(1)], 1, SubExpParams(1.0))


def test_every_policy_pulled_once_first(table1):
    pols = build_threshold_policy_set(10)
    trace = run_ucb_hybrid(table1, pols, 200, seed=3)
    assert trace.policy_ids[: len(pols)] == list(range(len(pols)))
    assert sum(np.bincount(trace.policy_ids)) == 200


def test_learner_deterministic(table1):
    pols = build_fixed_arm_policy_set(2)
    a = run_ucb_hybrid(table1, pols, 500, seed=9)
    b = run_ucb_hybrid(table1, pols, 500, seed=9)
    assert a.policy_ids == b.policy_ids and (a.returns == b.returns).all()


def test_regret_curve_empty_trace():
    assert regret_curve([], 1.0).size == 0


def test_regret_curve_definition():
    assert regret_curve([1.0, 0.0, 2.0], 1.0).tolist() == [0.0, 1.0, 0.0]


def test_always_pi1_slope(table1):
    curve = pseudo_regret_curve([0] * 1000, [TABLE1_PI1], TABLE1_OPT)
    assert curve[-1] / 1000 == pytest.approx(0.016957, abs=1e-6)
    res = run_stream(table1, FixedLearner(Policy.fixed(1)), 200_000, RngStream(1))
    slope = regret_curve(res, TABLE1_OPT)[-1] / 200_000
    assert slope == pytest.approx(0.016957, abs=0.01)


def test_constant_optimal_learner_has_no_drift(table1):
    finals = []
    for seed in range(20):
        res = run_stream(table1, FixedLearner(Policy.threshold(2, 6)), 5000, RngStream(seed))
        finals.append(regret_curve(res, TABLE1_OPT)[-1])
    finals = np.array(finals)
    assert abs(finals.mean()) <= 3 * finals.std(ddof=1) / math.sqrt(finals.size)


def test_doubling_ratio_of_linear_curve():
    assert doubling_ratio(np.arange(1, 101, dtype=float)) == pytest.approx(2.0)
    assert doubling_ratio(np.sqrt(np.arange(1, 10_001))) == pytest.approx(math.sqrt(2), abs=1e-3)


def test_ucb_prefers_best_arm_single_type():
    inst = validate_instance({"q": [1.0], "P": [[0.3], [0.5], [0.4]], "L": [[1.0], [0.8], [1.0]]})
    learner = UCBHybrid(build_fixed_arm_policy_set(3), 10_000, subexp_params_single_type(inst.epsilon))
    res = run_stream(inst, learner, 10_000, RngStream(0))
    late = np.bincount(res.policy_ids[-1000:], minlength=3)
    assert int(np.argmax(late)) == 1


@pytest.mark.slow
def test_pull_counts_sum_to_T(table1_studies):
    for _, study in table1_studies.values():
        assert (study.pull_counts.sum(axis=1) == 100_000).all()
        assert (study.late_pull_counts.sum(axis=1) == 10_000).all()


@pytest.mark.slow
def test_optimal_policy_pull_share(table1_studies):
    pols, study = table1_studies["threshold"]
    best = pols.index(Policy.threshold(2, 6))
    share = study.late_pull_counts[:, best] / study.late_pull_counts.sum(axis=1)
    print(f"mean late pull share of (2,6): {share.mean():.4f}")
    assert share.mean() > 0.5
