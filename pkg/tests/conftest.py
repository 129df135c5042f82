import numpy as np
import pytest
from hypothesis import strategies as st

from departing_bandits.core import TABLE1, Policy, validate_instance

# Values below were produced by a throwaway script that summed the first
# 5000 terms of the per-type click-survival series directly.
TABLE1_PI1 = 0.6333333333333334
TABLE1_PI2 = 0.6502732240437159
TABLE1_OPT = 0.6502905844074998  # (2,6)-threshold policy


@pytest.fixture
def table1():
    return TABLE1


probs = st.floats(min_value=0.01, max_value=0.95, allow_nan=False)


@st.composite
def instances_2x2(draw, departing=False):
    P = [[draw(probs) for _ in range(2)] for _ in range(2)]
    qx = draw(st.floats(min_value=0.0, max_value=1.0))
    L = None
    if departing:
        L = [[draw(st.floats(min_value=0.05, max_value=1.0)) for _ in range(2)] for _ in range(2)]
    return validate_instance({"M": 2, "K": 2, "q": [qx, 1 - qx], "P": P, "L": L})


@st.composite
def policies(draw, K=2, max_prefix=20):
    prefix = draw(st.lists(st.integers(1, K), max_size=max_prefix))
    return Policy(tuple(prefix), draw(st.integers(1, K)))


def random_policy(rng: np.random.Generator, K: int = 2, max_prefix: int = 20) -> Policy:
    n = int(rng.integers(0, max_prefix + 1))
    return Policy(tuple(int(a) for a in rng.integers(1, K + 1, size=n)), int(rng.integers(1, K + 1)))


LEARN_T = 100_000
LEARN_SEEDS = list(range(20))


@pytest.fixture(scope="session")
def table1_studies():
    """UCB-Hybrid regret studies on the worked example for both policy sets (shared, slow)."""
    from departing_bandits.learning import (
        build_fixed_arm_policy_set,
        build_threshold_policy_set,
        horizon_for_T,
        regret_study,
    )
    from departing_bandits.planning import optimal_policy_2x2, policy_value

    v_star = optimal_policy_2x2(TABLE1).value
    out = {}
    for name, pols in [
        ("fixed", build_fixed_arm_policy_set(2)),
        ("threshold", build_threshold_policy_set(horizon_for_T(LEARN_T, TABLE1.epsilon))),
    ]:
        values = [policy_value(TABLE1, p) for p in pols]
        out[name] = (pols, regret_study(TABLE1, pols, LEARN_T, LEARN_SEEDS, v_star, values))
    return out


def write_two_population_ratings(root, n_a: int = 60, n_b: int = 40):
    """MovieLens-style files with two opposite user populations.

    Population A rates Drama movies 5.0 and Comedy movies 0.5/1.0/1.5 in
    rotation (mean 1.0); population B is the mirror image. One extra movie
    is tagged only "Horror" so it is never selected.
    """
    items = root / "movies.csv"
    ratings = root / "ratings.csv"
    items.write_text(
        "movieId,title,genres\n"
        "1,Drama One,Drama\n2,Drama Two,Drama\n"
        "3,Comedy One,Comedy\n4,Comedy Two,Comedy|Romance\n"
        "5,Scary,Horror\n",
        encoding="utf-8",
    )
    lows = (0.5, 1.0, 1.5)
    rows = ["userId,movieId,rating,timestamp"]
    for u in range(n_a + n_b):
        high, low = ((1, 2), (3, 4)) if u < n_a else ((3, 4), (1, 2))
        lo = lows[u % 3]
        rows += [f"{u + 1},{high[0]},5.0,0", f"{u + 1},{high[1]},5.0,0",
                 f"{u + 1},{low[0]},{lo},0", f"{u + 1},{low[1]},{lo},0", f"{u + 1},5,3.0,0"]
    ratings.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return ratings, items


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_runtest_makereport(item, call):
    number = getattr(item.function, "criterion", None)
    if number is None or call.when != "call":
        return
    ok = call.excinfo is None
    detail = item.function.title
    measured = getattr(item.module, "MEASURED", {}).get(number)
    if measured:
        detail += f" [{measured}]"
    ACCEPTANCE_RESULTS[number] = (ok, detail)
    print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
