"""Plan the two-type worked example and cross-check it with every oracle."""

import argparse

from departing_bandits import TABLE1, Policy
from departing_bandits.dp_planner import dp_value_curve
from departing_bandits.environment import RngStream
from departing_bandits.oracle import brute_force_value, grid_search_threshold, monte_carlo_value
from departing_bandits.planning import optimal_policy_2x2, saddle_point


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mc-episodes", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    res = optimal_policy_2x2(TABLE1)
    sp = saddle_point(TABLE1)
    print(f"structure        {res.structure.variant.value}")
    print(f"saddle point     N~ = {sp.N_tilde:.6f}  (c1={sp.c1:.6f}, c2={sp.c2:.6f}, c3={sp.c3:.6f})")
    for label, v in res.candidates.items():
        print(f"candidate {label:>6}  {v:.12f}")
    print(f"optimal          {res.policy.label}  {res.value:.12f}")
    print(f"gap to pi1       {res.value - res.candidates['pi1']:.9f}")
    print(f"gap to pi2       {res.value - res.candidates['pi2']:.4e}")

    grid_policy, grid_value = grid_search_threshold(TABLE1, 60)
    print(f"grid search      {grid_policy.label}  {grid_value:.12f}")
    for label, policy in [("pi1", Policy.fixed(1)), ("pi2", Policy.fixed(2)), ("opt", res.policy)]:
        bf = brute_force_value(TABLE1, policy, 1)
        mean, se = monte_carlo_value(TABLE1, policy, args.mc_episodes, RngStream(args.seed))
        print(f"{label}: first-step {bf:.3f}, Monte Carlo {mean:.5f} +- {se:.5f}")

    print("dp horizon curve (h, value):")
    for h, v in dp_value_curve(TABLE1, 40)[::5]:
        print(f"  {h:3d}  {v:.12f}")


if __name__ == "__main__":
    main()
