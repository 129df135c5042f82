"""Fixed-arm learner vs threshold-policy learner on an instance; writes CSVs."""

import argparse
import csv
from pathlib import Path

from departing_bandits import load_instance
from departing_bandits.learning import (
    build_fixed_arm_policy_set,
    build_threshold_policy_set,
    horizon_for_T,
    regret_study,
)
from departing_bandits.planning import optimal_policy_2x2, policy_value


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instance", default=str(Path(__file__).parents[1] / "data" / "table1.json"))
    ap.add_argument("--T", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--every", type=int, default=1000)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    inst = load_instance(args.instance)
    v_star = optimal_policy_2x2(inst).value
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sets = {
        "fixed": build_fixed_arm_policy_set(2),
        "threshold": build_threshold_policy_set(horizon_for_T(args.T, inst.epsilon)),
    }
    for name, pols in sets.items():
        values = [policy_value(inst, p) for p in pols]
        study = regret_study(inst, pols, args.T, range(args.seeds), v_star, values, workers=args.workers)
        mean, se = study.expected_summary()
        real, real_se = study.realized_summary()
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "expected_regret_mean", "expected_regret_stderr",
                        "realized_regret_mean", "realized_regret_stderr"])
            for t in range(args.every, args.T + 1, args.every):
                w.writerow([t, repr(mean[t - 1]), repr(se[t - 1]), repr(real[t - 1]), repr(real_se[t - 1])])
        best = max(range(len(pols)), key=values.__getitem__)
        share = study.late_pull_counts[:, best].sum() / study.late_pull_counts.sum()
        print(f"{name:>9}: |policies| = {len(pols)}, regret(T) = {mean[-1]:.2f} +- {se[-1]:.2f}, "
              f"doubling ratio {study.mean_doubling_ratio():.3f}, "
              f"late share of best policy {share:.3f}")


if __name__ == "__main__":
    main()
