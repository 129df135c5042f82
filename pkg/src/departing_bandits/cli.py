"""Command-line entry point: ``departing-bandits <command> ...``.

Commands: plan, learn, simulate, oracle, gen, experiment. Options may also
come from a JSON file given with ``--config`` (keys are option names with
dashes replaced by underscores); explicit flags win over the file.
Relative output paths are resolved against ``$DEPARTING_BANDITS_OUTDIR``
when it is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import EpisodeResult, InstanceError, Policy, load_instance, save_instance
from .dp_planner import dp_plan
from .environment import RngStream, StreamResult, run_episodes, write_results_csv
from .instances import build_semi_synthetic, load_ratings, random_instance
from .learning import (
    SubExpParams,
    build_fixed_arm_policy_set,
    build_threshold_policy_set,
    horizon_for_T,
    regret_study,
    subexp_params_two_type,
)
from .oracle import brute_force_value, grid_search_threshold, monte_carlo_value
from .planning import (
    expected_return_truncated,
    optimal_policy_2x2,
    policy_value,
    single_type_optimal_arm,
)

OUTDIR_ENV = "DEPARTING_BANDITS_OUTDIR"


def _out_path(name: str) -> Path:
    p = Path(name)
    if not p.is_absolute() and os.environ.get(OUTDIR_ENV):
        p = Path(os.environ[OUTDIR_ENV]) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(x: float) -> str:
    return repr(float(x))


def _v_star(instance) -> float:
    if instance.num_types == 1:
        return single_type_optimal_arm(instance)[1]
    return optimal_policy_2x2(instance).value


# -- plan ------------------------------------------------------------------

def cmd_plan(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    rows: list[tuple[str, str, float]] = []
    if args.dp:
        plan = dp_plan(inst, args.horizon)
        seq = ",".join(str(a) for a in plan.actions)
        print(f"dp horizon {args.horizon}: value {plan.value:.6f}")
        print(f"actions: {seq}")
        rows.append(("dp", seq, plan.value))
    elif inst.num_types == 1:
        arm, value = single_type_optimal_arm(inst)
        print(f"single type: best arm {arm}, value {value:.6f}")
        rows.append(("optimal", Policy.fixed(arm).label, value))
    else:
        res = optimal_policy_2x2(inst)
        print(f"structure: {res.structure.variant.value}")
        for label, v in res.candidates.items():
            print(f"  candidate {label}: {v:.6f}")
            rows.append(("candidate", label, v))
        print(f"optimal policy: {res.policy.label}  value {res.value:.6f}")
        rows.append(("optimal", res.policy.label, res.value))
    if args.csv:
        with open(_out_path(args.csv), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "policy", "value"])
            for kind, label, v in rows:
                w.writerow([kind, label, _fmt(v)])
    else:
        print("kind,policy,value")
        for kind, label, v in rows:
            print(f'{kind},"{label}",{_fmt(v)}')
    return 0


# -- learn / experiment -------------------------------------------------------

def _params(args, epsilon: float) -> SubExpParams:
    base = subexp_params_two_type(args.epsilon_override or epsilon)
    return SubExpParams(base.tilde_tau, args.eta if args.eta is not None else base.eta)


def _policy_set(kind: str, inst, H: int) -> list[Policy]:
    if kind == "fixed":
        return build_fixed_arm_policy_set(inst.num_categories)
    if inst.num_categories != 2:
        raise InstanceError("threshold policy set needs K = 2")
    return build_threshold_policy_set(H)


def _write_curve(path: Path, mean: np.ndarray, se: np.ndarray, every: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cum_regret_mean", "cum_regret_stderr"])
        T = len(mean)
        for t in sorted(set(range(every, T + 1, every)) | {T}):
            w.writerow([t, _fmt(mean[t - 1]), _fmt(se[t - 1])])


def _write_per_seed(path: Path, study, every: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "t", "cum_regret", "cum_expected_regret"])
        T = study.realized.shape[1]
        ts = sorted(set(range(every, T + 1, every)) | {T})
        for s, real, exp in zip(study.seeds, study.realized, study.expected):
            for t in ts:
                w.writerow([s, t, _fmt(real[t - 1]), _fmt(exp[t - 1])])


def _study(args, inst, kind: str):
    eps = args.epsilon_override or inst.epsilon
    H = args.horizon if args.horizon is not None else horizon_for_T(args.T, eps)
    policies = _policy_set(kind, inst, H)
    values = [policy_value(inst, p) for p in policies]
    seeds = list(range(args.seed, args.seed + args.seeds))
    return regret_study(inst, policies, args.T, seeds, _v_star(inst), values,
                        _params(args, inst.epsilon), workers=args.workers)


def cmd_learn(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    study = _study(args, inst, args.policy_set)
    mean, se = study.realized_summary()
    _write_curve(_out_path(args.out), mean, se, args.every)
    emean, ese = study.expected_summary()
    _write_curve(_out_path(_suffixed(args.out, "_expected")), emean, ese, args.every)
    _write_per_seed(_out_path(_suffixed(args.out, "_per_seed")), study, args.every)
    print(f"final regret {mean[-1]:.3f} +- {se[-1]:.3f} over {len(study.seeds)} seeds")
    return 0


def _suffixed(name: str, suffix: str) -> str:
    p = Path(name)
    return str(p.with_name(p.stem + suffix + p.suffix))


def cmd_experiment(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    out = Path(args.out_dir)
    summary = []
    for kind in ("fixed", "threshold"):
        study = _study(args, inst, kind)
        mean, se = study.realized_summary()
        _write_curve(_out_path(str(out / f"{kind}_regret.csv")), mean, se, args.every)
        emean, ese = study.expected_summary()
        _write_curve(_out_path(str(out / f"{kind}_expected_regret.csv")), emean, ese, args.every)
        T = args.T
        for s, real, exp in zip(study.seeds, study.realized, study.expected):
            summary.append([kind, s, real[-1], real[T // 2 - 1], real[-1] / real[T // 2 - 1],
                            exp[-1], exp[-1] / exp[T // 2 - 1]])
        r, e = study.realized.mean(0), study.expected.mean(0)
        summary.append([kind, "mean", r[-1], r[T // 2 - 1], r[-1] / r[T // 2 - 1],
                        e[-1], e[-1] / e[T // 2 - 1]])
        print(f"{kind}: mean regret {r[-1]:.2f}, doubling ratio {r[-1] / r[T // 2 - 1]:.3f} "
              f"(expected-regret ratio {e[-1] / e[T // 2 - 1]:.3f})")
    with open(_out_path(str(out / "summary.csv")), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["learner", "seed", "regret_T", "regret_half_T", "doubling_ratio",
                    "expected_regret_T", "expected_doubling_ratio"])
        for row in summary:
            w.writerow([row[0], row[1], *(_fmt(v) for v in row[2:])])
    return 0


# -- simulate / oracle ----------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    policy = Policy.parse(args.policy)
    clicks, lengths = run_episodes(inst, policy, RngStream(args.seed), args.episodes)
    if args.out:
        trace = StreamResult([0] * len(clicks), [policy.label] * len(clicks),
                             [EpisodeResult(int(c), int(n)) for c, n in zip(clicks, lengths)])
        write_results_csv(trace, _out_path(args.out))
    se = clicks.std(ddof=1) / math.sqrt(len(clicks)) if len(clicks) > 1 else math.inf
    print("policy,episodes,mean_return,stderr,mean_length")
    print(f'"{policy.label}",{len(clicks)},{_fmt(clicks.mean())},{_fmt(se)},{_fmt(lengths.mean())}')
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    rows = []
    if args.policy:
        policy = Policy.parse(args.policy)
    elif inst.num_types == 2 and inst.num_categories == 2 and inst.always_departs:
        policy, v = grid_search_threshold(inst, args.horizon)
        rows.append(("grid_search", policy.label, v, ""))
    else:
        policy = Policy.fixed(single_type_optimal_arm(inst)[0]) if inst.num_types == 1 else Policy.fixed(1)
    rows.append(("exact", policy.label, policy_value(inst, policy), ""))
    if inst.always_departs:
        rows.append(("brute_force", policy.label, brute_force_value(inst, policy, args.horizon),
                     f"H={args.horizon}"))
        if inst.num_types == 2 and inst.num_categories == 2:
            v, tb = expected_return_truncated(inst, policy, H=args.horizon)
            rows.append(("closed_form_truncated", policy.label, v, f"tail_bound={tb!r}"))
    if args.mc_episodes:
        m, se = monte_carlo_value(inst, policy, args.mc_episodes, RngStream(args.seed))
        rows.append(("monte_carlo", policy.label, m, f"stderr={se!r}"))
    print("method,policy,value,note")
    for method, label, v, note in rows:
        print(f'{method},"{label}",{_fmt(v)},{note}')
    return 0


# -- gen -------------------------------------------------------------------------

def cmd_gen(args: argparse.Namespace) -> int:
    if args.from_ratings:
        cats = [c.strip() for c in args.categories.split(",")]
        table = load_ratings(args.ratings, args.items, cats)
        inst = build_semi_synthetic(table, cats, args.M, np.random.default_rng(args.seed),
                                    epsilon=args.epsilon)
    else:
        inst = random_instance(args.K, args.M, args.epsilon, np.random.default_rng(args.seed),
                               target_structure=args.structure, departing=args.departing)
    if args.out:
        save_instance(inst, _out_path(args.out))
    else:
        json.dump(inst.to_dict(), sys.stdout, indent=2)
        print()
    return 0


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="departing-bandits", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="JSON file of default option values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="optimal policy for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--dp", action="store_true", help="finite-horizon dynamic program")
    p.add_argument("--horizon", type=int, default=60)
    p.add_argument("--csv", help="write the value table here instead of stdout")
    p.set_defaults(func=cmd_plan)

    def learner_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--instance", required=True)
        p.add_argument("--T", type=int, default=10_000)
        p.add_argument("--seeds", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="first seed")
        p.add_argument("--horizon", type=int, help="threshold set size (default from T)")
        p.add_argument("--epsilon-override", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--every", type=int, default=1, help="CSV row stride")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("learn", help="UCB-Hybrid regret run")
    learner_flags(p)
    p.add_argument("--policy-set", choices=["fixed", "threshold"], default="threshold")
    p.add_argument("--out", default="regret.csv")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("experiment", help="fixed-arm vs threshold learner regret study")
    learner_flags(p)
    p.add_argument("--out-dir", default="experiment")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("simulate", help="roll out a fixed policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True, help="pi1, (2,6) or 222|1")
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="results CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="independent value computations")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy")
    p.add_argument("--dp", action="store_true", help="accepted for parity with plan")
    p.add_argument("--horizon", type=int, default=60)
    p.add_argument("--mc-episodes", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="write an instance file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--random", action="store_true")
    src.add_argument("--from-ratings", action="store_true")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--structure", choices=["dr", "dc", "dd"])
    p.add_argument("--departing", action="store_true", help="random L instead of all ones")
    p.add_argument("--ratings")
    p.add_argument("--items")
    p.add_argument("--categories", default="Drama,Comedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config, encoding="utf-8") as fh:
            conf = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
        for sub in parser._subparsers._group_actions[0].choices.values():
            sub.set_defaults(**conf)
            for action in sub._actions:
                if action.dest in conf:
                    action.required = False
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print(f"error: usage: {' '.join(argv)}", file=sys.stderr)
        return int(exc.code or 0)
    except (InstanceError, ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
