"""Command line front end.

Subcommands:
  run      one experiment from a config file; writes CSV panels + figures
  compare  two configs differing only in the agent field, side by side
  oracle   print the optimal policy per rule pair of the configured task
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .env import (CoreMDP, default_core_mdp, oracle_action_sets, oracle_policy,
                  swapped_reward_rule, swapped_transition_rule)
from .errors import ConfigError
from .runner import (compare_agents, emit_comparison, emit_plot_data,
                     run_experiment)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romdp",
        description="Goal-oriented state clustering experiments on redundantly "
                    "observable MDPs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed-list", default=None,
                       help="comma separated seeds overriding the config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--no-figures", action="store_true",
                       help="emit CSV panels only")
    p_run.add_argument("--progress", action="store_true")

    p_cmp = sub.add_parser("compare", help="run two configs side by side")
    p_cmp.add_argument("--config-a", required=True)
    p_cmp.add_argument("--config-b", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--no-figures", action="store_true")
    p_cmp.add_argument("--progress", action="store_true")

    p_orc = sub.add_parser("oracle", help="print optimal policies per rule pair")
    p_orc.add_argument("--config", required=True)
    return parser


def _parse_seed_list(text: str):
    try:
        seeds = tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ConfigError("seed-list", f"cannot parse {text!r}") from None
    if not seeds:
        raise ConfigError("seed-list", "no seeds given")
    return seeds


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed_list:
        config = config.with_(seeds=_parse_seed_list(args.seed_list))
    if args.out:
        config = config.with_(out=args.out)
    summary = run_experiment(config, progress=args.progress)
    written = emit_plot_data(summary, config.out, figures=not args.no_figures)
    for p in written:
        print(p)
    return 0


def cmd_compare(args) -> int:
    config_a = load_config(args.config_a)
    config_b = load_config(args.config_b)
    summary_a, summary_b = compare_agents(config_a, config_b, progress=args.progress)
    written = emit_comparison(summary_a, summary_b, args.out,
                              figures=not args.no_figures)
    for p in written:
        print(p)
    return 0


def _rule_pairs(config: ExperimentConfig):
    base = default_core_mdp()
    pairs = [("M1/N1", base)]
    if config.schedule == "reward_switch":
        pairs.append(("M1/N2", CoreMDP(base.transition,
                                       swapped_reward_rule(base.reward_prob))))
    elif config.schedule == "transition_switch":
        pairs.append(("M2/N1", CoreMDP(swapped_transition_rule(base.transition),
                                       base.reward_prob)))
    return pairs


def cmd_oracle(args) -> int:
    config = load_config(args.config)
    for name, mdp in _rule_pairs(config):
        policy = oracle_policy(mdp, config.gamma)
        sets = oracle_action_sets(mdp, config.gamma)
        cells = ", ".join(
            f"c{c}:a{policy[c]}" + ("" if len(sets[c]) == 1 else " (tie)")
            for c in range(4))
        print(f"{name}: {cells}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_oracle(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - surfaced to the shell
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
