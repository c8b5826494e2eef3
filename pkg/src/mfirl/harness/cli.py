"""Command line entry point: ``mfirl <subcommand> [flags]``.

Exit status is 0 on success, 1 for usage/config errors and 2 for runtime
errors (for example fitting an empty demonstration file).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from mfirl import estimators, evaluation, lstdq
from mfirl.core import ContractError, load_demos, save_demos
from mfirl.envs import ENV_TAGS, TicTacToeEnv
from mfirl.envs import board as ttt
from mfirl.harness.config import MODELS, ConfigError, ExperimentConfig
from mfirl.harness.experiment import Workbench, generate_demos, run_sweep, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", help=f"one of {', '.join(ENV_TAGS)}")
    p.add_argument("--model", help=f"comma separated, from {', '.join(MODELS)}")
    p.add_argument("--episodes", help="episode count, or comma separated list for sweep")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfirl", description="Model-free MAP inverse reinforcement learning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-demos", help="sample expert demonstrations to a file")
    _add_common(p)

    p = sub.add_parser("fit", help="fit rp or po parameters from a demonstration file")
    _add_common(p)
    p.add_argument("--demos", required=True)

    p = sub.add_parser("eval", help="exact loss of fitted parameters")
    _add_common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--demos", help="demonstrations used for the fit (rp needs them to rebuild C)")
    p.add_argument("--mode", choices=("greedy", "softmax", "resolve"), default="greedy")

    p = sub.add_parser("sweep", help="episode-count sweep with repeated runs")
    _add_common(p)
    p.add_argument("--timing", action="store_true", help="record fit wall-clock in fit_ms")
    p.add_argument("--plot", action="store_true", help="render loss figures next to the CSVs")

    p = sub.add_parser("solve-env", help="print the optimal start value of an environment")
    _add_common(p)

    p = sub.add_parser("report", help="render figures from existing sweep output")
    p.add_argument("--out", required=True, help="sweep output directory")
    return parser


def _config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    values = {}
    if args.env:
        values["env"] = args.env
    if args.model:
        values["model"] = args.model
    if args.episodes:
        values["episodes"] = args.episodes
    if args.runs is not None:
        values["runs"] = str(args.runs)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if getattr(args, "timing", False):
        values["record_timing"] = "true"
    return ExperimentConfig.from_mapping(values, base)


def _single_model(cfg: ExperimentConfig) -> str:
    if len(cfg.models) != 1 or cfg.models[0] not in ("rp", "po"):
        raise ConfigError("fit/eval need exactly one of --model rp or --model po")
    return cfg.models[0]


def cmd_gen_demos(args, cfg: ExperimentConfig) -> int:
    if len(cfg.episodes) != 1:
        raise ConfigError("gen-demos takes a single --episodes value")
    if not args.out:
        raise ConfigError("gen-demos needs --out FILE")
    bench = Workbench.build(cfg)
    demos = generate_demos(bench.demo_env, bench.expert, cfg.episodes[0], np.random.default_rng(cfg.seed))
    save_demos(demos, args.out)
    print(f"wrote {len(demos)} episodes ({demos.n_steps} steps) to {args.out}")
    return EXIT_OK


def _load(args, bench: Workbench):
    demos = load_demos(args.demos, terminated=bench.demo_env.episodic)
    demos.require_nonempty()
    demos.validate(bench.features.legal)
    return demos


def cmd_fit(args, cfg: ExperimentConfig) -> int:
    model = _single_model(cfg)
    bench = Workbench.build(cfg)
    demos = _load(args, bench)
    params, report = bench.fit(model, demos)
    if args.out:
        estimators.save_params(params, args.out)
    print(f"model={model} objective={report.objective:.10g} grad_norm={report.grad_norm:.3g} "
          f"iterations={report.iterations} seconds={report.wall_time:.3f} converged={report.converged}")
    if report.warning:
        print(f"warning: {report.warning}")
    return EXIT_OK


def cmd_eval(args, cfg: ExperimentConfig) -> int:
    bench = Workbench.build(cfg)
    model, beta, weights = estimators.parse_params(Path(args.params).read_text())
    if model == "rp":
        if not args.demos:
            raise ConfigError("rp parameters need --demos to rebuild the LSTDQ map")
        demos = _load(args, bench)
        system = lstdq.solve(lstdq.accumulate(demos, bench.features, bench.lstdq_gamma, cfg.include_terminal),
                             cfg.ridge)
        params = estimators.RpParams(weights, system, beta)
    else:
        params = estimators.PoParams(weights, beta)
    if args.mode == "resolve":
        policy = evaluation.solve_with_reward(bench.eval_mdp, estimators.learned_reward(params, bench.features))
    else:
        policy = estimators.extract_policy(params, bench.features, args.mode)
    report = evaluation.loss(bench.eval_mdp, policy, bench.optimal)
    v_pi = bench.optimal.values.V - report.gaps
    print(f"loss={report.loss:.10g} start_value={bench.eval_mdp.start_dist @ v_pi:.10g}")
    if args.out:
        report.to_csv(args.out, bench.optimal.values.V, v_pi)
    return EXIT_OK


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    out = args.out or "out"
    rows = run_sweep(cfg, out)
    bad = sum(1 for r in rows if r.status.startswith("error"))
    print(f"{len(rows)} rows written under {out}; {bad} failed")
    if args.plot:
        from mfirl.report import render_env

        for path in render_env(out, cfg.env):
            print(f"figure: {path}")
    return EXIT_OK


def cmd_solve_env(args, cfg: ExperimentConfig) -> int:
    bench = Workbench.build(cfg)
    mdp = bench.eval_mdp
    value = float(mdp.start_dist @ bench.optimal.values.V)
    print(f"env={cfg.env} states={mdp.n_states} start_value={value:.10g}")
    if isinstance(bench.eval_env, TicTacToeEnv):
        print(f"minimax_value={evaluation.minimax_solve().value_for_x(ttt.EMPTY_BOARD)}")
    return EXIT_OK


def cmd_report(args) -> int:
    from mfirl.report import render_all

    paths = render_all(args.out)
    if not paths:
        print(f"no summary.csv files under {args.out}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(f"figure: {path}")
    return EXIT_OK


COMMANDS = {"gen-demos": cmd_gen_demos, "fit": cmd_fit, "eval": cmd_eval,
            "sweep": cmd_sweep, "solve-env": cmd_solve_env}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
