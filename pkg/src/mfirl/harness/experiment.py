"""Demonstration generation and the episode-count sweep."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mfirl import estimators, evaluation
from mfirl.core import DemonstrationSet, FeatureMap, Policy, Trajectory
from mfirl.envs import Environment, TicTacToeEnv, make_env
from mfirl.features import build_feature_map
from mfirl.harness.config import ExperimentConfig

log = logging.getLogger(__name__)

# LSTDQ discount per env when lstdq.gamma is unset; anything else uses the
# environment's own discount. Tic-tac-toe value chosen on held-out seeds.
LSTDQ_GAMMA_DEFAULTS = {"tictactoe:random": 0.0, "tictactoe:minimax": 0.0}

RESULT_COLUMNS = ("run", "env", "model", "episodes", "loss", "fit_ms", "eval_mode", "seed", "status")
SUMMARY_COLUMNS = ("env", "model", "episodes", "runs", "mean_loss", "stderr_loss", "mean_fit_ms", "failures")


def expert_policy(env: Environment) -> Policy:
    """Optimal policy of the true model; for tic-tac-toe, uniform over
    the minimax-optimal moves of every position."""
    if isinstance(env, TicTacToeEnv):
        probs = np.zeros((env.n_states, env.n_actions))
        for s, b in enumerate(env.boards):
            best = env.solution.best_moves[b]
            probs[s, list(best)] = 1.0 / len(best)
        return Policy(probs)
    return evaluation.value_iteration(env.exact_model()).policy


class _Sampler:
    """Fast action sampling from a tabular policy."""

    def __init__(self, policy: Policy):
        self.cdf = np.cumsum(policy.probs, axis=1)
        self.support = [np.flatnonzero(row > 0) for row in policy.probs]

    def __call__(self, s: int, rng: np.random.Generator) -> int:
        support = self.support[s]
        if len(support) == 1:
            return int(support[0])
        return int(min(np.searchsorted(self.cdf[s], rng.random() * self.cdf[s, -1], side="right"),
                       support[-1]))


def generate_demos(env: Environment, expert: Policy, n_episodes: int, rng: np.random.Generator,
                   max_steps: int | None = None) -> DemonstrationSet:
    """Roll the expert out for ``n_episodes`` episodes.

    Episodes stop at a terminal state or after ``max_steps`` steps
    (defaults to the gridworld episode length where defined).
    """
    if max_steps is None:
        max_steps = getattr(env, "episode_length", None)
    act = _Sampler(expert)
    trajectories = []
    for _ in range(n_episodes):
        s = env.reset(rng)
        states, actions = [], []
        done = False
        while not done:
            a = act(s, rng)
            states.append(s)
            actions.append(a)
            s, done = env.step(s, a, rng)
            if max_steps is not None and len(states) >= max_steps:
                break
        trajectories.append(Trajectory(tuple(states), tuple(actions), done))
    return DemonstrationSet(tuple(trajectories), env.tag)


@dataclass(frozen=True)
class ResultRow:
    run: int
    env: str
    model: str
    episodes: int
    loss: float | None
    fit_ms: float
    eval_mode: str
    seed: int
    status: str = "ok"

    def as_csv(self) -> list[str]:
        loss = "" if self.loss is None else repr(self.loss)
        return [str(self.run), self.env, self.model, str(self.episodes), loss,
                f"{self.fit_ms:.3f}", self.eval_mode, str(self.seed), self.status]


def run_seed(master: int, run: int, n_episodes: int) -> int:
    """Counter-based per-(run, episode-count) seed, independent of the other
    entries of the sweep."""
    return int(np.random.SeedSequence([master, run, n_episodes]).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass
class Workbench:
    """Everything fixed across a sweep: environments, features, experts and
    the exact evaluation model with its optimal solution."""

    cfg: ExperimentConfig
    demo_env: Environment
    eval_env: Environment
    features: FeatureMap
    expert: Policy
    eval_mdp: object
    optimal: evaluation.OptimalSolution

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> Workbench:
        eval_env = make_env(cfg.env, **cfg.env_overrides())
        demo_env = eval_env
        if isinstance(eval_env, TicTacToeEnv) and eval_env.opponent != cfg.demo_opponent:
            demo_env = eval_env.with_opponent(cfg.demo_opponent)
        features = build_feature_map(eval_env, cfg.scaling, cfg.blackjack_features)
        mdp = eval_env.exact_model()
        return cls(cfg, demo_env, eval_env, features, expert_policy(demo_env), mdp,
                   evaluation.value_iteration(mdp))

    @property
    def lstdq_gamma(self) -> float:
        if self.cfg.gamma is not None:
            return self.cfg.gamma
        return LSTDQ_GAMMA_DEFAULTS.get(self.cfg.env, self.eval_mdp.gamma)

    def policy_loss(self, policy: Policy) -> float:
        value = evaluation.loss(self.eval_mdp, policy, self.optimal).loss
        return 0.0 if -1e-9 < value < 0.0 else value

    def fit(self, model: str, demos: DemonstrationSet):
        cfg = self.cfg
        if model == "po":
            return estimators.fit_po(demos, self.features, cfg.beta, cfg.tol_grad, cfg.max_iter)
        return estimators.fit_rp(demos, self.features, self.lstdq_gamma, cfg.ridge, cfg.include_terminal,
                                 cfg.beta, cfg.tol_grad, cfg.max_iter)

    def evaluate(self, model: str, params) -> tuple[float, str]:
        if model == "rp-resolve":
            reward = estimators.learned_reward(params, self.features)
            return self.policy_loss(evaluation.solve_with_reward(self.eval_mdp, reward)), "resolve"
        policy = estimators.extract_policy(params, self.features, self.cfg.eval_mode)
        return self.policy_loss(policy), self.cfg.eval_mode


def run_point(bench: Workbench, run: int, n_episodes: int, models) -> list[ResultRow]:
    cfg = bench.cfg
    seed = run_seed(cfg.seed, run, n_episodes)
    rows = []
    demos = None
    for model in models:
        if model == "random-baseline":
            loss = bench.policy_loss(Policy.uniform(bench.eval_env.legal))
            rows.append(ResultRow(run, cfg.env, model, n_episodes, loss, 0.0, "uniform", seed))
            continue
        try:
            if demos is None:
                rng = np.random.default_rng(seed)
                demos = generate_demos(bench.demo_env, bench.expert, n_episodes, rng)
            start = time.perf_counter()
            params, report = bench.fit(model, demos)
            fit_ms = (time.perf_counter() - start) * 1e3 if cfg.record_timing else 0.0
            loss, mode = bench.evaluate(model, params)
            status = "ok" if report.warning is None else "ok;" + report.warning.replace(",", ";")
            rows.append(ResultRow(run, cfg.env, model, n_episodes, loss, fit_ms, mode, seed, status))
        except Exception as exc:  # recorded per row; the sweep continues
            log.warning("run %d, %d episodes, %s failed: %s", run, n_episodes, model, exc)
            msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
            rows.append(ResultRow(run, cfg.env, model, n_episodes, None, 0.0, "", seed, msg))
    return rows


def summarize(rows: list[ResultRow]) -> list[dict]:
    out = []
    keys = sorted({(r.model, r.episodes) for r in rows})
    for model, n in keys:
        group = [r for r in rows if r.model == model and r.episodes == n]
        losses = np.array([r.loss for r in group if r.loss is not None], dtype=float)
        k = len(losses)
        mean = float(losses.mean()) if k else math.nan
        se = float(losses.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        out.append({"env": group[0].env, "model": model, "episodes": n, "runs": k,
                    "mean_loss": mean, "stderr_loss": se,
                    "mean_fit_ms": float(np.mean([r.fit_ms for r in group])),
                    "failures": len(group) - k})
    return out


def env_dirname(tag: str) -> str:
    return tag.replace(":", "-")


def write_outputs(cfg: ExperimentConfig, rows: list[ResultRow], out_dir: str | Path) -> list[Path]:
    """Write ``<out>/<env>/<model>/{results,summary}.csv`` and ``config.echo``."""
    written = []
    for model in cfg.models:
        target = Path(out_dir) / env_dirname(cfg.env) / model
        target.mkdir(parents=True, exist_ok=True)
        mine = sorted((r for r in rows if r.model == model), key=lambda r: (r.episodes, r.run))
        with open(target / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_COLUMNS)
            w.writerows(r.as_csv() for r in mine)
        with open(target / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for rec in summarize(mine):
                w.writerow([rec["env"], rec["model"], rec["episodes"], rec["runs"], repr(rec["mean_loss"]),
                            repr(rec["stderr_loss"]), f"{rec['mean_fit_ms']:.3f}", rec["failures"]])
        (target / "config.echo").write_text(cfg.echo())
        written.append(target)
    return written


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None, progress=None) -> list[ResultRow]:
    """Run every (episode count, run) point for every configured model.

    Rows come back sorted by (model, episodes, run); with ``out_dir`` the CSV
    files are written too.
    """
    bench = Workbench.build(cfg)
    rows: list[ResultRow] = []
    for n in cfg.episodes:
        for run in range(cfg.n_runs):
            rows.extend(run_point(bench, run, n, cfg.models))
            if progress is not None:
                progress(n, run)
    rows.sort(key=lambda r: (r.model, r.episodes, r.run))
    if out_dir is not None:
        write_outputs(cfg, rows, out_dir)
    return rows

