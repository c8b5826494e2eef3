"""Exact oracles on a known model: policy evaluation, value iteration,
negamax for tic-tac-toe and the start-weighted value loss.

Nothing here is visible to the estimators; it is used for experts and scoring.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from mfirl.core import ContractError, Policy, TabularMDP
from mfirl.envs import board as ttt


class ValueUndefinedError(ContractError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ValueTable:
    V: np.ndarray
    Q: np.ndarray | None = None
    gamma: float = 1.0
    horizon: int | None = None


@dataclass(frozen=True)
class LossReport:
    loss: float
    gaps: np.ndarray
    mu: np.ndarray

    def to_csv(self, path, v_star: np.ndarray, v_pi: np.ndarray) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "v_star", "v_pi", "gap", "mu"])
            for s in range(len(self.gaps)):
                w.writerow([s, repr(float(v_star[s])), repr(float(v_pi[s])),
                            repr(float(self.gaps[s])), repr(float(self.mu[s]))])


@dataclass(frozen=True)
class OptimalSolution:
    values: ValueTable
    policy: Policy
    optimal_actions: tuple[tuple[int, ...], ...]
    sweeps: int


def _policy_kernel(mdp: TabularMDP, policy: Policy) -> tuple[sp.csr_matrix, np.ndarray]:
    S, A = mdp.n_states, mdp.n_actions
    probs = np.where(mdp.legal, policy.probs, 0.0)
    probs[mdp.terminal] = 0.0
    rows = np.repeat(np.arange(S), A)
    cols = np.arange(S * A)
    weights = sp.csr_matrix((probs.ravel(), (rows, cols)), shape=(S, S * A))
    p_pi = (weights @ mdp.transitions).tocsr()
    r_pi = (probs * np.where(mdp.legal, mdp.reward, 0.0)).sum(axis=1)
    return p_pi, r_pi


def _check_absorbing(p_pi: sp.csr_matrix, terminal: np.ndarray) -> None:
    """At gamma = 1 every non-terminal state must reach a terminal."""
    if not terminal.any():
        raise ValueUndefinedError("value undefined: gamma=1 with no terminal states")
    # reverse reachability from the terminal set
    reverse = p_pi.T.tocsr()
    reverse.data[:] = 1.0
    hub = len(terminal)
    n = hub + 1
    extra = sp.csr_matrix((np.ones(terminal.sum()), (np.full(terminal.sum(), hub), np.flatnonzero(terminal))),
                          shape=(n, n))
    graph = sp.bmat([[reverse, None], [None, sp.csr_matrix((1, 1))]]).tocsr() + extra
    reached = csgraph.breadth_first_order(graph, hub, directed=True, return_predecessors=False)
    ok = np.zeros(n, dtype=bool)
    ok[reached] = True
    if not ok[:hub].all():
        bad = np.flatnonzero(~ok[:hub])
        raise ValueUndefinedError(f"value undefined: {len(bad)} states never reach a terminal (e.g. {bad[0]})")


def policy_evaluation(mdp: TabularMDP, policy: Policy, horizon: int | None = None) -> ValueTable:
    """Exact V^pi by a sparse direct solve on the non-terminal block.

    With ``horizon`` (or ``mdp.horizon``) set, does that many backups from
    V = 0 instead.
    """
    horizon = horizon if horizon is not None else mdp.horizon
    p_pi, r_pi = _policy_kernel(mdp, policy)
    S = mdp.n_states
    if horizon is not None:
        V = np.zeros(S)
        for _ in range(horizon):
            V = r_pi + mdp.gamma * (p_pi @ V)
            V[mdp.terminal] = 0.0
    else:
        if mdp.gamma >= 1.0:
            _check_absorbing(p_pi, mdp.terminal)
        live = np.flatnonzero(~mdp.terminal)
        p_nn = p_pi[live][:, live]
        system = (sp.identity(len(live), format="csc") - mdp.gamma * p_nn).tocsc()
        V = np.zeros(S)
        V[live] = spla.spsolve(system, r_pi[live])
    Q = _q_from_v(mdp, V)
    return ValueTable(V, Q, mdp.gamma, horizon)


def _q_from_v(mdp: TabularMDP, V: np.ndarray) -> np.ndarray:
    Q = mdp.reward + mdp.gamma * (mdp.transitions @ V).reshape(mdp.n_states, mdp.n_actions)
    Q = np.where(mdp.legal, Q, -np.inf)
    Q[mdp.terminal] = 0.0
    return Q


def value_iteration(mdp: TabularMDP, tol: float = 1e-12, max_sweeps: int = 100_000,
                    tie_tol: float = 1e-10) -> OptimalSolution:
    """Bellman optimality iteration to sup-norm residual ``tol``.

    The greedy policy breaks ties (within ``tie_tol``) toward the lowest
    action id; ``optimal_actions`` lists every action within ``tie_tol``.
    """
    S = mdp.n_states
    live = ~mdp.terminal
    V = np.zeros(S)
    sweeps = 0
    if mdp.horizon is not None:
        for sweeps in range(1, mdp.horizon + 1):
            V = np.where(live, _q_from_v(mdp, V).max(axis=1), 0.0)
    else:
        while True:
            sweeps += 1
            V_new = np.where(live, _q_from_v(mdp, V).max(axis=1), 0.0)
            residual = np.max(np.abs(V_new - V))
            V = V_new
            if residual <= tol:
                break
            if sweeps >= max_sweeps:
                raise NonConvergenceError(f"value iteration did not converge in {max_sweeps} sweeps")
    Q = _q_from_v(mdp, V)
    best = Q.max(axis=1)
    near = (Q >= best[:, None] - tie_tol) & mdp.legal
    near[mdp.terminal] = False
    actions = np.where(live, np.argmax(near, axis=1), 0)
    probs = np.zeros((S, mdp.n_actions))
    probs[np.flatnonzero(live), actions[live]] = 1.0
    optimal = tuple(tuple(int(a) for a in np.flatnonzero(row)) for row in near)
    return OptimalSolution(ValueTable(V, Q, mdp.gamma, mdp.horizon), Policy(probs), optimal, sweeps)


def bellman_residual(mdp: TabularMDP, V: np.ndarray) -> float:
    backed = np.where(~mdp.terminal, _q_from_v(mdp, V).max(axis=1), 0.0)
    return float(np.max(np.abs(backed - V)))


def loss(mdp: TabularMDP, policy: Policy, optimal: OptimalSolution | None = None) -> LossReport:
    """Start-distribution weighted gap sum_s mu(s) (V*(s) - V^pi(s))."""
    optimal = optimal if optimal is not None else value_iteration(mdp)
    v_pi = policy_evaluation(mdp, policy).V
    gaps = optimal.values.V - v_pi
    return LossReport(float(mdp.start_dist @ gaps), gaps, mdp.start_dist)


def solve_with_reward(mdp: TabularMDP, reward: np.ndarray) -> Policy:
    """Greedy optimal policy of ``mdp`` with its reward replaced."""
    return value_iteration(mdp.with_reward(reward)).policy


@dataclass(frozen=True)
class MinimaxSolution:
    """Negamax values (for the player to move) and value-achieving moves."""

    values: dict
    best_moves: dict

    def value_for_x(self, board) -> int:
        v = self.values[tuple(board)]
        return v if ttt.to_move(board) == ttt.X else -v


def minimax_solve(root=ttt.EMPTY_BOARD) -> MinimaxSolution:
    """Exhaustive memoized negamax over every position reachable from ``root``."""
    values: dict = {}
    best: dict = {}

    @lru_cache(maxsize=None)
    def negamax(board) -> int:
        if ttt.winner(board) != ttt.EMPTY:
            v = -1  # the previous mover completed a line
            values[board], best[board] = v, ()
            return v
        if ttt.is_full(board):
            values[board], best[board] = 0, ()
            return 0
        mark = ttt.to_move(board)
        scores = {c: -negamax(ttt.play(board, c, mark)) for c in ttt.empty_cells(board)}
        v = max(scores.values())
        values[board] = v
        best[board] = tuple(c for c, sc in scores.items() if sc == v)
        return v

    negamax(tuple(root))
    return MinimaxSolution(values, best)


def export_values(path: str | Path, v_star: np.ndarray, report: LossReport, v_pi: np.ndarray) -> None:
    report.to_csv(path, v_star, v_pi)
