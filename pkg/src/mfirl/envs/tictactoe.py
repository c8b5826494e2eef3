"""Tic-tac-toe from X's point of view with the opponent folded into the dynamics.

States are the non-terminal X-to-move positions reachable under any legal
play, sorted by base-3 code (so the empty board is state 0), plus one
absorbing terminal state at the end. Action ``a`` places X in cell ``a``.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from mfirl.core import TabularMDP
from mfirl.envs import board as ttt
from mfirl.envs.base import Environment

OPPONENTS = ("random", "minimax")

WIN_REWARD, LOSS_REWARD, DRAW_REWARD = 1.0, -1.0, 0.0


def enumerate_x_positions() -> list[tuple[int, ...]]:
    seen = {ttt.EMPTY_BOARD}
    frontier = [ttt.EMPTY_BOARD]
    while frontier:
        nxt = []
        for b in frontier:
            for c in ttt.empty_cells(b):
                b1 = ttt.play(b, c, ttt.X)
                if ttt.is_over(b1):
                    continue
                for r in ttt.empty_cells(b1):
                    b2 = ttt.play(b1, r, ttt.O)
                    if not ttt.is_over(b2) and b2 not in seen:
                        seen.add(b2)
                        nxt.append(b2)
        frontier = nxt
    return sorted(seen, key=ttt.encode)


class TicTacToeEnv(Environment):
    n_actions = 9
    episodic = True
    action_names = tuple(f"cell{i}" for i in range(9))

    def __init__(self, opponent: str = "random", gamma: float = 1.0):
        if opponent not in OPPONENTS:
            raise ValueError(f"unknown opponent {opponent!r}")
        self.opponent = opponent
        self.gamma = gamma
        self.tag = f"tictactoe:{opponent}"
        self.boards = enumerate_x_positions()
        self.index = {b: i for i, b in enumerate(self.boards)}
        self.n_states = len(self.boards) + 1
        self.terminal_state = len(self.boards)

    def with_opponent(self, opponent: str) -> TicTacToeEnv:
        return TicTacToeEnv(opponent, self.gamma)

    @cached_property
    def solution(self):
        from mfirl.evaluation import minimax_solve

        return minimax_solve()

    def board(self, s: int) -> tuple[int, ...]:
        return self.boards[s]

    def afterstate(self, s: int, a: int) -> tuple[int, ...]:
        return ttt.play(self.boards[s], a, ttt.X)

    def opponent_replies(self, after) -> tuple[int, ...]:
        """Cells the opponent may choose from (uniformly) in ``after``."""
        if self.opponent == "random":
            return ttt.empty_cells(after)
        return self.solution.best_moves[after]

    def reset(self, rng):
        return 0

    def _step(self, s, a, rng):
        after = self.afterstate(s, a)
        if ttt.is_over(after):
            return self.terminal_state, True
        replies = self.opponent_replies(after)
        b2 = ttt.play(after, replies[int(rng.integers(len(replies)))], ttt.O)
        if ttt.is_over(b2):
            return self.terminal_state, True
        return self.index[b2], False

    def legal_mask(self):
        mask = np.zeros((self.n_states, self.n_actions), dtype=bool)
        for i, b in enumerate(self.boards):
            mask[i, list(ttt.empty_cells(b))] = True
        return mask

    def _build_model(self) -> TabularMDP:
        S, A, T = self.n_states, self.n_actions, self.terminal_state
        rows, cols, vals = [], [], []
        reward = np.zeros((S, A))
        for s, b in enumerate(self.boards):
            for a in range(A):
                row = s * A + a
                if b[a] != ttt.EMPTY:
                    rows.append(row), cols.append(T), vals.append(1.0)
                    continue
                after = ttt.play(b, a, ttt.X)
                if ttt.winner(after) == ttt.X:
                    reward[s, a] = WIN_REWARD
                    rows.append(row), cols.append(T), vals.append(1.0)
                    continue
                if ttt.is_full(after):
                    reward[s, a] = DRAW_REWARD
                    rows.append(row), cols.append(T), vals.append(1.0)
                    continue
                replies = self.opponent_replies(after)
                q = 1.0 / len(replies)
                probs: dict[int, float] = {}
                for r in replies:
                    b2 = ttt.play(after, r, ttt.O)
                    if ttt.winner(b2) == ttt.O:
                        reward[s, a] += q * LOSS_REWARD
                        nxt = T
                    elif ttt.is_full(b2):
                        nxt = T
                    else:
                        nxt = self.index[b2]
                    probs[nxt] = probs.get(nxt, 0.0) + q
                for nxt, p in probs.items():
                    rows.append(row), cols.append(nxt), vals.append(p)
        for a in range(A):
            rows.append(T * A + a), cols.append(T), vals.append(1.0)
        P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
        mu = np.zeros(S)
        mu[0] = 1.0
        return TabularMDP(S, A, P, reward, mu, self.terminal.copy(), self.legal.copy(), self.gamma)
