"""Square slippery gridworld with two rewarding corner blocks."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from mfirl.core import TabularMDP
from mfirl.envs.base import Environment

WEST, EAST, NORTH, SOUTH, STILL = range(5)
MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1), (0, 0))


class GridworldEnv(Environment):
    """``size`` x ``size`` grid, state id ``y * size + x``.

    With probability ``slip`` the chosen action is replaced by a uniform draw
    over all five actions; moves into a wall leave the agent in place. No
    state is terminal, episodes are cut off after ``episode_length`` steps.
    """

    n_actions = 5
    episodic = False
    action_names = ("west", "east", "north", "south", "still")

    def __init__(self, size: int = 32, corner: int = 8, slip: float = 0.3,
                 reward_inside: float = 1.0, reward_outside: float = -1.0,
                 gamma: float = 0.95, episode_length: int = 8):
        self.size = size
        self.corner = corner
        self.slip = slip
        self.reward_inside = reward_inside
        self.reward_outside = reward_outside
        self.gamma = gamma
        self.episode_length = episode_length
        self.n_states = size * size
        self.tag = f"gridworld{size}"

    def coords(self, s: int) -> tuple[int, int]:
        return s % self.size, s // self.size

    def state(self, x: int, y: int) -> int:
        return y * self.size + x

    def region_mask(self) -> np.ndarray:
        """True on the lower-left and upper-right ``corner`` x ``corner`` blocks."""
        xs = np.arange(self.n_states) % self.size
        ys = np.arange(self.n_states) // self.size
        lo = (xs < self.corner) & (ys < self.corner)
        hi = (xs >= self.size - self.corner) & (ys >= self.size - self.corner)
        return lo | hi

    def state_reward(self) -> np.ndarray:
        return np.where(self.region_mask(), self.reward_inside, self.reward_outside)

    def _move(self, s: int, a: int) -> int:
        x, y = self.coords(s)
        dx, dy = MOVES[a]
        x = min(max(x + dx, 0), self.size - 1)
        y = min(max(y + dy, 0), self.size - 1)
        return self.state(x, y)

    def reset(self, rng):
        return int(rng.integers(self.n_states))

    def _step(self, s, a, rng):
        if rng.random() < self.slip:
            a = int(rng.integers(self.n_actions))
        return self._move(s, a), False

    def legal_mask(self):
        return np.ones((self.n_states, self.n_actions), dtype=bool)

    def _build_model(self) -> TabularMDP:
        S, A = self.n_states, self.n_actions
        rows, cols, vals = [], [], []
        for s in range(S):
            outcomes = [self._move(s, b) for b in range(A)]
            for a in range(A):
                probs: dict[int, float] = {}
                for b, nxt in enumerate(outcomes):
                    p = self.slip / A + (1.0 - self.slip if b == a else 0.0)
                    probs[nxt] = probs.get(nxt, 0.0) + p
                for nxt, p in probs.items():
                    rows.append(s * A + a)
                    cols.append(nxt)
                    vals.append(p)
        P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
        reward = np.repeat(self.state_reward()[:, None], A, axis=1)
        mu = np.full(S, 1.0 / S)
        return TabularMDP(S, A, P, reward, mu, np.zeros(S, dtype=bool), self.legal.copy(), self.gamma)
