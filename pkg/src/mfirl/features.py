"""Reward and value feature constructions for the three benchmark domains.

``build_feature_map`` tabulates g_R over every state and g_Q over every legal
state-action pair, then applies a min-max scaler fitted on the whole space.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mfirl.core import ContractError, FeatureMap
from mfirl.envs import BlackjackEnv, Environment, GridworldEnv, TicTacToeEnv
from mfirl.envs import blackjack as bj
from mfirl.envs import board as ttt

SCALINGS = {"unit_interval": (0.0, 1.0), "symmetric": (-1.0, 1.0), "none": None}


@dataclass(frozen=True)
class FeatureSpec:
    domain: str
    basis: tuple[str, ...]
    action_replication: bool
    afterstate: bool
    scaling: str = "unit_interval"


def degree2_monomials(values: np.ndarray) -> np.ndarray:
    """All monomials of total degree 1 and 2 (no constant), in a fixed order:
    linear terms, squares, then cross products i < j."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    cross = [values[i] * values[j] for i, j in itertools.combinations(range(n), 2)]
    return np.concatenate([values, values**2, np.array(cross, dtype=float)])


def degree2_names(names: list[str]) -> list[str]:
    sq = [f"{n}^2" for n in names]
    cross = [f"{a}*{b}" for a, b in itertools.combinations(names, 2)]
    return list(names) + sq + cross


# ---------------------------------------------------------------- blackjack

BLACKJACK_BASIS_10 = ("bias", "p", "d", "u", "p^2", "d^2", "u^2", "p*d", "p*u", "d*u")
BLACKJACK_EXTENSION = ("p*d*u", "p^3", "d^3", "natural_reachable")


def blackjack_reward_features(s: int, n_features: int = 10) -> np.ndarray:
    """Bias plus degree-2 polynomial in normalized (player sum, dealer card, ace).

    ``n_features=14`` appends p*d*u, p^3, d^3 and a soft-21 indicator.
    """
    if n_features not in (10, 14):
        raise ValueError("blackjack feature count must be 10 or 14")
    if s == bj.TERMINAL:
        return np.zeros(n_features)
    player, dealer, usable = bj.decode_state(s)
    p = (player - 12) / 9
    d = (dealer - 1) / 9
    u = float(usable)
    out = [1.0, p, d, u, p * p, d * d, u * u, p * d, p * u, d * u]
    if n_features == 14:
        out += [p * d * u, p**3, d**3, float(player == 21 and usable)]
    return np.array(out)


# ---------------------------------------------------------------- gridworld

def gridworld_reward_features(s: int, size: int = 32) -> np.ndarray:
    """x, y scaled to [0, 1], then [x < k] and [y < k] for k = 1..size-1."""
    x, y = s % size, s // size
    ks = np.arange(1, size)
    return np.concatenate([[x / (size - 1), y / (size - 1)], (x < ks).astype(float), (y < ks).astype(float)])


# ---------------------------------------------------------------- tic-tac-toe

TTT_BASE_NAMES = [f"{kind}_{who}" for who in ("x", "o")
                  for kind in ("singlets", "doublets", "triplets", "diversity", "crosspoints")]


def tictactoe_base_features(board) -> np.ndarray:
    """Singlets, doublets, triplets, diversity, crosspoints for X then O.

    A singlet/doublet/triplet is a line holding exactly 1/2/3 of the player's
    marks and none of the opponent's. Diversity counts the distinct
    directions (row, column, diagonal) among the player's singlets.
    A crosspoint is an empty cell on two or more of the player's singlets.
    """
    out = []
    for mark in (ttt.X, ttt.O):
        counts = [0, 0, 0, 0]
        directions = set()
        singlet_cells: dict[int, int] = {}
        for line, direction in zip(ttt.LINES, ttt.LINE_DIRECTIONS):
            vals = [board[i] for i in line]
            if -mark in vals:
                continue
            n = vals.count(mark)
            counts[n] += 1
            if n == 1:
                directions.add(direction)
                for i in line:
                    if board[i] == ttt.EMPTY:
                        singlet_cells[i] = singlet_cells.get(i, 0) + 1
        crosspoints = sum(1 for c in singlet_cells.values() if c >= 2)
        out += [counts[1], counts[2], counts[3], len(directions), crosspoints]
    return np.array(out, dtype=float)


def tictactoe_full_features(board) -> np.ndarray:
    """Degree-2 monomials of the 10 base features, then the 9 raw cells."""
    return np.concatenate([degree2_monomials(tictactoe_base_features(board)),
                           np.asarray(board, dtype=float)])


TTT_FULL_NAMES = degree2_names(TTT_BASE_NAMES) + [f"cell{i}" for i in range(9)]


def _all_tictactoe_boards() -> list[tuple[int, ...]]:
    from mfirl.evaluation import minimax_solve

    return sorted(minimax_solve().values, key=ttt.encode)


def tictactoe_columns() -> np.ndarray:
    """Indices of the full feature vector kept after dropping columns that are
    identical to an earlier column over every legal position."""
    mat = np.array([tictactoe_full_features(b) for b in _all_tictactoe_boards()])
    keep, seen = [], set()
    for j in range(mat.shape[1]):
        key = mat[:, j].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(j)
    return np.array(keep)


_TTT_COLUMNS: np.ndarray | None = None


def tictactoe_reward_features(board) -> np.ndarray:
    global _TTT_COLUMNS
    if _TTT_COLUMNS is None:
        _TTT_COLUMNS = tictactoe_columns()
    return tictactoe_full_features(board)[_TTT_COLUMNS]


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True)
class Scaler:
    """Per-component affine map ``v -> v * scale + shift``."""

    scale: np.ndarray
    shift: np.ndarray

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v) * self.scale + self.shift


def fit_scaler(data: np.ndarray, scaling: str = "unit_interval", bias_columns=()) -> Scaler:
    """Min-max scaler over the rows of ``data`` (the full state space).

    Constant columns go to the range midpoint; ``bias_columns`` are left as
    they are.
    """
    dim = data.shape[1]
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    if SCALINGS[scaling] is None:
        return Scaler(np.ones(dim), np.zeros(dim))
    lo, hi = SCALINGS[scaling]
    cmin, cmax = data.min(axis=0), data.max(axis=0)
    span = cmax - cmin
    const = span == 0
    scale = np.where(const, 0.0, (hi - lo) / np.where(const, 1.0, span))
    shift = np.where(const, (lo + hi) / 2, lo - cmin * scale)
    for j in bias_columns:
        scale[j], shift[j] = 1.0, 0.0
    return Scaler(scale, shift)


def apply_scaler(scaler: Scaler, v: np.ndarray) -> np.ndarray:
    return scaler(v)


# ---------------------------------------------------------------- assembly

def feature_spec(env: Environment, scaling: str = "unit_interval", blackjack_features: int = 10) -> FeatureSpec:
    if isinstance(env, BlackjackEnv):
        basis = BLACKJACK_BASIS_10 + (BLACKJACK_EXTENSION if blackjack_features == 14 else ())
        return FeatureSpec("blackjack", basis, True, False, scaling)
    if isinstance(env, GridworldEnv):
        ks = range(1, env.size)
        basis = ("x", "y") + tuple(f"x<{k}" for k in ks) + tuple(f"y<{k}" for k in ks)
        return FeatureSpec("gridworld", basis, True, False, scaling)
    if isinstance(env, TicTacToeEnv):
        global _TTT_COLUMNS
        if _TTT_COLUMNS is None:
            _TTT_COLUMNS = tictactoe_columns()
        basis = tuple(TTT_FULL_NAMES[j] for j in _TTT_COLUMNS)
        return FeatureSpec("tictactoe", basis, False, True, scaling)
    raise ValueError(f"no features for {type(env).__name__}")


def _raw_reward_features(env: Environment, spec: FeatureSpec, s: int) -> np.ndarray:
    if spec.domain == "blackjack":
        return blackjack_reward_features(s, len(spec.basis))
    if spec.domain == "gridworld":
        return gridworld_reward_features(s, env.size)
    if env.is_terminal(s):
        return np.zeros(len(spec.basis))
    return tictactoe_reward_features(env.board(s))


def value_features(spec: FeatureSpec, env: Environment, s: int, a: int, reward_row=None) -> np.ndarray:
    """Unscaled g_Q(s, a): the action-a block copy of g_R(s), or g_R of the
    tic-tac-toe afterstate."""
    if not env.legal[s, a]:
        raise ContractError(f"action {a} illegal in state {s}")
    if spec.afterstate:
        return tictactoe_reward_features(env.afterstate(s, a))
    g = _raw_reward_features(env, spec, s) if reward_row is None else reward_row
    out = np.zeros(len(g) * env.n_actions)
    out[a * len(g):(a + 1) * len(g)] = g
    return out


def build_feature_map(env: Environment, scaling: str = "unit_interval", blackjack_features: int = 10) -> FeatureMap:
    """Tabulate and scale g_R and g_Q over the full state(-action) space.

    Terminal states keep all-zero reward features. For replicated value
    features the reward scaler is reused per block; for afterstates one
    scaler is fitted over reward and afterstate rows together.
    """
    spec = feature_spec(env, scaling, blackjack_features)
    S, A = env.n_states, env.n_actions
    m_r = len(spec.basis)
    live = ~env.terminal
    raw_r = np.array([_raw_reward_features(env, spec, s) for s in range(S)])
    bias = [0] if spec.domain == "blackjack" else []
    if spec.afterstate:
        raw_q = np.zeros((S, A, m_r))
        for s in np.flatnonzero(live):
            for a in env.legal_actions(s):
                raw_q[s, a] = value_features(spec, env, s, a)
        pool = np.vstack([raw_r[live], raw_q[env.legal]])
        scaler = fit_scaler(pool, scaling, bias)
        g_r = np.where(live[:, None], scaler(raw_r), 0.0)
        g_q = np.where(env.legal[:, :, None], scaler(raw_q), 0.0)
    else:
        scaler = fit_scaler(raw_r[live], scaling, bias)
        g_r = np.where(live[:, None], scaler(raw_r), 0.0)
        g_q = np.zeros((S, A, m_r * A))
        for a in range(A):
            g_q[:, a, a * m_r:(a + 1) * m_r] = np.where(env.legal[:, a, None], g_r, 0.0)
    g_r.setflags(write=False)
    g_q.setflags(write=False)
    return FeatureMap(g_r, g_q, env.legal, scaling, spec.basis)


def export_csv(fmap: FeatureMap, path: str | Path, which: str = "reward") -> None:
    """Write g_R (row per state) or g_Q (row per legal state-action) as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if which == "reward":
            w.writerow(["state"] + list(fmap.names or range(fmap.reward_dim)))
            for s, row in enumerate(fmap.reward_matrix):
                w.writerow([s] + [repr(float(v)) for v in row])
        else:
            w.writerow(["state", "action"] + [f"q{j}" for j in range(fmap.value_dim)])
            for s, a in zip(*np.nonzero(fmap.legal)):
                w.writerow([s, a] + [repr(float(v)) for v in fmap.value_tensor[s, a]])
