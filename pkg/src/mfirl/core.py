"""Shared domain types: trajectories, feature maps, tabular MDPs and policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


@dataclass(frozen=True)
class Trajectory:
    """One demonstrated episode as parallel state/action id arrays.

    ``terminated`` records whether the episode ended by entering a terminal
    state (as opposed to being cut off), which matters for LSTDQ closure.
    """

    states: tuple[int, ...]
    actions: tuple[int, ...]
    terminated: bool = True

    def __post_init__(self):
        if len(self.states) != len(self.actions):
            raise ContractError("states and actions must have equal length")
        if len(self.states) < 1:
            raise ContractError("trajectory length must be >= 1")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], terminated: bool = True) -> Trajectory:
        states = tuple(int(s) for s, _ in pairs)
        actions = tuple(int(a) for _, a in pairs)
        return cls(states, actions, terminated)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states, self.actions))


@dataclass(frozen=True)
class DemonstrationSet:
    trajectories: tuple[Trajectory, ...]
    env_tag: str

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def n_steps(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def require_nonempty(self) -> None:
        if not self.trajectories:
            raise ContractError("no demonstrations")

    def state_action_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Concatenate every (s_t, a_t) in the set into two int arrays."""
        if not self.trajectories:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        s = np.concatenate([np.asarray(t.states, dtype=np.int64) for t in self.trajectories])
        a = np.concatenate([np.asarray(t.actions, dtype=np.int64) for t in self.trajectories])
        return s, a

    def validate(self, legal: np.ndarray) -> None:
        """Check every state id is in range and every action is legal there."""
        n_states = legal.shape[0]
        for traj in self.trajectories:
            for s, a in zip(traj.states, traj.actions):
                if not 0 <= s < n_states:
                    raise ContractError(f"state {s} out of range")
                if not (0 <= a < legal.shape[1] and legal[s, a]):
                    raise ContractError(f"action {a} illegal in state {s}")


def format_demos(demos: DemonstrationSet) -> str:
    lines = [f"env={demos.env_tag} episodes={len(demos)}"]
    for traj in demos.trajectories:
        lines.append(" ".join(f"{s}:{a}" for s, a in zip(traj.states, traj.actions)))
    return "\n".join(lines) + "\n"


def parse_demos(text: str, terminated: bool = True) -> DemonstrationSet:
    """Parse the line-oriented demonstration format.

    Args:
        text: File contents. First line ``env=<tag> episodes=<n>``, then one
            episode per line as space separated ``s:a`` pairs.
        terminated: Value of ``Trajectory.terminated`` for every episode; the
            file format does not carry it, it is a property of the environment.
    """
    lines = text.splitlines()
    if not lines:
        raise ContractError("empty demonstration file: no demonstrations")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    if "env" not in header or "episodes" not in header:
        raise ContractError(f"bad demonstration header: {lines[0]!r}")
    n = int(header["episodes"])
    body = lines[1:]
    if len(body) != n:
        raise ContractError(f"header declares {n} episodes, found {len(body)}")
    trajectories = []
    for line in body:
        pairs = [tuple(int(x) for x in tok.split(":")) for tok in line.split()]
        trajectories.append(Trajectory.from_pairs(pairs, terminated))
    return DemonstrationSet(tuple(trajectories), header["env"])


def save_demos(demos: DemonstrationSet, path: str | Path) -> None:
    Path(path).write_text(format_demos(demos))


def load_demos(path: str | Path, terminated: bool = True) -> DemonstrationSet:
    return parse_demos(Path(path).read_text(), terminated)


@dataclass(frozen=True)
class FeatureMap:
    """Tabulated reward features g_R(s) and value features g_Q(s, a).

    Attributes:
        reward_matrix: (n_states, m_R) array, row s is g_R(s).
        value_tensor: (n_states, n_actions, m_Q) array; entries for illegal
            actions are zero and never read.
        legal: (n_states, n_actions) boolean mask.
        scaling: ``"unit_interval"``, ``"symmetric"`` or ``"none"``.
    """

    reward_matrix: np.ndarray
    value_tensor: np.ndarray
    legal: np.ndarray
    scaling: str = "none"
    names: tuple[str, ...] = field(default=())

    @property
    def reward_dim(self) -> int:
        return self.reward_matrix.shape[1]

    @property
    def value_dim(self) -> int:
        return self.value_tensor.shape[2]

    @property
    def n_states(self) -> int:
        return self.reward_matrix.shape[0]

    @property
    def n_actions(self) -> int:
        return self.legal.shape[1]

    def reward_features(self, s: int) -> np.ndarray:
        return self.reward_matrix[s]

    def value_features(self, s: int, a: int) -> np.ndarray:
        if not self.legal[s, a]:
            raise ContractError(f"action {a} illegal in state {s}")
        return self.value_tensor[s, a]

    def legal_actions(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.legal[s])


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    m = scores.max()
    shifted = scores - m
    return shifted - np.log(np.exp(shifted).sum())


def softmax_policy_prob(weights, beta: float, features: FeatureMap, s: int, legal) -> np.ndarray:
    """Boltzmann action probabilities over ``legal`` at state ``s``.

    Returns a vector aligned with ``legal``.
    """
    legal = np.asarray(legal, dtype=np.int64)
    if legal.size == 0:
        raise ContractError("empty legal action set")
    weights = np.asarray(weights, dtype=float)
    if not np.all(np.isfinite(weights)):
        raise ContractError("weights must be finite")
    scores = beta * (features.value_tensor[s, legal] @ weights)
    return np.exp(_log_softmax(scores))


def greedy_action(weights, features: FeatureMap, s: int, legal, tie_rule: str = "lowest") -> int:
    legal = np.asarray(legal, dtype=np.int64)
    if legal.size == 0:
        raise ContractError("empty legal action set")
    scores = features.value_tensor[s, legal] @ np.asarray(weights, dtype=float)
    if tie_rule == "lowest":
        order = np.argsort(legal, kind="stable")
        return int(legal[order][np.argmax(scores[order])])
    raise ValueError(f"unknown tie rule {tie_rule!r}")


@dataclass(frozen=True)
class TabularMDP:
    """Exact finite MDP with a sparse (n_states * n_actions, n_states) kernel.

    Row ``s * n_actions + a`` of ``transitions`` is P(. | s, a). Illegal
    actions carry a valid (unused) row so the kernel stays row-stochastic.
    """

    n_states: int
    n_actions: int
    transitions: sp.csr_matrix
    reward: np.ndarray  # (n_states, n_actions) expected immediate reward
    start_dist: np.ndarray
    terminal: np.ndarray
    legal: np.ndarray
    gamma: float = 1.0
    horizon: int | None = None

    def __post_init__(self):
        S, A = self.n_states, self.n_actions
        if self.transitions.shape != (S * A, S):
            raise ContractError("transition matrix has wrong shape")
        if self.reward.shape != (S, A) or self.legal.shape != (S, A):
            raise ContractError("reward/legal arrays have wrong shape")
        if not 0.0 < self.gamma <= 1.0:
            raise ContractError("discount must lie in (0, 1]")

    def check(self, atol: float = 1e-12) -> None:
        """Assert row-stochasticity and terminal conventions."""
        rows = np.asarray(self.transitions.sum(axis=1)).ravel()
        if np.max(np.abs(rows - 1.0)) > atol:
            raise ContractError("transition rows must sum to 1")
        if abs(self.start_dist.sum() - 1.0) > atol:
            raise ContractError("start distribution must sum to 1")
        if np.any(self.start_dist[self.terminal] != 0):
            raise ContractError("start distribution puts mass on a terminal state")
        for s in np.flatnonzero(self.terminal):
            block = self.transitions[s * self.n_actions:(s + 1) * self.n_actions]
            if np.any(np.abs(block[:, s].toarray() - 1.0) > atol):
                raise ContractError(f"terminal state {s} must self-loop")
            if np.any(self.reward[s] != 0):
                raise ContractError(f"terminal state {s} must have zero reward")

    def next_distribution(self, s: int, a: int) -> np.ndarray:
        return self.transitions[s * self.n_actions + a].toarray().ravel()

    def with_reward(self, reward: np.ndarray) -> TabularMDP:
        """Copy with the reward table replaced (terminal rows forced to 0)."""
        reward = np.array(reward, dtype=float)
        if reward.ndim == 1:
            reward = np.repeat(reward[:, None], self.n_actions, axis=1)
        reward[self.terminal] = 0.0
        return TabularMDP(self.n_states, self.n_actions, self.transitions, reward,
                          self.start_dist, self.terminal, self.legal, self.gamma, self.horizon)


@dataclass(frozen=True)
class Policy:
    """Tabular stochastic policy; ``probs[s, a]`` is zero on illegal actions."""

    probs: np.ndarray

    def check(self, legal: np.ndarray, terminal: np.ndarray | None = None, atol: float = 1e-9) -> None:
        rows = np.ones(len(legal), dtype=bool) if terminal is None else ~terminal
        if np.any(self.probs < 0):
            raise ContractError("negative action probability")
        if np.any(self.probs[~legal & rows[:, None]] != 0):
            raise ContractError("mass on illegal action")
        if np.max(np.abs(self.probs[rows].sum(axis=1) - 1.0), initial=0.0) > atol:
            raise ContractError("action probabilities must sum to 1")

    def action(self, s: int, rng: np.random.Generator) -> int:
        p = self.probs[s]
        return int(rng.choice(len(p), p=p))

    @classmethod
    def deterministic(cls, actions: np.ndarray, n_actions: int) -> Policy:
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, legal: np.ndarray) -> Policy:
        counts = legal.sum(axis=1, keepdims=True)
        return cls(np.where(legal, 1.0 / np.maximum(counts, 1), 0.0))


def softmax_table(weights, beta: float, features: FeatureMap) -> Policy:
    """Materialize the softmax policy of ``weights`` over every state.

    States with no legal action (terminals) get an all-zero row.
    """
    scores = beta * (features.value_tensor @ np.asarray(weights, dtype=float))
    scores = np.where(features.legal, scores, -np.inf)
    has_any = features.legal.any(axis=1)
    m = np.where(has_any, scores.max(axis=1, where=features.legal, initial=-np.inf), 0.0)
    e = np.where(features.legal, np.exp(scores - m[:, None]), 0.0)
    z = e.sum(axis=1, keepdims=True)
    probs = np.divide(e, z, out=np.zeros_like(e), where=z > 0)
    return Policy(probs)


def greedy_table(weights, features: FeatureMap) -> Policy:
    """Deterministic argmax policy, ties to the lowest action id."""
    scores = features.value_tensor @ np.asarray(weights, dtype=float)
    scores = np.where(features.legal, scores, -np.inf)
    actions = np.argmax(scores, axis=1)  # argmax returns the first maximum
    probs = np.zeros_like(scores)
    has_any = features.legal.any(axis=1)
    probs[np.flatnonzero(has_any), actions[has_any]] = 1.0
    return Policy(probs)
