import numpy as np
import pytest

from mfirl.core import FeatureMap

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_feature_map(reward_matrix, value_tensor, legal=None) -> FeatureMap:
    reward_matrix = np.asarray(reward_matrix, dtype=float)
    value_tensor = np.asarray(value_tensor, dtype=float)
    if legal is None:
        legal = np.ones(value_tensor.shape[:2], dtype=bool)
    return FeatureMap(reward_matrix, value_tensor, np.asarray(legal, dtype=bool))


def four_state_chain(seed: int = 0):
    """Random 4-state, 2-action continuing MDP with a fixed stochastic policy.

    Returns (P[s, a, s'], r[s], pi[s, a], gamma).
    """
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(4), size=(4, 2))
    r = rng.normal(size=4)
    pi = rng.dirichlet(np.ones(2), size=4)
    return P, r, pi, 0.9


def exact_q(P, r, pi, gamma):
    """Q^pi for a state reward by one dense linear solve on (s, a) pairs."""
    S, A = pi.shape
    # (s,a) -> (s',a') kernel under pi
    K = (P[:, :, :, None] * pi[None, None, :, :]).reshape(S * A, S * A)
    R = np.repeat(r, A)
    return np.linalg.solve(np.eye(S * A) - gamma * K, R).reshape(S, A)


def sample_chain(P, pi, n_steps: int, seed: int):
    """One long trajectory of (state, action) ids."""
    rng = np.random.default_rng(seed)
    S, A = pi.shape
    cum_pi = np.cumsum(pi, axis=1)
    cum_p = np.cumsum(P, axis=2)
    u = rng.random((n_steps, 2))
    states = np.empty(n_steps, dtype=np.int64)
    actions = np.empty(n_steps, dtype=np.int64)
    s = 0
    for t in range(n_steps):
        a = min(int(np.searchsorted(cum_pi[s], u[t, 0], side="right")), A - 1)
        states[t], actions[t] = s, a
        s = min(int(np.searchsorted(cum_p[s, a], u[t, 1], side="right")), S - 1)
    return states, actions


def tabular_features(S: int, A: int) -> FeatureMap:
    """One-hot state reward features and one-hot (s, a) value features."""
    g_q = np.eye(S * A).reshape(S, A, S * A)
    return make_feature_map(np.eye(S), g_q)
