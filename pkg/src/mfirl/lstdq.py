"""On-policy LSTDQ built from demonstrations only.

The reward-to-value map C = (A + ridge I)^-1 Z turns reward weights into
Q-weights linearly, so it is solved once per demonstration set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from mfirl.core import ContractError, DemonstrationSet, FeatureMap

CHUNK = 8192
MAX_CONDITION = 1e12


class SingularSystemError(ContractError):
    pass


@dataclass(frozen=True)
class LstdqSystem:
    A: np.ndarray
    Z: np.ndarray
    gamma: float
    sample_count: int
    C: np.ndarray | None = None
    ridge: float = 0.0

    @property
    def solved(self) -> bool:
        return self.C is not None

    def residual(self) -> float:
        m = self.A.shape[0]
        return float(np.max(np.abs((self.A + self.ridge * np.eye(m)) @ self.C - self.Z)))

    def dump(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savetxt(directory / "A.csv", self.A, delimiter=",", fmt="%.17g")
        np.savetxt(directory / "Z.csv", self.Z, delimiter=",", fmt="%.17g")
        if self.C is not None:
            np.savetxt(directory / "C.csv", self.C, delimiter=",", fmt="%.17g")


def _transition_indices(demos: DemonstrationSet, include_terminal: bool):
    """Flat (s, a, s', a') index arrays; s' = -1 marks a zero successor."""
    s_now, a_now, s_next, a_next = [], [], [], []
    for traj in demos.trajectories:
        st, ac = traj.states, traj.actions
        s_now.extend(st[:-1])
        a_now.extend(ac[:-1])
        s_next.extend(st[1:])
        a_next.extend(ac[1:])
        if include_terminal and traj.terminated:
            s_now.append(st[-1])
            a_now.append(ac[-1])
            s_next.append(-1)
            a_next.append(-1)
    as_arr = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    return as_arr(s_now), as_arr(a_now), as_arr(s_next), as_arr(a_next)


def accumulate(demos: DemonstrationSet, features: FeatureMap, gamma: float,
               include_terminal: bool = True) -> LstdqSystem:
    """Sum A and Z over every demonstrated transition.

    A = sum g_Q(s,a) (g_Q(s,a) - gamma g_Q(s',a'))^T and
    Z = sum g_Q(s,a) g_R(s)^T. With ``include_terminal`` the last step of an
    episode that ended in a terminal state is added with a zero successor.
    Sums run in fixed-size chunks so the result is bit-reproducible.
    """
    if len(demos) == 0:
        raise ContractError("no demonstrations")
    s, a, s2, a2 = _transition_indices(demos, include_terminal)
    m_q, m_r = features.value_dim, features.reward_dim
    A = np.zeros((m_q, m_q))
    Z = np.zeros((m_q, m_r))
    for lo in range(0, len(s), CHUNK):
        sl = slice(lo, lo + CHUNK)
        g = features.value_tensor[s[sl], a[sl]]
        nxt = features.value_tensor[np.maximum(s2[sl], 0), np.maximum(a2[sl], 0)]
        nxt = np.where((s2[sl] >= 0)[:, None], nxt, 0.0)
        A += g.T @ (g - gamma * nxt)
        Z += g.T @ features.reward_matrix[s[sl]]
    return LstdqSystem(A, Z, gamma, len(s))


def default_ridge(system: LstdqSystem) -> float:
    m = system.A.shape[0]
    return 1e-6 * float(np.trace(system.A)) / m


def solve(system: LstdqSystem, ridge: float | None = None) -> LstdqSystem:
    """Solve (A + ridge I) C = Z by LU with partial pivoting.

    ``ridge=None`` uses 1e-6 * trace(A) / m_Q.
    """
    lam = default_ridge(system) if ridge is None else float(ridge)
    if lam < 0:
        raise ContractError("ridge must be non-negative")
    m = system.A.shape[0]
    M = system.A + lam * np.eye(m)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystemError(
            f"A + ridge*I is numerically singular (condition {cond:.3g}); use a larger ridge")
    C = np.linalg.solve(M, system.Z)
    return replace(system, C=C, ridge=lam)


def q_weights(system: LstdqSystem, w_r) -> np.ndarray:
    if system.C is None:
        raise ContractError("system is not solved")
    w_r = np.asarray(w_r, dtype=float)
    if w_r.shape != (system.C.shape[1],):
        raise ContractError(f"reward weights must have shape ({system.C.shape[1]},)")
    return system.C @ w_r
