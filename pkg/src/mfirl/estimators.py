"""MAP estimators under flat priors: the reward-prior (RP) model, whose
Q-weights are C w_R through LSTDQ, and the policy-optimality (PO) model,
which fits Q-weights directly. Both maximize a softmax log-likelihood that
is concave in the fitted weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from mfirl import lstdq
from mfirl.core import ContractError, DemonstrationSet, FeatureMap, Policy, greedy_table, softmax_table
from mfirl.optimize import FitReport, lbfgs_maximize

LogPrior = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class RpParams:
    w_r: np.ndarray
    system: lstdq.LstdqSystem
    beta: float = 1.0

    @property
    def w_eff(self) -> np.ndarray:
        return lstdq.q_weights(self.system, self.w_r)


@dataclass(frozen=True)
class PoParams:
    w_q: np.ndarray
    beta: float = 1.0

    @property
    def w_eff(self) -> np.ndarray:
        return self.w_q


class SoftmaxLikelihood:
    """Demonstration log-likelihood of a linear softmax policy.

    The per-step sum is regrouped by visited state: with n(s, a) the number of
    times a was demonstrated in s and x(s, a) the action features,

        L(w) = sum_s [ beta sum_a n(s,a) x(s,a)^T w - N(s) logsumexp_a beta x(s,a)^T w ]

    where the log-partition runs over legal actions only.
    """

    def __init__(self, x: np.ndarray, legal: np.ndarray, counts: np.ndarray, beta: float = 1.0,
                 log_prior: LogPrior | None = None):
        if not np.all(np.isfinite(x)):
            raise ContractError("non-finite feature values")
        if np.any(counts[~legal] > 0):
            raise ContractError("demonstrated action is illegal")
        self.x = np.where(legal[:, :, None], x, 0.0)
        self.legal = legal
        self.counts = counts.astype(float)
        self.visits = self.counts.sum(axis=1)
        self.beta = float(beta)
        self.log_prior = log_prior
        self.linear = np.einsum("sa,sam->m", self.counts, self.x)

    @property
    def dim(self) -> int:
        return self.x.shape[2]

    def policy_probs(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Softmax table over visited states and its log-partition per state."""
        scores = self.beta * (self.x @ w)
        scores = np.where(self.legal, scores, -np.inf)
        top = scores.max(axis=1)
        e = np.exp(scores - top[:, None])  # exp(-inf) = 0 on illegal actions
        z = e.sum(axis=1)
        return e / z[:, None], top + np.log(z)

    def __call__(self, w) -> tuple[float, np.ndarray]:
        w = np.asarray(w, dtype=float)
        probs, log_z = self.policy_probs(w)
        value = self.beta * (self.linear @ w) - self.visits @ log_z
        expected = np.einsum("s,sa,sam->m", self.visits, probs, self.x)
        grad = self.beta * (self.linear - expected)
        if self.log_prior is not None:
            pv, pg = self.log_prior(w)
            value, grad = value + pv, grad + pg
        return float(value), grad


def _visit_counts(demos: DemonstrationSet, features: FeatureMap):
    demos.require_nonempty()
    s, a = demos.state_action_arrays()
    if np.any(s < 0) or np.any(s >= features.n_states):
        raise ContractError("demonstrated state out of range")
    visited, inverse = np.unique(s, return_inverse=True)
    counts = np.zeros((len(visited), features.n_actions))
    np.add.at(counts, (inverse, a), 1.0)
    return visited, counts


def rp_likelihood(demos: DemonstrationSet, system: lstdq.LstdqSystem, features: FeatureMap,
                  beta: float = 1.0, log_prior: LogPrior | None = None) -> SoftmaxLikelihood:
    if not system.solved:
        raise ContractError("LSTDQ system must be solved first")
    visited, counts = _visit_counts(demos, features)
    x = features.value_tensor[visited] @ system.C  # phi(s, a) = C^T g_Q(s, a)
    return SoftmaxLikelihood(x, features.legal[visited], counts, beta, log_prior)


def po_likelihood(demos: DemonstrationSet, features: FeatureMap, beta: float = 1.0,
                  log_prior: LogPrior | None = None) -> SoftmaxLikelihood:
    visited, counts = _visit_counts(demos, features)
    return SoftmaxLikelihood(features.value_tensor[visited], features.legal[visited], counts, beta, log_prior)


def rp_objective_and_gradient(w_r, demos, system, features, beta: float = 1.0, log_prior=None):
    w_r = np.asarray(w_r, dtype=float)
    if system.C is not None and w_r.shape != (system.C.shape[1],):
        raise ContractError("reward weight dimension mismatch")
    return rp_likelihood(demos, system, features, beta, log_prior)(w_r)


def po_objective_and_gradient(w_q, demos, features, beta: float = 1.0, log_prior=None):
    w_q = np.asarray(w_q, dtype=float)
    if w_q.shape != (features.value_dim,):
        raise ContractError("value weight dimension mismatch")
    return po_likelihood(demos, features, beta, log_prior)(w_q)


def fit(objective, x0, tol_grad: float = 1e-6, max_iter: int = 500) -> tuple[np.ndarray, FitReport]:
    """Maximize a concave objective with L-BFGS from ``x0``."""
    return lbfgs_maximize(objective, np.asarray(x0, dtype=float), tol_grad=tol_grad, max_iter=max_iter)


def fit_rp(demos: DemonstrationSet, features: FeatureMap, gamma: float, ridge: float | None = None,
           include_terminal: bool = True, beta: float = 1.0, tol_grad: float = 1e-6,
           max_iter: int = 500, system: lstdq.LstdqSystem | None = None) -> tuple[RpParams, FitReport]:
    demos.require_nonempty()
    if system is None:
        system = lstdq.solve(lstdq.accumulate(demos, features, gamma, include_terminal), ridge)
    objective = rp_likelihood(demos, system, features, beta)
    w, report = fit(objective, np.zeros(features.reward_dim), tol_grad, max_iter)
    return RpParams(w, system, beta), report


def fit_po(demos: DemonstrationSet, features: FeatureMap, beta: float = 1.0, tol_grad: float = 1e-6,
           max_iter: int = 500) -> tuple[PoParams, FitReport]:
    objective = po_likelihood(demos, features, beta)
    w, report = fit(objective, np.zeros(features.value_dim), tol_grad, max_iter)
    return PoParams(w, beta), report


def extract_policy(params: RpParams | PoParams, features: FeatureMap, mode: str = "greedy") -> Policy:
    if mode == "greedy":
        return greedy_table(params.w_eff, features)
    if mode == "softmax":
        return softmax_table(params.w_eff, params.beta, features)
    raise ValueError(f"unknown policy mode {mode!r}")


def learned_reward(params, features: FeatureMap) -> np.ndarray:
    """Tabulated rho_hat(s) = g_R(s)^T w_R."""
    if not isinstance(params, RpParams):
        raise ContractError("PO model produces no reward function")
    return features.reward_matrix @ params.w_r


def format_params(params: RpParams | PoParams) -> str:
    model, w = ("rp", params.w_r) if isinstance(params, RpParams) else ("po", params.w_q)
    lines = [f"model={model} beta={params.beta!r} dim={len(w)}"]
    lines += [repr(float(v)) for v in w]
    return "\n".join(lines) + "\n"


def parse_params(text: str) -> tuple[str, float, np.ndarray]:
    """Return (model, beta, weights) from the text written by ``format_params``."""
    lines = text.splitlines()
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    weights = np.array([float(v) for v in lines[1:] if v.strip()])
    if len(weights) != int(header["dim"]):
        raise ContractError("parameter file dimension mismatch")
    return header["model"], float(header["beta"]), weights


def save_params(params: RpParams | PoParams, path: str | Path) -> None:
    Path(path).write_text(format_params(params))
