import math

import numpy as np
import pytest

from mfirl import estimators, lstdq
from mfirl.core import ContractError, DemonstrationSet, Trajectory, softmax_policy_prob

from conftest import make_feature_map


def _toy(rng, S=5, A=3, m_r=3, m_q=4, n_traj=15, illegal=True):
    legal = np.ones((S, A), dtype=bool)
    if illegal:
        legal[1, 2] = legal[3, 0] = False
    fmap = make_feature_map(rng.normal(size=(S, m_r)), rng.normal(size=(S, A, m_q)), legal)
    trajs = []
    for _ in range(n_traj):
        k = int(rng.integers(1, 6))
        st = [int(x) for x in rng.integers(S, size=k)]
        ac = [int(rng.choice(np.flatnonzero(legal[s]))) for s in st]
        trajs.append(Trajectory(tuple(st), tuple(ac)))
    return fmap, DemonstrationSet(tuple(trajs), "toy")


def _system(demos, fmap, gamma=0.9):
    return lstdq.solve(lstdq.accumulate(demos, fmap, gamma), ridge=1e-3)


def _fd_grad(f, w, h=1e-5):
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


class TestObjectives:
    def test_zero_weights_value_and_gradient(self, rng):
        fmap, demos = _toy(rng)
        L, g = estimators.po_objective_and_gradient(np.zeros(4), demos, fmap)
        steps = [st for t in demos.trajectories for st in t.steps]
        assert L == pytest.approx(-sum(math.log(fmap.legal[s].sum()) for s, _ in steps))
        expected = sum(fmap.value_features(s, a) - fmap.value_tensor[s, fmap.legal[s]].mean(axis=0)
                       for s, a in steps)
        np.testing.assert_allclose(g, expected, atol=1e-12)

    def test_rp_zero_weights(self, rng):
        fmap, demos = _toy(rng)
        L, _ = estimators.rp_objective_and_gradient(np.zeros(3), demos, _system(demos, fmap), fmap)
        steps = [st for t in demos.trajectories for st in t.steps]
        assert L == pytest.approx(-sum(math.log(fmap.legal[s].sum()) for s, _ in steps))

    @pytest.mark.parametrize("model", ["rp", "po"])
    def test_gradient_finite_difference(self, rng, model):
        for _ in range(20):
            fmap, demos = _toy(rng)
            if model == "rp":
                sysm = _system(demos, fmap)
                f = lambda w: estimators.rp_objective_and_gradient(w, demos, sysm, fmap)  # noqa: E731
                w = rng.normal(size=3)
            else:
                f = lambda w: estimators.po_objective_and_gradient(w, demos, fmap)  # noqa: E731
                w = rng.normal(size=4)
            assert _rel_err(f(w)[1], _fd_grad(lambda v: f(v)[0], w)) <= 1e-5

    @pytest.mark.parametrize("model", ["rp", "po"])
    def test_factorization_matches_naive_loop(self, rng, model):
        fmap, demos = _toy(rng)
        sysm = _system(demos, fmap)
        if model == "rp":
            w = rng.normal(size=3)
            L, _ = estimators.rp_objective_and_gradient(w, demos, sysm, fmap, beta=1.7)
            w_eff = sysm.C @ w
        else:
            w = rng.normal(size=4)
            L, _ = estimators.po_objective_and_gradient(w, demos, fmap, beta=1.7)
            w_eff = w
        naive = 0.0
        for traj in demos.trajectories:
            for s, a in traj.steps:
                legal = list(np.flatnonzero(fmap.legal[s]))
                naive += math.log(softmax_policy_prob(w_eff, 1.7, fmap, s, legal)[legal.index(a)])
        assert L == pytest.approx(naive, abs=1e-10)

    def test_scale_equivalence(self, rng):
        fmap, demos = _toy(rng)
        sysm = _system(demos, fmap)
        w = rng.normal(size=4)
        for c in (0.5, 3.0):
            a = estimators.po_objective_and_gradient(w, demos, fmap, beta=1.0)[0]
            b = estimators.po_objective_and_gradient(w / c, demos, fmap, beta=c)[0]
            assert a == pytest.approx(b, rel=1e-13)
            wr = rng.normal(size=3)
            a = estimators.rp_objective_and_gradient(wr, demos, sysm, fmap, beta=1.0)[0]
            b = estimators.rp_objective_and_gradient(wr / c, demos, sysm, fmap, beta=c)[0]
            assert a == pytest.approx(b, rel=1e-13)

    def test_bridge_identity(self, rng):
        fmap, demos = _toy(rng, m_r=4, m_q=4)
        eye = lstdq.LstdqSystem(np.eye(4), np.eye(4), 0.9, 1, C=np.eye(4))
        for _ in range(20):
            w = rng.normal(size=4) * 3
            a = estimators.rp_objective_and_gradient(w, demos, eye, fmap)
            b = estimators.po_objective_and_gradient(w, demos, fmap)
            assert abs(a[0] - b[0]) <= 1e-12
            np.testing.assert_allclose(a[1], b[1], atol=1e-12)

    def test_concave_slope_along_segment(self, rng):
        fmap, demos = _toy(rng)
        for _ in range(10):
            u, v = rng.normal(size=4) * 2, rng.normal(size=4) * 2
            ts = np.linspace(0, 1, 10)
            slopes = [estimators.po_objective_and_gradient(u + t * (v - u), demos, fmap)[1] @ (v - u) for t in ts]
            assert np.all(np.diff(slopes) <= 1e-9)

    def test_midpoint_concavity(self, rng):
        fmap, demos = _toy(rng)
        sysm = _system(demos, fmap)
        for _ in range(100):
            u, v = rng.normal(size=3) * 3, rng.normal(size=3) * 3
            f = lambda w: estimators.rp_objective_and_gradient(w, demos, sysm, fmap)[0]  # noqa: E731
            assert f((u + v) / 2) >= (f(u) + f(v)) / 2 - 1e-10

    def test_errors(self, rng):
        fmap, demos = _toy(rng)
        with pytest.raises(ContractError, match="no demonstrations"):
            estimators.po_objective_and_gradient(np.zeros(4), DemonstrationSet((), "toy"), fmap)
        with pytest.raises(ContractError):
            estimators.po_objective_and_gradient(np.zeros(5), demos, fmap)
        bad = make_feature_map(fmap.reward_matrix, np.where(True, fmap.value_tensor, 0) * np.nan)
        with pytest.raises(ContractError):
            estimators.po_objective_and_gradient(np.zeros(4), demos, bad)
        with pytest.raises(ContractError):
            estimators.rp_objective_and_gradient(np.zeros(3), demos,
                                                 lstdq.accumulate(demos, fmap, 0.9), fmap)


class TestFit:
    def test_logistic_mle(self):
        d = np.array([0.8, -0.3])
        fmap = make_feature_map(np.zeros((1, 1)), [[d, np.zeros(2)]])
        trajs = [Trajectory((0,), (0,))] * 7 + [Trajectory((0,), (1,))] * 3
        params, rep = estimators.fit_po(DemonstrationSet(tuple(trajs), "toy"), fmap, tol_grad=1e-10)
        assert rep.converged
        p = 1 / (1 + math.exp(-(d @ params.w_q)))
        assert p == pytest.approx(0.7, abs=1e-8)

    def test_grid_search_oracle(self, rng):
        fmap, demos = _toy(rng, m_q=2, n_traj=40)
        w, rep = estimators.fit(estimators.po_likelihood(demos, fmap), np.zeros(2), tol_grad=1e-9)
        assert np.all(np.abs(w) < 3)  # the grid below covers the optimum
        lik = estimators.po_likelihood(demos, fmap)
        grid = np.arange(-3, 3.0001, 0.01)
        W = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
        scores = np.where(lik.legal[None], np.einsum("sam,km->ksa", lik.x, W), -np.inf)
        top = scores.max(axis=2)
        log_z = top + np.log(np.exp(scores - top[..., None]).sum(axis=2))
        values = W @ lik.linear - log_z @ lik.visits
        assert values.max() <= rep.objective + 1e-4

    def test_ascends_from_zero(self, rng):
        fmap, demos = _toy(rng)
        _, rep = estimators.fit_po(demos, fmap)
        assert rep.objective >= estimators.po_objective_and_gradient(np.zeros(4), demos, fmap)[0]

    def test_rp_separable_toy(self):
        # one-step episodes, one demonstrated action per state
        S, A = 3, 2
        fmap = make_feature_map(np.eye(S), np.eye(S * A).reshape(S, A, S * A))
        demo_action = [1, 0, 1]
        trajs = [Trajectory((s,), (demo_action[s],)) for s in range(S) for _ in range(4)]
        params, _ = estimators.fit_rp(DemonstrationSet(tuple(trajs), "toy"), fmap, gamma=0.9, max_iter=50)
        pol = estimators.extract_policy(params, fmap, "softmax")
        assert [int(np.argmax(pol.probs[s])) for s in range(S)] == demo_action


class TestPolicyAndReward:
    def test_po_greedy_scale_invariant(self, rng):
        fmap, _ = _toy(rng)
        w = rng.normal(size=4)
        p1 = estimators.extract_policy(estimators.PoParams(w), fmap, "greedy")
        p2 = estimators.extract_policy(estimators.PoParams(4.2 * w), fmap, "greedy")
        np.testing.assert_array_equal(p1.probs, p2.probs)

    def test_softmax_rows_sum_to_one(self, rng):
        fmap, _ = _toy(rng)
        pol = estimators.extract_policy(estimators.PoParams(rng.normal(size=4)), fmap, "softmax")
        np.testing.assert_allclose(pol.probs.sum(axis=1), 1.0)
        with pytest.raises(ValueError):
            estimators.extract_policy(estimators.PoParams(np.zeros(4)), fmap, "boltzmann")

    def test_learned_reward(self, rng):
        fmap, demos = _toy(rng)
        sysm = _system(demos, fmap)
        assert not estimators.learned_reward(estimators.RpParams(np.zeros(3), sysm), fmap).any()
        u, v = rng.normal(size=3), rng.normal(size=3)
        r = lambda w: estimators.learned_reward(estimators.RpParams(w, sysm), fmap)  # noqa: E731
        np.testing.assert_allclose(r(2 * u + v), 2 * r(u) + r(v), atol=1e-12)
        with pytest.raises(ContractError, match="PO model produces no reward function"):
            estimators.learned_reward(estimators.PoParams(np.zeros(4)), fmap)

    def test_params_round_trip(self, rng):
        w = rng.normal(size=6)
        model, beta, back = estimators.parse_params(estimators.format_params(estimators.PoParams(w, 1.0)))
        assert model == "po" and beta == 1.0
        np.testing.assert_array_equal(back, w)
