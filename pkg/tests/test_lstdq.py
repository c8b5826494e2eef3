import numpy as np
import pytest

from mfirl import lstdq
from mfirl.core import ContractError, DemonstrationSet, Trajectory

from conftest import exact_q, four_state_chain, make_feature_map, sample_chain, tabular_features


def _demos(*trajs):
    return DemonstrationSet(tuple(trajs), "synthetic")


def _random_demo(rng, n_states, n_actions, n_traj=6, length=7):
    trajs = []
    for _ in range(n_traj):
        k = int(rng.integers(1, length))
        trajs.append(Trajectory(tuple(int(x) for x in rng.integers(n_states, size=k)),
                                tuple(int(x) for x in rng.integers(n_actions, size=k))))
    return _demos(*trajs)


def test_scalar_hand_example():
    fmap = make_feature_map([[1.0], [1.0]], [[[1.0]], [[1.0]]])
    demos = _demos(Trajectory((0, 1), (0, 0), terminated=False))
    system = lstdq.solve(lstdq.accumulate(demos, fmap, 0.5), ridge=0.0)
    np.testing.assert_allclose(system.A, [[0.5]])
    np.testing.assert_allclose(system.Z, [[1.0]])
    np.testing.assert_allclose(system.C, [[2.0]])
    assert system.sample_count == 1


def test_terminal_closure_adds_zero_successor():
    fmap = make_feature_map([[1.0], [1.0]], [[[1.0]], [[1.0]]])
    demos = _demos(Trajectory((0, 1), (0, 0), terminated=True))
    system = lstdq.accumulate(demos, fmap, 0.5)
    np.testing.assert_allclose(system.A, [[1.5]])
    assert system.sample_count == 2
    off = lstdq.accumulate(demos, fmap, 0.5, include_terminal=False)
    np.testing.assert_allclose(off.A, [[0.5]])


def test_gamma_zero_is_regression(rng):
    fmap = make_feature_map(rng.normal(size=(6, 3)), rng.normal(size=(6, 2, 4)))
    demos = _random_demo(rng, 6, 2)
    system = lstdq.solve(lstdq.accumulate(demos, fmap, 0.0, include_terminal=True), ridge=0.0)
    s, a = demos.state_action_arrays()
    G = fmap.value_tensor[s, a]
    np.testing.assert_allclose(system.A, G.T @ G, atol=1e-12)
    w_r = rng.normal(size=3)
    target = fmap.reward_matrix[s] @ w_r
    w_ls, *_ = np.linalg.lstsq(G, target, rcond=None)
    np.testing.assert_allclose(system.C @ w_r, w_ls, atol=1e-9)


def test_order_independent(rng):
    fmap = make_feature_map(rng.normal(size=(6, 3)), rng.normal(size=(6, 2, 4)))
    demos = _random_demo(rng, 6, 2)
    flipped = _demos(*reversed(demos.trajectories))
    s1, s2 = lstdq.accumulate(demos, fmap, 0.9), lstdq.accumulate(flipped, fmap, 0.9)
    np.testing.assert_allclose(s1.A, s2.A, atol=1e-12)
    np.testing.assert_allclose(s1.Z, s2.Z, atol=1e-12)


def test_empty_demos():
    fmap = make_feature_map([[1.0]], [[[1.0]]])
    with pytest.raises(ContractError, match="no demonstrations"):
        lstdq.accumulate(_demos(), fmap, 0.9)


def test_identity_solve():
    system = lstdq.solve(lstdq.LstdqSystem(np.eye(3), np.eye(3), 0.9, 1), ridge=0.0)
    np.testing.assert_array_equal(system.C, np.eye(3))


def test_matches_explicit_inverse(rng):
    for _ in range(10):
        A = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        Z = rng.normal(size=(6, 3))
        system = lstdq.solve(lstdq.LstdqSystem(A, Z, 0.9, 1), ridge=0.0)
        np.testing.assert_allclose(system.C, np.linalg.inv(A) @ Z, atol=1e-9, rtol=0)
        assert system.residual() <= 1e-8


def test_singular_needs_ridge(rng):
    B = rng.normal(size=(5, 3))
    A = B @ B.T
    Z = rng.normal(size=(5, 2))
    with pytest.raises(lstdq.SingularSystemError, match="ridge"):
        lstdq.solve(lstdq.LstdqSystem(A, Z, 0.9, 1), ridge=0.0)
    system = lstdq.solve(lstdq.LstdqSystem(A, Z, 0.9, 1), ridge=1e-3)
    assert system.residual() <= 1e-8


def test_default_ridge():
    system = lstdq.LstdqSystem(np.diag([2.0, 4.0]), np.eye(2), 0.9, 1)
    assert lstdq.default_ridge(system) == pytest.approx(3e-6)
    assert lstdq.solve(system).ridge == pytest.approx(3e-6)


class TestQWeights:
    def test_zero_and_identity(self, rng):
        system = lstdq.solve(lstdq.LstdqSystem(np.eye(4), np.eye(4), 0.9, 1), ridge=0.0)
        assert not lstdq.q_weights(system, np.zeros(4)).any()
        w = rng.normal(size=4)
        np.testing.assert_array_equal(lstdq.q_weights(system, w), w)

    def test_linearity(self, rng):
        A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        system = lstdq.solve(lstdq.LstdqSystem(A, rng.normal(size=(5, 3)), 0.9, 1), ridge=0.0)
        u, v = rng.normal(size=3), rng.normal(size=3)
        lhs = lstdq.q_weights(system, 2.5 * u - 0.7 * v)
        rhs = 2.5 * lstdq.q_weights(system, u) - 0.7 * lstdq.q_weights(system, v)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_dimension_mismatch(self):
        system = lstdq.solve(lstdq.LstdqSystem(np.eye(2), np.eye(2), 0.9, 1), ridge=0.0)
        with pytest.raises(ContractError):
            lstdq.q_weights(system, np.zeros(3))

    def test_unsolved(self):
        with pytest.raises(ContractError):
            lstdq.q_weights(lstdq.LstdqSystem(np.eye(2), np.eye(2), 0.9, 1), np.zeros(2))


def test_on_policy_fixed_point_small():
    P, r, pi, gamma = four_state_chain(1)
    states, actions = sample_chain(P, pi, 200_000, seed=5)
    demos = _demos(Trajectory(tuple(states.tolist()), tuple(actions.tolist()), terminated=False))
    system = lstdq.solve(lstdq.accumulate(demos, tabular_features(4, 2), gamma), ridge=0.0)
    q_hat = lstdq.q_weights(system, r).reshape(4, 2)
    assert np.max(np.abs(q_hat - exact_q(P, r, pi, gamma))) < 0.15


def test_bit_identical(rng, tmp_path):
    fmap = make_feature_map(rng.normal(size=(6, 3)), rng.normal(size=(6, 2, 4)))
    demos = _random_demo(rng, 6, 2, n_traj=50)
    a = lstdq.solve(lstdq.accumulate(demos, fmap, 0.9))
    b = lstdq.solve(lstdq.accumulate(demos, fmap, 0.9))
    assert a.A.tobytes() == b.A.tobytes() and a.Z.tobytes() == b.Z.tobytes() and a.C.tobytes() == b.C.tobytes()
    a.dump(tmp_path)
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "C.csv", delimiter=",", ndmin=2), a.C)
