import numpy as np
import pytest
import scipy.linalg

from mjlspg import (
    GainSchedule,
    NoConvergence,
    NotStabilizing,
    apply_FK,
    correlation_truncation_horizon,
    cost_truncation_horizon,
    exact_cost,
    exact_gradient,
    finite_horizon_cost,
    generate_random_model,
    mss_spectral_radius,
    solve_coupled_are,
    solve_coupled_lyapunov,
    state_correlation,
)
from mjlspg.linalg import tuple_norm_1, tuple_norm_2, tuple_norm_max

from conftest import (
    correlation_tail,
    random_stabilizing_policy,
    scalar_model,
    two_mode_scalar_model,
    zeros_policy,
)

GOLDEN_PHI = (1.0 + np.sqrt(5.0)) / 2.0


def finite_difference_gradient(model, policy, step=1e-6):
    """Central differences of exact_cost over every gain entry."""
    K = policy.K
    grad = np.zeros_like(K)
    for idx in np.ndindex(K.shape):
        up, down = K.copy(), K.copy()
        up[idx] += step
        down[idx] -= step
        grad[idx] = (
            exact_cost(model, GainSchedule(up)) - exact_cost(model, GainSchedule(down))
        ) / (2.0 * step)
    return grad


class TestApplyFK:
    def test_zero_input_maps_to_zero(self, two_mode_fixture):
        out = apply_FK(two_mode_fixture, zeros_policy(two_mode_fixture),
                       np.zeros((2, 1, 1)))
        assert np.allclose(out, 0.0)

    def test_scalar_contraction(self, scalar_fixture):
        out = apply_FK(scalar_fixture, zeros_policy(scalar_fixture), [[[2.0]]])
        assert out.ravel()[0] == pytest.approx(0.5)

    def test_two_mode_hand_expansion(self, two_mode_fixture):
        out = apply_FK(two_mode_fixture, zeros_policy(two_mode_fixture),
                       np.ones((2, 1, 1)))
        assert np.allclose(out.ravel(), [0.445, 0.445])

    def test_preserves_psd(self):
        model = generate_random_model(3, 3, 2, seed=1)
        rng = np.random.default_rng(0)
        M = rng.standard_normal((3, 3, 3))
        V = M @ np.swapaxes(M, 1, 2)
        out = apply_FK(model, zeros_policy(model), V)
        for block in out:
            assert np.linalg.eigvalsh(0.5 * (block + block.T))[0] >= -1e-12


class TestMssSpectralRadius:
    def test_scalar_stable(self):
        model = scalar_model(a=0.9, b=0.0)
        assert mss_spectral_radius(model, zeros_policy(model)) == pytest.approx(0.81)

    def test_scalar_unstable(self):
        model = scalar_model(a=1.05, b=0.0)
        assert mss_spectral_radius(model, zeros_policy(model)) == pytest.approx(1.1025)

    def test_two_mode_eigenvalue(self, two_mode_fixture):
        rho = mss_spectral_radius(two_mode_fixture, zeros_policy(two_mode_fixture))
        assert rho == pytest.approx(0.445)


class TestCoupledLyapunov:
    def test_static_loop_returns_stage_weight(self):
        model = two_mode_scalar_model()
        policy = GainSchedule([[[0.5]], [[0.8]]])  # Gamma_i = 0 exactly
        sol = solve_coupled_lyapunov(model, policy)
        expected = model.Q + np.swapaxes(policy.K, 1, 2) @ model.R @ policy.K
        assert np.allclose(sol.P, expected, atol=1e-12)

    def test_scalar_closed_form(self, scalar_fixture):
        sol = solve_coupled_lyapunov(scalar_fixture, zeros_policy(scalar_fixture))
        assert sol.P.ravel()[0] == pytest.approx(4.0 / 3.0, abs=1e-9)

    def test_two_mode_golden(self, two_mode_fixture):
        sol = solve_coupled_lyapunov(two_mode_fixture, zeros_policy(two_mode_fixture))
        assert sol.P.ravel() == pytest.approx([1.4505, 2.1532], abs=1e-3)

    def test_residual_is_small(self):
        model = generate_random_model(3, 3, 2, seed=3)
        policy = random_stabilizing_policy(model, np.random.default_rng(0))
        sol = solve_coupled_lyapunov(model, policy)
        gam = policy.closed_loop(model)
        EP = np.einsum("ij,jab->iab", model.P, sol.P)
        rhs = model.Q + np.swapaxes(policy.K, 1, 2) @ model.R @ policy.K \
            + np.swapaxes(gam, 1, 2) @ EP @ gam
        assert tuple_norm_max(sol.P - rhs) <= 1e-9
        assert sol.P == pytest.approx(np.swapaxes(sol.P, 1, 2))

    def test_value_dominates_q(self):
        model = generate_random_model(2, 2, 2, seed=5)
        sol = solve_coupled_lyapunov(model, zeros_policy(model))
        for i in range(2):
            assert np.linalg.eigvalsh(sol.P[i] - model.Q[i])[0] >= -1e-10

    def test_not_stabilizing_raises(self):
        model = scalar_model(a=1.2, b=0.0)
        with pytest.raises(NotStabilizing):
            solve_coupled_lyapunov(model, zeros_policy(model))


class TestExactCost:
    def test_scalar_geometric(self, scalar_fixture):
        assert exact_cost(scalar_fixture, zeros_policy(scalar_fixture)) == \
            pytest.approx(4.0 / 3.0, abs=1e-9)

    def test_two_mode_golden(self, two_mode_fixture):
        assert exact_cost(two_mode_fixture, zeros_policy(two_mode_fixture)) == \
            pytest.approx(1.8018, abs=1e-3)

    @pytest.mark.parametrize("seed", range(20))
    def test_trace_and_inner_product_forms_agree(self, seed):
        rng = np.random.default_rng(seed)
        model = generate_random_model(1 + seed % 4, 1 + seed % 3, 1 + seed % 2,
                                      seed=seed)
        policy = random_stabilizing_policy(model, rng)
        trace_form = exact_cost(model, policy)
        chi = state_correlation(model, policy)
        weight = model.Q + np.swapaxes(policy.K, 1, 2) @ model.R @ policy.K
        inner_form = float(np.einsum("iab,iab->", weight, chi.X))
        assert inner_form == pytest.approx(trace_form, rel=1e-7)

    def test_optimal_cost_beats_perturbations(self, two_mode_fixture):
        _, K_star = solve_coupled_are(two_mode_fixture)
        c_star = exact_cost(two_mode_fixture, K_star)
        rng = np.random.default_rng(13)
        for _ in range(100):
            K = GainSchedule(K_star.K + 0.05 * rng.standard_normal(K_star.K.shape))
            if mss_spectral_radius(two_mode_fixture, K) < 1.0:
                assert exact_cost(two_mode_fixture, K) >= c_star - 1e-12


class TestStateCorrelation:
    def test_scalar_geometric(self, scalar_fixture):
        chi = state_correlation(scalar_fixture, zeros_policy(scalar_fixture))
        assert chi.X.ravel()[0] == pytest.approx(4.0 / 3.0, abs=1e-9)

    def test_horizon_one_is_two_term_sum(self, two_mode_fixture):
        policy = zeros_policy(two_mode_fixture)
        X0 = two_mode_fixture.pi0[:, None, None] * \
            two_mode_fixture.init_state.Sigma0[None]
        expected = X0 + apply_FK(two_mode_fixture, policy, X0)
        chi = state_correlation(two_mode_fixture, policy, horizon=1)
        assert np.allclose(chi.X, expected, atol=1e-14)

    def test_trace_bound_from_cost(self):
        model = generate_random_model(3, 2, 2, seed=9)
        policy = zeros_policy(model)
        chi = state_correlation(model, policy)
        lam_q = min(np.linalg.eigvalsh(Qi)[0] for Qi in model.Q)
        bound = model.state_dim * exact_cost(model, policy) / lam_q
        assert chi.trace() <= bound + 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_lemma_truncation_bound(self, seed):
        # l at the stated bound makes the truncated correlation eps-accurate;
        # the dropped tail is evaluated exactly by operator powers
        eps = 1e-3
        model = generate_random_model(1 + seed % 3, 1 + seed % 2, 1 + seed % 2,
                                      seed=100 + seed)
        policy = random_stabilizing_policy(model, np.random.default_rng(seed))
        horizon = correlation_truncation_horizon(model, policy, eps)
        tail = correlation_tail(model, policy, horizon + 1)
        assert tuple_norm_max(tail) <= eps
        assert np.trace(tail.sum(axis=0)) >= -1e-12

    def test_truncated_recursion_matches_tail_oracle(self, two_mode_fixture):
        policy = zeros_policy(two_mode_fixture)
        full = state_correlation(two_mode_fixture, policy)
        trunc = state_correlation(two_mode_fixture, policy, horizon=25)
        tail = correlation_tail(two_mode_fixture, policy, 26)
        assert np.allclose(full.X - trunc.X, tail, atol=1e-10)


class TestExactGradient:
    def test_zero_at_optimum(self, two_mode_fixture):
        _, K_star = solve_coupled_are(two_mode_fixture)
        grad = exact_gradient(two_mode_fixture, K_star)
        assert tuple_norm_max(grad.G) <= 1e-8

    def test_scalar_hand_value(self, scalar_fixture):
        grad = exact_gradient(scalar_fixture, zeros_policy(scalar_fixture))
        assert grad.G.ravel()[0] == pytest.approx(-16.0 / 9.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = generate_random_model(1 + seed % 4, 1 + seed % 3, 1 + seed % 3,
                                      seed=200 + seed)
        policy = random_stabilizing_policy(model, rng)
        grad = exact_gradient(model, policy)
        fd = finite_difference_gradient(model, policy)
        assert tuple_norm_2(grad.G - fd) <= 1e-5 * max(tuple_norm_2(fd), 1.0)

    def test_linear_in_initial_covariance(self):
        base = scalar_model(sigma0=1.0)
        doubled = scalar_model(sigma0=2.0)
        policy = zeros_policy(base)
        g1 = exact_gradient(base, policy).G
        g2 = exact_gradient(doubled, policy).G
        assert np.allclose(g2, 2.0 * g1, rtol=1e-9)


class TestCoupledARE:
    def test_golden_ratio_solution(self, golden_are_model):
        sol, K_star = solve_coupled_are(golden_are_model)
        assert sol.P.ravel()[0] == pytest.approx(GOLDEN_PHI, abs=1e-9)
        assert K_star.K.ravel()[0] == pytest.approx(GOLDEN_PHI / (1 + GOLDEN_PHI),
                                                    abs=1e-9)

    def test_uncontrolled_system_reduces_to_lyapunov(self):
        model = two_mode_scalar_model()
        open_loop = JumpLinearModelNoB(model)
        sol, K_star = solve_coupled_are(open_loop)
        assert np.allclose(K_star.K, 0.0)
        lyap = solve_coupled_lyapunov(open_loop, zeros_policy(open_loop))
        assert np.allclose(sol.P, lyap.P, atol=1e-9)

    def test_optimality_against_random_gains(self):
        model = generate_random_model(2, 2, 2, seed=14)
        _, K_star = solve_coupled_are(model)
        c_star = exact_cost(model, K_star)
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 100:
            K = GainSchedule(K_star.K + 0.2 * rng.standard_normal(K_star.K.shape))
            if mss_spectral_radius(model, K) < 1.0:
                assert exact_cost(model, K) >= c_star - 1e-10
                checked += 1

    def test_lqr_reduction_matches_dare(self):
        # single mode: coupled solver vs scipy and a test-local value iteration
        model = generate_random_model(1, 3, 2, seed=17)
        sol, K_star = solve_coupled_are(model)
        A, B, Q, R = model.A[0], model.B[0], model.Q[0], model.R[0]
        P_scipy = scipy.linalg.solve_discrete_are(A, B, Q, R)
        assert np.allclose(sol.P[0], P_scipy, atol=1e-8)
        P = Q.copy()
        for _ in range(500_000):
            K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            P_new = Q + A.T @ P @ A - A.T @ P @ B @ K
            if np.max(np.abs(P_new - P)) < 1e-13:
                break
            P = P_new
        assert np.allclose(sol.P[0], P, atol=1e-8)
        K_dare = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        assert np.allclose(K_star.K[0], K_dare, atol=1e-8)

    def test_gradient_vanishes_at_solution(self):
        model = generate_random_model(3, 2, 2, seed=23)
        _, K_star = solve_coupled_are(model)
        assert tuple_norm_max(exact_gradient(model, K_star).G) <= 1e-7

    def test_non_stabilizable_raises(self):
        model = scalar_model(a=1.5, b=0.0)
        with pytest.raises((NoConvergence, NotStabilizing)):
            solve_coupled_are(model)


def JumpLinearModelNoB(model):
    from mjlspg import InitialStateDistribution, JumpLinearModel

    return JumpLinearModel(
        A=model.A, B=np.zeros_like(model.B), Q=model.Q, R=model.R,
        P=model.P, pi0=model.pi0,
        init_state=InitialStateDistribution(model.init_state.Sigma0,
                                            model.init_state.L),
    )


class TestTruncationBounds:
    @pytest.mark.parametrize("seed", range(20))
    def test_cost_truncation_lemma(self, seed):
        # C(K) - C^(l)(K) lands in [0, eps] when l meets the stated bound;
        # the dropped stage costs are <weight, tail> over the exact tail
        eps = 1e-3
        model = generate_random_model(1 + seed % 3, 1 + seed % 2, 1 + seed % 2,
                                      seed=300 + seed)
        policy = random_stabilizing_policy(model, np.random.default_rng(seed))
        horizon = cost_truncation_horizon(model, policy, eps)
        weight = model.Q + np.swapaxes(policy.K, 1, 2) @ model.R @ policy.K
        tail_cost = float(np.einsum(
            "iab,iab->", weight, correlation_tail(model, policy, horizon)))
        assert -1e-10 <= tail_cost <= eps

    def test_finite_horizon_cost_matches_tail_oracle(self, two_mode_fixture):
        policy = zeros_policy(two_mode_fixture)
        full = exact_cost(two_mode_fixture, policy)
        horizon = 30
        trunc = finite_horizon_cost(two_mode_fixture, policy, horizon)
        weight = two_mode_fixture.Q
        tail_cost = float(np.einsum(
            "iab,iab->", weight,
            correlation_tail(two_mode_fixture, policy, horizon)))
        assert full - trunc == pytest.approx(tail_cost, abs=1e-10)


class TestPerturbationRegularity:
    """Empirical check that cost and gradient are locally Lipschitz in K.

    Difference quotients over 100 random directions stay bounded and
    shrink monotonically with the perturbation radius; all three tuple
    norms of the gradient change are recorded.
    """

    def test_difference_quotients_bounded_and_shrinking(self):
        model = generate_random_model(2, 2, 2, seed=31)
        policy = zeros_policy(model)
        base_cost = exact_cost(model, policy)
        base_grad = exact_gradient(model, policy).G
        rng = np.random.default_rng(41)
        radii = [1e-3, 1e-4, 1e-5]
        max_gap_by_radius = []
        for radius in radii:
            worst_cost_quot = 0.0
            worst_gap = 0.0
            for _ in range(100):
                direction = rng.standard_normal(policy.K.shape)
                direction *= radius / tuple_norm_max(direction)
                other = GainSchedule(policy.K + direction)
                dk = tuple_norm_max(direction)
                cost_quot = abs(exact_cost(model, other) - base_cost) / dk
                dg = exact_gradient(model, other).G - base_grad
                for norm in (tuple_norm_1, tuple_norm_2, tuple_norm_max):
                    assert np.isfinite(norm(dg))
                grad_quot = tuple_norm_max(dg) / dk
                worst_cost_quot = max(worst_cost_quot, cost_quot)
                worst_gap = max(worst_gap, tuple_norm_max(dg))
                assert cost_quot < 1e4
                assert grad_quot < 1e6
            max_gap_by_radius.append(worst_gap)
        assert max_gap_by_radius[0] >= max_gap_by_radius[1] >= max_gap_by_radius[2]
