"""Model-based ground truth for MJLS quadratic control.

Closed-loop second-moment propagation, mean-square stability, coupled
Lyapunov and Riccati fixed points, exact cost, accumulated state
correlation and the exact policy gradient. Everything model-free in this
package is validated against these routines.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotStabilizing
from .linalg import min_eig_sym, spectral_norm, symmetrize, tuple_norm_max
from .models import GainSchedule, mu_parameter

# Fixed-point iterations stop when the largest per-mode update falls below
# this; residual acceptance sits an order of magnitude looser.
_ITER_TOL = 1e-11
_LYAP_RESIDUAL_TOL = 1e-9
_ARE_RESIDUAL_TOL = 1e-8
_MAX_ITERS = 1_000_000


@dataclass(frozen=True)
class CouplingSolution:
    """Per-mode value matrices solving the coupled Lyapunov or Riccati equations."""

    P: np.ndarray  # (Ns, d, d), each block symmetric PSD


@dataclass(frozen=True)
class BlockCorrelation:
    """Diagonal blocks of the accumulated state correlation, one per mode."""

    X: np.ndarray  # (Ns, d, d)

    def trace(self):
        return float(np.trace(self.X, axis1=1, axis2=2).sum())


@dataclass(frozen=True)
class GradientSchedule:
    """Mode blocks of the exact cost gradient, plus the L_i factors."""

    G: np.ndarray  # (Ns, k, d)
    L: np.ndarray  # (Ns, k, d)


def coupling_expectation(P_chain, V):
    """E_i(V) = sum_j p_ij V_j for every mode i."""
    return np.einsum("ij,jab->iab", P_chain, V)


def apply_FK(model, policy, V):
    """One step of closed-loop second-moment propagation.

    output_j = sum_i p_ij Gamma_i V_i Gamma_i^T with Gamma_i = A_i - B_i K_i;
    maps PSD tuples to PSD tuples.
    """
    gam = policy.closed_loop(model)
    W = gam @ np.asarray(V, dtype=float) @ np.swapaxes(gam, 1, 2)
    return np.einsum("ij,iab->jab", model.P, W)


def mss_matrix(model, policy):
    """The (Ns d^2) x (Ns d^2) matrix acting on stacked vec(X_i)."""
    Ns, d = model.num_modes, model.state_dim
    gam = policy.closed_loop(model)
    big = np.zeros((Ns * d * d, Ns * d * d))
    for i in range(Ns):
        kron = np.kron(gam[i], gam[i])
        for j in range(Ns):
            if model.P[i, j] != 0.0:
                big[j * d * d:(j + 1) * d * d, i * d * d:(i + 1) * d * d] = \
                    model.P[i, j] * kron
    return big


def mss_spectral_radius(model, policy):
    """Spectral radius of the second-moment map; < 1 means mean-square stable."""
    return float(np.max(np.abs(np.linalg.eigvals(mss_matrix(model, policy)))))


def solve_coupled_lyapunov(model, policy):
    """Fixed point of P_i = Q_i + K_i^T R_i K_i + Gamma_i^T E_i(P) Gamma_i.

    Plain fixed-point iteration from P = Q; the stability precondition
    guarantees geometric convergence, so no stacked linear solve is formed.
    """
    if mss_spectral_radius(model, policy) >= 1.0:
        raise NotStabilizing("policy is not mean-square stabilizing")
    K = policy.K
    gam = policy.closed_loop(model)
    gamT = np.swapaxes(gam, 1, 2)
    const = model.Q + np.swapaxes(K, 1, 2) @ model.R @ K
    P = model.Q.copy()
    for _ in range(_MAX_ITERS):
        new = symmetrize(const + gamT @ coupling_expectation(model.P, P) @ gam)
        delta = tuple_norm_max(new - P)
        P = new
        if delta < _ITER_TOL:
            break
    else:
        raise NoConvergence("coupled Lyapunov iteration hit the iteration cap")
    residual = tuple_norm_max(
        P - (const + gamT @ coupling_expectation(model.P, P) @ gam)
    )
    if residual > _LYAP_RESIDUAL_TOL:
        raise NoConvergence(f"coupled Lyapunov residual {residual:.2e} too large")
    return CouplingSolution(P=P)


def exact_cost(model, policy, coupling=None):
    """Infinite-horizon expected cost trace((sum_i pi_i P_i) Sigma0)."""
    if coupling is None:
        coupling = solve_coupled_lyapunov(model, policy)
    weighted = np.einsum("i,iab->ab", model.pi0, coupling.P)
    return float(np.trace(weighted @ model.init_state.Sigma0))


def state_correlation(model, policy, horizon=None):
    """Accumulated per-mode correlation sum_t X_i(t) with X_i(0) = pi_i Sigma0.

    With no horizon the recursion runs until the trace increment dies out
    (requires mean-square stability); with horizon=l the partial sum over
    t = 0..l is returned.
    """
    if horizon is None and mss_spectral_radius(model, policy) >= 1.0:
        raise NotStabilizing("infinite-horizon correlation needs a stabilizing policy")
    X = model.pi0[:, None, None] * model.init_state.Sigma0[None, :, :]
    acc = X.copy()
    steps = horizon if horizon is not None else _MAX_ITERS
    for _ in range(steps):
        X = apply_FK(model, policy, X)
        acc += X
        if horizon is None and np.trace(X, axis1=1, axis2=2).sum() < 1e-12:
            break
    return BlockCorrelation(X=symmetrize(acc))


def finite_horizon_cost(model, policy, horizon):
    """Expected cost of the first `horizon` stages, sum_{t=0}^{horizon-1}."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    K = policy.K
    chi = state_correlation(model, policy, horizon=horizon - 1)
    weight = model.Q + np.swapaxes(K, 1, 2) @ model.R @ K
    return float(np.einsum("iab,iab->", weight, chi.X))


def exact_gradient(model, policy, coupling=None, correlation=None):
    """Exact cost gradient blocks G_i = 2 L_i(K) X_i.

    L_i(K) = (R_i + B_i^T E_i(P) B_i) K_i - B_i^T E_i(P) A_i vanishes at the
    optimal gain, so the gradient is zero exactly at the ARE solution.
    """
    if coupling is None:
        coupling = solve_coupled_lyapunov(model, policy)
    if correlation is None:
        correlation = state_correlation(model, policy)
    EP = coupling_expectation(model.P, coupling.P)
    BT = np.swapaxes(model.B, 1, 2)
    L = (model.R + BT @ EP @ model.B) @ policy.K - BT @ EP @ model.A
    G = 2.0 * L @ correlation.X
    return GradientSchedule(G=G, L=L)


def solve_coupled_are(model):
    """Riccati value iteration for the optimal gain schedule.

    Iterates the coupled Riccati map from P = Q until the largest per-mode
    update is below 1e-11, then reads the optimal gains off the fixed
    point. The returned policy is verified to be mean-square stabilizing.
    """
    A, B, Q, R = model.A, model.B, model.Q, model.R
    AT, BT = np.swapaxes(A, 1, 2), np.swapaxes(B, 1, 2)
    P = Q.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(_MAX_ITERS):
            EP = coupling_expectation(model.P, P)
            G_gain = np.linalg.solve(R + BT @ EP @ B, BT @ EP @ A)
            new = symmetrize(Q + AT @ EP @ A - AT @ EP @ B @ G_gain)
            delta = tuple_norm_max(new - P)
            P = new
            if not np.all(np.isfinite(P)):
                raise NoConvergence(
                    "Riccati iteration diverged; system may not be stabilizable"
                )
            if delta < _ITER_TOL:
                break
        else:
            raise NoConvergence("Riccati iteration hit the iteration cap")
    EP = coupling_expectation(model.P, P)
    Kstar = GainSchedule(np.linalg.solve(R + BT @ EP @ B, BT @ EP @ A))
    residual = tuple_norm_max(
        P - (Q + AT @ EP @ A - AT @ EP @ B @ np.linalg.solve(R + BT @ EP @ B, BT @ EP @ A))
    )
    if residual > _ARE_RESIDUAL_TOL:
        raise NoConvergence(f"Riccati residual {residual:.2e} too large")
    if mss_spectral_radius(model, Kstar) >= 1.0:
        raise NotStabilizing("Riccati gain is not mean-square stabilizing")
    return CouplingSolution(P=P), Kstar


def max_input_norm(model):
    """||B||_max, the largest per-mode spectral norm of B."""
    return tuple_norm_max(model.B)


def max_penalty_norm(model):
    """||R||_max over modes."""
    return tuple_norm_max(model.R)


def min_state_penalty(model):
    """Lambda_min(Q) = min_i sigma_min(Q_i)."""
    return float(min(min_eig_sym(Qi) for Qi in model.Q))


def min_input_penalty(model):
    """Lambda_min(R) over modes."""
    return float(min(min_eig_sym(Ri) for Ri in model.R))


def cost_truncation_horizon(model, policy, eps, cost=None):
    """Rollout length making the truncated cost eps-accurate.

    l >= d C(K)^2 (sum_i ||Q_i|| + ||R_i|| ||K_i||^2) / (eps mu Lambda_min(Q)^2).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    C = exact_cost(model, policy) if cost is None else cost
    weight = sum(
        spectral_norm(model.Q[i])
        + spectral_norm(model.R[i]) * spectral_norm(policy.K[i]) ** 2
        for i in range(model.num_modes)
    )
    mu = mu_parameter(model)
    lam = min_state_penalty(model)
    return int(np.ceil(model.state_dim * C * C * weight / (eps * mu * lam * lam)))


def correlation_truncation_horizon(model, policy, eps, cost=None):
    """Rollout length making the truncated correlation eps-accurate.

    l >= d C(K)^2 / (eps mu Lambda_min(Q)^2).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    C = exact_cost(model, policy) if cost is None else cost
    mu = mu_parameter(model)
    lam = min_state_penalty(model)
    return int(np.ceil(model.state_dim * C * C / (eps * mu * lam * lam)))
