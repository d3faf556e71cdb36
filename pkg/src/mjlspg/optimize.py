"""Gradient and natural-gradient policy optimization loops.

Four variants: exact gradients from the model ("gd", "ngd") or zeroth-order
estimates through the black-box oracle ("mf-gd", "mf-ngd"). Step sizes
resolve either to user scalars or to the convergence-theory formulas.
Every run logs a per-iteration trace; cost reporting always goes through
the exact solvers, even for model-free runs, purely as instrumentation.
"""

import csv
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DivergenceDetected, NotStabilizing, SingularCorrelation
from .estimation import (
    EstimationConfig,
    estimate_gradient_and_correlation,
    estimate_pseudo_spectral_params,
    estimate_transition_matrix,
    required_chain_length,
)
from .exact import (
    exact_cost,
    exact_gradient,
    max_input_norm,
    max_penalty_norm,
    min_state_penalty,
    mss_spectral_radius,
    solve_coupled_are,
    solve_coupled_lyapunov,
    state_correlation,
)
from .linalg import min_eig_sym, tuple_norm_2, tuple_norm_max
from .models import CostOracle, GainSchedule, JumpLinearModel, monte_carlo_cost, mu_parameter

MODEL_BASED_METHODS = ("gd", "ngd")
MODEL_FREE_METHODS = ("mf-gd", "mf-ngd")
METHODS = MODEL_BASED_METHODS + MODEL_FREE_METHODS

TRACE_COLUMNS = (
    "iteration",
    "cost",
    "normalized_gap",
    "grad_norm",
    "step_norm",
    "wall_time_s",
    "diverged_count",
)

# A run whose reporting cost passes this multiple of C(K0) is aborted.
DIVERGENCE_FACTOR = 1e3


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "ngd"
    step_size: Union[float, str] = "auto"
    max_iterations: int = 100
    stop_tolerance: float = 0.0
    estimation: Optional[EstimationConfig] = None
    transition_source: str = "known"
    chain_eps: float = 0.1
    chain_delta: float = 0.05
    chain_c: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.method in MODEL_FREE_METHODS and self.estimation is None:
            object.__setattr__(self, "estimation", EstimationConfig())
        if self.transition_source not in ("known", "estimated"):
            raise ValueError("transition_source must be 'known' or 'estimated'")
        if isinstance(self.step_size, str):
            if self.step_size != "auto":
                raise ValueError("step_size must be a positive number or 'auto'")
        elif self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class OptimizationTrace:
    """Per-iteration log of one optimization run.

    Row t carries the exact cost of the t-th iterate and the update that
    produced iterate t+1; the terminal row records the final iterate with
    zeroed update fields.
    """

    iteration: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    normalized_gap: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    wall_time_s: list = field(default_factory=list)
    diverged_count: list = field(default_factory=list)
    final_policy: Optional[GainSchedule] = None
    optimal_cost: Optional[float] = None

    def append(self, iteration, cost, gap, grad_norm, step_norm, wall, diverged):
        self.iteration.append(int(iteration))
        self.cost.append(float(cost))
        self.normalized_gap.append(float(gap))
        self.grad_norm.append(float(grad_norm))
        self.step_norm.append(float(step_norm))
        self.wall_time_s.append(float(wall))
        self.diverged_count.append(int(diverged))

    def __len__(self):
        return len(self.iteration)

    def rows(self):
        for t in range(len(self)):
            yield (
                self.iteration[t],
                self.cost[t],
                self.normalized_gap[t],
                self.grad_norm[t],
                self.step_norm[t],
                self.wall_time_s[t],
                self.diverged_count[t],
            )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows():
                writer.writerow(
                    [row[0]] + [repr(float(v)) for v in row[1:6]] + [row[6]]
                )


def gd_step(policy, grad, eta):
    """Plain gradient step K_i - eta * G_i, blockwise."""
    return GainSchedule(policy.K - eta * grad.G)


def ngd_step(policy, grad, correlation, eta):
    """Natural gradient step K_i - eta * G_i X_i^{-1}, blockwise.

    Raises SingularCorrelation naming the first mode whose correlation
    block is numerically singular.
    """
    X = correlation.X if hasattr(correlation, "X") else np.asarray(correlation)
    K_new = np.empty_like(policy.K)
    for i in range(policy.K.shape[0]):
        if min_eig_sym(0.5 * (X[i] + X[i].T)) <= 1e-10:
            raise SingularCorrelation(
                f"correlation block for mode {i} is singular", mode=i
            )
        K_new[i] = policy.K[i] - eta * np.linalg.solve(X[i].T, grad.G[i].T).T
    return GainSchedule(K_new)


def compute_gd_stepsize(model, C0):
    """Theory step size for plain gradient descent, 1 over the smoothness scale.

    With alpha = C0:
      xi = ((1 + ||B||^2) alpha / mu + ||R||) / Lambda_min(Q) - 1
      scale = 2 (||R|| + ||B||^2 (1 + (2 xi / ||B||)(alpha / mu))) alpha / Lambda_min(Q)
    The ||B|| = 0 degenerate case drops the xi term entirely.
    """
    if not np.isfinite(C0) or C0 <= 0:
        raise ValueError("C0 must be finite and positive")
    mu = mu_parameter(model)
    alpha = float(C0)
    b = max_input_norm(model)
    r = max_penalty_norm(model)
    lam_q = min_state_penalty(model)
    if b == 0.0:
        scale = 2.0 * r * alpha / lam_q
    else:
        xi = ((1.0 + b * b) / mu * alpha + r) / lam_q - 1.0
        scale = 2.0 * (r + b * b * (1.0 + (2.0 * xi / b) * (alpha / mu))) * alpha / lam_q
    return 1.0 / scale


def compute_ngd_stepsize(model, C0):
    """Theory step size for natural gradient descent.

    eta = 1 / (2 (||R|| + ||B||^2 C0 / mu)).
    """
    if not np.isfinite(C0) or C0 <= 0:
        raise ValueError("C0 must be finite and positive")
    mu = mu_parameter(model)
    b = max_input_norm(model)
    r = max_penalty_norm(model)
    return 1.0 / (2.0 * (r + b * b * C0 / mu))


def resolve_step_size(model, cfg, C0):
    if cfg.step_size != "auto":
        return float(cfg.step_size)
    if cfg.method in ("gd", "mf-gd"):
        return compute_gd_stepsize(model, C0)
    return compute_ngd_stepsize(model, C0)


def optimize(model, K0, cfg):
    """Run one policy-optimization loop and return its trace.

    Model-based methods check that K0 stabilizes up front and use exact
    gradients; model-free methods talk to a CostOracle built over the
    model, optionally after an initial transition-estimation phase that
    redirects all rollouts through the estimated chain. The loop stops
    when the per-step policy change drops below stop_tolerance or after
    max_iterations updates.
    """
    if not isinstance(model, JumpLinearModel):
        raise TypeError(
            "optimize needs the model itself: reporting uses the exact solvers; "
            "wrap-your-own-oracle runs are not supported"
        )
    model_free = cfg.method in MODEL_FREE_METHODS
    _, K_star = solve_coupled_are(model)
    C_star = exact_cost(model, K_star)

    trace = OptimizationTrace()
    trace.optimal_cost = C_star

    oracle = None
    seeds = None
    if model_free:
        est = cfg.estimation
        seeds = np.random.SeedSequence(est.seed)
        chain_rng, mc_rng, *_ = [np.random.default_rng(s) for s in seeds.spawn(2)]
        oracle = CostOracle(model)
        if cfg.transition_source == "estimated":
            pi_star, gamma_ps, mu_norm = estimate_pseudo_spectral_params(
                model.P, mu=model.pi0
            )
            n = required_chain_length(
                cfg.chain_eps, cfg.chain_delta, model.num_modes,
                pi_star, gamma_ps, mu_norm, cfg.chain_c,
            )
            chain = oracle.sample_mode_chain(n, chain_rng)
            P_hat = estimate_transition_matrix(chain, model.num_modes).P_hat
            oracle = oracle.with_transition(P_hat)
        if cfg.step_size == "auto":
            mc = monte_carlo_cost(
                oracle, K0, est.rollout_length, est.num_trajectories, mc_rng
            )
            finite = mc[np.isfinite(mc)]
            if finite.size == 0:
                raise NotStabilizing("every calibration rollout diverged at K0")
            C0_for_eta = float(finite.mean())
        else:
            C0_for_eta = None
        C0_guard = exact_cost(model, K0)  # instrumentation only
    else:
        if mss_spectral_radius(model, K0) >= 1.0:
            raise NotStabilizing("K0 is not mean-square stabilizing")
        C0_guard = exact_cost(model, K0)
        C0_for_eta = C0_guard
    eta = resolve_step_size(model, cfg, C0_for_eta) if cfg.step_size == "auto" \
        else float(cfg.step_size)

    policy = K0
    for t in range(cfg.max_iterations):
        tic = time.perf_counter()
        cost_t = _reporting_cost(model, policy, trace)
        gap_t = (cost_t - C_star) / C_star
        if cost_t > DIVERGENCE_FACTOR * C0_guard:
            raise DivergenceDetected(
                f"cost {cost_t:.3e} exceeded {DIVERGENCE_FACTOR:.0e} x C(K0)",
                trace=trace,
            )
        if model_free:
            rng_t = np.random.default_rng(seeds.spawn(1)[0])
            est_out = estimate_gradient_and_correlation(
                oracle, policy, cfg.estimation, rng=rng_t
            )
            grad = _EstimatedGradient(G=est_out.grad)
            corr = _EstimatedCorrelation(X=est_out.correlation)
            diverged = est_out.diverged_count
        else:
            coupling = solve_coupled_lyapunov(model, policy)
            corr = state_correlation(model, policy)
            grad = exact_gradient(model, policy, coupling=coupling, correlation=corr)
            diverged = 0
        if cfg.method in ("gd", "mf-gd"):
            new_policy = gd_step(policy, grad, eta)
        else:
            new_policy = ngd_step(policy, grad, corr, eta)
        step_norm = tuple_norm_max(new_policy.K - policy.K)
        trace.append(
            t, cost_t, gap_t, tuple_norm_2(grad.G), step_norm,
            time.perf_counter() - tic, diverged,
        )
        policy = new_policy
        if step_norm < cfg.stop_tolerance:
            break

    final_cost = _reporting_cost(model, policy, trace)
    final_iter = trace.iteration[-1] + 1 if trace.iteration else 0
    trace.append(
        final_iter, final_cost, (final_cost - C_star) / C_star, 0.0, 0.0, 0.0, 0,
    )
    trace.final_policy = policy
    return trace


@dataclass(frozen=True)
class _EstimatedGradient:
    G: np.ndarray


@dataclass(frozen=True)
class _EstimatedCorrelation:
    X: np.ndarray


def _reporting_cost(model, policy, trace):
    try:
        return exact_cost(model, policy)
    except NotStabilizing:
        raise DivergenceDetected(
            "iterate left the mean-square stability region", trace=trace
        ) from None
