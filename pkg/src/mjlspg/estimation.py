"""Everything learnable from black-box access alone.

Zeroth-order gradient and correlation estimation from sphere-perturbed
rollouts, plus Markov transition-matrix estimation with its sample-size
formula. This module touches the simulator only through the CostOracle
surface; the system matrices stay out of reach.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonErgodic

# Refuse estimator calls whose per-trajectory correlation buckets would not
# fit comfortably in memory; desk scale only.
_MAX_BUCKET_ELEMENTS = 200_000_000


@dataclass(frozen=True)
class EstimationConfig:
    """Knobs for one gradient/correlation estimation call.

    perturbation_dim is the ambient dimension of the perturbation sphere
    (k*d when left unset); it multiplies the smoothed-gradient scale
    factor perturbation_dim / r^2.
    """

    num_trajectories: int = 500
    rollout_length: int = 150
    smoothing_radius: float = 0.05
    perturbation_dim: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.num_trajectories < 1 or self.rollout_length < 1:
            raise ValueError("num_trajectories and rollout_length must be >= 1")
        if self.smoothing_radius <= 0:
            raise ValueError("smoothing_radius must be positive")


@dataclass(frozen=True)
class GradientEstimate:
    """Zeroth-order estimates of the gradient blocks and correlation blocks."""

    grad: np.ndarray          # (Ns, k, d)
    correlation: np.ndarray   # (Ns, d, d)
    diverged_count: int = 0


@dataclass(frozen=True)
class ChainEstimate:
    """Empirical transition matrix with its visit and transition counts."""

    P_hat: np.ndarray   # (Ns, Ns), rows sum to 1
    N: np.ndarray       # (Ns,) visits to each mode over t = 1..n-1
    N_pair: np.ndarray  # (Ns, Ns) observed i -> j transitions
    n_used: int


def sample_perturbation(rows, cols, radius, rng):
    """One matrix drawn uniformly from the Frobenius sphere of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    u = rng.standard_normal((rows, cols))
    norm = np.linalg.norm(u)
    while norm == 0.0:  # probability zero, but keep the contract exact
        u = rng.standard_normal((rows, cols))
        norm = np.linalg.norm(u)
    return u * (radius / norm)


def _sample_perturbation_batch(m, rows, cols, radius, rng):
    u = rng.standard_normal((m, rows, cols))
    norms = np.sqrt(np.einsum("mkd,mkd->m", u, u))
    norms[norms == 0.0] = 1.0
    return u * (radius / norms)[:, None, None]


def estimate_gradient_and_correlation(oracle, policy, cfg, rng=None):
    """One-point sphere-smoothed gradient and correlation estimate.

    Per trajectory: draw one perturbation U with ||U||_F = r, add it to
    every mode's gain, roll the perturbed policy out for rollout_length
    steps, and bucket U * (stage cost) / r^2 and x x^T by the mode active
    when each stage cost was incurred. Bucket sums average over
    trajectories; the gradient picks up the perturbation_dim scale.

    Trajectories that hit the overflow guard are dropped from both
    averages and reported in diverged_count.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    m, l, r = cfg.num_trajectories, cfg.rollout_length, cfg.smoothing_radius
    Ns, d, k = oracle.num_modes, oracle.state_dim, oracle.input_dim
    dim = cfg.perturbation_dim if cfg.perturbation_dim is not None else k * d
    if m * Ns * d * d > _MAX_BUCKET_ELEMENTS:
        raise ValueError("estimation batch too large; shrink num_trajectories")

    K = policy.K
    if K.shape != (Ns, k, d):
        raise ValueError("policy dimensions do not match the oracle")
    U = _sample_perturbation_batch(m, k, d, r, rng)
    cost_buckets = np.zeros((m, Ns))
    corr_buckets = np.zeros((m, Ns, d, d))
    rows = np.arange(m)

    x, w = oracle.reset(rng, m)
    for _ in range(l):
        u = -(np.einsum("mkd,md->mk", K[w], x) + np.einsum("mkd,md->mk", U, x))
        corr_buckets[rows, w] += x[:, :, None] * x[:, None, :]
        x_next, w_next, c = oracle.step(u)
        cost_buckets[rows, w] += c
        x, w = x_next, w_next

    dead = oracle.diverged
    ok = ~dead
    n_ok = max(int(ok.sum()), 1)
    weights = cost_buckets * ok[:, None]
    grad = np.einsum("mp,mkd->pkd", weights, U) * (dim / (n_ok * r * r))
    corr = corr_buckets[ok].sum(axis=0) / n_ok
    return GradientEstimate(
        grad=grad,
        correlation=corr,
        diverged_count=int(dead.sum()),
    )


def estimate_transition_matrix(samples, num_modes):
    """Empirical transition matrix from an observed mode sequence.

    Visits and transitions are counted over positions 1..n-1 of the
    sequence; rows of modes never observed fall back to uniform.
    """
    om = np.asarray(samples, dtype=np.int64)
    n = om.shape[0]
    if n < 2:
        raise ValueError("need at least two samples to count a transition")
    if om.min() < 0 or om.max() >= num_modes:
        raise ValueError("mode indices out of range")
    src, dst = om[:-1], om[1:]
    N_pair = np.zeros((num_modes, num_modes), dtype=np.int64)
    np.add.at(N_pair, (src, dst), 1)
    N = N_pair.sum(axis=1)
    P_hat = np.full((num_modes, num_modes), 1.0 / num_modes)
    seen = N > 0
    P_hat[seen] = N_pair[seen] / N[seen, None]
    return ChainEstimate(P_hat=P_hat, N=N, N_pair=N_pair, n_used=n)


def required_chain_length(eps, delta, d, pi_star, gamma_ps, mu_over_pi_norm, c=1.0):
    """Chain length guaranteeing ||P - P_hat||_inf < eps w.p. >= 1 - delta.

    n1 = max{d, ln(1/(eps delta))} / (eps^2 pi_star)
    n2 = ln(d * mu_over_pi_norm / delta) / (gamma_ps pi_star)
    n  = ceil(c * max{n1, n2})
    """
    if not 0.0 < eps < 2.0:
        raise ValueError("eps must lie in (0, 2)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not 0.0 < pi_star <= 1.0:
        raise ValueError("pi_star must lie in (0, 1]")
    if gamma_ps <= 0:
        raise ValueError("gamma_ps must be positive")
    if d < 1 or mu_over_pi_norm < 1.0 or c <= 0:
        raise ValueError("d >= 1, mu_over_pi_norm >= 1 and c > 0 required")
    n1 = max(float(d), math.log(1.0 / (eps * delta))) / (eps * eps * pi_star)
    n2 = math.log(d * mu_over_pi_norm / delta) / (gamma_ps * pi_star)
    return max(int(math.ceil(c * max(n1, n2))), 1)


def estimate_pseudo_spectral_params(P, mu=None, k_cap=50):
    """Chain quantities feeding the sample-size formula.

    Returns (pi_star, gamma_ps, mu_over_pi_norm) for an ergodic chain:
    the minimum stationary probability, the pseudo-spectral gap
    max_k gap((M*)^k M^k)/k over k <= k_cap, and the pi-weighted norm of
    the start distribution (1.0 when mu is the stationary distribution).
    """
    P = np.asarray(P, dtype=float)
    eigvals, eigvecs = np.linalg.eig(P.T)
    on_circle = np.abs(np.abs(eigvals) - 1.0) < 1e-9
    if int(on_circle.sum()) != 1:
        raise NonErgodic("transition matrix has no unique limiting distribution")
    lead = int(np.argmax(np.abs(eigvals)))
    pi = np.real(eigvecs[:, lead])
    pi = np.abs(pi) / np.abs(pi).sum()
    pi_star = float(pi.min())

    reversal = (pi[None, :] * P.T) / pi[:, None]
    gamma_ps = 0.0
    Mk = np.eye(P.shape[0])
    Rk = np.eye(P.shape[0])
    for k in range(1, k_cap + 1):
        Mk = Mk @ P
        Rk = Rk @ reversal
        spec = np.sort(np.real(np.linalg.eigvals(Rk @ Mk)))[::-1]
        gap = (1.0 - spec[1]) / k if len(spec) > 1 else 1.0 / k
        gamma_ps = max(gamma_ps, gap)

    if mu is None:
        norm = 1.0
    else:
        mu = np.asarray(mu, dtype=float)
        norm = float(np.sqrt(np.sum(mu * mu / pi)))
    return pi_star, gamma_ps, max(norm, 1.0)
