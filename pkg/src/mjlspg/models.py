"""Jump-linear system description, mode-chain sampling and simulation.

State evolves as x_{t+1} = A_w x_t + B_w u_t where the operating mode w
follows a time-homogeneous Markov chain over Ns modes. Stage cost is
x^T Q_w x + u^T R_w u. Feedback policies are gain schedules, one gain per
mode, applied as u = -K_w x.

Everything here is plain float64 numpy; models and policies are immutable
once built and safe to share across workers.
"""

import json
from dataclasses import dataclass

import numpy as np

from .linalg import min_eig_sym

# State norms beyond this are treated as a blown-up rollout, not an error.
OVERFLOW_GUARD = 1e150

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class InitialStateDistribution:
    """Zero-mean Gaussian initial state with a hard norm cap.

    Samples are drawn N(0, Sigma0) and redrawn until ||x0|| <= L. The
    default cap, 10*sqrt(trace Sigma0), rejects essentially nothing, so
    the sample covariance stays Sigma0 for practical purposes.
    """

    Sigma0: np.ndarray
    L: float = None  # type: ignore[assignment]

    def __post_init__(self):
        Sigma0 = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        object.__setattr__(self, "Sigma0", Sigma0)
        if not np.allclose(Sigma0, Sigma0.T, atol=1e-12):
            raise ValueError("Sigma0 must be symmetric")
        if min_eig_sym(Sigma0) <= 0:
            raise ValueError("Sigma0 must be positive definite")
        if self.L is None:
            object.__setattr__(self, "L", 10.0 * float(np.sqrt(np.trace(Sigma0))))
        if self.L < np.sqrt(np.trace(Sigma0)) - 1e-12:
            raise ValueError("norm bound L must be at least sqrt(trace Sigma0)")
        object.__setattr__(self, "_chol", np.linalg.cholesky(Sigma0))

    @property
    def dim(self):
        return self.Sigma0.shape[0]

    def sample(self, rng, n):
        """Draw n initial states, shape (n, d)."""
        chol = getattr(self, "_chol")
        x = rng.standard_normal((n, self.dim)) @ chol.T
        bad = np.linalg.norm(x, axis=1) > self.L
        while np.any(bad):
            x[bad] = rng.standard_normal((int(bad.sum()), self.dim)) @ chol.T
            bad = np.linalg.norm(x, axis=1) > self.L
        return x


@dataclass(frozen=True)
class JumpLinearModel:
    """Full MJLS description: per-mode (A, B, Q, R), chain P, start (pi0, D).

    Shapes: A (Ns,d,d), B (Ns,d,k), Q (Ns,d,d), R (Ns,k,k), P (Ns,Ns),
    pi0 (Ns,).
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    pi0: np.ndarray
    init_state: InitialStateDistribution

    def __post_init__(self):
        for name in ("A", "B", "Q", "R", "P", "pi0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        Ns, d, k = self.A.shape[0], self.A.shape[1], self.B.shape[2]
        if self.A.shape != (Ns, d, d):
            raise ValueError(f"A must be (Ns, d, d), got {self.A.shape}")
        if self.B.shape != (Ns, d, k):
            raise ValueError(f"B must be (Ns, d, k), got {self.B.shape}")
        if self.Q.shape != (Ns, d, d) or self.R.shape != (Ns, k, k):
            raise ValueError("Q/R shapes inconsistent with A/B")
        if self.P.shape != (Ns, Ns) or self.pi0.shape != (Ns,):
            raise ValueError("P/pi0 shapes inconsistent with the mode count")
        validate_transition_matrix(self.P, tol=1e-12)
        if np.any(self.pi0 <= 0) or abs(self.pi0.sum() - 1.0) > 1e-12:
            raise ValueError("pi0 must be strictly positive and sum to 1")
        for i in range(Ns):
            if not np.allclose(self.Q[i], self.Q[i].T, atol=1e-10):
                raise ValueError(f"Q[{i}] not symmetric")
            if not np.allclose(self.R[i], self.R[i].T, atol=1e-10):
                raise ValueError(f"R[{i}] not symmetric")
            if min_eig_sym(self.Q[i]) <= 0 or min_eig_sym(self.R[i]) <= 0:
                raise ValueError(f"Q[{i}]/R[{i}] must be positive definite")
        if self.init_state.dim != d:
            raise ValueError("initial-state dimension does not match the state")

    @property
    def num_modes(self):
        return self.A.shape[0]

    @property
    def state_dim(self):
        return self.A.shape[1]

    @property
    def input_dim(self):
        return self.B.shape[2]


@dataclass(frozen=True)
class GainSchedule:
    """Feedback policy: one k-by-d gain per mode, applied as u = -K_w x."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 3:
            raise ValueError("K must have shape (Ns, k, d)")
        if not np.all(np.isfinite(K)):
            raise ValueError("gain entries must be finite")
        object.__setattr__(self, "K", K)

    @classmethod
    def zeros(cls, model):
        return cls(np.zeros((model.num_modes, model.input_dim, model.state_dim)))

    def closed_loop(self, model):
        """Gamma_i = A_i - B_i K_i for each mode, shape (Ns, d, d)."""
        return model.A - model.B @ self.K


@dataclass(frozen=True)
class Trajectory:
    """One closed-loop rollout: states x_0..x_l, modes, stage costs c_0..c_{l-1}."""

    states: np.ndarray
    modes: np.ndarray
    stage_costs: np.ndarray
    total_cost: float
    diverged: bool = False


def validate_transition_matrix(P, tol=_ROW_SUM_TOL):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < -1e-15):
        raise ValueError("transition probabilities must be nonnegative")
    err = np.max(np.abs(P.sum(axis=1) - 1.0))
    if err > tol:
        raise ValueError(f"transition rows must sum to 1 (error {err:.2e})")
    return P


def sample_mode_chain(P, pi0, horizon, rng):
    """Sample w(0..horizon-1): w(0) ~ pi0, then row w(t) of P at each step."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    P = validate_transition_matrix(P)
    pi0 = np.asarray(pi0, dtype=float)
    cum = np.cumsum(P, axis=1)
    modes = np.empty(horizon, dtype=np.int64)
    modes[0] = _draw_categorical(np.cumsum(pi0), rng.random())
    for t in range(1, horizon):
        modes[t] = _draw_categorical(cum[modes[t - 1]], rng.random())
    return modes


def _draw_categorical(cumrow, u):
    return min(int(np.searchsorted(cumrow, u, side="right")), len(cumrow) - 1)


def _draw_categorical_batch(cumrows, u):
    # cumrows (n, Ns), u (n,): index of the first cumulative bin above u
    idx = (u[:, None] >= cumrows).sum(axis=1)
    return np.minimum(idx, cumrows.shape[1] - 1)


class CostOracle:
    """Black-box access to an MJLS: states, modes and costs only.

    The wrapped system matrices are deliberately unreachable through the
    public surface; model-free code sees reset/step, the current modes and
    the bare dimensions. All methods are batched: ``reset`` starts n
    independent trajectories, ``step`` advances all of them one step.

    Trajectories whose state norm passes the overflow guard are frozen at
    zero and flagged in ``diverged``; they keep "running" so the batch
    shape never changes.
    """

    def __init__(self, model, transition=None):
        self._A = model.A.copy()
        self._B = model.B.copy()
        self._Q = model.Q.copy()
        self._R = model.R.copy()
        self._P = model.P.copy() if transition is None else \
            validate_transition_matrix(transition).copy()
        self._pi0 = model.pi0.copy()
        self._init = model.init_state
        self._cumP = np.cumsum(self._P, axis=1)
        self._cumpi = np.cumsum(self._pi0)
        self._x = None
        self._modes = None
        self._dead = None
        self._rng = None

    @property
    def num_modes(self):
        return self._A.shape[0]

    @property
    def state_dim(self):
        return self._A.shape[1]

    @property
    def input_dim(self):
        return self._B.shape[2]

    @property
    def modes(self):
        """Current operating mode of every running trajectory."""
        return None if self._modes is None else self._modes.copy()

    @property
    def states(self):
        """Current state of every running trajectory."""
        return None if self._x is None else self._x.copy()

    @property
    def diverged(self):
        return None if self._dead is None else self._dead.copy()

    def with_transition(self, P_hat):
        """A fresh oracle whose mode chain follows P_hat instead.

        The hidden dynamics and costs are unchanged; this is how runs are
        driven from an estimated chain without ever exposing the model.
        """
        oracle = CostOracle.__new__(CostOracle)
        oracle.__dict__.update(
            {k: v for k, v in self.__dict__.items() if k.startswith("_")}
        )
        oracle._P = validate_transition_matrix(P_hat).copy()
        oracle._cumP = np.cumsum(oracle._P, axis=1)
        oracle._x = oracle._modes = oracle._dead = oracle._rng = None
        return oracle

    def reset(self, rng, n=1):
        """Start n trajectories; returns (x0 (n,d), modes (n,))."""
        self._rng = rng
        self._x = self._init.sample(rng, n)
        self._modes = _draw_categorical_batch(
            np.broadcast_to(self._cumpi, (n, self.num_modes)), rng.random(n)
        )
        self._dead = np.zeros(n, dtype=bool)
        return self._x.copy(), self._modes.copy()

    def step(self, actions):
        """Apply one action per trajectory; returns (x', modes', stage costs).

        The stage cost belongs to the pre-step state and mode. Diverged
        trajectories return zero cost and stay frozen.
        """
        if self._x is None:
            raise RuntimeError("reset() must be called before step()")
        u = np.asarray(actions, dtype=float)
        if u.shape != (self._x.shape[0], self.input_dim):
            raise ValueError("actions must have shape (n, input_dim)")
        x, w = self._x, self._modes
        cost = np.einsum("nd,nde,ne->n", x, self._Q[w], x)
        cost += np.einsum("nk,nkl,nl->n", u, self._R[w], u)
        x_next = np.einsum("nde,ne->nd", self._A[w], x)
        x_next += np.einsum("ndk,nk->nd", self._B[w], u)
        blown = ~np.isfinite(x_next).all(axis=1)
        blown |= np.linalg.norm(x_next, axis=1) > OVERFLOW_GUARD
        newly_dead = blown & ~self._dead
        if np.any(newly_dead):
            self._dead = self._dead | newly_dead
        if np.any(self._dead):
            x_next[self._dead] = 0.0
            cost[self._dead] = 0.0
        w_next = _draw_categorical_batch(self._cumP[w], self._rng.random(len(w)))
        self._x, self._modes = x_next, w_next
        return x_next.copy(), w_next.copy(), cost

    def sample_mode_chain(self, length, rng):
        """Observe a mode sequence of the given length (no control applied)."""
        return sample_mode_chain(self._P, self._pi0, length, rng)


def rollout(oracle_or_model, policy, horizon, rng):
    """Simulate one closed-loop trajectory of `horizon` stage costs.

    The same path is produced whether a model or an oracle wrapping it is
    passed, given the same rng state.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    oracle = _as_oracle(oracle_or_model)
    K = policy.K
    if K.shape[1:] != (oracle.input_dim, oracle.state_dim) or \
            K.shape[0] != oracle.num_modes:
        raise ValueError("policy dimensions do not match the system")
    x, w = oracle.reset(rng, 1)
    states = np.empty((horizon + 1, oracle.state_dim))
    modes = np.empty(horizon + 1, dtype=np.int64)
    costs = np.empty(horizon)
    states[0], modes[0] = x[0], w[0]
    for t in range(horizon):
        u = -(K[w] @ x[..., None])[..., 0]
        x, w, c = oracle.step(u)
        states[t + 1], modes[t + 1], costs[t] = x[0], w[0], c[0]
    return Trajectory(
        states=states,
        modes=modes,
        stage_costs=costs,
        total_cost=float(costs.sum()),
        diverged=bool(oracle.diverged[0]),
    )


def monte_carlo_cost(oracle_or_model, policy, horizon, num_rollouts, rng):
    """Total finite-horizon cost of num_rollouts independent trajectories.

    Returns a (num_rollouts,) array; diverged trajectories come back as inf.
    """
    oracle = _as_oracle(oracle_or_model)
    K = policy.K
    x, w = oracle.reset(rng, num_rollouts)
    total = np.zeros(num_rollouts)
    for _ in range(horizon):
        u = np.einsum("nkd,nd->nk", K[w], x)
        x, w, c = oracle.step(-u)
        total += c
    total[oracle.diverged] = np.inf
    return total


def _as_oracle(oracle_or_model):
    if isinstance(oracle_or_model, JumpLinearModel):
        return CostOracle(oracle_or_model)
    return oracle_or_model


def mu_parameter(model):
    """min_i pi0_i times the smallest eigenvalue of Sigma0; always > 0."""
    return float(np.min(model.pi0) * min_eig_sym(model.init_state.Sigma0))


def generate_random_model(Ns, d, k, seed, stability_margin=0.95):
    """Random MJLS instance whose zero policy is mean-square stabilizing.

    A entries are standard normal, rescaled per mode so the largest
    singular value is at most 1; whenever the open loop still fails the
    stability margin, every A is shrunk by 0.9 and retried. Q and R are
    Gram matrices plus 0.1 I, chain rows are flat-Dirichlet, pi0 uniform,
    Sigma0 identity.
    """
    from .exact import mss_spectral_radius  # deferred: exact builds on models

    if min(Ns, d, k) < 1:
        raise ValueError("Ns, d and k must all be at least 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((Ns, d, d))
    for i in range(Ns):
        smax = np.linalg.norm(A[i], 2)
        if smax > 1.0:
            A[i] /= smax
    B = rng.standard_normal((Ns, d, k))
    MQ = rng.standard_normal((Ns, d, d))
    Q = MQ @ np.swapaxes(MQ, 1, 2) + 0.1 * np.eye(d)
    MR = rng.standard_normal((Ns, k, k))
    R = MR @ np.swapaxes(MR, 1, 2) + 0.1 * np.eye(k)
    P = rng.dirichlet(np.ones(Ns), size=Ns)
    pi0 = np.full(Ns, 1.0 / Ns)
    init = InitialStateDistribution(np.eye(d))
    model = JumpLinearModel(A=A, B=B, Q=Q, R=R, P=P, pi0=pi0, init_state=init)
    zero = GainSchedule.zeros(model)
    for _ in range(100):
        if mss_spectral_radius(model, zero) <= stability_margin:
            return model
        A = A * 0.9
        model = JumpLinearModel(A=A, B=B, Q=Q, R=R, P=P, pi0=pi0, init_state=init)
    raise RuntimeError("could not rescale A into the stability margin")


def model_to_dict(model):
    """JSON-ready dict; matrices as row-major nested lists."""
    return {
        "Ns": model.num_modes,
        "d": model.state_dim,
        "k": model.input_dim,
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "Q": model.Q.tolist(),
        "R": model.R.tolist(),
        "P": model.P.tolist(),
        "pi0": model.pi0.tolist(),
        "Sigma0": model.init_state.Sigma0.tolist(),
        "L": model.init_state.L,
    }


def model_from_dict(doc):
    init = InitialStateDistribution(np.asarray(doc["Sigma0"]), float(doc["L"]))
    model = JumpLinearModel(
        A=np.asarray(doc["A"]),
        B=np.asarray(doc["B"]),
        Q=np.asarray(doc["Q"]),
        R=np.asarray(doc["R"]),
        P=np.asarray(doc["P"]),
        pi0=np.asarray(doc["pi0"]),
        init_state=init,
    )
    expect = (doc["Ns"], doc["d"], doc["k"])
    got = (model.num_modes, model.state_dim, model.input_dim)
    if got != tuple(expect):
        raise ValueError(f"declared dims {expect} do not match matrices {got}")
    return model


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
