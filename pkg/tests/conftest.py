import numpy as np
import pytest

from mjlspg import GainSchedule, InitialStateDistribution, JumpLinearModel


def scalar_model(a=0.5, b=1.0, q=1.0, r=1.0, sigma0=1.0):
    """Single-mode scalar system; closed forms are easy to write down."""
    return JumpLinearModel(
        A=[[[a]]], B=[[[b]]], Q=[[[q]]], R=[[[r]]],
        P=[[1.0]], pi0=[1.0],
        init_state=InitialStateDistribution([[sigma0]]),
    )


def two_mode_scalar_model():
    """Two scalar modes with a flat chain; the hand-solved coupling fixture."""
    return JumpLinearModel(
        A=[[[0.5]], [[0.8]]], B=[[[1.0]], [[1.0]]],
        Q=[[[1.0]], [[1.0]]], R=[[[1.0]], [[1.0]]],
        P=[[0.5, 0.5], [0.5, 0.5]], pi0=[0.5, 0.5],
        init_state=InitialStateDistribution([[1.0]]),
    )


@pytest.fixture
def scalar_fixture():
    return scalar_model()


@pytest.fixture
def golden_are_model():
    return scalar_model(a=1.0, b=1.0, q=1.0, r=1.0)


@pytest.fixture
def two_mode_fixture():
    return two_mode_scalar_model()


def zeros_policy(model):
    return GainSchedule.zeros(model)


def random_stabilizing_policy(model, rng, scale=0.1):
    """Small random gain kept inside the stability region by shrinking."""
    from mjlspg import mss_spectral_radius

    K = scale * rng.standard_normal(
        (model.num_modes, model.input_dim, model.state_dim)
    )
    policy = GainSchedule(K)
    while mss_spectral_radius(model, policy) >= 1.0 - 1e-6:
        K = 0.5 * K
        policy = GainSchedule(K)
    return policy


def correlation_tail(model, policy, start):
    """sum_{t >= start} X(t), via operator powers of the second-moment map.

    Independent of the fixed-point recursion in the library: the stacked
    linear map is exponentiated by squaring, so horizons in the millions
    from the truncation bounds stay cheap to evaluate exactly.
    """
    from mjlspg.exact import mss_matrix

    Ns, d = model.num_modes, model.state_dim
    M = mss_matrix(model, policy)
    x0 = (model.pi0[:, None, None] * model.init_state.Sigma0[None]).reshape(-1)
    lead = np.linalg.matrix_power(M, start) @ x0
    tail = np.linalg.solve(np.eye(M.shape[0]) - M, lead)
    return tail.reshape(Ns, d, d)
