# Model-based analysis of jump-linear quadratic control.
#
# Two hand-checkable systems: a single-mode scalar plant whose value
# function has a closed form, and a two-mode plant whose coupled value
# recursion can be solved on paper.

import numpy as np

from mjlspg import (
    GainSchedule,
    InitialStateDistribution,
    JumpLinearModel,
    exact_cost,
    exact_gradient,
    mss_spectral_radius,
    solve_coupled_are,
    solve_coupled_lyapunov,
    state_correlation,
)

# ## A scalar plant: x' = 0.5 x + u, unit costs

scalar = JumpLinearModel(
    A=[[[0.5]]], B=[[[1.0]]], Q=[[[1.0]]], R=[[[1.0]]],
    P=[[1.0]], pi0=[1.0],
    init_state=InitialStateDistribution([[1.0]]),
)
zero = GainSchedule.zeros(scalar)

# With u = 0 the state decays by half each step, so the value is the
# geometric series 1 + 1/4 + 1/16 + ... = 4/3.
print("cost at K=0:", exact_cost(scalar, zero), "(expect 4/3)")
print("accumulated correlation:", state_correlation(scalar, zero).X.ravel())
print("gradient at K=0:", exact_gradient(scalar, zero).G.ravel(), "(expect -16/9)")

# ## Optimal gains via the coupled Riccati recursion

# For x' = x + u with unit costs, the optimal value solves p^2 = 1 + p:
# the golden ratio appears.
golden = JumpLinearModel(
    A=[[[1.0]]], B=[[[1.0]]], Q=[[[1.0]]], R=[[[1.0]]],
    P=[[1.0]], pi0=[1.0],
    init_state=InitialStateDistribution([[1.0]]),
)
sol, K_star = solve_coupled_are(golden)
print("\nP* =", sol.P.ravel(), "(expect 1.61803...)")
print("K* =", K_star.K.ravel(), "(expect 0.61803...)")

# ## Two coupled modes

two_mode = JumpLinearModel(
    A=[[[0.5]], [[0.8]]], B=[[[1.0]], [[1.0]]],
    Q=[[[1.0]], [[1.0]]], R=[[[1.0]], [[1.0]]],
    P=[[0.5, 0.5], [0.5, 0.5]], pi0=[0.5, 0.5],
    init_state=InitialStateDistribution([[1.0]]),
)
zero2 = GainSchedule.zeros(two_mode)

# Mean-square stability of the uncontrolled loop: the second-moment map
# must have spectral radius below one.
print("\nsecond-moment spectral radius:", mss_spectral_radius(two_mode, zero2))

# The per-mode value couples through the chain; solving the two fixed-point
# equations by hand gives (1.4505, 2.1532).
lyap = solve_coupled_lyapunov(two_mode, zero2)
print("per-mode values:", lyap.P.ravel())
print("expected cost:", exact_cost(two_mode, zero2), "(expect 1.8018)")

_, K_opt = solve_coupled_are(two_mode)
print("optimal gains per mode:", K_opt.K.ravel())
print("optimal cost:", exact_cost(two_mode, K_opt))
