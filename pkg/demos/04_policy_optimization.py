# Policy optimization four ways on one random system.
#
# Exact gradient descent and natural gradient descent use the model;
# their model-free twins see only the rollout oracle. Step sizes for the
# exact methods come from the convergence-theory formulas.

import numpy as np

from mjlspg import (
    EstimationConfig,
    GainSchedule,
    OptimizerConfig,
    exact_cost,
    generate_random_model,
    optimize,
    solve_coupled_are,
)
from mjlspg.harness import default_mf_step

model = generate_random_model(2, 2, 2, seed=4)
K0 = GainSchedule.zeros(model)
_, K_star = solve_coupled_are(model)
print(f"cost at K0 = {exact_cost(model, K0):.3f}, "
      f"optimal cost = {exact_cost(model, K_star):.3f}")

# ## Exact-gradient methods

for method in ("gd", "ngd"):
    trace = optimize(model, K0, OptimizerConfig(method=method, max_iterations=100))
    print(f"{method:6s}: gap {trace.normalized_gap[0]:.3f} -> "
          f"{trace.normalized_gap[-1]:.2e} in {trace.iteration[-1]} iterations")

# ## Model-free methods
#
# The zeroth-order estimates are noisy at desk-scale batch sizes, so the
# model-free twins take a deliberately small fixed step: they inch along
# the same descent direction rather than matching the exact methods.

est = EstimationConfig(num_trajectories=500, rollout_length=150,
                       smoothing_radius=0.05, seed=0)
eta = default_mf_step((2, 2, 2))
for method in ("mf-gd", "mf-ngd"):
    trace = optimize(model, K0, OptimizerConfig(
        method=method, step_size=eta, max_iterations=100, estimation=est))
    print(f"{method:6s}: gap {trace.normalized_gap[0]:.3f} -> "
          f"{trace.normalized_gap[-1]:.3f} in {trace.iteration[-1]} iterations")

# ## Driving rollouts from an estimated chain instead

trace = optimize(model, K0, OptimizerConfig(
    method="mf-ngd", step_size=eta, max_iterations=50, estimation=est,
    transition_source="estimated"))
print(f"mf-ngd with estimated transitions: final gap "
      f"{trace.normalized_gap[-1]:.3f}")
