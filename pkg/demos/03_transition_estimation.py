# Estimating the mode chain from one observed trajectory.
#
# The sample-size formula turns a target accuracy and confidence into a
# chain length; a short coverage study checks the guarantee empirically.

import numpy as np

from mjlspg import (
    estimate_pseudo_spectral_params,
    estimate_transition_matrix,
    required_chain_length,
    sample_mode_chain,
)

P = np.array([[0.7, 0.3], [0.4, 0.6]])
pi0 = np.array([0.5, 0.5])

# ## Chain quantities and the required length

pi_star, gamma_ps, mu_norm = estimate_pseudo_spectral_params(P, mu=pi0)
print(f"min stationary probability {pi_star:.4f}, pseudo-spectral gap "
      f"{gamma_ps:.4f}, start-distribution norm {mu_norm:.4f}")

n = required_chain_length(eps=0.1, delta=0.05, d=2, pi_star=pi_star,
                          gamma_ps=gamma_ps, mu_over_pi_norm=mu_norm)
print(f"samples needed for ||P - P_hat||_inf < 0.1 w.p. 0.95: n = {n}")

# ## One estimate

rng = np.random.default_rng(0)
chain = sample_mode_chain(P, pi0, n, rng)
est = estimate_transition_matrix(chain, num_modes=2)
print("\nvisit counts:", est.N)
print("estimated transition matrix:\n", np.round(est.P_hat, 4))
print("row-sum error:", np.abs(P - est.P_hat).sum(axis=1).max())

# ## Coverage over 100 seeded chains

hits = 0
for trial in range(100):
    rng = np.random.default_rng((1234, trial))
    chain = sample_mode_chain(P, pi0, n, rng)
    err = np.abs(P - estimate_transition_matrix(chain, 2).P_hat).sum(axis=1).max()
    hits += err < 0.1
print(f"\ncoverage: {hits}/100 trials within the target accuracy")
