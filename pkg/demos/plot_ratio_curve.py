"""
Simulated ruin probability over the asymptotic formula
=======================================================

For OU losses the importance-sampled ruin probability is divided by
``Psi(g_u(T))`` on a range of reserves. The ratio should drift toward 1.
"""

import numpy as np
from scipy.special import ndtri

from gaussruin import example_model, ruin_prob_asymptotic, simulate_ruin
from gaussruin.simulation import summarize

model = example_model("ou", lam=1.0, delta=0.5)
base = ruin_prob_asymptotic(model, 0.0)

###############################################################################
# Pick reserves so the formula runs from 1e-2 down to 1e-6.
targets = np.logspace(-2, -6, 5)
levels = -ndtri(targets) * base.sigma_T - model.c * base.discounted_time_T

###############################################################################
# One pass of shared random numbers serves every level; each gets its own
# tilt toward the barrier at the horizon.
runs = simulate_ruin(model, levels, m=1024, n=20_000, seed=7)
for u, samples in zip(levels, runs):
    est = summarize(samples, 7, "importance", 1024)
    psi = ruin_prob_asymptotic(model, u).psi_approx
    print(f"u={u:6.3f}  estimate={est.estimate:.3e}  Psi(g)={psi:.3e}  "
          f"ratio={est.estimate / psi:.3f} +- {est.stderr / psi:.3f}")
