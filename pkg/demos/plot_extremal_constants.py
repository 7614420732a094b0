"""
Pickands and Piterbarg constants by simulation
==============================================

Both constants are expectations of the exponential of a supremum of
fractional Brownian motion with drift. Two cases have known values, which
expose the finite-horizon and grid biases.
"""

import math

from gaussruin.tail_regimes import pickands_estimate, piterbarg_estimate, richardson_step

###############################################################################
# For alpha = 2 the path is ``t N`` and the horizon-``T`` value is
# ``1/sqrt(pi) + 1/T``.
h2 = pickands_estimate(2.0, horizon=10.0, replications=2000, seed=1)
print(f"H_2 at T=10: {h2.value:.4f} +- {h2.stderr:.4f}  exact {1 / math.sqrt(math.pi) + 0.1:.4f}")

###############################################################################
# Brownian case: halving the grid step and extrapolating removes most of
# the grid bias; what is left is the ``2/T`` horizon term.
coarse = pickands_estimate(1.0, horizon=10.0, grid_step=0.02, replications=2000, seed=2)
fine = pickands_estimate(1.0, horizon=10.0, grid_step=0.01, replications=2000, seed=3)
limit = richardson_step(coarse, fine)
print(f"H_1 at T=10: h=0.02 {coarse.value:.3f}, h=0.01 {fine.value:.3f}, "
      f"extrapolated {limit.value:.3f} +- {limit.stderr:.3f}")

###############################################################################
# A heavy penalty pins the supremum at 0.
p = piterbarg_estimate(2.0, 1e6, replications=2000, seed=4)
print(f"P_2 with b=1e6: {p.value:.4f} +- {p.stderr:.4f}")
