"""
Tabulated covariances and the hypothesis gate
=============================================

A covariance sampled on a grid can be plugged in directly. The ruin
asymptotics need ``sigma`` to peak only at the horizon; a wave-shaped kernel
breaks that, and the library refuses rather than guess.
"""

import numpy as np

from gaussruin import CovarianceKernel, DiscountModel, HypothesisError, RiskModel
from gaussruin import check_hypotheses, estimate_ruin, ruin_prob_asymptotic

t = np.linspace(0.0, 1.0, 21)

###############################################################################
# A tabulated OU covariance behaves like the built-in one.
table = np.exp(-np.abs(t[:, None] - t[None, :]))
model = RiskModel(CovarianceKernel.custom_grid(t, table), DiscountModel.linear(0.5), c=1.0, T=1.0)
print(ruin_prob_asymptotic(model, 1.3).psi_approx)

###############################################################################
# ``cos(2 pi s) cos(2 pi t)`` gives ``sigma(t) = |sin(2 pi t)| / (2 pi)``,
# largest at ``t = 1/4``.
f = np.cos(2 * np.pi * t)
wave = RiskModel(CovarianceKernel.custom_grid(t, np.outer(f, f)), DiscountModel.zero(), c=1.0, T=1.0)
profile = check_hypotheses(wave, n_grid=16)
print("hypotheses hold:", profile.hypotheses_hold, profile.failed_conditions())
try:
    estimate_ruin(wave, 0.05, m=32, n=1000)
except HypothesisError as exc:
    print("importance sampling refused:", exc)

###############################################################################
# Crude sampling has no such requirement.
print(estimate_ruin(wave, 0.05, m=32, n=20_000, method="crude").estimate)
