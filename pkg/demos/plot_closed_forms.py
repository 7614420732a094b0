"""
Variance of the discounted loss against the closed forms
=========================================================

Three reference models have a closed-form variance profile. Here the
nested quadrature is put side by side with them, then the slope of
``sigma`` at the horizon gives the mean of the rescaled ruin time.
"""

import numpy as np

from gaussruin import closed_form_oracle, example_model, sigma_prime_at, variance_at

###############################################################################
# OU losses with interest rate 0.5, Slepian losses with rate 1, and Brownian
# losses with the quadratic discount.
cases = [("ou", {"lam": 1.0, "delta": 0.5}), ("slepian", {"delta": 1.0}), ("bm_quadratic", {})]

for name, params in cases:
    model = example_model(name, **params)
    ts = np.linspace(0.1, 1.0, 10)
    numeric = np.array([variance_at(model, t) for t in ts])
    exact = np.array([closed_form_oracle(name, t, **params).sigma2 for t in ts])
    print(f"{name:>13}: max relative gap {np.max(np.abs(numeric / exact - 1)):.1e}")

###############################################################################
# The mean of ``u^2 (T - tau)`` given ruin is ``sigma^3 / sigma'`` at ``T``.
for name, params in cases:
    model = example_model(name, **params)
    sigma = np.sqrt(variance_at(model, 1.0))
    e_T = sigma**3 / sigma_prime_at(model, 1.0, sigma=sigma)
    print(f"{name:>13}: e_T = {e_T:.6f}  closed form {closed_form_oracle(name, 1.0, T=1.0, **params).e_T:.6f}")
