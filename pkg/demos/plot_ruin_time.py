"""
How late does ruin happen
=========================

Given ruin before ``T``, ``u^2 (T - tau)`` settles on an exponential law with
mean ``e_T``. The approach is slow, of order ``1/u``, which the KS distance and
the weighted mean make visible.
"""

from gaussruin import conditional_ruin_time, example_model

model = example_model("ou", lam=1.0, delta=0.5)

for u in (1.0, 2.0, 4.0):
    law = conditional_ruin_time(model, u, m=2048, n=10_000, seed=3)
    print(f"u={u:4.1f}  mean={law.mean:.3f} +- {law.stderr:.3f}  (e_T={law.e_T:.3f})  "
          f"KS={law.ks:.3f}  ESS={law.effective_sample_size:.0f}")

###############################################################################
# Doubling ``u`` again needs a finer grid, since the rescaled times live on a
# lattice of spacing ``u^2 T / m``.
