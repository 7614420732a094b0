import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussruin.asymptotics import example_model, normal_survival, ruin_prob_asymptotic, variance_at
from gaussruin.errors import DomainError, HypothesisError, InsufficientDataError, ModelError
from gaussruin.models import CovarianceKernel, DiscountModel, RiskModel
from gaussruin.simulation import (
    CRUDE,
    IMPORTANCE,
    build_grid,
    conditional_law,
    conditional_ruin_time,
    estimate_ruin,
    ks_weighted,
    ruin_scan,
    sample_discounted_loss,
    simulate_ruin,
    write_samples_csv,
)

SIGMA_T = math.sqrt(0.45682932904337690)
DRIFT_T = 0.78693868057473315279


def level_for(g):
    """Reserve putting the OU example's barrier level at ``g``."""
    return g * SIGMA_T - DRIFT_T


@pytest.fixture(scope="module")
def ou():
    return example_model("ou")


@pytest.fixture(scope="module")
def ou_grid(ou):
    return build_grid(ou, 256)


def test_brownian_grid_factorizes_without_jitter():
    model = RiskModel(CovarianceKernel.brownian(), DiscountModel.zero(), c=1.0, T=1.0)
    grid = build_grid(model, 8)
    assert grid.jitter_steps == 0 and grid.jitter == 0.0
    assert grid.m == 8 and grid.times[0] == 0.0 and grid.times[-1] == 1.0
    assert not grid.live[0] and grid.live[1:].all()
    t = grid.times[1:]
    assert np.max(np.abs(grid.chol @ grid.chol.T - np.minimum.outer(t, t))) <= 1e-15


def test_grid_needs_eight_intervals():
    model = RiskModel(CovarianceKernel.brownian(), DiscountModel.zero(), c=1.0, T=1.0)
    with pytest.raises(DomainError):
        build_grid(model, 4)


def test_factor_reproduces_covariance(ou_grid):
    t = ou_grid.times
    cov = np.exp(-np.abs(t[:, None] - t[None, :]))
    dev = np.max(np.abs(ou_grid.chol @ ou_grid.chol.T - cov))
    assert dev <= 1e-8 * cov.diagonal().max()
    assert np.all(np.diff(t) > 0)


def test_non_psd_grid_fails_after_jitter_cap():
    t = np.linspace(0.0, 1.0, 3)
    bad = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.9], [0.0, 0.9, 1.0]])
    assert np.linalg.eigvalsh(bad).min() < 0
    model = RiskModel(CovarianceKernel.custom_grid(t, bad), DiscountModel.zero(), c=1.0, T=1.0)
    with pytest.raises(ModelError):
        build_grid(model, 8)


def test_build_grid_deterministic(ou):
    a, b = build_grid(ou, 64), build_grid(ou, 64)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.chol, b.chol)
    assert np.array_equal(a.tilt_direction, b.tilt_direction) and a.var_Y_T == b.var_Y_T


def test_grid_variance_of_final_loss_is_close_to_quadrature(ou_grid):
    # trapezoid error of the discrete functional is O(step^2)
    assert ou_grid.var_Y_T == pytest.approx(SIGMA_T**2, rel=1e-4)


def test_unshifted_weights_are_one(ou_grid):
    Y, w = sample_discounted_loss(ou_grid, 500, seed=1)
    assert Y.shape == (500, 257) and np.all(w == 1.0)
    assert np.all(Y[:, 0] == 0.0)


def test_shift_moves_the_mean_and_weights_integrate_to_one(ou_grid):
    shift = 0.4 * np.sin(np.pi * ou_grid.times)
    Y, w = sample_discounted_loss(ou_grid, 40_000, seed=2, shift=shift)
    expected_mean = np.concatenate([[0.0], np.cumsum(
        0.5 * np.diff(ou_grid.times) * (ou_grid.discount_weights * shift)[1:]
        + 0.5 * np.diff(ou_grid.times) * (ou_grid.discount_weights * shift)[:-1])])
    # weighted mean recovers the unshifted law's zero mean
    se = np.sqrt(np.mean((w[:, None] * Y) ** 2, axis=0) / Y.shape[0])
    assert np.all(np.abs(np.mean(w[:, None] * Y, axis=0)) <= 5 * se + 1e-15)
    se_plain = Y.std(axis=0) / math.sqrt(Y.shape[0])
    assert np.all(np.abs(Y.mean(axis=0) - expected_mean) <= 5 * se_plain + 1e-15)
    assert abs(w.mean() - 1.0) <= 5 * w.std(ddof=1) / math.sqrt(w.size)


def test_shift_must_vanish_on_degenerate_nodes():
    model = RiskModel(CovarianceKernel.brownian(), DiscountModel.zero(), c=1.0, T=1.0)
    grid = build_grid(model, 8)
    with pytest.raises(DomainError):
        sample_discounted_loss(grid, 10, seed=0, shift=np.ones(9))
    with pytest.raises(DomainError):
        sample_discounted_loss(grid, 10, seed=0, shift=np.ones(3))


def test_ruin_scan_examples(ou_grid):
    zero = np.zeros((1, ou_grid.times.size))
    out = ruin_scan(zero, ou_grid, 1.0)
    assert not out.ruined[0] and math.isnan(out.tau[0])

    u, eps = 1.0, 1e-9
    path = ou_grid.drift + u - 0.5  # below the barrier everywhere
    path[-1] = ou_grid.drift[-1] + u + eps
    out = ruin_scan(path, ou_grid, u)
    assert out.ruined[0] and out.tau[0] == 1.0 and out.rescaled[0] == 0.0
    with pytest.raises(DomainError):
        ruin_scan(path, ou_grid, -0.1)


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
@settings(max_examples=25, deadline=None)
def test_ruin_monotone_in_reserve(u1, u2):
    model = example_model("ou")
    grid = _shared_grid(model)
    Y, _ = sample_discounted_loss(grid, 300, seed=3)
    lo, hi = sorted((u1, u2))
    a, b = ruin_scan(Y, grid, lo), ruin_scan(Y, grid, hi)
    assert np.all(a.ruined[b.ruined])
    both = b.ruined
    assert np.all(a.tau[both] <= b.tau[both])


_GRID_CACHE = {}


def _shared_grid(model):
    if "ou" not in _GRID_CACHE:
        _GRID_CACHE["ou"] = build_grid(model, 64)
    return _GRID_CACHE["ou"]


def test_simulated_levels_share_random_numbers(ou, ou_grid):
    levels = [0.5, 1.0, 1.5]
    crude = simulate_ruin(ou, levels, n=5000, seed=4, method=CRUDE, grid=ou_grid)
    for a, b in zip(crude, crude[1:]):
        assert np.all(a.ruined[b.ruined])
        assert np.all(a.tau[b.ruined] <= b.tau[b.ruined])
    assert all(np.all(s.weight == 1.0) for s in crude)


def test_crude_and_importance_agree(ou, ou_grid):
    u = level_for(2.326)
    crude = estimate_ruin(ou, u, n=40_000, seed=5, method=CRUDE, grid=ou_grid)
    tilt = estimate_ruin(ou, u, n=40_000, seed=6, method=IMPORTANCE, grid=ou_grid)
    assert abs(crude.estimate - tilt.estimate) <= 3 * math.hypot(crude.stderr, tilt.stderr)
    assert crude.effective_sample_size == pytest.approx(crude.estimate * crude.replications)


@pytest.mark.parametrize("g", [2.0, 3.0, 4.5, 6.0])
def test_importance_estimate_respects_lower_bound_and_ess(ou, ou_grid, g):
    est = estimate_ruin(ou, level_for(g), n=20_000, seed=7, grid=ou_grid)
    assert est.estimate >= normal_survival(g) - 3 * est.stderr
    assert est.effective_sample_size >= 0.01 * est.replications
    assert est.effective_sample_size <= est.replications
    assert est.stderr >= 0 and est.max_weight > 0


def test_finer_grid_catches_more_ruin(ou):
    u = level_for(3.0)
    coarse = estimate_ruin(ou, u, m=64, n=40_000, seed=8)
    fine = estimate_ruin(ou, u, m=128, n=40_000, seed=8)
    assert fine.estimate >= coarse.estimate - 3 * coarse.stderr


def test_seed_determinism_and_worker_invariance(ou, ou_grid):
    a = estimate_ruin(ou, 1.0, n=3000, seed=9, grid=ou_grid, batch_size=500)
    b = estimate_ruin(ou, 1.0, n=3000, seed=9, grid=ou_grid, batch_size=500)
    c = estimate_ruin(ou, 1.0, n=3000, seed=9, grid=ou_grid, batch_size=500, workers=3)
    assert a.as_dict() == b.as_dict() == c.as_dict()
    assert estimate_ruin(ou, 1.0, n=3000, seed=10, grid=ou_grid).estimate != a.estimate


def _interior_max_model():
    t = np.linspace(0.0, 1.0, 21)
    f = np.cos(2 * np.pi * t)
    return RiskModel(CovarianceKernel.custom_grid(t, np.outer(f, f)), DiscountModel.zero(), c=1.0, T=1.0)


def test_importance_requires_hypotheses():
    model = _interior_max_model()
    with pytest.raises(HypothesisError):
        estimate_ruin(model, 0.01, m=32, n=100)
    # crude sampling has no localization requirement
    est = estimate_ruin(model, 0.01, m=32, n=2000, method=CRUDE)
    assert 0.0 <= est.estimate <= 1.0


def test_unknown_method_rejected(ou, ou_grid):
    with pytest.raises(DomainError):
        simulate_ruin(ou, [1.0], grid=ou_grid, method="splitting")


def test_conditional_ruin_time_basics(ou):
    law = conditional_ruin_time(ou, level_for(3.0), m=256, n=20_000, seed=11)
    assert np.all(law.rescaled >= 0)
    assert law.weights.sum() == pytest.approx(1.0, rel=1e-12)
    assert law.effective_sample_size >= 100
    assert law.e_T == pytest.approx(0.7208776250883191, rel=1e-9)
    assert 0.0 <= law.ks <= 1.0
    assert law.psi.estimate >= normal_survival(3.0) - 3 * law.psi.stderr


def test_conditional_mean_moves_toward_limit(ou):
    # the conditional law approaches the exponential limit only at rate 1/u
    gaps = []
    for u in (1.0, 2.0, 4.0):
        law = conditional_ruin_time(ou, u, m=1024, n=10_000, seed=12)
        gaps.append((abs(law.mean - law.e_T), law.stderr))
    for (g1, s1), (g2, s2) in zip(gaps, gaps[1:]):
        assert g2 <= g1 + 3 * math.hypot(s1, s2)


def test_conditional_law_survives_weight_underflow(ou, ou_grid):
    u = 30.0
    samples = simulate_ruin(ou, [u], n=2000, seed=13, grid=ou_grid)[0]
    assert samples.ruined.any() and np.all(samples.weight[samples.ruined] == 0.0)
    law = conditional_law(samples, 0.72, min_ess=1)
    assert law.weights.sum() == pytest.approx(1.0) and law.effective_sample_size > 1


def test_conditional_law_needs_enough_samples(ou, ou_grid):
    samples = simulate_ruin(ou, [1.0], n=500, seed=14, grid=ou_grid)[0]
    with pytest.raises(InsufficientDataError):
        conditional_law(samples, 0.72, min_ess=10_000)


def test_ks_exact_sample():
    rng = np.random.default_rng(15)
    x = rng.exponential(0.7, 10_000)
    cdf = lambda z: -np.expm1(-z / 0.7)
    assert ks_weighted(x, np.ones_like(x), cdf) <= 0.02


def test_ks_single_sample_and_scaling():
    cdf = lambda z: -np.expm1(-z)
    assert ks_weighted([0.5], [1.0], cdf) == pytest.approx(max(cdf(0.5), 1 - cdf(0.5)))
    rng = np.random.default_rng(16)
    x, w = rng.exponential(1.0, 300), rng.random(300)
    assert ks_weighted(x, w, cdf) == pytest.approx(ks_weighted(x, 37.5 * w, cdf), rel=1e-12)


def test_ks_matches_scipy_for_unit_weights():
    from scipy.stats import kstest

    x = np.random.default_rng(17).exponential(1.0, 500)
    ref = kstest(x, "expon").statistic
    assert ks_weighted(x, np.ones_like(x), lambda z: -np.expm1(-z)) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("x,w", [([], []), ([1.0], [-1.0]), ([1.0, 2.0], [0.0, 0.0]), ([1.0], [1.0, 2.0])])
def test_ks_rejects_bad_input(x, w):
    with pytest.raises((InsufficientDataError, DomainError)):
        ks_weighted(x, w, lambda z: z)


def test_sample_dump_columns(ou, ou_grid, tmp_path):
    samples = simulate_ruin(ou, [0.5], n=50, seed=18, grid=ou_grid)[0]
    path = tmp_path / "samples.csv"
    write_samples_csv(path, samples)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["path_id", "ruined", "tau", "rescaled", "weight"]
    assert len(rows) == 51
    for i, row in enumerate(rows[1:]):
        assert int(row[0]) == i
        if row[1] == "1":
            assert float(row[3]) == pytest.approx(0.25 * (1.0 - float(row[2])))
        else:
            assert row[1] == "0" and row[2] == "" and row[3] == ""
        assert float(row[4]) > 0
