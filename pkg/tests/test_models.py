import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussruin.asymptotics import covariance_positive_on_grid
from gaussruin.errors import DomainError, NumericError
from gaussruin.models import (
    CovarianceKernel,
    DiscountModel,
    RiskModel,
    discount_eval,
    discounted_time,
    kernel_eval,
)

times = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def test_kernel_eval_examples():
    assert kernel_eval(CovarianceKernel.ou(1.0), 0.3, 0.3) == 1.0
    assert kernel_eval(CovarianceKernel.slepian(), 0.0, 2.0) == 0.0
    assert kernel_eval(CovarianceKernel.brownian(), 1.0, 2.0) == 1.0
    # exp(-1)
    assert kernel_eval(CovarianceKernel.ou(2.0), 0.0, 0.5) == pytest.approx(0.36787944117144233, rel=1e-15)


def test_kernel_eval_rejects_out_of_range():
    with pytest.raises(DomainError):
        kernel_eval(CovarianceKernel.ou(1.0), -0.1, 0.2)
    with pytest.raises(DomainError):
        kernel_eval(CovarianceKernel.ou(1.0), 0.1, 1.5, horizon=1.0)
    grid = CovarianceKernel.custom_grid([0.0, 0.5, 1.0], np.eye(3))
    with pytest.raises(DomainError):
        kernel_eval(grid, 0.2, 1.2)


def test_custom_grid_is_bilinear():
    t = np.array([0.0, 1.0])
    k = CovarianceKernel.custom_grid(t, [[1.0, 0.5], [0.5, 2.0]])
    # bilinear at the cell centre averages the four corners
    assert kernel_eval(k, 0.5, 0.5) == pytest.approx(1.0)
    assert kernel_eval(k, 0.0, 1.0) == pytest.approx(0.5)
    assert kernel_eval(k, 1.0, 0.25) == pytest.approx(0.5 + 0.25 * 1.5)


@pytest.mark.parametrize("matrix", [
    [[1.0, 0.2], [0.3, 1.0]],
    [[-1.0, 0.0], [0.0, 1.0]],
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
])
def test_custom_grid_validation(matrix):
    with pytest.raises(DomainError):
        CovarianceKernel.custom_grid([0.0, 1.0], matrix)


_rng = np.random.default_rng(7)
_A = _rng.standard_normal((6, 6))
CUSTOM = CovarianceKernel.custom_grid(np.linspace(0, 1, 6), _A @ _A.T)


@pytest.mark.parametrize("kernel", [
    CovarianceKernel.ou(1.7), CovarianceKernel.slepian(), CovarianceKernel.brownian(), CUSTOM,
], ids=["ou", "slepian", "brownian", "custom"])
@given(s=times, t=times)
def test_kernel_symmetry(kernel, s, t):
    assert kernel(s, t) == kernel(t, s)
    assert kernel(t, t) >= 0


def test_discount_eval_examples():
    assert discount_eval(DiscountModel.zero(), 5.0) == 0.0
    assert discount_eval(DiscountModel.linear(0.5), 2.0) == 1.0
    assert discount_eval(DiscountModel.quadratic(), 2.0) == 2.0
    for d in (DiscountModel.zero(), DiscountModel.linear(-0.3), DiscountModel.quadratic()):
        assert discount_eval(d, 0.0) == 0.0
    with pytest.raises(DomainError):
        discount_eval(DiscountModel.zero(), -1.0)


def test_custom_discount_checks():
    with pytest.raises(DomainError):
        DiscountModel.custom(lambda t: t + 1.0)
    bad = DiscountModel.custom(lambda t: np.where(t > 0.5, np.inf, t))
    with pytest.raises(NumericError):
        discount_eval(bad, 0.7)


def test_discounted_time_examples():
    assert discounted_time(DiscountModel.zero(), 3.0) == 3.0
    # (1/delta)(1 - e^{-delta t}) at delta=0.5, t=1
    assert discounted_time(DiscountModel.linear(0.5), 1.0) == pytest.approx(0.78693868057473315279, rel=1e-14)
    # sqrt(2 pi)(1/2 - Psi(1)), mpmath at 40 digits
    assert discounted_time(DiscountModel.quadratic(), 1.0) == pytest.approx(0.85562439189214880317, rel=1e-14)
    assert discounted_time(DiscountModel.quadratic(), 0.0) == 0.0


@pytest.mark.parametrize("disc", [
    DiscountModel.linear(0.5), DiscountModel.linear(-0.8), DiscountModel.quadratic(),
], ids=["linear", "linear-negative", "quadratic"])
def test_quadrature_matches_closed_form(disc):
    tol = 1e-10
    # same function without the attached closed form forces the quadrature route
    bare = DiscountModel.custom(disc.__call__)
    grid = np.linspace(0.0, 2.0, 50)
    exact = discounted_time(disc, grid)
    numeric = discounted_time(bare, grid, tol)
    assert np.all(np.abs(numeric - exact) <= tol * np.maximum(np.abs(exact), 1e-300) + 1e-14)


@given(st.lists(st.floats(0.0, 3.0), min_size=2, max_size=20))
@settings(max_examples=50)
def test_discounted_time_monotone(ts):
    ts = np.sort(np.array(ts))
    for disc in (DiscountModel.zero(), DiscountModel.linear(1.3), DiscountModel.linear(-0.4),
                 DiscountModel.quadratic()):
        vals = discounted_time(disc, ts)
        assert np.all(np.diff(vals) >= 0)


def _model(kernel, T):
    return RiskModel(kernel, DiscountModel.zero(), c=1.0, T=T)


def test_covariance_positivity_detector():
    assert covariance_positive_on_grid(_model(CovarianceKernel.ou(1.0), 2.0), np.linspace(0, 2.0, 40))
    assert covariance_positive_on_grid(_model(CovarianceKernel.brownian(), 2.0), np.linspace(0, 2.0, 40))
    assert covariance_positive_on_grid(_model(CovarianceKernel.slepian(), 0.9), np.linspace(0, 0.9, 40))
    assert not covariance_positive_on_grid(_model(CovarianceKernel.slepian(), 1.0), np.linspace(0, 1.0, 40))


@pytest.mark.parametrize("kwargs", [
    {"c": 0.0, "T": 1.0}, {"c": 1.0, "T": 0.0}, {"c": -1.0, "T": 1.0}, {"c": 1.0, "T": math.nan},
])
def test_risk_model_validation(kwargs):
    with pytest.raises(DomainError):
        RiskModel(CovarianceKernel.ou(1.0), DiscountModel.zero(), **kwargs)


def test_slepian_horizon_restricted():
    RiskModel(CovarianceKernel.slepian(), DiscountModel.linear(1.0), c=1.0, T=1.0)
    with pytest.raises(DomainError):
        RiskModel(CovarianceKernel.slepian(), DiscountModel.linear(1.0), c=1.0, T=1.5)


def test_custom_grid_must_cover_horizon():
    k = CovarianceKernel.custom_grid([0.0, 0.5], np.eye(2))
    with pytest.raises(DomainError):
        RiskModel(k, DiscountModel.zero(), c=1.0, T=1.0)
