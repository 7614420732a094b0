"""Variance profile of the discounted loss and the ruin asymptotics built on it.

With ``Y(t) = int_0^t exp(-delta(s)) Z(s) ds`` the variance is

    sigma^2(t) = 2 int_0^t int_0^w exp(-delta(v) - delta(w)) R(v, w) dv dw,

and differentiating the outer limit gives

    sigma'(t) = exp(-delta(t)) int_0^t exp(-delta(v)) R(v, t) dv / sigma(t).

When ``sigma`` has its unique maximum on ``[0, T]`` at ``T`` and ``sigma'(T) > 0``,
the finite-time ruin probability behaves like ``Psi(g_u(T))`` with
``g_u(t) = (u + c delta~(t)) / sigma(t)``, and ``u^2 (T - tau(u))`` given ruin
before ``T`` is asymptotically exponential with rate ``sigma'(T) / sigma(T)^3``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import models
from .errors import DegenerateVarianceError, DomainError, HypothesisError
from .quadrature import integrate_1d, integrate_triangle

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)

UNIQUE_MAX = "unique maximum of sigma over [0, T] at t = T"
SIGMA_PRIME_POSITIVE = "sigma'(T) > 0"


def normal_survival(x):
    """Standard normal survival function ``Psi(x) = P(N > x)``.

    Computed as ``Phi(-x)`` through the complementary error function, so the
    upper tail keeps full relative precision until float64 underflow
    (around ``x = 38``). Use :func:`log_normal_survival` beyond that.
    """
    out = ndtr(-np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def log_normal_survival(x):
    """``log Psi(x)``, finite for every finite ``x``."""
    out = log_ndtr(-np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def normal_density(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def _check_time(model, t):
    t = float(t)
    if not (0.0 <= t <= model.T):
        raise DomainError(f"t={t} outside [0, {model.T}]")
    return t


def variance_at(model, t, tol=1e-10):
    """``sigma^2(t) = Var Y(t)`` by nested quadrature over the triangle ``v <= w``."""
    t = _check_time(model, t)
    kernel, w_of = model.kernel, model.discount.weight

    def integrand(v, w):
        return w_of(v) * w_of(w) * kernel(v, w)

    res = integrate_triangle(integrand, t, tol, points=kernel.knots)
    return max(2.0 * res.value, 0.0)


def _inner_covariance(model, t, tol):
    # Cov(Y(t), Z(t)) = int_0^t exp(-delta(v)) R(v, t) dv
    kernel, w_of = model.kernel, model.discount.weight
    return integrate_1d(lambda v: w_of(v) * kernel(v, t), 0.0, t, tol, points=kernel.knots).value


def sigma_prime_at(model, t, tol=1e-10, sigma=None):
    """Derivative of ``sigma(t)``; needs ``sigma(t) > 0``.

    ``sigma`` may be passed in when already known to skip the double integral.
    """
    t = _check_time(model, t)
    if sigma is None:
        sigma = math.sqrt(variance_at(model, t, tol))
    if not sigma > 0:
        raise DegenerateVarianceError(f"sigma({t}) = 0, derivative of sigma undefined")
    inner = _inner_covariance(model, t, tol)
    return float(model.discount.weight(t)) * inner / sigma


@dataclass(frozen=True)
class VarianceProfile:
    """Tabulated ``sigma^2``, ``sigma`` and ``sigma'`` plus hypothesis verdicts.

    ``margin`` is ``min_{t < T} (sigma(T) - sigma(t))`` over the grid, so a
    near-tie for the maximum is visible even when ``max_at_T`` is true.
    ``covariance_positive`` reports whether ``R > 0`` on all sampled pairs of
    non-degenerate nodes (the shortcut that implies both other verdicts).
    """

    grid: np.ndarray
    sigma2: np.ndarray
    sigma: np.ndarray
    sigma_prime: np.ndarray
    max_at_T: bool
    sigma_prime_T_positive: bool
    covariance_positive: bool
    margin: float

    @property
    def hypotheses_hold(self):
        return self.max_at_T and self.sigma_prime_T_positive

    def failed_conditions(self):
        failed = []
        if not self.max_at_T:
            failed.append(UNIQUE_MAX)
        if not self.sigma_prime_T_positive:
            failed.append(SIGMA_PRIME_POSITIVE)
        return failed

    def as_dict(self):
        return {
            "n_grid": int(self.grid.size),
            "max_at_T": bool(self.max_at_T),
            "sigma_prime_T_positive": bool(self.sigma_prime_T_positive),
            "covariance_positive": bool(self.covariance_positive),
            "margin": float(self.margin),
            "sigma_T": float(self.sigma[-1]),
            "sigma_prime_T": float(self.sigma_prime[-1]),
        }


def covariance_positive_on_grid(model, grid):
    """True if ``R(s, t) > 0`` for all grid pairs of nodes with positive variance.

    Nodes where ``R(t, t) = 0`` (Brownian motion at 0) carry a deterministic
    zero and are skipped.
    """
    s, t = np.meshgrid(grid, grid, indexing="ij")
    cov = model.kernel(s, t)
    live = np.diag(cov) > 0
    return bool(np.all(cov[np.ix_(live, live)] > 0))


def check_hypotheses(model, n_grid=64, tol=1e-10):
    """Grid check of the unique-maximum and positive-slope hypotheses at ``T``."""
    if n_grid < 16:
        raise DomainError("n_grid must be at least 16")
    grid = np.linspace(0.0, model.T, int(n_grid))
    sigma2 = np.array([variance_at(model, t, tol) for t in grid])
    sigma = np.sqrt(sigma2)
    sigma_prime = np.full_like(grid, np.nan)
    for i, t in enumerate(grid):
        if t > 0 and sigma[i] > 0:
            sigma_prime[i] = sigma_prime_at(model, t, tol, sigma=sigma[i])
    margin = float(np.min(sigma[-1] - sigma[:-1]))
    return VarianceProfile(
        grid=grid,
        sigma2=sigma2,
        sigma=sigma,
        sigma_prime=sigma_prime,
        max_at_T=bool(margin > 0),
        sigma_prime_T_positive=bool(np.isfinite(sigma_prime[-1]) and sigma_prime[-1] > 0),
        covariance_positive=covariance_positive_on_grid(model, grid),
        margin=margin,
    )


def barrier_level(model, u, tol=1e-10, sigma_T=None):
    """``g_u(T) = (u + c delta~(T)) / sigma(T)``."""
    if u < 0:
        raise DomainError(f"initial reserve must be nonnegative, got {u}")
    if sigma_T is None:
        sigma_T = math.sqrt(variance_at(model, model.T, tol))
    if not sigma_T > 0:
        raise DegenerateVarianceError("sigma(T) = 0, barrier level undefined")
    return (u + model.c * model.discounted_time(model.T, tol)) / sigma_T


@dataclass(frozen=True)
class AsymptoticReport:
    u: float
    g_u_T: float
    psi_approx: float
    log_psi_approx: float
    psi_mills: float
    ruin_time_rate: float
    ruin_time_mean: float
    sigma_T: float
    sigma_prime_T: float
    discounted_time_T: float

    def as_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def ruin_prob_asymptotic(model, u, tol=1e-10, profile=None, n_grid=64):
    """Leading-order ruin probability and conditional ruin-time law.

    ``psi_approx = Psi(g_u(T))`` is the canonical value. ``psi_mills`` is the
    Mills-ratio form ``sigma(T) / (sqrt(2 pi) u) exp(-(u + c delta~(T))^2 / (2 sigma^2(T)))``
    kept for comparison; it is only meaningful for large ``u`` (NaN at ``u = 0``).

    Raises
    ------
    HypothesisError
        If the grid check finds an interior maximum of ``sigma`` or
        ``sigma'(T) <= 0``.
    """
    if profile is None:
        profile = check_hypotheses(model, n_grid, tol)
    failed = profile.failed_conditions()
    if failed:
        raise HypothesisError(failed[0], f"grid margin {profile.margin:.3e}")
    sigma_T = float(profile.sigma[-1])
    sigma_prime_T = float(profile.sigma_prime[-1])
    dt_T = model.discounted_time(model.T, tol)
    g = barrier_level(model, u, tol, sigma_T=sigma_T)
    numerator = u + model.c * dt_T
    if u > 0:
        psi_mills = sigma_T / (SQRT_2PI * u) * math.exp(-numerator**2 / (2.0 * sigma_T**2))
    else:
        psi_mills = float("nan")
    rate = sigma_prime_T / sigma_T**3
    return AsymptoticReport(
        u=float(u),
        g_u_T=g,
        psi_approx=normal_survival(g),
        log_psi_approx=log_normal_survival(g),
        psi_mills=psi_mills,
        ruin_time_rate=rate,
        ruin_time_mean=1.0 / rate,
        sigma_T=sigma_T,
        sigma_prime_T=sigma_prime_T,
        discounted_time_T=dt_T,
    )


# --- closed-form examples --------------------------------------------------

EXAMPLES = ("ou", "slepian", "bm_quadratic")


@dataclass(frozen=True)
class OracleValues:
    discounted_time: float
    sigma2: float
    e_T: float = float("nan")


def _ou_oracle(lam, delta, t, T):
    if not (0.0 < delta < lam):
        raise DomainError(f"OU example requires 0 < delta < lambda, got delta={delta}, lambda={lam}")
    dt = (1.0 - math.exp(-delta * t)) / delta
    s2 = (1.0 / ((lam - delta) * delta)) * (1.0 - math.exp(-2.0 * delta * t)) - (
        2.0 / (lam**2 - delta**2)
    ) * (1.0 - math.exp(-(lam + delta) * t))
    e_T = float("nan")
    if T is not None and t == T:
        num = (lam + delta) * (1.0 - math.exp(-2.0 * delta * T)) - 2.0 * delta * (
            1.0 - math.exp(-(lam + delta) * T)
        )
        den = (lam - delta) * (lam + delta) ** 2 * delta**2 * math.exp(-delta * T) * (
            math.exp(-delta * T) - math.exp(-lam * T)
        )
        e_T = num**2 / den
    return OracleValues(dt, s2, e_T)


def _slepian_oracle(delta, t, T):
    if delta == 0.0:
        raise DomainError("Slepian example requires delta != 0")
    if not (0.0 <= t <= 1.0):
        raise DomainError("Slepian example is stated for t in [0, 1]")
    d = delta
    dt = (1.0 - math.exp(-d * t)) / d
    s2 = (
        1.0 / d**2
        - 1.0 / d**3
        - (2.0 / d**2) * math.exp(-d * t)
        + (2.0 * t / d**2) * math.exp(-d * t)
        + ((d + 1.0) / d**3) * math.exp(-2.0 * d * t)
    )
    e_T = float("nan")
    if T is not None and t == T and T == 1.0:
        num = d - 1.0 + (d + 1.0) * math.exp(-2.0 * d)
        e_T = num**2 / (d**4 * math.exp(-d) - d**4 * (d + 1.0) * math.exp(-2.0 * d))
    return OracleValues(dt, s2, e_T)


def _bm_quadratic_oracle(t, T):
    if t < 0:
        raise DomainError("t must be nonnegative")
    psi = normal_survival
    dt = SQRT_2PI * (0.5 - psi(t))
    s2 = (SQRT2 - 1.0) * SQRT_PI - 2.0 * SQRT_2PI * psi(t) + 2.0 * SQRT_PI * psi(SQRT2 * t)
    e_T = float("nan")
    if T is not None and t == T:
        e_T = s2**2 / (SQRT_2PI * (normal_density(T) - normal_density(SQRT2 * T)))
    return OracleValues(dt, s2, e_T)


def closed_form_oracle(example, t, T=None, lam=1.0, delta=0.5):
    """Closed-form ``delta~(t)``, ``sigma^2(t)`` and, when ``t == T``, ``e_T``.

    ``example`` is one of ``"ou"`` (OU kernel with rate ``lam``, linear
    discount ``delta`` in ``(0, lam)``), ``"slepian"`` (linear discount
    ``delta != 0``, ``t`` in ``[0, 1]``, ``e_T`` only at ``T = 1``) or
    ``"bm_quadratic"`` (Brownian loss, ``delta(t) = t^2 / 2``).
    """
    t = float(t)
    if example == "ou":
        return _ou_oracle(float(lam), float(delta), t, T)
    if example == "slepian":
        return _slepian_oracle(float(delta), t, T)
    if example == "bm_quadratic":
        return _bm_quadratic_oracle(t, T)
    raise DomainError(f"unknown example {example!r}; expected one of {EXAMPLES}")


def example_model(example, T=1.0, c=1.0, lam=1.0, delta=0.5):
    """The :class:`~gaussruin.models.RiskModel` matching :func:`closed_form_oracle`."""
    if example == "ou":
        if not (0.0 < delta < lam):
            raise DomainError(f"OU example requires 0 < delta < lambda, got delta={delta}, lambda={lam}")
        kernel, disc = models.CovarianceKernel.ou(lam), models.DiscountModel.linear(delta)
    elif example == "slepian":
        if delta == 0.0:
            raise DomainError("Slepian example requires delta != 0")
        kernel, disc = models.CovarianceKernel.slepian(), models.DiscountModel.linear(delta)
    elif example == "bm_quadratic":
        kernel, disc = models.CovarianceKernel.brownian(), models.DiscountModel.quadratic()
    else:
        raise DomainError(f"unknown example {example!r}; expected one of {EXAMPLES}")
    return models.RiskModel(kernel, disc, c=c, T=T)
