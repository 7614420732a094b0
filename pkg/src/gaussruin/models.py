"""Covariance kernels, discount functions and the risk model bundle.

The loss rate ``Z`` is a centered Gaussian process with covariance ``R(s, t)``;
money is discounted by ``exp(-delta(t))`` where ``delta = delta_2 - delta_1``
is the net force of interest over inflation, with ``delta(0) = 0``.
All objects are immutable and their evaluators broadcast over numpy arrays.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import erf

from .errors import DomainError, NumericError
from .quadrature import integrate_1d

OU = "ou"
SLEPIAN = "slepian"
BROWNIAN = "brownian"
CUSTOM_GRID = "custom_grid"

ZERO = "zero"
LINEAR = "linear"
QUADRATIC = "quadratic"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class CovarianceKernel:
    """Covariance function ``R(s, t)`` of the loss-rate process.

    Build instances with :meth:`ou`, :meth:`slepian`, :meth:`brownian` or
    :meth:`custom_grid`. Calling the kernel evaluates it with broadcasting.
    """

    kind: str
    rate: float = float("nan")
    times: Optional[np.ndarray] = field(default=None, repr=False)
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    _interp: Optional[Callable] = field(default=None, repr=False)

    @classmethod
    def ou(cls, rate):
        """Stationary Ornstein-Uhlenbeck covariance ``exp(-rate |s - t|)``."""
        rate = float(rate)
        if not rate > 0:
            raise DomainError(f"OU rate must be positive, got {rate}")
        return cls(OU, rate=rate)

    @classmethod
    def slepian(cls):
        """Covariance ``max(1 - |s - t|, 0)`` of ``B(t + 1) - B(t)``."""
        return cls(SLEPIAN)

    @classmethod
    def brownian(cls):
        """Standard Brownian motion, ``min(s, t)``."""
        return cls(BROWNIAN)

    @classmethod
    def custom_grid(cls, times, matrix):
        """Tabulated covariance, bilinearly interpolated between nodes.

        ``times`` must be strictly increasing and ``matrix`` symmetric with a
        nonnegative diagonal.
        """
        times = np.array(times, dtype=float)
        matrix = np.array(matrix, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("custom grid needs at least two time nodes")
        if np.any(np.diff(times) <= 0):
            raise DomainError("custom grid times must be strictly increasing")
        if matrix.shape != (times.size, times.size):
            raise DomainError(
                f"covariance matrix shape {matrix.shape} does not match {times.size} nodes"
            )
        if not np.all(np.isfinite(matrix)):
            raise DomainError("covariance matrix has non-finite entries")
        if not np.array_equal(matrix, matrix.T):
            raise DomainError("covariance matrix must be symmetric")
        if np.any(np.diag(matrix) < 0):
            raise DomainError("covariance matrix diagonal must be nonnegative")
        times.setflags(write=False)
        matrix.setflags(write=False)
        interp = RectBivariateSpline(times, times, matrix, kx=1, ky=1, s=0)
        return cls(CUSTOM_GRID, times=times, matrix=matrix, _interp=interp)

    @property
    def support(self):
        """Closed time interval on which the kernel is defined."""
        if self.kind == CUSTOM_GRID:
            return float(self.times[0]), float(self.times[-1])
        return 0.0, math.inf

    @property
    def knots(self):
        """Times where the kernel is not smooth in either argument, or None."""
        return self.times if self.kind == CUSTOM_GRID else None

    @property
    def is_stationary(self):
        return self.kind in (OU, SLEPIAN)

    def __call__(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        if self.kind == OU:
            return np.exp(-self.rate * np.abs(s - t))
        if self.kind == SLEPIAN:
            return np.maximum(1.0 - np.abs(s - t), 0.0)
        if self.kind == BROWNIAN:
            return np.minimum(s, t)
        # degree-1 spline is the bilinear interpolant; averaging both
        # argument orders makes it exactly symmetric
        return 0.5 * (self._interp.ev(s, t) + self._interp.ev(t, s))


def kernel_eval(kernel, s, t, horizon=None):
    """Evaluate ``R(s, t)`` after checking that both times are in range."""
    lo, hi = kernel.support
    if horizon is not None:
        hi = min(hi, float(horizon))
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    for name, x in (("s", s_arr), ("t", t_arr)):
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"time {name}={x} outside kernel range [{lo}, {hi}]")
    out = kernel(s_arr, t_arr)
    return float(out) if out.ndim == 0 else out


def _normal_cdf_centered(t):
    # sqrt(2 pi) * (Phi(t) - 1/2), without cancellation for small t
    return math.sqrt(math.pi / 2.0) * erf(np.asarray(t, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class DiscountModel:
    """Net discount function ``delta(t)`` with an optional closed-form ``delta~(t)``.

    ``delta~(t) = int_0^t exp(-delta(s)) ds`` is the discounted elapsed time.
    """

    kind: str
    rate: float = 0.0
    func: Optional[Callable] = field(default=None, repr=False)
    closed_form: Optional[Callable] = field(default=None, repr=False)

    @classmethod
    def zero(cls):
        return cls(ZERO, closed_form=lambda t: np.asarray(t, dtype=float) * 1.0)

    @classmethod
    def linear(cls, rate):
        """``delta(t) = rate * t``; negative rates (deflation dominating) are allowed."""
        rate = float(rate)
        if not math.isfinite(rate):
            raise DomainError("linear discount rate must be finite")
        if rate == 0.0:
            return cls(LINEAR, rate=0.0, closed_form=lambda t: np.asarray(t, dtype=float) * 1.0)
        return cls(LINEAR, rate=rate, closed_form=lambda t: -np.expm1(-rate * np.asarray(t, dtype=float)) / rate)

    @classmethod
    def quadratic(cls):
        """``delta(t) = t**2 / 2``."""
        return cls(QUADRATIC, closed_form=_normal_cdf_centered)

    @classmethod
    def custom(cls, func, discounted_time=None):
        """Wrap a user function; ``func(0)`` must be 0.

        ``func`` should broadcast over arrays. ``discounted_time``, if given,
        is used instead of quadrature.
        """
        value0 = float(np.asarray(func(np.array(0.0))))
        if value0 != 0.0:
            raise DomainError(f"discount must vanish at t=0, got delta(0)={value0}")
        return cls(CUSTOM, func=func, closed_form=discounted_time)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == ZERO:
            out = np.zeros_like(t)
        elif self.kind == LINEAR:
            out = self.rate * t
        elif self.kind == QUADRATIC:
            out = 0.5 * t * t
        else:
            out = np.asarray(self.func(t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"discount function returned non-finite values at t={t}")
        return out

    def weight(self, t):
        """``exp(-delta(t))``."""
        w = np.exp(-self(t))
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise NumericError("exp(-delta(t)) overflowed or underflowed")
        return w


def discount_eval(discount, t):
    """Evaluate ``delta(t)`` for ``t >= 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise DomainError(f"discount is defined for t >= 0, got {t}")
    out = discount(t_arr)
    return float(out) if out.ndim == 0 else out


def discounted_time(discount, t, tol=1e-10):
    """``delta~(t) = int_0^t exp(-delta(s)) ds``.

    The closed form is used when the model carries one; otherwise adaptive
    quadrature at relative tolerance ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise DomainError(f"discounted time is defined for t >= 0, got {t}")
    if discount.closed_form is not None:
        out = np.asarray(discount.closed_form(t_arr), dtype=float)
    else:
        flat = [integrate_1d(discount.weight, 0.0, float(x), tol).value for x in t_arr.ravel()]
        out = np.array(flat).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class RiskModel:
    """Risk reserve model: loss kernel, discounting, premium rate and horizon.

    The surplus process relevant for ruin is ``Y(t) - c * delta~(t)`` with
    ``Y(t) = int_0^t exp(-delta(s)) Z(s) ds``; ruin before ``T`` means its
    supremum over ``[0, T]`` exceeds the initial reserve ``u``.
    """

    kernel: CovarianceKernel
    discount: DiscountModel
    c: float
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon T must be positive, got {self.T}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"premium rate c must be positive, got {self.c}")
        if self.kernel.kind == SLEPIAN and self.T > 1.0:
            raise DomainError("Slepian models are restricted to T <= 1")
        lo, hi = self.kernel.support
        if self.kernel.kind == CUSTOM_GRID and (lo > 0.0 or hi < self.T):
            raise DomainError(f"custom grid [{lo}, {hi}] does not cover [0, {self.T}]")
        # evaluator must be finite on the horizon
        self.discount.weight(np.linspace(0.0, self.T, 33))

    def covariance(self, s, t):
        return kernel_eval(self.kernel, s, t, horizon=self.T)

    def discounted_time(self, t, tol=1e-10):
        return discounted_time(self.discount, t, tol)
