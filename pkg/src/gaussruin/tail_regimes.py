"""Three-regime tail asymptotics and Monte Carlo extremal constants.

For a family of Gaussian processes whose standard deviation near ``T`` is
``1 - A (T - t)^beta`` and whose correlation is ``1 - B |t - s|^alpha``, the
exceedance probability of level ``u`` over ``[theta, T]`` is, to leading order,

* ``beta > alpha``:  ``B^(1/alpha) / (sqrt(2 pi) A^(1/beta)) H_alpha Gamma(1/beta + 1)
  u^(2/alpha - 2/beta - 1) exp(-u^2/2)``
* ``beta == alpha``: ``P_alpha^(A/B) / sqrt(2 pi) u^-1 exp(-u^2/2)``
* ``beta < alpha``:  ``u^-1 exp(-u^2/2) / sqrt(2 pi)``

where ``H_alpha`` (Pickands) and ``P_alpha^b`` (Piterbarg) are extremal
constants of fractional Brownian motion ``B_alpha`` with Hurst index ``alpha / 2``.

A Hoelder-type modulus bound on the increments is also needed for these
expansions; it guarantees tightness but enters no formula, so it is not
represented here.

Estimating the constants
------------------------
Both constants are expectations ``E exp(max_t X(t))`` with
``X(t) = sqrt(2) B_alpha(t) - (1 + b) t^alpha`` (``b = 0`` for Pickands).
Sampled directly these have infinite variance. Because
``exp(sqrt(2) B_alpha(t) - t^alpha)`` has mean one for every ``t``, mixing the
exponentially tilted laws over the grid nodes gives an exact change of measure:
under the tilt at node ``s`` the path gains the drift
``t^alpha + s^alpha - |t - s|^alpha``, and the expectation becomes
``E_Q[exp(max X) / (w0 + (1 - w0) mean_j exp(X_0(t_j)))]`` with ``X_0`` the
untilted-drift process and ``w0`` the mass kept on the original law. The
estimator is unbiased for the grid-discretized, finite-horizon quantity and
has bounded variance.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from ._streams import run_batches
from .errors import ConfigError, DomainError, NumericError
from .asymptotics import SQRT_2PI

REGIME_PICKANDS = "i"
REGIME_PITERBARG = "ii"
REGIME_GAUSSIAN = "iii"


@dataclass(frozen=True)
class RegimeSpec:
    """Local structure at the variance maximum: ``A``, ``beta`` (variance) and ``B``, ``alpha`` (correlation)."""

    A: float
    B: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not self.B > 0:
            raise DomainError(f"B must be positive, got {self.B}")
        if not 0 < self.alpha <= 2:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def regime(self):
        if self.beta > self.alpha:
            return REGIME_PICKANDS
        if self.beta == self.alpha:
            return REGIME_PITERBARG
        return REGIME_GAUSSIAN


def regime_prefactor(spec, pickands=None, piterbarg=None):
    """Constant multiplying ``u^power exp(-u^2/2)``; returns ``(prefactor, power)``."""
    regime = spec.regime
    if regime == REGIME_PICKANDS:
        if pickands is None:
            raise ConfigError("regime i (beta > alpha) needs the Pickands constant H_alpha")
        pref = (spec.B ** (1.0 / spec.alpha) / (SQRT_2PI * spec.A ** (1.0 / spec.beta))
                * pickands * gamma_fn(1.0 / spec.beta + 1.0))
        return pref, 2.0 / spec.alpha - 2.0 / spec.beta - 1.0
    if regime == REGIME_PITERBARG:
        if piterbarg is None:
            raise ConfigError(
                f"regime ii (beta == alpha) needs the Piterbarg constant with b = A/B = {spec.A / spec.B}"
            )
        return piterbarg / SQRT_2PI, -1.0
    return 1.0 / SQRT_2PI, -1.0


def regime_asymptotic(spec, u, pickands=None, piterbarg=None):
    """Leading-order ``P(sup eta_u > u)`` for the regime picked by ``beta`` vs ``alpha``.

    ``pickands`` / ``piterbarg`` are the constants the selected regime needs;
    the Piterbarg constant must be the one with ``b = A / B``.
    """
    if not u > 0:
        raise DomainError("level u must be positive")
    if spec.regime == REGIME_GAUSSIAN:
        # phi(u) / u, evaluated as written so it matches the closed form exactly
        return math.exp(-0.5 * u * u) / SQRT_2PI / u
    pref, power = regime_prefactor(spec, pickands, piterbarg)
    return pref * u**power * math.exp(-0.5 * u * u)


@dataclass(frozen=True)
class ExtremalConstantEstimate:
    value: float
    stderr: float
    horizon: float
    grid_step: float
    replications: int
    alpha: float = float("nan")
    b: float = 0.0

    def as_dict(self):
        return dict(self.__dict__)


# --- fractional Brownian motion ---------------------------------------------

def _fgn_spectrum(n_steps, hurst):
    k = np.arange(n_steps + 1, dtype=float)
    two_h = 2.0 * hurst
    acov = 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([acov, acov[-2:0:-1]])
    return np.fft.fft(row).real


def fbm_sampler(alpha, grid_step, n_steps):
    """Exact sampler of fBm with Hurst ``alpha / 2`` on ``{0, h, ..., n h}``.

    Uses the circulant embedding of fractional Gaussian noise (an exact
    factorization of the embedded covariance). Falls back to a Cholesky
    factor of the path covariance if the embedding is not nonnegative definite.
    Returns ``draw(rng, size) -> array (size, n_steps + 1)``.
    """
    if not 0 < alpha <= 2:
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    hurst = alpha / 2.0
    eig = _fgn_spectrum(n_steps, hurst)
    scale = grid_step**hurst
    if eig.min() >= -1e-10 * eig.max():
        root = np.sqrt(np.clip(eig, 0.0, None) / eig.size)

        def draw(rng, size):
            noise = rng.standard_normal((size, eig.size)) + 1j * rng.standard_normal((size, eig.size))
            inc = np.fft.fft(root * noise, axis=1).real[:, :n_steps] * scale
            out = np.zeros((size, n_steps + 1))
            np.cumsum(inc, axis=1, out=out[:, 1:])
            return out

        return draw

    t = np.arange(1, n_steps + 1) * grid_step
    cov = 0.5 * (t[:, None] ** alpha + t[None, :] ** alpha - np.abs(t[:, None] - t[None, :]) ** alpha)
    chol = np.linalg.cholesky(cov + 1e-12 * cov.max() * np.eye(n_steps))

    def draw(rng, size):
        out = np.zeros((size, n_steps + 1))
        out[:, 1:] = rng.standard_normal((size, n_steps)) @ chol.T
        return out

    return draw


def _logmeanexp(x):
    top = x.max(axis=1)
    return top + np.log(np.mean(np.exp(x - top[:, None]), axis=1))


def _tilted_sup_expectation(alpha, b, horizon, grid_step, replications, seed, keep_mass,
                            batch_size, workers):
    """Per-replication unbiased terms for ``E exp(max_grid (sqrt 2 B_alpha - (1+b) t^alpha))``."""
    n_steps = int(round(horizon / grid_step))
    if n_steps < 1 or not math.isclose(n_steps * grid_step, horizon, rel_tol=1e-9):
        raise DomainError("horizon must be a positive multiple of grid_step")
    t = np.arange(n_steps + 1) * grid_step
    t_a = t**alpha
    draw = fbm_sampler(alpha, grid_step, n_steps)
    log_keep = math.log(keep_mass) if keep_mass > 0 else -math.inf
    log_tilt = math.log1p(-keep_mass)

    def batch(rng, size):
        path = math.sqrt(2.0) * draw(rng, size)
        node = rng.integers(0, n_steps + 1, size)
        tilted = rng.random(size) >= keep_mass
        s_a = t_a[node]
        shift = t_a[None, :] + s_a[:, None] - np.abs(t[None, :] - t[node][:, None]) ** alpha
        base = path + shift * tilted[:, None] - t_a[None, :]
        penalized = base - b * t_a[None, :]
        log_density = np.logaddexp(log_keep, log_tilt + _logmeanexp(base))
        return np.exp(penalized.max(axis=1) - log_density)

    values = np.concatenate(run_batches(batch, replications, batch_size, seed, workers))
    if not np.all(np.isfinite(values)):
        raise NumericError("extremal-constant estimator overflowed")
    return values


def pickands_estimate(alpha, horizon=40.0, grid_step=0.01, replications=4000, seed=0,
                      batch_size=256, workers=1):
    """Estimate ``H_alpha = lim (1/T) E exp(sup_[0,T] (sqrt 2 B_alpha(t) - t^alpha))``.

    Returns the grid-``grid_step``, horizon-``horizon`` value. Both
    truncations bias the result: a finite horizon adds roughly ``const / T``
    and the grid misses part of the supremum (error of order
    ``grid_step^(alpha/2)``); see :func:`horizon_extrapolate` and
    :func:`richardson_step`.
    """
    if horizon <= 0 or grid_step <= 0 or replications < 2:
        raise DomainError("horizon, grid_step must be positive and replications >= 2")
    vals = _tilted_sup_expectation(alpha, 0.0, horizon, grid_step, replications, seed, 0.0,
                                   batch_size, workers) / horizon
    return ExtremalConstantEstimate(
        value=float(np.mean(vals)),
        stderr=float(np.std(vals, ddof=1) / math.sqrt(replications)),
        horizon=float(horizon),
        grid_step=float(grid_step),
        replications=int(replications),
        alpha=float(alpha),
    )


def piterbarg_estimate(alpha, b, horizon=20.0, grid_step=0.01, replications=4000, seed=0,
                       batch_size=256, workers=1, keep_mass=0.5):
    """Estimate ``P_alpha^b = lim E exp(sup_[0,T] (sqrt 2 B_alpha(t) - (1+b) t^alpha))``.

    ``keep_mass`` is the share of replications drawn from the untilted law;
    it keeps the weights bounded when the penalty pins the supremum near 0.
    """
    if not b > 0:
        raise DomainError(f"Piterbarg penalty b must be positive, got {b}")
    if horizon <= 0 or grid_step <= 0 or replications < 2:
        raise DomainError("horizon, grid_step must be positive and replications >= 2")
    if not 0 < keep_mass < 1:
        raise DomainError("keep_mass must lie in (0, 1)")
    vals = _tilted_sup_expectation(alpha, float(b), horizon, grid_step, replications, seed,
                                   keep_mass, batch_size, workers)
    return ExtremalConstantEstimate(
        value=float(np.mean(vals)),
        stderr=float(np.std(vals, ddof=1) / math.sqrt(replications)),
        horizon=float(horizon),
        grid_step=float(grid_step),
        replications=int(replications),
        alpha=float(alpha),
        b=float(b),
    )


def horizon_extrapolate(short, long):
    """Remove the ``const / T`` horizon bias using estimates at ``T`` and ``2T``."""
    if not math.isclose(long.horizon, 2.0 * short.horizon):
        raise DomainError("horizon extrapolation needs horizons T and 2T")
    value = 2.0 * long.value - short.value
    stderr = math.hypot(2.0 * long.stderr, short.stderr)
    return ExtremalConstantEstimate(value, stderr, long.horizon, long.grid_step,
                                    short.replications + long.replications, long.alpha, long.b)


def richardson_step(coarse, fine):
    """Extrapolate grid step ``h`` and ``h/2`` estimates to ``h -> 0``.

    Assumes the discretization error scales like ``h^(alpha/2)``, the order at
    which a grid misses the supremum of a path with Hoelder exponent ``alpha/2``.
    """
    if not math.isclose(fine.grid_step, 0.5 * coarse.grid_step):
        raise DomainError("Richardson step needs grid steps h and h/2")
    ratio = 2.0 ** (coarse.alpha / 2.0)
    value = (ratio * fine.value - coarse.value) / (ratio - 1.0)
    stderr = math.hypot(ratio * fine.stderr, coarse.stderr) / (ratio - 1.0)
    return ExtremalConstantEstimate(value, stderr, fine.horizon, 0.0,
                                    coarse.replications + fine.replications, fine.alpha, fine.b)
