"""Path simulation, ruin detection and (importance-sampled) ruin estimators.

Loss-rate paths ``Z`` are drawn on a uniform grid from a Cholesky factor of
their covariance; ``Y`` is the cumulative trapezoid of ``exp(-delta) Z``.
Ruin is declared at the first grid node where ``Y(t) - c delta~(t) > u``.

The importance sampler shifts ``Z`` by a multiple of ``Cov(Z, Y(T))`` so that
``E[Y(T)]`` moves onto the barrier ``u + c delta~(T)``. Ruin localizes at the
horizon, so this one-dimensional tilt captures most of the rare event and the
likelihood ratio depends on ``Y(T)`` alone.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import blas, solve_triangular

from ._streams import run_batches
from .asymptotics import check_hypotheses, ruin_prob_asymptotic
from .errors import (
    DomainError,
    HypothesisError,
    InsufficientDataError,
    ModelError,
    NumericError,
)

CRUDE = "crude"
IMPORTANCE = "importance"
JITTER_UNIT = 1e-12
JITTER_STEPS = (0, 1, 10, 100, 1000, 10000)
MIN_CONDITIONAL_ESS = 100
DEFAULT_BATCH = 1024


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Uniform grid on ``[0, T]`` with everything needed to draw ``Y`` paths.

    ``chol`` factors the covariance of ``Z`` restricted to ``live`` nodes
    (nodes with positive variance); the others carry ``Z = 0``. The factor
    satisfies ``chol @ chol.T = Sigma + jitter * I`` where
    ``jitter = 1e-12 * jitter_steps * max(diag Sigma)``, so the deviation from
    ``Sigma`` never exceeds ``1e-8 * max(diag Sigma)``.
    """

    model: object
    times: np.ndarray
    live: np.ndarray
    chol: np.ndarray = field(repr=False)
    jitter_steps: int
    jitter: float
    discount_weights: np.ndarray = field(repr=False)
    drift: np.ndarray = field(repr=False)
    tilt_direction: np.ndarray = field(repr=False)
    var_Y_T: float

    @property
    def m(self):
        return self.times.size - 1

    @property
    def step(self):
        return self.times[1] - self.times[0]


def _factorize(cov):
    if cov.size == 0:
        return np.zeros((0, 0)), 0, 0.0
    scale = float(np.max(np.diag(cov)))
    eye = np.eye(cov.shape[0])
    for k in JITTER_STEPS:
        jitter = JITTER_UNIT * k * scale
        try:
            return np.linalg.cholesky(cov + jitter * eye), k, jitter
        except np.linalg.LinAlgError:
            continue
    raise ModelError(
        f"covariance is not positive semidefinite on this grid "
        f"(Cholesky failed with jitter up to {JITTER_UNIT * JITTER_STEPS[-1]:.0e} x max variance)"
    )


def build_grid(model, m, tol=1e-10):
    """Factorize the loss covariance on ``m + 1`` uniform nodes of ``[0, T]``."""
    m = int(m)
    if m < 8:
        raise DomainError("grid needs m >= 8 intervals")
    times = np.linspace(0.0, model.T, m + 1)
    cov = model.kernel(times[:, None], times[None, :])
    live = np.diag(cov) > 0
    chol, k, jitter = _factorize(cov[np.ix_(live, live)])
    chol = np.asfortranarray(chol)

    weights = model.discount.weight(times)
    drift = model.c * np.asarray(model.discounted_time(times, tol))
    # trapezoid functional a_T with Y(T) = a_T . Z
    a_T = weights * (times[1] - times[0])
    a_T[0] *= 0.5
    a_T[-1] *= 0.5
    half = chol.T @ a_T[live]
    cov_ZY = np.zeros_like(times)
    cov_ZY[live] = chol @ half
    tilt_direction = cumulative_trapezoid(weights * cov_ZY, times, initial=0.0)
    return PathGrid(
        model=model,
        times=times,
        live=live,
        chol=chol,
        jitter_steps=k,
        jitter=jitter,
        discount_weights=weights,
        drift=drift,
        tilt_direction=tilt_direction,
        var_Y_T=float(half @ half),
    )


def _draw_xi(grid, rng, size):
    return rng.standard_normal((size, int(grid.live.sum())))


def _loss_from_xi(grid, xi):
    n = xi.shape[0]
    Z = np.zeros((n, grid.times.size))
    if xi.shape[1]:
        # Z_live^T = L @ xi^T through the triangular BLAS kernel
        Z[:, grid.live] = blas.dtrmm(1.0, grid.chol, xi.T, side=0, lower=1).T
    return cumulative_trapezoid(grid.discount_weights * Z, grid.times, axis=1, initial=0.0)


def sample_discounted_loss(grid, n, seed, shift=None, batch_size=DEFAULT_BATCH, workers=1):
    """Draw ``n`` discretized ``Y`` paths and their likelihood-ratio weights.

    Parameters
    ----------
    shift : array_like, optional
        Mean vector added to ``Z`` at the grid nodes. Must vanish where ``Z``
        is degenerate. Weights are ``dP/dQ`` of the unshifted against the
        shifted law, and equal 1 without a shift.

    Returns
    -------
    Y : ndarray, shape (n, m + 1)
    weights : ndarray, shape (n,)
    """
    offset = None
    if shift is not None:
        shift = np.asarray(shift, dtype=float)
        if shift.shape != grid.times.shape:
            raise DomainError(f"shift must have shape {grid.times.shape}")
        if np.any(shift[~grid.live] != 0):
            raise DomainError("shift must be zero at nodes where Z has zero variance")
        offset = solve_triangular(grid.chol, shift[grid.live], lower=True)

    def batch(rng, size):
        xi = _draw_xi(grid, rng, size)
        if offset is None:
            return _loss_from_xi(grid, xi), np.ones(size)
        log_w = -(xi @ offset) - 0.5 * float(offset @ offset)
        w = np.exp(log_w)
        if not np.all(np.isfinite(w)):
            raise NumericError("likelihood-ratio weights overflowed; shift is too large")
        return _loss_from_xi(grid, xi + offset), w

    parts = run_batches(batch, n, batch_size, seed, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class RuinSamples:
    """Per-path ruin outcome for one reserve level ``u``.

    ``tau`` is the first grid time with negative reserve (NaN without ruin)
    and ``rescaled = u**2 * (T - tau)``. ``log_weight``, when present, keeps
    the likelihood ratios at levels where ``weight`` underflows to zero.
    """

    u: float
    ruined: np.ndarray
    tau: np.ndarray
    rescaled: np.ndarray
    weight: np.ndarray
    log_weight: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.ruined.size


def _first_exceedance(Y, drift, u):
    exceed = (Y - drift) > u
    ruined = exceed.any(axis=1)
    idx = np.argmax(exceed, axis=1)
    return ruined, idx


def ruin_scan(Y, grid, u, weights=None):
    """Detect ruin on each row of ``Y`` (paths on ``grid.times``)."""
    if u < 0:
        raise DomainError(f"initial reserve must be nonnegative, got {u}")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    ruined, idx = _first_exceedance(Y, grid.drift, u)
    return _samples_from_index(grid, u, ruined, idx, weights)


def _samples_from_index(grid, u, ruined, idx, weights, log_weights=None):
    tau = np.where(ruined, grid.times[idx], np.nan)
    rescaled = u * u * (grid.model.T - tau)
    if weights is None:
        weights = np.ones(ruined.size)
    return RuinSamples(float(u), ruined, tau, rescaled, np.asarray(weights, dtype=float), log_weights)


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate of a ruin probability.

    ``effective_sample_size`` is ``(sum w_i f_i)^2 / sum (w_i f_i)^2`` over the
    estimator's summands ``w_i f_i`` (``f_i`` the ruin indicator); for crude
    sampling it equals the number of ruined paths.
    """

    estimate: float
    stderr: float
    replications: int
    seed: int
    method: str
    max_weight: float
    effective_sample_size: float
    u: float = float("nan")
    m: int = 0

    def as_dict(self):
        return {
            "u": self.u,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "replications": self.replications,
            "seed": self.seed,
            "method": self.method,
            "m": self.m,
            "max_weight": self.max_weight,
            "effective_sample_size": self.effective_sample_size,
        }


def effective_sample_size(values):
    values = np.asarray(values, dtype=float)
    total = values.sum()
    sq = np.dot(values, values)
    return float(total * total / sq) if sq > 0 else 0.0


def summarize(samples, seed, method, m):
    """Collapse :class:`RuinSamples` into a :class:`SimEstimate`."""
    contrib = samples.weight * samples.ruined
    n = contrib.size
    est = float(np.mean(contrib))
    stderr = float(np.std(contrib, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return SimEstimate(
        estimate=est,
        stderr=stderr,
        replications=n,
        seed=seed,
        method=method,
        max_weight=float(np.max(samples.weight)),
        effective_sample_size=effective_sample_size(contrib),
        u=samples.u,
        m=m,
    )


def tilt_parameter(grid, u):
    """Tilt strength putting ``E[Y(T)]`` on the barrier ``u + c delta~(T)``."""
    return (u + grid.drift[-1]) / grid.var_Y_T


def _require_hypotheses(model, profile):
    if profile is None:
        profile = check_hypotheses(model)
    failed = profile.failed_conditions()
    if failed:
        raise HypothesisError(failed[0], "importance sampling localizes at T")
    return profile


def simulate_ruin(model, u_values, m=1024, n=100_000, seed=0, method=IMPORTANCE,
                  batch_size=DEFAULT_BATCH, workers=1, grid=None, profile=None):
    """Simulate ruin outcomes for several reserve levels on common random numbers.

    Every level reuses the same underlying Gaussian draws; under importance
    sampling each level gets its own tilt. Returns one :class:`RuinSamples`
    per entry of ``u_values``.
    """
    u_values = [float(u) for u in np.atleast_1d(u_values)]
    if any(u < 0 for u in u_values):
        raise DomainError("initial reserves must be nonnegative")
    if method not in (CRUDE, IMPORTANCE):
        raise DomainError(f"unknown method {method!r}")
    if method == IMPORTANCE:
        _require_hypotheses(model, profile)
    if grid is None:
        grid = build_grid(model, m)
    if method == IMPORTANCE and not grid.var_Y_T > 0:
        raise NumericError("Var Y(T) vanishes on the grid; cannot tilt")
    thetas = [tilt_parameter(grid, u) if method == IMPORTANCE else 0.0 for u in u_values]

    def batch(rng, size):
        Y0 = _loss_from_xi(grid, _draw_xi(grid, rng, size))
        out = []
        for u, theta in zip(u_values, thetas):
            if theta:
                Y = Y0 + theta * grid.tilt_direction
                log_w = -theta * Y[:, -1] + 0.5 * theta * theta * grid.var_Y_T
            else:
                Y = Y0
                log_w = np.zeros(size)
            ruined, idx = _first_exceedance(Y, grid.drift, u)
            out.append((ruined, idx, log_w))
        return out

    parts = run_batches(batch, n, batch_size, seed, workers)
    result = []
    for j, u in enumerate(u_values):
        ruined = np.concatenate([p[j][0] for p in parts])
        idx = np.concatenate([p[j][1] for p in parts])
        log_w = np.concatenate([p[j][2] for p in parts])
        w = np.exp(log_w)
        if not np.all(np.isfinite(w)):
            raise NumericError("likelihood-ratio weights overflowed")
        result.append(_samples_from_index(grid, u, ruined, idx, w, log_w))
    return result


def estimate_ruin(model, u, m=1024, n=100_000, seed=0, method=IMPORTANCE, **kwargs):
    """Estimate the finite-time ruin probability at grid resolution ``m``.

    Raises
    ------
    HypothesisError
        For ``method="importance"`` when the tilt's localization hypotheses fail.
    NumericError
        If every importance weight of a ruined path vanished.
    """
    samples = simulate_ruin(model, [u], m=m, n=n, seed=seed, method=method, **kwargs)[0]
    est = summarize(samples, seed, method, m)
    if method == IMPORTANCE and not est.estimate > 0:
        raise NumericError("all importance weights of ruined paths vanished")
    return est


def ks_weighted(samples, weights, cdf):
    """Kolmogorov-Smirnov distance between a weighted sample and ``cdf``."""
    x = np.asarray(samples, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("KS distance of an empty sample")
    if w.shape != x.shape:
        raise DomainError("samples and weights must have the same length")
    if np.any(w < 0) or not w.sum() > 0:
        raise DomainError("weights must be nonnegative and not all zero")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    upper = np.cumsum(w) / w.sum()
    lower = np.concatenate([[0.0], upper[:-1]])
    G = np.asarray(cdf(x), dtype=float)
    return float(max(np.max(np.abs(upper - G)), np.max(np.abs(lower - G))))


@dataclass(frozen=True)
class ConditionalRuinTime:
    """Weighted sample of ``u^2 (T - tau)`` given ruin before ``T``.

    ``weights`` are self-normalized to sum to one; ``mean`` estimates the
    limiting mean ``e_T`` and ``ks`` is the weighted KS distance to the
    exponential law with mean ``e_T`` from the asymptotic formula.
    """

    u: float
    rescaled: np.ndarray
    weights: np.ndarray
    mean: float
    stderr: float
    effective_sample_size: float
    e_T: float
    ks: float
    psi: Optional[SimEstimate] = None

    def as_dict(self):
        return {
            "u": self.u,
            "mean": self.mean,
            "stderr": self.stderr,
            "effective_sample_size": self.effective_sample_size,
            "e_T": self.e_T,
            "ks": self.ks,
            "ruined_paths": int(self.rescaled.size),
        }


def conditional_law(samples, e_T, min_ess=MIN_CONDITIONAL_ESS):
    """Condition :class:`RuinSamples` on ruin and summarize the rescaled time."""
    mask = samples.ruined
    x = samples.rescaled[mask]
    if samples.log_weight is not None and mask.any():
        # rescale before exponentiating; the conditional law ignores constants
        log_w = samples.log_weight[mask]
        w = np.exp(log_w - log_w.max())
    else:
        w = samples.weight[mask]
    ess = effective_sample_size(w)
    if ess < min_ess:
        raise InsufficientDataError(
            f"only {ess:.1f} effective ruined samples at u={samples.u} (need {min_ess})"
        )
    w = w / w.sum()
    mean = float(np.dot(w, x))
    stderr = float(math.sqrt(np.dot(w * w, (x - mean) ** 2)))
    ks = ks_weighted(x, w, lambda z: -np.expm1(-z / e_T))
    return ConditionalRuinTime(samples.u, x, w, mean, stderr, ess, float(e_T), ks)


def conditional_ruin_time(model, u, m=1024, n=100_000, seed=0, min_ess=MIN_CONDITIONAL_ESS, **kwargs):
    """Importance-sampled conditional law of ``u^2 (T - tau(u))`` given ruin.

    Raises
    ------
    InsufficientDataError
        When fewer than ``min_ess`` effective ruined samples are available.
    """
    profile = kwargs.pop("profile", None) or check_hypotheses(model)
    report = ruin_prob_asymptotic(model, u, profile=profile)
    samples = simulate_ruin(model, [u], m=m, n=n, seed=seed, method=IMPORTANCE,
                            profile=profile, **kwargs)[0]
    law = conditional_law(samples, report.ruin_time_mean, min_ess)
    psi = summarize(samples, seed, IMPORTANCE, m)
    return ConditionalRuinTime(**{**law.__dict__, "psi": psi})


SAMPLE_COLUMNS = ("path_id", "ruined", "tau", "rescaled", "weight")


def write_samples_csv(path, samples):
    """Dump :class:`RuinSamples` with columns ``path_id,ruined,tau,rescaled,weight``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_COLUMNS)
        for i in range(len(samples)):
            hit = bool(samples.ruined[i])
            writer.writerow([
                i,
                int(hit),
                repr(float(samples.tau[i])) if hit else "",
                repr(float(samples.rescaled[i])) if hit else "",
                repr(float(samples.weight[i])),
            ])
