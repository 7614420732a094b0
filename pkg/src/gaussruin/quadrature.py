"""Adaptive Gauss-Kronrod quadrature on intervals and triangles.

The 1-D integrator is a globally adaptive G7/K15 scheme: the interval with the
largest error estimate is bisected until the summed estimate drops below
``max(tol * |value|, ABS_FLOOR)``. Integrands are evaluated on arrays of nodes,
so ``f`` must accept a numpy array and return an array of the same shape.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

ABS_FLOOR = 1e-14
MAX_SUBDIVISIONS = 2000

# 15-point Kronrod nodes on [-1, 1] (non-negative half) with the embedded
# 7-point Gauss rule living on the odd-indexed nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:15:2] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fx = np.asarray(f(center + half * _NODES), dtype=float)
    if fx.shape != _NODES.shape:
        fx = np.broadcast_to(fx, _NODES.shape)
    if not np.all(np.isfinite(fx)):
        raise IntegrationError(f"integrand is not finite on [{a}, {b}]")
    k = half * float(np.dot(_KRONROD, fx))
    g = half * float(np.dot(_GAUSS, fx))
    return k, abs(k - g)


def _panels(a, b, points):
    if points is None:
        return [a, b]
    inner = np.unique(np.asarray(points, dtype=float))
    inner = inner[(inner > a) & (inner < b)]
    return [a, *inner.tolist(), b]


def integrate_1d(f, a, b, tol=1e-10, abs_floor=ABS_FLOOR, max_subdivisions=MAX_SUBDIVISIONS,
                 points=None):
    """Integrate ``f`` over ``[a, b]`` to relative tolerance ``tol``.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    a, b : float
        Integration limits with ``a <= b``.
    tol : float
        Relative tolerance. The absolute target never goes below ``abs_floor``.
    max_subdivisions : int
        Bisection budget. Exceeding it raises :class:`IntegrationError`
        carrying the best estimate.
    points : array_like, optional
        Known kinks of ``f``. Those inside ``(a, b)`` seed the initial
        partition, so piecewise-smooth integrands converge panel by panel.

    Returns
    -------
    QuadratureResult
    """
    a = float(a)
    b = float(b)
    if not a <= b:
        raise ValueError(f"integration limits must satisfy a <= b, got [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return QuadratureResult(0.0, 0.0, 1)

    heap = []
    edges = _panels(a, b, points)
    for lo, hi in zip(edges[:-1], edges[1:]):
        part, part_err = _gk15(f, lo, hi)
        heap.append((-part_err, lo, hi, part))
    heapq.heapify(heap)
    evaluations = 15 * len(heap)
    value = sum(item[3] for item in heap)
    total_err = sum(-item[0] for item in heap)
    max_subdivisions = max(max_subdivisions, 4 * len(heap))
    while total_err > max(tol * abs(value), abs_floor):
        if len(heap) > max_subdivisions:
            raise IntegrationError(
                f"no convergence after {max_subdivisions} subdivisions on [{a}, {b}]",
                value=value,
                error_estimate=total_err,
            )
        neg_err, lo, hi, part = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval cannot be split further in floating point
            heapq.heappush(heap, (neg_err, lo, hi, part))
            raise IntegrationError(
                f"interval [{lo}, {hi}] exhausted floating-point resolution",
                value=value,
                error_estimate=total_err,
            )
        left, left_err = _gk15(f, lo, mid)
        right, right_err = _gk15(f, mid, hi)
        evaluations += 30
        value += left + right - part
        total_err += left_err + right_err + neg_err
        heapq.heappush(heap, (-left_err, lo, mid, left))
        heapq.heappush(heap, (-right_err, mid, hi, right))

    # re-sum to shed the drift of the running updates
    value = float(np.sum([item[3] for item in heap]))
    total_err = float(np.sum([-item[0] for item in heap]))
    return QuadratureResult(value, total_err, evaluations)


def integrate_triangle(f, t, tol=1e-10, abs_floor=ABS_FLOOR, points=None):
    """Integrate ``f(v, w)`` over the triangle ``0 <= v <= w <= t``.

    The inner integral over ``v`` runs at tolerance ``tol / 4`` for each outer
    node ``w``. ``f`` is called with an array ``v`` and a scalar ``w``.
    ``points`` lists kink coordinates shared by both variables.
    """
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return QuadratureResult(0.0, 0.0, 1)

    inner_tol = tol / 4.0
    counts = [0]
    inner_err = [0.0]

    def outer(ws):
        out = np.empty_like(ws)
        for i, w in enumerate(ws):
            res = integrate_1d(lambda v: f(v, w), 0.0, w, inner_tol, abs_floor, points=points)
            out[i] = res.value
            counts[0] += res.evaluations
            inner_err[0] = max(inner_err[0], res.error_estimate)
        return out

    res = integrate_1d(outer, 0.0, t, tol, abs_floor, points=points)
    # inner errors propagate at most linearly over the outer interval
    err = res.error_estimate + inner_err[0] * t
    return QuadratureResult(res.value, err, counts[0])


def differentiate(f, t, h=1e-5, lower=None, upper=None):
    """Central difference of ``f`` at ``t``, one-sided at the domain edges.

    If ``t - h`` falls below ``lower`` (or ``t + h`` above ``upper``) a
    second-order one-sided stencil is used instead.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if lower is not None and t - h < lower:
        return (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2 * h)) / (2 * h)
    if upper is not None and t + h > upper:
        return (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2 * h)) / (2 * h)
    return (f(t + h) - f(t - h)) / (2 * h)
