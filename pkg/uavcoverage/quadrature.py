"""
Deterministic numerical integration used by the geometry and analysis modules.

Scalar integrands go through QUADPACK's adaptive Gauss-Kronrod routine
(``scipy.integrate.quad``); vector-valued integrands, such as a Laplace
transform evaluated for a whole grid of arguments at once, go through
``scipy.integrate.quad_vec``. Both return a :class:`QuadResult` carrying the
error estimate, and both raise :class:`QuadratureError` when the subdivision
limit is exhausted with the error still above tolerance.

Time Complexity: O(k * n) integrand evaluations, k = subintervals (<= limit),
n = 21 Kronrod nodes per subinterval.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, quad_vec

from uavcoverage.errors import QuadratureError

logger = logging.getLogger(__name__)

Integrand = Callable[[float], Union[float, np.ndarray]]
Value = Union[float, np.ndarray]

# Subdivision-limit hits within this factor of the target are accepted.
LIMIT_SLACK = 10.0


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-8
    abs: float = 1e-12
    limit: int = 200

    def tighter(self, factor: float = 10.0) -> "Tolerance":
        """Tolerance for an inner integral nested inside an outer one."""
        return replace(self, rel=self.rel / factor, abs=self.abs / factor)

    def target(self, value: Value) -> float:
        return max(self.abs, self.rel * float(np.max(np.abs(value))))


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class QuadResult:
    value: Value
    error: float
    last_decade: Optional[Value] = None
    intervals: int = 0

    @property
    def tail_fraction(self) -> float:
        """Largest share of the total contributed by the last decade."""
        if self.last_decade is None:
            return 0.0
        total = np.abs(np.asarray(self.value, dtype=float))
        tail = np.abs(np.asarray(self.last_decade, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(total > 0.0, tail / total, 0.0)
        return float(np.max(share))

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(
            value=self.value + other.value,
            error=self.error + other.error,
            intervals=self.intervals + other.intervals,
        )


def _inner_points(points: Optional[Sequence[float]], a: float, b: float) -> Optional[list]:
    if points is None:
        return None
    inside = sorted({float(p) for p in points if a < p < b})
    return inside or None


def integrate(
    f: Integrand,
    a: float,
    b: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    points: Optional[Sequence[float]] = None,
) -> QuadResult:
    """
    Adaptive Gauss-Kronrod integral of a scalar function over [a, b].

    Returns once the error estimate is below max(tol.abs, tol.rel * |value|)
    or the subdivision limit is reached; in the latter case an error estimate
    still above LIMIT_SLACK times the target raises QuadratureError naming the
    worst subinterval.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"integration bounds must be finite, got [{a}, {b}]")
    if b <= a:
        if b == a:
            return QuadResult(0.0, 0.0)
        raise ValueError(f"integration bounds reversed: [{a}, {b}]")

    out = quad(
        f,
        a,
        b,
        epsabs=tol.abs,
        epsrel=tol.rel,
        limit=tol.limit,
        points=_inner_points(points, a, b),
        full_output=1,
    )
    value, error, info = out[0], out[1], out[2]
    if len(out) > 3:
        last = int(info.get("last", 0))
        if last >= tol.limit and error > LIMIT_SLACK * tol.target(value):
            errors = np.asarray(info["elist"][:last])
            worst = int(np.argmax(errors))
            raise QuadratureError(
                f"subdivision limit {tol.limit} reached on [{a:.6g}, {b:.6g}]",
                value,
                error,
                (float(info["alist"][worst]), float(info["blist"][worst])),
            )
        if last >= tol.limit:
            logger.warning(f"quad on [{a:.6g}, {b:.6g}] hit the subdivision limit {tol.limit}, error {error:.3g}")
        else:
            logger.debug(f"quad on [{a:.6g}, {b:.6g}] returned early: {out[3].splitlines()[0]}")
    return QuadResult(float(value), float(error), intervals=int(info.get("last", 0)))


def integrate_vec(
    f: Integrand,
    a: float,
    b: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    points: Optional[Sequence[float]] = None,
) -> QuadResult:
    """
    Adaptive Gauss-Kronrod integral of a vector-valued function over [a, b].

    The error criterion applies to the max-norm over all components.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"integration bounds must be finite, got [{a}, {b}]")
    if b <= a:
        if b == a:
            return QuadResult(np.zeros_like(np.asarray(f(a), dtype=float)), 0.0)
        raise ValueError(f"integration bounds reversed: [{a}, {b}]")

    value, error, info = quad_vec(
        f,
        a,
        b,
        epsabs=tol.abs,
        epsrel=tol.rel,
        norm="max",
        limit=tol.limit,
        points=_inner_points(points, a, b),
        full_output=True,
    )
    if info.status == 2:
        raise QuadratureError(f"non-finite integrand on [{a:.6g}, {b:.6g}]", float(np.max(np.abs(value))), error)
    if info.status == 1 and error > LIMIT_SLACK * tol.target(value):
        worst = int(np.argmax(info.errors))
        lo, hi = info.intervals[worst]
        raise QuadratureError(
            f"subdivision limit {tol.limit} reached on [{a:.6g}, {b:.6g}]",
            float(np.max(np.abs(value))),
            float(error),
            (float(lo), float(hi)),
        )
    if info.status == 1:
        logger.warning(f"quad_vec on [{a:.6g}, {b:.6g}] hit the subdivision limit {tol.limit}, error {error:.3g}")
    return QuadResult(np.asarray(value, dtype=float), float(error), intervals=len(info.intervals))


def _tail(integrator, f, a, r_max, tol, points) -> QuadResult:
    if a >= r_max:
        zero = integrator(f, r_max, r_max, tol).value
        return QuadResult(zero, 0.0, last_decade=zero)
    split = max(a, r_max / 10.0)
    tail = integrator(f, split, r_max, tol, points)
    if split > a:
        head = integrator(f, a, split, tol, points)
        total = head + tail
    else:
        total = tail
    return replace(total, last_decade=tail.value)


def integrate_tail(
    f: Integrand,
    a: float,
    r_max: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    points: Optional[Sequence[float]] = None,
) -> QuadResult:
    """
    Integral over [a, r_max] standing in for a semi-infinite one.

    The result also records the contribution of the last decade
    [r_max / 10, r_max] so callers can flag under-truncation. An empty range
    (a >= r_max) integrates to zero.
    """
    return _tail(integrate, f, a, r_max, tol, points)


def integrate_tail_vec(
    f: Integrand,
    a: float,
    r_max: float,
    tol: Tolerance = DEFAULT_TOLERANCE,
    points: Optional[Sequence[float]] = None,
) -> QuadResult:
    """Vector-valued counterpart of :func:`integrate_tail`."""
    return _tail(integrate_vec, f, a, r_max, tol, points)


def gauss_legendre_panels(edges: Sequence[float], order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of a composite Gauss-Legendre rule.

    One ``order``-point rule per panel [edges[i], edges[i+1]]; the flattened
    arrays integrate smooth functions as ``weights @ f(nodes)``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0.0):
        raise ValueError("panel edges must be a strictly increasing sequence of at least two values")
    x, w = leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()
