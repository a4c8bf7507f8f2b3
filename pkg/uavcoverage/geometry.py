"""
Distance laws of the nearest LoS/NLoS UAV-BS, exclusion distances of the
interferers implied by the association rule, and association probabilities.

The null-probability exponents Lambda_link(z) = int_0^z t P_link(t) dt show up
inside every outer integrand of the analysis, so they are tabulated once per
(environment, altitude, truncation radius) and interpolated with a cubic
Hermite spline whose slopes z P_link(z) are exact.

All spatial integrals stop at the truncation radius r_max shared with the
simulator, whose window is the disk of the same radius.
"""

import logging
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from uavcoverage.channel import LinkClass, link_probability
from uavcoverage.errors import DomainError
from uavcoverage.quadrature import gauss_legendre_panels, integrate
from uavcoverage.scenario import Deployment, Environment, NumericsConfig

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ServingContext:
    """
    Serving link class and 3D distance. With an altitude the distance must
    reach it; exclusion_limits enforces the same against the deployment.
    """

    link: LinkClass
    r: float  # 3D distance to the serving UAV-BS, m
    altitude: Optional[float] = None

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"serving distance must be positive, got {self.r}")
        if self.altitude is not None:
            _require_reach(self.r, self.altitude)


def _require_reach(r: float, altitude: float) -> None:
    if r < altitude * (1.0 - 1e-12):
        raise DomainError(f"serving distance {r:g} m below the altitude {altitude:g} m")


def horizontal_reach(h: float, r: ArrayLike) -> ArrayLike:
    """l(r) = sqrt(r^2 - h^2), clamped at zero."""
    return np.sqrt(np.maximum(np.square(r) - h * h, 0.0))


def window_reach(dep: Deployment, num: NumericsConfig) -> float:
    """Horizontal radius of the truncation window, l(r_max)."""
    return float(horizontal_reach(dep.altitude, num.r_max))


class InnerIntegralTable:
    """
    Lambda(z) = int_0^z t P_link(t) dt for z in [0, l_max].

    Panel integrals use a 10-point Gauss-Legendre rule on a grid dense near
    the origin (where P_link changes on the scale of the altitude) and
    geometric beyond. Queries past l_max return Lambda(l_max): the truncated
    network has no points outside the window.

    Time Complexity: O(n) to build, O(log n) per query.
    """

    def __init__(self, env: Environment, altitude: float, l_max: float, link: LinkClass):
        start = time.time()
        self.link = link
        self.altitude = altitude
        self.l_max = l_max

        near = min(40.0 * altitude, l_max)
        nodes = np.linspace(0.0, near, 1601)
        if near < l_max:
            nodes = np.concatenate([nodes, np.geomspace(near, l_max, 401)[1:]])

        def density(t):
            return t * link_probability(env, altitude, t, link)

        gl_nodes, gl_weights = gauss_legendre_panels(nodes, order=10)
        increments = (gl_weights * density(gl_nodes)).reshape(len(nodes) - 1, -1).sum(axis=1)
        values = np.concatenate([[0.0], np.cumsum(increments)])
        self._spline = CubicHermiteSpline(nodes, values, density(nodes))
        self.total = float(values[-1])

        logger.debug(
            f"Built {link.value} inner-integral table: h={altitude:g} m, l_max={l_max:g} m, "
            f"{len(nodes)} nodes in {1000 * (time.time() - start):.1f} ms"
        )

    def __call__(self, z: ArrayLike) -> ArrayLike:
        z = np.clip(z, 0.0, self.l_max)
        out = self._spline(z)
        return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=128)
def inner_integral_table(env: Environment, altitude: float, r_max: float, link: LinkClass) -> InnerIntegralTable:
    return InnerIntegralTable(env, altitude, float(horizontal_reach(altitude, r_max)), link)


def _table(env: Environment, dep: Deployment, num: Optional[NumericsConfig], link: LinkClass) -> InnerIntegralTable:
    num = num or NumericsConfig()
    return inner_integral_table(env, dep.altitude, num.r_max, link)


def _check_distance(dep: Deployment, r: ArrayLike) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < dep.altitude * (1.0 - 1e-12)):
        raise DomainError(f"3D distance below the altitude {dep.altitude:g} m")
    return r


def _scalar(x: np.ndarray) -> ArrayLike:
    return float(x) if np.ndim(x) == 0 else x


def nearest_distance_cdf(
    env: Environment, dep: Deployment, link: LinkClass, r: ArrayLike, num: Optional[NumericsConfig] = None
) -> ArrayLike:
    """P(R_link <= r) = 1 - exp(-2 pi lambda Lambda_link(l(r)))."""
    r = _check_distance(dep, r)
    table = _table(env, dep, num, link)
    return _scalar(-np.expm1(-TWO_PI * dep.lambda_density * table(horizontal_reach(dep.altitude, r))))


def nearest_distance_pdf(
    env: Environment, dep: Deployment, link: LinkClass, r: ArrayLike, num: Optional[NumericsConfig] = None
) -> ArrayLike:
    """Density of the 3D distance to the nearest UAV-BS of the given class."""
    r = _check_distance(dep, r)
    num = num or NumericsConfig()
    table = _table(env, dep, num, link)
    z = horizontal_reach(dep.altitude, r)
    lam = dep.lambda_density
    pdf = TWO_PI * lam * r * link_probability(env, dep.altitude, z, link) * np.exp(-TWO_PI * lam * table(z))
    return _scalar(np.where(r <= num.r_max, pdf, 0.0))


def horizontal_distance_cdf(
    env: Environment, dep: Deployment, link: LinkClass, z: ArrayLike, num: Optional[NumericsConfig] = None
) -> ArrayLike:
    z = np.asarray(z, dtype=float)
    table = _table(env, dep, num, link)
    return _scalar(-np.expm1(-TWO_PI * dep.lambda_density * table(z)))


def horizontal_distance_pdf(
    env: Environment, dep: Deployment, link: LinkClass, z: ArrayLike, num: Optional[NumericsConfig] = None
) -> ArrayLike:
    """Density of the horizontal distance to the projection of the nearest UAV-BS of a class."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("horizontal distance must be non-negative")
    table = _table(env, dep, num, link)
    lam = dep.lambda_density
    pdf = TWO_PI * lam * z * link_probability(env, dep.altitude, z, link) * np.exp(-TWO_PI * lam * table(z))
    return _scalar(np.where(z <= table.l_max, pdf, 0.0))


def los_dominance_threshold(env: Environment, h: float) -> float:
    """Serving LoS distance beyond which the NLoS exclusion distance exceeds h."""
    return (env.eta_los / env.eta_nlos) ** (1.0 / env.alpha_los) * h ** (env.alpha_nlos / env.alpha_los)


def exclusion_distance_los(env: Environment, r: ArrayLike) -> ArrayLike:
    """
    Closest possible interfering LoS UAV-BS when the serving one is NLoS at r.

    d_L = (eta_L / eta_N)^(1/alpha_L) r^(alpha_N/alpha_L), r in meters.
    """
    ratio = (env.eta_los / env.eta_nlos) ** (1.0 / env.alpha_los)
    return _scalar(ratio * np.asarray(r, dtype=float) ** (env.alpha_nlos / env.alpha_los))


def exclusion_distance_nlos(env: Environment, h: float, r: ArrayLike) -> ArrayLike:
    """
    Closest possible interfering NLoS UAV-BS when the serving one is LoS at r.

    Equal to h up to los_dominance_threshold, then
    (eta_N / eta_L)^(1/alpha_N) r^(alpha_L/alpha_N).
    """
    r = np.asarray(r, dtype=float)
    far = (env.eta_nlos / env.eta_los) ** (1.0 / env.alpha_nlos) * r ** (env.alpha_los / env.alpha_nlos)
    return _scalar(np.where(r <= los_dominance_threshold(env, h), h, far))


def exclusion_limits(env: Environment, dep: Deployment, ctx: ServingContext) -> Tuple[float, float]:
    """
    Horizontal lower limits (v_nlos, v_los) of the two interferer fields.

    NLoS serving: NLoS interferers lie beyond l(r), LoS ones beyond l(d_L).
    LoS serving: NLoS interferers lie beyond l(d_N), LoS ones beyond l(r).
    """
    h = dep.altitude
    _require_reach(ctx.r, h)
    if ctx.link is LinkClass.NLOS:
        return float(horizontal_reach(h, ctx.r)), float(horizontal_reach(h, exclusion_distance_los(env, ctx.r)))
    return float(horizontal_reach(h, exclusion_distance_nlos(env, h, ctx.r))), float(horizontal_reach(h, ctx.r))


def effective_support(
    env: Environment, dep: Deployment, link: LinkClass, num: Optional[NumericsConfig] = None
) -> float:
    """Distance where the nearest-distance CDF reaches 1 - support_tail, capped at r_max."""
    num = num or NumericsConfig()
    target = 1.0 - num.support_tail
    if nearest_distance_cdf(env, dep, link, num.r_max, num) <= target:
        return num.r_max
    return brentq(
        lambda r: nearest_distance_cdf(env, dep, link, r, num) - target,
        dep.altitude,
        num.r_max,
        xtol=1e-9 * dep.altitude,
    )


def _association_nlos(env: Environment, dep: Deployment, num: NumericsConfig) -> float:
    h = dep.altitude
    lam = dep.lambda_density
    los_table = inner_integral_table(env, h, num.r_max, LinkClass.LOS)
    nlos_table = inner_integral_table(env, h, num.r_max, LinkClass.NLOS)
    ratio = (env.eta_los / env.eta_nlos) ** (2.0 / env.alpha_los)
    power = env.alpha_nlos / env.alpha_los

    def integrand(z: float) -> float:
        u = ratio * (z * z + h * h) ** power - h * h
        no_los_closer = np.exp(-TWO_PI * lam * los_table(np.sqrt(max(u, 0.0))))
        f_z = TWO_PI * lam * z * link_probability(env, h, z, LinkClass.NLOS) * np.exp(-TWO_PI * lam * nlos_table(z))
        return float(f_z * no_los_closer)

    z_top = float(horizontal_reach(h, effective_support(env, dep, LinkClass.NLOS, num)))
    if z_top <= 0.0:
        return 0.0
    points = [p for p in (0.1 * h, h, 3.0 * h, 10.0 * h) if p < z_top]
    return integrate(integrand, 0.0, z_top, num.tolerance, points=points).value


@lru_cache(maxsize=256)
def _association_cached(env: Environment, dep: Deployment, num: NumericsConfig) -> float:
    return 1.0 - _association_nlos(env, dep, num)


def association_probability_los(
    env: Environment, dep: Deployment, num: Optional[NumericsConfig] = None
) -> float:
    """
    Probability that the typical user is served by a LoS UAV-BS.

    A_L = 1 - int f_{Z_N}(z) P(Z_L > sqrt(U(z))) dz, with
    U(z) = (eta_L/eta_N)^(2/alpha_L) (z^2 + h^2)^(alpha_N/alpha_L) - h^2
    clamped at zero (an empty LoS exclusion disk).
    """
    return _association_cached(env, dep, num or NumericsConfig())


def association_probabilities(
    env: Environment, dep: Deployment, num: Optional[NumericsConfig] = None
) -> Dict[LinkClass, float]:
    a_los = association_probability_los(env, dep, num)
    return {LinkClass.LOS: a_los, LinkClass.NLOS: 1.0 - a_los}
