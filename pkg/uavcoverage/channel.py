"""
Air-to-ground channel primitives.

LoS probability as a function of elevation angle, mean path gain per link
class, small-scale fading draws and the Gamma-CDF machinery behind the
coverage approximation. Every function accepts scalars or numpy arrays.
"""

from enum import Enum
from math import factorial
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy.special import gammainc

from uavcoverage.errors import DomainError

if TYPE_CHECKING:
    from uavcoverage.scenario import Deployment, Environment

ArrayLike = Union[float, np.ndarray]

MAX_SHAPE = 20


class LinkClass(str, Enum):
    LOS = "LoS"
    NLOS = "NLoS"

    @property
    def other(self) -> "LinkClass":
        return LinkClass.NLOS if self is LinkClass.LOS else LinkClass.LOS


class GammaBound(str, Enum):
    """
    How the Gamma CDF of the LoS serving gain enters coverage and rate.

    The names refer to the resulting coverage. UPPER uses the constant
    (m!)^(-1/m): its CDF lies below the exact one, so coverage and rate come
    out as upper bounds. LOWER uses the constant 1: its CDF lies above the
    exact one and bounds coverage from below. EXACT keeps the Gamma CCDF and
    evaluates it through derivatives of the interference Laplace transform.
    """

    UPPER = "upper"
    LOWER = "lower"
    EXACT = "exact"


def _check_shape(m: int) -> None:
    if int(m) != m or m < 1:
        raise DomainError(f"Nakagami shape must be a positive integer, got {m}")


def elevation_angle_deg(h: float, z: ArrayLike) -> ArrayLike:
    """Elevation angle in degrees; z = 0 gives 90 degrees."""
    return np.degrees(np.arctan2(h, z))


def los_probability(env: "Environment", h: float, z: ArrayLike) -> ArrayLike:
    """
    Probability that a UAV-BS at altitude h and horizontal distance z is LoS.

    P_L = 1 / (1 + a exp(-b (theta - a))), theta in degrees.
    """
    theta = elevation_angle_deg(h, z)
    return 1.0 / (1.0 + env.a * np.exp(-env.b * (theta - env.a)))


def link_probability(env: "Environment", h: float, z: ArrayLike, link: LinkClass) -> ArrayLike:
    p_los = los_probability(env, h, z)
    return p_los if link is LinkClass.LOS else 1.0 - p_los


def los_probability_floor(env: "Environment") -> float:
    """Limit of the LoS probability as the elevation angle goes to zero."""
    return 1.0 / (1.0 + env.a * np.exp(env.a * env.b))


def mean_path_gain(env: "Environment", dep: "Deployment", link: LinkClass, d: ArrayLike) -> ArrayLike:
    """Mean received power zeta_link * d^(-alpha_link) in watts, d >= altitude."""
    from uavcoverage.scenario import derived_zeta

    d = np.asarray(d, dtype=float)
    if np.any(d < dep.altitude):
        raise DomainError(f"3D distance below the altitude {dep.altitude} m")
    gain = derived_zeta(env, dep, link) * d ** (-env.exponent(link))
    return float(gain) if gain.ndim == 0 else gain


def sample_fading(link: LinkClass, m: int, rng: np.random.Generator, size=None) -> ArrayLike:
    """
    Unit-mean fading power gains.

    NLoS: exponential (Rayleigh amplitude). LoS: Gamma with shape m and scale
    1/m (Nakagami-m amplitude).
    """
    _check_shape(m)
    if link is LinkClass.NLOS:
        return rng.standard_exponential(size)
    return rng.gamma(m, 1.0 / m, size)


def alzer_alpha(m: int, bound: GammaBound = GammaBound.UPPER) -> float:
    """
    Constant c of (1 - exp(-c m g))^m: (m!)^(-1/m) for UPPER, 1 for LOWER.

    EXACT has no such constant and is rejected.
    """
    _check_shape(m)
    if bound is GammaBound.EXACT:
        raise DomainError("the exact Gamma CDF has no bound constant")
    if bound is GammaBound.LOWER or m == 1:
        return 1.0
    return float(factorial(m)) ** (-1.0 / m)


def gamma_cdf_exact(m: int, g: ArrayLike) -> ArrayLike:
    """
    CDF of the unit-mean Gamma(m, 1/m) fading gain at g.

    For integer m this is 1 - exp(-m g) sum_{j<m} (m g)^j / j!, the
    regularized lower incomplete gamma P(m, m g).
    """
    _check_shape(m)
    x = m * np.asarray(g, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("Gamma CDF argument must be non-negative")

    with np.errstate(over="ignore", invalid="ignore"):
        # head: 1 - e^-x sum_{j<m} x^j/j!; cancels badly for small x
        term = np.ones_like(x)
        partial = np.ones_like(x)
        for j in range(1, m):
            term = term * x / j
            partial = partial + term
        head = 1.0 - np.exp(-x) * partial

        # tail: e^-x sum_{j>=m} x^j/j!, used below x = 1
        term = term * x / m
        series = np.zeros_like(x)
        for j in range(m + 1, m + 30):
            series = series + term
            term = term * x / j
        tail = np.exp(-x) * series

        result = np.where(x < 1.0, tail, head)
    # e^-800 underflows, also covers x = inf
    result = np.clip(np.where(x > 800.0, 1.0, result), 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def gamma_cdf_reference(m: int, g: ArrayLike) -> ArrayLike:
    """Regularized lower incomplete gamma from scipy, used as an oracle."""
    return gammainc(m, m * np.asarray(g, dtype=float))


def gamma_cdf_bound(m: int, g: ArrayLike, bound: GammaBound = GammaBound.UPPER) -> ArrayLike:
    """(1 - exp(-c m g))^m with c the bound constant; EXACT returns the Gamma CDF."""
    if bound is GammaBound.EXACT:
        return gamma_cdf_exact(m, g)
    c = alzer_alpha(m, bound)
    g = np.asarray(g, dtype=float)
    result = (-np.expm1(-c * m * g)) ** m
    return float(result) if result.ndim == 0 else result


def gamma_cdf_approx(m: int, g: ArrayLike) -> ArrayLike:
    """Approximation of the Gamma CDF used by the coverage and rate expansions."""
    return gamma_cdf_bound(m, g, GammaBound.UPPER)
