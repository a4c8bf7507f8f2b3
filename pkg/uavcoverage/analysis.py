"""
Analytical coverage probability and average rate.

The interference Laplace transform conditioned on the serving link class and
distance is evaluated by nested adaptive quadrature: an outer integral over
the serving distance r and, for every r, two inner integrals over the
horizontal positions of the NLoS and LoS interferers. The LoS branch expands
the Gamma-CDF approximation (1 - exp(-c m g))^m binomially, so its coverage is
an alternating sum of m Laplace-transform terms; the NLoS branch (Rayleigh)
is the single k = 1 term. With GammaBound.EXACT the LoS branch keeps the
Gamma CCDF e^(-x) sum_{j<m} x^j / j! instead, which needs the first m - 1
derivatives of the transform; their inner integrals ride along with the
transform's own.

Each branch is conditioned on a UAV-BS of its class being present inside
the outer integration range, so both conditional coverages tend to one as
T goes to zero.

Inner integrals are vectorized over every transform argument needed at a
given r (all binomial terms times all thresholds or rate nodes), so a whole
coverage curve costs one nested pass.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb, poch

from uavcoverage.channel import GammaBound, LinkClass, alzer_alpha, link_probability
from uavcoverage.errors import DomainError
from uavcoverage.geometry import (
    TWO_PI,
    ServingContext,
    association_probabilities,
    effective_support,
    exclusion_limits,
    nearest_distance_cdf,
    nearest_distance_pdf,
    window_reach,
)
from uavcoverage.quadrature import Tolerance, gauss_legendre_panels, integrate_tail_vec, integrate_vec
from uavcoverage.scenario import Deployment, Environment, NumericsConfig, derived_zeta

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

NATS_PER_BIT = math.log(2.0)
# last-decade share of the LoS interference exponent above which r_max is reported as too small
TAIL_WARNING = 0.1


@dataclass(frozen=True)
class LaplaceQuery:
    s: float  # per watt
    ctx: ServingContext

    def __post_init__(self):
        if not self.s >= 0:
            raise DomainError(f"Laplace argument must be non-negative, got {self.s}")


@dataclass(frozen=True)
class MetricResult:
    """
    A coverage probability or a rate with its per-class decomposition.

    value = sum(weights[c] * components[c]); error_estimate is the largest
    quadrature error estimate met on the way, tail_fraction the largest share
    of an interference exponent contributed by the last decade below r_max.
    """

    value: float
    components: Dict[LinkClass, float]
    weights: Dict[LinkClass, float]
    error_estimate: float = 0.0
    tail_fraction: float = 0.0


@dataclass(frozen=True)
class RateResult(MetricResult):
    bits_per_second: float = 0.0
    y_tail_fraction: float = 0.0

    @property
    def mbps(self) -> float:
        return self.bits_per_second / 1e6


@dataclass
class _Diagnostics:
    error: float = 0.0
    tail: float = 0.0

    def absorb(self, error: float, tail: float = 0.0) -> None:
        self.error = max(self.error, error)
        self.tail = max(self.tail, tail)


def _breakpoints(lo: float, hi: float, scale: float, count: int = 6) -> List[float]:
    start = max(lo, 0.1 * scale)
    if hi <= start:
        return []
    return list(np.geomspace(start, hi, count)[1:-1]) + ([start] if start > lo else [])


def _interference_exponent(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    ctx: ServingContext,
    s: np.ndarray,
    tol: Tolerance,
    diag: Optional[_Diagnostics] = None,
    orders: int = 1,
) -> np.ndarray:
    """
    2 pi lambda (I_N + I_L) for every argument in s.

    With orders > 1 the result gains a leading axis: row k >= 1 holds
    (-1)^(k+1) s^k / (k-1)! times the k-th s-derivative of row 0, the
    coefficients of the Gamma-CCDF series.
    """
    h = dep.altitude
    m = env.m
    l_max = window_reach(dep, num)
    v_nlos, v_los = exclusion_limits(env, dep, ctx)
    zeta_n = derived_zeta(env, dep, LinkClass.NLOS)
    zeta_l = derived_zeta(env, dep, LinkClass.LOS)
    half_n = -0.5 * env.alpha_nlos
    half_l = -0.5 * env.alpha_los
    # d^k/ds^k of 1 - (1 + s b)^-n is (-1)^(k+1) n(n+1)...(n+k-1) b^k (1 + s b)^-(n+k)
    nlos_coef = [float(k) for k in range(1, orders)]
    los_coef = [poch(m, k) / math.factorial(k - 1) for k in range(1, orders)]

    def nlos_field(t: float) -> np.ndarray:
        x = s * (zeta_n * (t * t + h * h) ** half_n)
        ratio = x / (1.0 + x)
        weight = t * link_probability(env, h, t, LinkClass.NLOS)
        if orders == 1:
            return ratio * weight
        rows = [ratio] + [c * ratio ** k / (1.0 + x) for k, c in enumerate(nlos_coef, start=1)]
        return np.stack(rows) * weight

    def los_field(t: float) -> np.ndarray:
        x = s * (zeta_l * (t * t + h * h) ** half_l / m)
        log_survive = -m * np.log1p(x)
        weight = t * link_probability(env, h, t, LinkClass.LOS)
        if orders == 1:
            return -np.expm1(log_survive) * weight
        ratio = x / (1.0 + x)
        survive = np.exp(log_survive)
        rows = [-np.expm1(log_survive)] + [c * ratio ** k * survive for k, c in enumerate(los_coef, start=1)]
        return np.stack(rows) * weight

    i_nlos = integrate_tail_vec(nlos_field, v_nlos, l_max, tol, _breakpoints(v_nlos, l_max, h))
    i_los = integrate_tail_vec(los_field, v_los, l_max, tol, _breakpoints(v_los, l_max, h))
    if diag is not None:
        diag.absorb(i_nlos.error + i_los.error, i_los.tail_fraction)
    return TWO_PI * dep.lambda_density * (i_nlos.value + i_los.value)


def laplace_interference(env: Environment, dep: Deployment, num: NumericsConfig, q: LaplaceQuery) -> float:
    """
    E[exp(-s I)] given the serving class and distance.

    Interferers of the serving class lie beyond the serving distance, those of
    the other class beyond the exclusion distance of the association rule;
    both fields stop at the truncation radius.
    """
    exponent = _interference_exponent(env, dep, num, q.ctx, np.array([q.s], dtype=float), num.tolerance)
    return float(np.exp(-exponent[0]))


def _branch_terms(
    env: Environment, dep: Deployment, link: LinkClass, bound: GammaBound
) -> Tuple[np.ndarray, List[int], float]:
    """Binomial orders k, signed coefficients and the per-threshold scale beta."""
    if link is LinkClass.NLOS:
        return np.array([1.0]), [1], 1.0 / derived_zeta(env, dep, LinkClass.NLOS)
    m = env.m
    if bound is GammaBound.EXACT:
        return np.array([1.0]), [1], m / derived_zeta(env, dep, LinkClass.LOS)
    ks = np.arange(1, m + 1, dtype=float)
    coeffs = [int(comb(m, k, exact=True)) * (-1) ** (k + 1) for k in range(1, m + 1)]
    beta = alzer_alpha(m, bound) * m / derived_zeta(env, dep, LinkClass.LOS)
    return ks, coeffs, beta


def _serving_integral(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    link: LinkClass,
    thetas: np.ndarray,
    weights: Optional[np.ndarray],
    bound: GammaBound,
    diag: _Diagnostics,
) -> np.ndarray:
    """
    int_h^{r_eff} sum_k c_k exp(-s sigma^2) L_I(s | r) f_R(r) dr / F_R(r_eff), s = k beta r^alpha theta.

    Without weights the result has one entry per theta. With a weight matrix
    W of shape (len(thetas), p) the theta-sum is taken inside the r-integral
    and the result has p entries. Dividing by F_R(r_eff) conditions on a
    UAV-BS of the class inside the integration range.
    """
    ks, coeffs, beta = _branch_terms(env, dep, link, bound)
    orders = env.m if bound is GammaBound.EXACT and link is LinkClass.LOS else 1
    alpha = env.exponent(link)
    noise = dep.noise_power
    tol = num.tolerance
    inner_tol = tol.tighter()
    r_lo = dep.altitude
    r_hi = effective_support(env, dep, link, num)

    def outer(r: float) -> np.ndarray:
        s = (ks[:, None] * (beta * r ** alpha)) * thetas[None, :]
        ctx = ServingContext(link, r, r_lo)
        fields = _interference_exponent(env, dep, num, ctx, s.ravel(), inner_tol, diag, orders)
        fields = fields.reshape((orders,) + s.shape)
        terms = np.exp(-(s * noise) - fields[0])
        if orders > 1:
            series = fields[1:].copy()
            series[0] += s * noise
            terms = terms * _ccdf_series(series)
        if weights is not None:
            terms = terms @ weights
        return terms * nearest_distance_pdf(env, dep, link, r, num)

    mass = nearest_distance_cdf(env, dep, link, r_hi, num) if r_hi > r_lo else 0.0
    if mass <= 0.0:
        return np.zeros(thetas.size if weights is None else weights.shape[1])
    result = integrate_vec(outer, r_lo, r_hi, tol, _breakpoints(r_lo, r_hi, r_lo))
    diag.absorb(result.error / mass)
    per_k = np.asarray(result.value)

    # alternating binomial sum, exactly rounded
    return np.array(
        [math.fsum(c * per_k[i, j] for i, c in enumerate(coeffs)) for j in range(per_k.shape[1])]
    ) / mass


def _ccdf_series(u: np.ndarray) -> np.ndarray:
    """
    sum_{j=0}^{n} N_j for rows u_1..u_n, with N_0 = 1 and j N_j = sum_k u_k N_{j-k}.

    Multiplied by exp(-s sigma^2) L_I(s) this is E[exp(-s X) sum_j (s X)^j / j!]
    for X = sigma^2 + I, the Gamma CCDF averaged over noise plus interference.
    """
    series = [np.ones_like(u[0])]
    for j in range(1, len(u) + 1):
        series.append(sum(u[k - 1] * series[j - k] for k in range(1, j + 1)) / j)
    return np.sum(series, axis=0)


def _thresholds(T: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(T, dtype=float))
    if arr.ndim != 1:
        raise DomainError("thresholds must be a scalar or a 1-D array")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("SINR thresholds must be finite and non-negative")
    return arr, np.ndim(T) == 0


def _conditional_coverage(env, dep, num, link, T, bound) -> Tuple[np.ndarray, bool, _Diagnostics]:
    thetas, scalar = _thresholds(T)
    diag = _Diagnostics()
    values = np.clip(_serving_integral(env, dep, num, link, thetas, None, bound, diag), 0.0, 1.0)
    return values, scalar, diag


def conditional_coverage(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    link: LinkClass,
    T: ArrayLike,
    bound: GammaBound = GammaBound.UPPER,
) -> ArrayLike:
    """
    Coverage probability given the serving class, for linear threshold(s) T.

    LoS: sum_k C(m,k) (-1)^(k+1) int exp(-k mu sigma^2 r^aL) L_I(k mu r^aL | r) f_RL(r) dr
    with mu = c m T / zeta_L. NLoS: int exp(-sigma^2 T r^aN / zeta_N)
    L_I(T r^aN / zeta_N | r) f_RN(r) dr.
    """
    values, scalar, _ = _conditional_coverage(env, dep, num, link, T, bound)
    return float(values[0]) if scalar else values


def _warn_truncation(what: str, tail: float, num: NumericsConfig) -> None:
    if tail > TAIL_WARNING:
        logger.warning(
            f"{what}: the last decade below r_max={num.r_max:g} m carries {tail:.1%} of the LoS interference "
            f"exponent; results describe the truncated network"
        )


def _combine(components: Dict[LinkClass, float], weights: Dict[LinkClass, float]) -> float:
    return math.fsum(weights[c] * components[c] for c in LinkClass)


def coverage_curve(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    thresholds: Sequence[float],
    bound: GammaBound = GammaBound.UPPER,
) -> List[MetricResult]:
    """Coverage probability for each linear threshold, one nested pass per branch."""
    weights = association_probabilities(env, dep, num)
    per_link = {}
    for link in LinkClass:
        values, _, diag = _conditional_coverage(env, dep, num, link, np.asarray(thresholds, dtype=float), bound)
        per_link[link] = (values, diag)
    error = max(d.error for _, d in per_link.values())
    tail = max(d.tail for _, d in per_link.values())
    _warn_truncation("coverage", tail, num)

    results = []
    for j in range(len(thresholds)):
        components = {link: float(per_link[link][0][j]) for link in LinkClass}
        results.append(MetricResult(_combine(components, weights), components, dict(weights), error, tail))
    return results


def coverage(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    T: float,
    bound: GammaBound = GammaBound.UPPER,
) -> MetricResult:
    """P_C = A_L P_CL + A_N P_CN at linear threshold T."""
    return coverage_curve(env, dep, num, [float(T)], bound)[0]


def rate_nodes(y_max: float, per_decade: int = 3, order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre rule on (0, y_max] for the rate's y-integral.

    Panels are uniform in log10(e^y - 1) from 1e-6 to e^y_max - 1, plus one
    panel down to y = 0, so the rule resolves both the steep start of
    noise-limited integrands and the slow SINR-scale decay.
    """
    top = math.log10(math.expm1(y_max))
    count = max(2, int(math.ceil((top + 6.0) * per_decade)))
    edges = np.log1p(np.concatenate([[0.0], np.logspace(-6.0, top, count + 1)]))
    edges[-1] = y_max
    return gauss_legendre_panels(edges, order)


def _conditional_rate(env, dep, num, link, bound) -> Tuple[float, float, _Diagnostics]:
    y, w = rate_nodes(num.y_max)
    last_unit = np.where(y >= num.y_max - 1.0, w, 0.0)
    weights = np.stack([w, last_unit], axis=1)
    diag = _Diagnostics()
    total, tail = _serving_integral(env, dep, num, link, np.expm1(y), weights, bound, diag)
    share = abs(tail) / abs(total) if total else 0.0
    if share > num.quad_rel_tol:
        logger.warning(
            f"{link.value} rate: last nat below y_max={num.y_max:g} carries {share:.2e} of the total; "
            f"raise numerics.y_max"
        )
    return max(total, 0.0), share, diag


def conditional_rate(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    link: LinkClass,
    bound: GammaBound = GammaBound.UPPER,
) -> float:
    """
    Average rate in nats/Hz given the serving class.

    For every serving distance r the inner integral over y in (0, y_max) of
    exp(-k rho sigma^2 r^alpha (e^y - 1)) L_I(k rho r^alpha (e^y - 1) | r)
    is taken on a fixed Gauss-Legendre rule, then integrated against f_R(r).
    The two noise exponentials of the closed form are merged into one to
    avoid overflow.
    """
    return _conditional_rate(env, dep, num, link, bound)[0]


def rate(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    bound: GammaBound = GammaBound.UPPER,
) -> RateResult:
    """tau = A_L tau_L + A_N tau_N in nats/Hz, with bits/s at the deployment bandwidth."""
    weights = association_probabilities(env, dep, num)
    components: Dict[LinkClass, float] = {}
    error = tail = y_tail = 0.0
    for link in LinkClass:
        value, share, diag = _conditional_rate(env, dep, num, link, bound)
        components[link] = value
        error, tail, y_tail = max(error, diag.error), max(tail, diag.tail), max(y_tail, share)
    _warn_truncation("rate", tail, num)
    value = _combine(components, weights)
    return RateResult(
        value=value,
        components=components,
        weights=dict(weights),
        error_estimate=error,
        tail_fraction=tail,
        bits_per_second=value * dep.bandwidth / NATS_PER_BIT,
        y_tail_fraction=y_tail,
    )


def rate_via_coverage(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    link: LinkClass,
    bound: GammaBound = GammaBound.UPPER,
) -> float:
    """
    int_0^y_max P_C(e^y - 1) dy for one branch, through the coverage path.

    Uses its own y-rule (coarser panels, higher order) and integrates the
    coverage curve after the r-integral, the reverse order of conditional_rate.
    """
    y, w = rate_nodes(num.y_max, per_decade=2, order=12)
    values, _, _ = _conditional_coverage(env, dep, num, link, np.expm1(y), bound)
    return float(w @ values)


def sweep_thresholds_db(values_db: Iterable[float]) -> np.ndarray:
    """dB thresholds to the linear scale the analysis works in."""
    return 10.0 ** (np.asarray(list(values_db), dtype=float) / 10.0)
