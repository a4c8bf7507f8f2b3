"""
Unit tests for distance laws, exclusion distances and association
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from uavcoverage.channel import LinkClass, link_probability
from uavcoverage.errors import DomainError
from uavcoverage.geometry import (
    ServingContext,
    association_probabilities,
    association_probability_los,
    effective_support,
    exclusion_distance_los,
    exclusion_distance_nlos,
    exclusion_limits,
    horizontal_distance_cdf,
    horizontal_distance_pdf,
    horizontal_reach,
    inner_integral_table,
    los_dominance_threshold,
    nearest_distance_cdf,
    nearest_distance_pdf,
)
from uavcoverage.quadrature import integrate
from uavcoverage.scenario import Deployment, Environment, NumericsConfig

TIGHT_NUM = NumericsConfig(quad_rel_tol=1e-10, quad_abs_tol=1e-14)


class TestInnerIntegralTable:
    """Test the cached null-probability exponents"""

    @pytest.mark.parametrize("link", list(LinkClass))
    @pytest.mark.parametrize("z", [37.3, 500.0, 5000.0, 19000.0])
    def test_matches_direct_quadrature(self, dense_urban, link, z):
        """Spline lookup agrees with quad over [0, z]"""
        env, dep, num = dense_urban
        table = inner_integral_table(env, dep.altitude, num.r_max, link)
        direct = integrate(lambda t: t * link_probability(env, dep.altitude, t, link), 0.0, z, TIGHT_NUM.tolerance)
        assert table(z) == pytest.approx(direct.value, rel=2e-5)

    def test_clamps_beyond_window(self, dense_urban):
        """No points exist outside the window"""
        env, dep, num = dense_urban
        table = inner_integral_table(env, dep.altitude, num.r_max, LinkClass.LOS)
        assert table(1e6) == table.total
        assert table.l_max == pytest.approx(horizontal_reach(dep.altitude, num.r_max))


class TestNearestDistance:
    """Test the nearest LoS/NLoS distance laws"""

    @pytest.mark.parametrize("link", list(LinkClass))
    def test_cdf_boundaries(self, dense_urban, link):
        """CDF is zero at the altitude and increasing"""
        env, dep, num = dense_urban
        assert nearest_distance_cdf(env, dep, link, dep.altitude, num) == 0.0
        r = np.linspace(dep.altitude, 5000.0, 200)
        assert np.all(np.diff(nearest_distance_cdf(env, dep, link, r, num)) >= 0.0)

    @pytest.mark.parametrize("link", list(LinkClass))
    @pytest.mark.parametrize("r", [150.0, 300.0, 1000.0])
    def test_pdf_is_derivative(self, dense_urban, link, r):
        """Central difference of the CDF reproduces the pdf"""
        env, dep, num = dense_urban
        step = 1e-2
        slope = (
            nearest_distance_cdf(env, dep, link, r + step, num) - nearest_distance_cdf(env, dep, link, r - step, num)
        ) / (2.0 * step)
        assert nearest_distance_pdf(env, dep, link, r, num) == pytest.approx(slope, rel=1e-4)

    def test_pdf_integrates_to_cdf(self, dense_urban):
        """int_h^r f(t) dt = F(r)"""
        env, dep, num = dense_urban
        result = integrate(lambda t: nearest_distance_pdf(env, dep, LinkClass.NLOS, t, num), dep.altitude, 2000.0)
        assert result.value == pytest.approx(nearest_distance_cdf(env, dep, LinkClass.NLOS, 2000.0, num), rel=1e-6)

    def test_pdf_vanishes_beyond_window(self, dense_urban):
        """Truncated network: no density past r_max"""
        env, dep, num = dense_urban
        assert nearest_distance_pdf(env, dep, LinkClass.LOS, num.r_max * 1.5, num) == 0.0

    def test_below_altitude(self, dense_urban):
        """3D distances below h are out of domain"""
        env, dep, num = dense_urban
        with pytest.raises(DomainError):
            nearest_distance_cdf(env, dep, LinkClass.LOS, 50.0, num)

    def test_horizontal_law(self, dense_urban):
        """Horizontal pdf integrates to the horizontal CDF"""
        env, dep, num = dense_urban
        result = integrate(lambda z: horizontal_distance_pdf(env, dep, LinkClass.LOS, z, num), 0.0, 800.0)
        assert result.value == pytest.approx(horizontal_distance_cdf(env, dep, LinkClass.LOS, 800.0, num), rel=1e-6)
        with pytest.raises(DomainError):
            horizontal_distance_pdf(env, dep, LinkClass.LOS, -1.0, num)

    @pytest.mark.parametrize("link", list(LinkClass))
    def test_effective_support(self, dense_urban, link):
        """The outer integration stops where the CDF reaches 1 - support_tail"""
        env, dep, num = dense_urban
        r_eff = effective_support(env, dep, link, num)
        assert dep.altitude < r_eff <= num.r_max
        if r_eff < num.r_max:
            assert nearest_distance_cdf(env, dep, link, r_eff, num) == pytest.approx(1.0 - num.support_tail, abs=1e-12)


class TestExclusionDistances:
    """Test the minimum distances implied by the association rule"""

    def test_los_exclusion_value(self, dense_urban):
        """NLoS serving at 100 m keeps LoS interferers beyond ~37.1 km"""
        env, _, _ = dense_urban
        assert exclusion_distance_los(env, 100.0) == pytest.approx(37148.351, rel=1e-7)

    def test_equal_mean_power(self, dense_urban):
        """A LoS point at d_L delivers the same mean power as the NLoS server at r"""
        env, _, _ = dense_urban
        r = np.array([100.0, 250.0, 900.0])
        d_l = exclusion_distance_los(env, r)
        np.testing.assert_allclose(env.eta_los * d_l ** -env.alpha_los, env.eta_nlos * r ** -env.alpha_nlos, rtol=1e-12)

    def test_nlos_exclusion_floor(self, dense_urban):
        """Below the threshold the NLoS exclusion distance is the altitude"""
        env, dep, _ = dense_urban
        h = dep.altitude
        assert exclusion_distance_nlos(env, h, h) == h
        assert exclusion_distance_nlos(env, h, 5000.0) == h

    def test_nlos_exclusion_continuous(self, dense_urban):
        """Both branches meet at the threshold"""
        env, dep, _ = dense_urban
        h = dep.altitude
        threshold = los_dominance_threshold(env, h)
        assert threshold == pytest.approx(exclusion_distance_los(env, h))
        assert exclusion_distance_nlos(env, h, threshold * (1 + 1e-9)) == pytest.approx(h, rel=1e-6)
        assert exclusion_distance_nlos(env, h, 2.0 * threshold) > h

    def test_limits_per_serving_class(self, dense_urban):
        """Serving-class interferers start at l(r), the other class at its exclusion"""
        env, dep, _ = dense_urban
        h = dep.altitude
        v_nlos, v_los = exclusion_limits(env, dep, ServingContext(LinkClass.NLOS, 150.0))
        assert v_nlos == pytest.approx(math.sqrt(150.0 ** 2 - h * h))
        assert v_los == pytest.approx(math.sqrt(exclusion_distance_los(env, 150.0) ** 2 - h * h))
        v_nlos, v_los = exclusion_limits(env, dep, ServingContext(LinkClass.LOS, 150.0))
        assert v_nlos == 0.0
        assert v_los == pytest.approx(math.sqrt(150.0 ** 2 - h * h))

    def test_serving_context_validation(self):
        """Serving distances must be positive"""
        with pytest.raises(DomainError):
            ServingContext(LinkClass.LOS, 0.0)

    def test_serving_distance_reaches_altitude(self, dense_urban):
        """A serving distance below the altitude has no horizontal position"""
        env, dep, _ = dense_urban
        with pytest.raises(DomainError):
            ServingContext(LinkClass.LOS, 60.0, altitude=dep.altitude)
        with pytest.raises(DomainError):
            exclusion_limits(env, dep, ServingContext(LinkClass.NLOS, 60.0))
        ctx = ServingContext(LinkClass.LOS, dep.altitude, altitude=dep.altitude)
        assert exclusion_limits(env, dep, ctx) == (0.0, 0.0)


class TestAssociation:
    """Test LoS/NLoS association probabilities"""

    def test_dense_urban_is_los_dominated(self, dense_urban):
        """With a 138x excess-loss gap NLoS almost never serves"""
        weights = association_probabilities(*dense_urban)
        assert weights[LinkClass.LOS] > 1.0 - 1e-9
        assert weights[LinkClass.LOS] + weights[LinkClass.NLOS] == pytest.approx(1.0, abs=1e-12)

    def test_nearest_point_wins_when_channels_match(self):
        """With equal gains and near-equal exponents A_L is P(nearest point is LoS)"""
        env = Environment(a=9.61, b=0.16, eta_los=1.0, eta_nlos=1.0, alpha_los=3.0, alpha_nlos=3.0001, m=3)
        dep = Deployment(lambda_density=5e-6, altitude=100.0, tx_power=1.0, noise_power=1e-14)
        num = NumericsConfig(r_max=5000.0)
        lam = dep.lambda_density
        nlos_table = inner_integral_table(env, dep.altitude, num.r_max, LinkClass.NLOS)

        def los_first(z):
            return horizontal_distance_pdf(env, dep, LinkClass.LOS, z, num) * math.exp(-2 * math.pi * lam * nlos_table(z))

        expected = integrate(los_first, 0.0, 4000.0, points=[100.0, 300.0, 1000.0]).value
        assert 0.1 < expected < 0.9
        assert association_probability_los(env, dep, num) == pytest.approx(expected, abs=5e-3)

    def test_monotone_in_altitude(self, dense_urban, fast_scenario):
        """Over 100..500 m A_L never drops: higher UAV-BSs are more often LoS"""
        altitudes = (100.0, 200.0, 300.0, 400.0, 500.0)
        for env, dep, num in (dense_urban, fast_scenario):
            a_los = np.array([association_probability_los(env, replace(dep, altitude=h), num) for h in altitudes])
            assert np.all(np.diff(a_los) >= -1e-10)
            assert np.all(a_los > 1.0 - 1e-3)
        env, dep, num = fast_scenario
        # in a 5 km window A_N is essentially P(no LoS UAV-BS), which falls with h
        a_nlos_low = 1.0 - association_probability_los(env, dep, num)
        a_nlos_high = 1.0 - association_probability_los(env, replace(dep, altitude=300.0), num)
        assert a_nlos_low > 10.0 * a_nlos_high

    def test_cached(self, dense_urban):
        """Repeated lookups hit the cache"""
        env, dep, num = dense_urban
        assert association_probability_los(env, dep, num) is association_probability_los(env, dep, num)


class TestPerformance:
    """Test that tabulation makes repeat evaluations cheap"""

    def test_table_cache(self, dense_urban):
        """A warm distance-law evaluation is much faster than the cold one"""
        env, dep, num = dense_urban
        inner_integral_table.cache_clear()
        r = np.linspace(dep.altitude, 3000.0, 1000)

        start_time = time.time()
        nearest_distance_cdf(env, dep, LinkClass.LOS, r, num)
        cold = time.time() - start_time

        start_time = time.time()
        for _ in range(10):
            nearest_distance_cdf(env, dep, LinkClass.LOS, r, num)
        warm = (time.time() - start_time) / 10

        assert warm < cold
