"""
Unit tests for the Monte Carlo oracle
"""

import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from uavcoverage.channel import LinkClass, los_probability
from uavcoverage.scenario import Deployment, derived_zeta
from uavcoverage.simulator import (
    NetworkRealization,
    _proportion,
    evaluate_network,
    estimate,
    exclusion_violations,
    run_trial,
    run_trials,
    sample_network,
    summarize,
    trial_rng,
    write_trial_dump,
)


class TestSampleNetwork:
    """Test PPP sampling and LoS thinning"""

    def test_mean_count(self, small_window):
        """Point counts average lambda pi R^2"""
        env, dep, num = small_window
        rng = np.random.default_rng(3)
        counts = [len(sample_network(env, dep, num, rng, window=2000.0)) for _ in range(1000)]
        expected = dep.lambda_density * math.pi * 2000.0 ** 2
        assert np.mean(counts) == pytest.approx(expected, abs=4.0 * math.sqrt(expected / 1000))

    def test_points_inside_window(self, small_window):
        """Every point lies in the disk"""
        env, dep, num = small_window
        net = sample_network(env, dep, num, np.random.default_rng(4))
        assert np.all(net.horizontal <= num.r_max)
        assert net.is_los.dtype == bool
        assert len(net.points()) == len(net)

    def test_thinning_follows_los_probability(self, small_window):
        """The LoS fraction in an annulus matches P_L there"""
        env, _, num = small_window
        dep = Deployment(lambda_density=1e-3, altitude=100.0, tx_power=1.0, noise_power=1e-14)
        rng = np.random.default_rng(5)
        z_all, los_all = [], []
        for _ in range(200):
            net = sample_network(env, dep, num, rng, window=500.0)
            z_all.append(net.horizontal)
            los_all.append(net.is_los)
        z, los = np.concatenate(z_all), np.concatenate(los_all)
        ring = (z > 200.0) & (z < 220.0)
        expected = los_probability(env, dep.altitude, z[ring]).mean()
        tolerance = 4.0 * math.sqrt(expected * (1 - expected) / ring.sum())
        assert los[ring].mean() == pytest.approx(expected, abs=tolerance)


class TestEvaluateNetwork:
    """Test association and SINR of one realization"""

    def test_single_link_closed_form(self, small_window):
        """One LoS point, no interferers, no fading: SINR = zeta d^-alpha / sigma^2"""
        env, dep, _ = small_window
        net = NetworkRealization(np.array([[50.0, 0.0]]), np.array([True]))
        record = evaluate_network(env, dep, net, np.random.default_rng(0), fading=False)
        d = math.hypot(50.0, dep.altitude)
        assert record.serving_link is LinkClass.LOS
        assert record.serving_distance == pytest.approx(d)
        assert record.sinr == pytest.approx(derived_zeta(env, dep, LinkClass.LOS) * d ** -2 / dep.noise_power, rel=1e-12)
        assert record.nearest_nlos is None

    def test_empty_network_is_outage(self, small_window):
        """No UAV-BS means SINR 0 and no serving class"""
        env, dep, _ = small_window
        net = NetworkRealization(np.empty((0, 2)), np.empty(0, dtype=bool))
        record = evaluate_network(env, dep, net, np.random.default_rng(0))
        assert record.empty
        assert record.sinr == 0.0

    def test_serving_point_maximizes_mean_power(self, small_window):
        """Brute-force argmax over every point agrees with the nearest-per-class rule"""
        env, dep, num = small_window
        rng = np.random.default_rng(11)
        for _ in range(200):
            net = sample_network(env, dep, num, rng)
            record = evaluate_network(env, dep, net, rng)
            d = np.sqrt(net.horizontal ** 2 + dep.altitude ** 2)
            power = np.where(
                net.is_los,
                derived_zeta(env, dep, LinkClass.LOS) * d ** -env.alpha_los,
                derived_zeta(env, dep, LinkClass.NLOS) * d ** -env.alpha_nlos,
            )
            best = int(np.argmax(power))
            assert record.serving_distance == d[best]
            assert (record.serving_link is LinkClass.LOS) == bool(net.is_los[best])

    def test_no_exclusion_violations(self, small_window):
        """No interferer of the other class sits inside its exclusion distance"""
        env, dep, num = small_window
        records = run_trials(env, dep, num)
        assert exclusion_violations(env, dep, records) == 0

    def test_fading_changes_sinr(self, small_window):
        """Fading draws perturb the SINR of the same realization"""
        env, dep, num = small_window
        net = sample_network(env, dep, num, np.random.default_rng(8))
        flat = evaluate_network(env, dep, net, np.random.default_rng(9), fading=False)
        faded = evaluate_network(env, dep, net, np.random.default_rng(9), fading=True)
        assert flat.serving_distance == faded.serving_distance
        assert flat.sinr != faded.sinr


class TestRunTrials:
    """Test determinism and aggregation"""

    def test_reproducible(self, small_window):
        """Same seed, same records"""
        env, dep, num = small_window
        num = replace(num, trials=50)
        assert run_trials(env, dep, num) == run_trials(env, dep, num)

    def test_trial_streams_are_independent_of_chunking(self, small_window):
        """Trial i only depends on (seed, i)"""
        env, dep, num = small_window
        records = run_trials(env, dep, replace(num, trials=20))
        assert run_trial(env, dep, num, trial_rng(num.seed, 13)) == records[13]

    def test_workers_do_not_change_results(self, small_window):
        """A process pool reproduces the single-worker records"""
        env, dep, num = small_window
        num = replace(num, trials=40)
        assert run_trials(env, dep, replace(num, workers=2)) == run_trials(env, dep, num)

    def test_seed_changes_results(self, small_window):
        """Different seeds give different samples"""
        env, dep, num = small_window
        num = replace(num, trials=20)
        assert run_trials(env, dep, num) != run_trials(env, dep, replace(num, seed=num.seed + 1))


class TestEstimate:
    """Test the empirical summaries"""

    def test_threshold_below_every_sample(self, small_window):
        """Coverage is 1 below the smallest SINR and nonincreasing in T"""
        env, dep, num = small_window
        result = estimate(env, dep, num, [1e-12, 0.1, 1.0, 10.0, 100.0])
        assert result.coverage[0].value == 1.0
        values = [c.value for c in result.coverage]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert result.trials == num.trials
        assert result.empty_trials == 0
        assert result.exclusion_violations == 0

    def test_confidence_interval(self):
        """Normal-approximation half-widths shrink as 1/sqrt(n)"""
        small = _proportion(30, 100, 1.959964)
        large = _proportion(60, 200, 1.959964)
        assert small.half_width == pytest.approx(1.959964 * math.sqrt(0.3 * 0.7 / 100))
        assert large.half_width == pytest.approx(small.half_width / math.sqrt(2.0))
        lo, hi = small.interval
        assert lo < 0.3 < hi

    def test_rate_and_association(self, small_window):
        """Rate is the mean of ln(1 + SINR); dense urban is LoS-served"""
        env, dep, num = small_window
        records = run_trials(env, dep, num)
        result = summarize(env, dep, records, [])
        assert result.rate.value == pytest.approx(np.mean(np.log1p([r.sinr for r in records])))
        assert result.los_association.value > 0.99
        # trials without a LoS point in the window contribute no sample
        assert len(result.nearest_los) == sum(rec.nearest_los is not None for rec in records)
        assert len(result.nearest_nlos) == sum(rec.nearest_nlos is not None for rec in records)
        assert len(result.nearest_los) <= num.trials

    def test_trial_dump(self, small_window, tmp_path):
        """One CSV row per trial with class, distance and SINR in dB"""
        env, dep, num = small_window
        records = run_trials(env, dep, replace(num, trials=25))
        path = write_trial_dump(records, tmp_path / "trials.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["trial", "serving_link", "serving_distance_m", "sinr_db"]
        assert len(frame) == 25
        assert frame["sinr_db"].iloc[3] == pytest.approx(10 * math.log10(records[3].sinr))
        assert set(frame["serving_link"]) <= {"LoS", "NLoS"}
