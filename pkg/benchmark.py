#!/usr/bin/env python3
"""
Performance benchmark for the coverage/rate toolkit
Measures analytical evaluation latency, threshold-grid scaling and
simulation throughput across worker counts
"""

import argparse
import json
import logging
import statistics
import sys
import time
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from uavcoverage import analysis, simulator
from uavcoverage.cli import LOG_FORMAT
from uavcoverage.errors import UavCoverageError
from uavcoverage.scenario import Scenario, db_to_linear, default_scenario, load_config

logger = logging.getLogger(__name__)


class PerformanceBenchmarker:
    """
    Latency and throughput measurements for one scenario
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.results: Dict[str, Any] = {}

    def measure_latency(self, thresholds_db: Sequence[float] = (0.0,), repeats: int = 5) -> Dict[str, float]:
        """
        Wall-clock statistics of one analytical coverage evaluation
        Time Complexity: O(repeats * len(thresholds_db)) nested quadratures
        """
        env, dep, num = self.scenario
        cold_start = time.time()
        analysis.coverage(env, dep, num, db_to_linear(thresholds_db[0]))
        cold_ms = (time.time() - cold_start) * 1000

        latencies = []
        for _ in range(repeats):
            for t_db in thresholds_db:
                start_time = time.time()
                analysis.coverage(env, dep, num, db_to_linear(t_db))
                latencies.append((time.time() - start_time) * 1000)

        return {
            "cold_ms": cold_ms,
            "mean_ms": statistics.mean(latencies),
            "median_ms": statistics.median(latencies),
            "p95_ms": float(np.percentile(latencies, 95)),
            "p99_ms": float(np.percentile(latencies, 99)),
            "min_ms": min(latencies),
            "max_ms": max(latencies),
            "std_dev": statistics.stdev(latencies) if len(latencies) > 1 else 0.0,
            "evaluations": len(latencies),
        }

    def measure_grid_scaling(self, sizes: Sequence[int] = (1, 4, 16)) -> Dict[str, List]:
        """
        Cost of a whole coverage curve against its number of thresholds
        The curve shares one nested pass, so growth should be well below linear
        """
        env, dep, num = self.scenario
        timings = []
        for size in sizes:
            thresholds = [db_to_linear(t) for t in np.linspace(-10.0, 20.0, size)]
            start_time = time.time()
            analysis.coverage_curve(env, dep, num, thresholds)
            timings.append((time.time() - start_time) * 1000)
            logger.info(f"Grid size {size}: {timings[-1]:.1f} ms")
        return {"grid_sizes": list(sizes), "latencies_ms": timings}

    def measure_throughput(self, trials: int = 2000, worker_levels: Sequence[int] = (1, 2, 4)) -> Dict[str, Any]:
        """
        Simulation trials per second at each worker count
        Every run must reproduce the single-worker SINR samples exactly
        """
        env, dep, num = self.scenario
        rows = []
        reference: Optional[np.ndarray] = None
        for workers in worker_levels:
            logger.info(f"Simulating {trials} trials with {workers} worker(s)...")
            run_num = replace(num, trials=trials, workers=workers)
            start_time = time.time()
            result = simulator.estimate(env, dep, run_num, [1.0])
            total_time = time.time() - start_time
            if reference is None:
                reference = result.sinr
            rows.append({
                "workers": workers,
                "trials": trials,
                "total_time": total_time,
                "trials_per_second": trials / total_time if total_time > 0 else 0.0,
                "deterministic": bool(np.array_equal(result.sinr, reference)),
            })
        return {"throughput_results": rows}

    def generate_report(self, trials: int = 2000) -> Dict[str, Any]:
        """
        Run every measurement and collect the results
        """
        print("=== Performance Benchmark Report ===\n")

        print("1. Coverage latency...")
        self.results["latency"] = self.measure_latency((-10.0, 0.0, 10.0), repeats=3)

        print("\n2. Threshold grid scaling...")
        self.results["grid_scaling"] = self.measure_grid_scaling()

        print("\n3. Simulation throughput...")
        self.results["throughput"] = self.measure_throughput(trials)

        return self.results

    def save_results(self, filename: str = "benchmark-results.json"):
        """Save benchmark results to file"""
        with open(filename, "w") as f:
            json.dump(self.results, f, indent=2, default=str)
        print(f"\nResults saved to {filename}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Performance benchmark for the UAV-BS coverage toolkit")
    parser.add_argument("--config", help="scenario TOML (default: dense-urban, 5/km², 100 m)")
    parser.add_argument("--output", default="benchmark-results.json", help="Output file for results")
    parser.add_argument("--trials", type=int, default=2000, help="simulation trials per throughput run")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr)

    try:
        scenario = load_config(args.config) if args.config else default_scenario()
        benchmarker = PerformanceBenchmarker(scenario)
        results = benchmarker.generate_report(args.trials)
    except UavCoverageError as e:
        logger.error(f"Benchmark aborted: {e}")
        return 1

    print("\n=== PERFORMANCE SUMMARY ===")
    lat = results["latency"]
    print(f"Cold coverage evaluation: {lat['cold_ms']:.1f}ms")
    print(f"Warm mean: {lat['mean_ms']:.1f}ms, 95th percentile: {lat['p95_ms']:.1f}ms")
    rows = results["throughput"]["throughput_results"]
    if rows:
        peak = max(r["trials_per_second"] for r in rows)
        print(f"Peak throughput: {peak:.0f} trials/s")
        print(f"Deterministic across worker counts: {all(r['deterministic'] for r in rows)}")

    benchmarker.save_results(args.output)
    print("\nBenchmark completed successfully!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
