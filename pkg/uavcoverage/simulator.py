"""
Monte Carlo oracle for the analysis module.

Each trial draws a fresh PPP of UAV-BSs on the disk of radius r_max around
the typical user, splits it into LoS and NLoS points by independent
thinning, associates the user with the better of the nearest LoS and the
nearest NLoS UAV-BS by mean received power and computes the SINR with one
fading draw per link. Trial i uses its own generator seeded from
(seed, i), so results do not depend on how trials are split across workers.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import norm

from uavcoverage.channel import LinkClass, los_probability, sample_fading
from uavcoverage.geometry import exclusion_distance_los, exclusion_distance_nlos
from uavcoverage.scenario import Deployment, Environment, NumericsConfig, derived_zeta

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95
# relative slack for the per-trial exclusion checks (floating-point ties)
EXCLUSION_RTOL = 1e-9


@dataclass(frozen=True)
class NetworkRealization:
    """One realization of the UAV-BS layer: horizontal positions and link classes."""

    positions: np.ndarray  # (n, 2), m, relative to the user's projection
    is_los: np.ndarray  # (n,) bool

    def __len__(self) -> int:
        return len(self.is_los)

    @property
    def horizontal(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    def points(self) -> List[Tuple[Tuple[float, float], LinkClass]]:
        return [
            ((float(x), float(y)), LinkClass.LOS if los else LinkClass.NLOS)
            for (x, y), los in zip(self.positions, self.is_los)
        ]


@dataclass(frozen=True)
class TrialRecord:
    serving_link: Optional[LinkClass]
    serving_distance: float  # m, nan when the network is empty
    sinr: float  # linear
    nearest_los: Optional[float] = None
    nearest_nlos: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.serving_link is None


@dataclass(frozen=True)
class Estimate:
    value: float
    half_width: float  # of the normal-approximation confidence interval

    @property
    def interval(self) -> Tuple[float, float]:
        return self.value - self.half_width, self.value + self.half_width


@dataclass(frozen=True)
class SimulationEstimate:
    thresholds: np.ndarray  # linear
    coverage: List[Estimate]
    rate: Estimate  # nats/Hz
    los_association: Estimate
    nearest_los: np.ndarray  # samples from trials with at least one LoS point
    nearest_nlos: np.ndarray
    sinr: np.ndarray
    trials: int
    empty_trials: int
    exclusion_violations: int


def sample_network(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    rng: np.random.Generator,
    window: Optional[float] = None,
) -> NetworkRealization:
    """
    Poisson number of points with mean lambda pi R^2, uniform on the disk of
    radius R (r_max unless a window is given), each tagged LoS with
    probability los_probability(h, z).
    """
    radius = num.r_max if window is None else window
    count = rng.poisson(dep.lambda_density * math.pi * radius * radius)
    z = radius * np.sqrt(rng.random(count))
    phi = 2.0 * math.pi * rng.random(count)
    is_los = rng.random(count) < los_probability(env, dep.altitude, z)
    positions = np.column_stack([z * np.cos(phi), z * np.sin(phi)])
    return NetworkRealization(positions, is_los)


def _nearest(d: np.ndarray, mask: np.ndarray) -> Tuple[Optional[int], Optional[float]]:
    if not mask.any():
        return None, None
    idx = np.flatnonzero(mask)
    best = idx[np.argmin(d[idx])]
    return int(best), float(d[best])


def evaluate_network(
    env: Environment,
    dep: Deployment,
    net: NetworkRealization,
    rng: np.random.Generator,
    fading: bool = True,
) -> TrialRecord:
    """
    Association and SINR for one realization.

    The candidates are the nearest LoS and the nearest NLoS point; the one
    with the larger zeta d^-alpha serves (LoS wins ties). Interference sums
    every other point with its class-specific gain, exponent and fading.
    """
    if len(net) == 0:
        return TrialRecord(None, math.nan, 0.0)

    h = dep.altitude
    d = np.sqrt(net.horizontal ** 2 + h * h)
    is_los = net.is_los
    zeta = np.where(is_los, derived_zeta(env, dep, LinkClass.LOS), derived_zeta(env, dep, LinkClass.NLOS))
    alpha = np.where(is_los, env.alpha_los, env.alpha_nlos)
    mean_power = zeta * d ** (-alpha)

    i_los, nearest_los = _nearest(d, is_los)
    i_nlos, nearest_nlos = _nearest(d, ~is_los)
    if i_nlos is None or (i_los is not None and mean_power[i_los] >= mean_power[i_nlos]):
        serving, link = i_los, LinkClass.LOS
    else:
        serving, link = i_nlos, LinkClass.NLOS

    gains = np.ones(len(net))
    if fading:
        # LoS draws first, then NLoS, in index order
        gains[is_los] = sample_fading(LinkClass.LOS, env.m, rng, int(is_los.sum()))
        gains[~is_los] = sample_fading(LinkClass.NLOS, env.m, rng, int((~is_los).sum()))
    received = mean_power * gains
    others = np.ones(len(net), dtype=bool)
    others[serving] = False
    interference = float(received[others].sum())
    denominator = interference + dep.noise_power
    sinr = math.inf if denominator == 0.0 else float(received[serving]) / denominator

    return TrialRecord(link, float(d[serving]), sinr, nearest_los, nearest_nlos)


def run_trial(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    rng: np.random.Generator,
    fading: bool = True,
    window: Optional[float] = None,
) -> TrialRecord:
    """One network realization plus one fading realization."""
    return evaluate_network(env, dep, sample_network(env, dep, num, rng, window), rng, fading)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _run_chunk(args) -> List[TrialRecord]:
    env, dep, num, start, stop, window = args
    return [run_trial(env, dep, num, trial_rng(num.seed, i), window=window) for i in range(start, stop)]


def run_trials(
    env: Environment, dep: Deployment, num: NumericsConfig, window: Optional[float] = None
) -> List[TrialRecord]:
    """
    num.trials records in trial-index order.

    With num.workers > 1 chunks go to a process pool; map() keeps submission
    order, so the records match a single-worker run exactly.
    """
    start_time = time.time()
    trials = num.trials
    chunk = max(1, math.ceil(trials / (4 * num.workers)))
    jobs = [(env, dep, num, lo, min(lo + chunk, trials), window) for lo in range(0, trials, chunk)]

    records: List[TrialRecord] = []
    if num.workers == 1:
        for job in jobs:
            records.extend(_run_chunk(job))
            logger.debug(f"Simulated {len(records)}/{trials} trials")
    else:
        with ProcessPoolExecutor(max_workers=num.workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                records.extend(part)
                logger.debug(f"Simulated {len(records)}/{trials} trials")

    elapsed = time.time() - start_time
    logger.info(
        f"Simulated {trials} trials in {elapsed:.2f} s "
        f"({trials / max(elapsed, 1e-9):.0f} trials/s, {num.workers} worker(s))"
    )
    return records


def _proportion(hits: int, n: int, z: float) -> Estimate:
    p = hits / n
    return Estimate(p, z * math.sqrt(p * (1.0 - p) / n))


def exclusion_violations(env: Environment, dep: Deployment, records: Sequence[TrialRecord]) -> int:
    """
    Trials where an interferer of the other class is closer than the
    association rule allows.
    """
    count = 0
    for rec in records:
        if rec.serving_link is LinkClass.NLOS and rec.nearest_los is not None:
            bound = exclusion_distance_los(env, rec.serving_distance)
            count += rec.nearest_los < bound * (1.0 - EXCLUSION_RTOL)
        elif rec.serving_link is LinkClass.LOS and rec.nearest_nlos is not None:
            bound = exclusion_distance_nlos(env, dep.altitude, rec.serving_distance)
            count += rec.nearest_nlos < bound * (1.0 - EXCLUSION_RTOL)
    return int(count)


def summarize(
    env: Environment, dep: Deployment, records: Sequence[TrialRecord], thresholds: Sequence[float]
) -> SimulationEstimate:
    """Empirical coverage curve, rate, LoS association and distance samples with 95% CIs."""
    n = len(records)
    z = float(norm.ppf(0.5 + CONFIDENCE / 2.0))
    sinr = np.array([rec.sinr for rec in records])
    thresholds = np.asarray(thresholds, dtype=float)

    coverage = [_proportion(int(np.count_nonzero(sinr > t)), n, z) for t in thresholds]
    rates = np.log1p(sinr)
    rate_sd = float(rates.std(ddof=1)) if n > 1 else 0.0
    rate = Estimate(float(rates.mean()), z * rate_sd / math.sqrt(n))
    los_hits = sum(rec.serving_link is LinkClass.LOS for rec in records)

    return SimulationEstimate(
        thresholds=thresholds,
        coverage=coverage,
        rate=rate,
        los_association=_proportion(los_hits, n, z),
        nearest_los=np.array([rec.nearest_los for rec in records if rec.nearest_los is not None]),
        nearest_nlos=np.array([rec.nearest_nlos for rec in records if rec.nearest_nlos is not None]),
        sinr=sinr,
        trials=n,
        empty_trials=sum(rec.empty for rec in records),
        exclusion_violations=exclusion_violations(env, dep, records),
    )


def estimate(
    env: Environment,
    dep: Deployment,
    num: NumericsConfig,
    thresholds: Sequence[float],
    window: Optional[float] = None,
) -> SimulationEstimate:
    """
    Simulate num.trials trials and summarize them.

    Deterministic given num.seed. ``window`` replaces r_max as the radius of
    the simulated disk only; the analysis side keeps r_max.
    """
    result = summarize(env, dep, run_trials(env, dep, num, window), thresholds)
    if result.empty_trials:
        logger.info(f"{result.empty_trials} of {result.trials} trials had no UAV-BS in the window (counted as outage)")
    return result


def trial_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10([rec.sinr for rec in records])
    return pd.DataFrame(
        {
            "trial": np.arange(len(records)),
            "serving_link": [rec.serving_link.value if rec.serving_link else "none" for rec in records],
            "serving_distance_m": [rec.serving_distance for rec in records],
            "sinr_db": sinr_db,
        }
    )


def write_trial_dump(records: Sequence[TrialRecord], path: Union[str, Path]) -> Path:
    """One line per trial: index, serving class, serving distance (m), SINR (dB)."""
    path = Path(path)
    trial_frame(records).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(records)} trial records to {path}")
    return path
