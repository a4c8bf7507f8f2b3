"""Coverage probability and average rate of networks of UAV base stations."""

from uavcoverage.analysis import (
    LaplaceQuery,
    MetricResult,
    RateResult,
    conditional_coverage,
    conditional_rate,
    coverage,
    coverage_curve,
    laplace_interference,
    rate,
    rate_via_coverage,
)
from uavcoverage.channel import GammaBound, LinkClass
from uavcoverage.errors import ConfigError, DomainError, QuadratureError, UavCoverageError
from uavcoverage.geometry import ServingContext, association_probabilities, association_probability_los
from uavcoverage.scenario import (
    ENVIRONMENT_PRESETS,
    Deployment,
    Environment,
    NumericsConfig,
    Scenario,
    default_scenario,
    load_config,
    parse_config,
)
from uavcoverage.simulator import estimate, run_trial, sample_network

__version__ = "0.1.0"
