"""
Scenario: Monte Carlo vs Enumeration

Generalized estimator moments on the binary and ternary sweep distributions at
N in {2, 3, 5, 10}, plus a four-estimator comparison at N = 8.

Tests:
1. For every (distribution, N, a) triple the Monte Carlo mean lies within
   4 s.e. of the enumerated mean
2. The Monte Carlo variance lies within 10% of the enumerated variance
3. Every bias-corrected estimator beats the plug-in estimator at N = 8
"""

from boxentropy.estimators import EstimatorConfig, EstimatorId, ParamVector
from boxentropy.exact_oracle import Distribution, enumerate_moments
from boxentropy.experiments import compare_estimators, mc_estimate
from boxentropy.sampling import SeedSpec
from tests.support.table_helpers import assert_within_standard_errors

from .base import ScenarioBase

BINARY = Distribution.of([0.75, 0.25])
TERNARY = Distribution.of([0.625, 0.25, 0.125])
A1_BINARY = 1.0 / 3.0

# a_i**n_i stays moderate on every outcome with non-negligible weight
TRIPLES = [
    (BINARY, 2, (A1_BINARY, 1.0)),
    (BINARY, 2, (A1_BINARY, 3.0)),
    (BINARY, 3, (A1_BINARY, 1.0)),
    (BINARY, 3, (A1_BINARY, 3.0)),
    (BINARY, 5, (A1_BINARY, 1.0)),
    (BINARY, 5, (A1_BINARY, 2.0)),
    (BINARY, 10, (A1_BINARY, 1.0)),
    (BINARY, 10, (A1_BINARY, 1.5)),
    (TERNARY, 2, (0.6, 1.0, 1.0)),
    (TERNARY, 2, (0.6, 3.0, 7.0)),
    (TERNARY, 3, (0.6, 1.0, 1.0)),
    (TERNARY, 3, (0.6, 2.0, 5.0)),
    (TERNARY, 5, (0.6, 1.0, 1.0)),
    (TERNARY, 5, (0.6, 1.5, 3.0)),
    (TERNARY, 10, (0.6, 1.0, 1.0)),
    (TERNARY, 10, (0.6, 1.25, 2.0)),
]
REPLICATES = 200_000
MEAN_SIGMAS = 4.0
VARIANCE_REL_TOL = 0.10

COMPARISON_N = 8
COMPARISON_CONFIGS = [
    EstimatorConfig(EstimatorId.NAIVE),
    EstimatorConfig(EstimatorId.GRASSBERGER),
    EstimatorConfig(EstimatorId.PHI, phi="digamma"),
    EstimatorConfig(EstimatorId.SCHUERMANN_BINOMIAL, ParamVector.of([0.6, 1.0, 1.0])),
]


class MonteCarloVsEnumeration(ScenarioBase):
    def run(self) -> None:
        self.check_generalized_triples()
        self.check_estimator_comparison()

    def check_generalized_triples(self) -> None:
        for index, (d, N, a) in enumerate(TRIPLES):
            label = f"p={d.p} N={N} a={a}"
            config = EstimatorConfig(EstimatorId.SCHUERMANN_BINOMIAL, ParamVector.of(a))
            exact = enumerate_moments(d, N, config)
            summary = mc_estimate(d, N, config, REPLICATES, SeedSpec(7000 + index), workers=2)
            assert summary.overflow_count == 0, f"{label}: {summary.overflow_count} replicates overflowed"
            assert_within_standard_errors(summary.mean_bits, summary.std_error_bits, exact.mean_bits, MEAN_SIGMAS, label)
            self.assert_close(
                summary.variance_bits2, exact.variance_bits2, VARIANCE_REL_TOL * exact.variance_bits2, label
            )

    def check_estimator_comparison(self) -> None:
        rows = compare_estimators(TERNARY, COMPARISON_N, COMPARISON_CONFIGS, REPLICATES, SeedSpec(2024), workers=2)
        for config, row in zip(COMPARISON_CONFIGS, rows):
            label = config.estimator_id.value
            exact = enumerate_moments(TERNARY, COMPARISON_N, config)
            assert row.exact_mean_bits is not None
            assert_within_standard_errors(row.summary.mean_bits, row.summary.std_error_bits, exact.mean_bits, 5, label)
            self.assert_close(row.summary.variance_bits2, exact.variance_bits2, 0.05 * exact.variance_bits2, label)

        biases = [abs(enumerate_moments(TERNARY, COMPARISON_N, config).bias_bits) for config in COMPARISON_CONFIGS]
        assert all(bias < biases[0] for bias in biases[1:]), f"exact biases {biases}"
