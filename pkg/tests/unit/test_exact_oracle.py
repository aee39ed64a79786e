"""Closed-form biases and brute-force enumeration."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy import special

from boxentropy.errors import BudgetExceededError, DomainError
from boxentropy.estimators import LN2, CountVector, EstimatorConfig, EstimatorId, ParamVector
from boxentropy.exact_oracle import (
    Distribution,
    binomial_expectation,
    covariance_from_pairs,
    enumerate_moments,
    exact_entropy,
    exact_estimator_bias,
    expectation_nG,
    expectation_npsi,
    optimal_a,
    optimal_params,
    outcome_count,
    pair_joint_probability,
    poisson_bias_term,
    poisson_estimator_bias,
    remainder_integral,
)
from boxentropy.special_fn import big_g_a, digamma, exp_integral_e1


def schuermann(a) -> EstimatorConfig:
    return EstimatorConfig(EstimatorId.SCHUERMANN_BINOMIAL, ParamVector.of(a))


def n_g(a: float):
    return lambda n: n * big_g_a(n, a) if n else 0.0


class TestDistribution:
    def test_entropy_and_expected_counts(self, fair_bit: Distribution, ternary: Distribution):
        assert exact_entropy(fair_bit) == pytest.approx(LN2, abs=1e-15)
        assert exact_entropy(ternary) / LN2 == pytest.approx(1.29879, abs=1e-5)
        assert ternary.expected_counts(8) == (5.0, 2.0, 1.0)

    @pytest.mark.parametrize("p", [[0.5, 0.4], [1.0, 0.0], [], [0.5, 0.6, -0.1]])
    def test_rejects_invalid(self, p):
        with pytest.raises(DomainError):
            Distribution.of(p)

    def test_optimal_parameters(self, binary_quarter: Distribution):
        assert optimal_a(0.25) == 3.0
        assert optimal_a(1.0) == 0.0
        assert optimal_params(binary_quarter).a == pytest.approx((1.0 / 3.0, 3.0))
        with pytest.raises(DomainError):
            optimal_a(0.0)


class TestClosedForms:
    @pytest.mark.parametrize("z, a", [(0.5, 1.0), (1.0, 1.0), (1.0, 3.0), (2.5, 0.5)])
    def test_expectation_matches_binomial_sum(self, z: float, a: float):
        N = 60
        assert expectation_nG(z, N, a) == pytest.approx(binomial_expectation(n_g(a), z, N), abs=1e-10)

    def test_digamma_identity(self):
        z, N = 1.5, 40
        direct = binomial_expectation(lambda n: n * digamma(n) if n else 0.0, z, N)
        assert expectation_npsi(z, N) == pytest.approx(direct, abs=1e-11)

    @pytest.mark.parametrize("z, a", [(0.5, 1.0), (1.0, 1.0), (1.0, 3.0)])
    def test_binomial_approaches_poisson_limit(self, z: float, a: float):
        limit = z * math.log(z) + z * exp_integral_e1((1.0 + a) * z)
        gaps = [abs(binomial_expectation(n_g(a), z, N) - limit) for N in (10, 100, 1000, 10000)]
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:])), gaps
        assert gaps[-1] <= 1e-4

    def test_remainder_integral(self):
        assert remainder_integral(0.0, 10) == 0.0
        # N = 1: integral of 1/(1-x) from 0 to u
        assert remainder_integral(0.5, 1) == pytest.approx(math.log(2.0), abs=1e-13)
        with pytest.raises(DomainError):
            remainder_integral(1.0, 5)

    def test_poisson_bias_term(self):
        assert poisson_bias_term(1.0, 1.0) == pytest.approx(float(special.exp1(2.0)), rel=1e-13)
        assert poisson_bias_term(2.0, math.inf) == 0.0
        with pytest.raises(DomainError):
            poisson_bias_term(0.0, 1.0)

    def test_parameter_beyond_optimum_is_rejected(self, binary_quarter: Distribution):
        with pytest.raises(DomainError, match="box 1"):
            exact_estimator_bias(binary_quarter, 10, ParamVector.of([0.2, 4.0]))

    def test_bias_vanishes_at_optimum(self, binary_quarter: Distribution, ternary: Distribution):
        assert exact_estimator_bias(binary_quarter, 2, optimal_params(binary_quarter)) == 0.0
        assert exact_estimator_bias(ternary, 2, ParamVector.of([0.6, 3.0, 7.0])) == 0.0

    def test_bias_is_negative_below_optimum(self, binary_quarter: Distribution):
        assert exact_estimator_bias(binary_quarter, 10, ParamVector.of([0.2, 1.0])) < 0.0

    def test_poisson_bias_is_negative_and_shrinks(self, fair_bit: Distribution):
        a = ParamVector.of([1.0, 1.0])
        small, large = poisson_estimator_bias(fair_bit, 3, a), poisson_estimator_bias(fair_bit, 30, a)
        assert small < large < 0.0


class TestEnumeration:
    def test_outcome_count(self):
        assert outcome_count(3, 2) == 4
        assert outcome_count(2, 3) == 6
        assert outcome_count(100, 2) == 101

    def test_fair_bit_triplets_are_unbiased(self, fair_bit: Distribution):
        report = enumerate_moments(fair_bit, 3, schuermann([1.0, 1.0]))
        assert report.arithmetic == "exact"
        assert report.outcome_count == 4
        assert abs(report.mean_bits - 1.0) <= 1e-12
        assert abs(report.bias_bits) <= 1e-12

    def test_fair_bit_triplets_naive_mean(self, fair_bit: Distribution):
        report = enumerate_moments(fair_bit, 3, EstimatorConfig(EstimatorId.NAIVE))
        # (1/4) * 0 + (3/4) * H(2/3, 1/3)
        assert report.mean_bits == pytest.approx(0.75 * 0.9182958340544896, abs=1e-12)
        assert report.mean_bits == pytest.approx(0.68872, abs=1e-5)

    @pytest.mark.parametrize("N", [2, 100])
    def test_binary_optimum_is_unbiased(self, binary_quarter: Distribution, N: int):
        report = enumerate_moments(binary_quarter, N, schuermann([1.0 / 3.0, 3.0]))
        assert abs(report.bias_nats) <= 1e-12

    def test_ternary_optimum_is_unbiased(self, ternary: Distribution):
        report = enumerate_moments(ternary, 2, schuermann([0.6, 3.0, 7.0]))
        assert abs(report.bias_nats) <= 1e-12
        assert report.mean_bits == pytest.approx(exact_entropy(ternary) / LN2, abs=1e-12)

    def test_digamma_estimator_is_biased_low(self, fair_bit: Distribution):
        report = enumerate_moments(fair_bit, 3, schuermann([0.0, 0.0]))
        assert report.bias_nats < -1e-3

    @pytest.mark.parametrize("a", [(0.2, 1.0), (1.0 / 3.0, 2.0), (0.1, 0.1)])
    def test_closed_form_matches_enumeration(self, binary_quarter: Distribution, a):
        N = 12
        closed = exact_estimator_bias(binary_quarter, N, ParamVector.of(a))
        report = enumerate_moments(binary_quarter, N, schuermann(a))
        assert closed == pytest.approx(report.bias_nats, abs=1e-10)

    def test_float_and_exact_agree_for_small_parameters(self, ternary: Distribution):
        estimator = schuermann([0.5, 1.0, 0.25])
        exact = enumerate_moments(ternary, 8, estimator, arithmetic="exact")
        floating = enumerate_moments(ternary, 8, estimator, arithmetic="float")
        assert exact.arithmetic == "exact"
        assert floating.arithmetic == "float"
        assert floating.mean_nats == pytest.approx(exact.mean_nats, abs=1e-12)
        assert floating.variance_nats2 == pytest.approx(exact.variance_nats2, rel=1e-9, abs=1e-14)

    def test_float_mode_warns_about_large_parameters(self, binary_quarter: Distribution, caplog):
        with caplog.at_level(logging.WARNING, logger="boxentropy.exact_oracle"):
            enumerate_moments(binary_quarter, 6, schuermann([0.2, 2.0]), arithmetic="float")
        assert any("cancellation" in record.getMessage() for record in caplog.records)

    def test_exact_arithmetic_needs_g_family(self, fair_bit: Distribution):
        with pytest.raises(DomainError):
            enumerate_moments(fair_bit, 3, EstimatorConfig(EstimatorId.NAIVE), arithmetic="exact")

    def test_budget_is_enforced(self):
        d = Distribution.of([0.1] * 10)
        with pytest.raises(BudgetExceededError) as info:
            enumerate_moments(d, 50, EstimatorConfig(EstimatorId.NAIVE), budget=1000)
        assert info.value.outcome_count == outcome_count(50, 10)
        assert info.value.budget == 1000

    def test_single_outcome_has_zero_variance(self):
        report = enumerate_moments(Distribution.of([1.0]), 5, EstimatorConfig(EstimatorId.NAIVE))
        assert report.mean_nats == pytest.approx(0.0, abs=1e-15)
        assert report.variance_nats2 == pytest.approx(0.0, abs=1e-28)

    def test_report_units(self, fair_bit: Distribution):
        report = enumerate_moments(fair_bit, 4, EstimatorConfig(EstimatorId.GRASSBERGER))
        record = report.to_record()
        assert record["mean_bits"] == pytest.approx(record["mean_nats"] / LN2)
        assert record["variance_bits2"] == pytest.approx(record["variance_nats2"] / LN2**2)

    def test_mean_matches_direct_sum(self, ternary: Distribution):
        estimator = EstimatorConfig(EstimatorId.PHI, phi="digamma")
        N = 4
        total = 0.0
        for n0 in range(N + 1):
            for n1 in range(N + 1 - n0):
                n2 = N - n0 - n1
                prob = math.factorial(N) / (math.factorial(n0) * math.factorial(n1) * math.factorial(n2))
                prob *= ternary.p[0] ** n0 * ternary.p[1] ** n1 * ternary.p[2] ** n2
                total += prob * estimator.evaluate(CountVector.of([n0, n1, n2])).value_nats
        assert enumerate_moments(ternary, N, estimator).mean_nats == pytest.approx(total, abs=1e-13)


class TestPairMarginals:
    def test_joint_law_is_normalised(self):
        N, p_i, p_j = 7, 0.3, 0.5
        total = sum(pair_joint_probability(a, b, p_i, p_j, N) for a in range(N + 1) for b in range(N + 1))
        assert total == pytest.approx(1.0, abs=1e-13)
        assert pair_joint_probability(5, 3, p_i, p_j, N) == 0.0

    def test_two_box_law_is_degenerate(self):
        assert pair_joint_probability(2, 1, 0.5, 0.5, 3) == pytest.approx(3.0 / 8.0, abs=1e-15)
        assert pair_joint_probability(2, 0, 0.5, 0.5, 3) == 0.0

    @pytest.mark.parametrize(
        "estimator",
        [
            EstimatorConfig(EstimatorId.NAIVE),
            EstimatorConfig(EstimatorId.GRASSBERGER),
            EstimatorConfig(EstimatorId.SCHUERMANN_BINOMIAL, ParamVector.of([0.5, 1.0, 2.0])),
        ],
        ids=lambda e: e.estimator_id.value,
    )
    def test_variance_matches_enumeration(self, ternary: Distribution, estimator: EstimatorConfig):
        N = 6
        pairs = covariance_from_pairs(ternary, N, estimator)
        report = enumerate_moments(ternary, N, estimator)
        assert pairs == pytest.approx(report.variance_nats2, rel=1e-8, abs=1e-13)

    def test_variance_on_fair_bit(self, fair_bit: Distribution):
        estimator = schuermann([1.0, 1.0])
        values = np.array([estimator.evaluate(CountVector.of([k, 3 - k])).value_nats for k in range(4)])
        weights = np.array([1, 3, 3, 1]) / 8.0
        mean = float(weights @ values)
        expected = float(weights @ (values - mean) ** 2)
        assert covariance_from_pairs(fair_bit, 3, estimator) == pytest.approx(expected, abs=1e-13)
