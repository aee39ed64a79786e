"""
Ground truth for the estimators.

Closed-form expectations and biases, plus brute-force enumeration of every
multinomial outcome for exact means and variances (covariances between boxes
included).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Literal

import numpy as np
from scipy import integrate
from scipy.special import gammaln, xlogy

from boxentropy.errors import BudgetExceededError, DomainError, GOverflowError, NumericalError
from boxentropy.estimators import LN2, EstimatorConfig, LeadingTerm, ParamVector
from boxentropy.special_fn import DEFAULT_CONFIG, EULER_GAMMA, SpecialFnConfig, digamma, exp_integral_e1

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
PROBABILITY_SUM_TOL = 1e-10
BOUNDARY_TOL = 1e-12
DEFAULT_BUDGET = 10_000_000
DEFAULT_EXACT_BUDGET = 20_000
RATIONAL_DENOMINATOR_LIMIT = 10**12

Arithmetic = Literal["auto", "float", "exact"]


@dataclass(frozen=True)
class Distribution:
    """Exact box weights p_1..p_M."""

    p: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.p)
        if not values:
            raise DomainError("distribution needs at least one box")
        for i, v in enumerate(values):
            if not v > 0 or math.isinf(v):
                raise DomainError(f"p at box {i} must be > 0, got {v!r}")
        total = math.fsum(values)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"probabilities must sum to 1 within {NORMALIZATION_TOL}, got {total!r}")
        object.__setattr__(self, "p", values)

    @classmethod
    def of(cls, values: Iterable[float]) -> "Distribution":
        return cls(tuple(values))

    @property
    def box_count(self) -> int:
        return len(self.p)

    def expected_counts(self, N: int) -> tuple[float, ...]:
        """z_i = p_i * N."""
        return tuple(p * N for p in self.p)


@dataclass(frozen=True)
class MomentReport:
    mean_nats: float
    variance_nats2: float
    bias_nats: float
    outcome_count: int
    arithmetic: str = "float"

    @property
    def mean_bits(self) -> float:
        return self.mean_nats / LN2

    @property
    def bias_bits(self) -> float:
        return self.bias_nats / LN2

    @property
    def variance_bits2(self) -> float:
        return self.variance_nats2 / (LN2 * LN2)

    def to_record(self) -> dict[str, Any]:
        return {
            "mean_nats": self.mean_nats,
            "mean_bits": self.mean_bits,
            "variance_nats2": self.variance_nats2,
            "variance_bits2": self.variance_bits2,
            "bias_nats": self.bias_nats,
            "bias_bits": self.bias_bits,
            "outcome_count": self.outcome_count,
            "arithmetic": self.arithmetic,
        }


def exact_entropy(d: Distribution) -> float:
    """H = -sum p_i ln p_i in nats."""
    return -math.fsum(p * math.log(p) for p in d.p)


def optimal_a(p: float) -> float:
    """Bias-optimal parameter a* = (1 - p) / p."""
    if not 0 < p <= 1:
        raise DomainError(f"optimal_a needs 0 < p <= 1, got {p!r}")
    return (1.0 - p) / p


def optimal_params(d: Distribution) -> ParamVector:
    return ParamVector.of(optimal_a(p) for p in d.p)


def _check_z(z: float, N: int) -> None:
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not 0 < z < N:
        raise DomainError(f"expected count z must satisfy 0 < z < N, got z={z!r}, N={N}")


def binomial_expectation(f: Callable[[int], float], z: float, N: int) -> float:
    """
    E[f(n)] for n ~ Binomial(N, z/N), as an exact finite sum.

    Weights are computed in log space; f is only evaluated where the weight
    does not underflow.
    """
    _check_z(z, N)
    p = z / N
    n = np.arange(N + 1)
    log_w = gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1) + n * math.log(p) + (N - n) * math.log1p(-p)
    weights = np.exp(log_w)
    terms = []
    for k in np.nonzero(weights > 0.0)[0]:
        k = int(k)
        try:
            value = f(k)
        except (GOverflowError, OverflowError) as exc:
            raise NumericalError(
                f"f overflows at n={k} where the binomial weight is {weights[k]:.3g}",
                {"n": k, "weight": float(weights[k])},
            ) from exc
        if not math.isfinite(value):
            raise NumericalError(f"f({k}) is not finite", {"n": k, "weight": float(weights[k])})
        terms.append(float(weights[k]) * value)
    return math.fsum(terms)


def _upper_limit(z: float, N: int, a: float) -> float:
    """u = 1 - (1+a) z / N, clamped to 0 within BOUNDARY_TOL of a*."""
    u = 1.0 - (1.0 + a) * z / N
    if u <= BOUNDARY_TOL:
        if u < -BOUNDARY_TOL:
            raise DomainError(
                f"a={a:g} exceeds the bias-optimal value (N-z)/z={(N - z) / z:g}; (1+a)z/N must be <= 1"
            )
        u = 0.0
    if u > 1.0 - 1e-15:
        raise DomainError(f"upper limit {u!r} too close to the singularity at 1")
    return u


def remainder_integral(u: float, N: int, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """integral_0^u x^(N-1)/(1-x) dx for 0 <= u < 1, by adaptive quadrature."""
    if u == 0.0:
        return 0.0
    if not 0.0 < u <= 1.0 - 1e-15:
        raise DomainError(f"remainder integral needs 0 <= u <= 1 - 1e-15, got {u!r}")
    power = N - 1

    def integrand(x: float) -> float:
        return x**power / (1.0 - x)

    # the mass sits within a few u/N (and a few 1-u) of the upper limit
    breaks = {u * (1.0 - k / N) for k in (1, 10, 50)} | {u - k * (1.0 - u) for k in (1, 10)}
    points = sorted(x for x in breaks if 0.0 < x < u)
    value, abserr, info, *rest = integrate.quad(
        integrand,
        0.0,
        u,
        epsabs=cfg.quadrature_abs_tol,
        epsrel=cfg.quadrature_rel_tol,
        limit=cfg.quadrature_limit,
        points=points or None,
        full_output=1,
    )
    tolerance = max(cfg.quadrature_abs_tol, cfg.quadrature_rel_tol * abs(value))
    if rest and abserr > 1e4 * tolerance:
        raise NumericalError(
            f"remainder integral did not converge: {rest[0]}",
            {"u": u, "N": N, "value": value, "abserr": abserr, "neval": info.get("neval")},
        )
    return value


def expectation_nG(z: float, N: int, a: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """E[n G_n(a)] for n ~ Binomial(N, z/N) in closed form; a = 0 gives E[n psi(n)]."""
    _check_z(z, N)
    if not a >= 0:
        raise DomainError(f"a must be >= 0, got {a!r}")
    u = _upper_limit(z, N, a)
    return z * math.log(z) + z * (digamma(N) - math.log(N)) + z * remainder_integral(u, N, cfg)


def expectation_npsi(z: float, N: int, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """E[n psi(n)] for n ~ Binomial(N, z/N)."""
    return expectation_nG(z, N, 0.0, cfg)


def poisson_bias_term(z: float, a: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """z E_1((1+a) z): the per-box term Schuermann's Poisson estimator neglects."""
    if not z > 0:
        raise DomainError(f"z must be > 0, got {z!r}")
    if not a >= 0:
        raise DomainError(f"a must be >= 0, got {a!r}")
    if math.isinf(a):
        return 0.0
    return z * exp_integral_e1((1.0 + a) * z, cfg)


def exact_estimator_bias(
    d: Distribution, N: int, a: ParamVector, cfg: SpecialFnConfig = DEFAULT_CONFIG
) -> float:
    """
    E[H_opt] - H for the binomial-regime estimator, per box from the closed form.

    Nonpositive; zero exactly when every a_i = (1-p_i)/p_i.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    a.check_aligned(d.box_count)
    terms = []
    for i, (z, a_i) in enumerate(zip(d.expected_counts(N), a.a)):
        try:
            u = _upper_limit(z, N, a_i)
        except DomainError as exc:
            raise DomainError(f"box {i}: {exc}") from exc
        terms.append(z * remainder_integral(u, N, cfg))
    return -math.fsum(terms) / N


def poisson_estimator_bias(
    d: Distribution, N: int, a: ParamVector, cfg: SpecialFnConfig = DEFAULT_CONFIG
) -> float:
    """Bias of the ln N-led estimator in the Poisson limit: -(1/N) sum z_i E_1((1+a_i) z_i)."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    a.check_aligned(d.box_count)
    return -math.fsum(poisson_bias_term(z, a_i, cfg) for z, a_i in zip(d.expected_counts(N), a.a)) / N


def pair_joint_probability(n_i: int, n_j: int, p_i: float, p_j: float, N: int) -> float:
    """P(n_i, n_j) for two distinct boxes of a multinomial(N, p)."""
    rest = N - n_i - n_j
    if min(n_i, n_j, rest) < 0:
        return 0.0
    q = max(0.0, 1.0 - p_i - p_j)
    log_p = (
        gammaln(N + 1)
        - gammaln(n_i + 1)
        - gammaln(n_j + 1)
        - gammaln(rest + 1)
        + xlogy(n_i, p_i)
        + xlogy(n_j, p_j)
        + xlogy(rest, q)
    )
    return float(np.exp(log_p))


def covariance_from_pairs(d: Distribution, N: int, estimator: EstimatorConfig) -> float:
    """
    Var[H_hat] from single-box binomial and two-box joint marginals.

    Independent of enumerate_moments: Var = (1/N^2) [sum_i Var f_i + sum_{i != j} Cov(f_i, f_j)]
    with f_i(n) = n phi_i(n).
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    box_count = d.box_count
    tables, group = estimator.contribution_tables(N, box_count)
    f = tables[group]
    if np.isnan(f).any():
        raise NumericalError("estimator overflows for some attainable count", {"N": N})
    n = np.arange(N + 1)
    marginals = []
    means = []
    for i, p in enumerate(d.p):
        w = np.exp(gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1) + xlogy(n, p) + xlogy(N - n, 1.0 - p))
        marginals.append(w)
        means.append(math.fsum(w * f[i]))
    total = []
    for i in range(box_count):
        total.append(math.fsum(marginals[i] * (f[i] - means[i]) ** 2))
        for j in range(box_count):
            if j == i:
                continue
            cov_terms = []
            for n_i in range(N + 1):
                for n_j in range(N + 1 - n_i):
                    w = pair_joint_probability(n_i, n_j, d.p[i], d.p[j], N)
                    if w > 0.0:
                        cov_terms.append(w * (f[i][n_i] - means[i]) * (f[j][n_j] - means[j]))
            total.append(math.fsum(cov_terms))
    return max(0.0, math.fsum(total)) / (N * N)


def outcome_count(N: int, box_count: int) -> int:
    """Number of compositions of N into box_count nonnegative parts."""
    return math.comb(N + box_count - 1, box_count - 1)


def _composition_array(total: int, parts: int) -> np.ndarray:
    """All compositions of ``total`` into ``parts`` parts, lexicographic, as an int64 array."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total + 1):
        rest = _composition_array(total - first, parts - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def _composition_blocks(N: int, box_count: int) -> Iterator[np.ndarray]:
    """Compositions of N grouped by their first part, in lexicographic order."""
    if box_count == 1:
        yield np.array([[N]], dtype=np.int64)
        return
    for first in range(N + 1):
        rest = _composition_array(N - first, box_count - 1)
        yield np.column_stack([np.full(len(rest), first, dtype=np.int64), rest])


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def enumerate_moments(
    d: Distribution,
    N: int,
    estimator: EstimatorConfig,
    *,
    budget: int = DEFAULT_BUDGET,
    arithmetic: Arithmetic = "auto",
    exact_budget: int = DEFAULT_EXACT_BUDGET,
) -> MomentReport:
    """
    Exact E[H_hat] and Var[H_hat] by summing over every composition of N.

    ``arithmetic="exact"`` (G-family estimators only) accumulates the rational
    part of the estimator with Fractions, which keeps the alternating
    a**n contributions of large a_i from cancelling catastrophically.
    ``"auto"`` picks exact when the outcome count is at most ``exact_budget``.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    count = outcome_count(N, d.box_count)
    if count > budget:
        raise BudgetExceededError(count, budget)
    if arithmetic not in ("auto", "float", "exact"):
        raise DomainError(f"arithmetic must be auto, float or exact, got {arithmetic!r}")
    if arithmetic == "exact" and not estimator.is_g_family:
        raise DomainError(
            f"exact arithmetic is only available for G-family estimators, not {estimator.estimator_id.value}"
        )
    use_exact = arithmetic == "exact" or (arithmetic == "auto" and estimator.is_g_family and count <= exact_budget)
    logger.debug(
        "enumerating %d outcomes (N=%d, M=%d, %s arithmetic)", count, N, d.box_count, "exact" if use_exact else "float"
    )
    if use_exact:
        mean, variance = _exact_g_family_moments(d, N, estimator)
    else:
        if estimator.is_g_family and max(estimator.params_for(d.box_count)) > 1.0:
            logger.warning("float enumeration with a_i > 1 may lose precision to cancellation (N=%d)", N)
        mean, variance = _float_moments(d, N, estimator)
    return MomentReport(mean, variance, mean - exact_entropy(d), count, "exact" if use_exact else "float")


def _log_multinomial(block: np.ndarray, log_p: np.ndarray, N: int) -> np.ndarray:
    return gammaln(N + 1) - gammaln(block + 1).sum(axis=1) + (block * log_p[None, :]).sum(axis=1)


def _float_moments(d: Distribution, N: int, estimator: EstimatorConfig) -> tuple[float, float]:
    log_p = np.log(np.asarray(d.p))

    def weighted_blocks() -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for block in _composition_blocks(N, d.box_count):
            prob = np.exp(_log_multinomial(block, log_p, N))
            values = estimator.evaluate_many(block)
            bad = np.isnan(values) & (prob > 0.0)
            if bad.any():
                row = block[np.argmax(bad)]
                raise NumericalError(
                    f"estimator overflows on outcome {tuple(int(n) for n in row)} with positive probability",
                    {"outcome": [int(n) for n in row]},
                )
            keep = prob > 0.0
            yield prob[keep], values[keep]

    prob_parts, first_parts = [], []
    for prob, values in weighted_blocks():
        prob_parts.append(math.fsum(prob))
        first_parts.append(math.fsum(prob * values))
    prob_total = math.fsum(prob_parts)
    if abs(prob_total - 1.0) > PROBABILITY_SUM_TOL:
        raise NumericalError(
            f"outcome probabilities sum to {prob_total!r}, not 1",
            {"probability_sum": prob_total, "N": N},
        )
    mean = math.fsum(first_parts) / prob_total
    second_parts = [math.fsum(prob * (values - mean) ** 2) for prob, values in weighted_blocks()]
    return mean, math.fsum(second_parts) / prob_total


def _rational(value: float) -> Fraction:
    return Fraction(value).limit_denominator(RATIONAL_DENOMINATOR_LIMIT)


def _exact_g_family_moments(d: Distribution, N: int, estimator: EstimatorConfig) -> tuple[float, float]:
    """
    Moments of H_hat = K + R(n) + (1/N) sum_i c_i n_i with

        K   = L(N) + gamma                                   (float constant)
        R   = -(1/N) sum_i n_i (H_(n_i - 1) + P_(n_i)(a_i))   (rational)
        c_i = ln(1 + a_i)

    where H_k is the k-th harmonic number and P_n(a) = sum_{k<n} (-1)^(k+1) a^k / k
    is the polynomial part of g_n(a) = -ln(1+a) + P_n(a).
    """
    box_count = d.box_count
    params = estimator.params_for(box_count)
    p = [_rational(v) for v in d.p]
    a = [_rational(v) for v in params]
    c = [math.log1p(v) for v in params]

    harmonic = [Fraction(0)]
    for k in range(1, N):
        harmonic.append(harmonic[-1] + Fraction(1, k))

    # r[i][n] = n (H_(n-1) + P_n(a_i)); w[i][n] = p_i^n / n!
    r: list[list[Fraction]] = []
    w: list[list[Fraction]] = []
    for i in range(box_count):
        poly = Fraction(0)
        power = Fraction(1)
        r_i = [Fraction(0)]
        for n in range(1, N + 1):
            if n > 1:
                k = n - 1
                power *= a[i]
                poly = poly + power / k if k % 2 == 1 else poly - power / k
            r_i.append(n * (harmonic[n - 1] + poly))
        r.append(r_i)
        w_i = [Fraction(1)]
        for n in range(1, N + 1):
            w_i.append(w_i[-1] * p[i] / n)
        w.append(w_i)

    n_factorial = math.factorial(N)
    s0 = Fraction(0)
    s1 = Fraction(0)
    s2 = Fraction(0)
    t = [Fraction(0)] * box_count
    for outcome in _compositions(N, box_count):
        prob = Fraction(n_factorial)
        rational = Fraction(0)
        for i, n in enumerate(outcome):
            prob *= w[i][n]
            rational += r[i][n]
        rational = -rational / N
        s0 += prob
        weighted = prob * rational
        s1 += weighted
        s2 += weighted * rational
        for i, n in enumerate(outcome):
            if n:
                t[i] += weighted * n

    mass = sum(p, Fraction(0))
    q = [v / mass for v in p]
    mean_r = s1 / s0
    var_r = s2 / s0 - mean_r * mean_r
    cov_rn = [t[i] / s0 - mean_r * N * q[i] for i in range(box_count)]

    q_float = [float(v) for v in q]
    if estimator.resolved_leading_term is LeadingTerm.PSI_N:
        constant = float(harmonic[N - 1])
    else:
        constant = math.log(N) + EULER_GAMMA
    mean = constant + float(mean_r) + math.fsum(c[i] * q_float[i] for i in range(box_count))

    cov_terms = [2.0 * c[i] * float(cov_rn[i]) / N for i in range(box_count)]
    linear_terms = [
        c[i] * c[j] * N * q_float[i] * ((1.0 if i == j else 0.0) - q_float[j]) / (N * N)
        for i in range(box_count)
        for j in range(box_count)
    ]
    variance = float(var_r) + math.fsum(cov_terms) + math.fsum(linear_terms)
    return mean, max(0.0, variance)
