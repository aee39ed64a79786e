"""
Monte Carlo harness: replicate estimates, a-sweeps and the parameter safety rule.

Replicates are drawn and evaluated in blocks (``sampling.sample_count_block``);
per-block moments are merged in block order so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from boxentropy.errors import BoxEntropyError, BudgetExceededError, DomainError, Failure, NumericalError
from boxentropy.estimators import LN2, CountVector, EstimatorConfig, EstimatorId, LeadingTerm, ParamVector
from boxentropy.exact_oracle import Distribution, enumerate_moments, exact_entropy
from boxentropy.sampling import DEFAULT_BLOCK_SIZE, SeedSpec, block_sizes, sample_count_block

logger = logging.getLogger(__name__)

DEFAULT_SAFETY_THRESHOLD = 10.0
UNRELIABLE_OVERFLOW_FRACTION = 0.01
_PARAMETER_FREE = (EstimatorId.NAIVE, EstimatorId.GRASSBERGER, EstimatorId.PHI)


@dataclass(frozen=True)
class EstimateSummary:
    """
    Monte Carlo summary in bits.

    ``replicates`` counts requested draws; overflowed ones are excluded from the
    mean and variance, and the standard error uses the completed count.
    """

    mean_bits: float
    std_error_bits: float
    variance_bits2: float
    replicates: int
    overflow_count: int = 0

    @property
    def completed(self) -> int:
        return self.replicates - self.overflow_count

    @property
    def overflow_fraction(self) -> float:
        return self.overflow_count / self.replicates

    @property
    def unreliable(self) -> bool:
        return self.overflow_fraction > UNRELIABLE_OVERFLOW_FRACTION

    def to_record(self) -> dict[str, Any]:
        return {
            "mean_bits": self.mean_bits,
            "std_error_bits": self.std_error_bits,
            "variance_bits2": self.variance_bits2,
            "replicates": self.replicates,
            "overflow_count": self.overflow_count,
            "unreliable": self.unreliable,
        }


@dataclass(frozen=True)
class _BlockMoments:
    count: int
    mean: float
    m2: float
    overflow: int

    @classmethod
    def of(cls, values: np.ndarray) -> "_BlockMoments":
        finite = values[np.isfinite(values)]
        overflow = len(values) - len(finite)
        if len(finite) == 0:
            return cls(0, 0.0, 0.0, overflow)
        mean = float(np.mean(finite))
        return cls(len(finite), mean, float(np.sum((finite - mean) ** 2)), overflow)

    def merge(self, other: "_BlockMoments") -> "_BlockMoments":
        # pairwise update of count, mean and sum of squared deviations
        if other.count == 0:
            return _BlockMoments(self.count, self.mean, self.m2, self.overflow + other.overflow)
        if self.count == 0:
            return _BlockMoments(other.count, other.mean, other.m2, self.overflow + other.overflow)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return _BlockMoments(count, mean, m2, self.overflow + other.overflow)


def mc_estimate(
    d: Distribution,
    N: int,
    estimator: EstimatorConfig,
    replicates: int,
    seed: SeedSpec,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> EstimateSummary:
    """Mean, population variance and standard error of the estimator over ``replicates`` multinomial draws."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if estimator.estimator_id not in _PARAMETER_FREE:
        estimator.params_for(d.box_count)
    sizes = block_sizes(replicates, block_size)

    def run_block(k: int) -> _BlockMoments:
        counts = sample_count_block(d, N, seed, k, sizes[k])
        return _BlockMoments.of(estimator.evaluate_many(counts))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run_block, range(len(sizes))))
    else:
        blocks = [run_block(k) for k in range(len(sizes))]

    total = blocks[0]
    for block in blocks[1:]:
        total = total.merge(block)
    if total.count == 0:
        raise NumericalError(
            f"all {replicates} replicates overflowed; reduce a_i so that a_i**n_i stays O(1)",
            {"replicates": replicates, "N": N, "estimator": estimator.to_record()},
        )
    variance = total.m2 / total.count / (LN2 * LN2)
    std_error = math.sqrt(variance / total.count) if total.count >= 2 else math.nan
    summary = EstimateSummary(total.mean / LN2, std_error, variance, replicates, total.overflow)
    if total.overflow:
        logger.debug("%d of %d replicates overflowed (N=%d)", total.overflow, replicates, N)
    return summary


@dataclass(frozen=True)
class APath:
    """Linear a-path a_k(t) = base_k + slope_k * (t - 1) over a grid of t."""

    base: tuple[float, ...]
    slope: tuple[float, ...]
    t_grid: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.base) != len(self.slope):
            raise DomainError(f"a-path base has {len(self.base)} entries but slope has {len(self.slope)}")
        if not self.t_grid:
            raise DomainError("a-path t grid is empty")

    @classmethod
    def linspace(cls, base: Sequence[float], slope: Sequence[float], start: float, stop: float, num: int) -> "APath":
        return cls(tuple(base), tuple(slope), tuple(float(t) for t in np.linspace(start, stop, num)))

    def points(self) -> list[ParamVector]:
        return [ParamVector.of(b + s * (t - 1.0) for b, s in zip(self.base, self.slope)) for t in self.t_grid]


@dataclass(frozen=True)
class SweepSpec:
    distribution: Distribution
    tuple_sizes: tuple[int, ...]
    a_grid: tuple[ParamVector, ...]
    replicates: int
    estimator_id: EstimatorId = EstimatorId.SCHUERMANN_BINOMIAL
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(0))
    leading_term: LeadingTerm | None = None
    phi: str | None = None
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimator_id", EstimatorId(self.estimator_id))
        if self.replicates < 1:
            raise DomainError(f"replicates must be >= 1, got {self.replicates}")
        if not self.tuple_sizes or any(n < 1 for n in self.tuple_sizes):
            raise DomainError(f"tuple_sizes must be a non-empty list of positive integers, got {self.tuple_sizes!r}")
        if not self.a_grid and self.estimator_id not in _PARAMETER_FREE:
            raise DomainError(f"a_grid is empty; {self.estimator_id.value} needs at least one parameter vector")
        for k, a in enumerate(self.a_grid):
            if len(a) != self.distribution.box_count:
                raise DomainError(
                    f"a_grid[{k}] has {len(a)} entries but the distribution has {self.distribution.box_count} boxes"
                )

    def rows(self) -> Iterator[tuple[int, int, ParamVector | None]]:
        """(row index, N, a-point) in grid order: N outer, a inner."""
        points: Sequence[ParamVector | None] = self.a_grid or (None,)
        row = 0
        for N in self.tuple_sizes:
            for a in points:
                yield row, N, a
                row += 1

    def estimator_for(self, a: ParamVector | None) -> EstimatorConfig:
        if self.estimator_id in _PARAMETER_FREE:
            return EstimatorConfig(self.estimator_id, None, self.leading_term, self.phi)
        return EstimatorConfig(self.estimator_id, a, self.leading_term)


@dataclass(frozen=True)
class SweepRow:
    index: int
    N: int
    a: ParamVector | None
    summary: EstimateSummary

    def to_record(self, box_count: int) -> dict[str, Any]:
        record: dict[str, Any] = {"N": self.N}
        for i in range(box_count):
            record[f"a_{i + 1}"] = self.a.a[i] if self.a is not None else None
        record["mean_bits"] = self.summary.mean_bits
        record["std_error_bits"] = self.summary.std_error_bits
        record["variance"] = self.summary.variance_bits2
        record["overflow_count"] = self.summary.overflow_count
        return record


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)

    @property
    def unreliable_rows(self) -> list[int]:
        return [row.index for row in self.rows if row.summary.unreliable]


def sweep_columns(box_count: int) -> list[str]:
    return ["N", *(f"a_{i + 1}" for i in range(box_count)), "mean_bits", "std_error_bits", "variance", "overflow_count"]


def sweep_a(spec: SweepSpec) -> SweepResult:
    """One EstimateSummary per (N, a-point); a failing row is recorded and the sweep continues."""
    result = SweepResult()
    for index, N, a in spec.rows():
        try:
            summary = mc_estimate(
                spec.distribution,
                N,
                spec.estimator_for(a),
                spec.replicates,
                spec.seed.derive(index),
                block_size=spec.block_size,
                workers=spec.workers,
            )
        except BoxEntropyError as exc:
            logger.warning("sweep row %d (N=%d, a=%s) failed: %s", index, N, a.a if a else None, exc)
            details = dict(getattr(exc, "diagnostics", {}))
            details.update({"N": N, "a": list(a.a) if a is not None else None})
            result.failures.append(Failure(index, str(exc), details))
            continue
        if summary.unreliable:
            logger.warning(
                "sweep row %d (N=%d, a=%s) unreliable: %d of %d replicates overflowed",
                index,
                N,
                a.a if a else None,
                summary.overflow_count,
                summary.replicates,
            )
        logger.debug("sweep row %d done: N=%d mean=%.6f bits", index, N, summary.mean_bits)
        result.rows.append(SweepRow(index, N, a, summary))
    return result


@dataclass(frozen=True)
class BoxSafety:
    box: int
    a: float
    n: int
    power: float
    flagged: bool


@dataclass(frozen=True)
class SafetyReport:
    threshold: float
    boxes: tuple[BoxSafety, ...]

    @property
    def passed(self) -> bool:
        return not any(box.flagged for box in self.boxes)

    @property
    def flagged(self) -> list[BoxSafety]:
        return [box for box in self.boxes if box.flagged]


def safety_check(a: ParamVector, c: CountVector, threshold: float = DEFAULT_SAFETY_THRESHOLD) -> SafetyReport:
    """Flag every occupied box whose a_i**n_i exceeds ``threshold``."""
    if not threshold > 0:
        raise DomainError(f"threshold must be > 0, got {threshold!r}")
    a.check_aligned(c.box_count)
    boxes = []
    for i, n in c.occupied():
        a_i = a.a[i]
        try:
            power = a_i**n
        except OverflowError:
            power = math.inf
        boxes.append(BoxSafety(i, a_i, n, power, power > threshold))
    return SafetyReport(threshold, tuple(boxes))


def safe_a(counts_hint: CountVector, threshold: float = DEFAULT_SAFETY_THRESHOLD) -> ParamVector:
    """
    Largest a_i with a_i**n_i <= threshold for every occupied box.

    A heuristic from the observed counts alone; empty boxes get 1.
    """
    if not threshold > 0:
        raise DomainError(f"threshold must be > 0, got {threshold!r}")
    return ParamVector.of(threshold ** (1.0 / n) if n > 0 else 1.0 for n in counts_hint.counts)


@dataclass(frozen=True)
class ComparisonRow:
    estimator: EstimatorConfig
    summary: EstimateSummary
    bias_bits: float
    exact_mean_bits: float | None

    def to_record(self) -> dict[str, Any]:
        record = {"estimator": self.estimator.to_record(), "bias_bits": self.bias_bits}
        record.update(self.summary.to_record())
        record["exact_mean_bits"] = self.exact_mean_bits
        return record


def compare_estimators(
    d: Distribution,
    N: int,
    configs: Iterable[EstimatorConfig],
    replicates: int,
    seed: SeedSpec,
    *,
    enumeration_budget: int = 1_000_000,
    workers: int = 1,
) -> list[ComparisonRow]:
    """
    Side-by-side Monte Carlo summaries with the bias against the exact entropy.

    Estimator k uses the stream ``seed.derive(k)``. The exact mean is included
    when the outcome space fits ``enumeration_budget``.
    """
    truth_bits = exact_entropy(d) / LN2
    rows = []
    for k, config in enumerate(configs):
        summary = mc_estimate(d, N, config, replicates, seed.derive(k), workers=workers)
        exact_mean: float | None
        try:
            exact_mean = enumerate_moments(d, N, config, budget=enumeration_budget).mean_bits
        except BudgetExceededError:
            exact_mean = None
        except NumericalError as exc:
            logger.warning("no exact mean for %s: %s", config.estimator_id.value, exc)
            exact_mean = None
        rows.append(ComparisonRow(config, summary, summary.mean_bits - truth_bits, exact_mean))
    return rows
