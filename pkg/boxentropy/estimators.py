"""
Point estimators of Shannon entropy from occupation numbers.

Every estimator has the plug-in shape

    H_hat = L(N) - (1/N) * sum_{n_i > 0} n_i * phi_i(n_i)

with leading term L(N) = ln N or psi(N). Internal math is in nats; estimates
carry both nats and bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from boxentropy.errors import DomainError, GOverflowError, NumericalError
from boxentropy.special_fn import big_g, big_g_a, digamma, digamma_table, n_big_g_table

LN2 = math.log(2.0)


class EstimatorId(str, Enum):
    NAIVE = "naive"
    GRASSBERGER = "grassberger"
    SCHUERMANN_POISSON = "schuermann_poisson"
    SCHUERMANN_BINOMIAL = "schuermann_binomial"
    PHI = "phi"


class LeadingTerm(str, Enum):
    LOG_N = "log_N"
    PSI_N = "psi_N"


class Regime(str, Enum):
    POISSON = "poisson"
    BINOMIAL = "binomial"


_DEFAULT_LEADING = {
    EstimatorId.NAIVE: LeadingTerm.LOG_N,
    EstimatorId.PHI: LeadingTerm.LOG_N,
    EstimatorId.GRASSBERGER: LeadingTerm.PSI_N,
    EstimatorId.SCHUERMANN_POISSON: LeadingTerm.LOG_N,
    EstimatorId.SCHUERMANN_BINOMIAL: LeadingTerm.PSI_N,
}

# Named phi functions, so that phi estimators stay serialisable.
PHI_FUNCTIONS: dict[str, Callable[[int], float]] = {
    "log": math.log,
    "digamma": digamma,
    "big_g": big_g,
}


@dataclass(frozen=True)
class CountVector:
    """Observed occupation numbers n_1..n_M."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(self.counts)
        for i, n in enumerate(counts):
            if isinstance(n, bool) or int(n) != n or n < 0:
                raise DomainError(f"count at box {i} must be a nonnegative integer, got {n!r}")
        counts = tuple(int(n) for n in counts)
        object.__setattr__(self, "counts", counts)
        if sum(counts) < 1:
            raise DomainError("count vector needs at least one positive count")

    @classmethod
    def of(cls, counts: Iterable[int]) -> "CountVector":
        return cls(tuple(counts))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def box_count(self) -> int:
        return len(self.counts)

    def occupied(self) -> Iterable[tuple[int, int]]:
        """(box index, n_i) for every box with n_i > 0."""
        return ((i, n) for i, n in enumerate(self.counts) if n > 0)


@dataclass(frozen=True)
class ParamVector:
    """Per-box parameters a_1..a_M aligned positionally with a CountVector."""

    a: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.a)
        for i, v in enumerate(values):
            if not v >= 0 or math.isinf(v):
                raise DomainError(f"a at box {i} must be a finite real >= 0, got {v!r}")
        object.__setattr__(self, "a", values)

    @classmethod
    def of(cls, values: Iterable[float]) -> "ParamVector":
        return cls(tuple(values))

    @classmethod
    def uniform(cls, a: float, box_count: int) -> "ParamVector":
        """The single-parameter Schuermann choice: one a for every box."""
        return cls((float(a),) * box_count)

    def __len__(self) -> int:
        return len(self.a)

    def check_aligned(self, box_count: int) -> None:
        if len(self.a) != box_count:
            raise DomainError(f"parameter vector has {len(self.a)} entries but there are {box_count} boxes")


@dataclass(frozen=True)
class EntropyEstimate:
    value_nats: float
    estimator_id: EstimatorId
    leading_term: LeadingTerm

    @property
    def value_bits(self) -> float:
        return self.value_nats / LN2

    def to_record(self) -> dict[str, Any]:
        return {
            "estimator_id": self.estimator_id.value,
            "leading_term": self.leading_term.value,
            "value_nats": self.value_nats,
            "value_bits": self.value_bits,
        }


def default_leading_term(estimator_id: EstimatorId | str) -> LeadingTerm:
    return _DEFAULT_LEADING[EstimatorId(estimator_id)]


def leading_value(total: int, leading_term: LeadingTerm) -> float:
    if leading_term is LeadingTerm.PSI_N:
        return digamma(total)
    return math.log(total)


def naive_entropy(c: CountVector) -> EntropyEstimate:
    """Plug-in (maximum-likelihood) estimate ln N - (1/N) sum n_i ln n_i."""
    total = c.total
    s = math.fsum(n * math.log(n) for _, n in c.occupied())
    return EntropyEstimate(math.log(total) - s / total, EstimatorId.NAIVE, LeadingTerm.LOG_N)


def phi_entropy(
    c: CountVector,
    phi: Callable[[int], float],
    leading_term: LeadingTerm = LeadingTerm.LOG_N,
) -> EntropyEstimate:
    """ln N - (1/N) sum n_i phi(n_i), the sum running over occupied boxes only."""
    total = c.total
    terms = []
    for i, n in c.occupied():
        try:
            value = phi(n)
        except GOverflowError as exc:
            raise GOverflowError(exc.n, exc.a, box=i) from exc
        except (OverflowError, ValueError) as exc:
            raise NumericalError(f"phi({n}) failed at box {i}: {exc}", {"box": i, "n": n}) from exc
        if not math.isfinite(value):
            raise NumericalError(f"phi({n}) is not finite at box {i}", {"box": i, "n": n, "value": value})
        terms.append(n * value)
    return EntropyEstimate(
        leading_value(total, leading_term) - math.fsum(terms) / total,
        EstimatorId.PHI,
        leading_term,
    )


def schuermann_entropy(
    c: CountVector,
    a: ParamVector,
    regime: Regime = Regime.BINOMIAL,
    leading_term: LeadingTerm | None = None,
) -> EntropyEstimate:
    """
    Generalized Schuermann estimator with one parameter per box.

    The Poisson regime leads with ln N, the binomial regime with psi(N); the
    psi(N) form is what makes the estimator exactly unbiased at a_i = (1-p_i)/p_i.
    ``leading_term`` overrides the regime default. a_i of empty boxes is never read.
    """
    a.check_aligned(c.box_count)
    regime = Regime(regime)
    if leading_term is None:
        leading_term = LeadingTerm.PSI_N if regime is Regime.BINOMIAL else LeadingTerm.LOG_N
    estimator_id = EstimatorId.SCHUERMANN_BINOMIAL if regime is Regime.BINOMIAL else EstimatorId.SCHUERMANN_POISSON
    value = _g_family_value(c, a.a, LeadingTerm(leading_term))
    return EntropyEstimate(value, estimator_id, LeadingTerm(leading_term))


def grassberger_entropy(c: CountVector, leading_term: LeadingTerm = LeadingTerm.PSI_N) -> EntropyEstimate:
    """Grassberger estimator: the Schuermann form with every a_i = 1."""
    value = _g_family_value(c, (1.0,) * c.box_count, LeadingTerm(leading_term))
    return EntropyEstimate(value, EstimatorId.GRASSBERGER, LeadingTerm(leading_term))


def _g_family_value(c: CountVector, a: Sequence[float], leading_term: LeadingTerm) -> float:
    total = c.total
    terms = []
    for i, n in c.occupied():
        try:
            terms.append(n * big_g_a(n, a[i]))
        except GOverflowError as exc:
            raise GOverflowError(n, a[i], box=i) from exc
    return leading_value(total, leading_term) - math.fsum(terms) / total


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Closed description of one estimator: id, parameters and leading term.

    Used wherever an estimator must be reproducible from metadata (exact
    enumeration, Monte Carlo, CLI output).
    """

    estimator_id: EstimatorId
    a: ParamVector | None = None
    leading_term: LeadingTerm | None = None
    phi: str | None = None
    _resolved_leading: LeadingTerm = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        estimator_id = EstimatorId(self.estimator_id)
        object.__setattr__(self, "estimator_id", estimator_id)
        leading = LeadingTerm(self.leading_term) if self.leading_term is not None else _DEFAULT_LEADING[estimator_id]
        object.__setattr__(self, "_resolved_leading", leading)
        if estimator_id in (EstimatorId.SCHUERMANN_POISSON, EstimatorId.SCHUERMANN_BINOMIAL) and self.a is None:
            raise DomainError(f"{estimator_id.value} needs a parameter vector")
        if estimator_id is EstimatorId.PHI and self.phi not in PHI_FUNCTIONS:
            raise DomainError(f"phi estimator needs phi in {sorted(PHI_FUNCTIONS)}, got {self.phi!r}")

    @property
    def resolved_leading_term(self) -> LeadingTerm:
        return self._resolved_leading

    @property
    def is_g_family(self) -> bool:
        return self.estimator_id in (
            EstimatorId.GRASSBERGER,
            EstimatorId.SCHUERMANN_POISSON,
            EstimatorId.SCHUERMANN_BINOMIAL,
        )

    def params_for(self, box_count: int) -> tuple[float, ...]:
        """Per-box a-values actually used; all ones for the Grassberger estimator."""
        if self.estimator_id is EstimatorId.GRASSBERGER:
            return (1.0,) * box_count
        if self.a is None:
            raise DomainError(f"{self.estimator_id.value} has no parameter vector")
        self.a.check_aligned(box_count)
        return self.a.a

    def evaluate(self, c: CountVector) -> EntropyEstimate:
        leading = self._resolved_leading
        if self.estimator_id is EstimatorId.NAIVE:
            if leading is LeadingTerm.LOG_N:
                return naive_entropy(c)
            return replace(phi_entropy(c, math.log, leading), estimator_id=EstimatorId.NAIVE)
        if self.estimator_id is EstimatorId.PHI:
            assert self.phi is not None
            return phi_entropy(c, PHI_FUNCTIONS[self.phi], leading)
        if self.estimator_id is EstimatorId.GRASSBERGER:
            return grassberger_entropy(c, leading)
        assert self.a is not None
        regime = Regime.POISSON if self.estimator_id is EstimatorId.SCHUERMANN_POISSON else Regime.BINOMIAL
        return schuermann_entropy(c, self.a, regime, leading)

    def contribution_tables(self, n_max: int, box_count: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Vectorised form of the per-box term n * phi_i(n).

        Returns ``(tables, group)``: ``tables[k, n]`` is n * phi(n) for the k-th
        distinct parameter value and ``group[i]`` selects the table of box i.
        Overflowing entries are NaN.
        """
        if self.estimator_id in (EstimatorId.NAIVE, EstimatorId.PHI):
            orders = np.arange(n_max + 1)
            table = np.zeros(n_max + 1)
            if self.estimator_id is EstimatorId.NAIVE:
                table[1:] = orders[1:] * np.log(orders[1:])
            else:
                assert self.phi is not None
                phi = PHI_FUNCTIONS[self.phi]
                table[1:] = [n * phi(n) for n in range(1, n_max + 1)]
            return table[None, :], np.zeros(box_count, dtype=np.intp)
        params = self.params_for(box_count)
        distinct = sorted(set(params))
        index = {a: k for k, a in enumerate(distinct)}
        tables = np.vstack([n_big_g_table(n_max, a) for a in distinct])
        group = np.array([index[a] for a in params], dtype=np.intp)
        return tables, group

    def evaluate_many(self, counts: np.ndarray) -> np.ndarray:
        """Estimates in nats for each row of an (R, M) count array; NaN marks overflow."""
        counts = np.asarray(counts)
        if counts.ndim != 2:
            raise DomainError(f"counts must be a 2-D array, got shape {counts.shape}")
        totals = counts.sum(axis=1)
        if np.any(totals < 1):
            raise DomainError("every count row needs at least one positive count")
        n_max = int(counts.max())
        tables, group = self.contribution_tables(n_max, counts.shape[1])
        with np.errstate(invalid="ignore", over="ignore"):
            subtracted = tables[group[None, :], counts].sum(axis=1)
        lead = self._leading_array(totals)
        return lead - subtracted / totals

    def _leading_array(self, totals: np.ndarray) -> np.ndarray:
        if self._resolved_leading is LeadingTerm.LOG_N:
            return np.log(totals.astype(float))
        return digamma_table(int(totals.max()))[totals]

    def to_record(self) -> dict[str, Any]:
        return {
            "estimator_id": self.estimator_id.value,
            "a": list(self.a.a) if self.a is not None else None,
            "leading_term": self._resolved_leading.value,
            "phi": self.phi,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "EstimatorConfig":
        a = record.get("a")
        return cls(
            EstimatorId(record["estimator_id"]),
            ParamVector.of(a) if a is not None else None,
            LeadingTerm(record["leading_term"]) if record.get("leading_term") else None,
            record.get("phi"),
        )
