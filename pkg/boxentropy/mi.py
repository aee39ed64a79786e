"""
Mutual information I(X:Y) = H(Y) - H(Y|X) for a categorical X and a binary Y.

H(Y|X) is the N_x/N-weighted average of per-x binomial-regime estimates whose
(a_0, a_1) depend on the class of x: how strongly the FULL dataset leans
towards y=1 or y=0 for that x. Also holds the pair-file I/O and a synthetic
generator with a known true MI.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.special import entr

from boxentropy.errors import BoxEntropyError, DatasetFormatError, DomainError, Failure, NumericalError, OutputIOError
from boxentropy.estimators import LN2, CountVector, ParamVector, schuermann_entropy
from boxentropy.sampling import SeedSpec, subsample_pairs
from boxentropy.special_fn import digamma_table, n_big_g_table

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.65, 0.85)
DEFAULT_Q_VALUES = (0.95, 0.75, 0.5)
DEFAULT_CLASS_WEIGHTS = (0.2, 0.2, 0.2, 0.2, 0.2)
PYM_LIKE_ARITY = 4096
SPHERICAL_LIKE_ARITY = 4000
DEFAULT_SIZES = {"pym_like": 250_000, "spherical_like": 50_000}
SPHERICAL_ZIPF_EXPONENT = 1.0


class BiasClass(str, Enum):
    HEAVY_Y1 = "heavy_y1"
    MODERATE_Y1 = "moderate_y1"
    NEUTRAL = "neutral"
    MODERATE_Y0 = "moderate_y0"
    HEAVY_Y0 = "heavy_y0"

    def mirrored(self) -> "BiasClass":
        return _MIRROR[self]


_MIRROR = {
    BiasClass.HEAVY_Y1: BiasClass.HEAVY_Y0,
    BiasClass.MODERATE_Y1: BiasClass.MODERATE_Y0,
    BiasClass.NEUTRAL: BiasClass.NEUTRAL,
    BiasClass.MODERATE_Y0: BiasClass.MODERATE_Y1,
    BiasClass.HEAVY_Y0: BiasClass.HEAVY_Y1,
}

# (a_0, a_1): the parameter of the rare outcome is enlarged
DEFAULT_A_TABLE: dict[BiasClass, tuple[float, float]] = {
    BiasClass.NEUTRAL: (1.0, 1.0),
    BiasClass.MODERATE_Y1: (4.0, 1.0),
    BiasClass.HEAVY_Y1: (7.0, 1.0),
    BiasClass.MODERATE_Y0: (1.0, 4.0),
    BiasClass.HEAVY_Y0: (1.0, 7.0),
}


@dataclass(frozen=True, eq=False)
class PairDataset:
    """(x, y) samples; x ids in [0, x_arity), y in {0, 1}."""

    x: np.ndarray
    y: np.ndarray
    x_arity: int

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int8)
        if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
            raise DomainError(f"x and y must be 1-D arrays of equal length, got shapes {x.shape} and {y.shape}")
        if int(self.x_arity) < 1:
            raise DomainError(f"x_arity must be >= 1, got {self.x_arity}")
        if len(x) and (x.min() < 0 or x.max() >= self.x_arity):
            raise DomainError(f"x ids must lie in [0, {self.x_arity}), got range [{x.min()}, {x.max()}]")
        if len(y) and not np.isin(y, (0, 1)).all():
            raise DomainError("y values must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_arity", int(self.x_arity))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], x_arity: int | None = None) -> "PairDataset":
        data = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        arity = x_arity if x_arity is not None else (int(data[:, 0].max()) + 1 if len(data) else 1)
        return cls(data[:, 0], data[:, 1], arity)

    def __len__(self) -> int:
        return len(self.x)

    def pairs(self) -> Iterator[tuple[int, int]]:
        for x, y in zip(self.x.tolist(), self.y.tolist()):
            yield x, y

    def xy_counts(self) -> np.ndarray:
        """(x_arity, 2) array of y-counts per x."""
        flat = np.bincount(self.x * 2 + self.y, minlength=2 * self.x_arity)
        return flat.reshape(self.x_arity, 2)

    def y_counts(self) -> tuple[int, int]:
        ones = int(self.y.sum())
        return len(self) - ones, ones

    def swapped(self) -> "PairDataset":
        """Same pairs with y labels exchanged."""
        return PairDataset(self.x, 1 - self.y, self.x_arity)


@dataclass(frozen=True)
class BiasClassMap:
    class_of_x: Mapping[int, BiasClass]
    a_table: Mapping[BiasClass, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_A_TABLE))
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        missing = [c.value for c in BiasClass if c not in self.a_table]
        if missing:
            raise DomainError(f"a_table has no entry for classes {missing}")
        for c, pair in self.a_table.items():
            if len(pair) != 2 or any(not v >= 0 for v in pair):
                raise DomainError(f"a_table[{BiasClass(c).value}] must be two nonnegative reals, got {pair!r}")

    def class_for(self, x: int) -> BiasClass:
        try:
            return self.class_of_x[x]
        except KeyError:
            raise DomainError(f"x={x} was never observed in the dataset used for classification") from None

    def a_for(self, x: int) -> ParamVector:
        return ParamVector.of(self.a_table[self.class_for(x)])

    def mirrored(self) -> "BiasClassMap":
        """Class map and a_table for the label-swapped dataset."""
        return BiasClassMap(
            {x: c.mirrored() for x, c in self.class_of_x.items()},
            {c.mirrored(): (pair[1], pair[0]) for c, pair in self.a_table.items()},
            self.thresholds,
        )

    def class_counts(self) -> dict[str, int]:
        counts = {c.value: 0 for c in BiasClass}
        for c in self.class_of_x.values():
            counts[c.value] += 1
        return counts

    def to_record(self) -> dict[str, Any]:
        return {
            "thresholds": list(self.thresholds),
            "a_table": {c.value: list(self.a_table[c]) for c in BiasClass},
            "class_counts": self.class_counts(),
        }


def check_thresholds(thresholds: Sequence[float]) -> tuple[float, float]:
    if len(thresholds) != 2:
        raise DomainError(f"thresholds must be (t_moderate, t_heavy), got {thresholds!r}")
    t_moderate, t_heavy = float(thresholds[0]), float(thresholds[1])
    if not 0.5 < t_moderate < t_heavy <= 1.0:
        raise DomainError(f"thresholds must satisfy 0.5 < t_moderate < t_heavy <= 1, got ({t_moderate}, {t_heavy})")
    return t_moderate, t_heavy


def _class_towards_y1(f: float, t_moderate: float, t_heavy: float) -> BiasClass:
    if f >= t_heavy:
        return BiasClass.HEAVY_Y1
    if f >= t_moderate:
        return BiasClass.MODERATE_Y1
    return BiasClass.NEUTRAL


def classify_x(
    full: PairDataset,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    a_table: Mapping[BiasClass, tuple[float, float]] | None = None,
) -> BiasClassMap:
    """Class of every x observed in ``full`` from its empirical fraction of y = 1."""
    t_moderate, t_heavy = check_thresholds(thresholds)
    counts = full.xy_counts()
    totals = counts.sum(axis=1)
    observed = np.nonzero(totals)[0]
    if len(observed) == 0:
        raise DomainError("cannot classify an empty dataset")
    class_of_x = {}
    for x in observed.tolist():
        n0, n1 = int(counts[x, 0]), int(counts[x, 1])
        # the majority label's fraction, so a label swap mirrors every class exactly
        if n1 >= n0:
            class_of_x[x] = _class_towards_y1(n1 / (n0 + n1), t_moderate, t_heavy)
        else:
            class_of_x[x] = _class_towards_y1(n0 / (n0 + n1), t_moderate, t_heavy).mirrored()
    unseen = full.x_arity - len(observed)
    if unseen:
        logger.debug("%d of %d x ids never observed; left unclassified", unseen, full.x_arity)
    return BiasClassMap(class_of_x, dict(a_table or DEFAULT_A_TABLE), (t_moderate, t_heavy))


@dataclass(frozen=True)
class MIEstimate:
    mi_bits: float
    mi_unclipped_bits: float
    h_y_bits: float
    h_y_given_x_bits: float
    h_y_given_x_unclipped_bits: float

    def to_record(self) -> dict[str, Any]:
        return {
            "mi_bits": self.mi_bits,
            "mi_unclipped_bits": self.mi_unclipped_bits,
            "h_y_bits": self.h_y_bits,
            "h_y_given_x_bits": self.h_y_given_x_bits,
            "h_y_given_x_unclipped_bits": self.h_y_given_x_unclipped_bits,
        }


def _per_x_estimates(sub: PairDataset, classes: BiasClassMap) -> tuple[np.ndarray, np.ndarray]:
    """(N_x, per-x estimate in bits) for every x observed in ``sub``."""
    if len(sub) == 0:
        raise DomainError("cannot estimate from an empty dataset")
    counts = sub.xy_counts()
    totals = counts.sum(axis=1)
    observed = np.nonzero(totals)[0]
    n = counts[observed]
    n_x = totals[observed]
    pairs = np.array([classes.a_table[classes.class_for(x)] for x in observed.tolist()], dtype=float).reshape(-1, 2)
    n_max = int(n_x.max())
    distinct = sorted(set(pairs.ravel().tolist()))
    index = {a: k for k, a in enumerate(distinct)}
    tables = np.vstack([n_big_g_table(n_max, a) for a in distinct])
    i0 = np.array([index[a] for a in pairs[:, 0]], dtype=np.intp)
    i1 = np.array([index[a] for a in pairs[:, 1]], dtype=np.intp)
    subtracted = tables[i0, n[:, 0]] + tables[i1, n[:, 1]]
    bad = np.isnan(subtracted)
    if bad.any():
        k = int(np.argmax(bad))
        x = int(observed[k])
        box = 0 if np.isnan(tables[i0[k], n[k, 0]]) else 1
        raise NumericalError(
            f"estimate for x={x} overflows: G_n(a) at n={int(n[k, box])}, a={pairs[k, box]:g} (y={box}); "
            "keep a**n <= O(1) for the rare outcome",
            {"x": x, "n": int(n[k, box]), "a": float(pairs[k, box]), "y": box},
        )
    estimates = (digamma_table(n_max)[n_x] - subtracted / n_x) / LN2
    return n_x, estimates


def _mi_terms(sub: PairDataset, classes: BiasClassMap) -> MIEstimate:
    n_x, estimates = _per_x_estimates(sub, classes)
    weights = n_x / len(sub)
    h_cond_unclipped = math.fsum(weights * estimates)
    h_cond = math.fsum(weights * np.clip(estimates, 0.0, 1.0))
    h_y = schuermann_entropy(CountVector(sub.y_counts()), ParamVector.uniform(1.0, 2)).value_bits
    return MIEstimate(h_y - h_cond, h_y - h_cond_unclipped, h_y, h_cond, h_cond_unclipped)


def conditional_entropy(sub: PairDataset, classes: BiasClassMap, *, clip: bool = True) -> float:
    """
    H(Y|X) in bits as sum_x (N_x/N) * H_opt(y-counts of x; a of its class).

    Per-x estimates are clipped to [0, 1] bit unless ``clip`` is false.
    """
    n_x, estimates = _per_x_estimates(sub, classes)
    if clip:
        estimates = np.clip(estimates, 0.0, 1.0)
    return math.fsum((n_x / len(sub)) * estimates)


def mi_estimate(sub: PairDataset, classes: BiasClassMap, *, clip: bool = True) -> float:
    """I(X:Y) in bits; H(Y) uses a = (1, 1) on the marginal y-counts."""
    terms = _mi_terms(sub, classes)
    return terms.mi_bits if clip else terms.mi_unclipped_bits


def mi_estimate_detail(sub: PairDataset, classes: BiasClassMap) -> MIEstimate:
    return _mi_terms(sub, classes)


@dataclass(frozen=True)
class MICurveRow:
    N: int
    mean_mi_bits: float
    std_error_bits: float
    mean_mi_unclipped_bits: float
    std_error_unclipped_bits: float
    replicates: int

    def to_record(self) -> dict[str, Any]:
        return {
            "N": self.N,
            "mean_mi_bits": self.mean_mi_bits,
            "std_error_bits": self.std_error_bits,
            "mean_mi_unclipped_bits": self.mean_mi_unclipped_bits,
            "std_error_unclipped_bits": self.std_error_unclipped_bits,
            "replicates": self.replicates,
        }


MI_COLUMNS = ["N", "mean_mi_bits", "std_error_bits", "mean_mi_unclipped_bits", "std_error_unclipped_bits", "replicates"]


@dataclass
class MICurve:
    classes: BiasClassMap
    replacement: bool
    rows: list[MICurveRow] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)


def _mean_and_error(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, math.nan
    return mean, float(math.sqrt(np.var(values) / len(values)))


def mi_subsample_curve(
    full: PairDataset,
    N_grid: Sequence[int],
    replicates: int,
    seed: SeedSpec,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    *,
    a_table: Mapping[BiasClass, tuple[float, float]] | None = None,
    replacement: bool = False,
    workers: int = 1,
) -> MICurve:
    """
    Mean MI and its standard error over ``replicates`` random subsamples per N.

    Classes come from the full dataset once. Replicate r of row i subsamples
    with ``seed.derive(i, r)``; a failing row is recorded and the curve continues.
    """
    if not N_grid:
        raise DomainError("N grid is empty")
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if not replacement and max(N_grid) > len(full):
        raise DomainError(f"N grid reaches {max(N_grid)} but the dataset holds {len(full)} pairs")
    classes = classify_x(full, thresholds, a_table)
    curve = MICurve(classes, replacement)
    for i, N in enumerate(N_grid):

        def one(r: int, N: int = N, i: int = i) -> MIEstimate:
            return _mi_terms(subsample_pairs(full, N, seed.derive(i, r), replacement), classes)

        try:
            if workers > 1 and replicates > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(one, range(replicates)))
            else:
                results = [one(r) for r in range(replicates)]
        except BoxEntropyError as exc:
            logger.warning("MI row %d (N=%d) failed: %s", i, N, exc)
            details = dict(getattr(exc, "diagnostics", {}))
            details["N"] = N
            curve.failures.append(Failure(i, str(exc), details))
            continue
        mean, err = _mean_and_error(np.array([m.mi_bits for m in results]))
        mean_u, err_u = _mean_and_error(np.array([m.mi_unclipped_bits for m in results]))
        curve.rows.append(MICurveRow(int(N), mean, err, mean_u, err_u, replicates))
        logger.debug("MI row %d: N=%d mean=%.6f bits", i, N, mean)
    return curve


@dataclass(frozen=True)
class SynthTruth:
    """Generator tables of a synthetic dataset; enough to compute the true MI exactly."""

    profile: str
    size: int
    seed: SeedSpec
    p_x: tuple[float, ...]
    q_x: tuple[float, ...]
    q_values: tuple[float, ...] = DEFAULT_Q_VALUES
    class_weights: tuple[float, ...] = DEFAULT_CLASS_WEIGHTS

    @property
    def x_arity(self) -> int:
        return len(self.p_x)

    @property
    def true_conditional_entropy_bits(self) -> float:
        p = np.asarray(self.p_x)
        q = np.asarray(self.q_x)
        h = (entr(q) + entr(1.0 - q)) / LN2
        return math.fsum(p * h)

    @property
    def true_mi_bits(self) -> float:
        """sum_x p(x) [1 - h(q(x))]; the y marginal is exactly 1/2."""
        return 1.0 - self.true_conditional_entropy_bits

    def to_record(self) -> dict[str, Any]:
        return {
            "profile": self.profile,
            "size": self.size,
            "seed": self.seed.to_record(),
            "x_arity": self.x_arity,
            "q_values": list(self.q_values),
            "class_weights": list(self.class_weights),
            "true_mi_bits": self.true_mi_bits,
            "p_x": list(self.p_x),
            "q_x": list(self.q_x),
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SynthTruth":
        return cls(
            record["profile"],
            int(record["size"]),
            SeedSpec.from_record(record["seed"]),
            tuple(record["p_x"]),
            tuple(record["q_x"]),
            tuple(record.get("q_values", DEFAULT_Q_VALUES)),
            tuple(record.get("class_weights", DEFAULT_CLASS_WEIGHTS)),
        )


def _pair_levels(rng: np.random.Generator, pair_count: int, class_weights: Sequence[float]) -> np.ndarray:
    """Level per x pair: 0 heavy, 1 moderate, 2 neutral, in shuffled order with exact proportions."""
    heavy_y1, moderate_y1, neutral, moderate_y0, heavy_y0 = class_weights
    shares = np.array([heavy_y1 + heavy_y0, moderate_y1 + moderate_y0, neutral], dtype=float)
    shares = shares / shares.sum()
    sizes = np.floor(shares * pair_count).astype(int)
    sizes[2] += pair_count - sizes.sum()
    levels = np.repeat(np.arange(3), sizes)
    rng.shuffle(levels)
    return levels


def synth_dataset(
    profile: str,
    size: int | None,
    seed: SeedSpec,
    *,
    q_values: Sequence[float] = DEFAULT_Q_VALUES,
    class_weights: Sequence[float] = DEFAULT_CLASS_WEIGHTS,
) -> tuple[PairDataset, SynthTruth]:
    """
    Synthetic (x, y) data with known conditionals q(x) = P(y=1 | x).

    x ids come in pairs (2k, 2k+1) with equal weight and mirrored conditionals
    q and 1-q, so P(y=1) = 1/2 exactly. pym_like spreads x uniformly over 4096
    ids; spherical_like uses Zipf-like pair weights over 4000 ids.
    """
    if profile not in DEFAULT_SIZES:
        raise DomainError(f"profile must be one of {sorted(DEFAULT_SIZES)}, got {profile!r}")
    size = DEFAULT_SIZES[profile] if size is None else int(size)
    if size < 1:
        raise DomainError(f"size must be >= 1, got {size}")
    if len(q_values) != 3 or not all(0.0 <= q <= 1.0 for q in q_values):
        raise DomainError(f"q_values must be three probabilities (heavy, moderate, neutral), got {q_values!r}")
    if len(class_weights) != 5 or any(w < 0 for w in class_weights) or sum(class_weights) <= 0:
        raise DomainError(f"class_weights must be five nonnegative weights, got {class_weights!r}")
    if class_weights[0] != class_weights[4] or class_weights[1] != class_weights[3]:
        raise DomainError("class_weights must be symmetric under y label swap to keep P(y=1) = 1/2")

    arity = PYM_LIKE_ARITY if profile == "pym_like" else SPHERICAL_LIKE_ARITY
    pair_count = arity // 2
    levels = _pair_levels(seed.derive(0).generator(), pair_count, class_weights)
    q_pair = np.asarray(q_values, dtype=float)[levels]
    q_x = np.empty(arity)
    q_x[0::2] = q_pair
    q_x[1::2] = 1.0 - q_pair

    if profile == "pym_like":
        pair_weights = np.full(pair_count, 1.0 / pair_count)
    else:
        ranks = seed.derive(3).generator().permutation(pair_count) + 1
        pair_weights = 1.0 / ranks.astype(float) ** SPHERICAL_ZIPF_EXPONENT
        pair_weights /= pair_weights.sum()
    p_x = np.repeat(pair_weights / 2.0, 2)

    x = seed.derive(1).generator().choice(arity, size=size, p=p_x)
    y = (seed.derive(2).generator().random(size) < q_x[x]).astype(np.int8)
    truth = SynthTruth(
        profile, size, seed, tuple(p_x.tolist()), tuple(q_x.tolist()), tuple(q_values), tuple(class_weights)
    )
    logger.info("synthesised %d %s pairs over %d ids (true MI %.6f bits)", size, profile, arity, truth.true_mi_bits)
    return PairDataset(x, y, arity), truth


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def _detect_delimiter(line: str) -> str | None:
    if "," in line:
        return ","
    if "\t" in line:
        return "\t"
    return None


def load_pairs(path: str | Path, x_arity: int | None = None) -> PairDataset:
    """
    Read a two-column (x, y) text file, one pair per line.

    The delimiter (comma, tab or whitespace) is detected from the first data
    line; a first line with no numeric field is taken as a header; ``#`` lines are skipped.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputIOError(f"cannot read dataset {path}: {exc}") from exc
    xs: list[int] = []
    ys: list[int] = []
    delimiter: str | None = None
    first = True
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if first:
            delimiter = _detect_delimiter(line)
        fields = [f.strip() for f in line.split(delimiter)]
        if first:
            first = False
            if not any(_is_number(f) for f in fields):
                continue
        if len(fields) != 2:
            raise DatasetFormatError(str(path), line_number, f"expected 2 fields, got {len(fields)}")
        try:
            x, y = int(fields[0]), int(fields[1])
        except ValueError:
            raise DatasetFormatError(str(path), line_number, f"non-integer field in {line!r}") from None
        if x < 0:
            raise DatasetFormatError(str(path), line_number, f"x id must be >= 0, got {x}")
        if y not in (0, 1):
            raise DatasetFormatError(str(path), line_number, f"y must be 0 or 1, got {y}")
        xs.append(x)
        ys.append(y)
    if not xs:
        raise DatasetFormatError(str(path), 0, "no pairs found")
    arity = max(xs) + 1
    if x_arity is not None:
        if x_arity < arity:
            raise DomainError(f"x_arity {x_arity} is below the largest x id {arity - 1}")
        arity = x_arity
    logger.debug("loaded %d pairs from %s", len(xs), path)
    return PairDataset(np.array(xs), np.array(ys), arity)


def save_pairs(ds: PairDataset, path: str | Path, delimiter: str = "\t") -> None:
    try:
        np.savetxt(
            Path(path),
            np.column_stack([ds.x, ds.y]),
            fmt="%d",
            delimiter=delimiter,
            header=delimiter.join(("x", "y")),
            comments="",
        )
    except OSError as exc:
        raise OutputIOError(f"cannot write dataset {path}: {exc}") from exc


def save_truth(truth: SynthTruth, path: str | Path) -> None:
    try:
        Path(path).write_text(json.dumps(truth.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputIOError(f"cannot write truth record {path}: {exc}") from exc


def load_truth(path: str | Path) -> SynthTruth:
    try:
        record = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputIOError(f"cannot read truth record {path}: {exc}") from exc
    return SynthTruth.from_record(record)
