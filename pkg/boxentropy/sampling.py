"""
Seeded, reproducible random generation.

Every stream is a numpy ``Generator`` over PCG64 seeded by
``SeedSequence(master_seed, spawn_key=(stream_index, *path))``, so distinct
(master_seed, stream_index, path) triples give independent streams and a
replicate block always sees the same numbers regardless of thread count.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from boxentropy.errors import DomainError
from boxentropy.estimators import CountVector

if TYPE_CHECKING:
    from boxentropy.exact_oracle import Distribution
    from boxentropy.mi import PairDataset

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 65_536
_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if isinstance(self.master_seed, bool) or not 0 <= int(self.master_seed) <= _UINT64_MAX:
            raise DomainError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")
        if int(self.stream_index) < 0:
            raise DomainError(f"stream_index must be >= 0, got {self.stream_index!r}")
        if any(int(k) < 0 for k in self.path):
            raise DomainError(f"seed path entries must be >= 0, got {self.path!r}")
        object.__setattr__(self, "path", tuple(int(k) for k in self.path))

    def derive(self, *index: int) -> "SeedSpec":
        """Child stream for a row, replicate or block index."""
        return dataclasses.replace(self, path=self.path + tuple(index))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index), *self.path))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"master_seed": int(self.master_seed), "stream_index": int(self.stream_index)}
        if self.path:
            record["path"] = list(self.path)
        return record

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SeedSpec":
        return cls(int(record["master_seed"]), int(record.get("stream_index", 0)), tuple(record.get("path", ())))


def _conditional_binomials(rng: np.random.Generator, total: int, p: np.ndarray, size: int) -> np.ndarray:
    """Multinomial draws as a chain of binomials n_i ~ Bin(remaining, p_i / mass_left)."""
    box_count = len(p)
    counts = np.zeros((size, box_count), dtype=np.int64)
    remaining = np.full(size, total, dtype=np.int64)
    mass_left = np.cumsum(p[::-1])[::-1]
    for i in range(box_count - 1):
        if mass_left[i] <= 0.0:
            break
        q = min(1.0, p[i] / mass_left[i])
        draw = rng.binomial(remaining, q)
        counts[:, i] = draw
        remaining -= draw
    counts[:, box_count - 1] += remaining
    return counts


def sample_counts(d: "Distribution", N: int, seed: SeedSpec) -> CountVector:
    """One multinomial(N, p) count vector, deterministic given ``seed``."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    row = _conditional_binomials(seed.generator(), int(N), np.asarray(d.p), 1)[0]
    return CountVector(tuple(int(n) for n in row))


def block_sizes(replicates: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[int]:
    """Sizes of the replicate blocks: full blocks followed by one remainder block."""
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if block_size < 1:
        raise DomainError(f"block_size must be >= 1, got {block_size}")
    return [min(block_size, replicates - start) for start in range(0, replicates, block_size)]


def sample_count_block(d: "Distribution", N: int, seed: SeedSpec, block: int, size: int) -> np.ndarray:
    """Block ``block`` of a replicate stream: ``size`` count vectors drawn from ``seed.derive(block)``."""
    return _conditional_binomials(seed.derive(block).generator(), int(N), np.asarray(d.p), size)


def sample_count_matrix(
    d: "Distribution",
    N: int,
    replicates: int,
    seed: SeedSpec,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> np.ndarray:
    """
    ``replicates`` multinomial count vectors as an (R, M) int64 array.

    Blocks may be drawn on a thread pool but are concatenated in block order.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    sizes = block_sizes(replicates, block_size)

    def draw(k: int) -> np.ndarray:
        return sample_count_block(d, N, seed, k, sizes[k])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(draw, range(len(sizes))))
    else:
        blocks = [draw(k) for k in range(len(sizes))]
    logger.debug("drew %d count vectors in %d blocks (N=%d, M=%d)", replicates, len(sizes), N, d.box_count)
    return np.concatenate(blocks, axis=0)


def subsample_pairs(ds: "PairDataset", N: int, seed: SeedSpec, replacement: bool = False) -> "PairDataset":
    """Uniformly random subsample of exactly N pairs."""
    size = len(ds)
    if N < 1:
        raise DomainError(f"subsample size must be >= 1, got {N}")
    if not replacement and N > size:
        raise DomainError(f"cannot draw {N} pairs without replacement from a dataset of {size}")
    rng = seed.generator()
    index = rng.choice(size, size=int(N), replace=replacement)
    return dataclasses.replace(ds, x=ds.x[index], y=ds.y[index])
