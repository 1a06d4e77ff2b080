"""Demonstration pool construction and k-shot sampling.

Five pool types, filtered from a demonstration set by target-to-source
length ratio r:

  Random     every sample, corpus order
  Isometric  r in [0.90, 1.10], corpus order
  Same       the n_cap samples with smallest |r - 1.0|
  Short      r in [0, 1.0], corpus order
  Tiny       the n_cap samples with smallest r

Boundary ties for Same/Tiny are broken by ascending sample id so pool
membership is reproducible across runs and platforms.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import DatasetStats, ParallelSample, is_compliant, ratio_stats
from .errors import EmptyPool, PoolTooSmall

DEFAULT_POOL_CAP = 50


class PoolType(Enum):
    RANDOM = "Random"
    ISOMETRIC = "Isometric"
    SAME = "Same"
    SHORT = "Short"
    TINY = "Tiny"

    @classmethod
    def parse(cls, name: str) -> "PoolType":
        for pt in cls:
            if pt.value.lower() == name.strip().lower():
                return pt
        raise ValueError(f"unknown pool type {name!r}; "
                         f"expected one of {[p.value for p in cls]}")


@dataclass(frozen=True)
class DemonstrationPool:
    pool_type: PoolType
    members: tuple[int, ...]  # sample ids, selection order
    stats: DatasetStats

    @property
    def size(self) -> int:
        return len(self.members)


def build_pool(samples: Sequence[ParallelSample],
               pool_type: PoolType,
               n_cap: int = DEFAULT_POOL_CAP) -> DemonstrationPool:
    """Construct one demonstration pool from the full sample list.

    Random/Isometric/Short keep corpus order; Same/Tiny are ordered by
    their selection key (then id) and capped at min(n_cap, corpus size).
    Raises EmptyPool when the filter admits nothing.
    """
    if pool_type is PoolType.RANDOM:
        picked = list(samples)
    elif pool_type is PoolType.ISOMETRIC:
        picked = [s for s in samples if is_compliant(s.ratio)]
    elif pool_type is PoolType.SHORT:
        picked = [s for s in samples if s.ratio <= 1.0]
    elif pool_type is PoolType.SAME:
        picked = sorted(samples, key=lambda s: (abs(s.ratio - 1.0), s.id))
        picked = picked[:n_cap]
    elif pool_type is PoolType.TINY:
        picked = sorted(samples, key=lambda s: (s.ratio, s.id))
        picked = picked[:n_cap]
    else:  # pragma: no cover - closed enum
        raise ValueError(pool_type)
    if not picked:
        raise EmptyPool(f"{pool_type.value} pool is empty")
    return DemonstrationPool(
        pool_type,
        tuple(s.id for s in picked),
        ratio_stats([s.ratio for s in picked]),
    )


def build_all_pools(samples: Sequence[ParallelSample],
                    n_cap: int = DEFAULT_POOL_CAP
                    ) -> dict[PoolType, DemonstrationPool]:
    return {pt: build_pool(samples, pt, n_cap) for pt in PoolType}


def _derive_seed(seed: int, pool_type: PoolType, k: int,
                 run_index: int) -> int:
    # one independent stream per (seed, pool, k, run); the model is
    # deliberately absent so prompts are shared across models in a cell
    key = f"{seed}|{pool_type.value}|{k}|{run_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def sample_shots(pool: DemonstrationPool, k: int, run_index: int,
                 seed: int) -> list[int]:
    """Draw k member ids uniformly without replacement.

    Deterministic for a fixed (seed, pool_type, k, run_index) tuple; the
    returned order is the sampled order.
    """
    if k > pool.size:
        raise PoolTooSmall(k, pool.size)
    rng = random.Random(_derive_seed(seed, pool.pool_type, k, run_index))
    return rng.sample(pool.members, k)
