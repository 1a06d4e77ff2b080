import random
from collections import Counter

import pytest

from isoforge.corpus import make_sample
from isoforge.errors import EmptyPool, PoolTooSmall
from isoforge.pools import (DEFAULT_POOL_CAP, PoolType, build_all_pools,
                            build_pool, sample_shots)
from conftest import filler


def synth(n, seed=0):
    """Random corpus with ratios spread across and beyond the band."""
    rng = random.Random(seed)
    samples = []
    for i in range(n):
        src_len = rng.randint(15, 80)
        tgt_len = rng.randint(5, 120)
        samples.append(make_sample(i, filler(src_len, f"s{i} "),
                                   filler(tgt_len, f"t{i} ")))
    return samples


def brute_force(samples, pool_type, n_cap):
    """Independent filter/sort reimplementation of the pool rules."""
    if pool_type is PoolType.RANDOM:
        return [s.id for s in samples]
    if pool_type is PoolType.ISOMETRIC:
        return [s.id for s in samples if 0.90 <= s.ratio <= 1.10]
    if pool_type is PoolType.SHORT:
        return [s.id for s in samples if s.ratio <= 1.0]
    if pool_type is PoolType.SAME:
        ranked = sorted(samples, key=lambda s: (abs(s.ratio - 1.0), s.id))
        return [s.id for s in ranked[:n_cap]]
    ranked = sorted(samples, key=lambda s: (s.ratio, s.id))
    return [s.id for s in ranked[:n_cap]]


@pytest.mark.parametrize("pool_type", list(PoolType))
def test_build_pool_matches_brute_force(pool_type):
    samples = synth(200, seed=3)
    pool = build_pool(samples, pool_type, 50)
    assert list(pool.members) == brute_force(samples, pool_type, 50)


def test_corpus_order_preserved_for_filter_pools():
    samples = synth(120, seed=5)
    for pt in (PoolType.RANDOM, PoolType.ISOMETRIC, PoolType.SHORT):
        members = build_pool(samples, pt, 50).members
        assert list(members) == sorted(members)


def test_tie_break_by_ascending_id():
    # 0.5 and 1.5 are dyadic, so the |ratio - 1| = 0.5 ties are exact
    samples = [
        make_sample(0, filler(20), filler(30)),   # 1.50
        make_sample(1, filler(20), filler(10)),   # 0.50
        make_sample(2, filler(40), filler(20)),   # 0.50
        make_sample(3, filler(20), filler(10)),   # 0.50
        make_sample(4, filler(20), filler(20)),   # 1.00
    ]
    same = build_pool(samples, PoolType.SAME, 3)
    assert list(same.members) == [4, 0, 1]
    tiny = build_pool(samples, PoolType.TINY, 3)
    assert list(tiny.members) == [1, 2, 3]


def test_caps_apply_only_to_ranked_pools():
    samples = synth(200, seed=1)
    pools = build_all_pools(samples, n_cap=50)
    assert pools[PoolType.RANDOM].size == 200
    assert pools[PoolType.SAME].size == 50
    assert pools[PoolType.TINY].size == 50
    assert pools[PoolType.ISOMETRIC].size == sum(
        1 for s in samples if 0.90 <= s.ratio <= 1.10)


def test_default_cap_is_50():
    assert DEFAULT_POOL_CAP == 50


def test_empty_pool_raises():
    # every ratio far above the band: Isometric and Short are empty
    samples = [make_sample(i, filler(20), filler(40)) for i in range(5)]
    with pytest.raises(EmptyPool):
        build_pool(samples, PoolType.ISOMETRIC, 50)
    with pytest.raises(EmptyPool):
        build_pool(samples, PoolType.SHORT, 50)


def test_pool_type_parse():
    assert PoolType.parse("random") is PoolType.RANDOM
    assert PoolType.parse("Tiny") is PoolType.TINY
    with pytest.raises(ValueError):
        PoolType.parse("huge")


def test_sample_shots_deterministic_and_run_sensitive():
    pool = build_pool(synth(80, seed=2), PoolType.RANDOM, 50)
    a = sample_shots(pool, 5, run_index=0, seed=11)
    b = sample_shots(pool, 5, run_index=0, seed=11)
    c = sample_shots(pool, 5, run_index=1, seed=11)
    d = sample_shots(pool, 5, run_index=0, seed=12)
    assert a == b
    assert a != c
    assert a != d
    assert len(set(a)) == 5
    assert set(a) <= set(pool.members)


def test_sample_shots_too_small():
    pool = build_pool(synth(4, seed=9), PoolType.RANDOM, 50)
    with pytest.raises(PoolTooSmall):
        sample_shots(pool, 5, run_index=0, seed=1)


def test_sample_shots_uniform_coverage():
    # every member should appear in roughly k/n of 10,000 draws
    samples = synth(20, seed=4)
    pool = build_pool(samples, PoolType.RANDOM, 50)
    counts = Counter()
    draws = 10_000
    for run in range(draws):
        counts.update(sample_shots(pool, 4, run_index=run, seed=99))
    expected = draws * 4 / 20
    for member in pool.members:
        assert abs(counts[member] - expected) < expected * 0.15
