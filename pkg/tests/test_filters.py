import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwsearch.filters import (
    BloomFilter,
    FilterConfig,
    IdealFilter,
    bloom_params_for,
    filter_from_text,
    make_filter,
)


def test_bloom_params():
    assert bloom_params_for(150, 0.01) == (1438, 7)
    assert bloom_params_for(1, 0.5)[1] >= 1
    m, h = bloom_params_for(100, 0.999)
    assert h == 1 and m <= 2
    for bad in ((10, 0.0), (10, 1.0), (0, 0.1)):
        with pytest.raises(ValueError):
            bloom_params_for(*bad)


def test_ideal_basics():
    f = IdealFilter(0.0, rng=np.random.default_rng(0))
    f.insert(5)
    assert f.query(5) and 5 in f
    assert not f.query(6)
    g = IdealFilter(1.0, rng=np.random.default_rng(0))
    assert g.query(123)


def test_ideal_fp_rate():
    f = IdealFilter(0.1, items=range(100), rng=np.random.default_rng(1))
    hits = sum(f.query(10**6 + i) for i in range(100_000))
    assert abs(hits / 100_000 - 0.1) <= 0.005


def test_ideal_reproducible():
    a = IdealFilter(0.3, rng=np.random.default_rng(4))
    b = IdealFilter(0.3, rng=np.random.default_rng(4))
    assert [a.query(i) for i in range(200)] == [b.query(i) for i in range(200)]


def test_ideal_memoized_is_fixed_per_resource():
    f = IdealFilter(0.5, memo_key=77)
    first = [f.query(i) for i in range(500)]
    assert first == [f.query(i) for i in range(500)]
    assert 0.4 < np.mean(first) < 0.6


def test_bloom_empty_and_fp_rate():
    rng = np.random.default_rng(2)
    bf = BloomFilter.for_capacity(150, 0.01, seed=3)
    assert not any(bf.query(int(x)) for x in rng.integers(0, 2**40, 1000))
    items = rng.choice(10**6, size=150, replace=False)
    for x in items:
        bf.insert(int(x))
    probes = rng.integers(10**6, 2**40, size=100_000)
    fp = sum(bf.query(int(x)) for x in probes) / len(probes)
    assert fp <= 0.015
    assert 0 < bf.fill_ratio() < 1


def test_text_roundtrip():
    bf = BloomFilter.for_capacity(20, 0.05, seed=9)
    for x in (1, 2, 30):
        bf.insert(x)
    bf2 = filter_from_text(bf.to_text())
    assert np.array_equal(bf2.bits, bf.bits) and bf2.query(30)
    f = IdealFilter(0.25, items=[3, 1])
    assert f.to_text() == "ideal 0.25 1 3"
    assert filter_from_text(f.to_text()).items == {1, 3}


def test_config_validation_and_factory():
    with pytest.raises(ValueError):
        FilterConfig(mode="cuckoo")
    with pytest.raises(ValueError):
        FilterConfig(mode="bloom", p=0.0)
    assert isinstance(make_filter(FilterConfig("bloom", 0.01), 10), BloomFilter)
    assert make_filter(FilterConfig("ideal", 0.2, memoize=True), 10, memo_key=3).memo_key == 3


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(0, 2**62), min_size=1, max_size=300),
    st.floats(0.001, 0.5),
    st.integers(0, 2**32),
)
def test_no_false_negatives(items, p, seed):
    bf = BloomFilter.for_capacity(max(1, len(items) // 2), p, seed=seed)
    idf = IdealFilter(p, rng=np.random.default_rng(seed))
    for x in items:
        bf.insert(x)
        idf.insert(x)
    assert all(bf.query(x) and idf.query(x) for x in items)
