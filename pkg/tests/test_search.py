import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwsearch import model
from pwsearch.filters import FilterConfig
from pwsearch.graph import from_degree_sequence, generate_regular
from pwsearch.search import (
    Mechanism,
    MechanismMismatch,
    Placement,
    decompose_lengths,
    decompose_total_walk,
    draw_placements,
    pw_search,
    run_searches,
    rw_search,
    search_cost,
)
from pwsearch.walker import FreshWalks, precompute_walk_tables


@pytest.fixture(scope="module")
def small():
    return generate_regular(500, 6, seed=2)


def fresh(mech, s, w=2, p=0.0, **kw):
    m = Mechanism.from_name(mech)
    return FreshWalks(s, w, m.kind, m.registration_range, FilterConfig("ideal", p, **kw))


def table(net, mech, s, w, p=0.0, seed=1, **kw):
    m = Mechanism.from_name(mech)
    return precompute_walk_tables(net, w, s, m.kind, m.registration_range, FilterConfig(p=p, **kw), seed)


def test_mechanism_names():
    m = Mechanism.from_name("kf-saw")
    assert (m.policy, m.kind, m.registration_range, m.name) == ("check", "saw", "last", "kf-saw")
    assert Mechanism.from_name("cf-rw").registration_range == "first"
    with pytest.raises(ValueError):
        Mechanism.from_name("xx-rw")


def test_rw_search_trivial_cases(small):
    rng = np.random.default_rng(0)
    assert rw_search(small, Placement(3, 3), rng).length == 0
    two = from_degree_sequence([1, 1])
    assert all(rw_search(two, Placement(1, 0), rng).length == 1 for _ in range(20))
    out = rw_search(small, Placement(0, 1), rng, hop_cutoff=1)
    assert out.status in ("found", "unfinished")
    with pytest.raises(ValueError):
        rw_search(small, Placement(0, 1), rng, hop_cutoff=0)


def test_rw_search_record(small):
    out, walk = rw_search(small, Placement(9, 4), np.random.default_rng(3), record=True)
    assert walk[0] == 4 and walk[-1] == 9 and len(walk) == out.length + 1
    assert 9 not in walk[:-1]


def test_source_holds_resource(small):
    rng = np.random.default_rng(0)
    for mech in ("cf-rw", "cf-saw", "kf-rw", "kf-saw"):
        o = pw_search(small, fresh(mech, 20), mech, Placement(5, 5), rng)
        assert o.found and o.length == 0 and o.trailing == 0


def test_mismatch(small):
    with pytest.raises(MechanismMismatch):
        pw_search(small, fresh("cf-rw", 10), "kf-rw", Placement(1, 2), np.random.default_rng(0))
    with pytest.raises(MechanismMismatch):
        pw_search(small, table(small, "cf-saw", 10, 2), "cf-rw", Placement(1, 2), np.random.default_rng(0))


@pytest.mark.parametrize("mech", ["cf-rw", "cf-saw", "kf-rw", "kf-saw"])
@pytest.mark.parametrize("mode", ["fresh", "reuse"])
def test_outcome_invariants(small, mech, mode):
    s = 25
    walks = fresh(mech, s, 3, 0.2) if mode == "fresh" else table(small, mech, s, 3, 0.2)
    o = run_searches(small, mech, 400, 3, walks)
    f = o.found
    assert f.mean() > 0.9
    assert np.all(o.length[f] == o.jumps[f] + o.unnecessary[f] + o.trailing[f])
    assert np.all(o.unnecessary % s == 0)
    T = o.trailing[f]
    if mech.startswith("cf"):
        assert T.min() >= 0 and T.max() <= s - 1
    else:
        zero = T == 0
        assert np.all(o.sources[f][zero] == o.resources[f][zero])
        assert T.max() <= s


@pytest.mark.parametrize("mech", ["cf-rw", "kf-rw", "kf-saw"])
def test_no_unnecessary_steps_at_p0(small, mech):
    o = run_searches(small, mech, 300, 4, fresh(mech, 30, 3, 0.0))
    assert np.all(o.unnecessary == 0)


@pytest.mark.parametrize("mode", ["fresh", "reuse"])
def test_check_first_all_negative_round_is_one_jump(small, mode):
    # at p=0 every decision before the last one sees only negatives, so each is one jump
    walks = fresh("kf-rw", 15, 3) if mode == "fresh" else table(small, "kf-rw", 15, 3)
    o = run_searches(small, "kf-rw", 300, 8, walks)
    f = o.found
    assert np.all(o.jumps[f] == o.partial_walks[f])
    assert np.all(o.length[f] == o.jumps[f] + o.trailing[f])


def test_fresh_choose_first_follows_baseline_walks(small):
    base = run_searches(small, "rw", 300, 11)
    o = run_searches(small, "cf-rw", 300, 11, fresh("cf-rw", 17, 2, 0.3))
    assert np.array_equal(o.total_length, base.length)


def test_reuse_w1_loops_are_unfinished(small):
    o = run_searches(small, "cf-rw", 300, 2, table(small, "cf-rw", 20, 1))
    assert 0 < o.unfinished_fraction < 1
    assert np.all(o.length[~o.found] >= 0)


def test_reuse_memoized_is_deterministic(small):
    t = table(small, "cf-rw", 20, 2, p=0.3, memoize=True)
    a = run_searches(small, "cf-rw", 200, 5, t)
    b = run_searches(small, "cf-rw", 200, 5, t)
    assert np.array_equal(a.length, b.length)
    assert a.unnecessary.sum() > 0


def test_bloom_reuse(small):
    m = Mechanism.from_name("kf-saw")
    t = precompute_walk_tables(small, 2, 20, m.kind, m.registration_range, FilterConfig("bloom", 0.05, seed=3), 9)
    o = run_searches(small, "kf-saw", 300, 6, t)
    f = o.found
    assert np.all(o.length[f] == o.jumps[f] + o.unnecessary[f] + o.trailing[f])


def test_decompose_examples():
    walk = list(range(11))
    rng = np.random.default_rng(0)
    o = decompose_total_walk(walk, 3, 0.0, 10, rng)
    assert (o.jumps, o.unnecessary, o.trailing, o.length) == (3, 0, 1, 4)
    o = decompose_total_walk(walk, 3, 1.0, 10, rng)
    assert (o.jumps, o.unnecessary, o.trailing, o.length) == (0, 9, 1, 10)
    with pytest.raises(ValueError):
        decompose_total_walk(walk, 3, 0.0, 99, rng)


def test_decompose_ensemble_s50(sims):
    base = sims.get("rw")
    o = decompose_lengths(base.length, 50, 0.0, np.random.default_rng(0))
    assert abs(o.mean() - 248.9) / 248.9 <= 0.03


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 5000), st.integers(1, 200), st.floats(0, 1), st.integers(0, 2**32))
def test_decompose_identity(L, s, p, seed):
    o = decompose_lengths([L], s, p, np.random.default_rng(seed))
    assert o.length[0] == o.jumps[0] + o.unnecessary[0] + o.trailing[0]
    assert o.partial_walks[0] == L // s and o.trailing[0] == L % s


def test_search_cost():
    assert search_cost(149, 2, 100, 150) == pytest.approx(153.02)
    assert search_cost(149, 2, 1e12, 150) == pytest.approx(150)
    with pytest.raises(ValueError):
        search_cost(149, 2, 0.5, 150)


def test_placements_prefix_consistent():
    a = draw_placements(100, 50, 3)
    b = draw_placements(100, 80, 3)
    assert np.array_equal(a[0], b[0][:50]) and np.array_equal(a[1], b[1][:50])
    assert a[0].min() >= 0 and a[0].max() < 100


def test_fresh_s150_matches_reference(sims):
    o = sims.get("cf-rw", s=150, p=0.0)
    assert abs(o.mean() - 149.0) / 149.0 <= 0.03


def test_check_first_close_to_model(sims, regular10k):
    from pwsearch.graph import degree_stats
    st_ = degree_stats(regular10k)
    sim = sims.get("kf-rw", s=50, w=5, p=0.01).mean()
    pred = model.unified_length(st_, 50, 5, 0.01, "rw", "check")
    assert abs(sim - pred) / pred <= 0.04
