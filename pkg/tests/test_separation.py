import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_lab import config
from conformal_lab.errors import BudgetExceeded, DegenerateCommonFixedPoint, ExactOverlapDetected
from conformal_lab.expr import sup_norm_diff
from conformal_lab.ifs import WordMap, validate_ifs
from conformal_lab.separation import (
    all_words,
    features,
    min_pairwise_distance,
    separation_profile,
)

from conftest import Q_MAPS

CORPUS = [
    Q_MAPS,
    ("x/(2+x)", "x/3 + 2/3"),
    ("0.4*x", "0.4*x + 0.6", "0.1*x + 0.45"),
    ("(x+1)/(x+3)", "x/4"),
]


def test_examples(c3, oracle):
    enc, u, v = min_pairwise_distance(c3, 2, 1e-12)
    assert enc.contains(2 / 9) and enc.width <= 1e-12
    assert (u, v) in {((0, 0), (0, 1)), ((1, 0), (1, 1))}
    enc, u, v = min_pairwise_distance(c3, 6, 1e-12)
    assert enc.contains(oracle["c3_min_distance"]["6"])
    assert enc.width <= 1e-12
    with pytest.warns(DegenerateCommonFixedPoint):
        doubled = validate_ifs(["x/2", "x/2"])
    with pytest.raises(ExactOverlapDetected) as info:
        min_pairwise_distance(doubled, 1)
    assert info.value.n == 1
    assert info.value.witness == ((0,), (1,))


def test_c3_exact_distances(c3, oracle):
    for n in range(1, 7):
        enc, _, _ = min_pairwise_distance(c3, n, 1e-12)
        assert enc.contains(oracle["c3_min_distance"][str(n)])


@pytest.mark.parametrize("maps", CORPUS)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_pruned_matches_brute_force(maps, n):
    ifs = validate_ifs(maps)
    if ifs.alphabet_size ** n > 30:
        pytest.skip("brute force too large")
    fast = min_pairwise_distance(ifs, n, 1e-9)
    slow = min_pairwise_distance(ifs, n, 1e-9, brute_force=True)
    assert fast == slow


def test_q_brute_force_n4(q):
    assert min_pairwise_distance(q, 4) == min_pairwise_distance(q, 4, brute_force=True)


def test_threads_do_not_change_result(q):
    with config.settings(threads=1):
        a = min_pairwise_distance(q, 8)
    with config.settings(threads=4):
        b = min_pairwise_distance(q, 8)
    assert a == b


@pytest.mark.parametrize("maps", CORPUS)
def test_grid_lower_bound_never_exceeds_sup(maps):
    ifs = validate_ifs(maps)
    words = all_words(ifs.alphabet_size, 3)
    F = features(ifs, words)
    rng = np.random.default_rng(0)
    for _ in range(20):
        i, j = rng.choice(len(words), 2, replace=False)
        enc = sup_norm_diff(WordMap(ifs, words[i]), WordMap(ifs, words[j]), 1e-9)
        assert np.max(np.abs(F[i] - F[j])) <= enc.hi


@pytest.mark.parametrize("maps", CORPUS)
def test_monotone_budget(maps):
    ifs = validate_ifs(maps)
    prof = separation_profile(ifs, 5)
    for a, b in zip(prof.rows, prof.rows[1:]):
        assert b.enclosure.lo <= a.enclosure.hi * ifs.rho_max + 2e-12


def test_profile_rates(c3, half_pair):
    prof = separation_profile(c3, 6)
    rates = [r.rate for r in prof.rows]
    assert all(b < a for a, b in zip(rates, rates[1:]))
    assert all(r > 1 / 3 for r in rates)
    for r in prof.rows:
        assert r.rate == pytest.approx((2 * 3.0 ** -r.n) ** (1 / r.n), rel=1e-9)
    half = separation_profile(half_pair, 6)
    for r in half.rows:
        assert r.enclosure.contains(2.0 ** -r.n)
        assert r.rate == pytest.approx(0.5, rel=1e-9)


def test_profile_flags_overlap():
    with pytest.warns(DegenerateCommonFixedPoint):
        doubled = validate_ifs(["x/2", "x/2"])
    prof = separation_profile(doubled, 4)
    assert len(prof.rows) == 1 and prof.rows[0].flagged
    assert prof.collided
    table = prof.table()
    assert table[0]["exact_overlap"] is True
    # distinct letters, but phi_1 phi_0 = phi_2 phi_1 = x/16 + 1/4
    late = validate_ifs(["x/4", "x/4 + 1/4", "x/4 + 3/16"])
    prof = separation_profile(late, 3)
    assert [r.flagged for r in prof.rows] == [False, True]
    assert prof.rows[1].witness == ((1, 0), (2, 1))


def test_witnesses_are_distinct_words(q):
    prof = separation_profile(q, 6)
    for r in prof.rows:
        u, v = r.witness
        assert u != v and len(u) == len(v) == r.n
        assert r.enclosure.lo > 0


def test_budget(q):
    with pytest.raises(BudgetExceeded):
        min_pairwise_distance(q, 12, budget=1000)
    with pytest.raises(ValueError):
        min_pairwise_distance(q, 0)


@settings(max_examples=15)
@given(st.lists(st.floats(0.05, 0.28), min_size=2, max_size=3), st.integers(1, 3),
       st.floats(0.0, 0.3))
def test_soundness_random_systems(ratios, n, bend):
    maps = []
    offset = 0.0
    for r in ratios:
        maps.append(f"{r}*x + {bend * r}*x*(1-x) + {offset}")
        offset += r * 1.1 + 0.02
    ifs = validate_ifs(maps)
    if ifs.alphabet_size ** n > 27:
        n = 2
    fast = min_pairwise_distance(ifs, n)
    slow = min_pairwise_distance(ifs, n, brute_force=True)
    assert fast == slow
    assert fast[0].width <= 1e-9
