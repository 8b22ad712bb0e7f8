import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conformal_lab.errors import (
    BasePointMismatch,
    BudgetExceeded,
    DivisionNearZero,
    ExprSyntaxError,
    UnknownIdentifier,
)
from conformal_lab.expr import (
    Add,
    Const,
    Div,
    Jet,
    Var,
    compose_jets,
    derivative_enclosure,
    eval_jet,
    evaluate,
    parse,
    range_enclosure,
    sup_norm_diff,
)
from conformal_lab.interval import Interval

from conftest import CORPUS
from oracle import taylor_reference, to_mp


def test_parse_trees():
    assert parse("x/3").root == Div(Var("x"), Const(3.0))
    assert parse("x/(2+x)").root == Div(Var("x"), Add(Const(2.0), Var("x")))
    e = parse("0.1*x^2 + 0.3*x + 0.05")
    assert eval_jet(e, 0.0, 3).coeffs == pytest.approx((0.05, 0.3, 0.1, 0.0))


@pytest.mark.parametrize("text", CORPUS)
def test_pretty_print_round_trip(text):
    e = parse(text)
    again = parse(str(e))
    assert again == e
    assert parse(str(again)) == again


@pytest.mark.parametrize("text, offset", [("x +", 3), ("(x", 2), ("x ** 2", 3), ("", 0),
                                          ("2^x", 2), ("x @ 1", 2)])
def test_syntax_errors_carry_byte_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset


def test_offset_counts_bytes_not_characters():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + é")
    assert info.value.offset == 4
    with pytest.raises(ExprSyntaxError) as info:
        parse("éé +")
    assert info.value.offset == 0


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse("y/3")
    with pytest.raises(UnknownIdentifier):
        parse("sin(x)")


def test_eval_examples():
    assert evaluate(parse("x/3"), 0.9) == pytest.approx(0.3, abs=1e-16)
    assert evaluate(parse("x/(2+x)"), 1.0) == pytest.approx(1 / 3, abs=1e-16)
    assert evaluate(parse("0.1*x^2+0.3*x+0.05"), 1.0) == pytest.approx(0.45, abs=1e-16)


def test_eval_vectorized_matches_scalar():
    e = parse("(x+1)/(x+3)")
    xs = np.linspace(0, 1, 11)
    assert np.array_equal(evaluate(e, xs), [evaluate(e, float(x)) for x in xs])


def test_division_near_zero():
    with pytest.raises(DivisionNearZero):
        evaluate(parse("1/(x-0.5)"), 0.5)
    with pytest.raises(DivisionNearZero):
        eval_jet(parse("1/x"), 0.0, 2)


def test_jet_examples():
    assert eval_jet(parse("x^2"), 1.0, 2).coeffs == (1.0, 2.0, 1.0)
    assert eval_jet(parse("x/(2+x)"), 0.0, 2).coeffs == (0.0, 0.5, -0.25)
    for a in (0.0, 0.3, 1.0):
        c = eval_jet(parse("x/3"), a, 1).coeffs
        assert c == pytest.approx((a / 3, 1 / 3), abs=1e-17)


def test_jet_invariants():
    j = eval_jet(parse("x/(2+x)"), 0.5, 5)
    assert len(j.coeffs) == j.order + 1 == 6
    with pytest.raises(ValueError):
        Jet(0.0, (1.0, math.inf))
    with pytest.raises(ValueError):
        eval_jet(parse("x"), 0.0, 33)


def test_compose_examples():
    sq = eval_jet(parse("x^2"), 1.0, 2)
    assert compose_jets(sq, sq).coeffs == (1.0, 4.0, 6.0)
    j = eval_jet(parse("x/(2+x)"), 0.4, 4)
    assert compose_jets(Jet.identity(j.value, 4), j).coeffs == pytest.approx(j.coeffs, rel=1e-15)
    c = compose_jets(eval_jet(parse("x/3"), 1 / 3, 1), eval_jet(parse("x/3"), 1.0, 1))
    assert c.coeffs == pytest.approx((1 / 9, 1 / 9), rel=1e-15)
    assert c.base_point == 1.0


def test_compose_base_point_mismatch():
    with pytest.raises(BasePointMismatch):
        compose_jets(eval_jet(parse("x"), 0.5, 2), eval_jet(parse("x/3"), 0.0, 2))
    with pytest.raises(BasePointMismatch):
        compose_jets(eval_jet(parse("x"), 0.0, 3), eval_jet(parse("x/3"), 0.0, 2))


@pytest.mark.parametrize("text", CORPUS)
@pytest.mark.parametrize("a", [0.0, 0.25, 0.5, 1.0])
def test_jet_matches_finite_differences(text, a):
    e = parse(text)
    c = eval_jet(e, a, 4).coeffs
    h = 1e-5
    f = lambda x: evaluate(e, x)  # noqa: E731
    d1 = (f(a + h) - f(a - h)) / (2 * h)
    d2 = (f(a + h) - 2 * f(a) + f(a - h)) / (h * h) / 2
    assert abs(c[1] - d1) <= 1e-6 * max(abs(d1), 1.0)
    assert abs(c[2] - d2) <= 1e-4 * max(abs(d2), 1.0)


@pytest.mark.parametrize("text", CORPUS)
def test_jet_matches_high_precision_oracle(text):
    for a in (0.0, 0.37, 1.0):
        ref = taylor_reference(text, a, 4)
        got = eval_jet(parse(text), a, 4).coeffs
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("text", CORPUS)
def test_composition_homomorphism(text):
    # jet of f∘f evaluated near a agrees with f(f(x)) up to the remainder term
    e = parse(text)
    if not 0.0 <= evaluate(e, 0.5) <= 1.0:
        pytest.skip("not a self-map")
    a, k = 0.5, 6
    inner = eval_jet(e, a, k)
    comp = compose_jets(eval_jet(e, inner.value, k), inner)
    ff = to_mp(text)
    for x in np.linspace(a - 0.05, a + 0.05, 11):
        exact = float(ff(ff(x)))
        assert abs(comp(x) - exact) <= 50 * 0.05 ** (k + 1) + 1e-14


# random trees in x with denominators bounded away from 0 on [-0.1, 1.1]
_leaf = st.one_of(st.just("x"), st.integers(1, 9).map(lambda n: f"{n / 4}"))


def _extend(children):
    safe_den = children.map(lambda c: f"(2 + ({c})^2)")
    return st.one_of(
        st.tuples(children, children).map(lambda p: f"({p[0]} + {p[1]})"),
        st.tuples(children, children).map(lambda p: f"({p[0]} - {p[1]})"),
        st.tuples(children, children).map(lambda p: f"({p[0]} * {p[1]})"),
        st.tuples(children, safe_den).map(lambda p: f"({p[0]}) / {p[1]}"),
        st.tuples(children, st.integers(0, 3)).map(lambda p: f"({p[0]})^{p[1]}"),
        children.map(lambda c: f"-({c})"),
    )


random_exprs = st.recursive(_leaf, _extend, max_leaves=6)


@given(random_exprs, st.floats(0.0, 1.0))
def test_random_trees_jets_match_oracle(text, a):
    got = eval_jet(parse(text), a, 3).coeffs
    ref = taylor_reference(text, a, 3)
    scale = max(1.0, max(abs(r) for r in ref))
    for g, r in zip(got, ref):
        assert abs(g - r) <= 1e-9 * scale


@given(random_exprs)
def test_random_trees_round_trip(text):
    e = parse(text)
    assert parse(str(e)) == e


def test_derivative_enclosure_examples():
    d = derivative_enclosure(parse("x/3"), Interval(0.0, 1.0), 0)
    assert d.lo == pytest.approx(1 / 3, rel=1e-13) and d.hi == pytest.approx(1 / 3, rel=1e-13)
    assert d.contains(1 / 3)
    d = derivative_enclosure(parse("0.1*x^2+0.3*x+0.05"), Interval(0.0, 1.0), 4)
    assert d.lo <= 0.3 and d.hi >= 0.5
    assert d.width <= 0.2 + 0.02
    assert d.lo >= 0.3 - 0.02 and d.hi <= 0.5 + 0.02
    d = derivative_enclosure(parse("x/(2+x)"), Interval(0.0, 1.0), 6)
    assert d.lo <= 2 / 9 and d.hi >= 0.5
    assert d.hi - d.lo <= 0.5 - 2 / 9 + 0.05


def test_derivative_enclosure_zero_denominator():
    with pytest.raises(DivisionNearZero):
        derivative_enclosure(parse("1/(x-0.5)"), Interval(0.0, 1.0), 2)


@pytest.mark.parametrize("text", CORPUS)
def test_enclosure_soundness(text):
    e = parse(text)
    rng = np.random.default_rng(7)
    for depth in (0, 3):
        d = derivative_enclosure(e, Interval(0.0, 1.0), depth)
        r = range_enclosure(e, Interval(0.0, 1.0), depth)
        xs = rng.random(1000)
        h = 1e-6
        fd = (evaluate(e, xs + h) - evaluate(e, xs - h)) / (2 * h)
        assert np.all(fd >= d.lo - 1e-6) and np.all(fd <= d.hi + 1e-6)
        vals = evaluate(e, xs)
        assert np.all(vals >= r.lo) and np.all(vals <= r.hi)


def test_enclosure_narrows_with_depth():
    e = parse("x/(2+x)")
    widths = [derivative_enclosure(e, Interval(0.0, 1.0), d).width for d in range(0, 8)]
    assert all(b <= a + 1e-15 for a, b in zip(widths, widths[1:]))


def test_sup_norm_examples():
    s = sup_norm_diff(parse("x/3"), parse("x/3 + 2/9"), 1e-12)
    assert s.contains(2 / 9) and s.width <= 1e-12
    f = parse("x/(2+x)")
    assert sup_norm_diff(f, f, 1e-3) == Interval(0.0, 0.0)
    s = sup_norm_diff(parse("x/3"), parse("x/2"), 1e-6)
    assert s.contains(1 / 6) and s.width <= 1e-6


@pytest.mark.parametrize("pair", [("x/3", "x^2/2"), ("x/(2+x)", "x/3 + 0.05"),
                                  ("0.1*x^2+0.3*x+0.05", "0.2*x + 0.1"),
                                  ("(x+1)/(x+3)", "0.5*x^3 - 0.2*x + 0.4")])
def test_sup_norm_soundness_on_fine_grid(pair):
    f, g = (parse(t) for t in pair)
    tol = 1e-7
    s = sup_norm_diff(f, g, tol)
    assert s.width <= tol
    xs = np.linspace(0, 1, 20001)
    sampled = float(np.max(np.abs(evaluate(f, xs) - evaluate(g, xs))))
    # the true sup is within L * step / 2 of the grid max, with L <= 2 here
    assert sampled <= s.hi + 1e-15
    assert s.lo <= sampled + 2 * 0.5 / 20000
    # sup via mpmath maximization of the difference on a fine grid
    ff, gg = to_mp(pair[0]), to_mp(pair[1])
    dense = max(abs(float(ff(x) - gg(x))) for x in np.linspace(0, 1, 4001))
    assert dense <= s.hi + 1e-15


def test_sup_norm_budget():
    with pytest.raises(BudgetExceeded):
        sup_norm_diff(parse("x/(2+x)"), parse("x^2/2"), 1e-12, budget=100)
    with pytest.raises(ValueError):
        sup_norm_diff(parse("x"), parse("x/2"), 0.0)
