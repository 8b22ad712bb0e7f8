import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conformal_lab.dimension import box_counting
from conformal_lab.errors import BudgetExceeded, NoRootBracket
from conformal_lab.ifs import validate_ifs
from conformal_lab.pressure import pressure_at, pressure_curve, similarity_dimension

from conftest import C3_MAPS, Q_MAPS

CORPUS = [
    C3_MAPS, Q_MAPS, ("x/2", "x/4 + 3/4"), ("x/(2+x)", "x/3 + 2/3"),
    ("0.4*x", "0.4*x + 0.6", "0.1*x + 0.45"),
]


def _root(ratios):
    """Solve sum r_i^t = 1 by bisection in plain floats."""
    lo, hi = 0.0, 8.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sum(r ** mid for r in ratios) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_pressure_examples(c3, oracle):
    for n in (1, 4, 10):
        lo, hi = pressure_at(c3, 1.0, n)
        assert lo == hi
        assert hi == pytest.approx(oracle["pressure_c3_t1"], abs=1e-12)
    for maps in CORPUS:
        ifs = validate_ifs(maps)
        assert pressure_at(ifs, 0.0, 6) == (math.log2(len(maps)), math.log2(len(maps)))
    s = oracle["dim_c3"]
    assert pressure_at(c3, s, 8)[1] == pytest.approx(0.0, abs=1e-12)


def test_similarity_dimension_examples(c3, half_pair, oracle):
    assert similarity_dimension(c3, 1e-6) == pytest.approx(oracle["dim_c3"], abs=1e-6)
    assert similarity_dimension(half_pair, 1e-6) == pytest.approx(1.0, abs=1e-6)
    four = validate_ifs(["x/4", "x/4 + 1/4", "x/4 + 1/2", "x/4 + 3/4"])
    assert similarity_dimension(four, 1e-6, n=4) == pytest.approx(1.0, abs=1e-6)
    assert similarity_dimension(validate_ifs(["x/2"]), 1e-6) == 0.0


def test_similarity_dimension_affine_closed_form():
    for ratios in ((0.5, 0.25), (0.4, 0.4, 0.1), (0.3, 0.6)):
        maps = []
        offset = 0.0
        for r in ratios:
            maps.append(f"{r}*x + {offset}")
            offset += r
        ifs = validate_ifs(maps)
        assert similarity_dimension(ifs, 1e-8, n=6) == pytest.approx(_root(ratios), abs=1e-8)


def test_large_root_is_bracketed():
    many = validate_ifs([f"0.05*x + {j / 20}" for j in range(20)])
    # 20 maps of ratio 1/20: root exactly 1
    assert similarity_dimension(many, 1e-6, n=2) == pytest.approx(1.0, abs=1e-6)
    dense = validate_ifs([f"0.3*x + {0.7 * j / 23}" for j in range(24)])
    assert similarity_dimension(dense, 1e-6, n=1) == pytest.approx(_root([0.3] * 24), abs=1e-6)


@pytest.mark.filterwarnings("ignore::conformal_lab.errors.DegenerateCommonFixedPoint")
def test_no_root_bracket():
    # 2 * 0.999^64 > 1, so the pressure is still positive at t = 64
    crowd = validate_ifs(["0.999*x"] * 2)
    with pytest.raises(NoRootBracket):
        similarity_dimension(crowd, 1e-3, n=1)


@pytest.mark.parametrize("maps", CORPUS)
def test_strict_monotonicity(maps):
    ifs = validate_ifs(maps)
    ts = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
    uppers = [pressure_at(ifs, t, 6)[1] for t in ts]
    assert all(b < a for a, b in zip(uppers, uppers[1:]))
    curve = pressure_curve(ifs, ts, 6)
    for lo, hi in curve.estimates:
        assert lo <= hi


@pytest.mark.parametrize("maps", CORPUS)
@pytest.mark.parametrize("m", [2, 4, 6])
def test_subadditivity(maps, m):
    ifs = validate_ifs(maps)
    if len(maps) ** (2 * m) > 10 ** 6:
        pytest.skip("too many words")
    for t in (0.3, 0.7, 1.5):
        assert pressure_at(ifs, t, 2 * m)[1] <= pressure_at(ifs, t, m)[1] + 1e-9


@given(st.floats(0.0, 5.0), st.integers(1, 9))
def test_affine_pressure_is_level_independent(t, n):
    ifs = validate_ifs(["x/2", "x/4 + 3/4"])
    expected = math.log2(0.5 ** t + 0.25 ** t)
    assert pressure_at(ifs, t, n)[1] == pytest.approx(expected, abs=1e-12)


def test_lower_bound_gap_shrinks(q):
    gaps = []
    for n in (2, 5, 10):
        lo, hi = pressure_at(q, 1.0, n)
        gaps.append(hi - lo)
        assert hi - lo == pytest.approx(math.log2(q.c_bound) / n, rel=1e-12)
    assert gaps == sorted(gaps, reverse=True)


def test_q_root_within_lower_and_upper(q):
    s = similarity_dimension(q, 1e-6)
    assert pressure_at(q, s, 10)[0] <= 1e-5
    assert 0.6 < s < 1.0


def test_dimension_of_attractor_matches_box_counting(c3):
    s = similarity_dimension(c3, 1e-6)
    assert abs(min(1.0, s) - box_counting(c3, 14).estimate) <= 0.03


def test_curve_json(c3):
    doc = json.loads(json.dumps(pressure_curve(c3, [0.0, 1.0], 4).to_json()))
    assert doc["n"] == 4
    assert doc["rows"][1]["upper"] == pytest.approx(1 - math.log2(3), abs=1e-12)


def test_budget(q):
    with pytest.raises(BudgetExceeded):
        pressure_at(q, 1.0, 20, budget=1000)
