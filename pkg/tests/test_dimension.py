import json
import math

import numpy as np
import pytest

from conformal_lab.dimension import (
    DimReport,
    box_counting,
    entropy_dimension,
    local_dimension,
    lyapunov,
    lyapunov_birkhoff,
    shannon_entropy,
    theorem_rhs,
)
from conformal_lab.errors import InvalidDistribution, ZeroMass
from conformal_lab.ifs import validate_ifs
from conformal_lab.measure import RealMeasure

from conftest import C3_MAPS, Q_MAPS

LEBESGUE = RealMeasure(np.arange(2 ** 20) / 2.0 ** 20)

SYSTEMS = [
    (C3_MAPS, (0.5, 0.5)),
    (C3_MAPS, (0.2, 0.8)),
    (Q_MAPS, (0.5, 0.5)),
    (("x/2", "x/4 + 3/4"), (0.5, 0.5)),
    (("x/(2+x)", "x/3 + 2/3"), (0.5, 0.5)),
    (("0.4*x", "0.4*x + 0.6"), (0.5, 0.5)),
]


def test_shannon_examples(oracle):
    assert shannon_entropy([0.5, 0.5]) == 1.0
    assert shannon_entropy([1.0]) == 0.0
    assert shannon_entropy([0.25, 0.75]) == pytest.approx(oracle["shannon_quarter"], rel=1e-15)
    for bad in ([0.5, 0.6], [1.0, 0.0], [-0.5, 1.5], []):
        with pytest.raises(InvalidDistribution):
            shannon_entropy(bad)


def test_lyapunov_examples(c3, q, oracle):
    for res in (4, 10, 16):
        assert lyapunov(c3, res) == pytest.approx(math.log2(3), rel=1e-14)
    pair = validate_ifs(["x/2", "x/4 + 3/4"], [0.5, 0.5])
    assert lyapunov(pair, 12) == pytest.approx(oracle["chi_half_quarter"], rel=1e-14)
    lo, hi = oracle["q_chi_bracket"]
    assert lo <= lyapunov(q, 16) <= hi


@pytest.mark.parametrize("maps, probs", SYSTEMS)
def test_quadrature_and_birkhoff_agree(maps, probs):
    ifs = validate_ifs(maps, probs)
    est = lyapunov_birkhoff(ifs, samples=10 ** 4, length=200, seed=3)
    assert abs(lyapunov(ifs, 16) - est.value) <= 0.02
    assert est.samples == 10 ** 4 and est.length == 200
    assert est.bias_bound == pytest.approx(math.log2(ifs.c_bound) / 200)


def test_birkhoff_reproducible(q):
    a = lyapunov_birkhoff(q, samples=500, seed=11)
    b = lyapunov_birkhoff(q, samples=500, seed=11)
    assert a == b
    assert lyapunov_birkhoff(q, samples=500, seed=12).value != a.value


def test_theorem_rhs_examples(c3, oracle):
    assert theorem_rhs(c3) == pytest.approx(oracle["dim_c3"], rel=1e-14)
    ratio = validate_ifs(["0.4*x", "0.4*x + 0.6"])
    assert theorem_rhs(ratio) == pytest.approx(oracle["rhs_ratio_04"], rel=1e-14)
    four = validate_ifs(["x/3", "x/3 + 2/9", "x/3 + 4/9", "x/3 + 2/3"])
    assert theorem_rhs(four, resolution=8) == 1.0


def test_entropy_dimension_c3(c3, oracle):
    rep = entropy_dimension(c3, 16)
    assert abs(rep.estimate - oracle["dim_c3"]) <= 0.02
    # the slope over the top half of the exact levels is the oracle's estimate
    assert rep.estimate == pytest.approx(oracle["cantor_entropy_slope_10_16"], abs=5e-3)
    assert [n for n, _ in rep.levels_used] == list(range(4, 17))
    for n, v in rep.levels_used:
        tol = 1e-4 if n <= 12 else 5e-3  # discretized at resolution 16 only
        assert v == pytest.approx(oracle["cantor_entropy"][str(n)] / n, abs=tol)


def test_entropy_dimension_degenerate_cases():
    single = validate_ifs(["x/2 + 1/4"])
    assert entropy_dimension(single, 12).estimate == 0.0
    assert entropy_dimension(LEBESGUE, 16).estimate == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        entropy_dimension(single, 3)


def test_dim_report_json(c3):
    rep = entropy_dimension(c3, 8)
    doc = json.loads(rep.dumps())
    assert doc["estimate"] == rep.estimate
    assert [row[0] for row in doc["levels_used"]] == [4, 5, 6, 7, 8]
    assert 0.0 <= rep.estimate <= 1.5
    with pytest.raises(ValueError):
        DimReport(2.0, [(4, 0.5)], 0.5)


def test_local_dimension_examples(c3, oracle):
    radii = [3.0 ** -k for k in range(2, 9)]
    val = local_dimension(c3, 0.25, radii, 20)
    assert val == pytest.approx(0.63, abs=0.05)
    assert val == pytest.approx(oracle["cantor_local_slope_quarter"], abs=0.02)
    assert local_dimension(LEBESGUE, 0.3, [2.0 ** -k for k in range(2, 12)]) == pytest.approx(
        1.0, abs=0.05)
    assert local_dimension(RealMeasure.dirac(0.3), 0.3, [0.1, 0.01, 0.001]) == 0.0
    with pytest.raises(ZeroMass):
        local_dimension(c3, 0.5, [0.1, 0.01], 12)


def test_box_counting_examples(c3, half_pair, oracle):
    rep = box_counting(c3, 14)
    assert rep.estimate == pytest.approx(oracle["dim_c3"], abs=0.03)
    assert rep.estimate == pytest.approx(oracle["cantor_box_slope_8_14"], abs=0.01)
    counts = {n: round(2 ** (v * n)) for n, v in rep.levels_used}
    for j in range(8, 15):
        exact = oracle["cantor_box_counts"][str(j)]
        # range enclosures are padded outward, so a count can only grow
        assert exact <= counts[j] <= exact * 1.2
    assert box_counting(half_pair, 12).estimate == pytest.approx(1.0, abs=0.01)
    assert box_counting(validate_ifs(["x/2 + 1/4"]), 10).estimate == 0.0


@pytest.mark.parametrize("maps, probs", SYSTEMS)
def test_upper_bound_law(maps, probs):
    ifs = validate_ifs(maps, probs)
    assert entropy_dimension(ifs, 14).estimate <= theorem_rhs(ifs) + 0.05


@pytest.mark.parametrize("maps, probs", SYSTEMS)
def test_ssc_equality(maps, probs):
    ifs = validate_ifs(maps, probs)
    assert ifs.has_disjoint_ranges
    assert abs(entropy_dimension(ifs, 16).estimate - theorem_rhs(ifs)) <= 0.05


def test_box_counting_dominates_entropy_dimension(half_pair):
    for probs in ((0.5, 0.5), (0.2, 0.8), (0.9, 0.1)):
        ifs = validate_ifs(["x/2", "x/2 + 1/2"], probs)
        assert box_counting(half_pair, 12).estimate >= entropy_dimension(ifs, 14).estimate - 0.05
