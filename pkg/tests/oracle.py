"""Reference computations that share no code with the package.

Everything here works from first principles: exact integer or Fraction
arithmetic for the middle-thirds measure, closed forms for affine systems,
and mpmath at high precision for derivatives of expression strings.
``python tests/oracle.py`` rewrites ``oracle_values.json``; the tests read
the frozen file.
"""
from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import mpmath

FROZEN = Path(__file__).with_name("oracle_values.json")
_DEPTH = 90


def cantor_cdf(num: int, den: int) -> Fraction:
    """Middle-thirds Cantor function at ``num / den`` (error below ``2^-_DEPTH``)."""
    if num <= 0:
        return Fraction(0)
    if num >= den:
        return Fraction(1)
    acc = Fraction(0)
    scale = Fraction(1, 2)
    for _ in range(_DEPTH):
        num *= 3
        digit, num = divmod(num, den)
        if digit == 1:
            return acc + scale
        if digit == 2:
            acc += scale
        if num == 0:
            return acc
        scale /= 2
    return acc


def cantor_mass(a: Fraction, b: Fraction) -> float:
    """Cantor measure of ``[a, b]`` (no atoms, so open or closed does not matter)."""
    a = min(max(a, Fraction(0)), Fraction(1))
    b = min(max(b, Fraction(0)), Fraction(1))
    return float(cantor_cdf(b.numerator, b.denominator) - cantor_cdf(a.numerator, a.denominator))


def cantor_dyadic_entropy(n: int) -> float:
    """``H(mu, D_n)`` for the uniform middle-thirds measure, base 2."""
    den = 1 << n
    vals = [cantor_cdf(m, den) for m in range(den + 1)]
    masses = [float(b - a) for a, b in zip(vals, vals[1:]) if b > a]
    return -math.fsum(p * math.log2(p) for p in masses)


def slope(xs, ys) -> float:
    mx = math.fsum(xs) / len(xs)
    my = math.fsum(ys) / len(ys)
    num = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.fsum((x - mx) ** 2 for x in xs)
    return num / den


def cantor_cells_met(j: int) -> int:
    """Level-``j`` dyadic cells of [0, 1) meeting the middle-thirds Cantor set.

    Generation-``g`` intervals ``[a, a + 3^-g]`` with ``3^-g`` below the cell
    size cover the set; a cell is counted when some interval meets it and
    that interval's own sub-intervals keep meeting it down to a depth where
    they fit inside single cells.
    """
    den = 1 << j
    cells = set()

    def walk(a: Fraction, length: Fraction):
        lo = math.floor(a * den)
        hi = min(math.floor((a + length) * den), den - 1)
        if lo == hi or length * den < Fraction(1, 1 << 12):
            cells.update(range(lo, hi + 1))
            return
        third = length / 3
        walk(a, third)
        walk(a + 2 * third, third)

    walk(Fraction(0), Fraction(1))
    return len(cells)


def c3_words_min_distance(n: int) -> Fraction:
    """Exact min over distinct words of ``sup |phi_u - phi_v|`` for the middle-thirds pair.

    ``phi_u(x) = x / 3^n + c_u`` so distances are ``|c_u - c_v|``.
    """
    offsets = []
    for w in itertools.product((0, 1), repeat=n):
        c = Fraction(0)
        for k, letter in enumerate(w):
            c += Fraction(2 * letter, 3 ** (k + 1))
        offsets.append(c)
    offsets.sort()
    return min(b - a for a, b in zip(offsets, offsets[1:]))


def to_mp(text: str):
    """Compile an expression string into an mpmath function of ``x``."""
    src = text.replace("^", "**")
    code = compile(src, "<expr>", "eval")
    for name in code.co_names:
        if name != "x":
            raise ValueError(f"unexpected name {name!r}")

    def f(x):
        return eval(code, {"__builtins__": {}}, {"x": mpmath.mpf(x)})

    return f


def taylor_reference(text: str, a: float, k: int = 2):
    """``f^(j)(a) / j!`` for ``j = 0..k`` by high-precision numerical differentiation."""
    f = to_mp(text)
    with mpmath.workdps(60):
        a = mpmath.mpf(a)
        return [float(mpmath.diff(f, a, j) / mpmath.factorial(j)) for j in range(k + 1)]


def freeze():
    cantor_h = {n: cantor_dyadic_entropy(n) for n in range(0, 17)}
    top = list(range(10, 17))
    cantor_slope = slope(top, [cantor_h[n] for n in top])
    box = {j: cantor_cells_met(j) for j in range(1, 15)}
    box_top = list(range(8, 15))
    box_slope = slope(box_top, [math.log2(box[j]) for j in box_top])
    radii = [Fraction(1, 3 ** k) for k in range(2, 9)]
    x = Fraction(1, 4)
    local_masses = [cantor_mass(x - r, x + r) for r in radii]
    local_slope = slope([math.log2(r) for r in radii], [math.log2(m) for m in local_masses])
    values = {
        "dim_c3": 1 / math.log2(3),
        "cantor_entropy": {str(n): h for n, h in cantor_h.items()},
        "cantor_entropy_slope_10_16": cantor_slope,
        "cantor_box_counts": {str(j): c for j, c in box.items()},
        "cantor_box_slope_8_14": box_slope,
        "cantor_local_slope_quarter": local_slope,
        "cantor_ball_zero_third": cantor_mass(Fraction(-1, 3), Fraction(1, 3)),
        "c3_min_distance": {str(n): float(c3_words_min_distance(n)) for n in range(1, 7)},
        "shannon_quarter": -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75)),
        "rhs_ratio_04": 1 / math.log2(2.5),
        "pressure_c3_t1": 1 - math.log2(3),
        "q_chi_bracket": [1.0, -math.log2(0.3)],
        "chi_half_quarter": 1.5,
    }
    FROZEN.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    return values


def load():
    return json.loads(FROZEN.read_text())


if __name__ == "__main__":
    for k, v in freeze().items():
        print(k, v if not isinstance(v, dict) else f"{len(v)} entries")
