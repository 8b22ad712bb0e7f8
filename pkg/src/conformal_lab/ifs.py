"""Validated iterated function systems on [0, 1] and word-level machinery."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import config, kernels
from .errors import (
    BudgetExceeded,
    DegenerateCommonFixedPoint,
    EscapesInterval,
    HypothesisViolated,
    InvalidDistribution,
    NonPositiveProb,
    NotContracting,
)
from .expr import AnalyticExpr, Jet, compose_jets, eval_jet, interval_taylor, parse
from .interval import EPS, Interval
from .polynomial import Polynomial

VALIDATION_DEPTH = 8
CURVATURE_DEPTH = 6
RANGE_SLACK = 1e-12
FIXED_POINT_GRID = 1e-4
FIXED_POINT_TOL = 1e-10
COMMON_FIXED_POINT_TOL = 1e-9

Word = tuple


def parse_word(text):
    """``"012"`` -> ``(0, 1, 2)``; dotted form ``"10.3"`` for alphabets above 10."""
    text = text.strip()
    if "." in text:
        return tuple(int(t) for t in text.split("."))
    return tuple(int(c) for c in text)


def format_word(word, alphabet_size=10):
    if alphabet_size > 10:
        return ".".join(str(i) for i in word)
    return "".join(str(i) for i in word)


def _fixed_points(f):
    """Zeros of ``f(x) - x`` on [0, 1]: grid scan plus bisection."""
    xs = np.linspace(0.0, 1.0, int(round(1.0 / FIXED_POINT_GRID)) + 1)
    g = f(xs) - xs
    found = []
    for i in np.flatnonzero(g == 0.0):
        found.append(float(xs[i]))
    for i in np.flatnonzero(g[:-1] * g[1:] < 0.0):
        lo, hi = float(xs[i]), float(xs[i + 1])
        glo = g[i]
        while hi - lo > FIXED_POINT_TOL:
            mid = 0.5 * (lo + hi)
            gm = f(mid) - mid
            if gm == 0.0:
                lo = hi = mid
                break
            if (gm < 0) == (glo < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        found.append(0.5 * (lo + hi))
    return sorted(found)


class IFS:
    """Contracting maps of [0, 1] with a positive probability vector.

    Construct through :func:`validate_ifs`, which certifies the derivative
    and range bounds.
    """

    def __init__(self, maps, probs, deriv_bounds, range_bounds, fixed_points,
                 common_fixed_point):
        self.maps = tuple(maps)
        self.probs = np.asarray(probs, dtype=float)
        self.probs.setflags(write=False)
        self.deriv_bounds = tuple(deriv_bounds)
        self.range_bounds = tuple(range_bounds)
        self.fixed_points = tuple(fixed_points)
        self.common_fixed_point = common_fixed_point
        self.program = kernels.combine([m.program for m in self.maps])
        self._cache = {}

    @property
    def alphabet_size(self):
        return len(self.maps)

    @property
    def rho_max(self):
        """Largest certified derivative magnitude."""
        return max(b.hi for b in self.deriv_bounds)

    @property
    def rho_min(self):
        return min(b.lo for b in self.deriv_bounds)

    @property
    def is_affine(self):
        return self.c_bound == 1.0

    @property
    def has_disjoint_ranges(self):
        """Pairwise disjoint first-level images (a sufficient test for strong separation)."""
        rs = sorted(self.range_bounds, key=lambda r: r.lo)
        return all(a.hi < b.lo for a, b in zip(rs, rs[1:]))

    @property
    def c_bound(self):
        if "c_bound" not in self._cache:
            self._cache["c_bound"] = _distortion_bound(self)
        return self._cache["c_bound"]

    def word(self, u):
        return WordMap(self, u)

    def cut_set(self, n, budget=None):
        return cut_set(self, n, budget)

    def to_json(self):
        return {"maps": [str(m) for m in self.maps], "probs": [float(p) for p in self.probs]}

    def __repr__(self):
        return f"IFS(maps={[str(m) for m in self.maps]}, probs={self.probs.tolist()})"


def validate_ifs(maps: Sequence, probs=None, budget=None) -> IFS:
    """Check the conformal setup and return an :class:`IFS`.

    Maps may be expression text or :class:`AnalyticExpr`.  ``probs``
    defaults to the uniform vector.  A common fixed point of all maps is
    reported with a :class:`DegenerateCommonFixedPoint` warning.
    """
    exprs = [m if isinstance(m, AnalyticExpr) else parse(m) for m in maps]
    if not exprs:
        raise HypothesisViolated("an IFS needs at least one map")
    if probs is None:
        probs = [1.0 / len(exprs)] * len(exprs)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(exprs),):
        raise InvalidDistribution(f"{len(probs)} probabilities for {len(exprs)} maps")
    if np.any(~(probs > 0)):
        raise NonPositiveProb(f"probabilities must be strictly positive, got {probs.tolist()}")
    if abs(math.fsum(probs) - 1.0) > 1e-12:
        raise InvalidDistribution(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    boxes = len(exprs) * 2 ** VALIDATION_DEPTH
    if boxes > config.resolve_budget(budget):
        raise BudgetExceeded(f"validation needs {boxes} enclosure boxes, over the budget")
    los = np.linspace(0.0, 1.0, 2 ** VALIDATION_DEPTH + 1)
    los, his = los[:-1], los[1:]
    ones = np.ones(len(los), dtype=np.int64)
    zeros = np.zeros((len(los), 1), dtype=np.int64)
    dbounds, rbounds = [], []
    for i, e in enumerate(exprs):
        vlo, vhi, dlo, dhi = kernels.interval_chain_words(e.program, zeros, ones, los, his)
        d = Interval(float(dlo.min()), float(dhi.max()))
        r = Interval(float(vlo.min()), float(vhi.max()))
        if d.lo <= 0.0 <= d.hi:
            raise NotContracting(f"map {i} ({e}): derivative enclosure {d} meets 0")
        mag = d.abs()
        if mag.hi >= 1.0:
            raise NotContracting(f"map {i} ({e}): |derivative| may reach {mag.hi:.6g} >= 1")
        if r.lo < -RANGE_SLACK or r.hi > 1.0 + RANGE_SLACK:
            raise EscapesInterval(f"map {i} ({e}): range {r} leaves [0, 1]")
        dbounds.append(mag)
        rbounds.append(r)

    fixed = [_fixed_points(e) for e in exprs]
    common = None
    if len(exprs) >= 1:
        for x in fixed[0]:
            if all(abs(e(x) - x) <= COMMON_FIXED_POINT_TOL for e in exprs):
                common = x
                break
    if common is not None and len(exprs) > 1:
        warnings.warn(DegenerateCommonFixedPoint(
            f"all maps fix x = {common:.10g}; the attractor is a single point"), stacklevel=2)
    return IFS(exprs, probs, dbounds, rbounds,
               [fp[0] if fp else math.nan for fp in fixed], common)


def ifs_from_json(doc, budget=None) -> IFS:
    if isinstance(doc, str):
        doc = json.loads(doc)
    return validate_ifs(doc["maps"], doc.get("probs"), budget)


def load_ifs(path, budget=None) -> IFS:
    with open(path, encoding="utf-8") as fh:
        return ifs_from_json(json.load(fh), budget)


# --------------------------------------------------------------------------
# words

def _word_array(u, m):
    w = np.asarray(u, dtype=np.int64).reshape(-1)
    if w.size == 0:
        raise ValueError("empty word")
    if np.any((w < 0) | (w >= m)):
        raise ValueError(f"word {tuple(u)} uses letters outside 0..{m - 1}")
    return w


class WordMap:
    """The composition ``phi_{u_1} ∘ ... ∘ phi_{u_n}`` as a map of [0, 1]."""

    def __init__(self, ifs, u):
        self.ifs = ifs
        self.word = tuple(int(i) for i in u)
        self._arr = _word_array(self.word, ifs.alphabet_size)

    def __call__(self, x):
        v, _ = kernels.point_chain(self.ifs.program, self._arr, x)
        return v if np.ndim(x) else float(v[0])

    def derivative(self, x):
        _, d = kernels.point_chain(self.ifs.program, self._arr, x)
        return d if np.ndim(x) else float(d[0])

    def grid_values(self, xs):
        return kernels.point_chain(self.ifs.program, self._arr, xs)[0]

    def _enclose(self, los, his):
        n = len(los)
        words = np.broadcast_to(self._arr, (n, len(self._arr)))
        return kernels.interval_chain_words(
            self.ifs.program, words, np.full(n, len(self._arr)), los, his)

    def grid_enclosure(self, xs):
        xs = np.asarray(xs, dtype=float)
        vlo, vhi, _, _ = self._enclose(xs, xs)
        return vlo, vhi

    def derivative_pieces(self, los, his):
        _, _, dlo, dhi = self._enclose(los, his)
        return dlo, dhi

    def range_enclosure(self, lo=0.0, hi=1.0):
        vlo, vhi, _, _ = self._enclose(np.array([lo]), np.array([hi]))
        return Interval(float(vlo[0]), float(vhi[0]))

    @property
    def op_count(self):
        offs = self.ifs.program.offs
        return int(sum(offs[i + 1] - offs[i] for i in self.word))

    def __eq__(self, other):
        return isinstance(other, WordMap) and other.ifs is self.ifs and other.word == self.word

    def __hash__(self):
        return hash((id(self.ifs), self.word))

    def __repr__(self):
        return f"WordMap({format_word(self.word, self.ifs.alphabet_size)!r})"


def word_jet(ifs: IFS, u, a: float, k: int) -> Jet:
    """Jet of ``phi_u`` at ``a``, composed right to left."""
    w = _word_array(u, ifs.alphabet_size)
    jet = eval_jet(ifs.maps[w[-1]], a, k)
    for letter in w[-2::-1]:
        jet = compose_jets(eval_jet(ifs.maps[letter], jet.coeffs[0], k), jet)
    return jet


@dataclass(frozen=True, eq=False)
class CutSet:
    """The minimal cut-set: each word is the shortest prefix with ``|phi_u'(0)| <= 2^-n``."""

    n: int
    letters: np.ndarray
    lengths: np.ndarray
    weights: np.ndarray
    derivs: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.weights)

    @property
    def words(self):
        return [tuple(int(c) for c in row[:l]) for row, l in zip(self.letters, self.lengths)]

    def entries(self):
        return list(zip(self.words, self.weights.tolist(), self.derivs.tolist()))


def cut_set(ifs: IFS, n: int, budget=None) -> CutSet:
    if n < 1:
        raise ValueError("cut-set level must be >= 1")
    budget = config.resolve_budget(budget)
    key = ("cut_set", n)
    cached = ifs._cache.get(key)
    if cached is not None:
        if len(cached) > budget:
            from .errors import BudgetExceeded
            raise BudgetExceeded(f"cut-set at level {n} exceeds the budget {budget}")
        return cached
    letters, lengths, weights, derivs, positions = kernels.cut_set(
        ifs.program, ifs.probs, n, budget)
    for arr in (letters, lengths, weights, derivs, positions):
        arr.setflags(write=False)
    cs = CutSet(n, letters, lengths, weights, derivs, positions)
    ifs._cache[key] = cs
    return cs


# --------------------------------------------------------------------------
# distortion

@dataclass(frozen=True)
class DistortionData:
    C_emp: float
    C_bound: float


def _curvature_bound(ifs):
    """Certified ``sup |phi_i''/phi_i'|`` over maps and [0, 1]."""
    edges = np.linspace(0.0, 1.0, 2 ** CURVATURE_DEPTH + 1)
    worst = 0.0
    for e in ifs.maps:
        for lo, hi in zip(edges[:-1], edges[1:]):
            c = interval_taylor(e, Interval(float(lo), float(hi)), 2)
            second = (c[2] * 2.0).mag
            if second == 0.0:
                continue
            worst = max(worst, second / c[1].mig)
    return worst * (1.0 + EPS)


def _distortion_bound(ifs):
    # sum over a word of |log2|phi'|(x_j) - log2|phi'|(y_j)| <= V |x_j - y_j|,
    # with |x_j - y_j| <= rho^(n-j); V measured per log2
    v2 = _curvature_bound(ifs) / math.log(2.0)
    if v2 == 0.0:
        return 1.0
    return float(2.0 ** (v2 / (1.0 - ifs.rho_max)))


def distortion(ifs: IFS, sample_words: int = 64, sample_points: int = 64, seed: int = 0,
               max_length: int = 8) -> DistortionData:
    """Empirical distortion ratio over sampled words next to the analytic bound."""
    if sample_words < 1 or sample_points < 1:
        raise ValueError("sample counts must be >= 1")
    rng = np.random.default_rng(seed)
    c_emp = 1.0
    for _ in range(sample_words):
        length = int(rng.integers(1, max_length + 1))
        u = rng.integers(0, ifs.alphabet_size, size=length)
        xs = np.concatenate([[0.0, 1.0], rng.random(max(sample_points * 2 - 2, 0))])
        d = np.abs(kernels.point_chain(ifs.program, u, xs)[1])
        c_emp = max(c_emp, float(d.max() / d.min()))
    return DistortionData(c_emp, ifs.c_bound)


# --------------------------------------------------------------------------
# Taylor projection

def taylor_project(ifs: IFS, u, k: int, a: float) -> Polynomial:
    """Degree-``k`` Taylor polynomial of ``phi_u`` at ``a`` in the monomial basis."""
    jet = word_jet(ifs, u, a, k)
    return Polynomial.from_taylor(jet.coeffs, a)


def remainder_bound(ifs: IFS, u, k: int, a: float, radius: float) -> float:
    """Upper bound for ``|phi_u - P_{k,a} phi_u|`` within ``radius`` of ``a``.

    Lagrange remainder with the derivative estimate
    ``|phi_u^(k+1)| <= (k+1)! C^(k+1) |phi_u'(0)|``, i.e.
    ``radius^(k+1) C^(k+1) |phi_u'(0)|``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    d0 = abs(WordMap(ifs, u).derivative(0.0))
    c = ifs.c_bound
    return float((radius * c) ** (k + 1) * d0)
