"""Minimum pairwise sup-norm distance between word maps of equal length.

Every word of length ``n`` gets a feature vector: its values on a fixed
33-point grid.  The Chebyshev distance between two feature vectors is (up to
rounding) a lower bound for the sup-norm distance of the maps, so only pairs
whose feature distance does not exceed the best certified upper bound need
certification.  Each pair's enclosure is ``[max(certified lo, feature lower
bound), certified hi]``; a pruned pair therefore has both ends above the
reported minimum, and the pruned search returns exactly what brute force
returns.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import config, kernels
from .errors import BudgetExceeded, ExactOverlapDetected
from .expr import sup_norm_diff
from .ifs import IFS, WordMap, format_word
from .interval import EPS, Interval

GRID_POINTS = 33
OVERLAP_WIDTH = 1e-13
DEFAULT_TOL = 1e-9


def all_words(m: int, n: int, budget=None) -> np.ndarray:
    """Every word of length ``n`` over ``m`` letters, one per row, in lexicographic order."""
    budget = config.resolve_budget(budget)
    if m ** n > budget:
        raise BudgetExceeded(f"{m}^{n} words exceed the budget {budget}")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(m), repeat=n)), dtype=np.int64).reshape(-1, n)


def features(ifs: IFS, words: np.ndarray) -> np.ndarray:
    """Values of each word map on the feature grid, shape ``(len(words), 33)``."""
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    lengths = np.full(len(words), words.shape[1])
    cols = [kernels.log_derivative_chain(ifs.program, words, lengths, x)[0] for x in grid]
    return np.ascontiguousarray(np.stack(cols, axis=1))


def _rounding_slack(ifs, n):
    # feature values lie in [0, 1]; same floor as the certifier uses
    ops = np.diff(ifs.program.offs)
    return EPS * (2 * n * int(ops.max()) + 2) * 2.0


class _Search:
    def __init__(self, ifs, n, tol, budget):
        if n < 1:
            raise ValueError("n must be >= 1")
        if not tol > 0:
            raise ValueError("tol must be positive")
        self.ifs, self.n, self.tol = ifs, n, tol
        self.budget = config.resolve_budget(budget)
        self.words = all_words(ifs.alphabet_size, n, self.budget)
        if len(self.words) < 2:
            raise ValueError("need at least two words")
        self.F = features(ifs, self.words)
        self.slack = _rounding_slack(ifs, n)
        self._maps = {}

    def word(self, i):
        if i not in self._maps:
            self._maps[i] = WordMap(self.ifs, self.words[i])
        return self._maps[i]

    def word_tuple(self, i):
        return tuple(int(c) for c in self.words[i])

    def feature_bound(self, i, j):
        return max(0.0, float(np.max(np.abs(self.F[i] - self.F[j]))) - self.slack)

    def certify(self, i, j):
        enc = sup_norm_diff(self.word(i), self.word(j), self.tol, self.budget)
        if enc.lo == 0.0 and enc.width < OVERLAP_WIDTH:
            raise ExactOverlapDetected(
                f"words {format_word(self.word_tuple(i), self.ifs.alphabet_size)} and "
                f"{format_word(self.word_tuple(j), self.ifs.alphabet_size)} induce the same map",
                self.n, (self.word_tuple(i), self.word_tuple(j)), enc)
        return max(enc.lo, self.feature_bound(i, j)), enc.hi

    def certify_many(self, pairs):
        # certification is deterministic per pair, so thread order is irrelevant
        return config.ordered_map(lambda p: self.certify(*p), pairs)


class _Best:
    def __init__(self):
        self.lo = math.inf
        self.hi = math.inf
        self.pair = None

    def update(self, pair, lo, hi):
        self.lo = min(self.lo, lo)
        if hi < self.hi or (hi == self.hi and pair < self.pair):
            self.hi = hi
            self.pair = pair


def _result(search, best):
    i, j = best.pair
    return Interval(best.lo, best.hi), search.word_tuple(i), search.word_tuple(j)


def min_pairwise_distance(ifs: IFS, n: int, tol: float = DEFAULT_TOL, budget=None,
                          brute_force: bool = False):
    """Enclosure of ``min ||phi_u - phi_v||`` over distinct ``u, v`` of length ``n``.

    Returns ``(enclosure, u, v)`` with ``(u, v)`` a pair attaining the
    smallest certified upper bound (lexicographically first on ties).
    """
    s = _Search(ifs, n, tol, budget)
    best = _Best()
    if brute_force:
        pairs = list(itertools.combinations(range(len(s.words)), 2))
        for p, (lo, hi) in zip(pairs, s.certify_many(pairs)):
            best.update(p, lo, hi)
        return _result(s, best)

    i0, j0, _ = kernels.chebyshev_min(s.F)
    lo, hi = s.certify(int(i0), int(j0))
    best.update((int(i0), int(j0)), lo, hi)

    I, J, D = kernels.chebyshev_pairs(s.F, best.hi + s.slack)
    order = np.lexsort((J, I, D))
    cand = [(int(I[k]), int(J[k])) for k in order if (int(I[k]), int(J[k])) != (i0, j0)]
    batch = 64 * config.threads()
    pos = 0
    while pos < len(cand):
        chunk = []
        while pos < len(cand) and len(chunk) < batch:
            p = cand[pos]
            pos += 1
            if s.feature_bound(*p) <= best.hi:
                chunk.append(p)
        for p, (lo, hi) in zip(chunk, s.certify_many(chunk)):
            best.update(p, lo, hi)
    return _result(s, best)


@dataclass(frozen=True)
class SeparationRow:
    n: int
    enclosure: Interval
    witness: tuple
    rate: float
    flagged: bool = False


@dataclass
class SeparationProfile:
    rows: list = field(default_factory=list)
    alphabet_size: int = 2

    @property
    def collided(self):
        return bool(self.rows) and self.rows[-1].flagged

    def table(self):
        out = []
        for r in self.rows:
            u, v = (format_word(w, self.alphabet_size) for w in r.witness)
            out.append({"n": r.n, "lo": r.enclosure.lo, "hi": r.enclosure.hi, "rate": r.rate,
                        "witness_u1": u, "witness_u2": v, "exact_overlap": r.flagged})
        return out


def separation_profile(ifs: IFS, n_max: int, tol: float = DEFAULT_TOL,
                       budget=None) -> SeparationProfile:
    """Rows ``n = 1..n_max`` with rate ``lo^(1/n)``; stops at the first exact overlap."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    prof = SeparationProfile(alphabet_size=ifs.alphabet_size)
    for n in range(1, n_max + 1):
        try:
            enc, u, v = min_pairwise_distance(ifs, n, tol, budget)
        except ExactOverlapDetected as exc:
            prof.rows.append(SeparationRow(n, exc.enclosure, exc.witness, 0.0, True))
            break
        prof.rows.append(SeparationRow(n, enc, (u, v), enc.lo ** (1.0 / n)))
    return prof
