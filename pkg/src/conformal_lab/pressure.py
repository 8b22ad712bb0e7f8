"""Pressure function ``P(t)`` and its root, the conformal similarity dimension."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import config, kernels
from .errors import NoRootBracket
from .ifs import IFS

DEFAULT_LEVEL = 10
T_MAX = 64.0


def word_sup_bounds(ifs: IFS, n: int, budget=None) -> np.ndarray:
    """Upper bounds of ``sup |phi_u'|`` over [0, 1] for every ``u`` of length ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    key = ("word_sups", n)
    if key not in ifs._cache:
        sups = kernels.word_sups(ifs.program, n, config.resolve_budget(budget))
        sups.setflags(write=False)
        ifs._cache[key] = sups
    return ifs._cache[key]


def _upper(log_sups, t, n):
    # log2 sum_u s_u^t, shifted by the max so large t does not underflow
    e = t * log_sups
    top = float(np.max(e))
    return (top + math.log2(math.fsum(np.exp2(np.sort(e - top)).tolist()))) / n


def pressure_at(ifs: IFS, t: float, n: int = DEFAULT_LEVEL, budget=None):
    """``(lower, upper)`` enclosure of the level-``n`` pressure at ``t`` (base 2)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        p0 = math.log2(ifs.alphabet_size)
        return p0, p0
    log_sups = np.log2(word_sup_bounds(ifs, n, budget))
    upper = _upper(log_sups, t, n)
    return upper - t * math.log2(ifs.c_bound) / n, upper


@dataclass(frozen=True)
class PressureCurve:
    t_values: tuple
    estimates: tuple
    n_used: int

    def rows(self):
        return [(t, lo, hi) for t, (lo, hi) in zip(self.t_values, self.estimates)]

    def to_json(self):
        return {"n": self.n_used,
                "rows": [{"t": t, "lower": lo, "upper": hi} for t, lo, hi in self.rows()]}


def pressure_curve(ifs: IFS, t_values: Sequence[float], n: int = DEFAULT_LEVEL,
                   budget=None) -> PressureCurve:
    word_sup_bounds(ifs, n, budget)
    ts = tuple(float(t) for t in t_values)
    est = tuple(config.ordered_map(lambda t: pressure_at(ifs, t, n, budget), ts))
    return PressureCurve(ts, est, n)


def similarity_dimension(ifs: IFS, tol: float = 1e-6, n: int = DEFAULT_LEVEL,
                         budget=None) -> float:
    """Root of the level-``n`` upper pressure, located by bisection to width ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if math.log2(ifs.alphabet_size) == 0.0:
        return 0.0
    hi = 1.0
    while pressure_at(ifs, hi, n, budget)[1] >= 0:
        hi *= 2
        if hi > T_MAX:
            raise NoRootBracket(f"pressure stays non-negative up to t = {T_MAX:g}")
    lo = 0.0 if hi == 1.0 else hi / 2
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if pressure_at(ifs, mid, n, budget)[1] >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
