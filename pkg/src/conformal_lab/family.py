"""One-parameter families of maps ``phi_{i,t}(x)`` and the functions ``F_{w,e}(t)``."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import (
    BudgetExceeded,
    DegenerateCommonFixedPoint,
    InsufficientAlphabet,
    NonDegenerateCheckFailed,
    OutOfRange,
)
from .expr import AnalyticExpr, evaluate_tree, interval_taylor
from .ifs import IFS, parse_word, validate_ifs
from .interval import Interval

DEFAULT_DEPTH = 64
VALIDATION_SAMPLES = 5
_BOX_SPLITS = 16


@dataclass(frozen=True)
class FamilySpec:
    maps: tuple
    t_range: tuple = (0.0, 1.0)
    probs: tuple | None = None

    @property
    def alphabet_size(self):
        return len(self.maps)

    def to_json(self):
        doc = {"maps": [str(m) for m in self.maps], "t_range": list(self.t_range)}
        if self.probs is not None:
            doc["probs"] = list(self.probs)
        return doc


def family_from_json(doc, validate: bool = True) -> FamilySpec:
    """Build a family from ``{"maps": [...], "t_range": [lo, hi]}`` (``probs`` optional)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    maps = tuple(m if isinstance(m, AnalyticExpr) else AnalyticExpr.parse(m, ("x", "t"))
                 for m in doc["maps"])
    if not maps:
        raise ValueError("a family needs at least one map")
    lo, hi = (float(v) for v in doc.get("t_range", (0.0, 1.0)))
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"t_range [{lo}, {hi}] must lie within [0, 1]")
    probs = doc.get("probs")
    fam = FamilySpec(maps, (lo, hi), None if probs is None else tuple(float(p) for p in probs))
    if validate:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateCommonFixedPoint)
            for t in np.linspace(lo, hi, VALIDATION_SAMPLES):
                instantiate(fam, float(t))
    return fam


def load_family(path) -> FamilySpec:
    with open(path, encoding="utf-8") as fh:
        return family_from_json(json.load(fh))


@dataclass(frozen=True)
class PeriodicWord:
    """The infinite word repeating ``block``."""

    block: tuple

    def __post_init__(self):
        if not self.block:
            raise ValueError("the repeating block must be non-empty")
        object.__setattr__(self, "block", tuple(int(i) for i in self.block))

    @classmethod
    def parse(cls, text):
        return cls(parse_word(text))

    def prefix(self, depth):
        reps = -(-depth // len(self.block))
        return (self.block * reps)[:depth]

    def __str__(self):
        return "(" + "".join(str(i) for i in self.block) + ")"


def _periodic(w):
    if isinstance(w, PeriodicWord):
        return w
    if isinstance(w, str):
        return PeriodicWord.parse(w)
    return PeriodicWord(tuple(w))


def _check_t(fam, t):
    lo, hi = fam.t_range
    t = np.asarray(t, dtype=float)
    if np.any(t < lo) or np.any(t > hi) or np.any(~np.isfinite(t)):
        raise OutOfRange(f"t must lie in [{lo}, {hi}]")


def instantiate(fam: FamilySpec, t: float) -> IFS:
    """The validated system at parameter ``t``."""
    _check_t(fam, t)
    return validate_ifs([m.substitute("t", t) for m in fam.maps], fam.probs)


def _orbit(fam, word, t, depth):
    # phi_{w_0} o ... o phi_{w_{depth-1}} (0), applied right to left, vectorized in t
    x = np.zeros_like(t)
    for letter in reversed(word.prefix(depth)):
        x = evaluate_tree(fam.maps[letter].root, {"x": x, "t": t})
    return x


def max_contraction(fam: FamilySpec) -> float:
    """Certified bound of ``|d/dx phi_{i,t}(x)|`` over the parameter box and [0, 1]."""
    key = "_rho"
    cached = getattr(fam, "__dict__", {}).get(key)
    if cached is not None:
        return cached
    lo, hi = fam.t_range
    tb = np.linspace(lo, hi, _BOX_SPLITS + 1)
    xb = np.linspace(0.0, 1.0, _BOX_SPLITS + 1)
    worst = 0.0
    for m in fam.maps:
        for ta, tb_ in zip(tb[:-1], tb[1:]):
            env = {"t": Interval(float(ta), float(tb_))}
            for xa, xc in zip(xb[:-1], xb[1:]):
                d = interval_taylor(m, Interval(float(xa), float(xc)), 1, env)[1]
                worst = max(worst, d.mag)
    object.__setattr__(fam, key, worst)
    return worst


def F_value(fam: FamilySpec, omega, eta, t, depth: int = DEFAULT_DEPTH,
            with_error: bool = False):
    """``F_{omega,eta}(t)`` truncated at ``depth`` letters.

    Vectorized over ``t``.  With ``with_error=True`` returns
    ``(value, 2 * rho^depth)``, the truncation error bound from the
    certified maximal contraction ``rho``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    omega, eta = _periodic(omega), _periodic(eta)
    for w in (omega, eta):
        if max(w.block) >= fam.alphabet_size or min(w.block) < 0:
            raise ValueError(f"word {w} uses letters outside the alphabet")
    _check_t(fam, t)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if omega == eta:
        val = np.zeros_like(ts)
    else:
        val = _orbit(fam, omega, ts, depth) - _orbit(fam, eta, ts, depth)
    out = float(val[0]) if np.ndim(t) == 0 else val
    if with_error:
        rho = max_contraction(fam)
        err = 2.0 * rho ** depth if rho < 1 else math.inf
        return out, err
    return out


@dataclass(frozen=True)
class ZeroBracket:
    lo: float
    hi: float
    touching: bool = False
    centre: float | None = None

    @property
    def mid(self):
        return self.centre if self.centre is not None else 0.5 * (self.lo + self.hi)


def zero_brackets(fam: FamilySpec, omega, eta, grid: int = 101, tol: float = 1e-9,
                  depth: int = DEFAULT_DEPTH, budget=None) -> list:
    """Brackets of width at most ``tol`` around the zeros of ``F`` seen on a grid.

    Sign changes between grid neighbours are refined by bisection; grid
    points where ``|F| < tol`` are reported as touching zeros.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if grid * depth > config.resolve_budget(budget):
        raise BudgetExceeded(f"{grid} grid points at depth {depth} exceed the budget")
    omega, eta = _periodic(omega), _periodic(eta)
    lo, hi = fam.t_range
    ts = np.linspace(lo, hi, grid)
    vals = np.concatenate(config.ordered_map(
        lambda chunk: F_value(fam, omega, eta, chunk, depth),
        np.array_split(ts, max(1, min(grid, 8 * config.threads())))))
    if np.all(np.abs(vals) < tol):
        raise NonDegenerateCheckFailed(
            f"F_{omega},{eta} is below {tol:g} at every grid point; the family looks degenerate")
    found = []
    for t, v in zip(ts, vals):
        if abs(v) < tol:
            t = float(t)
            a, b = max(lo, t - tol / 2), min(hi, t + tol / 2)
            while b - a > tol:  # rounding can leave the width an ulp over tol
                a, b = math.nextafter(a, t), math.nextafter(b, t)
            found.append(ZeroBracket(a, b, True, t))
    for k in np.flatnonzero((vals[:-1] * vals[1:] < 0) & (np.abs(vals[:-1]) >= tol)
                            & (np.abs(vals[1:]) >= tol)):
        a, b, fa = float(ts[k]), float(ts[k + 1]), float(vals[k])
        while b - a > tol:
            mid = 0.5 * (a + b)
            fm = F_value(fam, omega, eta, mid, depth)
            if fm == 0.0:
                a = b = mid
                break
            if (fm < 0) == (fa < 0):
                a, fa = mid, fm
            else:
                b = mid
        found.append(ZeroBracket(a, b, False))
    return _dedupe(found, tol)


def _dedupe(brackets, tol):
    out = []
    for br in sorted(brackets, key=lambda b: (b.lo, b.hi)):
        if out and br.lo - out[-1].hi <= tol:
            # same zero seen twice: keep the narrower bracket so the width stays within tol
            prev = out[-1]
            keep = prev if prev.hi - prev.lo <= br.hi - br.lo else br
            centre = prev.centre if prev.centre is not None else br.centre
            out[-1] = ZeroBracket(keep.lo, keep.hi, prev.touching or br.touching, centre)
        else:
            out.append(br)
    return out


def zero_scan(fam: FamilySpec, omega, eta, grid: int = 101, tol: float = 1e-9,
              depth: int = DEFAULT_DEPTH, budget=None) -> list:
    """Midpoints of the zero brackets of ``F_{omega,eta}`` on the parameter interval."""
    return [b.mid for b in zero_brackets(fam, omega, eta, grid, tol, depth, budget)]


def common_fixed_point_brackets(fam: FamilySpec, grid: int = 101, tol: float = 1e-9,
                                depth: int = DEFAULT_DEPTH, budget=None) -> list:
    """``(bracket, (i1, i2))`` for every letter pair whose fixed points meet."""
    if fam.alphabet_size < 2:
        raise InsufficientAlphabet("a common fixed point needs at least two maps")
    out = []
    for i1 in range(fam.alphabet_size):
        for i2 in range(i1 + 1, fam.alphabet_size):
            for br in zero_brackets(fam, PeriodicWord((i1,)), PeriodicWord((i2,)), grid, tol,
                                    depth, budget):
                out.append((br, (i1, i2)))
    return out


def common_fixed_point_scan(fam: FamilySpec, grid: int = 101, tol: float = 1e-9,
                            depth: int = DEFAULT_DEPTH, budget=None) -> list:
    """Parameters at which two maps of the family share a fixed point."""
    found = _dedupe([br for br, _ in common_fixed_point_brackets(fam, grid, tol, depth, budget)],
                    tol)
    return [b.mid for b in found]
