"""Finitely supported measures and dyadic entropy.

Dyadic cells are half-open, ``[m/2^n, (m+1)/2^n)``; an atom sitting on a
cell boundary belongs to the cell on its right.  Entropies are base 2.
"""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from . import config
from .errors import BudgetExceeded, EmptyCell, ZeroScale
from .polynomial import Polynomial

MERGE_TOL = 1e-14
MASS_TOL = 1e-10


def _entropy_of_masses(masses):
    masses = np.sort(np.asarray(masses, dtype=float))[::-1]
    masses = masses[masses > 0]
    if masses.size <= 1:
        return 0.0
    return max(0.0, -math.fsum((masses * np.log2(masses)).tolist()))


def level(t):
    """Real-indexed partitions use the integer part of the level."""
    return int(math.floor(t))


def cell_index(x, n):
    return np.floor(np.asarray(x, dtype=float) * np.ldexp(1.0, level(n))).astype(np.int64)


def _merge(pos, w, tol=MERGE_TOL):
    """Sort atoms and merge runs of positions closer than ``tol``."""
    order = np.argsort(pos, kind="stable")
    pos, w = pos[order], w[order]
    if pos.size < 2:
        return pos, w
    brk = np.flatnonzero(np.diff(pos) > tol) + 1
    if brk.size == pos.size - 1:
        return pos, w
    starts = np.concatenate([[0], brk])
    return pos[starts], np.add.reduceat(w, starts)


class RealMeasure:
    """Probability measure on the line with finitely many atoms, sorted by position."""

    __slots__ = ("positions", "weights", "_cum")

    def __init__(self, positions, weights=None, merge=True, normalize=False):
        pos = np.asarray(positions, dtype=float).reshape(-1)
        if weights is None:
            w = np.full(pos.size, 1.0 / max(pos.size, 1))
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if pos.size == 0 or pos.shape != w.shape:
            raise ValueError("need matching, non-empty positions and weights")
        if not np.all(np.isfinite(pos)):
            raise ValueError("atom positions must be finite")
        if np.any(~(w > 0)):
            raise ValueError("atom weights must be positive")
        if normalize:
            w = w / math.fsum(w.tolist())
        elif abs(math.fsum(w.tolist()) - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {math.fsum(w.tolist())!r}, not 1")
        if merge:
            pos, w = _merge(pos, w)
        else:
            order = np.argsort(pos, kind="stable")
            pos, w = pos[order], w[order]
        pos.setflags(write=False)
        w.setflags(write=False)
        self.positions = pos
        self.weights = w
        self._cum = None

    @classmethod
    def dirac(cls, x):
        return cls([x], [1.0])

    @classmethod
    def uniform(cls, positions):
        return cls(positions)

    def __len__(self):
        return self.positions.size

    @property
    def cumulative(self):
        if self._cum is None:
            self._cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return self._cum

    def sample(self, rng, size):
        """Atom positions drawn according to the weights."""
        idx = np.searchsorted(self.cumulative[1:], rng.random(size) * self.cumulative[-1],
                              side="right")
        return self.positions[np.minimum(idx, len(self) - 1)]

    def cell_masses(self, n):
        cells = cell_index(self.positions, n)
        starts = np.concatenate([[0], np.flatnonzero(np.diff(cells)) + 1])
        return cells[starts], np.add.reduceat(self.weights, starts)

    def pushforward(self, f):
        """Image measure under ``f`` (a vectorized callable)."""
        return RealMeasure(np.asarray(f(self.positions), dtype=float), self.weights.copy())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "weight"])
        for p, q in zip(self.positions, self.weights):
            w.writerow([repr(float(p)), repr(float(q))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([float(r["position"]) for r in rows], [float(r["weight"]) for r in rows])

    def to_json(self):
        return {"atoms": [[float(p), float(q)] for p, q in zip(self.positions, self.weights)]}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        atoms = np.asarray(doc["atoms"], dtype=float)
        return cls(atoms[:, 0], atoms[:, 1])

    def __repr__(self):
        return f"RealMeasure({len(self)} atoms)"


class PolyMeasure:
    """Finitely supported probability measure on polynomials of degree ``<= k``."""

    __slots__ = ("coeffs", "weights")

    def __init__(self, polys, weights=None, order=None):
        rows = [p.coeffs if isinstance(p, Polynomial) else np.asarray(p, dtype=float)
                for p in polys]
        if not rows:
            raise ValueError("need at least one atom")
        k = max(len(r) - 1 for r in rows) if order is None else order
        k = max(k, 1)
        c = np.zeros((len(rows), k + 1))
        for i, r in enumerate(rows):
            c[i] = Polynomial(r).padded(k)
        w = (np.full(len(rows), 1.0 / len(rows)) if weights is None
             else np.asarray(weights, dtype=float))
        if w.shape != (len(rows),) or np.any(~(w > 0)):
            raise ValueError("weights must be positive, one per atom")
        if abs(math.fsum(w.tolist()) - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {math.fsum(w.tolist())!r}, not 1")
        c.setflags(write=False)
        w.setflags(write=False)
        self.coeffs = c
        self.weights = w

    @classmethod
    def dirac(cls, p, order=None):
        return cls([p], [1.0], order)

    @property
    def order(self):
        return self.coeffs.shape[1] - 1

    def __len__(self):
        return self.coeffs.shape[0]

    @property
    def polys(self):
        return [Polynomial(r) for r in self.coeffs]

    def evaluate(self, x):
        """Matrix of ``p_i(x_j)`` by Horner's rule."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((len(self), x.size)) + self.coeffs[:, -1:]
        for j in range(self.order - 1, -1, -1):
            out = out * x[None, :] + self.coeffs[:, j:j + 1]
        return out

    def derivative_bounds(self, grid=1025):
        """Min of ``|p'|`` on [0, 1] over atoms, sampled on a grid plus critical points."""
        xs = np.linspace(0.0, 1.0, grid)
        worst = math.inf
        for p in self.polys:
            dp = p.derivative()
            pts = xs
            if dp.degree >= 1:
                crit = dp.derivative()
                roots = np.roots(crit.coeffs[::-1]) if crit.degree >= 1 else np.array([])
                roots = roots[np.isreal(roots)].real if roots.size else roots
                pts = np.concatenate([xs, roots[(roots >= 0) & (roots <= 1)]])
            worst = min(worst, float(np.min(np.abs(dp(pts)))))
        return worst

    def cells(self, n):
        return np.floor(self.coeffs * np.ldexp(1.0, level(n))).astype(np.int64)

    def to_json(self):
        return {"order": self.order,
                "atoms": [{"coeffs": [float(c) for c in row], "weight": float(w)}
                          for row, w in zip(self.coeffs, self.weights)]}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls([a["coeffs"] for a in doc["atoms"]], [a["weight"] for a in doc["atoms"]],
                   doc.get("order"))

    def __repr__(self):
        return f"PolyMeasure({len(self)} atoms, order {self.order})"


# --------------------------------------------------------------------------
# entropy

def dyadic_entropy(m: RealMeasure, n) -> float:
    """``H(m, D_n)``: Shannon entropy of the level-``n`` dyadic histogram."""
    if n < 0:
        raise ValueError("level must be >= 0")
    _, masses = m.cell_masses(n)
    return _entropy_of_masses(masses)


def conditional_dyadic_entropy(m: RealMeasure, fine, coarse) -> float:
    """``H(m, D_fine | D_coarse) = sum_E m(E) H(m_E, D_fine)``."""
    fine, coarse = level(fine), level(coarse)
    if not fine >= coarse >= 0:
        raise ValueError("need fine >= coarse >= 0")
    if fine == coarse:
        return 0.0
    cells, masses = m.cell_masses(fine)
    parents = cells >> (fine - coarse)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(parents)) + 1])
    ends = np.concatenate([starts[1:], [len(parents)]])
    terms = []
    for s, e in zip(starts, ends):
        block = masses[s:e]
        tot = math.fsum(block.tolist())
        if e - s > 1:
            terms.append(tot * _entropy_of_masses(block / tot))
    return math.fsum(terms)


def poly_dyadic_entropy(nu: PolyMeasure, n) -> float:
    """Entropy of ``nu`` on the coefficient-space dyadic partition."""
    cells = nu.cells(n)
    _, inv = np.unique(cells, axis=0, return_inverse=True)
    masses = np.bincount(inv.reshape(-1), weights=nu.weights)
    return _entropy_of_masses(masses)


def _cell_slice(m, x, n):
    # cell boundaries c / 2^n are exact doubles, so this agrees with cell_index
    c = float(cell_index(x, n))
    lo = np.searchsorted(m.positions, np.ldexp(c, -level(n)), side="left")
    hi = np.searchsorted(m.positions, np.ldexp(c + 1.0, -level(n)), side="left")
    return int(lo), int(hi)


def component(m: RealMeasure, x: float, n) -> RealMeasure:
    """``m`` conditioned on the level-``n`` dyadic cell containing ``x``."""
    lo, hi = _cell_slice(m, x, n)
    if hi <= lo:
        raise EmptyCell(f"level-{level(n)} cell of x = {x} carries no mass")
    w = m.weights[lo:hi]
    return RealMeasure(m.positions[lo:hi], w / math.fsum(w.tolist()), merge=False)


def poly_component(nu: PolyMeasure, p, n) -> PolyMeasure:
    """``nu`` conditioned on the coefficient-space dyadic cell of ``p``."""
    p = p if isinstance(p, Polynomial) else Polynomial(p)
    target = np.floor(p.padded(nu.order) * np.ldexp(1.0, level(n))).astype(np.int64)
    sel = np.all(nu.cells(n) == target[None, :], axis=1)
    if not np.any(sel):
        raise EmptyCell(f"level-{level(n)} cell of {p} carries no mass")
    w = nu.weights[sel]
    return PolyMeasure(list(nu.coeffs[sel]), w / math.fsum(w.tolist()), nu.order)


def convolve(nu: PolyMeasure, theta: RealMeasure, budget=None) -> RealMeasure:
    """Push-forward of ``nu x theta`` under ``(p, x) -> p(x)``."""
    budget = config.resolve_budget(budget)
    size = len(nu) * len(theta)
    if size > budget:
        raise BudgetExceeded(f"convolution needs {size} atoms (budget {budget})")
    vals = nu.evaluate(theta.positions).reshape(-1)
    w = (nu.weights[:, None] * theta.weights[None, :]).reshape(-1)
    return RealMeasure(vals, w)


def add_convolve(a: RealMeasure, b: RealMeasure, budget=None) -> RealMeasure:
    """Ordinary convolution: push-forward of ``a x b`` under addition."""
    budget = config.resolve_budget(budget)
    if len(a) * len(b) > budget:
        raise BudgetExceeded(f"convolution needs {len(a) * len(b)} atoms (budget {budget})")
    vals = (a.positions[:, None] + b.positions[None, :]).reshape(-1)
    w = (a.weights[:, None] * b.weights[None, :]).reshape(-1)
    return RealMeasure(vals, w)


def scale_translate(m: RealMeasure, c: float, w: float = 0.0) -> RealMeasure:
    """Image under ``x -> c x + w``."""
    if c == 0:
        raise ZeroScale("scale factor must be non-zero")
    return RealMeasure(c * m.positions + w, m.weights.copy(), merge=False)


def ball_mass(m: RealMeasure, x, r):
    """Mass of the closed ball ``[x - r, x + r]`` (vectorized over ``x`` and ``r``)."""
    if np.any(np.asarray(r) < 0):
        raise ValueError("radius must be >= 0")
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    lo = np.searchsorted(m.positions, x - r, side="left")
    hi = np.searchsorted(m.positions, x + r, side="right")
    cum = m.cumulative
    out = cum[hi] - cum[lo]
    return float(out) if out.ndim == 0 else out


def mixture(measures, coefficients) -> RealMeasure:
    pos = np.concatenate([m.positions for m in measures])
    w = np.concatenate([c * m.weights for m, c in zip(measures, coefficients)])
    return RealMeasure(pos, w)


# --------------------------------------------------------------------------
# self-conformal discretization

def guard_levels(ifs) -> int:
    return int(math.ceil(math.log2(ifs.c_bound))) + 2


def discretize_self_conformal(ifs, resolution: int, budget=None) -> RealMeasure:
    """Atoms ``(phi_u(0), p_u)`` over the cut-set at ``resolution`` plus a guard."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    cs = ifs.cut_set(resolution + guard_levels(ifs), budget)
    return RealMeasure(np.array(cs.positions), np.array(cs.weights))
