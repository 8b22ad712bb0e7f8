"""Dimension estimators: entropy, local and box-counting dimension, H(p) and chi."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import config, kernels
from .errors import InvalidDistribution, ZeroMass
from .ifs import IFS
from .measure import RealMeasure, ball_mass, discretize_self_conformal, dyadic_entropy

BIRKHOFF_LENGTH = 200
BIRKHOFF_SAMPLES = 10_000
_BIRKHOFF_CHUNK = 500


@dataclass(frozen=True)
class DimReport:
    estimate: float
    levels_used: tuple = field(default=())
    extrapolation_slope: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.estimate <= 1.5:
            raise ValueError(f"estimate {self.estimate} outside [0, 1.5]")
        ns = [n for n, _ in self.levels_used]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("levels must be strictly increasing")

    def to_json(self):
        return {
            "estimate": self.estimate,
            "extrapolation_slope": self.extrapolation_slope,
            "levels_used": [[n, v] for n, v in self.levels_used],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


def _slope(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        return 0.0
    xc = xs - xs.mean()
    return float(np.dot(xc, ys - ys.mean()) / np.dot(xc, xc))


def _top_half(levels):
    return levels[len(levels) // 2:]


def _clip(v):
    return float(min(1.5, max(0.0, v)))


def shannon_entropy(probs) -> float:
    """Base-2 entropy of a probability vector with positive entries."""
    p = np.asarray(probs, dtype=float).reshape(-1)
    if p.size == 0 or np.any(~(p > 0)) or abs(math.fsum(p.tolist()) - 1.0) > 1e-10:
        raise InvalidDistribution(f"not a positive probability vector: {p.tolist()}")
    p = np.sort(p)[::-1]
    return max(0.0, -math.fsum((p * np.log2(p)).tolist()))


def lyapunov(ifs: IFS, resolution: int = 16, budget=None) -> float:
    """``chi`` by quadrature against the discretized self-conformal measure."""
    mu = discretize_self_conformal(ifs, resolution, budget)
    terms = []
    for i, p in enumerate(ifs.probs):
        _, d = kernels.point_chain(ifs.program, [i], mu.positions)
        logs = mu.weights * np.log2(np.abs(d))
        terms.append(p * math.fsum(np.sort(logs).tolist()))
    return -math.fsum(terms)


@dataclass(frozen=True)
class BirkhoffEstimate:
    value: float
    stderr: float
    bias_bound: float
    samples: int
    length: int


def _birkhoff_chunk(args):
    ifs, seed, start, stop, length = args
    cum = np.cumsum(ifs.probs)
    cum[-1] = 1.0
    words = np.empty((stop - start, length), dtype=np.int64)
    for row, idx in enumerate(range(start, stop)):
        rng = np.random.default_rng([seed, idx])
        words[row] = np.searchsorted(cum, rng.random(length), side="right")
    np.minimum(words, ifs.alphabet_size - 1, out=words)
    _, logd = kernels.log_derivative_chain(ifs.program, words,
                                           np.full(stop - start, length), 0.0)
    return -logd / length


def lyapunov_birkhoff(ifs: IFS, samples: int = BIRKHOFF_SAMPLES, length: int = BIRKHOFF_LENGTH,
                      seed: int = 0) -> BirkhoffEstimate:
    """``-(1/n) log2 |phi'_{w|n}(0)|`` averaged over random words ``w``.

    Sample ``i`` draws its letters from ``default_rng([seed, i])`` so the
    result does not depend on how the work is split across threads.
    """
    if samples < 1 or length < 1:
        raise ValueError("samples and length must be positive")
    chunks = [(ifs, seed, s, min(s + _BIRKHOFF_CHUNK, samples), length)
              for s in range(0, samples, _BIRKHOFF_CHUNK)]
    vals = np.concatenate(config.ordered_map(_birkhoff_chunk, chunks))
    mean = math.fsum(vals.tolist()) / samples
    stderr = float(np.std(vals, ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return BirkhoffEstimate(mean, stderr, math.log2(ifs.c_bound) / length, samples, length)


def theorem_rhs(ifs: IFS, resolution: int = 16) -> float:
    """``min(1, H(p) / chi)``."""
    return min(1.0, shannon_entropy(ifs.probs) / lyapunov(ifs, resolution))


def _as_measure(source, n_max, budget):
    if isinstance(source, RealMeasure):
        return source
    return discretize_self_conformal(source, n_max, budget)


def entropy_dimension(source, n_max: int = 16, budget=None) -> DimReport:
    """Slope of ``H(mu, D_n)`` against ``n`` over the upper half of ``n = 4..n_max``.

    ``source`` is an IFS (discretized at resolution ``n_max``) or a
    ready-made :class:`RealMeasure`.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    mu = _as_measure(source, n_max, budget)
    ns = list(range(4, n_max + 1))
    hs = [dyadic_entropy(mu, n) for n in ns]
    top = _top_half(list(zip(ns, hs)))
    slope = _slope([n for n, _ in top], [h for _, h in top])
    return DimReport(_clip(slope), tuple((n, h / n) for n, h in zip(ns, hs)), slope)


def local_dimension(source, x: float, radii: Sequence[float], resolution: int = 16,
                    budget=None) -> float:
    """Slope of ``log2 mu(B(x, r))`` against ``log2 r``."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    mu = _as_measure(source, resolution, budget)
    masses = np.atleast_1d(ball_mass(mu, np.full(radii.size, float(x)), radii))
    if np.any(masses <= 0):
        r = float(radii[np.argmax(masses <= 0)])
        raise ZeroMass(f"ball of radius {r} about {x} holds no atoms")
    return _clip(_slope(np.log2(radii), np.log2(masses)))


def _covered_cells(lo, hi, j):
    """Number of level-``j`` cells in [0, 1) meeting a union of closed intervals."""
    scale = np.ldexp(1.0, j)
    top = (1 << j) - 1
    a = np.clip(np.floor(lo * scale), 0, top).astype(np.int64)
    b = np.clip(np.floor(hi * scale), 0, top).astype(np.int64)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    # a cell is new if it lies beyond every earlier interval's reach
    reach = np.concatenate([[-1], np.maximum.accumulate(b)[:-1]])
    return int(np.sum(np.maximum(0, b - np.maximum(a - 1, reach))))


def box_counting(ifs: IFS, n: int = 14, budget=None) -> DimReport:
    """Slope of ``log2 N_j`` against ``j``, where ``N_j`` counts level-``j`` cells
    meeting the certified images ``phi_u([0, 1])`` for ``u`` in the cut-set at ``j``."""
    if n < 4:
        raise ValueError("n must be >= 4")
    js = list(range(1, n + 1))
    logs = []
    for j in js:
        cs = ifs.cut_set(j, budget)
        ones = np.ones(len(cs))
        vlo, vhi, _, _ = kernels.interval_chain_words(ifs.program, cs.letters, cs.lengths,
                                                      0.0 * ones, ones)
        logs.append(math.log2(_covered_cells(vlo, vhi, j)))
    top = _top_half(list(zip(js, logs)))
    slope = _slope([j for j, _ in top], [v for _, v in top])
    return DimReport(_clip(slope), tuple((j, v / j) for j, v in zip(js, logs)), slope)
