"""Closed real intervals with outward rounding by relative inflation.

Directed rounding modes are not available from Python, so every operation
widens its result by ``EPS`` relative to the magnitudes involved.
"""
from dataclasses import dataclass

from .errors import DivisionNearZero

EPS = 1e-14
DIV_GUARD = 1e-12


def _down(x, scale):
    return x - scale * EPS


def _up(x, scale):
    return x + scale * EPS


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x):
        return cls(float(x), float(x))

    @classmethod
    def coerce(cls, v):
        return v if isinstance(v, Interval) else cls.point(v)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def mag(self):
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self):
        """Smallest absolute value in the interval."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x, slack=0.0):
        return self.lo - slack <= x <= self.hi + slack

    def subset_of(self, other, slack=0.0):
        return other.lo - slack <= self.lo and self.hi <= other.hi + slack

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def abs(self):
        return Interval(self.mig, self.mag)

    def __add__(self, other):
        o = Interval.coerce(other)
        return Interval(_down(self.lo + o.lo, abs(self.lo) + abs(o.lo)),
                        _up(self.hi + o.hi, abs(self.hi) + abs(o.hi)))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = Interval.coerce(other)
        return Interval(_down(self.lo - o.hi, abs(self.lo) + abs(o.hi)),
                        _up(self.hi - o.lo, abs(self.hi) + abs(o.lo)))

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        o = Interval.coerce(other)
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        lo, hi = min(p), max(p)
        return Interval(_down(lo, abs(lo)), _up(hi, abs(hi)))

    __rmul__ = __mul__

    def reciprocal(self):
        if self.lo <= DIV_GUARD and self.hi >= -DIV_GUARD:
            raise DivisionNearZero(f"denominator interval {self} meets zero")
        lo, hi = 1.0 / self.hi, 1.0 / self.lo
        return Interval(_down(lo, abs(lo)), _up(hi, abs(hi)))

    def __truediv__(self, other):
        return self * Interval.coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return Interval.coerce(other) * self.reciprocal()

    def __pow__(self, k):
        if k == 0:
            return Interval(1.0, 1.0)
        a, b = self.lo ** k, self.hi ** k
        if k % 2 == 1 or self.lo >= 0.0:
            lo, hi = a, b
        elif self.hi <= 0.0:
            lo, hi = b, a
        else:
            lo, hi = 0.0, max(a, b)
        return Interval(_down(lo, k * abs(lo)), _up(hi, k * abs(hi)))

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


IntervalBound = Interval
