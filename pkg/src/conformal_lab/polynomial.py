"""Real polynomials in the monomial basis, coefficients low degree first."""
from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True, eq=False)
class Polynomial:
    coeffs: np.ndarray

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_taylor(cls, taylor_coeffs, a):
        """Expand ``sum c_j (X - a)^j`` into monomials."""
        k = len(taylor_coeffs) - 1
        out = np.zeros(k + 1)
        for j, c in enumerate(taylor_coeffs):
            for i in range(j + 1):
                out[i] += c * comb(j, i) * (-a) ** (j - i)
        return cls(out)

    @classmethod
    def identity(cls):
        return cls([0.0, 1.0])

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            out = out * x + c
        return out if out.ndim else float(out)

    def derivative(self):
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, self.degree + 1))

    def padded(self, k):
        """Coefficient vector of length ``k + 1``; raises if the degree exceeds ``k``."""
        c = self.coeffs
        if len(c) > k + 1:
            if np.any(c[k + 1:] != 0.0):
                raise ValueError(f"degree {self.degree} exceeds {k}")
            c = c[: k + 1]
        return np.concatenate([c, np.zeros(k + 1 - len(c))])

    def norm2(self):
        return float(np.sqrt(np.sum(self.coeffs ** 2)))

    def __add__(self, other):
        k = max(self.degree, other.degree)
        return Polynomial(self.padded(k) + other.padded(k))

    def __sub__(self, other):
        k = max(self.degree, other.degree)
        return Polynomial(self.padded(k) - other.padded(k))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        k = max(self.degree, other.degree)
        return bool(np.array_equal(self.padded(k), other.padded(k)))

    def __hash__(self):
        c = np.trim_zeros(self.coeffs, "b")
        return hash(tuple(c))

    def tolist(self):
        return [float(c) for c in self.coeffs]

    def __repr__(self):
        return f"Polynomial({self.tolist()})"
