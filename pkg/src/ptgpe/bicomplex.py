"""Doubly-complexified scalars.

A bicomplex value carries four real components (rr, ri, ir, ii).  It is the
result of letting the real and imaginary parts of an ordinary complex
quantity become complex themselves: with two commuting imaginary units
i and j (i**2 = j**2 = -1),

    w = (rr + i*ri) + j*(ir + i*ii).

Internally the value is stored as the pair of complex numbers
z1 = rr + i*ri and z2 = ir + i*ii, so w = z1 + j*z2.  All ring operations
are exact component arithmetic.  "Recombination" fuses the two units
(j -> i) and returns the ordinary complex number

    (rr - ii) + i*(ri + ir),

which is the physically plotted value; it is a ring homomorphism.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass


@dataclass(frozen=True)
class BicomplexValue:
    """Four real components of a doubly-complexified scalar."""

    rr: float
    ri: float
    ir: float
    ii: float

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_parts(cls, z1: complex, z2: complex = 0j) -> "BicomplexValue":
        """Build from the complex pair w = z1 + j*z2."""
        z1 = complex(z1)
        z2 = complex(z2)
        return cls(z1.real, z1.imag, z2.real, z2.imag)

    @classmethod
    def from_complex(cls, z: complex) -> "BicomplexValue":
        """Embed an ordinary complex number as rr + j*ir."""
        z = complex(z)
        return cls(z.real, 0.0, z.imag, 0.0)

    # -- component views ---------------------------------------------------

    @property
    def z1(self) -> complex:
        return complex(self.rr, self.ri)

    @property
    def z2(self) -> complex:
        return complex(self.ir, self.ii)

    def recombine(self) -> complex:
        """Fuse the two imaginary units: (rr - ii) + i*(ri + ir)."""
        return complex(self.rr - self.ii, self.ri + self.ir)

    def conj_j(self) -> "BicomplexValue":
        """Conjugate with respect to the second unit: z1 - j*z2."""
        return BicomplexValue.from_parts(self.z1, -self.z2)

    def max_abs(self) -> float:
        return max(abs(self.rr), abs(self.ri), abs(self.ir), abs(self.ii))

    # -- ring arithmetic ---------------------------------------------------

    @staticmethod
    def _coerce(other):
        if isinstance(other, BicomplexValue):
            return other
        if isinstance(other, (int, float, complex)):
            return BicomplexValue.from_parts(complex(other), 0j)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return BicomplexValue.from_parts(self.z1 + o.z1, self.z2 + o.z2)

    __radd__ = __add__

    def __neg__(self):
        return BicomplexValue.from_parts(-self.z1, -self.z2)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return BicomplexValue.from_parts(self.z1 - o.z1, self.z2 - o.z2)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return BicomplexValue.from_parts(
            self.z1 * o.z1 - self.z2 * o.z2,
            self.z1 * o.z2 + self.z2 * o.z1,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        # w / v = w * conj_j(v) / (v * conj_j(v)); the denominator is the
        # complex number v.z1**2 + v.z2**2, zero exactly on zero divisors.
        den = o.z1 * o.z1 + o.z2 * o.z2
        if den == 0:
            raise ZeroDivisionError("bicomplex division by a zero divisor")
        num = self * o.conj_j()
        return BicomplexValue.from_parts(num.z1 / den, num.z2 / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def isclose(self, other, tol: float = 1e-12) -> bool:
        d = self - self._coerce(other)
        return d.max_abs() <= tol

    def __repr__(self):
        return (
            f"BicomplexValue(rr={self.rr:.12g}, ri={self.ri:.12g}, "
            f"ir={self.ir:.12g}, ii={self.ii:.12g})"
        )


def recombine_kappa(k: BicomplexValue) -> complex:
    """Real and imaginary parts of the physical decay constant.

    Returns (rr - ii) + i*(ri + ir).  For a value whose ri, ir, ii
    components vanish this is simply rr.
    """
    return k.recombine()


def bicomplex_sqrt(w: BicomplexValue) -> BicomplexValue:
    """Principal square root through the idempotent decomposition."""
    p = w.z1 - 1j * w.z2
    m = w.z1 + 1j * w.z2
    sp = cmath.sqrt(p)
    sm = cmath.sqrt(m)
    return BicomplexValue.from_parts((sp + sm) / 2, 1j * (sp - sm) / 2)


def bicomplex_exp(w: BicomplexValue) -> BicomplexValue:
    """Exponential through the idempotent decomposition."""
    ep = cmath.exp(w.z1 - 1j * w.z2)
    em = cmath.exp(w.z1 + 1j * w.z2)
    return BicomplexValue.from_parts((ep + em) / 2, 1j * (ep - em) / 2)
