"""Truncated formal power series in one and two variables.

A two-variable series stores the rectangular grid f[m, h] of the expansion

    sum_{m,h} f[m, h] * t^m * z^h / h!

i.e. the z-direction carries an implicit 1/h! normalisation.  All operator
actions below document their index arithmetic under this convention.
Values are double-precision complex; scalars never overflow through the
factorials because the 1/h! stays implicit.

q-power factors q^(n(n-1)/2) are evaluated as exp(e * log q) rather than
by repeated multiplication, so exponents in the hundreds keep full
relative precision.
"""

from __future__ import annotations

import cmath
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, EmptySeriesError


def qpow(q: complex, exponent: float) -> complex:
    """q**exponent via exp of log; exact branch for integer exponents."""
    if exponent == 0:
        return 1.0 + 0.0j
    return cmath.exp(exponent * cmath.log(q))


def _as_complex_vector(coeffs: Iterable[complex]) -> np.ndarray:
    arr = np.array(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                   dtype=np.complex128, copy=True)
    if arr.ndim != 1:
        raise DataError("coefficient sequence must be one-dimensional")
    return arr


class UnivariateSeries:
    """A truncated series sum_{m=0..M} c_m t^m."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[complex]):
        arr = _as_complex_vector(coeffs)
        if arr.size == 0:
            raise EmptySeriesError("a series needs at least the constant coefficient")
        if not np.all(np.isfinite(arr)):
            raise DataError("series coefficients must be finite")
        arr.setflags(write=False)
        self.coeffs = arr

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def padded(self, order: int) -> "UnivariateSeries":
        """Same series viewed at truncation `order` (zero-padded or cut)."""
        if order == self.order:
            return self
        out = np.zeros(order + 1, dtype=np.complex128)
        n = min(order, self.order) + 1
        out[:n] = self.coeffs[:n]
        return UnivariateSeries(out)

    def eval(self, t: complex) -> complex:
        """Horner evaluation of the stored polynomial."""
        acc = 0.0 + 0.0j
        for c in self.coeffs[::-1]:
            acc = acc * t + c
        return acc

    def __repr__(self) -> str:
        return f"UnivariateSeries(order={self.order})"


class BivariateSeries:
    """A truncated double series with grid f[m, h] under the z^h/h! convention."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: np.ndarray):
        arr = np.array(coeffs, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise DataError("coefficient grid must be a non-empty 2-d array")
        if not np.all(np.isfinite(arr)):
            raise DataError("series coefficients must be finite")
        arr.setflags(write=False)
        self.coeffs = arr

    @classmethod
    def zero(cls, order_t: int, order_z: int) -> "BivariateSeries":
        return cls(np.zeros((order_t + 1, order_z + 1), dtype=np.complex128))

    @property
    def truncation(self) -> tuple[int, int]:
        return self.coeffs.shape[0] - 1, self.coeffs.shape[1] - 1

    def column(self, h: int) -> UnivariateSeries:
        """The t-series multiplying z^h/h!."""
        return UnivariateSeries(self.coeffs[:, h])

    def __repr__(self) -> str:
        m, h = self.truncation
        return f"BivariateSeries(order_t={m}, order_z={h})"


class Polynomial:
    """A sparse polynomial sum_s b_s z^s with strictly increasing degrees."""

    __slots__ = ("terms",)

    def __init__(self, terms: Sequence[tuple[int, complex]]):
        degs = [int(s) for s, _ in terms]
        if any(s < 0 for s in degs):
            raise DataError("polynomial degrees must be nonnegative")
        if any(b >= a for a, b in zip(degs[1:], degs)):
            raise DataError("polynomial degrees must be strictly increasing")
        self.terms = tuple((int(s), complex(c)) for s, c in terms)

    @classmethod
    def constant(cls, c: complex) -> "Polynomial":
        return cls([(0, c)])

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.terms)

    def eval(self, z: complex) -> complex:
        return sum(c * z**s for s, c in self.terms)

    def __repr__(self) -> str:
        return f"Polynomial({list(self.terms)!r})"


# ---------------------------------------------------------------------------
# operator actions


def mul_poly_z(p: Polynomial, f: BivariateSeries) -> BivariateSeries:
    """Multiply by a polynomial in z.

    Under the z^h/h! convention, z^s * z^h/h! = [(h+s)!/h!] * z^(h+s)/(h+s)!,
    so each monomial contributes f[m, h] * (h+s)!/h! at column h+s.  Columns
    pushed past the truncation are dropped.
    """
    m_max, h_max = f.truncation
    out = np.zeros_like(f.coeffs)
    for s, c in p.terms:
        if s > h_max:
            continue
        for h in range(0, h_max - s + 1):
            ratio = 1.0
            for i in range(h + 1, h + s + 1):  # (h+s)!/h!
                ratio *= i
            out[:, h + s] += c * ratio * f.coeffs[:, h]
    return BivariateSeries(out)


def dilate_t(f, q: complex, power: int):
    """Apply the composite dilation (t sigma_q)^p on the t variable.

    One application maps t^m to q^m t^(m+1); p-fold composition maps the
    coefficient c_m to q^(p*m + p(p-1)/2) c_m at index m+p.  Indices above
    the truncation are dropped.  Accepts either series type.
    """
    if power < 0:
        raise DataError("dilation power must be nonnegative")
    if power == 0:
        return f
    arr = f.coeffs
    out = np.zeros_like(arr)
    m_max = arr.shape[0] - 1
    half = power * (power - 1) / 2.0
    for m in range(0, m_max - power + 1):
        out[m + power] = qpow(q, power * m + half) * arr[m]
    return UnivariateSeries(out) if isinstance(f, UnivariateSeries) else BivariateSeries(out)


def euler_z(f: BivariateSeries, power: int) -> BivariateSeries:
    """Apply (z d/dz + 1)^r: multiplies column h by (h+1)^r."""
    if power < 0:
        raise DataError("operator power must be nonnegative")
    if power == 0:
        return f
    _, h_max = f.truncation
    factors = np.array([(h + 1.0) ** power for h in range(h_max + 1)])
    return BivariateSeries(f.coeffs * factors[np.newaxis, :])


def diff_z(f: BivariateSeries, order: int) -> BivariateSeries:
    """k-th z-derivative: under the /h! convention a pure column shift.

    Result column h is input column h+k; the z-truncation drops to H-k.
    """
    _, h_max = f.truncation
    if order < 0:
        raise DataError("derivative order must be nonnegative")
    if order > h_max:
        raise EmptySeriesError(f"cannot take {order} z-derivatives of order-{h_max} series")
    if order == 0:
        return f
    return BivariateSeries(f.coeffs[:, order:])


def scale_z(f: BivariateSeries, q: complex, m1: int) -> BivariateSeries:
    """Substitute z -> z q^(-m1): multiplies column h by q^(-m1*h)."""
    if m1 < 0:
        raise DataError("scale exponent must be nonnegative")
    if m1 == 0:
        return f
    _, h_max = f.truncation
    factors = np.array([qpow(q, -m1 * h) for h in range(h_max + 1)])
    return BivariateSeries(f.coeffs * factors[np.newaxis, :])


def borel_q_formal(f: UnivariateSeries, q: complex) -> UnivariateSeries:
    """Coefficient map c_n -> c_n / q^(n(n-1)/2) (order-1 transform)."""
    out = np.array([f.coeffs[n] / qpow(q, n * (n - 1) / 2.0) for n in range(f.order + 1)])
    return UnivariateSeries(out)


def laplace_q_formal(g: UnivariateSeries, q: complex) -> UnivariateSeries:
    """Coefficient map c_n -> q^(n(n-1)/2) c_n; inverse of borel_q_formal."""
    out = np.array([g.coeffs[n] * qpow(q, n * (n - 1) / 2.0) for n in range(g.order + 1)])
    return UnivariateSeries(out)
