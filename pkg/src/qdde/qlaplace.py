"""Jacobi theta kernel, log-spiral domain geometry and the discrete q-Laplace sum.

The theta function used throughout is the bilateral series

    Theta(x) = sum_{n in Z} q^(-n(n-1)/2) x^n,       |q| > 1, x != 0,

which satisfies Theta(q x) = q x Theta(x) and vanishes exactly on -q^Z.
The transform of a function phi known on the discrete spiral lambda*q^Z is

    L(phi)(t) = sum_{m in Z} phi(q^m lambda) / Theta(q^m lambda / t),

convergent for t inside the spiral domain: |t| below a radius and
|1 + lambda/(t q^k)| > delta for every integer k.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DataError, DomainError, TruncationWindowError

Evaluator = Callable[[int, complex], complex]
"""Signature phi(m, tau): value of phi at tau = q^m * lambda."""


@dataclass(frozen=True)
class QParameter:
    """The base q, |q| > 1, with its angle given either directly or as 2*pi/(b*r2).

    Exactly one of `b` and `angle` must be supplied.  The b-form keeps the
    geometric hypotheses on the small divisors checkable: the rays
    arg(x^r2 q^(r2 l)) then take only b distinct directions.
    """

    modulus: float
    b: int | None = None
    angle: float | None = None
    r2: int = 1

    def __post_init__(self):
        if not self.modulus > 1.0:
            raise DataError("q must have modulus > 1")
        if (self.b is None) == (self.angle is None):
            raise DataError("exactly one of b / angle must be given")
        if self.b is not None and self.b < 1:
            raise DataError("b must be a positive integer")
        if self.r2 < 1:
            raise DataError("r2 must be >= 1")

    @property
    def theta_angle(self) -> float:
        """The argument of q, reduced to (-pi, pi]."""
        raw = 2.0 * math.pi / (self.b * self.r2) if self.b is not None else self.angle
        return math.remainder(raw, 2.0 * math.pi)

    @property
    def value(self) -> complex:
        a = self.theta_angle
        if a == 0.0:
            return complex(self.modulus, 0.0)
        return self.modulus * cmath.exp(1j * a)

    @property
    def log(self) -> complex:
        return complex(math.log(self.modulus), self.theta_angle)


@dataclass(frozen=True)
class DomainSpec:
    """Spiral-domain data: direction lambda, clearance delta, radius, V sample.

    `r0 = None` means the radius is to be derived later from a fitted growth
    constant; membership tests require a resolved radius.  V is an open set
    used only through sups/infs, represented here by a finite sample whose
    density is the caller's accuracy knob.
    """

    lam: complex
    delta: float
    r0: float | None
    v_sample: tuple[complex, ...]
    k_window: int = 48
    epsilon_sector: float = 0.1

    def __post_init__(self):
        if self.lam == 0:
            raise DataError("lambda must be nonzero")
        if not 0.0 < self.delta < 1.0:
            raise DataError("delta must lie in (0, 1)")
        if self.r0 is not None and not self.r0 > 0:
            raise DataError("r0 must be positive")
        if not self.v_sample:
            raise DataError("V must be sampled by at least one point")
        if any(v == 0 for v in self.v_sample):
            raise DataError("V sample points must be nonzero")

    def with_r0(self, r0: float) -> "DomainSpec":
        return DomainSpec(self.lam, self.delta, r0, self.v_sample,
                          self.k_window, self.epsilon_sector)

    def lambda_index(self) -> int:
        """Index of lambda in the V sample (it must be a sample point)."""
        for i, v in enumerate(self.v_sample):
            if abs(v - self.lam) <= 1e-12 * max(1.0, abs(self.lam)):
                return i
        raise DataError("lambda is not among the V sample points")


@dataclass(frozen=True)
class SpiralGrid:
    """Function values on the discrete spiral {x q^l}, indexed (point, l, h)."""

    base_points: tuple[complex, ...]
    l_min: int
    l_max: int
    values: np.ndarray  # complex, shape (len(base_points), l_max-l_min+1, H+1)
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        expect = (len(self.base_points), self.l_max - self.l_min + 1)
        if self.values.shape[:2] != expect:
            raise DataError(f"grid shape {self.values.shape} does not match {expect}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("spiral grid values must be finite")

    @property
    def h_count(self) -> int:
        return self.values.shape[2]

    def l_index(self, l: int) -> int:
        if not self.l_min <= l <= self.l_max:
            raise DataError(f"l={l} outside grid window [{self.l_min}, {self.l_max}]")
        return l - self.l_min

    def column(self, base_index: int, h: int) -> np.ndarray:
        """Values along l for one base point and one h."""
        return self.values[base_index, :, h]

    def sup_over_base(self) -> np.ndarray:
        """w[l_idx, h] = max over base points of |value|; the sup over V."""
        return np.max(np.abs(self.values), axis=0)

    def evaluator(self, base_index: int, h: int) -> Evaluator:
        col = self.values[base_index, :, h]

        def phi(m: int, tau: complex) -> complex:
            if not self.l_min <= m <= self.l_max:
                raise TruncationWindowError(
                    f"spiral grid window [{self.l_min}, {self.l_max}] exhausted at m={m}")
            return col[m - self.l_min]

        return phi


# ---------------------------------------------------------------------------
# theta evaluation


def theta_eval(x: complex, q: QParameter, tail_tol: float = 1e-12) -> complex:
    """The bilateral theta sum at x.

    Termination: three consecutive terms on each side below tail_tol times
    the running partial sum.  The terms peak near n = log|x|/log|q| and
    decay super-exponentially beyond, so the rule always triggers.
    """
    if x == 0:
        raise DomainError("theta is undefined at 0")
    if tail_tol <= 0:
        raise DataError("tail_tol must be positive")
    return complex(_kernels.theta_sum(q.log, cmath.log(x), tail_tol, _kernels.N_CAP))


def theta_lower_envelope(m: int, lam: complex, t: complex, q: QParameter,
                         delta: float, tail_tol: float = 1e-12) -> float:
    """delta * sum_n |q|^(-n(n-1)/2) |q^m lambda / t|^n.

    The modulus of theta on the spiral domain stays above a fixed multiple
    of this envelope; the multiple is measured, not assumed (see
    estimate_theta_floor).
    """
    if t == 0:
        raise DomainError("envelope undefined at t = 0")
    arg_abs = abs(lam / t) * q.modulus**m
    return delta * _kernels.theta_abs_sum(
        math.log(q.modulus), math.log(arg_abs), tail_tol, _kernels.N_CAP)


def estimate_theta_floor(d: DomainSpec, q: QParameter, t_samples,
                         m_range: range = range(-10, 11),
                         tail_tol: float = 1e-12) -> float:
    """Measured floor constant: min over (m, t) of |Theta(q^m lam/t)| / envelope."""
    best = math.inf
    for t in t_samples:
        for m in m_range:
            val = abs(theta_eval(q.value**m * d.lam / t, q, tail_tol))
            env = theta_lower_envelope(m, d.lam, t, q, d.delta, tail_tol)
            best = min(best, val / env)
    return best


# ---------------------------------------------------------------------------
# spiral domain


def spiral_margin(t: complex, d: DomainSpec, q: QParameter,
                  tail_tol: float = 1e-12) -> float:
    """inf over k in Z of |1 + lambda/(t q^k)|, windowed with certified tails.

    The window is centred where |lambda/(t q^k)| is near 1 and widened until
    the ratio is below tail_tol at the top (values there lie within tail_tol
    of the limit 1, accounted for by the candidate 1 - tail) and above 2 at
    the bottom (values there exceed 1 and grow).
    """
    if t == 0:
        raise DomainError("spiral margin undefined at t = 0")
    ratio = d.lam / t
    logq = math.log(q.modulus)
    k_star = round(math.log(abs(ratio)) / logq)
    width = max(d.k_window, math.ceil(-math.log(tail_tol) / logq) + 2)
    windowed = _kernels.spiral_margin_window(ratio, q.log, k_star - width, k_star + width)
    top_tail = abs(ratio) * q.modulus ** (-(k_star + width))
    return min(float(windowed), 1.0 - top_tail)


def in_spiral_domain(t: complex, d: DomainSpec, q: QParameter,
                     tail_tol: float = 1e-12) -> tuple[bool, float]:
    """Whether t lies in the spiral domain; also returns the attained margin."""
    margin = spiral_margin(t, d, q, tail_tol)
    if d.r0 is None:
        raise DomainError("domain radius is unresolved (r0 = auto); fit it first")
    return (margin > d.delta and abs(t) < d.r0), margin


# ---------------------------------------------------------------------------
# the discrete transform


def q_laplace_eval(phi: Evaluator, t: complex, d: DomainSpec, q: QParameter,
                   tail_tol: float = 1e-12, l_window: int = 64) -> complex:
    """sum over m in Z of phi(q^m lambda) / Theta(q^m lambda / t).

    Bilateral truncation: three consecutive terms on each side below
    tail_tol times the partial sum.  The upward tail decays geometrically
    like (|t| / (|lambda| |q|^(1/2) T))^m once phi grows no faster than
    |q|^(m^2/2) (1/T)^m; the downward tail decays like |q|^(-m) times the
    envelope growth of theta.  A hard cap at l_window raises if it binds.
    """
    inside, margin = in_spiral_domain(t, d, q, tail_tol)
    if not inside:
        raise DomainError(
            f"t={t} outside spiral domain (margin {margin:.6g}, delta {d.delta})")
    log_ratio = cmath.log(d.lam / t)
    qlog = q.log

    def term(m: int) -> complex:
        tau = d.lam * _kernels_qpow(qlog, m)
        theta = _kernels.theta_sum(qlog, log_ratio + m * qlog, tail_tol, _kernels.N_CAP)
        return phi(m, tau) / theta

    total = term(0)
    last = 0.0
    for direction in (+1, -1):
        small = 0
        m = 0
        while small < 3:
            m += direction
            if abs(m) > l_window:
                raise TruncationWindowError(
                    f"transform sum hit the window cap {l_window} "
                    f"(last term {last:.3e})", last_term=last)
            tm = term(m)
            total += tm
            last = abs(tm)
            if last < tail_tol * abs(total):
                small += 1
            else:
                small = 0
    return total


def _kernels_qpow(logq: complex, m: int) -> complex:
    return cmath.exp(m * logq)


def shift_identity_check(phi: Evaluator, t: complex, d: DomainSpec, q: QParameter,
                         tail_tol: float = 1e-12, l_window: int = 64) -> float:
    """Relative discrepancy of L(tau*phi)(t) against t * L(phi)(q t).

    Both t and q*t must lie in the domain; the spiral margin is invariant
    under t -> q t so only the radius cut can differ.
    """
    qv = q.value

    def mphi(m: int, tau: complex) -> complex:
        return tau * phi(m, tau)

    lhs = q_laplace_eval(mphi, t, d, q, tail_tol, l_window)
    rhs = t * q_laplace_eval(phi, qv * t, d, q, tail_tol, l_window)
    return abs(lhs - rhs) / max(1.0, abs(lhs))
