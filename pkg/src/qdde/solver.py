"""Problem description, hypothesis validation, and the three solution builds.

The equation solved, for a double series X(t,z) = sum f[m,h] t^m z^h/h!:

    ((z d/dz + 1)^r1 (t sigma_q)^r2 + 1) dz^S X
        = sum_k b_k(z) (t sigma_q)^(m0_k) (dz^k X)(t, z q^(-m1_k)),

with the S series dz^j X(t,0) prescribed.  Three coupled representations
are built here:

  * solve_formal      -- the coefficient grid f[m,h] (triangular recursion)
  * wh_taylor         -- Taylor germs of the transformed coefficients
                         W_h, by two independent routes that must agree
  * wh_spiral         -- values of W_h on the discrete spiral {x q^l},
                         whose transform reassembles the analytic solution

The transformed coefficients satisfy, pointwise in tau,

    W_{h+S}(tau)/h! = sum_k sum_{h1+h2=h, h1 in supp b_k}
        b_{k,h1} tau^(m0_k) / ((h+1)^r1 tau^r2 + 1)
        * W_{h2+k}(tau) / (h2! q^(m1_k h2)),

whose denominators are the small divisors; validation certifies a positive
floor for them before this recursion runs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _kernels
from ._fits import affine_fit
from .errors import (ConsistencyError, DataError, DomainError,
                     SmallDivisorError, TruncationWindowError)
from .qlaplace import DomainSpec, QParameter, SpiralGrid, in_spiral_domain
from .series import (BivariateSeries, Polynomial, UnivariateSeries,
                     borel_q_formal, dilate_t, diff_z, euler_z,
                     laplace_q_formal, mul_poly_z, qpow, scale_z)


@dataclass(frozen=True)
class OperatorTerm:
    """One right-hand-side term: order k, dilation power m0, z-shrink m1, b_k."""

    k: int
    m0: int
    m1: int
    b: Polynomial

    def __post_init__(self):
        if self.k < 0 or self.m0 < 0 or self.m1 < 0:
            raise DataError("term exponents must be nonnegative")


@dataclass(frozen=True)
class Truncation:
    M: int
    H: int
    l_min: int
    l_max: int
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.M < 0 or self.H < 0:
            raise DataError("truncation orders must be nonnegative")
        if not (self.l_min < 0 < self.l_max):
            raise DataError("the spiral window must straddle l = 0")
        if not self.tail_tol > 0:
            raise DataError("tail_tol must be positive")


@dataclass(frozen=True)
class FitConfig:
    N: int = 12
    t_rays: int = 3
    t_points: int = 5


@dataclass(frozen=True)
class ProblemSpec:
    q: QParameter
    S: int
    r1: int
    r2: int
    terms: tuple[OperatorTerm, ...]
    initial: tuple[UnivariateSeries, ...]
    initial_side: str  # "t" | "borel"
    domain: DomainSpec
    truncation: Truncation
    fit: FitConfig = FitConfig()

    def __post_init__(self):
        if self.S < 1:
            raise DataError("S must be >= 1")
        if self.r1 < 0:
            raise DataError("r1 must be >= 0")
        if self.r2 < 1:
            raise DataError("r2 must be >= 1")
        if self.q.r2 != self.r2:
            raise DataError("q angle resolution and problem r2 disagree")
        ks = [t.k for t in self.terms]
        if len(set(ks)) != len(ks):
            raise DataError("duplicate operator term for some k")
        if any(t.k >= self.S for t in self.terms):
            raise DataError("term order k must satisfy k < S")
        if len(self.initial) != self.S:
            raise DataError(f"need exactly S={self.S} initial series")
        if self.initial_side not in ("t", "borel"):
            raise DataError("initial_side must be 't' or 'borel'")
        if self.truncation.H < self.S:
            raise DataError("z-truncation H must be at least S")

    # -- initial data on both sides of the transform -----------------------

    def initial_t(self) -> tuple[UnivariateSeries, ...]:
        M = self.truncation.M
        if self.initial_side == "t":
            return tuple(s.padded(M) for s in self.initial)
        return tuple(laplace_q_formal(s.padded(M), self.q.value) for s in self.initial)

    def initial_borel(self) -> tuple[UnivariateSeries, ...]:
        M = self.truncation.M
        if self.initial_side == "borel":
            return tuple(s.padded(M) for s in self.initial)
        return tuple(borel_q_formal(s.padded(M), self.q.value) for s in self.initial)

    def disc_radius(self, h: int) -> float:
        """Radius of the shrinking disc carrying the h-th transformed germ."""
        return 1.0 / (2.0 * (h + 1) ** (self.r1 / self.r2))


@dataclass(frozen=True)
class InequalityWitness:
    k: int
    s: int
    growth_ok: bool   # s + S - k >= 2*m0
    shift_ok: bool    # m1 >= s + S - k


@dataclass(frozen=True)
class AssumptionReport:
    A_ok: bool
    A2_ok: bool
    B_ok: bool
    witnesses: tuple[InequalityWitness, ...]
    T_set: tuple[float, float] | None
    T1_set: tuple[float, float] | None
    T1: float | None
    geometry_ok: bool
    geometry_certified: bool
    spectral_gap: float
    disc_radii: tuple[float, ...]
    T0: tuple[float, ...]
    K0: float
    r_factor: float
    notes: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# hypothesis validation


def _sector_distance(angle: float, center: float) -> float:
    return abs(math.remainder(angle - center, 2.0 * math.pi))


def _ray_floor(alpha: float) -> float:
    """min over u > 0 of |u e^(i alpha) + 1|: 1 when cos >= 0, else |sin|."""
    return 1.0 if math.cos(alpha) >= 0.0 else abs(math.sin(alpha))


def _gap_b_form(p: ProblemSpec) -> float:
    b = p.q.b
    floor = math.inf
    for x in p.domain.v_sample:
        ang = cmath.phase(x) * p.r2
        for c in range(b):
            alpha = math.remainder(ang + 2.0 * math.pi * c / b, 2.0 * math.pi)
            floor = min(floor, _ray_floor(alpha))
    return floor


def _gap_scan(p: ProblemSpec, h_cap: int = 512) -> float:
    """Windowed small-divisor minimum over moduli |u| in [~0, 2].

    Complete for r1 = 0 (no h dependence); for r1 >= 1 it samples the
    h-range per (x, l) and the caller must flag the value as uncertified.
    """
    qmod = p.q.modulus
    qlog = p.q.log
    best = math.inf
    for x in p.domain.v_sample:
        xr = x ** p.r2
        # l-range where |x^r2 q^(r2 l)| spans [1e-9, 2]
        l_hi = math.ceil((math.log(2.0) - math.log(abs(xr))) / (p.r2 * math.log(qmod)))
        l_lo = math.floor((math.log(1e-9) - math.log(abs(xr))) / (p.r2 * math.log(qmod)))
        for l in range(l_lo, l_hi + 1):
            base = xr * cmath.exp(p.r2 * l * qlog)
            if p.r1 == 0:
                best = min(best, abs(base + 1.0))
                continue
            h_top = int(min(h_cap, math.ceil((2.0 / abs(base)) ** (1.0 / p.r1))))
            for h in range(0, h_top + 1):
                u = (h + 1) ** p.r1 * base
                best = min(best, abs(u + 1.0))
                if abs(u) >= 2.0:
                    break
    return min(best, 1.0 - 1e-9)


def _fit_initial_scale(w_rows: np.ndarray, l_min: int, qmod: float, j: int
                       ) -> float:
    """Growth scale of one initial column from its l >= 0 spiral profile.

    Fits log w(l) + log(1+l^2) - (l^2/4) log|q| by an affine function of l
    and returns exp(-slope); degenerate profiles give 1.0.
    """
    ls, ys = [], []
    for l in range(0, w_rows.shape[0] + l_min):
        w = w_rows[l - l_min, j]
        if w > 0.0 and math.isfinite(w):
            ls.append(float(l))
            ys.append(math.log(w) + math.log1p(l * l) - (l * l / 4.0) * math.log(qmod))
    if len(ls) < 2:
        return 1.0
    _, slope, _ = affine_fit(np.array(ls), np.array(ys))
    scale = math.exp(-slope)
    if not (math.isfinite(scale) and scale > 0.0):
        return 1.0
    return scale


def initial_spiral_rows(p: ProblemSpec) -> np.ndarray:
    """Initial transformed germs evaluated on the spiral: shape (n_x, n_l, S)."""
    tr = p.truncation
    germs = p.initial_borel()
    n_l = tr.l_max - tr.l_min + 1
    out = np.empty((len(p.domain.v_sample), n_l, p.S), dtype=np.complex128)
    for ix, x in enumerate(p.domain.v_sample):
        for il in range(n_l):
            tau = x * qpow(p.q.value, tr.l_min + il)
            for j in range(p.S):
                out[ix, il, j] = germs[j].eval(tau)
    return out


def validate(p: ProblemSpec) -> AssumptionReport:
    """Check the structural hypotheses and certify the small-divisor floor.

    Nothing is thrown: every failure is reported with its witness.  The
    initial-data scales T0_j and the constant K0 are measured from the
    spiral profiles of the given germs, since the problem data never fixes
    them, and feed the window-intersection check for the norm parameters.
    """
    notes: list[str] = []
    witnesses = []
    a_ok = True
    a2_ok = True
    for term in p.terms:
        for s, _ in term.b.terms:
            lhs = s + p.S - term.k
            growth_ok = lhs >= 2 * term.m0
            shift_ok = term.m1 >= lhs
            witnesses.append(InequalityWitness(term.k, s, growth_ok, shift_ok))
            a_ok = a_ok and growth_ok and shift_ok
            a2_ok = a2_ok and shift_ok

    tr = p.truncation
    rows = np.max(np.abs(initial_spiral_rows(p)), axis=0)  # (n_l, S)
    qmod = p.q.modulus
    T0 = tuple(_fit_initial_scale(rows, tr.l_min, qmod, j) for j in range(p.S))

    # measured K0: smallest constant making both growth-profile bounds hold
    K0 = 0.0
    for j in range(p.S):
        for l in range(0, tr.l_max + 1):
            w = rows[l - tr.l_min, j]
            K0 = max(K0, w * (1 + l * l) * T0[j] ** l * qmod ** (-l * l / 4.0))
        for l in range(0, -tr.l_min + 1):
            w = rows[-l - tr.l_min, j]
            K0 = max(K0, w * (1 + l * l) * T0[j] ** (-l))

    T_set, T1, T1_set, b_ok = assumption_b_intervals(p.S, p.terms, T0, qmod)

    if p.q.b is not None:
        eps = p.domain.epsilon_sector
        b = p.q.b
        geometry_ok = True
        for x in p.domain.v_sample:
            ang = cmath.phase(x ** p.r2)
            dist = min(_sector_distance(ang, -math.pi + 2.0 * math.pi * c / b)
                       for c in range(b))
            if dist <= eps:
                geometry_ok = False
                notes.append(f"V point {x} enters a forbidden sector "
                             f"(angular distance {dist:.3g} <= eps {eps})")
        gap = _gap_b_form(p)
        certified = True
    elif p.r1 == 0:
        gap = _gap_scan(p)
        geometry_ok = gap > 0.0
        certified = True
    else:
        gap = _gap_scan(p)
        geometry_ok = gap > 0.0
        certified = False
        notes.append("q has no rational angle form and r1 >= 1: the "
                     "small-divisor floor is a windowed scan, not certified")

    r_factor = 1.0
    for term in p.terms:
        for x in p.domain.v_sample:
            r_factor = max(r_factor, abs(x) ** term.m0)

    radii = tuple(p.disc_radius(h) for h in range(tr.H + 1))
    return AssumptionReport(
        A_ok=a_ok, A2_ok=a2_ok, B_ok=b_ok, witnesses=tuple(witnesses),
        T_set=T_set, T1_set=T1_set, T1=T1,
        geometry_ok=geometry_ok, geometry_certified=certified,
        spectral_gap=gap, disc_radii=radii, T0=T0, K0=K0,
        r_factor=r_factor, notes=tuple(notes))


def assumption_b_intervals(S: int, terms: Sequence[OperatorTerm],
                           T0: Sequence[float], qmod: float):
    """Interval intersections behind the norm-parameter existence check.

    Returns (T_set, T1, T1_set, ok).  T_set collects the constraints
    [q^(-m0) T0_j, T0_j q^((s+j-k-2 m0)/2)] over all (k, j >= k, s); a
    valid T1 in T_set must further let [T1, T1 q^(S/2)] meet the
    intersection J of [T0_j, T0_j q^(j/2)].
    """
    lo = -math.inf
    hi = math.inf
    for term in terms:
        for s, _ in term.b.terms:
            for j in range(term.k, S):
                lo = max(lo, qmod ** (-term.m0) * T0[j])
                hi = min(hi, T0[j] * qmod ** ((s + j - term.k - 2 * term.m0) / 2.0))
    if not terms:
        lo, hi = min(T0), max(T0) * qmod ** (S / 2.0)
    tol = 1.0 + 1e-12
    T_set = (lo, hi) if lo <= hi * tol else None

    j_lo = max(T0)
    j_hi = min(T0[j] * qmod ** (j / 2.0) for j in range(S))
    if j_lo > j_hi * tol or T_set is None:
        return T_set, None, None, False

    t1_lo = max(lo, j_lo * qmod ** (-S / 2.0))
    t1_hi = min(hi, j_hi)
    if t1_lo > t1_hi * tol:
        return T_set, None, None, False
    T1 = math.sqrt(t1_lo * t1_hi)  # log-midpoint of the feasible interval
    T1_set = (max(T1, j_lo), min(T1 * qmod ** (S / 2.0), j_hi))
    return T_set, T1, T1_set, True


# ---------------------------------------------------------------------------
# formal solution


def solve_formal(p: ProblemSpec) -> BivariateSeries:
    """The unique coefficient grid f[m,h] of the formal double series.

    Row by row in h: equating the t^m z^h/h! coefficients gives

        f[m, h+S] + [m>=r2] (h+1)^r1 q^(r2(r2-1)/2 + r2(m-r2)) f[m-r2, h+S]
            = RHS(m, h),

    where RHS row h only involves columns h2 + k <= h + S - 1, so the
    system is triangular both in h and (for fixed h) in m.
    """
    tr = p.truncation
    M, H = tr.M, tr.H
    q = p.q.value
    f = np.zeros((M + 1, H + 1), dtype=np.complex128)
    for j, series in enumerate(p.initial_t()):
        f[:, j] = series.coeffs

    fact = [math.factorial(i) for i in range(H + 1)]
    for h in range(0, H - p.S + 1):
        rhs = np.zeros(M + 1, dtype=np.complex128)
        for term in p.terms:
            for h1, b_c in term.b.terms:
                if h1 > h:
                    continue
                h2 = h - h1
                col = h2 + term.k
                weight = b_c * fact[h] / fact[h2] / qpow(q, term.m1 * h2)
                if term.m0 == 0:
                    rhs += weight * f[:, col]
                else:
                    half = term.m0 * (term.m0 - 1) / 2.0
                    for m in range(term.m0, M + 1):
                        rhs[m] += weight * qpow(q, term.m0 * (m - term.m0) + half) \
                            * f[m - term.m0, col]
        half2 = p.r2 * (p.r2 - 1) / 2.0
        euler = (h + 1.0) ** p.r1
        for m in range(0, M + 1):
            val = rhs[m]
            if m >= p.r2:
                val -= euler * qpow(q, half2 + p.r2 * (m - p.r2)) * f[m - p.r2, h + p.S]
            f[m, h + p.S] = val
    return BivariateSeries(f)


def _sides_of_equation(p: ProblemSpec, F: BivariateSeries
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the equation applied to F, cropped to the shared window."""
    q = p.q.value
    d = diff_z(F, p.S)
    lhs = (euler_z(dilate_t(d, q, p.r2), p.r1).coeffs + d.coeffs)
    h_keep = F.truncation[1] - p.S + 1
    rhs = np.zeros_like(lhs[:, :h_keep])
    for term in p.terms:
        g = mul_poly_z(term.b,
                       dilate_t(scale_z(diff_z(F, term.k), q, term.m1), q, term.m0))
        rhs += g.coeffs[:, :h_keep]
    return lhs[:, :h_keep], rhs


def residual_formal(p: ProblemSpec, F: BivariateSeries) -> float:
    """Largest defect of the equation on the exactly-determined window.

    The window drops max(r2, m0_k) top t-rows and S top z-columns, where
    the truncated grid no longer determines both sides; the defect is
    normalised by the largest coefficient magnitude.
    """
    lhs, rhs = _sides_of_equation(p, F)
    shift = max([p.r2] + [t.m0 for t in p.terms])
    m_keep = F.truncation[0] - shift + 1
    diff = np.abs(lhs[:m_keep] - rhs[:m_keep])
    scale = np.max(np.abs(F.coeffs))
    if scale == 0.0:
        return float(np.max(diff)) if diff.size else 0.0
    return float(np.max(diff) / scale)


# ---------------------------------------------------------------------------
# transformed coefficients: Taylor germs


@dataclass(frozen=True)
class TaylorCheck:
    """Germs of the transformed coefficients, with the two-route discrepancy."""

    series: BivariateSeries  # coeffs[n, h]: Taylor coefficient n of W_h
    discrepancy: float


def wh_taylor(p: ProblemSpec) -> TaylorCheck:
    """Taylor coefficients of the W_h by two independent routes.

    Route one divides the formal-solution columns by q^(n(n-1)/2).  Route
    two runs the disc recursion directly, expanding each small divisor as
    the geometric series 1/((h+1)^r1 tau^r2 + 1) = sum_j (-1)^j (h+1)^(r1 j)
    tau^(r2 j), which is coefficient-exact at any truncation.  Disagreement
    beyond 1e-8 (relative to the largest coefficient) is an error.
    """
    tr = p.truncation
    M, H = tr.M, tr.H
    q = p.q.value
    F = solve_formal(p)
    route_borel = np.empty((M + 1, H + 1), dtype=np.complex128)
    for n in range(M + 1):
        route_borel[n, :] = F.coeffs[n, :] / qpow(q, n * (n - 1) / 2.0)

    w = np.zeros((M + 1, H + 1), dtype=np.complex128)
    for j, germ in enumerate(p.initial_borel()):
        w[:, j] = germ.coeffs
    fact = [math.factorial(i) for i in range(H + 1)]
    for h in range(0, H - p.S + 1):
        euler = (h + 1.0) ** p.r1
        acc = np.zeros(M + 1, dtype=np.complex128)
        for term in p.terms:
            for h1, b_c in term.b.terms:
                if h1 > h:
                    continue
                h2 = h - h1
                u = w[:, h2 + term.k]
                conv = np.zeros(M + 1, dtype=np.complex128)
                for n in range(term.m0, M + 1):
                    j_max = (n - term.m0) // p.r2
                    val = 0.0 + 0.0j
                    for jg in range(j_max + 1):
                        val += (-1.0) ** jg * euler ** jg * u[n - term.m0 - p.r2 * jg]
                    conv[n] = val
                acc += b_c / (fact[h2] * qpow(q, term.m1 * h2)) * conv
        w[:, h + p.S] = fact[h] * acc

    scale = max(np.max(np.abs(route_borel)), 1e-300)
    disc = float(np.max(np.abs(route_borel - w)) / scale)
    if disc > 1e-8:
        raise ConsistencyError(
            f"transformed-coefficient routes disagree: relative gap {disc:.3e}")
    return TaylorCheck(series=BivariateSeries(route_borel), discrepancy=disc)


# ---------------------------------------------------------------------------
# transformed coefficients: spiral values


def wh_spiral(p: ProblemSpec, report: AssumptionReport | None = None) -> SpiralGrid:
    """Fill W_h on the spiral grid by the pointwise recursion.

    Every denominator is checked against the certified small-divisor floor;
    dipping below it means validation was skipped or wrong.  Initial germs
    are evaluated by direct summation, which is exact for polynomial data;
    a note is attached when a germ looks like a truncation whose radius the
    spiral leaves.
    """
    if report is None:
        report = validate(p)
    if report.spectral_gap <= 0.0:
        raise SmallDivisorError("no positive small-divisor floor; cannot recurse")
    tr = p.truncation
    notes = list(_initial_radius_notes(p))
    n_x = len(p.domain.v_sample)
    n_l = tr.l_max - tr.l_min + 1
    values = np.zeros((n_x, n_l, tr.H + 1), dtype=np.complex128)
    values[:, :, :p.S] = initial_spiral_rows(p)

    q = p.q.value
    tau = np.empty((n_x, n_l), dtype=np.complex128)
    for ix, x in enumerate(p.domain.v_sample):
        for il in range(n_l):
            tau[ix, il] = x * qpow(q, tr.l_min + il)
    tau_r2 = tau ** p.r2
    floor = report.spectral_gap * (1.0 - 1e-9)
    fact = [math.factorial(i) for i in range(tr.H + 1)]

    for h in range(0, tr.H - p.S + 1):
        den = (h + 1.0) ** p.r1 * tau_r2 + 1.0
        bad = np.abs(den) < floor
        if np.any(bad):
            ii = np.argwhere(bad)[0]
            raise SmallDivisorError(
                f"denominator {den[tuple(ii)]:.3e} below floor {floor:.3e} "
                f"at grid index {tuple(ii)}, h={h}")
        acc = np.zeros((n_x, n_l), dtype=np.complex128)
        for term in p.terms:
            tau_m0 = tau ** term.m0 if term.m0 else 1.0
            for h1, b_c in term.b.terms:
                if h1 > h:
                    continue
                h2 = h - h1
                acc += (b_c / (fact[h2] * qpow(q, term.m1 * h2))) \
                    * tau_m0 * values[:, :, h2 + term.k]
        values[:, :, h + p.S] = fact[h] * acc / den
    return SpiralGrid(tuple(p.domain.v_sample), tr.l_min, tr.l_max, values,
                      notes=tuple(notes))


def _initial_radius_notes(p: ProblemSpec):
    tr = p.truncation
    reach = max(abs(x) for x in p.domain.v_sample) * p.q.modulus ** tr.l_max
    for j, germ in enumerate(p.initial_borel()):
        mags = np.abs(germ.coeffs)
        nz = np.nonzero(mags > 0)[0]
        if nz.size == 0:
            continue
        d = int(nz[-1])
        if d < germ.order:
            continue  # explicit zero tail: polynomial data, exact everywhere
        radius_est = mags[d] ** (-1.0 / d) if d > 0 else math.inf
        if reach > radius_est:
            yield (f"initial germ {j} looks truncated (estimated radius "
                   f"{radius_est:.3g} < spiral reach {reach:.3g}); spiral values "
                   "use the polynomial extension")


# ---------------------------------------------------------------------------
# analytic solution


@dataclass(frozen=True)
class SolutionValue:
    value: complex
    h_tail: float


def transform_rows(p: ProblemSpec, W: SpiralGrid, germs: BivariateSeries,
                   t: complex, tail_tol: float | None = None) -> np.ndarray:
    """The transform of every W_h at one domain point t.

    The bilateral sum over the spiral index m uses the grid values on the
    stored window and the Taylor germs below it (small tau lies inside
    every shrinking disc there), so the downward tail is resolved to the
    stop rule rather than cut at the grid edge.  Upward the grid window
    must suffice; otherwise the window error reports the last term.
    """
    tr = p.truncation
    if tail_tol is None:
        tail_tol = tr.tail_tol
    dom = p.domain
    inside, margin = in_spiral_domain(t, dom, p.q, tail_tol)
    if not inside:
        raise DomainError(f"t={t} outside spiral domain (margin {margin:.6g})")
    q = p.q.value
    qlog = p.q.log
    lam = dom.lam
    depth = math.ceil((-math.log(tail_tol)
                       + abs(math.log(max(abs(lam) / abs(t), 2.0))))
                      / math.log(p.q.modulus)) + 6
    m_floor = tr.l_min - depth
    ix = dom.lambda_index()

    below = np.arange(m_floor, tr.l_min)
    taus = np.array([lam * qpow(q, int(m)) for m in below])
    n_h = W.h_count
    # germ block: value[m_i, h] = sum_n germs[n, h] tau^n
    powers = np.vander(taus, germs.truncation[0] + 1, increasing=True)
    block = powers @ germs.coeffs[:, :n_h]
    ext = np.vstack([block, W.values[ix, :, :]])

    theta = _kernels.theta_row(qlog, cmath.log(lam / t), m_floor, tr.l_max,
                               tail_tol, _kernels.N_CAP)
    # the kernel grows like exp((ln|y|)^2 / (2 ln|q|)) and overflows for very
    # small arguments; those terms sit below any tolerance, so zero them
    theta_bad = ~np.isfinite(theta)
    center = -m_floor
    out = np.empty(n_h, dtype=np.complex128)
    for h in range(n_h):
        with np.errstate(invalid="ignore"):
            terms = ext[:, h] / theta
        terms[theta_bad] = 0.0
        val, conv_up, conv_down, last = _kernels.bilateral_ratio_sum(
            terms, center, tail_tol)
        if not conv_up:
            raise TruncationWindowError(
                f"transform tail not resolved by l_max={tr.l_max} at h={h} "
                f"(last term {last:.3e})", last_term=last)
        if not conv_down:
            raise TruncationWindowError(
                f"transform tail not resolved at depth {m_floor} at h={h} "
                f"(last term {last:.3e})", last_term=last)
        out[h] = val
    return out


def evaluate_solution(p: ProblemSpec, W: SpiralGrid, t: complex, z: complex,
                      germs: BivariateSeries | None = None,
                      tail_tol: float | None = None) -> SolutionValue:
    """X(t, z): the z-series of transformed coefficients, summed over h.

    The h-tail is reported as the largest of the last three included terms,
    which must sit below tail_tol relative to the sum; the coefficient
    decay |q|^(-h^2/4)-like makes that fail only when H is too small.
    """
    if germs is None:
        germs = wh_taylor(p).series
    if tail_tol is None:
        tail_tol = p.truncation.tail_tol
    rows = transform_rows(p, W, germs, t, tail_tol)
    total = 0.0 + 0.0j
    terms = []
    for h in range(rows.size):
        term = rows[h] * z**h / math.factorial(h)
        total += term
        terms.append(abs(term))
    tail = max(terms[-3:]) if len(terms) >= 3 else max(terms)
    if z != 0 and tail > tail_tol * max(1.0, abs(total)):
        raise TruncationWindowError(
            f"z-direction tail {tail:.3e} not below tolerance at H="
            f"{rows.size - 1}; raise H", last_term=tail)
    return SolutionValue(value=complex(total), h_tail=float(tail))


def resolve_r0(p: ProblemSpec, fitted_T: float) -> ProblemSpec:
    """Fill an automatic domain radius from the fitted spiral growth scale."""
    r0 = abs(p.domain.lam) * p.q.modulus**0.5 * fitted_T / p.q.modulus
    return replace(p, domain=p.domain.with_r0(r0))
