"""Remainder profiles of the analytic solution and log-linear certificates.

The object certified here: with the analytic solution X(t, z) and the
formal coefficient grid f[m, h], the remainder after n powers of t obeys

    |X(t,z) - sum_h sum_{m<n} f[m,h] t^m z^h/h!|
        <= C D^n Gamma((r1/r2)(n+1)) |q|^(n(n-1)/2) |t|^n

on the spiral domain (no Gamma factor when r1 = 0).  All constants are
existential, so they are extracted from finite-n profiles by affine fits
whose intercept is lifted to majorise every computed point; the fit
residual is the substantive quality measure.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ._fits import affine_fit, plane_fit
from .errors import DataError, DomainError
from .qlaplace import QParameter, SpiralGrid, in_spiral_domain
from .series import BivariateSeries
from .solver import ProblemSpec, transform_rows, wh_taylor


def gamma_factor(n: int, r1: int, r2: int) -> float:
    """Gamma(r1 (n+1) / r2) for r1 >= 1; exactly 1 when r1 = 0.

    Integer arguments go through the factorial; fractional ones through
    the library Gamma, which is far more accurate than the certificates
    need on desk-scale arguments.
    """
    if n < 1:
        raise DataError("the remainder index starts at n = 1")
    if r1 == 0:
        return 1.0
    num = r1 * (n + 1)
    if num % r2 == 0:
        return float(math.factorial(num // r2 - 1))
    return math.gamma(num / r2)


# ---------------------------------------------------------------------------
# sampling the spiral domain


def default_t_samples(p: ProblemSpec, n_max: int) -> tuple[complex, ...]:
    """Log-spaced moduli on a few rays that stay inside the spiral domain.

    The modulus range keeps the normaliser |q|^(n(n-1)/2) |t|^n inside
    roughly [1e-11, 1e3] at n = n_max, so remainders neither drown in the
    double-precision cancellation floor nor blow past the partial sums.
    """
    dom = p.domain
    if dom.r0 is None:
        raise DomainError("domain radius unresolved; fit it before sampling")
    qmod = p.q.modulus
    scale = qmod ** (-(n_max - 1) / 2.0)
    t_max = min(0.8 * dom.r0, 1e3 ** (1.0 / n_max) * scale)
    t_min = max(t_max / 50.0, 1e-11 ** (1.0 / n_max) * scale)
    if t_min >= t_max:
        t_min = t_max / 50.0
    moduli = np.geomspace(t_min, t_max, p.fit.t_points)
    base = cmath.phase(dom.lam)
    candidates = np.linspace(-math.pi / 2, math.pi / 2, 2 * p.fit.t_rays + 3)
    samples: list[complex] = []
    rays = 0
    for off in candidates:
        pts = [complex(r * cmath.exp(1j * (base + off))) for r in moduli]
        if all(in_spiral_domain(t, dom, p.q)[0] for t in pts):
            samples.extend(pts)
            rays += 1
            if rays == p.fit.t_rays:
                break
    if rays < p.fit.t_rays:
        raise DomainError(
            f"only {rays} of {p.fit.t_rays} candidate rays stay inside the domain")
    return tuple(samples)


# ---------------------------------------------------------------------------
# remainder profiles


@dataclass(frozen=True)
class RemainderProfile:
    n_range: tuple[int, ...]
    t_samples: tuple[complex, ...]
    z: complex
    R: np.ndarray           # |X - partial|, shape (len(n_range), len(t_samples))
    ratios: np.ndarray      # per-sample normalised remainders, same shape
    normalized: np.ndarray  # rho_n = max over t of ratios, shape (len(n_range),)
    n_star: tuple[int, ...]  # per sample, the n minimising R (divergence onset)
    h_tail: float
    r1: int
    r2: int


def _column_partials(F: BivariateSeries, t: complex, n_max: int) -> np.ndarray:
    """partials[n, h] = sum_{m<n} f[m, h] t^m for n = 0..n_max."""
    M, H = F.truncation
    powers = t ** np.arange(0, min(n_max, M + 1))
    contrib = F.coeffs[: len(powers), :] * powers[:, None]
    out = np.zeros((n_max + 1, H + 1), dtype=np.complex128)
    out[1: len(powers) + 1, :] = np.cumsum(contrib, axis=0)
    if n_max > len(powers):
        out[len(powers) + 1:, :] = out[len(powers), :]
    return out


def remainder_profile(p: ProblemSpec, W: SpiralGrid, F: BivariateSeries,
                      z: complex, N: int,
                      t_samples: tuple[complex, ...] | None = None,
                      germs: BivariateSeries | None = None) -> RemainderProfile:
    """Remainders of the analytic solution against the partial sums.

    R_n(t) = |X(t,z) - sum_h sum_{m<n} f[m,h] t^m z^h/h!| for n = 1..N;
    each is normalised by |q|^(n(n-1)/2) |t|^n and the sub-order Gamma
    factor before the sup over samples is taken.
    """
    if N > F.truncation[0]:
        raise DataError("N exceeds the stored t-truncation")
    if germs is None:
        germs = wh_taylor(p).series
    if t_samples is None:
        t_samples = default_t_samples(p, N)
    qmod = p.q.modulus
    H = W.h_count - 1
    zpow = np.array([z**h / math.factorial(h) for h in range(H + 1)])
    ns = np.arange(1, N + 1)
    R = np.empty((N, len(t_samples)))
    ratios = np.empty_like(R)
    tail = 0.0
    for j, t in enumerate(t_samples):
        rows = transform_rows(p, W, germs, t)
        x_val = np.dot(rows, zpow)
        tail = max(tail, abs(rows[-1] * zpow[-1]))
        partials = _column_partials(F, t, N)
        for n in ns:
            approx = np.dot(partials[n, : H + 1], zpow)
            R[n - 1, j] = abs(x_val - approx)
            norm = qmod ** (n * (n - 1) / 2.0) * abs(t) ** n \
                * gamma_factor(int(n), p.r1, p.r2)
            ratios[n - 1, j] = R[n - 1, j] / norm
    n_star = tuple(int(ns[np.argmin(R[:, j])]) for j in range(len(t_samples)))
    return RemainderProfile(
        n_range=tuple(int(n) for n in ns), t_samples=tuple(t_samples), z=z,
        R=R, ratios=ratios, normalized=np.max(ratios, axis=1),
        n_star=n_star, h_tail=tail, r1=p.r1, r2=p.r2)


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class PerHFit:
    h: int
    B: float
    D: float
    tail_split_m: int | None = None


@dataclass(frozen=True)
class PerHReport:
    fits: tuple[PerHFit, ...]
    exponent: float      # recovered growth exponent of B(h) in log(h+1)
    A1: float
    A2: float
    A3: float


@dataclass(frozen=True)
class FitReport:
    C_tilde: float
    D_tilde: float
    slope_residual: float
    n_max_checked: int
    degenerate: bool = False
    per_h: PerHReport | None = None
    K1: float | None = None
    K0: float | None = None
    C_prime: float | None = None


def gevrey_fit(profile: RemainderProfile, n_fit_min: int = 2) -> FitReport:
    """Affine fit of log rho_n against n, intercept lifted to majorise.

    The fit runs on n >= 2 (the n = 1 normalisation is degenerate), but the
    lifted constant covers every computed n, so rho_n <= C_tilde D_tilde^n
    holds on the full profile by construction; `slope_residual` measures
    how far the profile is from exactly geometric growth.
    """
    ns = np.array(profile.n_range, dtype=float)
    logs = np.full(ns.shape, -np.inf)
    pos = profile.normalized > 0
    logs[pos] = np.log(profile.normalized[pos])
    if not np.all(np.isfinite(profile.normalized)):
        raise DataError("non-finite normalised remainders")
    mask = (ns >= n_fit_min) & np.isfinite(logs)
    if np.count_nonzero(mask) < 2:
        return FitReport(C_tilde=1.0, D_tilde=1.0, slope_residual=0.0,
                         n_max_checked=int(ns[-1]), degenerate=True)
    intercept, slope, resid = affine_fit(ns[mask], logs[mask])
    lift = 0.0
    finite = np.isfinite(logs)
    if np.any(finite):
        lift = max(0.0, float(np.max(
            logs[finite] - (intercept + slope * ns[finite]))))
    c_tilde = math.exp(intercept + lift) * (1.0 + 1e-12)
    d_tilde = math.exp(slope)
    if not (c_tilde > 0 and d_tilde > 0 and math.isfinite(c_tilde)
            and math.isfinite(d_tilde)):
        raise DataError("the remainder fit produced non-finite constants")
    return FitReport(C_tilde=c_tilde, D_tilde=d_tilde,
                     slope_residual=float(np.max(np.abs(resid))),
                     n_max_checked=int(ns[-1]))


def per_h_constants(p: ProblemSpec, W: SpiralGrid, F: BivariateSeries, N: int,
                    t_samples: tuple[complex, ...] | None = None,
                    germs: BivariateSeries | None = None,
                    T1: float | None = None) -> PerHReport:
    """Per-coefficient remainder constants and the recovered sub-order.

    For each column h, the transform of W_h minus its own partial sums is
    normalised by |q|^(n(n-1)/2)|t|^n and fitted as log ratio ~ log D(h) +
    n log B(h); regressing log B(h) on log(h+1) then recovers the exponent
    r1/r2, and D(h) decomposes as A2 (h+1)^(r1/r2) h! A3^h |q|^(-h^2/4).
    """
    if germs is None:
        germs = wh_taylor(p).series
    if t_samples is None:
        t_samples = default_t_samples(p, N)
    qmod = p.q.modulus
    H = W.h_count - 1
    ns = np.arange(1, N + 1)
    ratios = np.empty((H + 1, N, len(t_samples)))
    for j, t in enumerate(t_samples):
        rows = transform_rows(p, W, germs, t)
        partials = _column_partials(F, t, N)
        for h in range(H + 1):
            for n in ns:
                norm = qmod ** (n * (n - 1) / 2.0) * abs(t) ** n
                ratios[h, n - 1, j] = abs(rows[h] - partials[n, h]) / norm
    fits: list[PerHFit] = []
    for h in range(H + 1):
        rho = np.max(ratios[h], axis=1)
        mask = (ns >= 2) & (rho > 0)
        if np.count_nonzero(mask) < 3:
            continue
        intercept, slope, _ = affine_fit(ns[mask], np.log(rho[mask]))
        B = math.exp(slope)
        D = math.exp(intercept)
        split = None
        if T1 is not None and p.r1 >= 1:
            a_h = (h + 1) ** (p.r1 / p.r2) / T1
            split = math.floor(-math.log(2.0 * a_h * abs(p.domain.lam))
                               / math.log(qmod))
        fits.append(PerHFit(h=h, B=B, D=D, tail_split_m=split))
    if len(fits) < 3:
        raise DataError("too few usable columns for the per-h fits")
    hs = np.array([f.h for f in fits], dtype=float)
    logB = np.array([math.log(f.B) for f in fits])
    b_intercept, exponent, _ = affine_fit(np.log(hs + 1.0), logB)
    a1 = math.exp(b_intercept)
    logD = np.array([math.log(f.D) for f in fits])
    y = (logD - np.vectorize(math.lgamma)(hs + 1.0)
         + (hs**2 / 4.0) * math.log(qmod)
         - (p.r1 / p.r2) * np.log(hs + 1.0))
    a2_int, a3_slope, _ = affine_fit(hs, y)
    return PerHReport(fits=tuple(fits), exponent=float(exponent),
                      A1=a1, A2=math.exp(a2_int), A3=math.exp(a3_slope))


# ---------------------------------------------------------------------------
# growth and derivative certificates


@dataclass(frozen=True)
class GrowthFit:
    T: float
    C: float
    slope: float
    intercept: float
    max_residual: float
    l_covered: int


def growth_certificate(W: SpiralGrid, q: QParameter, K0: float) -> GrowthFit:
    """Affine majorant of log sup|W(x q^l, .)| - (l^2/2) log|q| over l >= 0.

    The lifted affine bound holds at every grid l by construction; T =
    exp(-slope) must come out positive and finite for the certificate to
    mean anything, and C recovers the constant in front of K0.
    """
    w = W.sup_over_base()
    qmod = q.modulus
    ls, ys = [], []
    for l in range(0, W.l_max + 1):
        top = float(np.max(w[l - W.l_min, :]))
        if top > 0:
            ls.append(float(l))
            ys.append(math.log(top) - (l * l / 2.0) * math.log(qmod))
    if len(ls) < 2:
        raise DataError("not enough positive spiral sups for the growth fit")
    intercept, slope, resid = affine_fit(np.array(ls), np.array(ys))
    lift = max(0.0, float(np.max(resid)))
    T = math.exp(-slope)
    C = math.exp(intercept + lift) / max(K0, 1e-300)
    if not (T > 0 and math.isfinite(T)):
        raise DataError("growth fit produced a useless scale")
    return GrowthFit(T=T, C=C, slope=slope, intercept=intercept + lift,
                     max_residual=float(np.max(np.abs(resid))),
                     l_covered=int(ls[-1]))


@dataclass(frozen=True)
class DerivativeFit:
    C1: float
    T1: float
    X1: float
    max_violation: float
    n_covered: int
    h_covered: int


def derivative_certificate(Wt: BivariateSeries, p: ProblemSpec,
                           n_max: int | None = None,
                           h_max: int | None = None) -> DerivativeFit:
    """Plane majorant of the scaled germ coefficients of the W_h.

    The quantity log(|coeff[n,h]| |q|^(h^2/2) / h!) - (r1 n / r2) log(h+1)
    is fitted by c + a n + b h and the intercept lifted, giving
    C1 (1/T1)^n (1/X1)^h with zero violation on the covered window.
    """
    M, H = Wt.truncation
    n_max = M if n_max is None else min(n_max, M)
    h_max = H if h_max is None else min(h_max, H)
    qmod = p.q.modulus
    ns, hs, ys = [], [], []
    for n in range(n_max + 1):
        for h in range(h_max + 1):
            mag = abs(Wt.coeffs[n, h])
            if mag == 0.0:
                continue
            y = (math.log(mag) + (h * h / 2.0) * math.log(qmod)
                 - math.lgamma(h + 1.0) - (p.r1 * n / p.r2) * math.log(h + 1.0))
            ns.append(float(n))
            hs.append(float(h))
            ys.append(y)
    if len(ys) < 3:
        raise DataError("not enough nonzero coefficients for the derivative fit")
    c, a, b, resid = plane_fit(np.array(ns), np.array(hs), np.array(ys))
    lift = max(0.0, float(np.max(resid))) * (1.0 + 1e-12) + 1e-12
    C1 = math.exp(c + lift)
    T1 = math.exp(-a)
    X1 = math.exp(-b)
    bound = c + lift + a * np.array(ns) + b * np.array(hs)
    violation = max(0.0, float(np.max(np.array(ys) - bound)))
    if not all(map(math.isfinite, (C1, T1, X1))):
        raise DataError("derivative fit produced non-finite constants")
    return DerivativeFit(C1=C1, T1=T1, X1=X1, max_violation=violation,
                         n_covered=n_max, h_covered=h_max)


def transform_growth_scale(W: SpiralGrid, q: QParameter, base_index: int
                           ) -> tuple[float, float]:
    """Fitted per-step growth C of the transform column and the radius it buys.

    Fits log max_h |W_h(lambda q^l)| - (l^2/2) log|q| ~ log M + l log C over
    l >= 1 and returns (C, |lambda| |q|^(1/2) / C), the largest radius for
    which the transform tail is geometric.
    """
    lam = W.base_points[base_index]
    col = np.abs(W.values[base_index])  # (n_l, n_h)
    qmod = q.modulus
    ls, ys = [], []
    for l in range(1, W.l_max + 1):
        top = float(np.max(col[l - W.l_min, :]))
        if top > 0:
            ls.append(float(l))
            ys.append(math.log(top) - (l * l / 2.0) * math.log(qmod))
    if len(ls) < 2:
        return 0.0, math.inf
    _, slope, _ = affine_fit(np.array(ls), np.array(ys))
    growth = math.exp(slope)
    return growth, abs(lam) * qmod**0.5 / max(growth, 1e-300)
