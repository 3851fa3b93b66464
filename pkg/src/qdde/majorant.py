"""Weighted-norm majorants for the two auxiliary Cauchy problems.

Grids here are nonnegative real windows v[l, h]; a Laurent-kind grid spans
l in [l_min, l_max], a Taylor-kind grid has l >= 0.  The Laurent norm is

    sum |v[l,h]| q^(-P(l,h)) T^l X^h / h!,
    P(l,h) = l^2/4 + l h/2 - h^2/2  (l >= 0),   -h^2/2  (l <= 0),

and the Taylor norm is sum |v[l,h]| T^l q^(h^2/2) X^h / h!.  The coupling
operators push the column index up by at least one, so on a finite window
they are nilpotent and the fixed-point iteration terminates exactly;
indices pushed past the window are dropped, i.e. all statements are about
the windowed operator, which is also the one every check consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractionSearchError, DataError
from .solver import AssumptionReport, ProblemSpec

LAURENT = "laurent"
TAYLOR = "taylor"


@dataclass(frozen=True)
class NormParams:
    T: float
    X: float
    q_mod: float
    T0: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.T > 0 and self.X > 0 and self.q_mod > 1):
            raise DataError("norm parameters must satisfy T, X > 0 and q > 1")
        if any(t <= 0 for t in self.T0):
            raise DataError("initial scales must be positive")


class WeightedGrid:
    """Nonnegative coefficient window with its l-offset and space kind."""

    __slots__ = ("values", "l_min", "kind")

    def __init__(self, values: np.ndarray, l_min: int, kind: str):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise DataError("weighted grid must be two-dimensional")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DataError("weighted grid entries must be finite and >= 0")
        if kind not in (LAURENT, TAYLOR):
            raise DataError(f"unknown grid kind {kind!r}")
        if kind == TAYLOR and l_min != 0:
            raise DataError("Taylor-kind grids start at l = 0")
        arr.setflags(write=False)
        self.values = arr
        self.l_min = int(l_min)
        self.kind = kind

    @property
    def l_max(self) -> int:
        return self.l_min + self.values.shape[0] - 1

    @property
    def h_max(self) -> int:
        return self.values.shape[1] - 1

    def zero_like(self) -> "WeightedGrid":
        return WeightedGrid(np.zeros_like(self.values), self.l_min, self.kind)

    def __repr__(self) -> str:
        return (f"WeightedGrid(kind={self.kind}, l=[{self.l_min}, {self.l_max}], "
                f"h<={self.h_max})")


def weight_exponent(l: int, h: int) -> float:
    """The piecewise-quadratic exponent of the Laurent weight."""
    if h < 0:
        raise DataError("h must be nonnegative")
    if l >= 0:
        return 0.25 * l * l + 0.5 * l * h - 0.5 * h * h
    return -0.5 * h * h


def _log_weights(V: WeightedGrid, p: NormParams) -> np.ndarray:
    ls = np.arange(V.l_min, V.l_max + 1, dtype=float)[:, None]
    hs = np.arange(0, V.h_max + 1, dtype=float)[None, :]
    logq = math.log(p.q_mod)
    if V.kind == LAURENT:
        P = np.where(ls >= 0, 0.25 * ls**2 + 0.5 * ls * hs - 0.5 * hs**2,
                     -0.5 * hs**2)
        expo = -P * logq
    else:
        expo = 0.5 * hs**2 * logq
    lgf = np.vectorize(math.lgamma)(hs + 1.0)
    return expo + ls * math.log(p.T) + hs * math.log(p.X) - lgf


def laurent_norm(V: WeightedGrid, p: NormParams) -> float:
    """The weighted l1 norm of a Laurent-kind grid."""
    if V.kind != LAURENT:
        raise DataError("laurent_norm needs a Laurent-kind grid")
    return _norm(V, p)


def taylor_norm(V: WeightedGrid, p: NormParams) -> float:
    """The weighted l1 norm of a Taylor-kind grid."""
    if V.kind != TAYLOR:
        raise DataError("taylor_norm needs a Taylor-kind grid")
    return _norm(V, p)


def grid_norm(V: WeightedGrid, p: NormParams) -> float:
    return _norm(V, p)


def _norm(V: WeightedGrid, p: NormParams) -> float:
    logw = _log_weights(V, p)
    mask = V.values > 0
    if not np.any(mask):
        return 0.0
    # evaluated in logs so the q^(h^2/2)-scale factors cannot overflow
    # before cancelling against decaying entries
    return float(np.sum(np.exp(np.log(V.values[mask]) + logw[mask])))


# ---------------------------------------------------------------------------
# coupling operators


@dataclass(frozen=True)
class MajorantTerm:
    k: int
    m0: int
    m1: int
    coeffs: tuple[tuple[int, float], ...]  # nonnegative (degree, value)


@dataclass(frozen=True)
class MajorantOperator:
    """The column-raising coupling: V -> sum_k a_k(x) (dx^(k-S) V)(scaled).

    With `geometric_kernel` the scale action on the Laurent index is the
    convolution with sum_l 2^(l+1) xi^l instead of the dilation xi ->
    q^(m0) xi; that is the Taylor-kind flavour.
    """

    S: int
    terms: tuple[MajorantTerm, ...]
    geometric_kernel: bool


def growth_operator(p: ProblemSpec, report: AssumptionReport) -> MajorantOperator:
    """Coupling whose fixed point dominates the spiral sup profiles.

    Polynomial coefficients are |b_ks| * r / delta with r the sup of
    |x|^(m0_k) over the V sample and delta the certified divisor floor.
    """
    if report.spectral_gap <= 0:
        raise DataError("cannot build the growth coupling without a divisor floor")
    scale = report.r_factor / report.spectral_gap
    terms = tuple(
        MajorantTerm(t.k, t.m0, t.m1,
                     tuple((s, abs(c) * scale) for s, c in t.b.terms))
        for t in p.terms)
    return MajorantOperator(S=p.S, terms=terms, geometric_kernel=False)


def derivative_operator(p: ProblemSpec) -> MajorantOperator:
    """Coupling dominating the disc-derivative profiles (|b_ks| weights)."""
    terms = tuple(
        MajorantTerm(t.k, 0, t.m1, tuple((s, abs(c)) for s, c in t.b.terms))
        for t in p.terms)
    return MajorantOperator(S=p.S, terms=terms, geometric_kernel=True)


def apply_basic(V: WeightedGrid, q_mod: float, s: int = 0, h1: int = 0,
                deriv: int = 0, m1: int = 0) -> WeightedGrid:
    """x^s (dx^deriv V)(q^h1 xi, x / q^m1) as a grid action.

    deriv < 0 integrates (shifts the column index up), deriv > 0
    differentiates (shifts down).  Under the x^h/h! convention:

        out[l, h] = v[l, h + deriv - s] * q^(h1 l - m1 (h - s)) * h!/(h-s)!

    Source columns outside the window contribute nothing.
    """
    n_l, n_h = V.values.shape
    out = np.zeros_like(V.values)
    ls = np.arange(V.l_min, V.l_max + 1, dtype=float)
    dil = q_mod ** (h1 * ls) if h1 else np.ones(n_l)
    for h in range(s, n_h):
        src = h + deriv - s
        if not 0 <= src < n_h:
            continue
        ratio = 1.0
        for i in range(h - s + 1, h + 1):  # h!/(h-s)!
            ratio *= i
        out[:, h] = V.values[:, src] * dil * q_mod ** (-m1 * (h - s)) * ratio
    return WeightedGrid(out, V.l_min, V.kind)


def geometric_convolve(V: WeightedGrid) -> WeightedGrid:
    """Convolution with the kernel 2^(l+1) along l (Taylor-kind grids)."""
    if V.kind != TAYLOR:
        raise DataError("the geometric kernel acts on Taylor-kind grids")
    n_l = V.values.shape[0]
    kernel = 2.0 ** (np.arange(n_l) + 1.0)
    out = np.zeros_like(V.values)
    for l in range(n_l):
        out[l] = kernel[: l + 1][::-1] @ V.values[: l + 1]
    return WeightedGrid(out, 0, TAYLOR)


def apply_operator(op: MajorantOperator, V: WeightedGrid, q_mod: float
                   ) -> WeightedGrid:
    """The coupling applied to a grid; image indices past the window drop."""
    out = np.zeros_like(V.values)
    for term in op.terms:
        h1 = 0 if op.geometric_kernel else term.m0
        shifted = apply_basic(V, q_mod, s=0, h1=h1, deriv=term.k - op.S,
                              m1=term.m1)
        if op.geometric_kernel:
            shifted = geometric_convolve(shifted)
        for s, c in term.coeffs:
            part = apply_basic(shifted, q_mod, s=s)
            out += c * part.values
    return WeightedGrid(out, V.l_min, V.kind)


def apply_direct(op: MajorantOperator, V: WeightedGrid, q_mod: float
                 ) -> tuple[np.ndarray, np.ndarray]:
    """The defining operator dx^S V - coupling-with-dx^k: returns (pos, neg).

    Kept as the two nonnegative parts so callers can form residuals without
    losing the sign structure of the dominating recursion.
    """
    lead = apply_basic(V, q_mod, deriv=op.S).values
    other = np.zeros_like(V.values)
    for term in op.terms:
        h1 = 0 if op.geometric_kernel else term.m0
        shifted = apply_basic(V, q_mod, h1=h1, deriv=term.k, m1=term.m1)
        if op.geometric_kernel:
            shifted = geometric_convolve(shifted)
        for s, c in term.coeffs:
            other += c * apply_basic(shifted, q_mod, s=s).values
    return lead, other


# ---------------------------------------------------------------------------
# contraction


def operator_gain_bound(op: MajorantOperator, params: NormParams,
                        window: tuple[int, int, int]) -> float:
    """Largest norm gain over the basis grids of the window.

    The norm is a weighted l1 sum and the coupling has nonnegative matrix
    entries, so this basis maximum bounds the gain on every grid supported
    by the window.
    """
    l_min, l_max, h_max = window
    if op.geometric_kernel and l_min != 0:
        raise DataError("Taylor-kind windows start at l = 0")
    kind = TAYLOR if op.geometric_kernel else LAURENT
    n_l = l_max - l_min + 1
    worst = 0.0
    for li in range(n_l):
        for h in range(h_max + 1):
            basis = np.zeros((n_l, h_max + 1))
            basis[li, h] = 1.0
            e = WeightedGrid(basis, l_min, kind)
            num = grid_norm(apply_operator(op, e, params.q_mod), params)
            den = grid_norm(e, params)
            if den > 0:
                worst = max(worst, num / den)
    return worst


def find_contraction_scale(op: MajorantOperator, params: NormParams,
                           window: tuple[int, int, int], target: float = 0.5,
                           max_halvings: int = 60) -> NormParams:
    """Halve X until the windowed gain bound drops to the target.

    Every image column sits at least one above its source, so each term of
    the gain carries a positive power of X and the bound decreases to zero
    with X; the search fails only on malformed operators.
    """
    if op.geometric_kernel and params.T >= 0.5:
        raise DataError("the geometric-kernel coupling needs T < 1/2")
    current = params
    for _ in range(max_halvings + 1):
        if operator_gain_bound(op, current, window) <= target:
            return current
        current = NormParams(current.T, current.X / 2.0, current.q_mod, current.T0)
    raise ContractionSearchError(
        f"gain bound still above {target} after {max_halvings} halvings")


def random_sparse_grid(rng: np.random.Generator, window: tuple[int, int, int],
                       kind: str, max_nonzeros: int = 32) -> WeightedGrid:
    l_min, l_max, h_max = window
    values = np.zeros((l_max - l_min + 1, h_max + 1))
    count = int(rng.integers(1, max_nonzeros + 1))
    for _ in range(count):
        i = int(rng.integers(0, values.shape[0]))
        j = int(rng.integers(0, values.shape[1]))
        values[i, j] = rng.random()
    return WeightedGrid(values, l_min, kind)


def contraction_ratio(op: MajorantOperator, params: NormParams,
                      window: tuple[int, int, int], samples: int = 100,
                      seed: int = 0) -> float:
    """Max gain over random sparse nonnegative grids (zero grids skipped)."""
    kind = TAYLOR if op.geometric_kernel else LAURENT
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        V = random_sparse_grid(rng, window, kind)
        den = grid_norm(V, params)
        if den == 0.0:
            continue
        worst = max(worst, grid_norm(apply_operator(op, V, params.q_mod), params) / den)
    return worst


# ---------------------------------------------------------------------------
# fixed point


def interface_grid(initial_columns: np.ndarray, l_min: int, h_max: int,
                   kind: str) -> WeightedGrid:
    """The grid holding the initial columns j < S and zeros above."""
    n_l, S = initial_columns.shape
    values = np.zeros((n_l, h_max + 1))
    values[:, :S] = initial_columns
    return WeightedGrid(values, l_min, kind)


def neumann_fixed_point(op: MajorantOperator, rhs: WeightedGrid, q_mod: float,
                        max_iter: int | None = None) -> WeightedGrid:
    """Solve (identity - coupling) U = rhs by iteration.

    On an h-window of height H the coupling is nilpotent (it raises the
    column index), so at most H+1 sweeps reach the exact fixed point.
    """
    if max_iter is None:
        max_iter = rhs.h_max + 2
    U = rhs
    for _ in range(max_iter):
        nxt = WeightedGrid(apply_operator(op, U, q_mod).values + rhs.values,
                           rhs.l_min, rhs.kind)
        if np.array_equal(nxt.values, U.values):
            return nxt
        U = nxt
    return U


def fixed_point_residual(op: MajorantOperator, U: WeightedGrid,
                         I: WeightedGrid, params: NormParams) -> float:
    """Norm defect of D(dx^(-S) U) + D(I) = 0 on the determined window.

    Both applications of the defining operator are recomputed from scratch
    (not via the fixed-point identity), restricted to columns where the
    forward derivative stays inside the window, and normalised by the norm
    of the interface image.
    """
    V = apply_basic(U, params.q_mod, deriv=-op.S)
    lead_u, other_u = apply_direct(op, V, params.q_mod)
    lead_i, other_i = apply_direct(op, I, params.q_mod)
    resid = (lead_u - other_u) + (lead_i - other_i)
    h_keep = U.h_max - op.S + 1
    window = WeightedGrid(np.abs(resid[:, :h_keep]), U.l_min, U.kind)
    scale_grid = WeightedGrid(np.abs(lead_i - other_i)[:, :h_keep], U.l_min, U.kind)
    scale = grid_norm(scale_grid, params)
    res = grid_norm(window, params)
    return res / scale if scale > 0 else res


# ---------------------------------------------------------------------------
# dominating recursions


def solve_growth_majorant(p: ProblemSpec, report: AssumptionReport,
                          initial_columns: np.ndarray) -> WeightedGrid:
    """The Laurent-window recursion dominating the spiral sup profiles:

        v[l, h+S]/h! = sum_k sum_{h1+h2=h} (|b_{k,h1}| r / delta)
                       * q^(m0_k l) v[l, h2+k] / (h2! q^(m1_k h2)),

    seeded with the measured initial sups.  Column-triangular, so exact on
    the window.
    """
    if report.spectral_gap <= 0:
        raise DataError("growth majorant needs a positive divisor floor")
    tr = p.truncation
    qm = p.q.modulus
    n_l = tr.l_max - tr.l_min + 1
    if initial_columns.shape != (n_l, p.S):
        raise DataError("initial columns must have shape (n_l, S)")
    v = np.zeros((n_l, tr.H + 1))
    v[:, :p.S] = initial_columns
    ls = np.arange(tr.l_min, tr.l_max + 1, dtype=float)
    scale = report.r_factor / report.spectral_gap
    fact = [math.factorial(i) for i in range(tr.H + 1)]
    for h in range(0, tr.H - p.S + 1):
        acc = np.zeros(n_l)
        for term in p.terms:
            dil = qm ** (term.m0 * ls) if term.m0 else 1.0
            for h1, b_c in term.b.terms:
                if h1 > h:
                    continue
                h2 = h - h1
                acc += (abs(b_c) * scale / (fact[h2] * qm ** (term.m1 * h2))) \
                    * dil * v[:, h2 + term.k]
        v[:, h + p.S] = fact[h] * acc
    return WeightedGrid(v, tr.l_min, LAURENT)


def derivative_initial_rows(p: ProblemSpec, n_max: int) -> np.ndarray:
    """Disc-sup derivative bounds of the initial germs, scaled per column.

    Row n, column j holds a sup bound for |d^n W_j| over the j-th shrinking
    disc divided by (j+1)^(r1 n / r2), obtained from the triangle
    inequality on the germ coefficients; exact for monomial data.
    """
    out = np.zeros((n_max + 1, p.S))
    for j, germ in enumerate(p.initial_borel()):
        rho = p.disc_radius(j)
        mags = np.abs(germ.coeffs)
        for n in range(n_max + 1):
            total = 0.0
            for i in range(n, germ.order + 1):
                total += mags[i] * math.exp(
                    math.lgamma(i + 1) - math.lgamma(i - n + 1)
                    + (i - n) * math.log(rho))
            out[n, j] = total / (j + 1) ** (p.r1 * n / p.r2)
    return out


def solve_derivative_majorant(p: ProblemSpec, initial_rows: np.ndarray
                              ) -> WeightedGrid:
    """The Taylor-window recursion dominating the scaled derivative sups:

        v[n, h+S]/(n! h!) = sum_k sum_{h1+h2=h} |b_{k,h1}|
            * sum_{l1+l2=n} 2^(l1+1) v[l2, h2+k] / (l2! h2! q^(m1_k h2)).
    """
    tr = p.truncation
    qm = p.q.modulus
    n_max = initial_rows.shape[0] - 1
    if initial_rows.shape[1] != p.S:
        raise DataError("initial rows must have S columns")
    v = np.zeros((n_max + 1, tr.H + 1))
    v[:, :p.S] = initial_rows
    fact = np.array([float(math.factorial(i))
                     for i in range(max(n_max, tr.H) + 1)])
    kernel = 2.0 ** (np.arange(n_max + 1) + 1.0)
    for h in range(0, tr.H - p.S + 1):
        acc = np.zeros(n_max + 1)
        for term in p.terms:
            for h1, b_c in term.b.terms:
                if h1 > h:
                    continue
                h2 = h - h1
                col = v[:, h2 + term.k] / fact[: n_max + 1]
                conv = np.array([kernel[: n + 1][::-1] @ col[: n + 1]
                                 for n in range(n_max + 1)])
                acc += (abs(b_c) / (fact[h2] * qm ** (term.m1 * h2))) * conv
        v[:, h + p.S] = fact[: n_max + 1] * fact[h] * acc
    return WeightedGrid(v, 0, TAYLOR)


def factorial_normalised(V: WeightedGrid) -> WeightedGrid:
    """Divide row l by l!, turning derivative majorants into norm grids."""
    facts = np.array([math.exp(-math.lgamma(l + 1))
                      for l in range(V.l_min, V.l_max + 1)])
    return WeightedGrid(V.values * facts[:, None], V.l_min, V.kind)
