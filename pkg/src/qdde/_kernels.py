"""Hot numeric kernels: theta sums, spiral margins, bilateral Laplace sums.

Every kernel is a plain scalar loop written once.  When numba is available
(and not disabled) the loops are JIT-compiled; otherwise the same bytecode
runs on the interpreter, so both backends produce identical floating-point
results.

Backend selection, at import time:
  QDDE_BACKEND=auto   use numba when importable (default)
  QDDE_BACKEND=numba  require numba, fail loudly if missing
  QDDE_BACKEND=numpy  pure interpreter path, no JIT
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND_CHOICE = os.environ.get("QDDE_BACKEND", "auto").strip().lower()
if _BACKEND_CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"QDDE_BACKEND must be one of auto|numba|numpy, got {_BACKEND_CHOICE!r}"
    )


def _plain_njit(*args, **kwargs):
    # mirrors numba.njit's dual use as @njit and @njit(...)
    if args and callable(args[0]) and not kwargs:
        return args[0]

    def deco(func):
        return func

    return deco


NUMBA_ENABLED = False
if _BACKEND_CHOICE in ("auto", "numba"):
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        if _BACKEND_CHOICE == "numba":
            raise

njit = _numba_njit if NUMBA_ENABLED else _plain_njit

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

# Hard cap on bilateral summation indices; the theta terms decay like
# |q|^(-n^2/2) past the peak so this can only bind on corrupt input.
N_CAP = 20000


@njit(cache=True)
def theta_sum(log_q: complex, log_x: complex, tol: float, n_cap: int) -> complex:
    """Bilateral sum of exp(-(n(n-1)/2) log_q + n log_x) over n in Z.

    Terms are evaluated through the exponential of the exponent so that
    large integer powers do not accumulate multiplication drift.  Each
    side stops after three consecutive terms below tol * |partial sum|.
    """
    total = 1.0 + 0.0j  # n = 0 term
    small = 0
    n = 0
    while small < 3 and n < n_cap:
        n += 1
        term = np.exp(-(n * (n - 1) / 2.0) * log_q + n * log_x)
        total += term
        if abs(term) <= tol * abs(total):
            small += 1
        else:
            small = 0
    small = 0
    n = 0
    while small < 3 and n < n_cap:
        n -= 1
        term = np.exp(-(n * (n - 1) / 2.0) * log_q + n * log_x)
        total += term
        if abs(term) <= tol * abs(total):
            small += 1
        else:
            small = 0
    return total


@njit(cache=True)
def theta_abs_sum(log_qabs: float, log_xabs: float, tol: float, n_cap: int) -> float:
    """Positive envelope: bilateral sum of |q|^(-n(n-1)/2) |x|^n."""
    total = 1.0
    small = 0
    n = 0
    while small < 3 and n < n_cap:
        n += 1
        term = np.exp(-(n * (n - 1) / 2.0) * log_qabs + n * log_xabs)
        total += term
        if term <= tol * total:
            small += 1
        else:
            small = 0
    small = 0
    n = 0
    while small < 3 and n < n_cap:
        n -= 1
        term = np.exp(-(n * (n - 1) / 2.0) * log_qabs + n * log_xabs)
        total += term
        if term <= tol * total:
            small += 1
        else:
            small = 0
    return total


@njit(cache=True)
def theta_row(
    log_q: complex, log_x0: complex, k_lo: int, k_hi: int, tol: float, n_cap: int
) -> np.ndarray:
    """theta values at x0 * q^k for k = k_lo .. k_hi (inclusive)."""
    out = np.empty(k_hi - k_lo + 1, dtype=np.complex128)
    for i in range(k_hi - k_lo + 1):
        out[i] = theta_sum(log_q, log_x0 + (k_lo + i) * log_q, tol, n_cap)
    return out


@njit(cache=True)
def spiral_margin_window(
    ratio: complex, log_q: complex, k_lo: int, k_hi: int
) -> float:
    """min over k in [k_lo, k_hi] of |1 + ratio * q^(-k)|."""
    best = np.inf
    for k in range(k_lo, k_hi + 1):
        val = abs(1.0 + ratio * np.exp(-k * log_q))
        if val < best:
            best = val
    return best


@njit(cache=True)
def bilateral_ratio_sum(terms: np.ndarray, center: int, tol: float):
    """Sum terms[center +/- i] outward with the three-small-terms stop rule.

    Returns (value, converged_up, converged_down, last_term_size).  The
    caller decides whether an unconverged side is an error; last_term_size
    is the largest magnitude among the final terms on unconverged sides.
    """
    total = terms[center]
    n = terms.shape[0]
    small = 0
    conv_up = False
    last_up = 0.0
    i = center + 1
    while i < n:
        t = terms[i]
        total += t
        last_up = abs(t)
        if abs(t) <= tol * abs(total):
            small += 1
            if small >= 3:
                conv_up = True
                break
        else:
            small = 0
        i += 1
    small = 0
    conv_down = False
    last_down = 0.0
    i = center - 1
    while i >= 0:
        t = terms[i]
        total += t
        last_down = abs(t)
        if abs(t) <= tol * abs(total):
            small += 1
            if small >= 3:
                conv_down = True
                break
        else:
            small = 0
        i -= 1
    last = 0.0
    if not conv_up:
        last = last_up
    if not conv_down and last_down > last:
        last = last_down
    return total, conv_up, conv_down, last
