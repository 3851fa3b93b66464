"""Small least-squares helpers shared by the certification fits."""

from __future__ import annotations

import numpy as np


def affine_fit(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Least-squares fit ys ~ intercept + slope*xs; returns residuals too."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size == 0:
        raise ValueError("empty fit data")
    if xs.size == 1:
        return float(ys[0]), 0.0, np.zeros(1)
    design = np.column_stack([np.ones_like(xs), xs])
    sol, *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - design @ sol
    return float(sol[0]), float(sol[1]), resid


def plane_fit(x1: np.ndarray, x2: np.ndarray, ys: np.ndarray
              ) -> tuple[float, float, float, np.ndarray]:
    """Least-squares fit ys ~ c + a*x1 + b*x2; returns (c, a, b, residuals)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ys = np.asarray(ys, dtype=float)
    design = np.column_stack([np.ones_like(x1), x1, x2])
    sol, *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = ys - design @ sol
    return float(sol[0]), float(sol[1]), float(sol[2]), resid
