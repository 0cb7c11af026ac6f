"""Cubic spline interpolation through strictly increasing knots.

Uses the second-derivative (moment) formulation: the moments M_i = S''(x_i)
satisfy a banded linear system assembled from C2 continuity at the interior
knots plus one end condition per side:

  natural     S'' = 0 at both end knots
  not_a_knot  S''' continuous across the second and second-to-last knots
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def solve_moments(xs: np.ndarray, ys: np.ndarray, bc: str = "natural") -> np.ndarray:
    """Second derivatives of the interpolating cubic spline at the knots."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.size
    if n < 2:
        raise ValueError("need at least 2 knots")
    if ys.size != n:
        raise ValueError("knot positions and values differ in length")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("knot positions must be strictly increasing")
    if n == 2:
        return np.zeros(2)

    h = np.diff(xs)
    slope = np.diff(ys) / h
    rhs = np.zeros(n)
    rhs[1:-1] = 6.0 * np.diff(slope)

    if bc == "natural":
        # Tridiagonal system; M_0 = M_{n-1} = 0.
        ab = np.zeros((3, n))
        ab[0, 2:] = h[1:]                       # superdiagonal
        ab[1, 0] = ab[1, -1] = 1.0              # diagonal
        ab[1, 1:-1] = 2.0 * (h[:-1] + h[1:])
        ab[2, :-2] = h[:-1]                     # subdiagonal
        return solve_banded((1, 1), ab, rhs)

    if bc == "not_a_knot":
        if n == 3:
            # Both end conditions collapse onto the middle knot; the spline
            # degenerates to the single parabola through the three points.
            m = 2.0 * (slope[1] - slope[0]) / (h[0] + h[1])
            return np.full(3, m)
        # Banded layout: ab[2 + i - j, j] holds matrix entry (i, j).
        ab = np.zeros((5, n))
        ab[3, :-2] = h[:-1]
        ab[2, 1:-1] = 2.0 * (h[:-1] + h[1:])
        ab[1, 2:] = h[1:]
        # h1*M0 - (h0+h1)*M1 + h0*M2 = 0 and its mirror at the right end.
        ab[2, 0] = h[1]
        ab[1, 1] = -(h[0] + h[1])
        ab[0, 2] = h[0]
        ab[2, n - 1] = h[-2]
        ab[3, n - 2] = -(h[-2] + h[-1])
        ab[4, n - 3] = h[-1]
        return solve_banded((2, 2), ab, rhs)

    raise ValueError(f"unknown boundary condition {bc!r}")


def evaluate_spline(xs, ys, moments, query) -> np.ndarray:
    """Evaluate the spline at ``query``; queries outside the knot range use
    the end-interval cubic."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64)
    idx = np.clip(np.searchsorted(xs, q, side="right") - 1, 0, xs.size - 2)
    h = xs[idx + 1] - xs[idx]
    a = xs[idx + 1] - q
    b = q - xs[idx]
    m0, m1 = moments[idx], moments[idx + 1]
    return (
        m0 * a**3 / (6.0 * h)
        + m1 * b**3 / (6.0 * h)
        + (ys[idx] / h - m0 * h / 6.0) * a
        + (ys[idx + 1] / h - m1 * h / 6.0) * b
    )


def cubic_spline(xs, ys, query, bc: str = "natural") -> np.ndarray:
    """Fit and evaluate in one call."""
    return evaluate_spline(xs, ys, solve_moments(xs, ys, bc), query)
