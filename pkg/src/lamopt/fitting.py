"""Extrapolation of mesh-convergent quantities by power-law fits."""

import math
from dataclasses import dataclass

import numpy as np

P_RANGE = (0.1, 4.0)


@dataclass(frozen=True)
class FitResult:
    J_star: float
    c: float
    p: float
    residual: float          # root mean square misfit
    identifiable: bool       # False when the data carry no rate


def _profile(h, J, p):
    """Best (J*, c) at fixed rate p and the squared misfit."""
    A = np.column_stack([np.ones_like(h), h ** p])
    coef, *_ = np.linalg.lstsq(A, J, rcond=None)
    r = A @ coef - J
    return coef[0], coef[1], float(r @ r)


def fit_extrapolation(h, J):
    """Fit J(h) = J* + c h^p over at least three distinct mesh sizes.

    The rate is found by a grid scan plus golden-section refinement of
    the profiled least-squares misfit over p in [0.1, 4]; J* and c come
    from the linear subproblem.  Data with no resolvable h-dependence
    (c almost 0) are flagged identifiable=False, with p pinned at 1.
    """
    h = np.asarray(h, dtype=float)
    J = np.asarray(J, dtype=float)
    if len(h) != len(J) or len(h) < 3:
        raise ValueError("need at least three (h, J) pairs")
    if np.any(h <= 0):
        raise ValueError("mesh sizes must be positive")
    if len(np.unique(h)) != len(h):
        raise ValueError("mesh sizes must be distinct")

    grid = np.linspace(P_RANGE[0], P_RANGE[1], 79)
    miss = [_profile(h, J, p)[2] for p in grid]
    k = int(np.argmin(miss))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = _profile(h, J, x1)[2]
    f2 = _profile(h, J, x2)[2]
    while b - a > 1e-12:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = _profile(h, J, x1)[2]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = _profile(h, J, x2)[2]
    p = 0.5 * (a + b)
    J_star, c, ss = _profile(h, J, p)
    identifiable = abs(c) > 1e-12 * max(1.0, abs(J_star))
    if not identifiable:
        p = 1.0
        J_star, c, ss = _profile(h, J, p)
    return FitResult(J_star=float(J_star), c=float(c), p=float(p),
                     residual=math.sqrt(ss / len(h)),
                     identifiable=identifiable)
