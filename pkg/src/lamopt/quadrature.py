"""Gauss rules and reference-element tables for bi-quadratic quads.

Reference element is [-1,1]^2.  The nine nodes sit on the tensor grid
{-1,0,1}^2 and are numbered 3*b + a where a indexes x and b indexes y,
so node 0 is the lower-left corner, node 4 the centre, node 8 the
upper-right corner.  All tables returned here are plain ndarrays; the
mesh and FEM layers combine them with per-element scalings.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss1d(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1,1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x.copy(), w.copy()


@lru_cache(maxsize=None)
def gauss2d(n):
    """Tensor rule on [-1,1]^2: points (n*n, 2), weights (n*n,).

    Point k = n*iy + ix pairs with x[ix], y[iy]; this y-major ordering
    matches the local node numbering.
    """
    x, w = gauss1d(n)
    xx, yy = np.meshgrid(x, x)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    wts = np.outer(w, w).ravel()
    return pts, wts


def shape1d(x):
    """Quadratic Lagrange values on [-1,1] (nodes -1, 0, 1): (k, 3)."""
    x = np.asarray(x, dtype=float)
    return np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)],
                    axis=-1)


def dshape1d(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x - 0.5, -2.0 * x, x + 0.5], axis=-1)


def q2_shape(pts):
    """Bi-quadratic shape values at reference points: (k, 9)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    nx = shape1d(pts[:, 0])
    ny = shape1d(pts[:, 1])
    out = np.empty((len(pts), 9))
    for b in range(3):
        for a in range(3):
            out[:, 3 * b + a] = nx[:, a] * ny[:, b]
    return out


def q2_dshape(pts):
    """Reference-coordinate gradients of the shape functions: (k, 9, 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    nx, ny = shape1d(pts[:, 0]), shape1d(pts[:, 1])
    dx, dy = dshape1d(pts[:, 0]), dshape1d(pts[:, 1])
    out = np.empty((len(pts), 9, 2))
    for b in range(3):
        for a in range(3):
            out[:, 3 * b + a, 0] = dx[:, a] * ny[:, b]
            out[:, 3 * b + a, 1] = nx[:, a] * dy[:, b]
    return out


def strain_matrix(pts):
    """Reference strain-displacement matrices: (k, 3, 18).

    Rows are (e11, e22, 2*e12) in reference derivatives; multiplying by
    2/h turns them into physical strains on a square element of size h.
    Column 2*a is the x displacement of node a, column 2*a+1 the y one.
    """
    dN = q2_dshape(pts)
    k = dN.shape[0]
    B = np.zeros((k, 3, 18))
    B[:, 0, 0::2] = dN[:, :, 0]
    B[:, 1, 1::2] = dN[:, :, 1]
    B[:, 2, 0::2] = dN[:, :, 1]
    B[:, 2, 1::2] = dN[:, :, 0]
    return B


def lagrange_values(nodes, x):
    """Values of the Lagrange basis on the given 1D nodes: (k, len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.ones((x.size, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[:, i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return out


def lagrange_derivatives(nodes, x):
    """First derivatives of the Lagrange basis at x: (k, len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.zeros((x.size, n))
    for i in range(n):
        for m in range(n):
            if m == i:
                continue
            term = np.full(x.size, 1.0 / (nodes[i] - nodes[m]))
            for j in range(n):
                if j != i and j != m:
                    term *= (x - nodes[j]) / (nodes[i] - nodes[j])
            out[:, i] += term
    return out


# Bi-quadratic monomial exponents, used for local least-squares fits and
# for the elementwise polynomial stress representation.
MONO_EXP = [(i, j) for j in range(3) for i in range(3)]


def mono_values(pts):
    """Monomials x^i y^j, i,j <= 2, at reference points: (k, 9)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([x ** i * y ** j for (i, j) in MONO_EXP])


def mono_gradients(pts):
    """Reference gradients of the monomials: (k, 9, 2)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    out = np.zeros((len(pts), 9, 2))
    for c, (i, j) in enumerate(MONO_EXP):
        if i:
            out[:, c, 0] = i * x ** (i - 1) * y ** j
        if j:
            out[:, c, 1] = j * y ** (j - 1) * x ** i
    return out
