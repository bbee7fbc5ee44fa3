"""Vectorized numpy implementations of the per-element hot loops.

These are the reference kernels; `lamopt._core` holds the compiled
twins with identical signatures and semantics.  Shapes: ne elements,
nq quadrature points per element, n generic point counts.
"""

import numpy as np

EPS_DESIGN = 1e-3


def element_stiffness(C, B, w):
    """Stiffness matrices of square elements: (ne, 18, 18).

    C: (ne, nq, 3, 3) stiffness at quadrature points, B: (nq, 3, 18)
    reference strain matrices, w: (nq,) tensor weights.  In 2D the
    Jacobian factors of a square element cancel the gradient scalings,
    so the result is independent of the element size.
    """
    CB = np.einsum("eqij,qjb->eqib", C, B)
    return np.einsum("qia,eqib,q->eab", B, CB, w, optimize=True)


def qp_strain(ue, B, inv_h):
    """Engineering strains at quadrature points: (ne, nq, 3).

    ue: (ne, 18) element displacement vectors, inv_h: (ne,) inverse
    element sizes.
    """
    eps = np.einsum("qca,ea->eqc", B, ue)
    return eps * (2.0 * inv_h)[:, None, None]


def stress_to_params(sig, l, lam, mu):
    """Optimal laminate fields from Voigt stresses (n, 3).

    Returns (alpha, m, theta, S): lamination angle, relative layer
    fraction, clamped density, and |l1| + |l2|.  Zero stress rows get
    (0, 1/2, eps, 0).
    """
    sig = np.asarray(sig, dtype=float)
    a, d, b = sig[:, 0], sig[:, 1], sig[:, 2]
    mean = 0.5 * (a + d)
    r = np.hypot(0.5 * (a - d), b)
    la, lb = mean + r, mean - r
    swap = np.abs(lb) > np.abs(la)
    l1 = np.where(swap, lb, la)
    l2 = np.where(swap, la, lb)

    # both rows of (sigma - l1 I) are orthogonal to the eigenvector;
    # the larger one avoids cancellation when sigma is near-diagonal
    v0, v1 = b.copy(), l1 - a
    w0, w1 = l1 - d, b
    use_w = np.abs(w0) + np.abs(w1) > np.abs(v0) + np.abs(v1)
    v0 = np.where(use_w, w0, v0)
    v1 = np.where(use_w, w1, v1)
    small = np.abs(v0) + np.abs(v1) < 1e-14 * np.maximum(1.0, np.abs(l1))
    v0 = np.where(small, 1.0, v0)
    v1 = np.where(small, 0.0, v1)
    norm = np.hypot(v0, v1)
    v0, v1 = v0 / norm, v1 / norm
    flip = (v0 < 0) | ((v0 == 0) & (v1 < 0))
    v0 = np.where(flip, -v0, v0)
    v1 = np.where(flip, -v1, v1)

    s = np.abs(l1) + np.abs(l2)
    zero = s == 0.0
    alpha = np.where(zero, 0.0, np.arctan2(v1, v0))
    m = np.abs(l2) / np.where(zero, 1.0, s)
    m = np.clip(np.where(zero, 0.5, m), EPS_DESIGN, 1.0 - EPS_DESIGN)
    scale = np.sqrt((2 * mu + lam) / (4 * mu * (mu + lam) * l))
    theta = np.clip(np.minimum(scale * s, 1.0), EPS_DESIGN, 1.0)
    return alpha, m, theta, s


def eig_vals(sig):
    """Principal values of Voigt stresses, ordered |l1| >= |l2|."""
    sig = np.asarray(sig, dtype=float)
    mean = 0.5 * (sig[:, 0] + sig[:, 1])
    r = np.hypot(0.5 * (sig[:, 0] - sig[:, 1]), sig[:, 2])
    la, lb = mean + r, mean - r
    swap = np.abs(lb) > np.abs(la)
    return np.where(swap, lb, la), np.where(swap, la, lb)


def cbar_entries(m, theta, lam, mu):
    """Unrotated laminate Voigt entries (C1111, C2222, C1122)."""
    kap = lam + mu
    den = 4 * kap * mu * m * (1 - m) * theta ** 2 \
        + (kap + mu) ** 2 * (1 - theta)
    f = 4 * kap * mu / den
    c1111 = f * (kap + mu) * theta * (1 - theta * (1 - m)) * (1 - m)
    c2222 = f * (kap + mu) * theta * (1 - theta * m) * m
    c1122 = f * lam * theta ** 2 * m * (1 - m)
    return c1111, c2222, c1122


def bond_matrices(alpha):
    """Voigt rotation matrices for an array of angles: (n, 3, 3)."""
    c, s = np.cos(alpha), np.sin(alpha)
    M = np.empty(alpha.shape + (3, 3))
    M[..., 0, 0] = c * c
    M[..., 0, 1] = s * s
    M[..., 0, 2] = -2 * c * s
    M[..., 1, 0] = s * s
    M[..., 1, 1] = c * c
    M[..., 1, 2] = 2 * c * s
    M[..., 2, 0] = c * s
    M[..., 2, 1] = -c * s
    M[..., 2, 2] = c * c - s * s
    return M


def laminate_tensors(alpha, m, theta, lam, mu, shear):
    """Rotated laminate stiffnesses: (n, 3, 3)."""
    alpha = np.asarray(alpha, dtype=float)
    c1111, c2222, c1122 = cbar_entries(np.asarray(m, dtype=float),
                                       np.asarray(theta, dtype=float),
                                       lam, mu)
    C = np.zeros(alpha.shape + (3, 3))
    C[..., 0, 0] = c1111
    C[..., 1, 1] = c2222
    C[..., 0, 1] = C[..., 1, 0] = c1122
    C[..., 2, 2] = shear
    M = bond_matrices(alpha)
    return np.einsum("...ij,...jk,...lk->...il", M, C, M)


def tensor_derivatives(m, theta, lam, mu):
    """Unrotated derivative tensors (dC/dm, dC/dtheta): (n, 3, 3) each."""
    m = np.asarray(m, dtype=float)
    theta = np.asarray(theta, dtype=float)
    kap = lam + mu
    den = 4 * kap * mu * m * (1 - m) * theta ** 2 \
        + (kap + mu) ** 2 * (1 - theta)
    n11 = 4 * kap * mu * (kap + mu) * theta * (1 - theta * (1 - m)) * (1 - m)
    n22 = 4 * kap * mu * (kap + mu) * theta * (1 - theta * m) * m
    n12 = 4 * kap * mu * lam * theta ** 2 * m * (1 - m)
    dden_m = 4 * kap * mu * theta ** 2 * (1 - 2 * m)
    dden_th = 8 * kap * mu * m * (1 - m) * theta - (kap + mu) ** 2
    dn11_m = 4 * kap * mu * (kap + mu) * theta * (2 * theta * (1 - m) - 1)
    dn22_m = 4 * kap * mu * (kap + mu) * theta * (1 - 2 * theta * m)
    dn12_m = 4 * kap * mu * lam * theta ** 2 * (1 - 2 * m)
    dn11_th = 4 * kap * mu * (kap + mu) * (1 - m) * (1 - 2 * theta * (1 - m))
    dn22_th = 4 * kap * mu * (kap + mu) * m * (1 - 2 * theta * m)
    dn12_th = 8 * kap * mu * lam * theta * m * (1 - m)

    den2 = den ** 2
    dm = np.zeros(m.shape + (3, 3))
    dth = np.zeros(m.shape + (3, 3))
    dm[..., 0, 0] = (dn11_m * den - n11 * dden_m) / den2
    dm[..., 1, 1] = (dn22_m * den - n22 * dden_m) / den2
    dm[..., 0, 1] = dm[..., 1, 0] = (dn12_m * den - n12 * dden_m) / den2
    dth[..., 0, 0] = (dn11_th * den - n11 * dden_th) / den2
    dth[..., 1, 1] = (dn22_th * den - n22 * dden_th) / den2
    dth[..., 0, 1] = dth[..., 1, 0] = (dn12_th * den - n12 * dden_th) / den2
    return dm, dth
