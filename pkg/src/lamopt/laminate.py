"""Optimal rank-2 laminates for compliance minimization in plane stress.

Everything here works on a single stress state and is written for
clarity; the vectorized twins used in assembly live in the kernel
modules and are tested against these.

Voigt convention: stresses are (s11, s22, s12), strains
(e11, e22, 2*e12), so energy densities are plain dot products and the
stiffness matrix maps engineering strain to stress.  The laminate
tensor is built in its principal frame (axis 1 = dominant principal
stress) and rotated with the Bond transformation; the vanishing shear
stiffness is regularized before the rotation.
"""

import math
from dataclasses import dataclass

import numpy as np

# Clamp width for the design fields and the shear regularization of the
# degenerate laminate, shared by the whole package.
EPS_DESIGN = 1e-3
SHEAR_REG = 1e-2


@dataclass(frozen=True)
class IsotropicMaterial:
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if self.mu <= 0 or self.lam + self.mu <= 0:
            raise ValueError("need mu > 0 and lam + mu > 0")

    @property
    def kappa(self):
        return self.lam + self.mu

    def voigt(self):
        """Stiffness of the solid material, shear entry included."""
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0],
                         [lam, lam + 2 * mu, 0.0],
                         [0.0, 0.0, mu]])


@dataclass(frozen=True)
class LaminateParams:
    alpha: float
    m: float
    theta: float


def eig_sym2(sigma):
    """Eigen-decomposition of a symmetric 2x2 matrix.

    Returns (l1, l2, t1, t2) with |l1| >= |l2| (ties resolved to
    l1 >= l2), t1 the unit eigenvector of l1 with t1[0] >= 0 (and
    t1[1] >= 0 if t1[0] == 0), and t2 = rot90(t1).
    """
    sigma = np.asarray(sigma, dtype=float)
    a, d, b = sigma[0, 0], sigma[1, 1], sigma[0, 1]
    mean = 0.5 * (a + d)
    r = math.hypot(0.5 * (a - d), b)
    la, lb = mean + r, mean - r
    if abs(lb) > abs(la):
        l1, l2 = lb, la
    else:
        l1, l2 = la, lb
    # eigenvector of l1: both rows of (sigma - l1 I) are orthogonal to
    # it; take the larger one, the smaller may be pure cancellation
    v = np.array([b, l1 - a])
    w = np.array([l1 - d, b])
    if abs(w[0]) + abs(w[1]) > abs(v[0]) + abs(v[1]):
        v = w
    if abs(v[0]) + abs(v[1]) < 1e-14 * max(1.0, abs(l1)):
        v = np.array([1.0, 0.0])
    v = v / math.hypot(v[0], v[1])
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    t2 = np.array([-v[1], v[0]])
    return l1, l2, v, t2


def params_from_stress(sigma, l, mat):
    """Optimal laminate parameters for one stress state.

    l is the volume multiplier; larger l makes material more expensive
    and lowers theta.  A zero stress returns the degenerate parameters
    (alpha 0, m 1/2, theta at the lower clamp).
    """
    if l <= 0:
        raise ValueError("multiplier l must be positive")
    l1, l2, t1, _ = eig_sym2(sigma)
    s = abs(l1) + abs(l2)
    if s == 0.0:
        return LaminateParams(0.0, 0.5, EPS_DESIGN)
    alpha = math.atan2(t1[1], t1[0])
    m = min(max(abs(l2) / s, EPS_DESIGN), 1.0 - EPS_DESIGN)
    lam, mu = mat.lam, mat.mu
    theta = math.sqrt((2 * mu + lam) / (4 * mu * (mu + lam) * l)) * s
    theta = min(max(min(theta, 1.0), EPS_DESIGN), 1.0)
    return LaminateParams(alpha, m, theta)


def _cbar_entries(m, theta, mat):
    """Voigt entries (C1111, C2222, C1122) of the unrotated laminate."""
    lam, mu, kap = mat.lam, mat.mu, mat.kappa
    den = 4 * kap * mu * m * (1 - m) * theta ** 2 + (kap + mu) ** 2 * (1 - theta)
    c1111 = 4 * kap * mu * (kap + mu) * theta * (1 - theta * (1 - m)) * (1 - m) / den
    c2222 = 4 * kap * mu * (kap + mu) * theta * (1 - theta * m) * m / den
    c1122 = 4 * kap * mu * lam * theta ** 2 * m * (1 - m) / den
    return c1111, c2222, c1122


def bond_matrix(alpha):
    """Voigt-space rotation (Bond matrix) for a frame rotation by alpha."""
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c * c, s * s, -2 * c * s],
                     [s * s, c * c, 2 * c * s],
                     [c * s, -c * s, c * c - s * s]])


def rotate_voigt(C, alpha):
    M = bond_matrix(alpha)
    return M @ C @ M.T


def effective_tensor(params, mat, shear_reg=SHEAR_REG):
    """Voigt stiffness of the laminate in the global frame (3x3)."""
    c1111, c2222, c1122 = _cbar_entries(params.m, params.theta, mat)
    C = np.array([[c1111, c1122, 0.0],
                  [c1122, c2222, 0.0],
                  [0.0, 0.0, max(0.0, shear_reg)]])
    return rotate_voigt(C, params.alpha)


def tensor_derivatives(params, mat):
    """(dC/dm, dC/dtheta) of the unrotated laminate tensor, 3x3 each.

    The regularized shear entry is constant, so its derivatives vanish.
    """
    lam, mu, kap = mat.lam, mat.mu, mat.kappa
    m, th = params.m, params.theta
    den = 4 * kap * mu * m * (1 - m) * th ** 2 + (kap + mu) ** 2 * (1 - th)
    n11 = 4 * kap * mu * (kap + mu) * th * (1 - th * (1 - m)) * (1 - m)
    n22 = 4 * kap * mu * (kap + mu) * th * (1 - th * m) * m
    n12 = 4 * kap * mu * lam * th ** 2 * m * (1 - m)

    dden_m = 4 * kap * mu * th ** 2 * (1 - 2 * m)
    dden_th = 8 * kap * mu * m * (1 - m) * th - (kap + mu) ** 2
    dn11_m = 4 * kap * mu * (kap + mu) * th * (2 * th * (1 - m) - 1)
    dn22_m = 4 * kap * mu * (kap + mu) * th * (1 - 2 * th * m)
    dn12_m = 4 * kap * mu * lam * th ** 2 * (1 - 2 * m)
    dn11_th = 4 * kap * mu * (kap + mu) * (1 - m) * (1 - 2 * th * (1 - m))
    dn22_th = 4 * kap * mu * (kap + mu) * m * (1 - 2 * th * m)
    dn12_th = 8 * kap * mu * lam * th * m * (1 - m)

    def quot(dn, n, dd):
        return (dn * den - n * dd) / den ** 2

    dm = np.zeros((3, 3))
    dm[0, 0] = quot(dn11_m, n11, dden_m)
    dm[1, 1] = quot(dn22_m, n22, dden_m)
    dm[0, 1] = dm[1, 0] = quot(dn12_m, n12, dden_m)
    dth = np.zeros((3, 3))
    dth[0, 0] = quot(dn11_th, n11, dden_th)
    dth[1, 1] = quot(dn22_th, n22, dden_th)
    dth[0, 1] = dth[1, 0] = quot(dn12_th, n12, dden_th)
    return dm, dth


def hs_energy_density(sigma, theta, mat):
    """Complementary energy of the optimal laminate at density theta.

    Equals  A^-1 sigma : sigma
          + (kappa+mu)(1-theta) / (4 kappa mu theta) * (|l1|+|l2|)^2
    where A is the solid Hooke tensor and l1, l2 the principal
    stresses; for theta = 1 this is the solid's complementary energy.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")
    sigma = np.asarray(sigma, dtype=float)
    lam, mu, kap = mat.lam, mat.mu, mat.kappa
    l1, l2, _, _ = eig_sym2(sigma)
    ss = float(np.sum(sigma * sigma))
    tr = sigma[0, 0] + sigma[1, 1]
    base = 0.5 / mu * ss - lam / (4 * mu * kap) * tr ** 2
    s = abs(l1) + abs(l2)
    return base + (kap + mu) * (1 - theta) / (4 * kap * mu * theta) * s ** 2


def volume_of(theta, mesh):
    """Material volume of an elementwise density field."""
    theta = np.asarray(theta, dtype=float)
    return float(np.dot(theta, mesh.areas))
