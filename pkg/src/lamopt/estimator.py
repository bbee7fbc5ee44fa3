"""Goal-oriented error indicators for the compliance functional.

Each element collects four products of residuals and weights:

  eta_T = rho_u * omega_u  +  rho_edge * omega_edge
        + 0.5 * rho_m * omega_m  +  0.5 * rho_th * omega_th

The primal residuals come from an elementwise bi-quadratic polynomial
representation of the stress (interpolation at the quadrature points),
the weights from comparing the solution with its bi-quartic
re-interpolation on the 2x2 sibling patch.  Elements without a patch
fall back to a local least-squares fit for the primal weight, a direct
parameter comparison for the layer-fraction weight, and zero for the
density weight.  The layer-fraction weight needs the laminate
parameters behind the smoothed strain field; those are recovered by a
damped Newton iteration on the pointwise optimality system.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .laminate import EPS_DESIGN, SHEAR_REG
from .quadmesh import SIDE_NODES, WEST, EAST, SOUTH, NORTH, sibling_patch
from .quadrature import (gauss1d, gauss2d, lagrange_derivatives,
                         lagrange_values, mono_gradients, mono_values,
                         q2_shape)

SIDE_NORMALS = ((-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0))


# -- pointwise parameter recovery ------------------------------------------

def _bond(alpha):
    return kernels.bond_matrices(np.asarray(alpha, dtype=float))


def _bond_deriv(alpha):
    s2, c2 = np.sin(2 * alpha), np.cos(2 * alpha)
    M = np.empty(np.shape(alpha) + (3, 3))
    M[..., 0, 0], M[..., 0, 1], M[..., 0, 2] = -s2, s2, -2 * c2
    M[..., 1, 0], M[..., 1, 1], M[..., 1, 2] = s2, -s2, 2 * c2
    M[..., 2, 0], M[..., 2, 1], M[..., 2, 2] = c2, -c2, -2 * s2
    return M


def _model_stress(alpha, m, theta, eps, lam, mu):
    """Voigt stress of the regularized laminate at given parameters."""
    c1111, c2222, c1122 = kernels.cbar_entries(m, theta, lam, mu)
    M = _bond(alpha)
    # Mt_eps = M^T eps
    t = np.einsum("nji,nj->ni", M, eps)
    Ct = np.empty_like(t)
    Ct[:, 0] = c1111 * t[:, 0] + c1122 * t[:, 1]
    Ct[:, 1] = c1122 * t[:, 0] + c2222 * t[:, 1]
    Ct[:, 2] = SHEAR_REG * t[:, 2]
    return np.einsum("nij,nj->ni", M, Ct)


def _principal_stress_voigt(alpha, l1, l2):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.stack([c * c * l1 + s * s * l2,
                     s * s * l1 + c * c * l2,
                     c * s * (l1 - l2)], axis=1)


def _m_of(l1, l2):
    S = np.abs(l1) + np.abs(l2)
    safe = np.where(S > 0, S, 1.0)
    m = np.where(S > 0, np.abs(l2) / safe, 0.5)
    return np.clip(m, EPS_DESIGN, 1.0 - EPS_DESIGN), S


def _residual_vec(x, eps, theta, lam, mu):
    alpha, l1, l2 = x[:, 0], x[:, 1], x[:, 2]
    m, _ = _m_of(l1, l2)
    return (_model_stress(alpha, m, theta, eps, lam, mu)
            - _principal_stress_voigt(alpha, l1, l2))


def _jacobian_vec(x, eps, theta, lam, mu):
    n = len(x)
    alpha, l1, l2 = x[:, 0], x[:, 1], x[:, 2]
    m, S = _m_of(l1, l2)
    c1111, c2222, c1122 = kernels.cbar_entries(m, theta, lam, mu)
    M = _bond(alpha)
    dM = _bond_deriv(alpha)
    t = np.einsum("nji,nj->ni", M, eps)
    Ct = np.empty_like(t)
    Ct[:, 0] = c1111 * t[:, 0] + c1122 * t[:, 1]
    Ct[:, 1] = c1122 * t[:, 0] + c2222 * t[:, 1]
    Ct[:, 2] = SHEAR_REG * t[:, 2]

    # d(model)/dalpha = M' C M^T eps + M C M'^T eps
    dt = np.einsum("nji,nj->ni", dM, eps)
    Cdt = np.empty_like(dt)
    Cdt[:, 0] = c1111 * dt[:, 0] + c1122 * dt[:, 1]
    Cdt[:, 1] = c1122 * dt[:, 0] + c2222 * dt[:, 1]
    Cdt[:, 2] = SHEAR_REG * dt[:, 2]
    dmodel_a = (np.einsum("nij,nj->ni", dM, Ct)
                + np.einsum("nij,nj->ni", M, Cdt))

    # d(model)/dlk through m, zero where m sits on a clamp
    dCm, _ = kernels.tensor_derivatives(m, theta, lam, mu)
    dCm_t = np.einsum("nij,nj->ni", dCm, t)
    dmodel_m = np.einsum("nij,nj->ni", M, dCm_t)
    raw_m = np.abs(l2) / np.where(S > 0, S, 1.0)
    interior = ((raw_m > EPS_DESIGN) & (raw_m < 1.0 - EPS_DESIGN)
                & (S > 0))
    dm_dl1 = np.where(interior, -np.sign(l1) * np.abs(l2)
                      / np.where(S > 0, S * S, 1.0), 0.0)
    dm_dl2 = np.where(interior, np.sign(l2) * np.abs(l1)
                      / np.where(S > 0, S * S, 1.0), 0.0)

    cc, ss = np.cos(alpha) ** 2, np.sin(alpha) ** 2
    cs = np.cos(alpha) * np.sin(alpha)
    s2 = 2 * cs
    c2 = cc - ss
    dtar_a = np.stack([(l2 - l1) * s2, (l1 - l2) * s2,
                       (l1 - l2) * c2], axis=1)
    dtar_l1 = np.stack([cc, ss, cs], axis=1)
    dtar_l2 = np.stack([ss, cc, -cs], axis=1)

    J = np.empty((n, 3, 3))
    J[:, :, 0] = dmodel_a - dtar_a
    J[:, :, 1] = dmodel_m * dm_dl1[:, None] - dtar_l1
    J[:, :, 2] = dmodel_m * dm_dl2[:, None] - dtar_l2
    return J


def _solve3(J, rhs):
    """Batched 3x3 solves by adjugate; singular rows are flagged."""
    a = J
    det = (a[:, 0, 0] * (a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1])
           - a[:, 0, 1] * (a[:, 1, 0] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 0])
           + a[:, 0, 2] * (a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]))
    scale = np.max(np.abs(a), axis=(1, 2)) ** 3 + 1e-300
    ok = np.abs(det) > 1e-14 * scale
    inv_det = np.where(ok, 1.0 / np.where(det != 0, det, 1.0), 0.0)
    adj = np.empty_like(a)
    adj[:, 0, 0] = a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1]
    adj[:, 0, 1] = a[:, 0, 2] * a[:, 2, 1] - a[:, 0, 1] * a[:, 2, 2]
    adj[:, 0, 2] = a[:, 0, 1] * a[:, 1, 2] - a[:, 0, 2] * a[:, 1, 1]
    adj[:, 1, 0] = a[:, 1, 2] * a[:, 2, 0] - a[:, 1, 0] * a[:, 2, 2]
    adj[:, 1, 1] = a[:, 0, 0] * a[:, 2, 2] - a[:, 0, 2] * a[:, 2, 0]
    adj[:, 1, 2] = a[:, 0, 2] * a[:, 1, 0] - a[:, 0, 0] * a[:, 1, 2]
    adj[:, 2, 0] = a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]
    adj[:, 2, 1] = a[:, 0, 1] * a[:, 2, 0] - a[:, 0, 0] * a[:, 2, 1]
    adj[:, 2, 2] = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    x = np.einsum("nij,nj->ni", adj, rhs) * inv_det[:, None]
    return x, ok


def newton_recover(eps, theta, alpha0, l10, l20, mat, tol=1e-10,
                   max_iter=50):
    """Laminate parameters behind given strains, by damped Newton.

    Solves model_stress(alpha, m(l1,l2), theta) = principal stress
    built from (alpha, l1, l2), for each row of eps.  Returns
    (alpha, l1, l2, m, converged): rows that fail to reach the residual
    tolerance keep their last iterate with converged False.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    n = len(eps)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,)).copy()
    x = np.stack([np.broadcast_to(np.asarray(alpha0, dtype=float), (n,)),
                  np.broadcast_to(np.asarray(l10, dtype=float), (n,)),
                  np.broadcast_to(np.asarray(l20, dtype=float), (n,))],
                 axis=1).astype(float).copy()
    lam, mu = mat.lam, mat.mu
    # zero strain carries no parameter information: flagged, not solved
    zero = np.all(eps == 0.0, axis=1)
    F = _residual_vec(x, eps, theta, lam, mu)
    fnorm = np.max(np.abs(F), axis=1)
    alive = ~zero & (fnorm > tol)
    for _ in range(max_iter):
        if not np.any(alive):
            break
        J = _jacobian_vec(x, eps, theta, lam, mu)
        delta, ok = _solve3(J, -F)
        alive &= ok
        t = np.where(alive, 1.0, 0.0)
        improved = np.zeros(n, dtype=bool)
        for _ls in range(20):
            trial = x + t[:, None] * delta
            Ft = _residual_vec(trial, eps, theta, lam, mu)
            ftn = np.max(np.abs(Ft), axis=1)
            better = alive & ~improved & (ftn < fnorm)
            x[better] = trial[better]
            F[better] = Ft[better]
            fnorm[better] = ftn[better]
            improved |= better
            t = np.where(alive & ~improved, 0.5 * t, t)
            if not np.any(alive & ~improved):
                break
        alive &= improved            # stalled rows give up
        alive &= fnorm > tol
    m, _ = _m_of(x[:, 1], x[:, 2])
    converged = ~zero & (fnorm <= tol)
    return x[:, 0], x[:, 1], x[:, 2], m, converged


@dataclass
class RecoveryResult:
    alpha: float
    l1: float
    l2: float
    m: float
    converged: bool
    residual: float


def recover_params(eps, theta, mat, init, tol=1e-10, max_iter=50):
    """Single-point convenience wrapper around newton_recover."""
    eps = np.asarray(eps, dtype=float)
    a0, l10, l20 = init
    a, l1, l2, m, conv = newton_recover(eps[None, :], [theta], [a0], [l10],
                                        [l20], mat, tol=tol,
                                        max_iter=max_iter)
    x = np.array([[a[0], l1[0], l2[0]]])
    res = float(np.max(np.abs(_residual_vec(
        x, eps[None, :], np.array([theta]), mat.lam, mat.mu))))
    return RecoveryResult(alpha=float(a[0]), l1=float(l1[0]),
                          l2=float(l2[0]), m=float(m[0]),
                          converged=bool(conv[0]), residual=res)


# -- stress projection and residuals ---------------------------------------

def stress_coeffs(space, sig_qp):
    """Bi-quadratic monomial coefficients of the stress: (ne, 3, 9)."""
    P = getattr(space, "_proj_pinv", None)
    if P is None:
        V = mono_values(space.qp_ref)
        P = np.linalg.pinv(V)          # (9, nq)
        space._proj_pinv = P
    return np.einsum("kq,eqc->eck", P, sig_qp)


def cell_residuals(space, coeffs):
    """Interior residual norms ||div sigma||_L2(T): (ne,).

    Derivatives in reference coordinates carry a factor h/2 relative to
    physical ones; together with the area element the element size
    cancels from the integral.
    """
    dmono = mono_gradients(space.qp_ref)     # (nq, 9, 2)
    dx, dy = dmono[:, :, 0], dmono[:, :, 1]
    divx = np.einsum("qk,ek->eq", dx, coeffs[:, 0]) \
        + np.einsum("qk,ek->eq", dy, coeffs[:, 2])
    divy = np.einsum("qk,ek->eq", dx, coeffs[:, 2]) \
        + np.einsum("qk,ek->eq", dy, coeffs[:, 1])
    return np.sqrt(np.einsum("q,eq->e", space.w2, divx ** 2 + divy ** 2))


def _side_points(side, t):
    """Reference points along one side at 1D coordinates t (ascending)."""
    t = np.asarray(t, dtype=float)
    const = np.full_like(t, -1.0 if side in (WEST, SOUTH) else 1.0)
    if side in (WEST, EAST):
        return np.column_stack([const, t])
    return np.column_stack([t, const])


def _traction(vals, normal):
    """Tractions (k, 2) from Voigt stresses (k, 3) and a unit normal."""
    n1, n2 = normal
    return np.column_stack([vals[:, 0] * n1 + vals[:, 2] * n2,
                            vals[:, 2] * n1 + vals[:, 1] * n2])


def _dirichlet_cover(bc, axis, coord, comp, tol):
    """Sub-intervals of a boundary line where a component is fixed."""
    out = []
    for d in bc.dirichlet:
        if (d.span.line_axis == axis and abs(d.span.coord - coord) <= tol
                and comp in d.comps):
            out.append((d.span.lo, d.span.hi))
    return out


def _neumann_value(bc, axis, coord, comp, s, tol):
    g = 0.0
    for nm in bc.neumann:
        if (nm.span.line_axis == axis and abs(nm.span.coord - coord) <= tol
                and nm.span.lo - tol <= s <= nm.span.hi + tol):
            g += np.asarray(nm.g, dtype=float)[comp]
    return g


def edge_residuals(space, coeffs, bc):
    """Edge residual norms per element: (ne,).

    Interior edges integrate half the traction jump; hanging edges are
    handled from the fine side against the restricted coarse trace, and
    both sub-edges of a coarse side are summed.  On Neumann boundary
    parts the residual is sigma.n - g componentwise; components fixed
    by Dirichlet data drop out.
    """
    mesh = space.mesh
    gx, gw = gauss1d(3)
    tol = 1e-9 * max(mesh.upper[0] - mesh.lower[0],
                     mesh.upper[1] - mesh.lower[1])
    # trace tables: own side, clipped coarse side, and fine-in-self side
    own = {s: mono_values(_side_points(s, gx)) for s in range(4)}
    opposite = {WEST: EAST, EAST: WEST, SOUTH: NORTH, NORTH: SOUTH}
    half = {0: 0.5 * (gx - 1.0), 1: 0.5 * (gx + 1.0)}
    coarse_tab = {(s, p): mono_values(_side_points(s, half[p]))
                  for s in range(4) for p in (0, 1)}

    ne = len(mesh.cells)
    out = np.zeros(ne)
    for e, cell in enumerate(mesh.cells):
        h = mesh.h[e]
        acc = 0.0
        for side in range(4):
            kind, data = mesh.edge_neighbor(cell, side)
            nrm = SIDE_NORMALS[side]
            if kind == "same":
                nb = mesh.cell_index[data]
                tr_a = _traction(own[side] @ coeffs[e].T, nrm)
                tr_b = _traction(own[opposite[side]] @ coeffs[nb].T, nrm)
                psi = 0.5 * (tr_a - tr_b)
                acc += 0.5 * h * float(gw @ np.sum(psi ** 2, axis=1))
            elif kind == "coarse":
                nb = mesh.cell_index[data]
                parity = (cell[2] if side in (WEST, EAST) else cell[1]) % 2
                tr_a = _traction(own[side] @ coeffs[e].T, nrm)
                tab = coarse_tab[(opposite[side], parity)]
                tr_b = _traction(tab @ coeffs[nb].T, nrm)
                psi = 0.5 * (tr_a - tr_b)
                acc += 0.5 * h * float(gw @ np.sum(psi ** 2, axis=1))
            elif kind == "fine":
                for p, fine in enumerate(data):
                    nb = mesh.cell_index[fine]
                    tab = coarse_tab[(side, p)]
                    tr_a = _traction(tab @ coeffs[e].T, nrm)
                    tr_b = _traction(own[opposite[side]] @ coeffs[nb].T,
                                     nrm)
                    psi = 0.5 * (tr_a - tr_b)
                    acc += 0.25 * h * float(gw @ np.sum(psi ** 2, axis=1))
            else:
                acc += _boundary_edge_term(space, coeffs, bc, e, cell,
                                           side, gx, gw, tol)
        out[e] = math.sqrt(acc)
    return out


def _boundary_edge_term(space, coeffs, bc, e, cell, side, gx, gw, tol):
    """Integral of |sigma.n - g|^2 over one boundary edge."""
    mesh = space.mesh
    axis, coord, lo, hi = mesh.edge_span(cell, side)
    nrm = SIDE_NORMALS[side]
    cover = {c: _dirichlet_cover(bc, axis, coord, c, tol) for c in (0, 1)}
    # split at any span endpoint falling inside the edge
    cuts = {lo, hi}
    for spans in cover.values():
        for a, b in spans:
            for s in (a, b):
                if lo + tol < s < hi - tol:
                    cuts.add(s)
    for nm in bc.neumann:
        if nm.span.line_axis == axis and abs(nm.span.coord - coord) <= tol:
            for s in (nm.span.lo, nm.span.hi):
                if lo + tol < s < hi - tol:
                    cuts.add(s)
    pts = sorted(cuts)
    acc = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        mid_s = 0.5 * (a + b)
        phys = a + 0.5 * (gx + 1.0) * (b - a)
        t = (2.0 * phys - (lo + hi)) / (hi - lo)
        vals = mono_values(_side_points(side, t)) @ coeffs[e].T
        tr = _traction(vals, nrm)
        for c in (0, 1):
            fixed = any(sa - tol <= mid_s <= sb + tol
                        for sa, sb in cover[c])
            if fixed:
                continue
            g = _neumann_value(bc, axis, coord, c, mid_s, tol)
            acc += 0.5 * (b - a) * float(gw @ (tr[:, c] - g) ** 2)
    return acc


def design_residuals(space, state, eps_qp, mat):
    """L1 norms of the design derivatives of the energy: (rho_m, rho_th)."""
    ne, nq = eps_qp.shape[:2]
    m = state.m.ravel()
    th = np.broadcast_to(state.theta[:, None], (ne, nq)).ravel()
    dCm, dCth = kernels.tensor_derivatives(m, th, mat.lam, mat.mu)
    M = kernels.bond_matrices(state.alpha.ravel())
    eps = eps_qp.reshape(-1, 3)
    t = np.einsum("nji,nj->ni", M, eps)
    sm = np.einsum("ni,nij,nj->n", t, dCm, t).reshape(ne, nq)
    sth = np.einsum("ni,nij,nj->n", t, dCth, t).reshape(ne, nq)
    cellw = 0.25 * space.mesh.areas[:, None] * space.w2[None, :]
    return (np.sum(cellw * np.abs(sm), axis=1),
            np.sum(cellw * np.abs(sth), axis=1))


# -- patch interpolation tables ---------------------------------------------

class _PatchTables:
    """Quartic interpolation tables on the unit patch, per quadrant."""

    def __init__(self, qp_ref):
        nodes = np.linspace(0.0, 1.0, 5)
        self.eval_pts, self.eval_w = gauss2d(5)
        gx5, gw5 = gauss1d(5)
        self.gx5, self.gw5 = gx5, gw5
        self.N_eval = q2_shape(self.eval_pts)            # (25, 9)
        self.N_side = {s: q2_shape(_side_points(s, gx5)) for s in range(4)}
        self.val = {}
        self.side_val = {}
        self.dQx = {}
        self.dQy = {}
        for qa in (0, 1):
            for qb in (0, 1):
                quad = (qa, qb)
                sx = 0.5 * (qa + 0.5 * (self.eval_pts[:, 0] + 1.0))
                sy = 0.5 * (qb + 0.5 * (self.eval_pts[:, 1] + 1.0))
                self.val[quad] = self._tensor(nodes, sx, sy)
                qx = 0.5 * (qa + 0.5 * (qp_ref[:, 0] + 1.0))
                qy = 0.5 * (qb + 0.5 * (qp_ref[:, 1] + 1.0))
                self.dQx[quad], self.dQy[quad] = self._tensor_grad(
                    nodes, qx, qy)
                for s in range(4):
                    sp = _side_points(s, gx5)
                    px = 0.5 * (qa + 0.5 * (sp[:, 0] + 1.0))
                    py = 0.5 * (qb + 0.5 * (sp[:, 1] + 1.0))
                    self.side_val[(quad, s)] = self._tensor(nodes, px, py)

    @staticmethod
    def _tensor(nodes, sx, sy):
        Lx = lagrange_values(nodes, sx)
        Ly = lagrange_values(nodes, sy)
        return np.einsum("ka,kb->kba", Lx, Ly).reshape(len(sx), 25)

    @staticmethod
    def _tensor_grad(nodes, sx, sy):
        Lx, Ly = lagrange_values(nodes, sx), lagrange_values(nodes, sy)
        dLx = lagrange_derivatives(nodes, sx)
        dLy = lagrange_derivatives(nodes, sy)
        gx = np.einsum("ka,kb->kba", dLx, Ly).reshape(len(sx), 25)
        gy = np.einsum("ka,kb->kba", Lx, dLy).reshape(len(sx), 25)
        return gx, gy

    # patch grid id g = 5 * (2*qb + b) + (2*qa + a) for member (qa, qb)
    GRID = np.array([[5 * (2 * qb + b) + (2 * qa + a)
                      for b in range(3) for a in range(3)]
                     for qb in (0, 1) for qa in (0, 1)])


@dataclass
class ElementIndicators:
    eta: np.ndarray
    rho_u: np.ndarray
    omega_u: np.ndarray
    rho_edge: np.ndarray
    omega_edge: np.ndarray
    rho_m: np.ndarray
    omega_m: np.ndarray
    rho_th: np.ndarray
    omega_th: np.ndarray
    fallback: np.ndarray        # elements without a sibling patch
    newton_failures: int

    @property
    def total(self):
        return float(np.sum(self.eta))


def indicators(u, state, scenario):
    """Dual-weighted error indicators for all elements."""
    space = u.space
    mesh = space.mesh
    mat = scenario.material
    bc = scenario.bc
    ne, nq = len(mesh.cells), space.nq

    theta_qp = np.broadcast_to(state.theta[:, None], (ne, nq))
    C_qp = kernels.laminate_tensors(
        state.alpha.ravel(), state.m.ravel(), theta_qp.ravel(),
        mat.lam, mat.mu, SHEAR_REG).reshape(ne, nq, 3, 3)
    eps_qp = u.qp_strains()
    sig_qp = np.einsum("eqij,eqj->eqi", C_qp, eps_qp)

    coeffs = stress_coeffs(space, sig_qp)
    rho_u = cell_residuals(space, coeffs)
    rho_edge = edge_residuals(space, coeffs, bc)
    rho_m, rho_th = design_residuals(space, state, eps_qp, mat)

    tables = _PatchTables(space.qp_ref)
    omega_u = np.zeros(ne)
    omega_edge = np.zeros(ne)
    omega_m = np.zeros(ne)
    omega_th = np.zeros(ne)
    fallback = np.zeros(ne, dtype=bool)

    # group elements by sibling patch
    quadrant = np.empty((ne, 2), dtype=np.int64)
    patch_members = np.full((ne, 4), -1, dtype=np.int64)
    for e, cell in enumerate(mesh.cells):
        patch = sibling_patch(mesh, cell)
        if patch is None:
            fallback[e] = True
            continue
        idx = [mesh.cell_index[c] for c in patch.cells]
        patch_members[e] = idx
        quadrant[e] = (cell[1] & 1, cell[2] & 1)

    patched = np.flatnonzero(~fallback)
    n_newton_fail = 0
    if len(patched):
        n_newton_fail = _omega_patched(u, state, mat, space, tables,
                                       patched, patch_members, quadrant,
                                       omega_u, omega_edge, omega_m,
                                       omega_th, sig_qp)

    fb = np.flatnonzero(fallback)
    if len(fb):
        _omega_fallback(u, state, space, fb, sig_qp, omega_u, omega_edge,
                        omega_m)

    eta = (rho_u * omega_u + rho_edge * omega_edge
           + 0.5 * rho_m * omega_m + 0.5 * rho_th * omega_th)
    return ElementIndicators(eta=eta, rho_u=rho_u, omega_u=omega_u,
                             rho_edge=rho_edge, omega_edge=omega_edge,
                             rho_m=rho_m, omega_m=omega_m, rho_th=rho_th,
                             omega_th=omega_th, fallback=fallback,
                             newton_failures=n_newton_fail)


def _omega_patched(u, state, mat, space, tables, patched, patch_members,
                   quadrant, omega_u, omega_edge, omega_m, omega_th,
                   sig_qp):
    mesh = space.mesh
    nq = space.nq
    cn = mesh.cell_nodes
    grid_ids = np.empty((len(patched), 25), dtype=np.int64)
    for k in range(4):
        qa, qb = k & 1, k >> 1
        # members are ordered (SW, SE, NW, NE): index qb*2 + qa
        grid_ids[:, _PatchTables.GRID[k]] = cn[
            patch_members[patched, qb * 2 + qa]]
    U = u.values[grid_ids]                     # (np, 25, 2)
    theta_members = state.theta[patch_members[patched]]   # (np, 4)

    ue = u.element_values[patched].reshape(len(patched), 9, 2)
    u_eval = np.einsum("ka,pac->pkc", tables.N_eval, ue)

    h = mesh.h[patched]
    eps_rec_all = np.empty((len(patched), nq, 3))
    for qa in (0, 1):
        for qb in (0, 1):
            sel = np.flatnonzero((quadrant[patched, 0] == qa)
                                 & (quadrant[patched, 1] == qb))
            if not len(sel):
                continue
            quad = (qa, qb)
            I4 = np.einsum("kg,pgc->pkc", tables.val[quad], U[sel])
            diff = u_eval[sel] - I4
            cellw = 0.25 * (h[sel] ** 2)[:, None] * tables.eval_w[None, :]
            omega_u[patched[sel]] = np.sqrt(
                np.einsum("pk,pkc->p", cellw, diff ** 2))

            edge_acc = np.zeros(len(sel))
            for s in range(4):
                u_side = np.einsum("ka,pac->pkc", tables.N_side[s],
                                   ue[sel])
                I4_side = np.einsum("kg,pgc->pkc",
                                    tables.side_val[(quad, s)], U[sel])
                d = u_side - I4_side
                edge_acc += 0.5 * h[sel] * np.einsum(
                    "k,pkc->p", tables.gw5, d ** 2)
            omega_edge[patched[sel]] = np.sqrt(edge_acc)

            # strains of the quartic at the quadrature points; the
            # patch is 2h wide, hence the 1/(2h) gradient factor
            gxv = np.einsum("kg,pgc->pkc", tables.dQx[quad], U[sel])
            gyv = np.einsum("kg,pgc->pkc", tables.dQy[quad], U[sel])
            inv2h = (1.0 / (2.0 * h[sel]))[:, None]
            eps_rec = np.empty((len(sel), nq, 3))
            eps_rec[:, :, 0] = gxv[:, :, 0] * inv2h
            eps_rec[:, :, 1] = gyv[:, :, 1] * inv2h
            eps_rec[:, :, 2] = (gxv[:, :, 1] + gyv[:, :, 0]) * inv2h
            eps_rec_all[sel] = eps_rec

            # density weight: bilinear through the member densities,
            # evaluated at this element's corners
            zx = np.array([qa / 2.0, qa / 2.0 + 0.5]) * 2.0 - 0.5
            zy = np.array([qb / 2.0, qb / 2.0 + 0.5]) * 2.0 - 0.5
            th = theta_members[sel]
            dev = np.zeros(len(sel))
            for cx in zx:
                for cy in zy:
                    w = np.array([(1 - cx) * (1 - cy), cx * (1 - cy),
                                  (1 - cx) * cy, cx * cy])
                    val = th @ w
                    dev = np.maximum(
                        dev, np.abs(state.theta[patched[sel]] - val))
            omega_th[patched[sel]] = dev

    # parameter recovery on the smoothed strains
    eps_flat = eps_rec_all.reshape(-1, 3)
    th_flat = np.repeat(state.theta[patched], nq)
    a0 = state.alpha[patched].reshape(-1)
    l1_0, l2_0 = kernels.eig_vals(sig_qp[patched].reshape(-1, 3))
    _, _, _, m_rec, conv = newton_recover(eps_flat, th_flat, a0, l1_0,
                                          l2_0, mat)
    m_cur = state.m[patched].reshape(-1)
    m_dir, _ = _m_of(*kernels.eig_vals(sig_qp[patched].reshape(-1, 3)))
    dm = np.where(conv, np.abs(m_cur - m_rec), np.abs(m_cur - m_dir))
    omega_m[patched] = np.max(dm.reshape(len(patched), nq), axis=1)
    return int(np.sum(~conv))


def _omega_fallback(u, state, space, fb, sig_qp, omega_u, omega_edge,
                    omega_m):
    """Weights for elements without a sibling patch.

    The primal weight compares u_h with a least-squares bi-quadratic
    fit through the nodal values of the element and its edge
    neighbors; the layer-fraction weight is the direct parameter
    difference; the density weight stays zero.
    """
    mesh = space.mesh
    eval_pts, eval_w = gauss2d(5)
    N_eval = q2_shape(eval_pts)
    gx5, gw5 = gauss1d(5)
    N_side = {s: q2_shape(_side_points(s, gx5)) for s in range(4)}
    mono_eval = mono_values(eval_pts)
    mono_side = {s: mono_values(_side_points(s, gx5)) for s in range(4)}

    for e in fb:
        cell = mesh.cells[e]
        nodes = set(mesh.cell_nodes[e])
        for side in range(4):
            kind, data = mesh.edge_neighbor(cell, side)
            if kind == "same" or kind == "coarse":
                nodes.update(mesh.cell_nodes[mesh.cell_index[data]])
            elif kind == "fine":
                for c in data:
                    nodes.update(mesh.cell_nodes[mesh.cell_index[c]])
        nodes = np.array(sorted(nodes))
        x0, y0 = mesh.cell_origin(cell)
        h = mesh.h[e]
        cx, cy = x0 + 0.5 * h, y0 + 0.5 * h
        s = 2.0 * (mesh.node_pos[nodes] - [cx, cy]) / h
        V = mono_values(s)
        coef, *_ = np.linalg.lstsq(V, u.values[nodes], rcond=None)

        ue = u.element_values[e].reshape(9, 2)
        diff = N_eval @ ue - mono_eval @ coef
        omega_u[e] = math.sqrt(0.25 * h * h
                               * float(eval_w @ np.sum(diff ** 2, axis=1)))
        acc = 0.0
        for side in range(4):
            d = N_side[side] @ ue - mono_side[side] @ coef
            acc += 0.5 * h * float(gw5 @ np.sum(d ** 2, axis=1))
        omega_edge[e] = math.sqrt(acc)

        m_dir, _ = _m_of(*kernels.eig_vals(sig_qp[e]))
        omega_m[e] = float(np.max(np.abs(state.m[e] - m_dir)))
