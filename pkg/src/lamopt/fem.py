"""Bi-quadratic finite elements for plane elasticity on quadtree meshes.

Hanging-node constraints are eliminated by condensation: the assembled
system lives on the real (master) degrees of freedom, and constrained
coefficients are recovered afterwards, so returned coefficient vectors
always cover every node.  Dirichlet conditions are imposed by symmetric
elimination of the fixed dofs.

Assembly runs off a cached index expansion per (mesh, quadrature)
pair: element matrices map to CSR data by pure array gathers, which is
what makes the optimizer's repeated reassembly cheap.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .quadmesh import SIDE_NODES, WEST, EAST, SOUTH, NORTH
from .quadrature import gauss1d, gauss2d, q2_shape, strain_matrix


# -- boundary conditions ---------------------------------------------------

@dataclass(frozen=True)
class EdgeSpan:
    """A segment of the domain boundary on an axis-parallel line.

    line_axis 'x': the vertical line x=coord, spanning lo <= y <= hi;
    line_axis 'y': the horizontal line y=coord, spanning lo <= x <= hi.
    """
    line_axis: str
    coord: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.line_axis not in ("x", "y"):
            raise ValueError("line_axis must be 'x' or 'y'")
        if not self.hi > self.lo:
            raise ValueError("span must have positive length")


@dataclass(frozen=True)
class Dirichlet:
    span: EdgeSpan
    comps: tuple = (0, 1)
    value: tuple = (0.0, 0.0)  # or callable (x, y) -> (ux, uy)


@dataclass(frozen=True)
class NodePin:
    """Point constraint at a mesh vertex (for removing rigid modes)."""
    x: float
    y: float
    comps: tuple = (0, 1)
    value: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class Neumann:
    span: EdgeSpan
    g: tuple  # constant traction vector


@dataclass(frozen=True)
class BoundaryConditions:
    dirichlet: tuple = ()
    neumann: tuple = ()
    pins: tuple = ()

    def __post_init__(self):
        # tractions and displacement control must not overlap componentwise
        for nm in self.neumann:
            for dc in self.dirichlet:
                s, t = nm.span, dc.span
                if (s.line_axis == t.line_axis
                        and abs(s.coord - t.coord) < 1e-12
                        and min(s.hi, t.hi) - max(s.lo, t.lo) > 1e-12):
                    g = np.asarray(nm.g, dtype=float)
                    for c in dc.comps:
                        if g[c] != 0.0:
                            raise ValueError(
                                "traction and Dirichlet overlap in "
                                "component %d on %s=%g" % (c, s.line_axis,
                                                           s.coord))


# -- coefficient fields ----------------------------------------------------

class IsotropicField:
    """Constant isotropic stiffness (full shear, not the laminate one)."""

    def __init__(self, mat):
        self.mat = mat

    def qp_tensors(self, space):
        C = self.mat.voigt()
        ne, nq = space.mesh.cell_nodes.shape[0], space.nq
        return np.broadcast_to(C, (ne, nq, 3, 3)).copy()

    def at(self, space, elem, point):
        return self.mat.voigt()


class VoigtField:
    """Pointwise stiffness from a callable C(x, y) -> (3, 3)."""

    def __init__(self, fn):
        self.fn = fn

    def qp_tensors(self, space):
        xy = space.qp_points
        ne, nq = xy.shape[:2]
        out = np.empty((ne, nq, 3, 3))
        for e in range(ne):
            for q in range(nq):
                out[e, q] = self.fn(xy[e, q, 0], xy[e, q, 1])
        return out

    def at(self, space, elem, point):
        x0, y0 = space.mesh.cell_origin(space.mesh.cells[elem])
        h = space.mesh.h[elem]
        return self.fn(x0 + 0.5 * (point[0] + 1) * h,
                       y0 + 0.5 * (point[1] + 1) * h)


class ArrayField:
    """Stiffness given per quadrature point as an (ne, nq, 3, 3) array.

    Off-grid evaluations take the nearest quadrature point, which is
    the natural reading for designs defined by quadrature data.
    """

    def __init__(self, C_qp):
        self.C_qp = C_qp

    def qp_tensors(self, space):
        return self.C_qp

    def at(self, space, elem, point):
        d2 = np.sum((space.qp_ref - np.asarray(point)) ** 2, axis=1)
        return self.C_qp[elem, int(np.argmin(d2))]


# -- the discrete space ----------------------------------------------------

class Q2Space:
    """Vector-valued bi-quadratic space with condensed hanging nodes."""

    def __init__(self, mesh, nq1d=3):
        self.mesh = mesh
        self.nq1d = nq1d
        self.qp_ref, self.w2 = gauss2d(nq1d)
        self.nq = len(self.w2)
        self.B = strain_matrix(self.qp_ref)
        self.N = q2_shape(self.qp_ref)
        self._build_resolution()
        self._build_assembly_cache()
        self._bc_cache = {}

    # resolution of every node into real (master) nodes
    def _build_resolution(self):
        mesh = self.mesh
        n = mesh.n_nodes
        is_con = np.zeros(n, dtype=bool)
        is_con[mesh.constrained_nodes] = True
        real_nodes = np.flatnonzero(~is_con)
        real_of = np.full(n, -1, dtype=np.int64)
        real_of[real_nodes] = np.arange(len(real_nodes))
        self.real_nodes = real_nodes
        self.real_of_node = real_of
        self.n_real_nodes = len(real_nodes)
        self.n_real_dofs = 2 * len(real_nodes)
        self.n_dofs = 2 * n

        # fixed-width master table: real nodes resolve to themselves
        mast = np.zeros((n, 3), dtype=np.int64)
        mw = np.zeros((n, 3))
        cnt = np.ones(n, dtype=np.int64)
        mast[real_nodes, 0] = real_of[real_nodes]
        mw[real_nodes, 0] = 1.0
        for node, (masters, weights) in mesh.constraints.items():
            mast[node] = real_of[masters]
            assert np.all(mast[node] >= 0)
            mw[node] = weights
            cnt[node] = 3
        self.master_nodes, self.master_w, self.master_cnt = mast, mw, cnt

        # expansion matrix R: full coefficients from real coefficients
        r_rows, r_cols, r_vals = [], [], []
        for node in range(n):
            for k in range(cnt[node]):
                for c in (0, 1):
                    r_rows.append(2 * node + c)
                    r_cols.append(2 * mast[node, k] + c)
                    r_vals.append(mw[node, k])
        self.R = sp.csr_matrix(
            (r_vals, (r_rows, r_cols)), shape=(2 * n, self.n_real_dofs))

    def _build_assembly_cache(self):
        mesh = self.mesh
        ne = len(mesh.cells)
        cn = mesh.cell_nodes
        cnt = self.master_cnt[cn]          # (ne, 9)
        clean = np.all(cnt == 1, axis=1)   # elements without hanging nodes

        rows_parts, cols_parts, w_parts, src_parts = [], [], [], []

        idx_clean = np.flatnonzero(clean)
        if len(idx_clean):
            rn = self.master_nodes[cn[idx_clean], 0]        # (k, 9)
            rdof = (2 * rn[:, :, None] + np.arange(2)).reshape(-1, 18)
            rows_parts.append(np.repeat(rdof, 18, axis=1).ravel())
            cols_parts.append(np.tile(rdof, (1, 18)).ravel())
            w_parts.append(np.ones(len(idx_clean) * 324))
            src_parts.append((idx_clean[:, None] * 324
                              + np.arange(324)).ravel())

        hr, hc, hw, hs = [], [], [], []
        for e in np.flatnonzero(~clean):
            nodes = cn[e]
            res = []
            for a in range(9):
                node = nodes[a]
                k = self.master_cnt[node]
                for c in (0, 1):
                    res.append([(2 * self.master_nodes[node, t] + c,
                                 self.master_w[node, t]) for t in range(k)])
            for a in range(18):
                for b in range(18):
                    s = e * 324 + a * 18 + b
                    for (ra, wa) in res[a]:
                        for (rb, wb) in res[b]:
                            hr.append(ra)
                            hc.append(rb)
                            hw.append(wa * wb)
                            hs.append(s)
        if hr:
            rows_parts.append(np.array(hr, dtype=np.int64))
            cols_parts.append(np.array(hc, dtype=np.int64))
            w_parts.append(np.array(hw))
            src_parts.append(np.array(hs, dtype=np.int64))

        rows = np.concatenate(rows_parts)
        cols = np.concatenate(cols_parts)
        wprod = np.concatenate(w_parts)
        src = np.concatenate(src_parts).astype(np.int64)

        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self._asm_w = wprod[order]
        self._asm_src = src[order]
        key = rows * np.int64(self.n_real_dofs) + cols
        starts = np.flatnonzero(np.diff(key, prepend=key[0] - 1))
        self._asm_starts = starts
        self.pattern_indices = cols[starts].astype(np.int32)
        urows = rows[starts]
        counts = np.bincount(urows, minlength=self.n_real_dofs)
        self.pattern_indptr = np.concatenate(
            [[0], np.cumsum(counts)]).astype(np.int32)
        self.nnz = len(starts)

    def assemble_matrix(self, C_qp):
        """Reduced stiffness matrix for quadrature-point tensors."""
        Ke = kernels.element_stiffness(C_qp, self.B, self.w2)
        data = self._asm_w * Ke.reshape(-1)[self._asm_src]
        vals = np.add.reduceat(data, self._asm_starts)
        return sp.csr_matrix((vals, self.pattern_indices,
                              self.pattern_indptr),
                             shape=(self.n_real_dofs, self.n_real_dofs))

    @property
    def qp_points(self):
        """Physical quadrature points, (ne, nq, 2)."""
        if not hasattr(self, "_qp_points"):
            mesh = self.mesh
            orig = np.array([mesh.cell_origin(c) for c in mesh.cells])
            self._qp_points = (orig[:, None, :] + 0.5 *
                               (self.qp_ref + 1.0)[None, :, :]
                               * mesh.h[:, None, None])
        return self._qp_points

    def element_values(self, values):
        """Gather nodal (n_nodes, 2) data to element vectors (ne, 18)."""
        return values[self.mesh.cell_nodes].reshape(len(self.mesh.cells), 18)

    def expand(self, u_real):
        """Full nodal coefficients (n_nodes, 2) from real dofs."""
        return (self.R @ u_real).reshape(self.mesh.n_nodes, 2)

    def context(self, bc):
        ctx = self._bc_cache.get(bc)
        if ctx is None:
            ctx = _SystemContext(self, bc)
            self._bc_cache[bc] = ctx
        return ctx


def _node_tol(mesh):
    return 1e-9 * max(mesh.upper[0] - mesh.lower[0],
                      mesh.upper[1] - mesh.lower[1])


def nodes_on_span(space, span):
    """Ids of mesh nodes lying on a boundary span."""
    pos = space.mesh.node_pos
    tol = _node_tol(space.mesh)
    if span.line_axis == "x":
        on = np.abs(pos[:, 0] - span.coord) <= tol
        along = pos[:, 1]
    else:
        on = np.abs(pos[:, 1] - span.coord) <= tol
        along = pos[:, 0]
    on &= (along >= span.lo - tol) & (along <= span.hi + tol)
    return np.flatnonzero(on)


class _SystemContext:
    """Per-(space, bc) data reused across assemblies: fixed dofs, the
    Neumann load, and index maps extracting the free block in place."""

    def __init__(self, space, bc):
        self.space = space
        self.bc = bc
        fixed = {}
        tol = _node_tol(space.mesh)
        for d in bc.dirichlet:
            nodes = nodes_on_span(space, d.span)
            for node in nodes:
                ri = space.real_of_node[node]
                assert ri >= 0, "Dirichlet node is constrained"
                x, y = space.mesh.node_pos[node]
                val = d.value(x, y) if callable(d.value) else d.value
                for c in d.comps:
                    fixed[2 * ri + c] = float(np.asarray(val)[c])
        for p in bc.pins:
            d2 = np.sum((space.mesh.node_pos
                         - np.array([p.x, p.y])) ** 2, axis=1)
            node = int(np.argmin(d2))
            if d2[node] > tol ** 2:
                raise ValueError("no mesh vertex at pin (%g, %g)"
                                 % (p.x, p.y))
            ri = space.real_of_node[node]
            assert ri >= 0
            for c in p.comps:
                fixed[2 * ri + c] = float(np.asarray(p.value)[c])

        nd = space.n_real_dofs
        self.fixed = np.array(sorted(fixed), dtype=np.int64)
        self.fixed_vals = np.array([fixed[i] for i in self.fixed])
        mask = np.ones(nd, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.load = assemble_load(space, bc)

        # positional maps: K.data -> K_ff.data and K_fd.data
        pat = sp.csr_matrix(
            (np.arange(1, space.nnz + 1, dtype=np.int64),
             space.pattern_indices, space.pattern_indptr), shape=(nd, nd))
        pff = pat[self.free][:, self.free].tocsr()
        self.ff_map = (pff.data - 1).astype(np.int64)
        self.ff_indices = pff.indices
        self.ff_indptr = pff.indptr
        nf = len(self.free)
        dd = pff.diagonal()
        assert np.all(dd > 0), "free dof missing its diagonal entry"
        self.ff_diag_map = (dd - 1).astype(np.int64)
        if len(self.fixed):
            pfd = pat[self.free][:, self.fixed].tocsr()
            self.fd_map = (pfd.data - 1).astype(np.int64)
            self.fd_indices = pfd.indices
            self.fd_indptr = pfd.indptr
        self.n_free = nf

        # rigid-body near-nullspace of the free dofs, for AMG setups
        xy = space.mesh.node_pos[space.real_nodes]
        B = np.zeros((nd, 3))
        B[0::2, 0] = 1.0
        B[1::2, 1] = 1.0
        B[0::2, 2] = -xy[:, 1]
        B[1::2, 2] = xy[:, 0]
        self.nullspace = B[self.free]


def _boundary_edges(mesh):
    """All (element, side, span) boundary edges, deterministic order."""
    out = []
    for e, cell in enumerate(mesh.cells):
        for side in range(4):
            kind, _ = mesh.edge_neighbor(cell, side)
            if kind == "boundary":
                out.append((e, side, mesh.edge_span(cell, side)))
    return out


def _clip(span, axis, coord, lo, hi, tol):
    """Overlap of a boundary edge with a span; None when empty."""
    if span.line_axis != axis or abs(span.coord - coord) > tol:
        return None
    a, b = max(lo, span.lo), min(hi, span.hi)
    if b - a <= tol:
        return None
    return a, b


def assemble_load(space, bc):
    """Neumann load vector on the real dofs."""
    mesh = space.mesh
    f = np.zeros(space.n_real_dofs)
    tol = _node_tol(mesh)
    gx, gw = gauss1d(3)
    for e, side, (axis, coord, lo, hi) in _boundary_edges(mesh):
        for nm in bc.neumann:
            seg = _clip(nm.span, axis, coord, lo, hi, tol)
            if seg is None:
                continue
            a, b = seg
            # 1D reference coordinates of the sub-segment on this edge
            xi = (2.0 * (a + 0.5 * (gx + 1.0) * (b - a)) - (lo + hi)) \
                / (hi - lo)
            from .quadrature import shape1d
            Nv = shape1d(xi)                       # (3 pts, 3 edge nodes)
            locals_ = SIDE_NODES[side]
            nodes = mesh.cell_nodes[e, list(locals_)]
            ri = space.real_of_node[nodes]
            assert np.all(ri >= 0), "boundary node is constrained"
            wseg = gw * 0.5 * (b - a)
            g = np.asarray(nm.g, dtype=float)
            for k in range(3):
                val = wseg @ Nv[:, k]
                f[2 * ri[k]] += g[0] * val
                f[2 * ri[k] + 1] += g[1] * val
    return f


@dataclass
class LinearSystem:
    """Reduced stiffness and load with the Dirichlet bookkeeping."""
    space: object
    ctx: object
    K: object            # csr on real dofs, constraints condensed
    C_qp: np.ndarray     # the tensors it was assembled from

    @property
    def f(self):
        return self.ctx.load

    def energy(self, u_real):
        return float(u_real @ (self.K @ u_real))

    def load_value(self, u_real):
        return float(self.ctx.load @ u_real)


def assemble(space, C, bc):
    """Assemble stiffness and load for a coefficient field."""
    ctx = space.context(bc)
    C_qp = np.ascontiguousarray(C.qp_tensors(space))
    K = space.assemble_matrix(C_qp)
    return LinearSystem(space=space, ctx=ctx, K=K, C_qp=C_qp)


# -- conjugate gradients ---------------------------------------------------

class CoercivityError(RuntimeError):
    """Raised when CG meets a non-positive curvature direction."""


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    converged: bool
    preconditioner: str
    gap: float = 0.0     # |x.r| / |b.x| of the returned iterate
    refinements: int = 0


@dataclass
class SolverOptions:
    """Iterative solve controls.

    The base tolerance is loose; every solve then verifies the energy
    identity |l(u) - a(u,u)| / |l(u)| against gap_rtol and reruns with
    a 100x tighter tolerance until it holds (at most max_refinements
    times), so accuracy adapts to what the compliance value needs
    instead of paying for a fixed tight residual on every iteration.

    Above strong_threshold free dofs the preconditioner is a frozen
    sparse factorization (or an AMG hierarchy with "amg"), kept across
    solves on the same pattern until the iteration count exceeds
    reuse_max_iters; below it, plain Jacobi.
    """
    rtol: float = 1e-6
    gap_rtol: float = 1e-9
    max_refinements: int = 6
    maxiter: int = 100000
    preconditioner: str = "auto"   # auto | jacobi | factor | amg
    strong_threshold: int = 1500
    reuse_max_iters: int = 18
    cache: object = None


class SolverCache:
    """Holds a preconditioner across repeated solves on one pattern."""

    def __init__(self):
        self.M = None
        self.last_iters = 0


def pcg(A, b, M=None, x0=None, rtol=1e-10, maxiter=100000):
    """Preconditioned conjugate gradients for SPD systems.

    M is a callable applying the preconditioner.  Raises
    CoercivityError on a non-positive curvature direction, which in
    this package means the coefficient field lost ellipticity.
    """
    n = len(b)
    x = np.zeros(n) if x0 is None else x0.astype(float).copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveInfo(0, 0.0, True, "none")
    r = b - A @ x
    res = float(np.linalg.norm(r))
    if res <= rtol * bnorm:
        return x, SolveInfo(0, res, True, "none")
    z = M(r) if M is not None else r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < maxiter:
        it += 1
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise CoercivityError(
                "non-positive curvature at iteration %d (pAp=%g)"
                % (it, pAp))
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r))
        if res <= rtol * bnorm:
            return x, SolveInfo(it, res, True, "none")
        z = M(r) if M is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveInfo(it, res, False, "none")


def _make_amg(Kff, nullspace):
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(
        Kff.tocsr(), B=nullspace, max_coarse=300)
    op = ml.aspreconditioner(cycle="V")
    return lambda r: op @ r


def _make_factor(Kff):
    # frozen factorization of the current matrix; stays a good
    # preconditioner while the design (hence K) drifts slowly
    lu = spla.splu(Kff.tocsc())
    return lu.solve


def solve(system, x0=None, options=None):
    """Solve the reduced system; returns a DisplacementField.

    x0 warm-starts the iteration on the free dofs (shape n_free or the
    full real-dof vector of a previous solution on the same space).
    """
    opts = options or SolverOptions()
    ctx = system.ctx
    space = system.space
    K = system.K

    data_ff = K.data[ctx.ff_map]
    Kff = sp.csr_matrix((data_ff, ctx.ff_indices, ctx.ff_indptr),
                        shape=(ctx.n_free, ctx.n_free))
    rhs = ctx.load[ctx.free]
    if len(ctx.fixed) and np.any(ctx.fixed_vals != 0.0):
        Kfd = sp.csr_matrix((K.data[ctx.fd_map], ctx.fd_indices,
                             ctx.fd_indptr),
                            shape=(ctx.n_free, len(ctx.fixed)))
        rhs = rhs - Kfd @ ctx.fixed_vals

    kind = opts.preconditioner
    if kind == "auto":
        kind = "factor" if ctx.n_free >= opts.strong_threshold else "jacobi"
    if kind in ("factor", "amg"):
        cache = opts.cache
        if (cache is not None and cache.M is not None
                and cache.last_iters <= opts.reuse_max_iters):
            M = cache.M
        else:
            M = _make_factor(Kff) if kind == "factor" else _make_amg(
                Kff, ctx.nullspace)
            if cache is not None:
                cache.M = M
        precond = kind
    else:
        d = K.data[ctx.ff_diag_map]
        M = lambda r: r / d
        precond = "jacobi"

    if x0 is not None and len(x0) == space.n_real_dofs:
        x0 = x0[ctx.free]
    rtol = opts.rtol
    x = x0
    total_its = 0
    gap = 0.0
    refinements = 0
    for _round in range(opts.max_refinements + 1):
        x, info = pcg(Kff, rhs, M=M, x0=x, rtol=rtol,
                      maxiter=opts.maxiter)
        total_its += info.iterations
        denom = abs(float(rhs @ x))
        if denom == 0.0:
            gap = 0.0
            break
        gap = abs(float(x @ (rhs - Kff @ x))) / denom
        if gap <= opts.gap_rtol or _round == opts.max_refinements:
            break
        rtol = max(1e-2 * rtol, 1e-13)
        refinements += 1
    info = replace(info, preconditioner=precond, iterations=total_its,
                   gap=gap, refinements=refinements)
    if opts.cache is not None and precond in ("factor", "amg"):
        opts.cache.last_iters = info.iterations

    u_real = np.zeros(space.n_real_dofs)
    if len(ctx.fixed):
        u_real[ctx.fixed] = ctx.fixed_vals
    u_real[ctx.free] = x
    return DisplacementField(space, space.expand(u_real), u_real, info)


# -- discrete fields -------------------------------------------------------

class DisplacementField:
    """A vector field given by its full nodal coefficient vector."""

    def __init__(self, space, values, u_real=None, info=None):
        self.space = space
        self.values = np.asarray(values, dtype=float)
        self.u_real = u_real
        self.info = info
        self._eue = None
        self._strains = None

    @property
    def element_values(self):
        if self._eue is None:
            self._eue = self.space.element_values(self.values)
        return self._eue

    def qp_strains(self):
        """Engineering strains at quadrature points, (ne, nq, 3)."""
        if self._strains is None:
            self._strains = kernels.qp_strain(
                self.element_values, self.space.B, 1.0 / self.space.mesh.h)
        return self._strains

    def eval(self, elems, ref_pts):
        """Values at reference points of elements: (len(elems), k, 2)."""
        N = q2_shape(ref_pts)
        ue = self.element_values[elems].reshape(len(elems), 9, 2)
        return np.einsum("ka,eac->ekc", N, ue)


def stress_at(u, C, elem, point):
    """Stress 2x2 at a reference point of one element."""
    space = u.space
    B = strain_matrix(np.asarray(point, dtype=float)[None, :])[0]
    eps = (2.0 / space.mesh.h[elem]) * (B @ u.element_values[elem])
    s = C.at(space, elem, point) @ eps
    return np.array([[s[0], s[2]], [s[2], s[1]]])


def compliance(u, bc):
    """Work of the boundary tractions against a displacement field."""
    space = u.space
    mesh = space.mesh
    tol = _node_tol(mesh)
    gx, gw = gauss1d(3)
    from .quadrature import shape1d
    total = 0.0
    for e, side, (axis, coord, lo, hi) in _boundary_edges(mesh):
        for nm in bc.neumann:
            seg = _clip(nm.span, axis, coord, lo, hi, tol)
            if seg is None:
                continue
            a, b = seg
            xi = (2.0 * (a + 0.5 * (gx + 1.0) * (b - a)) - (lo + hi)) \
                / (hi - lo)
            Nv = shape1d(xi)
            nodes = mesh.cell_nodes[e, list(SIDE_NODES[side])]
            uvals = Nv @ u.values[nodes]          # (3 pts, 2)
            g = np.asarray(nm.g, dtype=float)
            total += float(np.sum(gw * (uvals @ g))) * 0.5 * (b - a)
    return total
