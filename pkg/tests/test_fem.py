"""Q2 elasticity: assembly, constraints, solver, compliance, stresses."""

import numpy as np
import pytest
import scipy.sparse as sp

from lamopt.fem import (ArrayField, BoundaryConditions, CoercivityError,
                        Dirichlet, DisplacementField, EdgeSpan,
                        IsotropicField, Neumann, Q2Space, SolverOptions,
                        assemble, compliance, nodes_on_span, pcg, solve,
                        stress_at)
from lamopt.laminate import IsotropicMaterial
from lamopt.quadmesh import refine, uniform_mesh
from lamopt.quadrature import dshape1d, gauss1d, gauss2d, shape1d

UNIT = ((0.0, 0.0), (1.0, 1.0))
MAT = IsotropicMaterial(1.0, 1.0)

TIGHT = SolverOptions(rtol=1e-13, gap_rtol=1e-14, preconditioner="jacobi")


def hanging_mesh():
    # two refinements on opposite corners leave four hanging edges
    m = uniform_mesh(*UNIT, 2)
    return refine(m, [(2, 0, 0), (2, 3, 3)])


def roller_bc():
    # left/bottom rollers, unit horizontal pull on the right edge:
    # the exact solution u = (3/8 x, -1/8 y) is linear, sigma = diag(1,0)
    return BoundaryConditions(
        dirichlet=(Dirichlet(EdgeSpan("x", 0.0, 0.0, 1.0), comps=(0,)),
                   Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0), comps=(1,))),
        neumann=(Neumann(EdgeSpan("x", 1.0, 0.0, 1.0), g=(1.0, 0.0)),))


def linear_field():
    A = np.array([[0.5, 0.25], [0.1, -0.4]])
    b = np.array([0.3, -0.2])

    def u(x, y):
        return A @ [x, y] + b

    # strain (0.5, -0.4, 0.35); sigma = 2 mu eps + lam tr(eps) I
    sig = np.array([[1.1, 0.35], [0.35, -0.7]])
    return u, sig


# -- quadrature sanity -------------------------------------------------------

def test_quadrature_exact_for_biquartics():
    pts, wts = gauss2d(3)
    for i in range(5):
        for j in range(5):
            val = float(wts @ (pts[:, 0] ** i * pts[:, 1] ** j))
            exact = ((1.0 - (-1.0) ** (i + 1)) / (i + 1)
                     * (1.0 - (-1.0) ** (j + 1)) / (j + 1))
            assert val == pytest.approx(exact, rel=1e-12, abs=1e-12), (i, j)


# -- conjugate gradients -----------------------------------------------------

def test_pcg_diagonal_converges_in_n_iterations():
    n = 40
    A = sp.diags(np.arange(1.0, n + 1.0)).tocsr()
    rng = np.random.default_rng(7)
    b = rng.standard_normal(n)
    x, info = pcg(A, b, rtol=1e-12)
    print("diagonal pcg iterations:", info.iterations)
    assert info.converged
    assert info.iterations <= n
    assert np.allclose(x, b / np.arange(1.0, n + 1.0), atol=1e-10)


def test_pcg_with_exact_preconditioner_is_immediate():
    n = 40
    d = np.arange(1.0, n + 1.0)
    A = sp.diags(d).tocsr()
    b = np.random.default_rng(8).standard_normal(n)
    x, info = pcg(A, b, M=lambda r: r / d, rtol=1e-12)
    assert info.iterations <= 2
    assert np.allclose(x, b / d, atol=1e-12)


def test_pcg_matches_dense_lu():
    rng = np.random.default_rng(42)
    G = rng.standard_normal((50, 50))
    A = G @ G.T + 50.0 * np.eye(50)
    b = rng.standard_normal(50)
    x, info = pcg(A, b, rtol=1e-13)
    x_ref = np.linalg.solve(A, b)
    err = np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref)
    print("pcg vs LU rel err %.3g in %d its" % (err, info.iterations))
    assert info.converged
    assert err <= 1e-8


def test_pcg_zero_rhs_returns_zero():
    A = sp.eye(5).tocsr()
    x, info = pcg(A, np.zeros(5))
    assert info.converged and info.iterations == 0
    assert np.all(x == 0.0)


def test_pcg_indefinite_raises():
    A = np.diag([1.0, -1.0])
    with pytest.raises(CoercivityError):
        pcg(A, np.array([0.0, 1.0]))


# -- assembly ----------------------------------------------------------------

def test_zero_load_full_dirichlet_is_zero():
    mesh = uniform_mesh(*UNIT, 1)
    space = Q2Space(mesh)
    bc = BoundaryConditions(
        dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0)),
                   Dirichlet(EdgeSpan("y", 1.0, 0.0, 1.0)),
                   Dirichlet(EdgeSpan("x", 0.0, 0.0, 1.0)),
                   Dirichlet(EdgeSpan("x", 1.0, 0.0, 1.0))))
    system = assemble(space, IsotropicField(MAT), bc)
    assert np.all(system.f == 0.0)
    u = solve(system)
    assert np.all(u.values == 0.0)


def test_assembled_energy_matches_quadrature_loop():
    # v^T K v against a direct per-element integration of eps:C:eps for
    # an arbitrary coefficient field and an arbitrary constrained vector;
    # exercises the triplet assembly and the constraint sandwich at once
    mesh = hanging_mesh()
    space = Q2Space(mesh)
    rng = np.random.default_rng(3)
    ne, nq = len(mesh.cells), space.nq
    G = rng.standard_normal((ne, nq, 3, 3))
    C_qp = 0.5 * (G + np.swapaxes(G, 2, 3)) + 4.0 * np.eye(3)
    bc = BoundaryConditions()  # no bc: K on all real dofs
    system = assemble(space, ArrayField(C_qp), bc)

    v = rng.standard_normal(space.n_real_dofs)
    quad = float(v @ (system.K @ v))

    vals = space.expand(v)
    ue = space.element_values(vals)          # (ne, 18)
    from lamopt.quadrature import strain_matrix
    B = strain_matrix(space.qp_ref)          # (nq, 3, 18)
    _, w2 = gauss2d(space.nq1d)
    loop = 0.0
    for e in range(ne):
        h = mesh.h[e]
        eps = (2.0 / h) * np.einsum("qci,i->qc", B, ue[e])
        dens = np.einsum("qc,qcd,qd->q", eps, C_qp[e], eps)
        loop += (h / 2.0) ** 2 * float(w2 @ dens)
    print("energy quadratic form: %.12g vs loop %.12g" % (quad, loop))
    assert quad == pytest.approx(loop, rel=1e-12)


def test_single_element_compliance_matches_dense_oracle():
    # independent dense 18x18 build of the same one-element problem
    xg, wg = gauss1d(3)
    K = np.zeros((18, 18))
    C = MAT.voigt()
    for qx, wx in zip(xg, wg):
        for qy, wy in zip(xg, wg):
            Nx, Ny = shape1d(qx), shape1d(qy)
            dNx, dNy = dshape1d(qx), dshape1d(qy)
            B = np.zeros((3, 18))
            for b in range(3):
                for a in range(3):
                    k = 3 * b + a
                    gx = 2.0 * dNx[a] * Ny[b]   # d/dx, h = 1
                    gy = 2.0 * Nx[a] * dNy[b]
                    B[0, 2 * k] = gx
                    B[1, 2 * k + 1] = gy
                    B[2, 2 * k] = gy
                    B[2, 2 * k + 1] = gx
            K += (wx * wy) * 0.25 * (B.T @ C @ B)

    f = np.zeros(18)
    for qy, wy in zip(xg, wg):
        Ny = shape1d(qy)
        for b in range(3):
            k = 3 * b + 2                        # right-edge nodes, a = 2
            f[2 * k] += 0.5 * wy * Ny[b]
    fixed = ([2 * (3 * b + 0) for b in range(3)]         # u_x on x = 0
             + [2 * (3 * 0 + a) + 1 for a in range(3)])  # u_y on y = 0
    free = np.setdiff1d(np.arange(18), fixed)
    ud = np.zeros(18)
    ud[free] = np.linalg.solve(K[np.ix_(free, free)], f[free])
    J_dense = float(f @ ud)

    mesh = uniform_mesh(*UNIT, 0)
    space = Q2Space(mesh)
    bc = roller_bc()
    u = solve(assemble(space, IsotropicField(MAT), bc), options=TIGHT)
    J = compliance(u, bc)
    print("single element compliance %.12g dense %.12g" % (J, J_dense))
    assert J == pytest.approx(J_dense, rel=1e-12)
    # exact solution is linear, so both must equal 3/8
    assert J == pytest.approx(0.375, rel=1e-12)


# -- patch tests -------------------------------------------------------------

def test_dirichlet_patch_test_on_hanging_mesh():
    mesh = hanging_mesh()
    space = Q2Space(mesh)
    exact, sig = linear_field()
    val = lambda x, y: tuple(exact(x, y))
    bc = BoundaryConditions(
        dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0), value=val),
                   Dirichlet(EdgeSpan("y", 1.0, 0.0, 1.0), value=val),
                   Dirichlet(EdgeSpan("x", 0.0, 0.0, 1.0), value=val),
                   Dirichlet(EdgeSpan("x", 1.0, 0.0, 1.0), value=val)))
    system = assemble(space, IsotropicField(MAT), bc)
    u = solve(system, options=TIGHT)

    want = np.array([exact(x, y) for x, y in mesh.node_pos])
    err = np.max(np.abs(u.values - want))
    print("patch test max error %.3g" % err)
    assert err <= 1e-10

    # constant stress everywhere, including the refined cells
    rng = np.random.default_rng(5)
    field = IsotropicField(MAT)
    for e in rng.choice(len(mesh.cells), size=6, replace=False):
        pt = rng.uniform(-1.0, 1.0, size=2)
        s = stress_at(u, field, int(e), pt)
        assert np.allclose(s, sig, atol=1e-9), (e, pt)


def test_roller_patch_test_constant_stress():
    mesh = refine(uniform_mesh(*UNIT, 1), [(1, 1, 1)])
    space = Q2Space(mesh)
    bc = roller_bc()
    u = solve(assemble(space, IsotropicField(MAT), bc), options=TIGHT)

    want = np.column_stack([0.375 * mesh.node_pos[:, 0],
                            -0.125 * mesh.node_pos[:, 1]])
    assert np.max(np.abs(u.values - want)) <= 1e-10

    field = IsotropicField(MAT)
    target = np.array([[1.0, 0.0], [0.0, 0.0]])
    for e in range(len(mesh.cells)):
        s = stress_at(u, field, e, np.array([0.3, -0.7]))
        assert np.allclose(s, target, atol=1e-9)

    # closed-form boundary work of the linear solution
    assert compliance(u, bc) == pytest.approx(0.375, rel=1e-12)


def test_galerkin_identity():
    mesh = refine(uniform_mesh(*UNIT, 2), [(2, 1, 2)])
    space = Q2Space(mesh)
    bc = roller_bc()
    system = assemble(space, IsotropicField(MAT), bc)
    u = solve(system)  # default options, gap ladder active
    ld = system.load_value(u.u_real)
    en = system.energy(u.u_real)
    gap = abs(en - ld) / abs(ld)
    print("galerkin gap %.3g" % gap)
    assert gap <= 1e-8


# -- hanging-node consistency ------------------------------------------------

def test_hanging_edge_evaluation_agrees():
    mesh = hanging_mesh()
    space = Q2Space(mesh)
    rng = np.random.default_rng(11)
    u = DisplacementField(space, space.expand(
        rng.standard_normal(space.n_real_dofs)))

    origins = np.array([mesh.cell_origin(c) for c in mesh.cells])
    sizes = np.array([mesh.cell_size(c) for c in mesh.cells])

    def eval_everywhere(p):
        # evaluate u from every leaf whose closure contains p
        out = []
        for e in range(len(mesh.cells)):
            r = (p - origins[e]) / sizes[e]
            if np.all(r >= -1e-12) and np.all(r <= 1.0 + 1e-12):
                ref = np.clip(2.0 * r - 1.0, -1.0, 1.0)
                out.append(u.eval([e], ref[None, :])[0, 0])
        return out

    checked = 0
    for node, (masters, _) in mesh.constraints.items():
        ph = mesh.node_pos[node]
        for pm in mesh.node_pos[masters]:
            for t in (0.0, 0.31, 0.68):
                vals = eval_everywhere(ph + t * (pm - ph))
                assert len(vals) >= 2
                spread = np.max(np.abs(np.diff(np.array(vals), axis=0)))
                assert spread <= 1e-12
                checked += 1
    print("checked %d hanging-edge points" % checked)
    assert checked > 0


# -- solver accuracy control -------------------------------------------------

def test_gap_ladder_refines_loose_solves():
    mesh = uniform_mesh(*UNIT, 3)
    space = Q2Space(mesh)
    bc = roller_bc()
    system = assemble(space, IsotropicField(MAT), bc)
    loose = SolverOptions(rtol=1e-2, gap_rtol=1e-9, preconditioner="jacobi")
    u = solve(system, options=loose)
    print("refinements %d, gap %.3g" % (u.info.refinements, u.info.gap))
    assert u.info.refinements >= 1
    assert u.info.gap <= 1e-9

    u_ref = solve(system, options=TIGHT)
    assert compliance(u, bc) == pytest.approx(compliance(u_ref, bc),
                                              rel=1e-8)


def test_stress_at_zero_displacement():
    mesh = uniform_mesh(*UNIT, 1)
    space = Q2Space(mesh)
    u = DisplacementField(space, np.zeros((mesh.n_nodes, 2)))
    s = stress_at(u, IsotropicField(MAT), 0, np.array([0.2, 0.4]))
    assert np.all(s == 0.0)


def test_stress_at_linear_field():
    # u = (x, -y): eps = diag(1,-1), trace 0, sigma = diag(2,-2)
    mesh = uniform_mesh(*UNIT, 2)
    space = Q2Space(mesh)
    u = DisplacementField(
        space, np.column_stack([mesh.node_pos[:, 0], -mesh.node_pos[:, 1]]))
    s = stress_at(u, IsotropicField(MAT), 5, np.array([-0.5, 0.25]))
    assert np.allclose(s, np.diag([2.0, -2.0]), atol=1e-12)


def test_nodes_on_span():
    mesh = uniform_mesh(*UNIT, 2)
    space = Q2Space(mesh)
    bottom = nodes_on_span(space, EdgeSpan("y", 0.0, 0.0, 1.0))
    assert len(bottom) == 9
    assert np.allclose(mesh.node_pos[bottom, 1], 0.0)
    half = nodes_on_span(space, EdgeSpan("y", 0.0, 0.0, 0.5))
    assert len(half) == 5


def test_compliance_zero_traction():
    mesh = uniform_mesh(*UNIT, 1)
    space = Q2Space(mesh)
    bc = BoundaryConditions(
        dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0)),),
        neumann=(Neumann(EdgeSpan("y", 1.0, 0.0, 1.0), g=(0.0, 0.0)),))
    u = solve(assemble(space, IsotropicField(MAT), bc))
    assert compliance(u, bc) == 0.0
