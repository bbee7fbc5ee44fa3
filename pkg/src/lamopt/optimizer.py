"""Alternating compliance minimization over laminate designs.

One iteration: solve elasticity for the current design, read stresses
at the quadrature points, set the closed-form optimal lamination angle
and layer fraction, then pick the volume multiplier l by bisection so
that the density field matches the volume budget, and finally update
the densities.  The angle and layer fraction do not depend on l, which
is why the multiplier step can run on frozen stresses.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .fem import (ArrayField, Q2Space, SolverCache, SolverOptions, assemble,
                  compliance, solve)
from .laminate import EPS_DESIGN, SHEAR_REG, volume_of


class InfeasibleVolumeError(RuntimeError):
    """The volume target cannot be met by any multiplier."""


@dataclass(frozen=True, eq=False)
class DesignState:
    """Laminate design fields: per-qp angle/fraction, per-element density."""
    alpha: np.ndarray   # (ne, nq)
    m: np.ndarray       # (ne, nq)
    theta: np.ndarray   # (ne,)
    l: float


def initial_state(ne, nq, volume_fraction):
    """Uniform density at the volume budget, balanced layers, angle 0."""
    th = min(max(volume_fraction, EPS_DESIGN), 1.0)
    return DesignState(alpha=np.zeros((ne, nq)),
                       m=np.full((ne, nq), 0.5),
                       theta=np.full(ne, th),
                       l=1.0)


def design_tensors(state, mat, nq=None):
    """Quadrature-point stiffness tensors of a design, (ne, nq, 3, 3)."""
    ne, nq_ = state.alpha.shape
    theta_qp = np.broadcast_to(state.theta[:, None], (ne, nq_))
    C = kernels.laminate_tensors(state.alpha.ravel(), state.m.ravel(),
                                 theta_qp.ravel(), mat.lam, mat.mu,
                                 SHEAR_REG)
    return np.ascontiguousarray(C.reshape(ne, nq_, 3, 3))


def stresses(u, system):
    """Quadrature-point Voigt stresses of a solution, (ne, nq, 3)."""
    eps = u.qp_strains()
    return np.einsum("eqij,eqj->eqi", system.C_qp, eps)


def update_params(sig, l, mat):
    """Pointwise optimal (alpha, m, theta, S) for stresses (ne, nq, 3)."""
    ne, nq = sig.shape[:2]
    a, m, th, s = kernels.stress_to_params(sig.reshape(-1, 3), l,
                                           mat.lam, mat.mu)
    return (a.reshape(ne, nq), m.reshape(ne, nq),
            th.reshape(ne, nq), s.reshape(ne, nq))


def _volume_at(S, areas, mat, l):
    scale = math.sqrt((2 * mat.mu + mat.lam)
                      / (4 * mat.mu * (mat.mu + mat.lam) * l))
    th = np.clip(np.minimum(scale * S, 1.0), EPS_DESIGN, 1.0)
    return float(np.mean(th, axis=1) @ areas), th


def adapt_multiplier(S, areas, mat, target, l0=1.0, rel_tol=1e-2,
                     max_doublings=60):
    """Multiplier l whose densities meet the volume target.

    The attainable volume lies between eps*|D| and |D| because of the
    clamps; a target outside what any l can reach raises
    InfeasibleVolumeError.  Bisection runs in log space, since l is a
    positive scale factor.
    """
    if target <= 0:
        raise InfeasibleVolumeError("volume target must be positive")
    lo = hi = float(l0)
    v_lo, _ = _volume_at(S, areas, mat, lo)
    k = 0
    while v_lo < target * (1 - rel_tol):
        lo *= 0.5
        v_lo, _ = _volume_at(S, areas, mat, lo)
        k += 1
        if k > max_doublings:
            raise InfeasibleVolumeError(
                "volume target %g unreachable from above (max %g)"
                % (target, v_lo))
    v_hi, _ = _volume_at(S, areas, mat, hi)
    k = 0
    while v_hi > target * (1 + rel_tol):
        hi *= 2.0
        v_hi, _ = _volume_at(S, areas, mat, hi)
        k += 1
        if k > max_doublings:
            raise InfeasibleVolumeError(
                "volume target %g unreachable from below (min %g)"
                % (target, v_hi))
    if lo == hi:
        return lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        v, _ = _volume_at(S, areas, mat, mid)
        if abs(v - target) <= rel_tol * target:
            return mid
        if v > target:
            lo = mid
        else:
            hi = mid
    return mid


@dataclass
class OptimizeOptions:
    tol: float = 1e-7
    max_iters: int = 500
    nq1d: int = 3
    # relative volume tolerance for the per-iteration multiplier update.
    # Enforcing the budget essentially exactly keeps l moving smoothly;
    # a loose band would leave l frozen until the drifting volume hits
    # the band edge, and the resulting multiplier jumps kick |dJ| back
    # above the termination tolerance indefinitely.  Exact enforcement
    # also makes compliances from different meshes comparable, since
    # every reported J then sits at the same material budget.
    volume_tol: float = 1e-9
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class OptimizeResult:
    u: object
    state: DesignState
    J: float
    history: list            # compliance per iteration
    volumes: list            # design volume used in each solve
    multipliers: list
    converged: bool
    iterations: int
    space: object
    system: object           # last assembled system
    galerkin_gaps: list      # |a(u,u) - l(u)| / max(1, |l(u)|) per solve
    solver_iters: list


def optimize(mesh, scenario, init=None, options=None):
    """Run the alternating minimization on one mesh.

    scenario provides .bc, .material and .volume_fraction.  init
    warm-starts the design (used when transferring between meshes).
    Terminates when the compliance stalls to within options.tol
    (relative, floored at 1) or after options.max_iters iterations;
    the returned state is the one the final solve used.
    """
    opts = options or OptimizeOptions()
    mat = scenario.material
    space = Q2Space(mesh, nq1d=opts.nq1d)
    ne, nq = len(mesh.cells), space.nq
    target = scenario.volume_fraction * mesh.total_area
    state = init if init is not None else initial_state(
        ne, nq, scenario.volume_fraction)
    sopts = replace(opts.solver, cache=SolverCache())

    Js, vols, ls, gaps, its = [], [], [], [], []
    u = None
    system = None
    x0 = None
    converged = False
    for it in range(opts.max_iters):
        system = assemble(space, ArrayField(design_tensors(state, mat)),
                          scenario.bc)
        u = solve(system, x0=x0, options=sopts)
        x0 = u.u_real
        J = compliance(u, scenario.bc)
        ld = system.load_value(u.u_real)
        en = system.energy(u.u_real)
        gaps.append(abs(en - ld) / abs(ld) if ld != 0.0 else abs(en))
        its.append(u.info.iterations)
        Js.append(J)
        vols.append(volume_of(state.theta, mesh))
        ls.append(state.l)
        if it > 0 and abs(J - Js[-2]) < opts.tol * max(1.0, abs(J)):
            converged = True
            break
        sig = stresses(u, system)
        alpha, m, _, S = update_params(sig, state.l, mat)
        l_new = adapt_multiplier(S, mesh.areas, mat, target, l0=state.l,
                                 rel_tol=opts.volume_tol)
        _, th_qp = _volume_at(S, mesh.areas, mat, l_new)
        state = DesignState(alpha=alpha, m=m,
                            theta=np.mean(th_qp, axis=1), l=l_new)

    return OptimizeResult(u=u, state=state, J=Js[-1], history=Js,
                          volumes=vols, multipliers=ls,
                          converged=converged, iterations=len(Js),
                          space=space, system=system,
                          galerkin_gaps=gaps, solver_iters=its)
