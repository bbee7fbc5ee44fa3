"""Marking, design transfer, and the optimize-estimate-refine loop."""

import time
from dataclasses import dataclass, field

import numpy as np

from .estimator import indicators
from .optimizer import DesignState, OptimizeOptions, optimize
from .quadmesh import refine


def dorfler_mark(eta, fraction):
    """Smallest set of largest indicators holding fraction of the total.

    Returns ascending element indices.  Ties are broken toward the
    smaller index; a zero indicator sum marks nothing.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("indicators must be nonnegative")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    total = float(np.sum(eta))
    if total == 0.0:
        return np.array([], dtype=np.int64)
    order = np.lexsort((np.arange(len(eta)), -eta))
    cum = np.cumsum(eta[order])
    k = int(np.searchsorted(cum, fraction * total, side="left"))
    k = min(k, len(eta) - 1)
    marked = order[:k + 1]
    marked = marked[eta[marked] > 0]
    return np.sort(marked)


def transfer_design(state, old_mesh, new_mesh, qp_ref):
    """Carry a design to a refined mesh.

    Unchanged elements copy their fields.  Children inherit the parent
    density; each child quadrature point takes the angle and layer
    fraction of the nearest parent quadrature point.  The multiplier is
    kept.
    """
    ne, nq = state.alpha.shape
    ne_new = len(new_mesh.cells)
    alpha = np.empty((ne_new, nq))
    m = np.empty((ne_new, nq))
    theta = np.empty(ne_new)
    for k, cell in enumerate(new_mesh.cells):
        e_old = old_mesh.cell_index.get(cell)
        if e_old is not None:
            alpha[k] = state.alpha[e_old]
            m[k] = state.m[e_old]
            theta[k] = state.theta[e_old]
            continue
        anc = old_mesh.ancestor_leaf(cell)
        e_old = old_mesh.cell_index[anc]
        theta[k] = state.theta[e_old]
        x0, y0 = new_mesh.cell_origin(cell)
        h = new_mesh.cell_size(cell)
        xa, ya = old_mesh.cell_origin(anc)
        ha = old_mesh.cell_size(anc)
        pts = np.column_stack([x0 + 0.5 * (qp_ref[:, 0] + 1.0) * h,
                               y0 + 0.5 * (qp_ref[:, 1] + 1.0) * h])
        ref = 2.0 * (pts - [xa, ya]) / ha - 1.0
        d2 = np.sum((ref[:, None, :] - qp_ref[None, :, :]) ** 2, axis=2)
        nearest = np.argmin(d2, axis=1)
        alpha[k] = state.alpha[e_old][nearest]
        m[k] = state.m[e_old][nearest]
    return DesignState(alpha=alpha, m=m, theta=theta, l=state.l)


@dataclass
class StepRecord:
    step: int
    elements: int
    dofs: int
    J: float
    eta_total: float
    volume: float
    l: float
    wall_ms: float
    converged: bool
    mixed_area: float       # area where the density is neither void nor solid
    marked: int = 0


@dataclass
class AdaptiveRun:
    records: list
    mesh: object            # final mesh
    result: object          # final OptimizeResult
    ind: object             # final ElementIndicators


def _mixed_area(theta, mesh, lo=0.05, hi=0.95):
    sel = (theta > lo) & (theta < hi)
    return float(np.sum(mesh.areas[sel]))


def adaptive_loop(scenario, initial_level, max_steps, fraction=0.4,
                  options=None, callback=None, eta_zero=1e-10):
    """Alternate optimization and marked refinement.

    Runs max_steps refinements, so the history holds max_steps + 1
    records; an empty marking ends the loop early.  eta_zero is not a
    stopping threshold: an indicator total below eta_zero relative to
    the objective is floating-point residue of an exactly resolved
    configuration and is treated as zero, so such meshes stop refining
    instead of chasing roundoff.  callback, when given, receives
    (step, mesh, result, indicators) after each optimization, before
    the mesh is refined.
    """
    opts = options or OptimizeOptions()
    mesh = scenario.mesh(initial_level)
    state = None
    records = []
    res = None
    ind = None
    for step in range(max_steps + 1):
        t0 = time.perf_counter()
        res = optimize(mesh, scenario, init=state, options=opts)
        ind = indicators(res.u, res.state, scenario)
        wall = 1000.0 * (time.perf_counter() - t0)
        rec = StepRecord(step=step, elements=len(mesh.cells),
                         dofs=res.space.n_real_dofs, J=res.J,
                         eta_total=ind.total,
                         volume=res.volumes[-1], l=res.state.l,
                         wall_ms=wall, converged=res.converged,
                         mixed_area=_mixed_area(res.state.theta, mesh))
        records.append(rec)
        if callback is not None:
            callback(step, mesh, res, ind)
        if step == max_steps:
            break
        if ind.total <= eta_zero * max(1.0, abs(res.J)):
            marked = np.array([], dtype=np.int64)
        else:
            marked = dorfler_mark(ind.eta, fraction)
        rec.marked = len(marked)
        if len(marked) == 0:
            break
        new_mesh = refine(mesh, [mesh.cells[i] for i in marked])
        state = transfer_design(res.state, mesh, new_mesh,
                                res.space.qp_ref)
        mesh = new_mesh
    return AdaptiveRun(records=records, mesh=mesh, result=res, ind=ind)
