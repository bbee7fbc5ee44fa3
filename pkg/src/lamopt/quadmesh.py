"""Adaptive quadrilateral meshes over axis-aligned rectangles.

Cells are addressed as (level, i, j): integer coordinates on the dyadic
grid obtained by bisecting a layout of square root cells level times.
Non-square domains get a root layout of several unit squares (say 2x1
for [0,2]x[0,1]); L-shaped domains deactivate root cells.  Refinement
keeps the mesh 2:1 balanced across edges, so a hanging node is always
the midpoint of exactly one fine edge and its three masters live on the
matching coarse edge.

The mesh object is immutable; `refine` returns a new mesh.  Node and
constraint tables are built once in the constructor in a deterministic
order (cells sorted by (level, i, j), local nodes 3*b + a).
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quadrature import shape1d

# Side indices and their outward step in (i, j).
WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3
SIDE_STEP = ((-1, 0), (1, 0), (0, -1), (0, 1))
# Local node ids of each side's edge, ordered along the ascending axis.
SIDE_NODES = ((0, 3, 6), (2, 5, 8), (0, 1, 2), (6, 7, 8))
CORNER_NODES = (0, 2, 8, 6)  # counter-clockwise, for cell output


@dataclass(frozen=True)
class ElementPatch:
    """The 2x2 group of leaf siblings sharing one parent cell."""
    parent: tuple
    cells: tuple  # (SW, SE, NW, NE)


class QuadMesh:

    def __init__(self, lower, upper, root_shape, leaves, interior,
                 active_roots=None):
        self.lower = (float(lower[0]), float(lower[1]))
        self.upper = (float(upper[0]), float(upper[1]))
        self.root_shape = (int(root_shape[0]), int(root_shape[1]))
        self.active_roots = (None if active_roots is None
                             else frozenset(active_roots))
        s0x = (self.upper[0] - self.lower[0]) / self.root_shape[0]
        s0y = (self.upper[1] - self.lower[1]) / self.root_shape[1]
        if abs(s0x - s0y) > 1e-12 * max(s0x, s0y):
            raise ValueError("root cells must be square")
        self.root_size = s0x
        self._leaves = frozenset(leaves)
        self._interior = frozenset(interior)
        self.cells = sorted(self._leaves)
        self.cell_index = {c: k for k, c in enumerate(self.cells)}
        self.max_level = max(c[0] for c in self.cells)
        self._build_nodes()
        self._build_constraints()
        lev = np.array([c[0] for c in self.cells])
        self.h = self.root_size / 2.0 ** lev
        self.areas = self.h ** 2

    # -- structure queries ------------------------------------------------

    def root_active(self, ri, rj):
        return self.active_roots is None or (ri, rj) in self.active_roots

    def in_domain(self, cell):
        lv, i, j = cell
        if not (0 <= i < self.root_shape[0] << lv
                and 0 <= j < self.root_shape[1] << lv):
            return False
        return self.root_active(i >> lv, j >> lv)

    def is_leaf(self, cell):
        return cell in self._leaves

    def edge_neighbor(self, cell, side):
        """Classify the neighbor across one side of a leaf.

        Returns one of ('boundary', None), ('same', cell),
        ('coarse', parent_cell), ('fine', (cell_lo, cell_hi)) where the
        fine pair is ordered along the ascending edge axis.
        """
        lv, i, j = cell
        di, dj = SIDE_STEP[side]
        nb = (lv, i + di, j + dj)
        if not self.in_domain(nb):
            return "boundary", None
        if nb in self._leaves:
            return "same", nb
        if nb in self._interior:
            ni, nj = nb[1], nb[2]
            if side in (WEST, EAST):
                ci = 2 * ni + (1 if side == WEST else 0)
                pair = ((lv + 1, ci, 2 * nj), (lv + 1, ci, 2 * nj + 1))
            else:
                cj = 2 * nj + (1 if side == SOUTH else 0)
                pair = ((lv + 1, 2 * ni, cj), (lv + 1, 2 * ni + 1, cj))
            return "fine", pair
        parent = (lv - 1, (i + di) >> 1, (j + dj) >> 1)
        if parent in self._leaves:
            return "coarse", parent
        raise RuntimeError("mesh is not 2:1 balanced at %r" % (cell,))

    def cell_origin(self, cell):
        lv, i, j = cell
        s = self.root_size / (1 << lv)
        return self.lower[0] + i * s, self.lower[1] + j * s

    def cell_size(self, cell):
        return self.root_size / (1 << cell[0])

    def edge_span(self, cell, side):
        """Geometry of one cell edge: (line_axis, coord, lo, hi).

        line_axis 'x' means the edge lies on the vertical line x=coord
        and spans [lo, hi] in y; 'y' the transposed statement.
        """
        x0, y0 = self.cell_origin(cell)
        s = self.cell_size(cell)
        if side == WEST:
            return "x", x0, y0, y0 + s
        if side == EAST:
            return "x", x0 + s, y0, y0 + s
        if side == SOUTH:
            return "y", y0, x0, x0 + s
        return "y", y0 + s, x0, x0 + s

    def find_leaf(self, x, y):
        """Leaf containing the point (ties to the cell with larger index)."""
        fx = (x - self.lower[0]) / self.root_size
        fy = (y - self.lower[1]) / self.root_size
        for lv in range(self.max_level, -1, -1):
            n = 1 << lv
            i = min(int(fx * n), self.root_shape[0] * n - 1)
            j = min(int(fy * n), self.root_shape[1] * n - 1)
            cell = (lv, max(i, 0), max(j, 0))
            if cell in self._leaves:
                return cell
        raise ValueError("point (%g, %g) is outside the mesh" % (x, y))

    def ancestor_leaf(self, cell, leaves=None):
        """Leaf of this mesh that equals or contains the given cell."""
        pool = self._leaves if leaves is None else leaves
        lv, i, j = cell
        while lv >= 0:
            if (lv, i, j) in pool:
                return (lv, i, j)
            lv, i, j = lv - 1, i >> 1, j >> 1
        raise KeyError(cell)

    @property
    def total_area(self):
        return float(np.sum(self.areas))

    # -- node and constraint tables ---------------------------------------

    def _node_key(self, cell, a, b):
        lv, i, j = cell
        shift = self.max_level - lv
        return (2 * i + a) << shift, (2 * j + b) << shift

    def _build_nodes(self):
        ids = {}
        cell_nodes = np.empty((len(self.cells), 9), dtype=np.int64)
        for e, cell in enumerate(self.cells):
            for b in range(3):
                for a in range(3):
                    key = self._node_key(cell, a, b)
                    nid = ids.get(key)
                    if nid is None:
                        nid = len(ids)
                        ids[key] = nid
                    cell_nodes[e, 3 * b + a] = nid
        self.cell_nodes = cell_nodes
        self.n_nodes = len(ids)
        pos = np.empty((self.n_nodes, 2))
        unit = self.root_size / (1 << (self.max_level + 1))
        for (kx, ky), nid in ids.items():
            pos[nid, 0] = self.lower[0] + kx * unit
            pos[nid, 1] = self.lower[1] + ky * unit
        self.node_pos = pos

    def _build_constraints(self):
        """Hanging-node interpolation: node -> (3 master ids, 3 weights)."""
        w_lo = shape1d(np.array([-0.5]))[0]  # edge parameter t = 1/4
        w_hi = shape1d(np.array([0.5]))[0]   # edge parameter t = 3/4
        constraints = {}
        for e, cell in enumerate(self.cells):
            lv, i, j = cell
            for side in range(4):
                kind, parent = self.edge_neighbor(cell, side)
                if kind != "coarse":
                    continue
                # midpoint of this cell's edge on that side
                hang_local = {WEST: 3, EAST: 5, SOUTH: 1, NORTH: 7}[side]
                hang = self.cell_nodes[e, hang_local]
                opposite = {WEST: EAST, EAST: WEST,
                            SOUTH: NORTH, NORTH: SOUTH}[side]
                masters = self.cell_nodes[self.cell_index[parent],
                                          list(SIDE_NODES[opposite])]
                parity = j % 2 if side in (WEST, EAST) else i % 2
                weights = w_lo if parity == 0 else w_hi
                prev = constraints.get(hang)
                if prev is not None:
                    assert np.array_equal(prev[0], masters)
                    continue
                constraints[hang] = (masters.copy(), weights.copy())
        for masters, _ in constraints.values():
            assert not any(int(m) in constraints for m in masters)
        self.constraints = constraints
        self.constrained_nodes = np.array(sorted(constraints), dtype=np.int64)

    # -- invariants (used by the tests) -----------------------------------

    def check_balanced(self):
        for cell in self.cells:
            for side in range(4):
                self.edge_neighbor(cell, side)
        return True


def _infer_root_shape(lower, upper):
    w = upper[0] - lower[0]
    h = upper[1] - lower[1]
    if w <= 0 or h <= 0:
        raise ValueError("domain must have positive extent")
    frac = Fraction(w / h).limit_denominator(64)
    if abs(float(frac) - w / h) > 1e-9:
        raise ValueError("domain aspect ratio must be rational with a "
                         "small denominator; got %g" % (w / h))
    return frac.numerator, frac.denominator


def uniform_mesh(lower, upper, level, root_shape=None, active_roots=None):
    """Uniformly refined mesh with cells of size root_size / 2**level."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if root_shape is None:
        root_shape = _infer_root_shape(lower, upper)
    nx, ny = root_shape
    roots = [(i, j) for j in range(ny) for i in range(nx)
             if active_roots is None or (i, j) in set(active_roots)]
    if not roots:
        raise ValueError("no active root cells")
    leaves = set()
    interior = set()
    for (ri, rj) in roots:
        for lv in range(level):
            n = 1 << lv
            interior.update((lv, ri * n + a, rj * n + b)
                            for a in range(n) for b in range(n))
        n = 1 << level
        leaves.update((level, ri * n + a, rj * n + b)
                      for a in range(n) for b in range(n))
    return QuadMesh(lower, upper, root_shape, leaves, interior, active_roots)


def refine(mesh, marked):
    """Refine the marked leaves (plus 2:1 closure); returns a new mesh."""
    marked = sorted(set(marked))
    for cell in marked:
        if not mesh.is_leaf(cell):
            raise ValueError("marked cell %r is not a leaf" % (cell,))
    leaves = set(mesh._leaves)
    interior = set(mesh._interior)

    def in_domain(cell):
        lv, i, j = cell
        if not (0 <= i < mesh.root_shape[0] << lv
                and 0 <= j < mesh.root_shape[1] << lv):
            return False
        return mesh.root_active(i >> lv, j >> lv)

    def split(cell):
        if cell in interior:
            return
        lv, i, j = cell
        for di, dj in SIDE_STEP:
            nb = (lv, i + di, j + dj)
            if lv == 0 or not in_domain(nb):
                continue
            if nb in leaves or nb in interior:
                continue
            # 2:1 balance: the coarser neighbor must be split first
            split((lv - 1, (i + di) >> 1, (j + dj) >> 1))
        leaves.remove(cell)
        interior.add(cell)
        for b in (0, 1):
            for a in (0, 1):
                leaves.add((lv + 1, 2 * i + a, 2 * j + b))

    for cell in marked:
        split(cell)
    return QuadMesh(mesh.lower, mesh.upper, mesh.root_shape, leaves,
                    interior, mesh.active_roots)


def sibling_patch(mesh, cell):
    """The sibling 2x2 patch of a leaf, or None when unavailable.

    Available means: the cell is not a root and all four children of its
    parent are leaves of the mesh.
    """
    lv, i, j = cell
    if lv == 0:
        return None
    pi, pj = i >> 1, j >> 1
    quad = tuple((lv, 2 * pi + a, 2 * pj + b)
                 for b in (0, 1) for a in (0, 1))
    if not all(mesh.is_leaf(c) for c in quad):
        return None
    return ElementPatch(parent=(lv - 1, pi, pj), cells=quad)
