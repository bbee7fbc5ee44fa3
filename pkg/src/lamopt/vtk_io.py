"""Legacy ASCII VTK output of meshes and fields."""

import numpy as np

from .quadmesh import CORNER_NODES


def _fmt(x):
    return "%.9g" % x


def write_vtk(path, mesh, point_data=None, cell_data=None,
              title="lamopt fields"):
    """Write the mesh as VTK QUAD cells with optional data.

    point_data maps names to (n_nodes, 2) vector arrays indexed by mesh
    node id (only corner vertices are written); cell_data maps names to
    (n_cells,) scalars.
    """
    corner_ids = mesh.cell_nodes[:, list(CORNER_NODES)]
    used = np.unique(corner_ids)
    renum = np.full(mesh.n_nodes, -1, dtype=np.int64)
    renum[used] = np.arange(len(used))
    cells = renum[corner_ids]
    pts = mesh.node_pos[used]

    lines = []
    lines.append("# vtk DataFile Version 3.0")
    lines.append(title)
    lines.append("ASCII")
    lines.append("DATASET UNSTRUCTURED_GRID")
    lines.append("POINTS %d double" % len(pts))
    for x, y in pts:
        lines.append("%s %s 0" % (_fmt(x), _fmt(y)))
    lines.append("CELLS %d %d" % (len(cells), 5 * len(cells)))
    for quad in cells:
        lines.append("4 %d %d %d %d" % tuple(quad))
    lines.append("CELL_TYPES %d" % len(cells))
    lines.extend(["9"] * len(cells))

    if point_data:
        lines.append("POINT_DATA %d" % len(pts))
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            lines.append("VECTORS %s double" % name)
            for row in arr[used]:
                lines.append("%s %s 0" % (_fmt(row[0]), _fmt(row[1])))
    if cell_data:
        lines.append("CELL_DATA %d" % len(cells))
        for name, arr in cell_data.items():
            arr = np.asarray(arr, dtype=float)
            lines.append("SCALARS %s double 1" % name)
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in arr)

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def von_mises(sig):
    """Plane von Mises stress from Voigt stresses (..., 3)."""
    sig = np.asarray(sig, dtype=float)
    s11, s22, s12 = sig[..., 0], sig[..., 1], sig[..., 2]
    return np.sqrt(s11 ** 2 - s11 * s22 + s22 ** 2 + 3.0 * s12 ** 2)
