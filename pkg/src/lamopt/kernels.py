"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set LAMOPT_PURE_PYTHON=1 to force the numpy path (used by the tests
and the kernel benchmark to compare both implementations).
"""

import os

from . import _kernels_py

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

if os.environ.get("LAMOPT_PURE_PYTHON"):
    _compiled = None

USING_COMPILED = _compiled is not None

# Hot kernels, overridden by the extension when present.
if USING_COMPILED:
    element_stiffness = _compiled.element_stiffness
    qp_strain = _compiled.qp_strain
    stress_to_params = _compiled.stress_to_params
    laminate_tensors = _compiled.laminate_tensors
else:
    element_stiffness = _kernels_py.element_stiffness
    qp_strain = _kernels_py.qp_strain
    stress_to_params = _kernels_py.stress_to_params
    laminate_tensors = _kernels_py.laminate_tensors

# Warm helpers with a single implementation.
eig_vals = _kernels_py.eig_vals
cbar_entries = _kernels_py.cbar_entries
bond_matrices = _kernels_py.bond_matrices
tensor_derivatives = _kernels_py.tensor_derivatives
