"""Backend selection for the stencil kernels.

The compiled extension ``hyperns._kernels`` is used when it imports; the
NumPy implementation in ``hyperns._kernels_py`` is the fallback. Setting
``HYPERNS_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py as python_backend

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("HYPERNS_PURE_PYTHON"):
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = python_backend
    BACKEND = "python"

divergence = _impl.divergence
gradient = _impl.gradient
laplacian = _impl.laplacian
advection = _impl.advection
strain_rate = _impl.strain_rate
stress_divergence = _impl.stress_divergence
burgers_flux = _impl.burgers_flux
second_difference = _impl.second_difference
toeplitz_tridiag_solve = _impl.toeplitz_tridiag_solve

KERNEL_NAMES = (
    "divergence",
    "gradient",
    "laplacian",
    "advection",
    "strain_rate",
    "stress_divergence",
    "burgers_flux",
    "second_difference",
    "toeplitz_tridiag_solve",
)
