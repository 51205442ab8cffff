"""Stepping-kernel backend selection.

The compiled extension (``_core``, Cython) is preferred; the pure-numpy
reference (``py_ref``) is used when the extension is missing or when the
environment variable ``TRAJQED_FORCE_PYTHON`` is set to a truthy value.
Both expose the same two functions with identical semantics:

* ``run_trajectory(ops, psi0, uniforms, sample_every)``
* ``lindblad_rk4_run(drift, jumps, rho0, h, n_steps, snap_steps, trace_tol)``
"""

import os

from . import py_ref

_force_py = os.environ.get("TRAJQED_FORCE_PYTHON", "").strip().lower() not in ("", "0", "false")

if _force_py:
    _impl = py_ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = py_ref
        BACKEND = "python"

run_trajectory = _impl.run_trajectory
lindblad_rk4_run = _impl.lindblad_rk4_run


def backend_name() -> str:
    """Name of the kernel backend selected at import ('cython' or 'python')."""
    return BACKEND
