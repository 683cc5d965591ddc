"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imports; set ``MAPACT_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("MAPACT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

scan_stop = _impl.scan_stop
scan_stop_batch = _impl.scan_stop_batch
plan_grid = _impl.plan_grid
hazard_index = python_backend.hazard_index
CONTINUE = python_backend.CONTINUE
STOP_CONVERGED = python_backend.STOP_CONVERGED
STOP_BUDGET = python_backend.STOP_BUDGET
NO_DIR = python_backend.NO_DIR
DR = python_backend.DR
DC = python_backend.DC

__all__ = [
    "BACKEND",
    "scan_stop",
    "scan_stop_batch",
    "plan_grid",
    "hazard_index",
    "python_backend",
    "compiled_backend",
]
