"""State-space kernel used by the model checker.

The compiled extension is preferred; the pure-Python reference is used when
the extension is missing or when ``LFBFS_PURE_PYTHON=1`` is set. Both expose
``successors``, ``scan_convergence`` and ``scan_loop_free`` with identical
results.
"""

import os

from . import _pykernel as python_kernel

compiled_kernel = None
if os.environ.get("LFBFS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernel as compiled_kernel
    except ImportError:  # pragma: no cover - depends on the build
        compiled_kernel = None

kernel = compiled_kernel if compiled_kernel is not None else python_kernel
KIND = kernel.KIND

__all__ = ["kernel", "python_kernel", "compiled_kernel", "KIND"]
