"""Kernel backend selection.

The compiled extension ``ratelab._core`` is used when it imports; otherwise
the pure-Python ``ratelab._pycore`` takes over. Set ``RATELAB_PURE=1`` to
force the fallback.
"""

import os

from . import _pycore

try:
    if os.environ.get("RATELAB_PURE", "") == "1":
        raise ImportError("pure-Python backend forced by RATELAB_PURE")
    from . import _core
except ImportError:
    _core = None

BACKEND = "compiled" if _core is not None else "python"


def get_kernels(backend=None):
    """Return the kernel module for ``backend`` ('compiled', 'python' or None)."""
    if backend is None:
        backend = BACKEND
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return _core
    if backend == "python":
        return _pycore
    raise ValueError(f"unknown backend {backend!r}")


def compiled_available():
    return _core is not None
