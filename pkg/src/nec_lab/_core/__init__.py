"""Backend selection: compiled Cython kernel with a pure-numpy fallback.

Set NEC_LAB_BACKEND=numpy (or =cython) to force a backend; the default
prefers the compiled extension and falls back silently.
"""

import os

_requested = os.environ.get("NEC_LAB_BACKEND", "").strip().lower()
if _requested not in ("", "cython", "numpy"):
    raise ValueError(f"NEC_LAB_BACKEND must be 'cython' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from . import numpy_backend as _impl

    backend_name = "numpy"
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]

        backend_name = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import numpy_backend as _impl

        backend_name = "numpy"

rhs_batch = _impl.rhs_batch
probe_values = _impl.probe_values

__all__ = ["rhs_batch", "probe_values", "backend_name"]
