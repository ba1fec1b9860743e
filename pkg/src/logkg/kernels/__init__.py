"""Time-stepping kernels: compiled extension when available, NumPy otherwise.

The backend is selected once at import.  Set ``LOGKG_BACKEND=python`` to
force the fallback, or ``LOGKG_BACKEND=compiled`` to require the extension
(raises ImportError when it is not built).
"""

import os

from . import _fallback

_choice = os.environ.get("LOGKG_BACKEND", "auto")
if _choice not in ("auto", "python", "compiled"):
    raise ValueError(f"LOGKG_BACKEND must be 'auto', 'python' or 'compiled', got {_choice!r}")

if _choice == "python":
    _impl = _fallback
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "LOGKG_BACKEND=compiled but the logkg.kernels._speedups extension "
                "is not built; reinstall with a C compiler and Cython available"
            )
        _impl = _fallback

BACKEND = "python" if _impl is _fallback else "compiled"

efd_advance = _impl.efd_advance
sifd_factor = _impl.sifd_factor
sifd_advance = _impl.sifd_advance

__all__ = ["BACKEND", "efd_advance", "sifd_factor", "sifd_advance"]
