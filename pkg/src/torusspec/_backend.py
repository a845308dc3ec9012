"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python kernels when
the extension is missing or when TORUSSPEC_PURE_PYTHON=1 is set.
"""

import os

if os.environ.get("TORUSSPEC_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

star_term = _impl.star_term
