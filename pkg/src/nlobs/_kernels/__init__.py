"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension was not built or ``NLOBS_PURE_KERNELS=1`` is set. Both backends
are bit-identical; only speed differs.
"""

import os

if os.environ.get("NLOBS_PURE_KERNELS") == "1":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl

        BACKEND = "pure"

jacobi_eigvals = _impl.jacobi_eigvals
integrate_linpoly = _impl.integrate_linpoly
