"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Set ``TROMBONE_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("TROMBONE_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

path_terms = _impl.path_terms
flight_times = _impl.flight_times
objective = _impl.objective
project = _impl.project
spg = _impl.spg

__all__ = ["BACKEND", "path_terms", "flight_times", "objective", "project", "spg"]
