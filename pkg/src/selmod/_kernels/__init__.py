"""Kernel backend selection.

The compiled Cython series kernel is used when the extension built, unless
``SELMOD_PURE_PYTHON`` is set in the environment; otherwise the NumPy
fallback in :mod:`selmod._kernels.pure` takes over with identical semantics.
"""

import os

from . import pure

if os.environ.get("SELMOD_PURE_PYTHON"):
    backend = pure
else:
    try:
        from . import _series as backend  # type: ignore[no-redef]
    except ImportError:
        backend = pure

HAVE_COMPILED = bool(getattr(backend, "COMPILED", False))

count_series_batch = backend.count_series_batch

# code tables shared by both backends
FAM_CODES = {"poisson": pure.FAM_POISSON, "negbin": pure.FAM_NEGBIN}
G0_CODES = {
    "stdnormal": pure.G0_STDNORMAL,
    "logistic": pure.G0_LOGISTIC,
    "unitexp": pure.G0_UNITEXP,
}
H_CODES = {
    "linear": pure.H_LINEAR,
    "standardized": pure.H_STANDARDIZED,
    "explinear": pure.H_EXPLINEAR,
    "expstandardized": pure.H_EXPSTANDARDIZED,
    "mgflinear": pure.H_MGFLINEAR,
}
