"""Hot loops with a compiled (Cython) backend and a numpy fallback.

The compiled module is used when it was built and imports cleanly; setting
``ROBUSTFOLIO_PURE_PYTHON=1`` forces the fallback.  ``BACKEND`` names the
active implementation.
"""

import os

from . import _pykernels as python

STATUS_OPTIMAL = python.STATUS_OPTIMAL
STATUS_UNBOUNDED = python.STATUS_UNBOUNDED
STATUS_ITERATION_CAP = python.STATUS_ITERATION_CAP

try:
    if os.environ.get("ROBUSTFOLIO_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced")
    from . import _ckernels as compiled
except ImportError:
    compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

simplex_pivot = _impl.simplex_pivot
eu_supergradient = _impl.eu_supergradient
grid_scan = _impl.grid_scan


def backends():
    """Available implementations by name (for tests and benchmarks)."""
    out = {"python": python}
    if compiled is not None:
        out["cython"] = compiled
    return out
