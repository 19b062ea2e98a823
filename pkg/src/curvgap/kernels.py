"""Backend selection for the pointwise maximization kernels.

At import time this module picks the compiled extension when it is present
and falls back to the batched numpy implementation otherwise.  Setting the
environment variable ``CURVGAP_FORCE_NUMPY=1`` skips the compiled backend,
which is how the benchmark and the cross-backend tests get a pure-Python
baseline out of an installed build.

Both backends expose the same two entry points with identical semantics;
see ``curvgap._ascent_np`` for the contracts.
"""

from __future__ import annotations

import os

from . import _ascent_np

_FORCED = os.environ.get("CURVGAP_FORCE_NUMPY", "") == "1"

if not _FORCED:
    try:
        from . import _ascent_cy as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _ascent_np
        BACKEND = "numpy"
else:
    _impl = _ascent_np
    BACKEND = "numpy"

rbc_max = _impl.rbc_max
quartic_vec_max = _impl.quartic_vec_max

# always reachable for cross-checks, whatever the active backend
numpy_backend = _ascent_np


def available_backends() -> tuple:
    names = ["numpy"]
    try:
        from . import _ascent_cy  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return tuple(names)
