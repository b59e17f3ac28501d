"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when it was built; otherwise the
numpy ``_fallback`` is used.  Setting ``RSMATCH_PURE_PYTHON=1`` forces the
fallback.  Both backends expose the same functions and return bit-identical
results.
"""

import os

from . import _fallback as fallback

try:
    from . import _core as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("RSMATCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    backend = compiled
    BACKEND_NAME = "compiled"
else:
    backend = fallback
    BACKEND_NAME = "fallback"

AVAILABLE = {"fallback": fallback}
if compiled is not None:
    AVAILABLE["compiled"] = compiled
