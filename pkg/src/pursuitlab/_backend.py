"""Pick the compiled kernels when available, else the numpy fallback.

Set ``PURSUITLAB_PURE=1`` to force the fallback.
"""

import os

if os.environ.get("PURSUITLAB_PURE", "").strip() not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
