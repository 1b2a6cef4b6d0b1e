"""Backend selection for the integration kernel.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy implementation is used.  Set ``GPCONSENSUS_BACKEND=python`` to force the
fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

if os.environ.get("GPCONSENSUS_BACKEND", "").lower() == "python" or _compiled is None:
    DEFAULT_BACKEND = "python"
else:
    DEFAULT_BACKEND = "cython"


def get_backend(name: str | None = None):
    """``(name, module)`` for the requested backend, default if ``None``."""
    name = name or DEFAULT_BACKEND
    try:
        return name, BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
