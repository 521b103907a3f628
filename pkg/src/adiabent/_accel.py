"""Backend selection for the compiled kernels.

Set ``ADIABENT_DISABLE_NUMBA=1`` to force the pure numpy implementations.
"""

import os

_FLAG = os.environ.get("ADIABENT_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED


def resolve(backend=None):
    """Return ``"numba"`` or ``"numpy"`` for an optional explicit request."""
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise ValueError("numba is not installed")
    return backend
