"""Kernel backend selection.

The hot numeric kernels exist twice: a numba ``@njit`` build and a pure
numpy build with identical call signatures. The active backend is chosen
once at import time:

* ``PYRFLOW_BACKEND=numpy`` forces the numpy fallback,
* ``PYRFLOW_BACKEND=numba`` requires numba and fails loudly without it,
* unset (default) uses numba when importable, numpy otherwise.
"""

import os

_ENV_VAR = "PYRFLOW_BACKEND"
_VALID = ("", "numba", "numpy")


def requested_backend() -> str:
    """Return the backend requested through the environment ('' = auto)."""
    value = os.environ.get(_ENV_VAR, "").strip().lower()
    if value not in _VALID:
        raise RuntimeError(
            f"{_ENV_VAR} must be 'numba' or 'numpy', got {value!r}"
        )
    return value


def select_backend() -> str:
    """Resolve the backend name to import ('numba' or 'numpy')."""
    value = requested_backend()
    if value == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if value == "numba":
            raise
        return "numpy"
    return "numba"
