"""Backend selection for the hot numeric kernels.

Kernels are compiled with numba when it is importable, unless the
environment variable ``ASQCHAIN_DISABLE_NUMBA`` is set to a truthy value,
in which case the vectorised numpy implementations in
:mod:`asqchain.kernels` are used instead.
"""

import os
import warnings

_FALSE = {"", "0", "false", "no", "off"}


def _numba_requested() -> bool:
    return os.environ.get("ASQCHAIN_DISABLE_NUMBA", "").strip().lower() in _FALSE


try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _numba_requested()

if _numba_requested() and not HAS_NUMBA:  # pragma: no cover
    warnings.warn(
        "numba is not available; falling back to numpy kernels",
        RuntimeWarning,
        stacklevel=2,
    )


def njit(fn):
    """Compile ``fn`` with numba if available, else return it unchanged.

    The uncompiled function is kept as ``fn.py_func`` in both cases so that
    tests can exercise the loop implementation without numba.
    """
    if not HAS_NUMBA:
        fn.py_func = fn
        return fn
    import numba

    return numba.njit(cache=True, fastmath=False)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
