"""Backend selection for the hot numerical kernels.

The compiled extension ``mwlab._josephson`` is used when it imports; set
``MWLAB_PURE_PYTHON=1`` to force the pure-Python reference.
"""

import os

from mwlab import _josephson_py

_python_impl = _josephson_py.integrate_dp54

try:
    if os.environ.get("MWLAB_PURE_PYTHON", "").strip() not in ("", "0"):
        raise ImportError("pure-Python backend forced by MWLAB_PURE_PYTHON")
    from mwlab._josephson import integrate_dp54 as _compiled_impl
except ImportError:
    _compiled_impl = None

BACKEND = "cython" if _compiled_impl is not None else "python"
integrate_dp54 = _compiled_impl if _compiled_impl is not None else _python_impl


def available_backends() -> list[str]:
    """Names of the importable backends."""
    return ["cython", "python"] if _compiled_impl is not None else ["python"]


def get_integrator(backend: str | None = None):
    """Return the Dormand-Prince kernel for `backend` (default: active one)."""
    if backend is None:
        return integrate_dp54
    if backend == "python":
        return _python_impl
    if backend == "cython":
        if _compiled_impl is None:
            raise ImportError("compiled kernel mwlab._josephson is not built")
        return _compiled_impl
    raise ValueError(f"unknown backend {backend!r}")
