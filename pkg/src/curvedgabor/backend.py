"""Kernel backend selection.

The hot per-pixel kernels exist twice: a compiled extension
(`_kernels_cy`, built from Cython) and a pure-numpy fallback
(`_kernels_py`). The compiled one is picked at import when present; set
CURVEDGABOR_BACKEND=python|native to force a choice, or call
`set_backend` at runtime.
"""

from __future__ import annotations

import os

_NATIVE_NAMES = ("native", "cython", "c")
_PYTHON_NAMES = ("python", "py", "fallback")


def _load(name: str):
    if name in _PYTHON_NAMES:
        from . import _kernels_py

        return _kernels_py
    if name in _NATIVE_NAMES or name == "auto":
        try:
            from . import _kernels_cy

            return _kernels_cy
        except ImportError:
            if name != "auto":
                raise ImportError(
                    "compiled kernel backend requested but the extension is not built"
                )
        from . import _kernels_py

        return _kernels_py
    raise ValueError(f"unknown backend name: {name!r}")


kernels = _load(os.environ.get("CURVEDGABOR_BACKEND", "auto").strip().lower() or "auto")


def backend_name() -> str:
    return kernels.BACKEND_NAME


def set_backend(name: str) -> None:
    """Switch the active kernel backend ("native" or "python")."""
    global kernels
    kernels = _load(name.strip().lower())
