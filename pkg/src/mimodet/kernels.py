"""Kernel backend selection: compiled Cython extension when importable,
pure-numpy fallback otherwise.

Set MIMODET_BACKEND=python or MIMODET_BACKEND=cython to force one; the
default (auto) prefers the extension. Both backends implement the same
contracts and raise the same exception types.
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("MIMODET_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(f"MIMODET_BACKEND must be auto, cython or python, not {_requested!r}")

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise RuntimeError(
                "MIMODET_BACKEND=cython but the mimodet._ckernels extension is not built; "
                "install the package (pip install -e . --no-build-isolation) or use python"
            ) from None
        _impl = _pykernels
        BACKEND = "python"

linear_soft = _impl.linear_soft
ml_search = _impl.ml_search
sphere_search = _impl.sphere_search
vblast = _impl.vblast


def backend() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return BACKEND
