"""Kernel selection: compiled extension when importable, else pure Python.

Set ``TWINSCHED_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BY_NAME = {"python": _pykernels}
if _ckernels is not None:
    _BY_NAME["compiled"] = _ckernels


def available() -> list[str]:
    return sorted(_BY_NAME)


def get_kernels(name: str | None = None) -> ModuleType:
    """Return the kernel module called ``name``, or the default one."""
    if name is None:
        name = os.environ.get("TWINSCHED_BACKEND") or ("compiled" if _ckernels else "python")
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}") from None


def default_name() -> str:
    return get_kernels().BACKEND
