"""Backend selection for the simulation hot loop.

The compiled extension ``optomo._kernels`` is used when it imports; otherwise
the numpy implementation in :mod:`optomo._kernels_py` takes over.  Setting
the environment variable ``OPTOMO_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_BACKENDS = {"numpy": _kernels_py}

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None
else:
    _BACKENDS["cython"] = _compiled

if _compiled is not None and not os.environ.get("OPTOMO_PURE_PYTHON"):
    DEFAULT_BACKEND = "cython"
else:
    DEFAULT_BACKEND = "numpy"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None):
    """Module exposing ``simulate_block`` for ``name`` (default backend if ``None``)."""
    name = DEFAULT_BACKEND if name is None else name
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available; have {available_backends()}") from None
