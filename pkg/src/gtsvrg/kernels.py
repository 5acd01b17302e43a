"""Backend selection for the inner-loop kernel.

The compiled extension is used when it imports; otherwise the NumPy
fallback.  ``GTSVRG_BACKEND=python`` forces the fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python")


def available_backends() -> list[str]:
    return [b for b in BACKENDS if b == "python" or _compiled is not None]


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (``None`` picks the default)."""
    if name is None:
        name = os.environ.get("GTSVRG_BACKEND") or ("compiled" if _compiled is not None else "python")
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")


def default_backend_name() -> str:
    return "compiled" if get_backend() is _compiled else "python"
