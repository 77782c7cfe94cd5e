"""Selection between the compiled filter kernel and the Python fallback.

The compiled extension is optional; if it is missing (not built, wrong
platform) the pure-Python loop is used with identical semantics. The
environment variable ``PEDNAV_BACKEND`` forces ``python`` or
``compiled``; ``auto`` (default) prefers the compiled kernel.
"""

from __future__ import annotations

import os

from . import _pyloop
from .errors import ValidationError

try:
    from . import _kernels

    HAVE_COMPILED = True
except ImportError:
    _kernels = None
    HAVE_COMPILED = False


def default_backend() -> str:
    env = os.environ.get("PEDNAV_BACKEND", "auto").lower()
    if env not in ("auto", "python", "compiled"):
        raise ValidationError(f"PEDNAV_BACKEND must be auto/python/compiled, not {env!r}")
    if env == "auto":
        return "compiled" if HAVE_COMPILED else "python"
    return env


def get_loop(backend: str | None = None):
    """Return the run-loop callable for the requested backend."""
    backend = backend or default_backend()
    if backend == "python":
        return _pyloop.run_loop
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise ValidationError("compiled kernel requested but not available")
        return _kernels.run_loop
    raise ValidationError(f"unknown backend {backend!r}")
