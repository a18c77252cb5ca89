"""Pick the compiled kernels when built, else the numpy twins.

``WAVEFRONT_BACKEND=python`` forces the fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("WAVEFRONT_BACKEND", "").lower() != "python":
    kernels = _compiled
    NAME = "compiled"
else:
    kernels = _fallback
    NAME = "python"


def get(name=None):
    """Kernel module by name: ``"compiled"``, ``"python"`` or ``None`` (default)."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run pip install -e .")
        return _compiled
    raise ValueError("unknown backend %r" % name)
