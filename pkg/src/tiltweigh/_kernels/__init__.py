"""Kernel backend selection.

The compiled Cython core is preferred when it built successfully; the numpy
fallback is always available. Set TILTWEIGH_KERNEL=python to force the
fallback (useful for benchmarking and for debugging the compiled path).
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("TILTWEIGH_KERNEL", "").lower() not in ("python", "fallback"):
    try:
        from . import _core

        _impl = _core
        BACKEND = "compiled"
    except ImportError:
        pass

tilt_target_terms = _impl.tilt_target_terms
tilt_source_terms = _impl.tilt_source_terms
tilt_weights = _impl.tilt_weights

__all__ = ["BACKEND", "tilt_target_terms", "tilt_source_terms", "tilt_weights"]
