"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled module is preferred. Set ``SWARMHRL_PURE_PYTHON=1`` to force
the fallback (useful for debugging and for the backend benchmark).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_FORCE_PURE = os.environ.get("SWARMHRL_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError as exc:  # pragma: no cover - depends on build
    log.debug("compiled kernels unavailable (%s); using numpy fallback", exc)
    _impl = _pykernels
    BACKEND = "python"

visibility = _impl.visibility
segments_blocked = _impl.segments_blocked
average_linkage = _impl.average_linkage
rollout = _impl.rollout


def backends():
    """Map of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return out
