"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the pure numpy implementation is
the fallback. Set XDASR_PURE_PY=1 to force the fallback (useful for
benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _ref

if os.environ.get("XDASR_PURE_PY"):
    _backend = _ref
else:
    try:
        from . import _hot as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _ref

BACKEND_NAME: str = _backend.NAME

lstm_forward = _backend.lstm_forward
lstm_backward = _backend.lstm_backward
ctc_forward_backward = _backend.ctc_forward_backward


def get_backend(name: str):
    """Return a specific backend module ("compiled" or "pure"), if available."""
    if name == "pure":
        return _ref
    if name == "compiled":
        from . import _hot

        return _hot
    raise ValueError(f"unknown backend {name!r}")
