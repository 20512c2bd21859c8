"""Kernel backend selection.

The compiled extension is preferred; ``RWASS_PURE=1`` forces the numpy
fallback, and a missing extension falls back silently so a source tree
works before building.
"""

from __future__ import annotations

import os

if os.environ.get("RWASS_PURE", "").strip() not in ("", "0"):
    from . import _kernels_py as kernels

    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _kernels_py as kernels

        COMPILED = False


def backend_name() -> str:
    return "compiled" if COMPILED else "pure"
