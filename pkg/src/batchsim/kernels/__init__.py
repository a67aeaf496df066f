"""Hot kernels with a compiled core and a pure-Python fallback.

The Cython extension ``_core`` is used when it was built; otherwise (or when
``BATCHSIM_PURE_PYTHON`` is set to a non-empty value other than ``0``) the
functions come from ``_fallback``. ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _fallback

_force_pure = os.environ.get("BATCHSIM_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

fifo_schedule = _impl.fifo_schedule
rank_sum_counts = _impl.rank_sum_counts
dominance_counts = _impl.dominance_counts

__all__ = ["BACKEND", "fifo_schedule", "rank_sum_counts", "dominance_counts"]
