"""Backend selection for the hot metric kernels.

Imports the compiled extension when available and falls back to the
pure-Python implementation otherwise.  ``BACKEND`` records which one won
so callers (and the benchmark) can report it.
"""

from __future__ import annotations

try:
    from mskd._fastkern import box_iou, interval_iou, levenshtein

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - exercised only in pure installs
    from mskd._kernels_py import box_iou, interval_iou, levenshtein

    BACKEND = "python"

__all__ = ["BACKEND", "box_iou", "interval_iou", "levenshtein"]
