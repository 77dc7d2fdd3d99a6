"""Backend selection for the hot kernels.

Set ``SMISELECT_BACKEND=numpy`` to force the pure-numpy path; the default is
numba whenever it imports.  The choice is made once, at import time.
"""

from __future__ import annotations

import os

from . import _kernels

_NAMES = ("flv_gains", "flq_gains", "min_sqdist_update", "chol_append")


def _resolve(requested: str | None) -> str:
    requested = (requested or "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"SMISELECT_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not _kernels.HAVE_NUMBA:
        return "numpy"
    return requested


BACKEND = _resolve(os.environ.get("SMISELECT_BACKEND"))


def kernels(backend: str = BACKEND) -> dict:
    suffix = "_nb" if backend == "numba" else "_np"
    return {name: getattr(_kernels, name + suffix) for name in _NAMES}


_active = kernels()
flv_gains = _active["flv_gains"]
flq_gains = _active["flq_gains"]
min_sqdist_update = _active["min_sqdist_update"]
chol_append = _active["chol_append"]
