"""Select the factorization backend at import time.

The compiled extension (dppdyn._cholcore) is preferred when present; the
NumPy implementation (dppdyn._chol_py) is the fallback. Override with the
environment variable DPPDYN_BACKEND=python|compiled.
"""

import os

from . import _chol_py

_requested = os.environ.get("DPPDYN_BACKEND", "").strip().lower()

if _requested in ("python", "pure"):
    _impl = _chol_py
    BACKEND = "python"
elif _requested in ("", "compiled"):
    try:
        from . import _cholcore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _chol_py
        BACKEND = "python"
else:
    raise ValueError(f"DPPDYN_BACKEND={_requested!r} (expected 'python' or 'compiled')")


def get_backend(name=None):
    """Return a backend module by name; None gives the selected default."""
    if name is None:
        return _impl
    if name in ("python", "pure"):
        return _chol_py
    if name == "compiled":
        from . import _cholcore

        return _cholcore
    raise ValueError(f"unknown backend {name!r}")


chol_append = _impl.chol_append
chol_drop = _impl.chol_drop
schur_batch = _impl.schur_batch
backward_conj_solve = _impl.backward_conj_solve
inv_diag = _impl.inv_diag
projection_sample = _impl.projection_sample
