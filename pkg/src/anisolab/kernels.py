"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
module is used.  Set ``ANISOLAB_BACKEND=python`` to force the fallback.
"""

import os

from anisolab import _kernels_py

_requested = os.environ.get("ANISOLAB_BACKEND", "").lower()

_impl = _kernels_py
if _requested != "python":
    try:
        from anisolab import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def available_backends():
    """Names and modules of every importable backend, python first."""
    out = {"python": _kernels_py}
    try:
        from anisolab import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out


modular_sum = _impl.modular_sum
luxemburg_gauge = _impl.luxemburg_gauge
aniso_flux = _impl.aniso_flux
aniso_weights = _impl.aniso_weights
lagged_apply = _impl.lagged_apply
