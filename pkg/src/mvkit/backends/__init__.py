"""Backend selection for the hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` build (`numba_impl`) and a pure
numpy build (`numpy_impl`) with identical signatures. The environment
variable ``MVKIT_BACKEND`` picks one at import time:

* ``numba`` - require the jit build, fail if numba is unavailable
* ``numpy`` - force the pure-numpy fallback
* unset / ``auto`` - numba when importable, else numpy

Call sites access kernels as module attributes (``backends.channel_moments``)
so :func:`set_backend` can rebind at runtime; that path is used by the
benchmark and the cross-backend agreement tests. Results of the two builds
agree to floating-point rounding but are not guaranteed bitwise-identical to
each other; each build is individually deterministic.
"""

from __future__ import annotations

import os

from . import numpy_impl

_KERNELS = (
    "channel_moments",
    "centroid_backprop",
    "sq_diff_sum",
    "masked_sq_diff_sum",
    "diff_grad",
    "masked_diff_grad",
    "render_blobs",
    "add_soft_segment",
)

_active = "numpy"


def _load_numba_impl():
    from . import numba_impl

    return numba_impl


def set_backend(name: str) -> str:
    """Bind the named kernel set; returns the backend actually selected."""
    global _active
    if name in ("auto", ""):
        try:
            impl = _load_numba_impl()
            name = "numba"
        except ImportError:
            impl = numpy_impl
            name = "numpy"
    elif name == "numba":
        impl = _load_numba_impl()
    elif name == "numpy":
        impl = numpy_impl
    else:
        raise ValueError(f"unknown backend {name!r}; expected numba, numpy or auto")
    for fn in _KERNELS:
        globals()[fn] = getattr(impl, fn)
    _active = name
    return name


def active_backend() -> str:
    return _active


set_backend(os.environ.get("MVKIT_BACKEND", "auto"))
