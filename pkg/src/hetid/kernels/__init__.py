"""Kernel-sum backends for the smoothed conditional-CDF estimator.

Two interchangeable implementations of the hot inner sums: a compiled
extension (built from _fastkern.pyx when Cython and a C compiler are
available) and a NumPy fallback (_refkern).  The compiled one is picked at
import when present; set HETID_NO_EXT=1 to force the fallback.  Both
expose:

    cdf_components(y, x, xq, bx, ygrid, by, idx)
        -> D (m,), Dx (m,), N (k, m), Ny (k, m), Nx (k, m)
    nw_sums(resp, x, xq, bx) -> S0 (m,), S1 (m,)

with the Gaussian product kernel in shape normalization (value 1 at zero),
so D doubles as the effective local sample size.  Ny carries the 1/b_y
density factor; everything else is ratio-ready as is.
"""

import os

from . import _refkern

_BACKEND = "fallback"
_impl = _refkern
if not os.environ.get("HETID_NO_EXT"):
    try:
        from . import _fastkern as _impl  # type: ignore[no-redef]
        _BACKEND = "compiled"
    except ImportError:
        pass

cdf_components = _impl.cdf_components
nw_sums = _impl.nw_sums


def backend_name() -> str:
    """Which implementation got selected at import ('compiled'/'fallback')."""
    return _BACKEND
