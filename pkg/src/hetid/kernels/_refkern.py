"""NumPy reference backend for the kernel sums.

Materializes the (n, m) covariate weight matrix and the (k, n) response
kernel matrices, then reduces with matmuls.  Clear and BLAS-fast, at the
price of O(n*k) temporaries; the compiled backend fuses these loops.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _weights(x, xq, bx):
    """Gaussian product kernel in shape normalization: W[j, q], value 1 at
    coincidence.  Also returns the scaled coordinate differences U."""
    u = (xq[None, :, :] - x[:, None, :]) / bx[None, None, :]
    w = np.exp(-0.5 * np.sum(u * u, axis=2))
    return w, u


def cdf_components(y, x, xq, bx, ygrid, by, idx):
    """Sums behind the smoothed conditional-CDF estimator and its partials.

    y: (n,) responses; x: (n, d) covariates; xq: (m, d) query points;
    bx: (d,) covariate bandwidths; ygrid: (k,) response grid; by: response
    bandwidth; idx: 0-based coordinate of the x-derivative.

    Returns (D, Dx, N, Ny, Nx): D = sum_j W_jq, Dx its x_idx derivative,
    N[k,q] = sum_j W_jq * Phi((ygrid_k - y_j)/by), Ny the same with the
    density phi/by, Nx the same as N with dW/dx_idx in place of W.
    """
    y = np.asarray(y, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xq = np.atleast_2d(np.asarray(xq, dtype=float))
    bx = np.asarray(bx, dtype=float)
    ygrid = np.asarray(ygrid, dtype=float)

    w, u = _weights(x, xq, bx)
    c = -u[:, :, idx] / bx[idx]          # dW/dx_idx = W * c
    wc = w * c

    t = (ygrid[:, None] - y[None, :]) / by
    big_phi = special.ndtr(t)
    small_phi = np.exp(-0.5 * t * t) / _SQRT2PI

    d0 = w.sum(axis=0)
    dx = wc.sum(axis=0)
    n0 = big_phi @ w
    ny = (small_phi @ w) / by
    nx = big_phi @ wc
    return d0, dx, n0, ny, nx


def nw_sums(resp, x, xq, bx):
    """Local kernel sums for a regression: S0[q] = sum_j W_jq (the effective
    local sample size) and S1[q] = sum_j W_jq * resp_j."""
    resp = np.asarray(resp, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xq = np.atleast_2d(np.asarray(xq, dtype=float))
    bx = np.asarray(bx, dtype=float)
    w, _ = _weights(x, xq, bx)
    return w.sum(axis=0), resp @ w
