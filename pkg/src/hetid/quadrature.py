"""Adaptive quadrature with embedded-rule error estimates.

One-dimensional integrals use a Gauss-Kronrod 7/15 pair on a panel list that
is subdivided in bulk wherever the local error exceeds its share of the
tolerance.  Box integrals over axis-aligned boxes use the tensor-product
pair for up to three dimensions (boxes split along their widest axis) and
plain Monte Carlo with a reported standard error beyond that.

All drivers accept vectorized integrands: f maps an array of abscissae of
shape (p,) (or (p, d) for boxes) to values of shape (p,) or (k, p), so a
whole family of integrals sharing the same domain is refined together
against the worst component.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError

# Kronrod-15 abscissae on [-1, 1] and the paired weights.  Odd-indexed
# entries are the embedded Gauss-7 nodes.
_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)


def _panel_eval(f, lo, hi):
    """Kronrod/Gauss values and error estimates on a batch of panels.

    lo, hi: arrays of shape (m,).  Returns (I_k, err) with component shape
    (..., m) where ... are the integrand's leading output dims.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    # nodes laid out panel-major: shape (m, 15) flattened
    nodes = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
    vals = np.asarray(f(nodes), dtype=float)
    vals = vals.reshape(vals.shape[:-1] + (lo.size, 15))
    ik = half * np.tensordot(vals, _WK, axes=([-1], [0]))
    ig = half * np.tensordot(vals[..., _GAUSS_IDX], _WG, axes=([-1], [0]))
    err = np.abs(ik - ig)
    return ik, err


def quad_adaptive(f, a: float, b: float, tol: float = 1e-10,
                  max_panels: int = 4096, min_panels: int = 1):
    """Integrate f over [a, b] to absolute tolerance tol.

    f must accept an array of points and may return per-point values of
    shape (p,) or (k, p); in the latter case each component integral is
    driven below tol.  Returns (value, err_estimate) with value shape ()
    or (k,).  Raises QuadratureError when the panel budget is exhausted.
    """
    if a == b:
        probe = np.asarray(f(np.array([a])), dtype=float)
        return np.zeros(probe.shape[:-1]), 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    edges = np.linspace(a, b, min_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    ik, err = _panel_eval(f, lo, hi)
    while True:
        comp_err = err if err.ndim == 1 else err.reshape(-1, err.shape[-1]).max(axis=0)
        total = float(comp_err.sum())
        if total <= tol:
            value = ik.sum(axis=-1)
            return sign * value, total
        # refine every panel carrying more than its length-share of tol
        share = tol * (hi - lo) / (b - a)
        bad = comp_err > np.maximum(share, 1e-300)
        if not bad.any():
            bad = comp_err == comp_err.max()
        if lo.size + bad.sum() > max_panels:
            raise QuadratureError(
                f"quadrature on [{a:g}, {b:g}] exceeded {max_panels} panels "
                f"(achieved error {total:.3e}, requested {tol:.3e})",
                achieved=total,
            )
        mids = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[~bad], lo[bad], mids])
        new_hi = np.concatenate([hi[~bad], mids, hi[bad]])
        ik_new, err_new = _panel_eval(f, np.concatenate([lo[bad], mids]),
                                      np.concatenate([mids, hi[bad]]))
        keep_ik = ik[..., ~bad]
        keep_err = err[..., ~bad] if err.ndim > 1 else err[~bad]
        ik = np.concatenate([keep_ik, ik_new], axis=-1)
        err = np.concatenate([keep_err, err_new], axis=-1)
        lo, hi = new_lo, new_hi


def chain_integrals(f, points, tol: float = 1e-11, max_panels: int = 4096):
    """Integrals of f over each consecutive interval of sorted `points`.

    Returns an array of length len(points) - 1 with the signed integral on
    [points[i], points[i+1]].  All intervals are refined together, which
    keeps the number of integrand calls small when f is vectorized.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size < 2:
        return np.zeros(0)
    if np.any(np.diff(pts) <= 0):
        raise ValueError("chain_integrals requires strictly increasing points")
    lo, hi = pts[:-1].copy(), pts[1:].copy()
    owner = np.arange(lo.size)
    ik, err = _panel_eval(f, lo, hi)
    span = pts[-1] - pts[0]
    while True:
        total = float(err.sum())
        if total <= tol:
            break
        share = tol * (hi - lo) / span
        bad = err > np.maximum(share, 1e-300)
        if not bad.any():
            break
        if lo.size + bad.sum() > max_panels:
            raise QuadratureError(
                f"interval-chain quadrature exceeded {max_panels} panels "
                f"(achieved error {total:.3e}, requested {tol:.3e})",
                achieved=total,
            )
        mids = 0.5 * (lo[bad] + hi[bad])
        ik_new, err_new = _panel_eval(f, np.concatenate([lo[bad], mids]),
                                      np.concatenate([mids, hi[bad]]))
        lo = np.concatenate([lo[~bad], lo[bad], mids])
        hi = np.concatenate([hi[~bad], mids, hi[bad]])
        owner = np.concatenate([owner[~bad], owner[bad], owner[bad]])
        ik = np.concatenate([ik[~bad], ik_new])
        err = np.concatenate([err[~bad], err_new])
    out = np.zeros(pts.size - 1)
    np.add.at(out, owner, ik)
    return out


def _box_nodes(lower, upper):
    """Tensor Kronrod nodes and (Kronrod, Gauss) weight vectors for one box."""
    d = lower.size
    axes = []
    for j in range(d):
        half = 0.5 * (upper[j] - lower[j])
        mid = 0.5 * (upper[j] + lower[j])
        axes.append(mid + half * _XK)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wk = _WK.copy()
    wg = np.zeros(15)
    wg[_GAUSS_IDX] = _WG
    WK = wk
    WG = wg
    for _ in range(d - 1):
        WK = np.multiply.outer(WK, wk)
        WG = np.multiply.outer(WG, wg)
    vol_scale = np.prod(0.5 * (upper - lower))
    return pts, WK.ravel() * vol_scale, WG.ravel() * vol_scale


def quad_box(f, lower, upper, tol: float = 1e-10, max_boxes: int = 2048):
    """Integrate f over an axis-aligned box, d <= 3.

    f maps points of shape (p, d) to (p,) or (k, p) values.  Returns
    (value, err_estimate).  For d > 3 use quad_box_mc.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.size
    if d > 3:
        raise ValueError("quad_box supports d <= 3; use quad_box_mc beyond that")
    if np.any(upper <= lower):
        raise ValueError("box must have positive extent in every coordinate")

    def eval_boxes(boxes):
        iks, errs = [], []
        for bl, bu in boxes:
            pts, WK, WG = _box_nodes(bl, bu)
            vals = np.asarray(f(pts), dtype=float)
            ik = np.tensordot(vals, WK, axes=([-1], [0]))
            ig = np.tensordot(vals, WG, axes=([-1], [0]))
            iks.append(ik)
            errs.append(np.max(np.abs(ik - ig)))
        return iks, errs

    boxes = [(lower, upper)]
    iks, errs = eval_boxes(boxes)
    while True:
        total = float(np.sum(errs))
        if total <= tol:
            return np.sum(iks, axis=0), total
        if len(boxes) >= max_boxes:
            raise QuadratureError(
                f"box quadrature exceeded {max_boxes} boxes "
                f"(achieved error {total:.3e}, requested {tol:.3e})",
                achieved=total,
            )
        worst = int(np.argmax(errs))
        bl, bu = boxes.pop(worst)
        iks.pop(worst)
        errs.pop(worst)
        axis = int(np.argmax(bu - bl))
        mid = 0.5 * (bl[axis] + bu[axis])
        bu_left = bu.copy()
        bu_left[axis] = mid
        bl_right = bl.copy()
        bl_right[axis] = mid
        new = [(bl, bu_left), (bl_right, bu)]
        nik, nerr = eval_boxes(new)
        boxes.extend(new)
        iks.extend(nik)
        errs.extend(nerr)


def quad_box_mc(f, lower, upper, n: int = 100_000, seed: int = 0):
    """Monte Carlo box integral for d > 3: returns (value, standard_error)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lower, upper, size=(n, lower.size))
    vals = np.asarray(f(pts), dtype=float)
    vol = float(np.prod(upper - lower))
    value = vol * vals.mean(axis=-1)
    se = vol * vals.std(axis=-1, ddof=1) / np.sqrt(n)
    return value, np.max(se)
