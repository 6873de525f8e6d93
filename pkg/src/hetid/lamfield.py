"""The identifying field: ratio of CDF partials, its weighted average, and
everything read off from it.

lambda_tilde(y|x) is the ratio (d/dx_i F) / (d/dy F) of conditional-CDF
partials.  Averaging it against a weight v over the covariate box gives a
one-dimensional function lam(y) with a single sign change at y0; the slope
of lam at y0 recovers the scale coefficient B, and lam itself drives the
closed-form reconstruction of the transformation h.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import (BracketError, ConfigError, DegenerateDensityError,
                     IdentificationError, LimitError)
from .models import (CoefficientPair, TransformationModel, WeightFunction,
                     cond_cdf_dxi, cond_cdf_dy)
from .quadrature import quad_box, quad_box_mc

# diagnostic verdicts
HETEROSCEDASTIC = "heteroscedastic"
HOMOSCEDASTIC_CONSISTENT = "homoscedastic-consistent"
INCONCLUSIVE = "inconclusive"

DENSITY_FLOOR = 1e-300
B_FLOOR = 1e-8


@dataclass(frozen=True)
class LambdaField:
    """Queryable lam(y) with its root, evaluation grid, and provenance.

    `lam` is vectorized over y.  `lambda_tilde` maps (y, x) to the partial
    ratio with the usual broadcasting.  `coeffs` holds (A, B) when they are
    available (oracle mode) or (0, B_hat) in plug-in mode.
    """

    lam: Callable[[np.ndarray], np.ndarray]
    lambda_tilde: Callable
    y0: float
    grid: np.ndarray
    values: np.ndarray
    quadrature_tol: float
    coeffs: Optional[CoefficientPair] = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# pointwise ratio
# ---------------------------------------------------------------------------

def lambda_tilde(dF_dxi, dF_dy, floor: float = DENSITY_FLOOR):
    """Ratio of the covariate partial to the response partial of the CDF.

    Guards against division by a vanishing conditional density: any
    denominator at or below `floor` raises rather than returning inf.
    """
    num = np.asarray(dF_dxi, dtype=float)
    den = np.asarray(dF_dy, dtype=float)
    if np.any(den <= floor):
        worst = float(np.min(den))
        raise DegenerateDensityError(
            f"response-partial of the conditional CDF is {worst:.3e} <= "
            f"{floor:.3e}; density degenerate at a query point"
        )
    out = num / den
    return float(out) if out.ndim == 0 else out


def oracle_partials(model: TransformationModel, index: int = 1):
    """Callable (y-grid, x-batch) -> (dF_dxi, dF_dy) from the analytic model."""

    def partials(ys, xpts):
        return (cond_cdf_dxi(model, ys, xpts, index),
                cond_cdf_dy(model, ys, xpts))

    return partials


# ---------------------------------------------------------------------------
# weighted average over the covariate box
# ---------------------------------------------------------------------------

def integrate_lambda(partials, weight: WeightFunction, y, tol: float = 1e-10):
    """lam(y) = integral of v(x) * lambda_tilde(y|x) over the weight box.

    `partials` maps (y-array (k,), x-batch (m, d)) to a pair of (k, m)
    arrays.  All y entries are integrated together in one adaptive pass.
    Tensor-product quadrature for d <= 3, Monte Carlo beyond.
    """
    yarr = np.atleast_1d(np.asarray(y, dtype=float))
    lo, up = weight.box()

    def integrand(pts):
        w = weight.v(pts)
        dfxi, dfy = partials(yarr, pts)
        return np.atleast_2d(lambda_tilde(dfxi, dfy)) * w

    if weight.d_x <= 3:
        vals, _ = quad_box(integrand, lo, up, tol=tol)
    else:
        vals, _ = quad_box_mc(integrand, lo, up)
    return vals if np.asarray(y).ndim else float(vals[0])


def coefficients_AB(model: TransformationModel, weight: WeightFunction,
                    tol: float = 1e-10, b_floor: float = B_FLOOR) -> CoefficientPair:
    """Weighted-average coefficients (A, B) of the identifying ODE.

    A = int v * (sigma * dg - g * dsigma) / sigma, B = int v * dsigma / sigma,
    derivatives taken in the weight's coordinate.  |B| below b_floor means
    the scale does not vary along that coordinate and identification fails.
    """
    i = weight.index - 1
    lo, up = weight.box()

    def integrand(pts):
        w = weight.v(pts)
        g = np.asarray(model.g(pts), dtype=float)
        s = np.asarray(model.sigma(pts), dtype=float)
        gi = np.asarray(model.g_grad(pts), dtype=float).reshape(-1, model.d_x)[:, i]
        si = np.asarray(model.sigma_grad(pts), dtype=float).reshape(-1, model.d_x)[:, i]
        return np.stack([w * (s * gi - g * si) / s, w * si / s])

    if weight.d_x <= 3:
        vals, _ = quad_box(integrand, lo, up, tol=tol)
    else:
        vals, _ = quad_box_mc(integrand, lo, up)
    a, b = float(vals[0]), float(vals[1])
    if abs(b) < b_floor:
        raise IdentificationError(
            f"scale coefficient B = {b:.3e} is below the floor {b_floor:g}: "
            "the model looks homoscedastic on the weight support; run the "
            "homoscedasticity diagnostic"
        )
    return CoefficientPair(A=a, B=b)


# ---------------------------------------------------------------------------
# root and slope
# ---------------------------------------------------------------------------

def find_y0(lam, lo: float, hi: float, scan_points: int = 513,
            xtol: float = 1e-10) -> float:
    """Locate the sign change of lam on [lo, hi].

    Scans a uniform grid for crossings, then polishes with a bracketing
    solver.  With several crossings (noisy plug-in fields) the one closest
    to the median crossing location wins — edge crossings from boundary
    noise sit far from the median and are discarded.
    """
    ys = np.linspace(lo, hi, scan_points)
    vals = np.asarray(lam(ys), dtype=float)
    if not np.isfinite(vals).all():
        raise BracketError("lambda evaluated non-finite during root scan")
    sgn = np.sign(vals)
    exact = np.flatnonzero(sgn == 0)
    flips = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
    locs = np.concatenate([ys[exact], 0.5 * (ys[flips] + ys[flips + 1])])
    if locs.size == 0:
        raise BracketError(
            f"no sign change of lambda on [{lo:g}, {hi:g}]; "
            "cannot locate the root"
        )
    target = np.median(locs)
    pick = np.argmin(np.abs(locs - target))
    if pick < exact.size:
        return float(ys[exact[pick]])
    k = flips[pick - exact.size]

    def f(t):
        return float(np.atleast_1d(np.asarray(lam(np.array([t]))))[0])

    return float(optimize.brentq(f, ys[k], ys[k + 1], xtol=xtol))


def recover_B(lam, y0: float, step: Optional[float] = None,
              levels: int = 4) -> float:
    """Scale coefficient from the slope of lam at its root: B = -lam'(y0).

    The identity lam(y) = -(A + B*h(y)) / h'(y) differentiates at y0 to
    -B - (A + B*h(y0)) * (h''/h'^2)(y0) = -B, because A + B*h(y0) = 0 by
    definition of the root.  Central differences with Richardson
    extrapolation (`levels` rounds of step halving); levels=1 is a plain
    central difference for noisy tabulated fields.
    """
    h0 = step if step is not None else 1e-2 * max(1.0, abs(y0))
    hs = h0 / (2.0 ** np.arange(levels))
    pts = np.concatenate([y0 + hs, y0 - hs])
    vals = np.asarray(lam(pts), dtype=float)
    quot = (vals[:levels] - vals[levels:]) / (2.0 * hs)
    if not np.isfinite(quot).all():
        raise LimitError(
            f"non-finite slope quotients for lambda near y0 = {y0:g}"
        )
    # triangular Richardson table in powers of h^2
    table = quot.copy()
    for k in range(1, levels):
        fac = 4.0 ** k
        table = (fac * table[1:] - table[:-1]) / (fac - 1.0)
    return -float(table[-1])


# ---------------------------------------------------------------------------
# homoscedasticity diagnostic
# ---------------------------------------------------------------------------

def homoscedasticity_diagnostic(lt_values, noise=0.0) -> str:
    """Classify a (y-grid x x-grid) table of partial ratios by sign pattern.

    A scale that genuinely varies with x forces lambda_tilde(.|x) to change
    sign in y for some x; a constant scale pins its sign.  Entries within
    `noise` (scalar or per-entry array) of zero are treated as unsigned.
    Returns one of HETEROSCEDASTIC, HOMOSCEDASTIC_CONSISTENT, INCONCLUSIVE.
    """
    vals = np.asarray(lt_values, dtype=float)
    if vals.ndim != 2 or vals.shape[0] < 20 or vals.shape[1] < 1:
        raise ConfigError(
            "diagnostic needs a (y, x) table with at least 20 response points "
            f"per covariate column; got shape {vals.shape}"
        )
    if not np.isfinite(vals).all():
        raise ConfigError("diagnostic table contains non-finite entries")
    thr = np.broadcast_to(np.asarray(noise, dtype=float), vals.shape)
    signed = np.abs(vals) > thr
    if not signed.any():
        return INCONCLUSIVE
    any_signed_col = False
    for j in range(vals.shape[1]):
        col = vals[signed[:, j], j]
        if col.size == 0:
            continue
        any_signed_col = True
        if (col > 0).any() and (col < 0).any():
            return HETEROSCEDASTIC
    return HOMOSCEDASTIC_CONSISTENT if any_signed_col else INCONCLUSIVE


def lambda_tilde_grid(model: TransformationModel, weight: WeightFunction,
                      ygrid, n_x: int = 9):
    """Oracle lambda_tilde table on ygrid x (uniform x-nodes in the box).

    Returns (table (k, m), x-nodes (m, d)).  Input to the diagnostic.
    """
    lo, up = weight.box()
    axes = [np.linspace(lo[j], up[j], n_x) for j in range(weight.d_x)]
    mesh = np.meshgrid(*axes, indexing="ij")
    xpts = np.stack([m.ravel() for m in mesh], axis=-1)
    ys = np.asarray(ygrid, dtype=float)
    table = lambda_tilde(cond_cdf_dxi(model, ys, xpts, weight.index),
                         cond_cdf_dy(model, ys, xpts))
    return table, xpts


# ---------------------------------------------------------------------------
# field construction (oracle mode)
# ---------------------------------------------------------------------------

def oracle_lambda_field(model: TransformationModel, weight: WeightFunction,
                        grid, tol: float = 1e-10) -> LambdaField:
    """Build the full field for an analytic model: tabulated lam, its root,
    and the coefficient pair, all by adaptive quadrature at tolerance tol."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigError("lambda grid must be strictly increasing, length >= 2")
    partials = oracle_partials(model, weight.index)

    def lam(ys):
        return integrate_lambda(partials, weight, ys, tol=tol)

    def lt(y, x):
        return lambda_tilde(cond_cdf_dxi(model, y, x, weight.index),
                            cond_cdf_dy(model, y, x))

    values = np.asarray(lam(grid), dtype=float)
    y0 = find_y0(lam, float(grid[0]), float(grid[-1]))
    coeffs = coefficients_AB(model, weight, tol=tol)
    return LambdaField(lam=lam, lambda_tilde=lt, y0=y0, grid=grid,
                       values=values, quadrature_tol=tol, coeffs=coeffs,
                       meta={"mode": "oracle", "model": model.name})
