"""Closed-form reconstruction of the transformation h from the field lam.

The transformation solves h'(y) = -(A + B*h(y)) / lam(y) away from the root
y0 of lam.  On each side of y0 the general solution is

    h(y) = (C * exp(-B * int_anchor^y du/lam(u)) - A) / B

with a free constant C per side; pinning C on the upper side by a scale
constraint h(y1) = alpha and matching one-sided derivatives at y0 fixes the
lower constant, which is what alpha2_limit computes.  1/lam has a simple
pole at y0, so no integral ever crosses it: a small excision band around y0
is left to monotone interpolation and h(y0) is set to its exact value -A/B.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import LimitError, ReconstructionError
from .lamfield import find_y0
from .quadrature import chain_integrals, quad_adaptive

CANONICAL = "canonical"
TWO_POINT = "two-point"
POINT_SLOPE = "point-plus-slope"


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSet:
    """Normalization pinning the affine indeterminacy of h.

    canonical: h(y0) = -A/B and h(y1) = alpha at some y1 > y0.
    two-point: h(y_a) = alpha_a, h(y_b) = alpha_b with y_a < y_b, alpha_a < alpha_b.
    point-plus-slope: h(y_a) = alpha_a and h'(y_a) = slope > 0.
    """

    kind: str
    y1: float = np.nan
    alpha: float = np.nan
    ya: float = np.nan
    yb: float = np.nan
    alpha_a: float = np.nan
    alpha_b: float = np.nan
    slope: float = np.nan

    @classmethod
    def canonical(cls, y1: float, alpha: float) -> "ConstraintSet":
        return cls(kind=CANONICAL, y1=float(y1), alpha=float(alpha))

    @classmethod
    def two_point(cls, ya, yb, alpha_a, alpha_b) -> "ConstraintSet":
        if not ya < yb:
            raise ReconstructionError(f"two-point constraint needs y_a < y_b, "
                                      f"got {ya:g} >= {yb:g}")
        if not alpha_a < alpha_b:
            raise ReconstructionError(
                f"two-point constraint needs alpha_a < alpha_b, got "
                f"{alpha_a:g} >= {alpha_b:g} (h is increasing)")
        return cls(kind=TWO_POINT, ya=float(ya), yb=float(yb),
                   alpha_a=float(alpha_a), alpha_b=float(alpha_b))

    @classmethod
    def point_slope(cls, ya, alpha_a, slope) -> "ConstraintSet":
        if not slope > 0:
            raise ReconstructionError(f"slope constraint must be positive, "
                                      f"got {slope:g}")
        return cls(kind=POINT_SLOPE, ya=float(ya), alpha_a=float(alpha_a),
                   slope=float(slope))


@dataclass
class ReconstructedTransform:
    """h on a grid with the constants that produced it.

    `interpolated` marks grid points inside the excision band whose values
    come from monotone interpolation rather than the closed form.
    `residuals` holds h'_num * lam + A + B*h per solid grid point (NaN at
    interpolated ones).  meta carries diagnostics such as the one-sided
    derivative quotients at y0.
    """

    grid: np.ndarray
    values: np.ndarray
    y0: float
    alpha2: float
    B: float
    A: float
    delta_exc: float
    residuals: np.ndarray
    interpolated: np.ndarray
    constraints: Optional[ConstraintSet] = None
    meta: dict = field(default_factory=dict)

    def interpolator(self) -> PchipInterpolator:
        """Monotone interpolant through the grid plus the exact root point."""
        xs, vs = self.grid, self.values
        if not np.any(np.isclose(xs, self.y0, rtol=0.0, atol=1e-14)):
            j = np.searchsorted(xs, self.y0)
            xs = np.insert(xs, j, self.y0)
            vs = np.insert(vs, j, -self.A / self.B)
        return PchipInterpolator(xs, vs, extrapolate=True)

    def __call__(self, y):
        return self.interpolator()(y)


# ---------------------------------------------------------------------------
# branch evaluation
# ---------------------------------------------------------------------------

def _as_vector_lam(lam):
    def call(us):
        return np.asarray(lam(np.asarray(us, dtype=float)), dtype=float)
    return call


def _prefix_integrals(lam, anchor: float, targets: np.ndarray,
                      tol: float) -> np.ndarray:
    """int_anchor^t du/lam(u) for every t in targets (all on one side of y0).

    Consecutive-interval quadrature over the sorted union of anchor and
    targets, then signed prefix sums.
    """
    lamv = _as_vector_lam(lam)
    pts = np.unique(np.concatenate([[anchor], targets]))
    if pts.size == 1:
        return np.zeros_like(targets)

    def inv(us):
        vals = lamv(us)
        if np.any(vals == 0.0):
            raise ReconstructionError(
                "lambda vanished inside a branch integral; the integration "
                "range must stay on one side of y0")
        return 1.0 / vals

    pieces = chain_integrals(inv, pts, tol=tol)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    k0 = np.searchsorted(pts, anchor)
    prefix = cum - cum[k0]
    idx = np.searchsorted(pts, targets)
    return prefix[idx]


def _branch_values(lam, A, B, anchor, anchor_value, targets, tol):
    """Closed-form h on `targets` given h(anchor) = anchor_value."""
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        return np.zeros(0)
    I = _prefix_integrals(lam, anchor, targets, tol)
    C = A + B * anchor_value
    return (C * np.exp(-B * I) - A) / B


def reconstruct_upper(lam, A: float, B: float, y1: float, alpha: float,
                      grid, y0: Optional[float] = None, exc: float = 0.0,
                      tol: float = 1e-11) -> np.ndarray:
    """h on grid points above y0, pinned by h(y1) = alpha.

    h(y) = ((A + B*alpha) * exp(-B * int_{y1}^y du/lam) - A) / B; at y = y1
    the integral is empty and alpha is returned exactly.  When y0 is given,
    grid points at or below y0 + exc are rejected.
    """
    pts = np.asarray(grid, dtype=float)
    if y0 is not None:
        bad = pts <= y0 + exc
        if bad.any():
            raise ReconstructionError(
                f"{int(bad.sum())} grid point(s) at or below y0 + {exc:g} = "
                f"{y0 + exc:g}: the branch integral would cross the pole of "
                "1/lambda; use the global reconstruction for two-sided grids")
        if not y1 > y0 + exc:
            raise ReconstructionError(
                f"scale-constraint point y1 = {y1:g} must sit above the "
                f"excision band edge {y0 + exc:g}")
    return _branch_values(lam, A, B, y1, alpha, pts, tol)


# ---------------------------------------------------------------------------
# the lower-branch constant
# ---------------------------------------------------------------------------

def _sliver(lam, a: float, b: float, tol: float) -> float:
    lamv = _as_vector_lam(lam)
    val, _ = quad_adaptive(lambda us: 1.0 / lamv(us), a, b, tol=tol)
    return float(val)

def alpha2_limit(lam, A: float, B: float, y1: float, y2: float, alpha: float,
                 y0: float, t0: Optional[float] = None, halvings: int = 12,
                 rtol: float = 1e-8, tol: float = 1e-12,
                 return_sequence: bool = False):
    """Lower-branch value constant from one-sided derivative matching at y0.

    Evaluates s(t) = (A + B*alpha) * exp(B * (int_{y2}^{y0-t} du/lam +
    int_{y0+t}^{y1} du/lam)) on t_k = t0 / 2^k.  Both truncated integrals
    diverge logarithmically as t -> 0 (1/lam ~ -1/(B(u - y0))) but their
    sum converges; the remaining error is a power series in t, so two
    Richardson levels on the halved sequence reach the limit fast.  Returns
    alpha2 = -(lim s + A)/B.
    """
    if not y2 < y0 < y1:
        raise ReconstructionError(
            f"need y2 < y0 < y1, got y2={y2:g}, y0={y0:g}, y1={y1:g}")
    if t0 is None:
        t0 = 0.1 * min(y1 - y0, y0 - y2)
    if not 0 < t0 < min(y1 - y0, y0 - y2):
        raise ReconstructionError(f"limit step t0 = {t0:g} out of range")

    ts = t0 / 2.0 ** np.arange(halvings)
    # base truncated integrals at the widest t, then incremental slivers
    lower = _sliver(lam, y2, y0 - ts[0], tol)
    upper = _sliver(lam, y0 + ts[0], y1, tol)
    s_seq = np.empty(halvings)
    s_seq[0] = (A + B * alpha) * np.exp(B * (lower + upper))
    for k in range(1, halvings):
        lower += _sliver(lam, y0 - ts[k - 1], y0 - ts[k], tol)
        upper += _sliver(lam, y0 + ts[k], y0 + ts[k - 1], tol)
        s_seq[k] = (A + B * alpha) * np.exp(B * (lower + upper))
    if not np.isfinite(s_seq).all():
        raise LimitError("derivative-matching limit produced non-finite values")

    # Richardson in powers of t on the halved sequence
    r1 = 2.0 * s_seq[1:] - s_seq[:-1]
    r2 = (4.0 * r1[1:] - r1[:-1]) / 3.0
    diffs = np.abs(np.diff(r2)) / np.maximum(1.0, np.abs(r2[1:]))
    hit = np.flatnonzero(diffs < rtol)
    if hit.size == 0:
        raise LimitError(
            f"derivative-matching limit did not settle within {halvings} "
            f"halvings (last relative change {diffs[-1]:.3e} >= {rtol:g})")
    s_lim = float(r2[hit[0] + 1])
    alpha2 = -(s_lim + A) / B
    if return_sequence:
        return alpha2, {"t": ts, "raw": s_seq, "extrapolated": r2,
                        "converged_at": int(hit[0] + 2)}
    return alpha2


# ---------------------------------------------------------------------------
# residual diagnostics
# ---------------------------------------------------------------------------

def branch_quotients(lam, A, B, y1, alpha, y0, ts, tol: float = 1e-11):
    """Right difference quotients (h(y0 + t) - h(y0)) / t of the upper-branch
    closed form, h(y0) taken as its root value -A/B.

    With the correct B these converge to h'(y0) > 0 as t -> 0; with a wrong
    scale coefficient the branch value approaches the root like a fractional
    power of t and the quotients drift to 0 or diverge — the falsification
    signal for the slope law B = -lam'(y0).
    """
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= 0):
        raise ReconstructionError("quotient offsets t must be positive")
    vals = _branch_values(lam, A, B, y1, alpha, y0 + ts, tol)
    return (vals - (-A / B)) / ts


def ode_residuals(grid, values, lam_values, A, B, solid=None):
    """Pointwise h'_num * lam + A + B*h with non-uniform centered differences.

    `solid` masks the points whose values come from the closed form; the
    difference stencil uses only those, and masked-out points get NaN.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    lam_values = np.asarray(lam_values, dtype=float)
    if solid is None:
        solid = np.ones(grid.size, dtype=bool)
    out = np.full(grid.size, np.nan)
    xs, hs = grid[solid], values[solid]
    if xs.size >= 3:
        deriv = np.gradient(hs, xs, edge_order=2)
        out[solid] = deriv * lam_values[solid] + A + B * hs
    return out


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------

def reconstruct_global(lam, A: float, B: float, constraints: ConstraintSet,
                       grid, y0: Optional[float] = None,
                       y2: Optional[float] = None, exc_frac: float = 1e-3,
                       tol: float = 1e-11, check_monotone: bool = True,
                       lam_values=None,
                       alpha2_rtol: float = 1e-8) -> ReconstructedTransform:
    """Assemble h on a grid spanning both sides of y0.

    Canonical path: upper branch pinned at (y1, alpha), exact value -A/B at
    y0, lower branch pinned at (y2, alpha2) with alpha2 from the derivative
    matching limit.  Two-point and point-plus-slope constraints go through
    reconstruct_direct.  Grid points inside the excision band
    |y - y0| < exc_frac * range are filled by monotone interpolation and
    flagged.  `lam_values`, when given, skips re-evaluating lam on the grid
    for residuals.
    """
    if constraints.kind != CANONICAL:
        return reconstruct_direct(lam, B, constraints, grid, y0=y0, y2=y2,
                                  exc_frac=exc_frac, tol=tol,
                                  check_monotone=check_monotone,
                                  lam_values=lam_values)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 5 or np.any(np.diff(grid) <= 0):
        raise ReconstructionError("grid must be strictly increasing, length >= 5")
    if y0 is None:
        y0 = find_y0(lam, float(grid[0]), float(grid[-1]))
    span = float(grid[-1] - grid[0])
    exc = exc_frac * span
    y1, alpha = constraints.y1, constraints.alpha
    if not y1 > y0 + exc:
        raise ReconstructionError(
            f"canonical constraint point y1 = {y1:g} must lie above "
            f"y0 + excision = {y0 + exc:g}")
    if not alpha > -A / B:
        raise ReconstructionError(
            f"canonical scale value alpha = {alpha:g} must exceed the root "
            f"value -A/B = {-A / B:g} for an increasing h")
    if y2 is None:
        y2 = y0 - (y1 - y0)
    if not grid[0] - 1e-12 <= y2 < y0 - exc:
        raise ReconstructionError(
            f"lower anchor y2 = {y2:g} must lie in [grid start, y0 - "
            f"excision) = [{grid[0]:g}, {y0 - exc:g})")

    alpha2, limit_info = alpha2_limit(lam, A, B, y1, y2, alpha, y0,
                                      rtol=alpha2_rtol, return_sequence=True)

    at_root = np.isclose(grid, y0, rtol=0.0, atol=1e-14)
    up_mask = (grid > y0 + exc) & ~at_root
    lo_mask = (grid < y0 - exc) & ~at_root
    band_mask = ~(up_mask | lo_mask | at_root)

    values = np.empty_like(grid)
    values[at_root] = -A / B
    values[up_mask] = _branch_values(lam, A, B, y1, alpha, grid[up_mask], tol)
    values[lo_mask] = _branch_values(lam, A, B, y2, alpha2, grid[lo_mask], tol)

    solid = ~band_mask
    if band_mask.any():
        # monotone fill across the band from nearby solid points + exact root
        xs = np.concatenate([grid[solid], [] if at_root.any() else [y0]])
        vs = np.concatenate([values[solid], [] if at_root.any() else [-A / B]])
        order = np.argsort(xs)
        fill = PchipInterpolator(xs[order], vs[order])
        values[band_mask] = fill(grid[band_mask])

    if check_monotone and np.any(np.diff(values) <= 0):
        k = int(np.argmin(np.diff(values)))
        raise ReconstructionError(
            f"reconstructed h is not strictly increasing near y = "
            f"{grid[k]:g}; lambda or the constants are inconsistent")

    lamg = (np.asarray(lam_values, dtype=float) if lam_values is not None
            else _as_vector_lam(lam)(grid))
    residuals = ode_residuals(grid, values, lamg, A, B, solid=solid)

    # one-sided difference quotients at y0 (closed-form, off-grid)
    t_match = 1e-3 * span
    h_r = _branch_values(lam, A, B, y1, alpha, np.array([y0 + t_match]), tol)[0]
    h_l = _branch_values(lam, A, B, y2, alpha2, np.array([y0 - t_match]), tol)[0]
    root_val = -A / B
    meta = {
        "constraint_kind": CANONICAL,
        "y1": y1, "alpha": alpha, "y2": y2,
        "alpha2_sequence": limit_info,
        "deriv_quotients": (float((root_val - h_l) / t_match),
                            float((h_r - root_val) / t_match)),
        "deriv_match_step": t_match,
    }
    return ReconstructedTransform(
        grid=grid, values=values, y0=float(y0), alpha2=float(alpha2),
        B=float(B), A=float(A), delta_exc=float(exc), residuals=residuals,
        interpolated=band_mask, constraints=constraints, meta=meta)


def reconstruct_direct(lam, B: float, constraints: ConstraintSet, grid,
                       y0: Optional[float] = None, y2: Optional[float] = None,
                       exc_frac: float = 1e-3, tol: float = 1e-11,
                       check_monotone: bool = True,
                       lam_values=None) -> ReconstructedTransform:
    """Reconstruction under two-point or point-plus-slope constraints.

    Works in the linear parameters (C, A) of the general solution
    h(y) = (C * G(y) - A) / B, where G is exp(-B * int 1/lam) anchored on
    the upper side and its derivative-matched continuation below y0.  Each
    constraint is linear in (C, A), so the pair is solved exactly and no
    affine post-processing is needed.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 5 or np.any(np.diff(grid) <= 0):
        raise ReconstructionError("grid must be strictly increasing, length >= 5")
    if y0 is None:
        y0 = find_y0(lam, float(grid[0]), float(grid[-1]))
    span = float(grid[-1] - grid[0])
    exc = exc_frac * span

    # reference anchors on both sides; G == 1 at y1ref by construction
    y1ref = y0 + 0.5 * (grid[-1] - y0)
    y2ref = y2 if y2 is not None else y0 - 0.5 * (y0 - grid[0])
    # kappa = lim exp(B(int_{y2ref}^{y0-t} + int_{y0+t}^{y1ref}) du/lam):
    # run the alpha2 machinery with A=0, alpha=1, so s_lim = kappa and
    # alpha2 = -kappa
    kappa = -alpha2_limit(lam, 0.0, B, y1ref, y2ref, 1.0, y0, tol=max(tol, 1e-12))

    def G_at(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty_like(pts)
        hi = pts > y0 + exc
        lo = pts < y0 - exc
        mid = ~(hi | lo)
        if hi.any():
            I = _prefix_integrals(lam, y1ref, pts[hi], tol)
            out[hi] = np.exp(-B * I)
        if lo.any():
            I = _prefix_integrals(lam, y2ref, pts[lo], tol)
            out[lo] = -kappa * np.exp(-B * I)
        if mid.any():
            raise ReconstructionError(
                "constraint point inside the excision band around y0 = "
                f"{y0:g}; move it at least {exc:g} away")
        return out

    if constraints.kind == TWO_POINT:
        ya, yb = constraints.ya, constraints.yb
        aa, ab = constraints.alpha_a, constraints.alpha_b
        Ga, Gb = G_at(np.array([ya, yb]))
        det = Ga - Gb
        if abs(det) < 1e-14 * max(1.0, abs(Ga), abs(Gb)):
            raise ReconstructionError(
                "two-point constraints degenerate: the solution basis takes "
                f"equal values at y_a={ya:g} and y_b={yb:g}")
        # C*Ga - A = B*aa ; C*Gb - A = B*ab
        C = B * (aa - ab) / det
        A = C * Ga - B * aa
    elif constraints.kind == POINT_SLOPE:
        ya, aa, ab = constraints.ya, constraints.alpha_a, constraints.slope
        lam_a = float(np.atleast_1d(_as_vector_lam(lam)(np.array([ya])))[0])
        # h'(y_a) = -(A + B*h(y_a)) / lam(y_a) = ab fixes A outright
        A = -ab * lam_a - B * aa
        Ga = G_at(np.array([ya]))[0]
        C = (B * aa + A) / Ga
    else:
        raise ReconstructionError(
            f"unsupported constraint kind '{constraints.kind}' for direct "
            "reconstruction")

    at_root = np.isclose(grid, y0, rtol=0.0, atol=1e-14)
    up_mask = (grid > y0 + exc) & ~at_root
    lo_mask = (grid < y0 - exc) & ~at_root
    band_mask = ~(up_mask | lo_mask | at_root)

    values = np.empty_like(grid)
    values[at_root] = -A / B
    if up_mask.any():
        I = _prefix_integrals(lam, y1ref, grid[up_mask], tol)
        values[up_mask] = (C * np.exp(-B * I) - A) / B
    if lo_mask.any():
        I = _prefix_integrals(lam, y2ref, grid[lo_mask], tol)
        values[lo_mask] = (C * (-kappa) * np.exp(-B * I) - A) / B

    solid = ~band_mask
    if band_mask.any():
        xs = grid[solid]
        vs = values[solid]
        if not at_root.any():
            j = np.searchsorted(xs, y0)
            xs = np.insert(xs, j, y0)
            vs = np.insert(vs, j, -A / B)
        fill = PchipInterpolator(xs, vs)
        values[band_mask] = fill(grid[band_mask])

    if check_monotone and np.any(np.diff(values) <= 0):
        k = int(np.argmin(np.diff(values)))
        raise ReconstructionError(
            f"reconstructed h is not strictly increasing near y = {grid[k]:g}")

    lamg = (np.asarray(lam_values, dtype=float) if lam_values is not None
            else _as_vector_lam(lam)(grid))
    residuals = ode_residuals(grid, values, lamg, A, B, solid=solid)
    alpha2 = (C * (-kappa) - A) / B  # value the lower anchor y2ref carries
    meta = {"constraint_kind": constraints.kind, "C": float(C),
            "kappa": float(kappa), "y1ref": float(y1ref),
            "y2ref": float(y2ref)}
    return ReconstructedTransform(
        grid=grid, values=values, y0=float(y0), alpha2=float(alpha2),
        B=float(B), A=float(A), delta_exc=float(exc), residuals=residuals,
        interpolated=band_mask, constraints=constraints, meta=meta)


# ---------------------------------------------------------------------------
# constraint remapping
# ---------------------------------------------------------------------------

def remap_constraints(rt: ReconstructedTransform, target: ConstraintSet,
                      lam=None) -> np.ndarray:
    """Affine image of a reconstruction satisfying `target` exactly.

    two-point: T(y) = (ab - aa) * (T0(y) - T0(y_a)) / (T0(y_b) - T0(y_a)) + aa.
    point-plus-slope: same with the scale fixed by slope / T0'(y_a); the
    derivative comes from the ODE identity T0' = -(A + B*T0)/lam, so `lam`
    is required for that kind.  Identity remaps return the values unchanged.
    """
    f = rt.interpolator()
    if target.kind == TWO_POINT:
        ya, yb = target.ya, target.yb
        aa, ab = target.alpha_a, target.alpha_b
        _check_in_range(rt, ya, "y_a")
        _check_in_range(rt, yb, "y_b")
        t_a, t_b = float(f(ya)), float(f(yb))
        if abs(t_b - t_a) < 1e-14 * max(1.0, abs(t_a), abs(t_b)):
            raise ReconstructionError(
                "remap denominator degenerate: reconstruction takes equal "
                f"values at y_a={ya:g} and y_b={yb:g}")
        scale = (ab - aa) / (t_b - t_a)
    elif target.kind == POINT_SLOPE:
        if lam is None:
            raise ReconstructionError(
                "point-plus-slope remap needs the lambda field to evaluate "
                "the derivative at y_a")
        ya, aa = target.ya, target.alpha_a
        _check_in_range(rt, ya, "y_a")
        t_a = float(f(ya))
        lam_a = float(np.atleast_1d(_as_vector_lam(lam)(np.array([ya])))[0])
        d_a = -(rt.A + rt.B * t_a) / lam_a
        if not d_a > 0:
            raise ReconstructionError(
                f"reconstruction has nonpositive slope {d_a:g} at y_a={ya:g}")
        scale = target.slope / d_a
    elif target.kind == CANONICAL:
        ya, aa = rt.y0, -rt.A / rt.B
        _check_in_range(rt, target.y1, "y1")
        t_a = -rt.A / rt.B
        t_b = float(f(target.y1))
        if abs(t_b - t_a) < 1e-14 * max(1.0, abs(t_a), abs(t_b)):
            raise ReconstructionError("remap denominator degenerate at y1")
        scale = (target.alpha - aa) / (t_b - t_a)
        # canonical keeps the root value fixed
        return aa + scale * (rt.values - t_a)
    else:
        raise ReconstructionError(f"unknown constraint kind '{target.kind}'")
    return aa + scale * (rt.values - t_a)


def _check_in_range(rt: ReconstructedTransform, y: float, label: str) -> None:
    if not rt.grid[0] - 1e-12 <= y <= rt.grid[-1] + 1e-12:
        raise ReconstructionError(
            f"constraint point {label} = {y:g} outside the reconstructed "
            f"range [{rt.grid[0]:g}, {rt.grid[-1]:g}]")


# ---------------------------------------------------------------------------
# location/scale recovery
# ---------------------------------------------------------------------------

def recover_g_sigma(h_fn: Callable, xq, model=None, samples=None,
                    kernel_config=None, tol: float = 1e-10,
                    ess_floor: float = 5.0):
    """Conditional mean and spread of h(Y) given X at query points xq.

    Oracle mode (model given): integrates h_fn along the error law through
    the model, g(x) = E[h(Y)|X=x], sigma(x) = sqrt(Var[h(Y)|X=x]).  Sample
    mode (samples + kernel_config given): kernel regression of h_fn(Y_i)
    on X_i, with the spread from the regression of squared residuals.
    """
    xq = np.atleast_2d(np.asarray(xq, dtype=float))
    if model is not None:
        gs = np.empty(xq.shape[0])
        ss = np.empty(xq.shape[0])
        law = model.error
        for j in range(xq.shape[0]):
            gx = float(model.g(xq[j:j + 1])[0])
            sx = float(model.sigma(xq[j:j + 1])[0])

            def moments(e):
                hy = np.asarray(h_fn(model.inverse(gx + sx * e)), dtype=float)
                fe = law.pdf(e)
                return np.stack([hy * fe, hy * hy * fe])

            vals, _ = quad_adaptive(moments, -law.tail, law.tail, tol=tol)
            gs[j] = vals[0]
            var = vals[1] - vals[0] ** 2
            if var <= 0:
                raise ReconstructionError(
                    f"conditional variance of h(Y) nonpositive at x = {xq[j]}")
            ss[j] = np.sqrt(var)
        return gs, ss
    if samples is None or kernel_config is None:
        raise ReconstructionError(
            "recover_g_sigma needs either an oracle model or samples with a "
            "kernel configuration")
    # sample mode: local average of h(Y) and of its square
    from .estimate import nw_mean_and_square  # late import, no cycle at load
    phi = np.asarray(h_fn(samples.y), dtype=float)
    gs, m2, ess = nw_mean_and_square(samples, kernel_config, phi, xq)
    if np.any(ess < ess_floor):
        from .errors import BandwidthError
        worst = float(ess.min())
        raise BandwidthError(
            f"effective sample size {worst:.2f} below floor {ess_floor:g} at "
            "a query point; widen bandwidth_x",
            suggested_bandwidth=float(np.max(kernel_config.bandwidth_x) * 2.0))
    var = np.maximum(m2 - gs ** 2, 0.0)
    tiny = 1e-12 * max(1.0, float(np.max(np.abs(phi))) ** 2)
    return gs, np.sqrt(np.maximum(var, tiny))
