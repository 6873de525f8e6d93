"""End-to-end verification: closed-form reconstruction vs. a one-step
integrator, plus the randomized integral-inequality suite.

The transform solves  h'(y) = -(A + B h(y)) / lam(y)  away from the root
of lam.  The positive quantity w = |A + B h| obeys  w' = -B w / lam  on
either branch and vanishes only at the root, so the generic positive-
trajectory integrator applies directly and exits loudly if a step would
cross the root.  Agreement of the two routes (quadrature + exponential
vs. Runge-Kutta) validates both implementations.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .lamfield import coefficients_AB, find_y0, integrate_lambda, oracle_partials
from .models import make_model, uniform_weight
from .odecheck import IvpSpec, integrate_ivp, random_gronwall_suite, uniqueness_probe
from .reconstruct import ConstraintSet, reconstruct_global

RK4_STEPS = 4096


def _ivp_w(lam, B, y_from, y_to, w_from, n_steps=RK4_STEPS):
    """Integrate w' = -B w / lam from y_from to y_to (either direction).

    Returns (ys, ws) with ys increasing.  Downward runs are folded onto a
    forward time axis so the same integrator serves both directions.
    """
    if np.isclose(y_to, y_from):
        return np.array([y_from]), np.array([w_from])
    if y_to > y_from:
        spec = IvpSpec(lambda y, w: -B * w / lam(y), y_from, y_to, w_from)
        return integrate_ivp(spec, n_steps)
    span = y_from - y_to
    spec = IvpSpec(lambda t, w: B * w / lam(y_from - t), 0.0, span, w_from)
    ts, ws = integrate_ivp(spec, n_steps)
    return (y_from - ts)[::-1], ws[::-1]


def _branch_rk4(lam, A, B, anchor_y, anchor_h, targets, n_steps=RK4_STEPS):
    """Transform values at `targets` (sorted, one side of the root) by
    Runge-Kutta branch integration from the anchor."""
    w0 = A + B * anchor_h
    sgn = 1.0 if w0 > 0 else -1.0
    w0 = abs(w0)
    pieces_y, pieces_w = [np.array([anchor_y])], [np.array([w0])]
    hi = targets[-1]
    lo = targets[0]
    if hi > anchor_y:
        ys, ws = _ivp_w(lam, B, anchor_y, hi, w0, n_steps)
        pieces_y.append(ys[1:])
        pieces_w.append(ws[1:])
    if lo < anchor_y:
        ys, ws = _ivp_w(lam, B, anchor_y, lo, w0, n_steps)
        pieces_y.insert(0, ys[:-1])
        pieces_w.insert(0, ws[:-1])
    ys = np.concatenate(pieces_y)
    ws = np.concatenate(pieces_w)
    w_at = PchipInterpolator(ys, ws)(targets)
    return (sgn * w_at - A) / B


def crosscheck_reconstruction(model_name: str = "M1", lo: float = -1.5,
                              hi: float = 0.5, grid_points: int = 401,
                              y1: float = 0.0, alpha: float = 0.0,
                              n_steps: int = RK4_STEPS,
                              dense_points: int = 4097) -> dict:
    """Reconstruct one oracle model twice — closed form and Runge-Kutta —
    and report the sup-norm gap over non-interpolated grid points.

    Both routes share a single densely tabulated lambda curve so the gap
    isolates the integration method, not the quadrature behind lambda.
    """
    model = make_model(model_name)
    weight = uniform_weight(d=model.d_x)
    A, B = coefficients_AB(model, weight, tol=1e-12)

    partials = oracle_partials(model)
    dense = np.linspace(lo, hi, dense_points)
    lam_dense = integrate_lambda(partials, weight, dense, tol=1e-11)
    lam = PchipInterpolator(dense, lam_dense)

    y0 = find_y0(lam, lo, hi)
    grid = np.linspace(lo, hi, grid_points)
    rt = reconstruct_global(lam, A, B, ConstraintSet.canonical(y1, alpha),
                            grid, y0=y0)

    solid = ~rt.interpolated
    up_mask = solid & (grid > y0)
    dn_mask = solid & (grid < y0)
    gap = 0.0
    if up_mask.any():
        vals = _branch_rk4(lam, A, B, y1, alpha, grid[up_mask], n_steps)
        gap = max(gap, float(np.max(np.abs(vals - rt.values[up_mask]))))
    if dn_mask.any():
        y2 = rt.meta["y2"]
        vals = _branch_rk4(lam, A, B, y2, rt.alpha2, grid[dn_mask], n_steps)
        gap = max(gap, float(np.max(np.abs(vals - rt.values[dn_mask]))))

    probe = uniqueness_probe(
        IvpSpec(lambda y, w: -B * w / lam(y), y1, hi, abs(A + B * alpha)),
        n_steps=512)

    return {
        "model": model_name,
        "A": float(A),
        "B": float(B),
        "y0": float(y0),
        "alpha2": float(rt.alpha2),
        "sup_gap": gap,
        "solid_points": int(solid.sum()),
        "rk4_steps": n_steps,
        "uniqueness": probe,
    }


def full_verification(models=("M1", "M3"), gronwall_instances: int = 1000,
                      seed: int = 411013, gap_tol: float = 5e-6,
                      progress=None) -> dict:
    """CLI `verify` payload: inequality suite + per-model cross-checks."""
    suite = random_gronwall_suite(n_instances=gronwall_instances, seed=seed)
    if progress is not None:
        progress(f"inequality suite: {suite['counts']}")
    checks = {}
    for name in models:
        checks[name] = crosscheck_reconstruction(name)
        if progress is not None:
            progress(f"{name}: sup gap {checks[name]['sup_gap']:.3e}")
    suite_ok = (suite["counts"]["conclusion-violated"] == 0
                and suite["counts"]["hypothesis-fails"] == 0)
    gaps_ok = all(c["sup_gap"] < gap_tol for c in checks.values())
    probes_ok = all(c["uniqueness"]["consistent"] for c in checks.values())
    return {
        "gronwall": suite,
        "crosschecks": checks,
        "gap_tolerance": gap_tol,
        "overall_pass": bool(suite_ok and gaps_ok and probes_ok),
    }
