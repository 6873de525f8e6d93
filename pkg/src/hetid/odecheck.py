"""Numeric cross-checks of the identifying ODE: fixed-step integration,
uniqueness probes, and integral-inequality (Gronwall) verification.

The closed-form reconstruction is quadrature + exponential; a classical
4th-order one-step integrator has a completely different error structure,
so agreement between the two validates both.  The inequality suite checks
that a hypothesis u <= v + int q*u always propagates to the explicit bound
u <= v + int v*q*exp(int q) — a discretized no-counterexample search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigError, DomainExitError

HOLDS = "hypothesis-holds-and-conclusion-holds"
HYPOTHESIS_FAILS = "hypothesis-fails"
CONCLUSION_VIOLATED = "conclusion-violated"


# ---------------------------------------------------------------------------
# initial value problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IvpSpec:
    """h'(y) = rhs(y, h) on [a, b], h(a) = theta0 > 0, solution kept in
    the positive half-line."""

    rhs: Callable[[float, float], float]
    a: float
    b: float
    theta0: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigError(f"interval [{self.a:g}, {self.b:g}] is empty")
        if not self.theta0 > 0:
            raise ConfigError(f"initial value must be positive, "
                              f"got {self.theta0:g}")

    def validate(self) -> None:
        """Spot-check the right-hand side for non-finite values."""
        for y in np.linspace(self.a, self.b, 7):
            for h in self.theta0 * np.array([0.25, 1.0, 4.0]):
                if not np.isfinite(self.rhs(float(y), float(h))):
                    raise DomainExitError(
                        f"right-hand side non-finite at (y={y:g}, h={h:g})")


def integrate_ivp(spec: IvpSpec, n_steps: int = 256):
    """Classical 4th-order one-step integration on a uniform grid.

    Returns (grid, values).  Raises DomainExitError if the trajectory
    touches the nonpositive half-line or the right-hand side turns
    non-finite — a pole inside the interval is reported, never silently
    integrated across.
    """
    if n_steps < 16:
        raise ConfigError(f"need at least 16 steps, got {n_steps}")
    ys = np.linspace(spec.a, spec.b, n_steps + 1)
    step = (spec.b - spec.a) / n_steps
    vals = np.empty(n_steps + 1)
    vals[0] = spec.theta0
    rhs = spec.rhs
    for k in range(n_steps):
        y, w = ys[k], vals[k]
        k1 = rhs(y, w)
        k2 = rhs(y + 0.5 * step, w + 0.5 * step * k1)
        k3 = rhs(y + 0.5 * step, w + 0.5 * step * k2)
        k4 = rhs(y + step, w + step * k3)
        if not np.isfinite(k1 + k2 + k3 + k4):
            raise DomainExitError(
                f"right-hand side non-finite near y = {y:g} (pole inside "
                "the integration interval?)")
        w_next = w + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not w_next > 0:
            raise DomainExitError(
                f"trajectory left the positive half-line at y = {ys[k + 1]:g}")
        vals[k + 1] = w_next
    return ys, vals


def uniqueness_probe(spec: IvpSpec, n_steps: int = 512,
                     threshold: float = 1e-6) -> dict:
    """Same IVP three ways: N steps, 2N steps, and a midpoint restart.

    A well-posed (locally Lipschitz) problem makes all three agree to the
    integrator's accuracy; large deviations flag stiffness or a
    near-singular right-hand side.  Returns a report dict with the maximum
    pairwise deviation and a `consistent` flag against `threshold`.
    """
    if n_steps % 2:
        n_steps += 1
    ys1, v1 = integrate_ivp(spec, n_steps)
    _, v2 = integrate_ivp(spec, 2 * n_steps)
    halving_dev = float(np.max(np.abs(v1 - v2[::2])))

    mid = 0.5 * (spec.a + spec.b)
    _, first = integrate_ivp(
        IvpSpec(spec.rhs, spec.a, mid, spec.theta0), n_steps // 2)
    _, second = integrate_ivp(
        IvpSpec(spec.rhs, mid, spec.b, float(first[-1])), n_steps // 2)
    restart_dev = float(np.max(np.abs(second - v1[n_steps // 2:])))

    max_dev = max(halving_dev, restart_dev)
    return {
        "halving_deviation": halving_dev,
        "restart_deviation": restart_dev,
        "max_deviation": max_dev,
        "threshold": threshold,
        "consistent": max_dev <= threshold,
    }


# ---------------------------------------------------------------------------
# integral inequality checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallInstance:
    """Functions (u, v, q) on [a, b]; q must be nonnegative."""

    a: float
    b: float
    u: Callable
    v: Callable
    q: Callable


def gronwall_check(inst: GronwallInstance, resolution: int = 256,
                   slack: float = 1e-9, conclusion_slack: float = None,
                   return_margins: bool = False):
    """Trapezoid verification of the inequality propagation.

    Hypothesis: u(y) <= v(y) + int_a^y q u, pointwise on the grid (up to
    `slack`).  If it holds, the conclusion u(y) <= v(y) +
    int_a^y v(z) q(z) exp(int_z^y q) dz must too; a violation beyond
    `conclusion_slack` is the failure signal.  Returns the verdict string,
    or (verdict, (hyp_margin, concl_margin)) with return_margins, margins
    being the largest left-minus-right gaps (positive = broken).
    """
    if resolution < 64:
        raise ConfigError(f"grid resolution {resolution} below 64")
    if conclusion_slack is None:
        conclusion_slack = slack
    ys = np.linspace(inst.a, inst.b, resolution)
    uu = np.asarray(inst.u(ys), dtype=float)
    vv = np.asarray(inst.v(ys), dtype=float)
    qq = np.asarray(inst.q(ys), dtype=float)
    for name, arr in (("u", uu), ("v", vv), ("q", qq)):
        if arr.shape != ys.shape or not np.isfinite(arr).all():
            raise ConfigError(f"function {name} produced bad values")
    if np.any(qq < 0):
        raise ConfigError("q must be nonnegative")

    t_qu = cumulative_trapezoid(qq * uu, ys, initial=0.0)
    hyp_margin = float(np.max(uu - vv - t_qu))

    big_q = cumulative_trapezoid(qq, ys, initial=0.0)
    bound = vv + np.exp(big_q) * cumulative_trapezoid(
        vv * qq * np.exp(-big_q), ys, initial=0.0)
    concl_margin = float(np.max(uu - bound))

    if hyp_margin > slack:
        verdict = HYPOTHESIS_FAILS
    elif concl_margin > conclusion_slack:
        verdict = CONCLUSION_VIOLATED
    else:
        verdict = HOLDS
    if return_margins:
        return verdict, (hyp_margin, concl_margin)
    return verdict


def _random_instance(rng: np.random.Generator,
                     resolution: int) -> GronwallInstance:
    """One randomized instance whose hypothesis holds by construction.

    v is a random polynomial, q the absolute value of one (plus an offset).
    u starts from the discrete solution u* of u = v + int q*u — the
    extremal case — and is pushed down by c*exp(int q) with c >= 0.05,
    which keeps the hypothesis true with margin c uniformly: the
    perturbation satisfies int q*delta = delta - c exactly.
    """
    a, b = 0.0, 1.0
    vpoly = np.polynomial.Polynomial(rng.uniform(-2.0, 2.0, size=5))
    qpoly = np.polynomial.Polynomial(rng.uniform(-0.5, 0.5, size=4))
    c = rng.uniform(0.05, 1.05)

    ys = np.linspace(a, b, resolution)
    step = ys[1] - ys[0]
    vv = vpoly(ys)
    qq = np.abs(qpoly(ys)) + 0.1

    # forward substitution for the trapezoidal Volterra equation
    ustar = np.empty(resolution)
    ustar[0] = vv[0]
    acc = 0.0
    for i in range(1, resolution):
        rhs = vv[i] + acc + 0.5 * step * qq[i - 1] * ustar[i - 1]
        ustar[i] = rhs / (1.0 - 0.5 * step * qq[i])
        acc += 0.5 * step * (qq[i - 1] * ustar[i - 1] + qq[i] * ustar[i])

    big_q = cumulative_trapezoid(qq, ys, initial=0.0)
    uu = ustar - c * np.exp(big_q)

    return GronwallInstance(
        a=a, b=b,
        u=lambda t, ys=ys, uu=uu: np.interp(t, ys, uu),
        v=vpoly,
        q=lambda t, p=qpoly: np.abs(p(t)) + 0.1,
    )


def random_gronwall_suite(n_instances: int = 1000, seed: int = 411013,
                          resolution: int = 256, slack: float = 1e-9) -> dict:
    """Run `n_instances` seeded randomized checks; count the verdicts.

    Every instance holds by construction, so any conclusion violation
    beyond the slack is a genuine failure; the report lists offending
    instance indices and the worst conclusion margin seen.
    """
    root = np.random.SeedSequence(seed)
    counts = {HOLDS: 0, HYPOTHESIS_FAILS: 0, CONCLUSION_VIOLATED: 0}
    violating = []
    worst_concl = -np.inf
    for k, child in enumerate(root.spawn(n_instances)):
        inst = _random_instance(np.random.default_rng(child), resolution)
        verdict, (hyp_m, concl_m) = gronwall_check(
            inst, resolution=resolution, slack=slack, return_margins=True)
        counts[verdict] += 1
        worst_concl = max(worst_concl, concl_m)
        if verdict == CONCLUSION_VIOLATED:
            violating.append(k)
    return {
        "instances": n_instances,
        "counts": counts,
        "violating_indices": violating,
        "worst_conclusion_margin": float(worst_concl),
        "resolution": resolution,
        "slack": slack,
        "seed": seed,
    }
