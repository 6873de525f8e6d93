"""Transformation models h(Y) = g(X) + sigma(X)*eps and their oracle CDFs.

A TransformationModel bundles the analytic components (h, g, sigma, error
law) of the data-generating process.  The conditional CDF of Y given X and
its partial derivatives in y and in each covariate coordinate are evaluated
in closed form; these are the raw ingredients from which the identification
pipeline builds everything else.

Shape conventions: covariate batches are (m, d) arrays; a 1-d array of
length d is a single point.  Response grids broadcast against covariate
batches to a (k, m) result.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .distributions import ErrorDistribution, get_error_law
from .errors import InversionError, ModelError

Array = np.ndarray


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformationModel:
    """Analytic model bundle; immutable, safe to share.

    h must be strictly increasing with derivative h_prime > 0.  g and sigma
    take covariate batches (m, d) and return (m,); their gradients return
    (m, d).  h_inverse may be None, in which case a bracketed numeric
    inverse is used.
    """

    name: str
    h: Callable[[Array], Array]
    h_prime: Callable[[Array], Array]
    g: Callable[[Array], Array]
    g_grad: Callable[[Array], Array]
    sigma: Callable[[Array], Array]
    sigma_grad: Callable[[Array], Array]
    error: ErrorDistribution
    d_x: int = 1
    h_inverse: Optional[Callable[[Array], Array]] = None
    # covariate law for simulation: uniform on this box by default
    x_lower: tuple = (0.0,)
    x_upper: tuple = (1.0,)

    def inverse(self, targets: Array) -> Array:
        if self.h_inverse is not None:
            return self.h_inverse(np.asarray(targets, dtype=float))
        return numeric_inverse(self.h, targets, h_prime=self.h_prime)


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative averaging weight v with axis-aligned box support.

    `index` is the 1-based covariate coordinate whose partial derivative
    enters the identification ratio.
    """

    v: Callable[[Array], Array]
    lower: tuple
    upper: tuple
    index: int = 1

    def __post_init__(self):
        lo, up = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.size != up.size or np.any(up <= lo):
            raise ModelError("weight support box must have positive extent")
        if not 1 <= self.index <= lo.size:
            raise ModelError(
                f"weight derivative index {self.index} outside 1..{lo.size}"
            )

    @property
    def d_x(self) -> int:
        return len(self.lower)

    def box(self):
        return np.asarray(self.lower, float), np.asarray(self.upper, float)


def uniform_weight(lower=0.0, upper=1.0, d: int = 1, index: int = 1) -> WeightFunction:
    """v identically 1 on the box [lower, upper]^d."""
    lo = tuple(float(lower) for _ in range(d))
    up = tuple(float(upper) for _ in range(d))
    return WeightFunction(v=lambda pts: np.ones(pts.shape[0]), lower=lo,
                          upper=up, index=index)


@dataclass(frozen=True)
class CoefficientPair:
    """Weighted-average coefficients of the identifying ODE."""

    A: float
    B: float

    def __iter__(self):
        return iter((self.A, self.B))


@dataclass
class SampleSet:
    """Observations (Y_i, X_i); x has shape (n, d_x)."""

    y: Array
    x: Array

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        self.x = x
        if self.x.shape[0] != self.y.size:
            raise ModelError("sample y and x lengths disagree")
        if not (np.isfinite(self.y).all() and np.isfinite(self.x).all()):
            raise ModelError("sample contains non-finite entries")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d_x(self) -> int:
        return self.x.shape[1]


# ---------------------------------------------------------------------------
# conditional CDF and partials
# ---------------------------------------------------------------------------

def _covariate_batch(x, d):
    """Normalize x to (m, d); report whether it was a single point."""
    xb = np.asarray(x, dtype=float)
    if xb.ndim == 0:
        if d != 1:
            raise ModelError(f"scalar covariate for a d_x={d} model")
        return xb.reshape(1, 1), True
    if xb.ndim == 1:
        if xb.size == d:
            return xb.reshape(1, d), True
        if d == 1:
            return xb.reshape(-1, 1), False
        raise ModelError(f"covariate vector of length {xb.size}, expected {d}")
    if xb.ndim == 2 and xb.shape[1] == d:
        return xb, False
    raise ModelError(f"covariate batch shape {xb.shape} incompatible with d_x={d}")


def _parts(model: TransformationModel, y, x):
    yarr = np.asarray(y, dtype=float)
    xb, xsingle = _covariate_batch(x, model.d_x)
    gx = np.asarray(model.g(xb), dtype=float).reshape(-1)
    sx = np.asarray(model.sigma(xb), dtype=float).reshape(-1)
    if np.any(sx <= 0.0):
        raise ModelError(f"model '{model.name}': sigma(x) <= 0 at a query point")
    hy = np.asarray(model.h(yarr), dtype=float)
    if yarr.ndim == 0:
        z = (float(hy) - gx) / sx
    else:
        z = (hy.reshape(-1, 1) - gx) / sx
    return yarr, hy, gx, sx, z, xsingle


def _shape_out(vals, yscalar, xsingle):
    if yscalar:
        return float(vals[0]) if xsingle else vals
    if xsingle:
        return vals[:, 0]
    return vals


def cond_cdf(model: TransformationModel, y, x):
    """P(Y <= y | X = x) = F_eps((h(y) - g(x)) / sigma(x))."""
    yarr, _, _, _, z, xsingle = _parts(model, y, x)
    return _shape_out(model.error.cdf(z), yarr.ndim == 0, xsingle)


def cond_cdf_dy(model: TransformationModel, y, x):
    """d/dy of the conditional CDF: f_eps(z) * h'(y) / sigma(x)."""
    yarr, _, _, sx, z, xsingle = _parts(model, y, x)
    hp = np.asarray(model.h_prime(yarr), dtype=float)
    if yarr.ndim == 0:
        vals = model.error.pdf(z) * float(hp) / sx
    else:
        vals = model.error.pdf(z) * hp.reshape(-1, 1) / sx
    return _shape_out(vals, yarr.ndim == 0, xsingle)


def cond_cdf_dxi(model: TransformationModel, y, x, i: int = 1):
    """d/dx_i of the conditional CDF at coordinate i (1-based).

    Equals -f_eps(z) * (sigma * dg/dx_i + (h(y) - g) * dsigma/dx_i) / sigma^2
    with z = (h(y) - g(x)) / sigma(x).
    """
    if not 1 <= i <= model.d_x:
        raise ModelError(f"coordinate index {i} outside 1..{model.d_x}")
    yarr, _, _, sx, z, xsingle = _parts(model, y, x)
    xb, _ = _covariate_batch(x, model.d_x)
    gi = np.asarray(model.g_grad(xb), dtype=float).reshape(-1, model.d_x)[:, i - 1]
    si = np.asarray(model.sigma_grad(xb), dtype=float).reshape(-1, model.d_x)[:, i - 1]
    # h(y) - g(x) = z * sigma(x), so the bracket is sigma*(gi + z*si)
    vals = -model.error.pdf(z) * (gi + z * si) / sx
    return _shape_out(vals, yarr.ndim == 0, xsingle)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate(model: TransformationModel, n: int, rng_seed) -> SampleSet:
    """Draw n rows (Y_i, X_i): X uniform on the model's covariate box,
    eps from the error law via its quantile, Y = h^{-1}(g(X) + sigma(X)eps).

    Deterministic given rng_seed (int or SeedSequence).
    """
    if n < 1:
        raise ModelError(f"sample size must be >= 1, got {n}")
    model.error.validate()
    rng = np.random.default_rng(rng_seed)
    lo = np.asarray(model.x_lower, dtype=float)
    up = np.asarray(model.x_upper, dtype=float)
    x = rng.uniform(lo, up, size=(n, model.d_x))
    u = np.clip(rng.random(n), 1e-16, 1.0 - 1e-16)
    eps = model.error.ppf(u)
    targets = model.g(x) + model.sigma(x) * eps
    y = model.inverse(targets)
    return SampleSet(y=y, x=x)


def numeric_inverse(h, targets, h_prime=None, bracket=(-1.0, 1.0),
                    max_doublings: int = 200):
    """Vectorized inverse of a strictly increasing h.

    Grows the bracket geometrically until it contains every target, runs
    bisection to near machine precision, then one Newton polish step when
    the derivative is available.
    """
    t = np.asarray(targets, dtype=float)
    flat = t.reshape(-1)
    lo = np.full(flat.shape, float(bracket[0]))
    hi = np.full(flat.shape, float(bracket[1]))
    span = hi - lo
    for _ in range(max_doublings):
        bad_lo = np.asarray(h(lo)) > flat
        bad_hi = np.asarray(h(hi)) < flat
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo - span, lo)
        hi = np.where(bad_hi, hi + span, hi)
        span = 2.0 * span
    else:
        worst = flat[np.argmax(np.abs(flat))]
        raise InversionError(
            f"inverse bracket failed to contain target {worst!r}", value=float(worst)
        )
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = np.asarray(h(mid)) <= flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    y = 0.5 * (lo + hi)
    if h_prime is not None:
        hp = np.asarray(h_prime(y), dtype=float)
        safe = hp > 0
        y = np.where(safe, y - (np.asarray(h(y)) - flat) / np.where(safe, hp, 1.0), y)
    if not np.isfinite(y).all():
        bad = flat[~np.isfinite(y)][0]
        raise InversionError(f"inverse diverged at target {bad!r}", value=float(bad))
    return y.reshape(t.shape) if t.ndim else float(y[0])


# ---------------------------------------------------------------------------
# affine relabeling (the non-identified direction)
# ---------------------------------------------------------------------------

def affine_transform(model: TransformationModel, a: float, b: float) -> TransformationModel:
    """The observationally equivalent model (a*h + b, a*g + b, a*sigma), a > 0.

    Leaves the conditional CDF of Y given X unchanged pointwise.
    """
    if a <= 0:
        raise ModelError(f"affine slope must be positive, got {a}")
    base_h, base_hp, base_g = model.h, model.h_prime, model.g
    base_gg, base_s, base_sg = model.g_grad, model.sigma, model.sigma_grad
    inv = model.h_inverse
    new_inv = None
    if inv is not None:
        new_inv = lambda t: inv((np.asarray(t, dtype=float) - b) / a)
    return replace(
        model,
        name=f"{model.name}+affine({a:g},{b:g})",
        h=lambda y: a * np.asarray(base_h(y), dtype=float) + b,
        h_prime=lambda y: a * np.asarray(base_hp(y), dtype=float),
        g=lambda x: a * np.asarray(base_g(x), dtype=float) + b,
        g_grad=lambda x: a * np.asarray(base_gg(x), dtype=float),
        sigma=lambda x: a * np.asarray(base_s(x), dtype=float),
        sigma_grad=lambda x: a * np.asarray(base_sg(x), dtype=float),
        h_inverse=new_inv,
    )


# ---------------------------------------------------------------------------
# registered fixtures
# ---------------------------------------------------------------------------
#
# M1: h identity, g(x) = x, sigma(x) = e^x          (A = 1/2, B = 1)
# M2: M1 with sigma constant 1                      (homoscedastic, B = 0)
# M3: h = sinh, otherwise M1                        (A = 1/2, B = 1)
# M4: h identity, g(x) = x, sigma(x) = e^{-x}       (A = 3/2, B = -1)

def _ident(y):
    return np.asarray(y, dtype=float)


def _ones_like_col(x):
    return np.ones(np.asarray(x).shape[0])


def _make_m1(error="normal"):
    return TransformationModel(
        name="M1", h=_ident, h_prime=lambda y: np.ones_like(np.asarray(y, dtype=float)),
        h_inverse=_ident,
        g=lambda x: x[:, 0], g_grad=lambda x: np.ones_like(x),
        sigma=lambda x: np.exp(x[:, 0]),
        sigma_grad=lambda x: np.exp(x[:, 0:1]) * np.ones_like(x),
        error=get_error_law(error),
    )


def _make_m2(error="normal"):
    return replace(
        _make_m1(error), name="M2",
        sigma=_ones_like_col, sigma_grad=lambda x: np.zeros_like(x),
    )


def _make_m3(error="normal"):
    return replace(
        _make_m1(error), name="M3",
        h=lambda y: np.sinh(np.asarray(y, dtype=float)),
        h_prime=lambda y: np.cosh(np.asarray(y, dtype=float)),
        h_inverse=lambda t: np.arcsinh(np.asarray(t, dtype=float)),
    )


def _make_m4(error="normal"):
    return replace(
        _make_m1(error), name="M4",
        sigma=lambda x: np.exp(-x[:, 0]),
        sigma_grad=lambda x: -np.exp(-x[:, 0:1]) * np.ones_like(x),
    )


MODELS = {"M1": _make_m1, "M2": _make_m2, "M3": _make_m3, "M4": _make_m4}


def make_model(name: str, error: str = "normal") -> TransformationModel:
    try:
        factory = MODELS[name]
    except KeyError:
        known = ", ".join(sorted(MODELS))
        raise ModelError(f"unknown model '{name}' (have: {known})") from None
    return factory(error)
