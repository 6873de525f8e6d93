"""Error laws for the transformation model.

Every distribution here is centered, has unit variance, and a density that
is continuous and strictly positive on the whole line.  Those properties
are load-bearing: the identification argument divides by the conditional
density, so laws with bounded support are deliberately not offered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ModelError
from .quadrature import quad_adaptive

# logistic scale that makes the variance exactly 1
_LOGISTIC_S = np.sqrt(3.0) / np.pi


@dataclass(frozen=True)
class ErrorDistribution:
    """Centered unit-variance error law.

    pdf/cdf/ppf are vectorized callables.  `tail` is the half-width of the
    interval outside which the density mass is negligible at validation
    tolerance; moment checks integrate over [-tail, tail].
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]
    mean: float = 0.0
    variance: float = 1.0
    tail: float = 12.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(rng.uniform(size=n))

    def validate(self, tol: float = 1e-8) -> None:
        """Check mass/mean/variance by quadrature; raise ModelError on failure."""
        if self.mean != 0.0 or self.variance != 1.0:
            raise ModelError(
                f"error law '{self.name}' must be centered with unit variance "
                f"(declared mean={self.mean}, variance={self.variance})"
            )

        def moments(t):
            f = self.pdf(t)
            return np.stack([f, t * f, t * t * f])

        vals, _ = quad_adaptive(moments, -self.tail, self.tail, tol=0.1 * tol)
        mass, mu, m2 = vals
        if abs(mass - 1.0) > tol:
            raise ModelError(
                f"density of '{self.name}' integrates to {mass!r}, not 1"
            )
        if abs(mu) > tol:
            raise ModelError(f"error law '{self.name}' has mean {mu!r} != 0")
        var = m2 - mu * mu
        if abs(var - 1.0) > tol:
            raise ModelError(f"error law '{self.name}' has variance {var!r} != 1")


# ---------------------------------------------------------------------------
# built-in laws
# ---------------------------------------------------------------------------

def _normal_pdf(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)


def _logistic_pdf(t):
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t) / _LOGISTIC_S)
    return e / (_LOGISTIC_S * (1.0 + e) ** 2)


def _logistic_cdf(t):
    return special.expit(np.asarray(t, dtype=float) / _LOGISTIC_S)


def _logistic_ppf(p):
    p = np.asarray(p, dtype=float)
    return _LOGISTIC_S * (np.log(p) - np.log1p(-p))


STANDARD_NORMAL = ErrorDistribution(
    name="normal",
    pdf=_normal_pdf,
    cdf=lambda t: special.ndtr(np.asarray(t, dtype=float)),
    ppf=lambda p: special.ndtri(np.asarray(p, dtype=float)),
    tail=12.0,
)

# scaled so Var = (s*pi)^2/3 = 1; heavier tails than the normal need a wider
# validation window
UNIT_LOGISTIC = ErrorDistribution(
    name="logistic",
    pdf=_logistic_pdf,
    cdf=_logistic_cdf,
    ppf=_logistic_ppf,
    tail=30.0,
)

ERROR_LAWS = {d.name: d for d in (STANDARD_NORMAL, UNIT_LOGISTIC)}


def get_error_law(name: str) -> ErrorDistribution:
    try:
        return ERROR_LAWS[name]
    except KeyError:
        known = ", ".join(sorted(ERROR_LAWS))
        raise ModelError(f"unknown error law '{name}' (have: {known})") from None
