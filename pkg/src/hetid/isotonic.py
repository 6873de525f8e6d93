"""Pool-adjacent-violators repair for noisy monotone outputs."""

from __future__ import annotations

import numpy as np


def pava_nondecreasing(values, weights=None):
    """Weighted least-squares projection onto nondecreasing sequences.

    Classic pool-adjacent-violators: scan left to right, merging adjacent
    blocks whose means are out of order.  O(n).
    """
    v = np.asarray(values, dtype=float)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("pava expects a nonempty 1-d array")
    if np.any(w <= 0):
        raise ValueError("pava weights must be positive")
    # blocks as (mean, weight, count) triples on a stack
    means = np.empty(v.size)
    wsum = np.empty(v.size)
    count = np.empty(v.size, dtype=int)
    top = -1
    for i in range(v.size):
        top += 1
        means[top], wsum[top], count[top] = v[i], w[i], 1
        while top > 0 and means[top - 1] > means[top]:
            tw = wsum[top - 1] + wsum[top]
            means[top - 1] = (means[top - 1] * wsum[top - 1]
                              + means[top] * wsum[top]) / tw
            wsum[top - 1] = tw
            count[top - 1] += count[top]
            top -= 1
    return np.repeat(means[:top + 1], count[:top + 1])


def repair_monotone(values, tol: float = 0.0):
    """Nondecreasing repair plus the fraction of entries that moved.

    `tol` ignores changes smaller than tol * max(1, |value|) when counting
    repairs, so roundoff-level adjustments do not inflate the rate.
    """
    v = np.asarray(values, dtype=float)
    fixed = pava_nondecreasing(v)
    moved = np.abs(fixed - v) > tol * np.maximum(1.0, np.abs(v))
    return fixed, float(np.count_nonzero(moved)) / v.size
