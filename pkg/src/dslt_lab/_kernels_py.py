"""Pure numpy implementation of the estimator pair sum (fallback)."""

import math

import numpy as np

__all__ = ["pair_row_sums", "pair_sum"]

_BLOCK = 1 << 22  # pair evaluations per vectorised block


def pair_row_sums(xt, eps):
    """Row sums ``sum_{j<i} (x_i - x_j)_1 exp(-|x_i - x_j|^2 / (2 eps))``.

    ``xt`` holds the path component-major, shape ``(d, n+1)``.
    """
    xt = np.ascontiguousarray(xt, dtype=float)
    n1 = xt.shape[1]
    inv2eps = 0.5 / eps
    rows = np.zeros(n1)
    i = 1
    while i < n1:
        # a block of consecutive rows against all earlier columns
        span = max(1, min(n1 - i, _BLOCK // i))
        ii = np.arange(i, i + span)
        jj = np.arange(i + span - 1)
        diff = xt[:, ii, None] - xt[:, None, jj]
        r2 = np.einsum("kij,kij->ij", diff, diff)
        terms = diff[0] * np.exp(-r2 * inv2eps)
        terms[jj[None, :] >= ii[:, None]] = 0.0
        rows[ii] = terms.sum(axis=1)
        i += span
    return rows


def pair_sum(xt, eps):
    """Compensated total of :func:`pair_row_sums`."""
    return math.fsum(pair_row_sums(xt, eps))
