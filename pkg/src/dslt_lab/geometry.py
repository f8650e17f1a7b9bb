"""Heat kernels and the covariance geometry of pairs of fBm increments.

Two increments ``X = B_s - B_r`` and ``Y = B_{s'} - B_{r'}`` with ``r < r'``
interleave in one of three ways.  Each ordering is parameterised by three
nonnegative gap lengths ``(a, b, c)``:

* ``D1``: ``r < r' < s < s'`` with ``a = r'-r, b = s-r', c = s'-s``
* ``D2``: ``r < r' < s' < s`` with ``a = r'-r, b = s'-r', c = s-s'``
* ``D3``: ``r < s < r' < s'`` with ``a = s-r, b = r'-s, c = s'-r'``

Everything below is written in terms of the covariances of three *adjacent*
increments of lengths ``a, b, c``.  That lets ``lam*rho - mu**2`` be evaluated
without catastrophic cancellation when the two increments are nearly
collinear (``a, c << b`` in D1/D2), which the singular limit integrals probe
down to gap ratios of 1e-100 and below.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry

__all__ = [
    "DomainCase",
    "CovarianceTriple",
    "SimplexPoint",
    "heat_kernel",
    "heat_kernel_d1",
    "adjacent_cov",
    "separated_cov",
    "signed_cov",
    "gram_det",
    "covariance_triple",
    "g_function",
    "g_signed",
    "det_sigma",
    "lower_bound",
]


class DomainCase(enum.Enum):
    D1 = 1
    D2 = 2
    D3 = 3

    @classmethod
    def coerce(cls, value) -> "DomainCase":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


CASES = (DomainCase.D1, DomainCase.D2, DomainCase.D3)


@dataclass(frozen=True)
class SimplexPoint:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0:
            raise ValueError(f"simplex coordinates must be nonnegative: {self}")


@dataclass(frozen=True)
class CovarianceTriple:
    """Variances ``lam``, ``rho`` and covariance magnitude ``mu`` of two increments.

    ``cov`` keeps the sign of the covariance (``mu == abs(cov)``) and ``det``
    is ``lam*rho - mu**2`` computed in cancellation-free form.
    """

    lam: np.ndarray | float
    rho: np.ndarray | float
    mu: np.ndarray | float
    case: DomainCase
    cov: np.ndarray | float
    det: np.ndarray | float


# --------------------------------------------------------------------------
# heat kernel


def heat_kernel(x, eps: float) -> np.ndarray:
    """Gaussian density with covariance ``eps * I`` evaluated at ``x[..., :d]``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    return (2.0 * math.pi * eps) ** (-0.5 * d) * np.exp(-r2 / (2.0 * eps))


def heat_kernel_d1(x, eps: float) -> np.ndarray:
    """First partial derivative of :func:`heat_kernel` in the first coordinate."""
    x = np.asarray(x, dtype=float)
    return -(x[..., 0] / eps) * heat_kernel(x, eps)


# --------------------------------------------------------------------------
# stable covariance building blocks

_GL_U, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_U = 0.5 * (_GL_U + 1.0)
_GL_W = 0.5 * _GL_W


def _pow(x, h2):
    return np.power(x, h2)


def _pow_diff(u, v, h2):
    """``(u+v)**h2 - u**h2`` for ``u, v >= 0`` with full relative accuracy."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        small = u**h2 * np.expm1(h2 * np.log1p(v / u))
        direct = (u + v) ** h2 - u**h2
    return np.where(v <= u, np.where(u > 0, small, 0.0), direct)


def adjacent_cov(x, y, hurst: float):
    """Covariance of adjacent increments of lengths ``x`` then ``y``."""
    h2 = 2.0 * hurst
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    big = np.maximum(x, y)
    small = np.minimum(x, y)
    return 0.5 * (_pow_diff(big, small, h2) - small**h2)


def _sep_quadrature(p, q, hurst):
    """``int_0^1 int_0^1 (1 + p u + q v)^(2H-2) dv du`` for ``0 <= p <= 1``."""
    k = 2.0 * hurst - 1.0
    c = 1.0 + p[..., None] * _GL_U
    qq = q[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = c**k * np.expm1(k * np.log1p(qq / c)) / (k * qq)
    inner = np.where(qq > 0, inner, c ** (k - 1.0))
    return inner @ _GL_W


def separated_cov(x, g, y, hurst: float):
    """Covariance of increments of lengths ``x`` and ``y`` separated by a gap ``g``.

    Equals ``((x+g+y)^{2H} + g^{2H} - (x+g)^{2H} - (g+y)^{2H}) / 2``.  When the
    gap dominates the shorter increment the value is of order ``x*y*g^{2H-2}``
    and is computed from its double-integral representation instead.
    """
    h2 = 2.0 * hurst
    x, g, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, g, y)))
    small = np.minimum(x, y)
    big = np.maximum(x, y)
    out = 0.5 * (_pow_diff(g + big, small, h2) - _pow_diff(g, small, h2))
    if hurst == 0.5:
        return np.zeros_like(out)
    mask = (small <= g) & (g > 0)
    if np.any(mask):
        gm, sm, bm = g[mask], small[mask], big[mask]
        integral = _sep_quadrature(sm / gm, bm / gm, hurst)
        out = np.array(out, copy=True)
        out[mask] = hurst * (h2 - 1.0) * sm * bm * gm ** (h2 - 2.0) * integral
    return out


def _vars_and_cov(case: DomainCase, a, b, c, hurst: float):
    h2 = 2.0 * hurst
    if case is DomainCase.D1:
        lam = _pow(a + b, h2)
        rho = _pow(b + c, h2)
        cov = _pow(b, h2) + adjacent_cov(a, b, hurst) + adjacent_cov(b, c, hurst)
        cov = cov + separated_cov(a, b, c, hurst)
    elif case is DomainCase.D2:
        lam = _pow(a + b + c, h2)
        rho = _pow(b, h2)
        cov = 0.5 * (_pow_diff(a, b, h2) + _pow_diff(c, b, h2))
    else:
        lam = _pow(a, h2)
        rho = _pow(c, h2)
        cov = separated_cov(a, b, c, hurst)
    return lam, rho, cov


def signed_cov(case, a, b, c, hurst: float):
    """Signed covariance ``E[(B_s-B_r)(B_{s'}-B_{r'})]`` for a domain case."""
    case = DomainCase.coerce(case)
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    return _vars_and_cov(case, a, b, c, hurst)[2]


def _gram_det(case, a, b, c, hurst, lam, rho, cov):
    h2 = 2.0 * hurst
    if case is DomainCase.D3:
        return lam * rho - cov * cov
    sep = separated_cov(a, b, c, hurst)
    if case is DomainCase.D2:
        # det(A+B+C, B) = det(A+C, B)
        var_ac = _pow(a, h2) + _pow(c, h2) + 2.0 * sep
        cov_ac_b = adjacent_cov(a, b, hurst) + adjacent_cov(b, c, hurst)
        return var_ac * rho - cov_ac_b * cov_ac_b
    # D1: det(A+B, B+C) = det(A+B, C-A); use it when B dominates.
    var_ca = _pow(a, h2) + _pow(c, h2) - 2.0 * sep
    cov_x_ca = adjacent_cov(a + b, c, hurst) - _pow(a, h2) - adjacent_cov(a, b, hurst)
    stable = lam * var_ca - cov_x_ca * cov_x_ca
    direct = lam * rho - cov * cov
    return np.where(b >= np.maximum(a, c), stable, direct)


def gram_det(case, a, b, c, hurst: float):
    """``lam*rho - mu**2`` for the case geometry, free of cancellation."""
    case = DomainCase.coerce(case)
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    lam, rho, cov = _vars_and_cov(case, a, b, c, hurst)
    return np.maximum(_gram_det(case, a, b, c, hurst, lam, rho, cov), 0.0)


def covariance_triple(case, a, b=None, c=None, hurst: float | None = None) -> CovarianceTriple:
    """Return ``(lam, rho, mu)`` for the given domain case at ``(a, b, c)``.

    ``a`` may also be a :class:`SimplexPoint`, in which case ``b`` is the
    Hurst index (``covariance_triple(case, point, hurst)``).
    """
    case = DomainCase.coerce(case)
    if isinstance(a, SimplexPoint):
        if hurst is None:
            hurst = b
        a, b, c = a.a, a.b, a.c
    if hurst is None or not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    lam, rho, cov = _vars_and_cov(case, a, b, c, hurst)
    det = np.maximum(_gram_det(case, a, b, c, hurst, lam, rho, cov), 0.0)
    scalar = all(np.ndim(v) == 0 for v in (a, b, c))
    conv = float if scalar else (lambda v: v)
    return CovarianceTriple(
        lam=conv(lam), rho=conv(rho), mu=conv(np.abs(cov)), case=case, cov=conv(cov), det=conv(det)
    )


# --------------------------------------------------------------------------
# the G function


def g_signed(v, u1, u2, hurst: float):
    """Signed ``E[B_{u1} (B_{v+u2} - B_v)]``."""
    h2 = 2.0 * hurst
    v, u1, u2 = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (v, u1, u2)))
    naive = 0.5 * ((v + u2) ** h2 - v**h2 - np.abs(v + u2 - u1) ** h2 + np.abs(v - u1) ** h2)
    # disjoint intervals [0, u1] and [v, v+u2]: use the separated form
    disjoint = v >= u1
    if np.any(disjoint):
        naive = np.array(naive, copy=True)
        naive[disjoint] = separated_cov(u1[disjoint], v[disjoint] - u1[disjoint], u2[disjoint], hurst)
    return naive


def g_function(v, u1, u2, hurst: float):
    """``G(v, u1, u2) = |E[B_{u1} (B_{v+u2} - B_v)]|``."""
    return np.abs(g_signed(v, u1, u2, hurst))


# --------------------------------------------------------------------------


def det_sigma(eps: float, triple: CovarianceTriple):
    """``det(eps I + Sigma) = (eps+lam)(eps+rho) - mu^2``.

    Uses the stored cancellation-free ``lam*rho - mu^2``.
    """
    value = eps * eps + eps * (np.asarray(triple.lam) + np.asarray(triple.rho)) + np.asarray(triple.det)
    if eps > 0 and np.any(value <= 0):
        raise DegenerateGeometry(f"det(eps I + Sigma) <= 0 at eps={eps}")
    return float(value) if np.ndim(value) == 0 else value


def lower_bound(case, a, b, c, hurst: float):
    """The local-nondeterminism bound expression for ``lam*rho - mu^2`` (no constant)."""
    case = DomainCase.coerce(case)
    h2 = 2.0 * hurst
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    if case is DomainCase.D1:
        return (a + b) ** h2 * c**h2 + a**h2 * (b + c) ** h2
    if case is DomainCase.D2:
        return b**h2 * (a**h2 + c**h2)
    return (a * c) ** h2
