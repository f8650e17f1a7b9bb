"""Limiting variance constants, per-chaos variances and chaos combinatorics.

All four-fold time integrals over ``{0 < r < s < t, 0 < r' < s' < t, r < r'}``
are reduced by integrating out ``r``: for each interleaving (``D1``-``D3``)
the remaining gap coordinates ``(a, b, c)`` range over ``a + b + c <= t`` with
weight ``t - a - b - c``.  The tetrahedron is parameterised as

    a = t U s w,   b = t U s (1 - w),   c = t U (1 - s)

with Jacobian ``t**3 U**2 s`` and weight ``t (1 - U)``.

Sign convention
---------------
The exact second moment involves the *signed* covariance of the two
increments.  It is negative on ``D3`` (and on parts of ``D1``) when
``H < 1/2``.  Every function below uses the signed covariance by default;
``absolute_mu=True`` substitutes its magnitude ``mu`` throughout, which gives
the upper-bound integrals built from ``mu`` alone.  The two agree for
``H >= 1/2``, where the covariance is nonnegative.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize, special

from .errors import NotConverged, OutOfRegime
from .geometry import CASES, covariance_triple, g_signed
from .quadrature import (
    QuadratureResult,
    QuadratureSpec,
    Transform,
    integrate_1d,
    integrate_tensor,
)

__all__ = [
    "Regime",
    "RegimeParams",
    "ChaosIndex",
    "critical_hurst",
    "resolve_regime",
    "sigma_squared_closed_form",
    "sigma_squared_limit",
    "sigma_squared_integral_form",
    "chaos_alpha_coefficient",
    "odd_chaos_combinatorial_sum",
    "generalized_binomial",
    "chaos_coefficient",
    "chaos_variance_at_eps",
    "chaos_variances_at_eps",
    "total_variance_at_eps",
    "hat_sigma_squared",
    "hat_sigma_m",
    "hat_sigma_ms",
    "bar_sigma_squared",
    "bar_sigma_m",
    "bar_sigma_ms",
    "zeta_covariance",
    "TETRA_SPEC",
    "OCTANT_SPEC",
    "SIMPLEX_SPEC",
]

CRITICAL_TOL = 1e-12

# Default rules.  tanh-sinh clusters nodes double-exponentially at every
# edge, which absorbs the algebraic edge/corner singularities of these
# integrands without knowing their exponents.
TETRA_SPEC = QuadratureSpec(rule="tanh_sinh", base_level=2, max_level=6, rel_tol=1e-8, t_max=3.5)
# The octant is integrated in (b, a+c, a/(a+c)).  The integrand's slow tail
# runs along the b axis at bounded a, c, decaying only like b^{-1-delta} with
# delta -> 0 at the threshold (delta = 0.1 at H = 0.45, d = 3); the
# double-exponential map on [0, inf) needs t_max ~ 5 to reach b ~ e^200.
OCTANT_SPEC = QuadratureSpec(
    rule="tanh_sinh",
    base_level=2,
    max_level=5,
    rel_tol=1e-7,
    abs_tol=1e-8,  # the first-order chaos term cancels to zero across the cases
    t_max=5.0,
    transform=(Transform("algebraic_decay", 1.0), Transform("algebraic_decay", 1.0), Transform()),
)
SIMPLEX_SPEC = QuadratureSpec(rule="tanh_sinh", base_level=3, max_level=8, rel_tol=1e-9, t_max=5.0)
LINE_SPEC = QuadratureSpec(rule="tanh_sinh", base_level=3, max_level=9, rel_tol=1e-11, t_max=5.0)


# --------------------------------------------------------------------------
# regimes


class Regime(enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"


def critical_hurst(dim: int) -> float:
    """Existence threshold ``3 / (2 (1 + d))``."""
    return 3.0 / (2.0 * (1.0 + dim))


def resolve_regime(hurst: float, dim: int) -> Regime:
    """Classify ``(H, d)``; raises :class:`OutOfRegime` outside all three regimes."""
    hc = critical_hurst(dim)
    if hurst > 0.5 and dim >= 2:
        return Regime.SUPERCRITICAL
    if dim >= 3 and abs(hurst - hc) <= CRITICAL_TOL:
        return Regime.CRITICAL
    if dim >= 3 and hc < hurst < 0.5:
        return Regime.SUBCRITICAL
    raise OutOfRegime(f"(H={hurst}, d={dim}) lies in none of the limit regimes")


@dataclass(frozen=True)
class RegimeParams:
    hurst: float
    dim: int
    horizon: float = 1.0
    regime: Regime | str = "auto"

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise OutOfRegime(f"hurst must lie in (0, 1), got {self.hurst}")
        if self.dim < 2:
            raise OutOfRegime(f"dim must be >= 2, got {self.dim}")
        if not self.horizon > 0:
            raise OutOfRegime(f"horizon must be positive, got {self.horizon}")
        actual = resolve_regime(self.hurst, self.dim)
        if self.regime == "auto" or self.regime is None:
            object.__setattr__(self, "regime", actual)
            return
        wanted = Regime(self.regime) if isinstance(self.regime, str) else self.regime
        if wanted is not actual:
            raise OutOfRegime(f"(H={self.hurst}, d={self.dim}) is {actual.value}, not {wanted.value}")
        object.__setattr__(self, "regime", wanted)


# --------------------------------------------------------------------------
# combinatorics


@dataclass(frozen=True)
class ChaosIndex:
    """Chaos order ``2m - 1`` with per-component half-counts ``(m_1, ..., m_d)``.

    Component 1 occurs ``2 m_1 - 1`` times in the multi-index and component
    ``k >= 2`` occurs ``2 m_k`` times.
    """

    m: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("chaos index m must be >= 1")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @classmethod
    def from_multi_index(cls, indices, dim: int) -> "ChaosIndex | None":
        """Build from a multi-index ``(i_1, ..., i_n)`` with entries in ``1..d``.

        Returns None when ``n`` is even or the parity pattern (odd count of
        component 1, even counts elsewhere) fails.
        """
        n = len(indices)
        if n % 2 == 0:
            return None
        occ = [0] * dim
        for i in indices:
            if not 1 <= i <= dim:
                raise ValueError(f"multi-index entry {i} outside 1..{dim}")
            occ[i - 1] += 1
        if occ[0] % 2 == 0 or any(c % 2 for c in occ[1:]):
            return None
        return cls((n + 1) // 2, ((occ[0] + 1) // 2, *(c // 2 for c in occ[1:])))


def chaos_alpha_coefficient(idx) -> Fraction:
    """``prod (2 m_j)! / (prod m_j! * 2**m)``, or 0 when parity fails.

    ``idx`` is a :class:`ChaosIndex` or ``None`` (a multi-index rejected by
    :meth:`ChaosIndex.from_multi_index`).
    """
    if idx is None:
        return Fraction(0)
    if sum(idx.counts) != idx.m or idx.counts[0] < 1:
        return Fraction(0)
    num = math.prod(math.factorial(2 * c) for c in idx.counts)
    den = math.prod(math.factorial(c) for c in idx.counts) * 2**idx.m
    return Fraction(num, den)


def generalized_binomial(m: int, d: int) -> Fraction:
    """``C(m + d/2 - 1, m) = (d/2)(d/2 + 1)...(d/2 + m - 1) / m!`` (exact)."""
    if m < 0 or d < 1:
        raise ValueError("need m >= 0 and d >= 1")
    half = Fraction(d, 2)
    out = Fraction(1)
    for j in range(m):
        out *= half + j
    return out / math.factorial(m)


def _compositions(m: int, d: int):
    """All ``(m_1, ..., m_d)`` of nonnegative integers summing to ``m``."""
    for cuts in itertools.combinations(range(m + d - 1), d - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(m + d - 2 - prev)
        yield tuple(parts)


def odd_chaos_combinatorial_sum(m: int, d: int) -> tuple[Fraction, Fraction]:
    """Brute-force composition sum and its closed form, both exact.

    Brute force: ``sum_{m_1+...+m_d=m, m_1>=1} m_1 prod (2m_j)! / prod (m_j!)^2``.
    Closed form: ``(m/d) C(m+d/2-1, m) 4**m``.
    """
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    brute = 0
    for parts in _compositions(m, d):
        if parts[0] < 1:
            continue
        term = parts[0]
        for p in parts:
            term *= math.comb(2 * p, p)
        brute += term
    closed = Fraction(m, d) * generalized_binomial(m, d) * 4**m
    return Fraction(brute), closed


def chaos_coefficient(m: int, d: int) -> float:
    """Prefactor ``4m / ((2 pi)^d d) * C(m + d/2 - 1, m)`` of the chaos L2 formula."""
    return 4.0 * m / ((2.0 * math.pi) ** d * d) * float(generalized_binomial(m, d))


def _chaos_coefficients(m_max: int, d: int) -> np.ndarray:
    return np.array([chaos_coefficient(m, d) for m in range(1, m_max + 1)])


# --------------------------------------------------------------------------
# sigma^2 (supercritical)


def _require_supercritical(hurst, dim):
    if not (hurst > 0.5 and dim >= 2 and hurst < 1.0):
        raise OutOfRegime(f"needs 1/2 < H < 1 and d >= 2, got H={hurst}, d={dim}")


def sigma_squared_closed_form(hurst: float, dim: int, horizon: float = 1.0) -> float:
    """``t^{2H} / (2^{d+2} pi^d) * B(1/H, d/2 + 1 - 1/H)^2``.

    The integral it is meant to evaluate (see
    :func:`sigma_squared_integral_form`) is larger by exactly ``1/H^2``; use
    :func:`sigma_squared_limit` for the value the normalised variance actually
    converges to.
    """
    _require_supercritical(hurst, dim)
    if not horizon > 0:
        raise OutOfRegime("horizon must be positive")
    beta = special.beta(1.0 / hurst, dim / 2.0 + 1.0 - 1.0 / hurst)
    return horizon ** (2 * hurst) / (2.0 ** (dim + 2) * math.pi**dim) * beta**2


def sigma_squared_limit(hurst: float, dim: int, horizon: float = 1.0) -> float:
    """Closed form of the limiting integral: ``sigma_squared_closed_form / H^2``.

    ``int_0^inf x (1 + x^{2H})^{-d/2-1} dx = B(1/H, d/2+1-1/H) / (2H)``, so the
    product of the two x-integrals carries ``1/(4H^2)``.
    """
    return sigma_squared_closed_form(hurst, dim, horizon) / hurst**2


def sigma_squared_integral_form(
    hurst: float, dim: int, horizon: float = 1.0, spec: QuadratureSpec | None = None
) -> QuadratureResult:
    """``2H(2H-1)/(2pi)^d * int_0^t (t-y) y^{2H-2} dy * (int_0^inf x (1+x^{2H})^{-d/2-1} dx)^2``."""
    _require_supercritical(hurst, dim)
    h2 = 2.0 * hurst
    t = float(horizon)
    spec = spec or LINE_SPEC
    time_part = integrate_1d(lambda y: (t - y) * y ** (h2 - 2.0), 0.0, t, spec)
    space_spec = spec.with_(transform=Transform("algebraic_decay", 1.0))
    space = integrate_1d(lambda x: x * (1.0 + x**h2) ** (-dim / 2.0 - 1.0), 0.0, math.inf, space_spec)
    pref = h2 * (h2 - 1.0) / (2.0 * math.pi) ** dim
    value = pref * time_part.value * space.value**2
    rel = time_part.error_estimate / abs(time_part.value) + 2 * space.error_estimate / abs(space.value)
    return QuadratureResult(
        value,
        abs(value) * rel,
        time_part.evaluations + space.evaluations,
        time_part.converged and space.converged,
    )


# --------------------------------------------------------------------------
# integrand plumbing


def _case_arrays(case, a, b, c, hurst, absolute_mu):
    tr = covariance_triple(case, a, b, c, hurst)
    cov = np.abs(tr.cov) if absolute_mu else tr.cov
    return tr.lam, tr.rho, cov, tr.det


def _tetra_coords(xs, xcs, t):
    """Gap coordinates, weight (t - a - b - c) and Jacobian on the tetrahedron."""
    U, s, w = xs
    Uc, sc, wc = xcs
    tU = t * U
    a = tU * s * w
    b = tU * s * wc
    c = tU * sc
    measure = t**3 * U * U * s * (t * Uc)
    return a, b, c, measure


def _resolved(*arrays):
    """Zero entries that are non-finite in any of ``arrays``.

    Simplex nodes of the double-exponential rule come within 1e-100 of the
    edges, where ``lam * rho`` and the Gram determinant underflow.  The
    quadrature weights there are as small as the distance to the edge, so
    dropping those nodes costs nothing measurable.
    """
    ok = np.ones(np.shape(arrays[0]), dtype=bool)
    for arr in arrays:
        ok &= np.isfinite(arr)
    return [np.where(ok, arr, 0.0) for arr in arrays]


def _chaos_stack(coef, base, gamma):
    """Rows ``coef[k] * base * gamma**k`` for k = 0..len(coef)-1."""
    out = np.empty((len(coef), base.shape[0]))
    g = base.copy()
    for k, ck in enumerate(coef):
        out[k] = ck * g
        g = g * gamma
    return out


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def _check_hd(hurst, dim, horizon):
    if not 0.0 < hurst < 1.0:
        raise OutOfRegime(f"hurst must lie in (0, 1), got {hurst}")
    if dim < 1:
        raise OutOfRegime(f"dim must be >= 1, got {dim}")
    if not horizon > 0:
        raise OutOfRegime("horizon must be positive")


# --------------------------------------------------------------------------
# finite-eps variances


def total_variance_at_eps(
    eps: float,
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    absolute_mu: bool = False,
) -> QuadratureResult:
    """Second moment of the regularised estimator at bandwidth ``eps``.

    ``2/(2pi)^d * sum_cases int (t-a-b-c) cov / [(eps+lam)(eps+rho) - cov^2]^{d/2+1}``.
    """
    _check_eps(eps)
    _check_hd(hurst, dim, horizon)
    t = float(horizon)
    pref = 2.0 / (2.0 * math.pi) ** dim
    expo = dim / 2.0 + 1.0

    def f(xs, xcs):
        a, b, c, measure = _tetra_coords(xs, xcs, t)
        acc = np.zeros_like(a)
        for case in CASES:
            lam, rho, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
            acc += cov / (eps * eps + eps * (lam + rho) + det) ** expo
        return pref * measure * acc

    return integrate_tensor(f, 3, spec or TETRA_SPEC)


def chaos_variances_at_eps(
    m_max: int,
    eps: float,
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    absolute_mu: bool = False,
    include_total: bool = False,
) -> list[QuadratureResult]:
    """Chaos variances for ``m = 1..m_max`` on one shared grid.

    With ``include_total`` the total second moment is appended as the last
    entry, so partial sums and the total are computed from identical nodes.
    """
    _check_eps(eps)
    _check_hd(hurst, dim, horizon)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    t = float(horizon)
    coef = _chaos_coefficients(m_max, dim)
    expo = dim / 2.0 + 1.0
    pref_total = 2.0 / (2.0 * math.pi) ** dim

    def f(xs, xcs):
        a, b, c, measure = _tetra_coords(xs, xcs, t)
        rows = m_max + (1 if include_total else 0)
        acc = np.zeros((rows, a.shape[0]))
        for case in CASES:
            lam, rho, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
            prod = (eps + lam) * (eps + rho)
            base = cov / prod**expo
            acc[:m_max] += _chaos_stack(coef, base, cov * cov / prod)
            if include_total:
                acc[m_max] += pref_total * cov / (eps * eps + eps * (lam + rho) + det) ** expo
        return acc * measure

    return integrate_tensor(f, 3, spec or TETRA_SPEC)


def chaos_variance_at_eps(
    m: int,
    eps: float,
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    absolute_mu: bool = False,
) -> QuadratureResult:
    """``E[I_{2m-1}(f_{2m-1,eps})^2]`` for a single chaos order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _check_eps(eps)
    _check_hd(hurst, dim, horizon)
    t = float(horizon)
    ck = chaos_coefficient(m, dim)
    expo = dim / 2.0 + m

    def f(xs, xcs):
        a, b, c, measure = _tetra_coords(xs, xcs, t)
        acc = np.zeros_like(a)
        for case in CASES:
            lam, rho, cov, _ = _case_arrays(case, a, b, c, hurst, absolute_mu)
            acc += cov ** (2 * m - 1) / ((eps + lam) * (eps + rho)) ** expo
        return ck * measure * acc

    return integrate_tensor(f, 3, spec or TETRA_SPEC)


# --------------------------------------------------------------------------
# subcritical constant (octant)


def _require_subcritical(hurst, dim):
    if not (dim >= 3 and critical_hurst(dim) < hurst < 0.5):
        raise OutOfRegime(f"needs d >= 3 and 3/(2(1+d)) < H < 1/2, got H={hurst}, d={dim}")


def _octant_spec(spec, box):
    spec = spec or OCTANT_SPEC
    tr = Transform("algebraic_decay", float(box))
    return spec.with_(transform=(tr, tr, Transform()))


def _octant_coords(xs, xcs):
    """``(a, b, c)`` and Jacobian from the nodes ``(b, p, w)``, ``a = p w, c = p (1-w)``.

    The two increments coincide when ``a = c = 0``; in these coordinates that
    edge is ``p = 0`` and the singular behaviour near it is of product type.
    """
    b, p, w = xs
    wc = xcs[2]
    return p * w, b, p * wc, p


def hat_sigma_squared(
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    box: float = 1.0,
    absolute_mu: bool = False,
) -> QuadratureResult:
    """``2t/(2pi)^d * sum_cases int_{R_+^3} cov / [(1+lam)(1+rho) - cov^2]^{d/2+1}``.

    ``box`` is the scale ``L`` of the maps ``x = L u / (1 - u)`` onto the two
    unbounded axes (``b`` and ``a + c``); half of their nodes lie in ``[0, L]``.
    Nodes so far out that the variances overflow are dropped; the integrand
    there is below ``1e-20`` of its bulk.
    """
    _require_subcritical(hurst, dim)
    pref = 2.0 * horizon / (2.0 * math.pi) ** dim
    expo = dim / 2.0 + 1.0

    def f(xs, xcs):
        a, b, c, jac = _octant_coords(xs, xcs)
        acc = np.zeros_like(a)
        for case in CASES:
            with np.errstate(over="ignore", invalid="ignore"):
                lam, rho, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
                (term,) = _resolved(cov / (1.0 + lam + rho + det) ** expo)
            acc += term
        return pref * jac * acc

    return integrate_tensor(f, 3, _octant_spec(spec, box))


def hat_sigma_ms(
    m_max: int,
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    box: float = 1.0,
    absolute_mu: bool = False,
    include_total: bool = False,
) -> list[QuadratureResult]:
    """``t int_{R_+^3} Psi_m`` for ``m = 1..m_max`` (optionally plus the total)."""
    _require_subcritical(hurst, dim)
    coef = horizon * _chaos_coefficients(m_max, dim)
    pref_total = 2.0 * horizon / (2.0 * math.pi) ** dim
    expo = dim / 2.0 + 1.0

    def f(xs, xcs):
        a, b, c, jac = _octant_coords(xs, xcs)
        rows = m_max + (1 if include_total else 0)
        acc = np.zeros((rows, a.shape[0]))
        for case in CASES:
            with np.errstate(over="ignore", invalid="ignore"):
                lam, rho, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
                prod = (1.0 + lam) * (1.0 + rho)
                base, gamma = _resolved(cov / prod**expo, cov * cov / prod)
                acc[:m_max] += _chaos_stack(coef, base, gamma)
                if include_total:
                    (term,) = _resolved(pref_total * cov / (1.0 + lam + rho + det) ** expo)
                    acc[m_max] += term
        return acc * jac

    return integrate_tensor(f, 3, _octant_spec(spec, box))


def hat_sigma_m(m: int, hurst: float, dim: int, horizon: float = 1.0, spec=None, box=1.0, absolute_mu=False):
    """Single-order subcritical chaos constant ``t int Psi_m``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _require_subcritical(hurst, dim)
    ck = horizon * chaos_coefficient(m, dim)
    expo = dim / 2.0 + m

    def f(xs, xcs):
        a, b, c, jac = _octant_coords(xs, xcs)
        acc = np.zeros_like(a)
        for case in CASES:
            with np.errstate(over="ignore", invalid="ignore"):
                lam, rho, cov, _ = _case_arrays(case, a, b, c, hurst, absolute_mu)
                (term,) = _resolved(cov ** (2 * m - 1) / ((1.0 + lam) * (1.0 + rho)) ** expo)
            acc += term
        return ck * jac * acc

    return integrate_tensor(f, 3, _octant_spec(spec, box))


# --------------------------------------------------------------------------
# critical constant (simplex)


def _require_critical(hurst, dim):
    if not (dim >= 3 and abs(hurst - critical_hurst(dim)) <= CRITICAL_TOL):
        raise OutOfRegime(f"needs d >= 3 and H = 3/(2(1+d)), got H={hurst}, d={dim}")


def _simplex_coords(xs, xcs):
    """``(a, b, c) = (alpha, 1 - alpha - beta, beta)`` in collapsed coordinates."""
    s, w = xs
    sc, wc = xcs
    return s * w, sc, s * wc, s


def _simplex_spec(spec, box):
    spec = spec or SIMPLEX_SPEC
    return spec.with_(t_max=spec.t_max * float(box))


def bar_sigma_squared(
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    box: float = 1.0,
    absolute_mu: bool = False,
) -> QuadratureResult:
    """``t/(H (2pi)^d) * sum_cases int_{alpha+beta<=1} cov / (lam rho - cov^2)^{d/2+1}``.

    The integrand is singular on every edge of the simplex.  ``box`` scales
    the truncation ``[-T, T]`` of the double-exponential variable, i.e. how
    close to the singular edges the rule samples.
    """
    _require_critical(hurst, dim)
    pref = horizon / (hurst * (2.0 * math.pi) ** dim)
    expo = dim / 2.0 + 1.0

    def f(xs, xcs):
        a, b, c, jac = _simplex_coords(xs, xcs)
        acc = np.zeros_like(a)
        for case in CASES:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                _, _, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
                (term,) = _resolved(cov / det**expo)
            acc += term
        return pref * jac * acc

    return integrate_tensor(f, 2, _simplex_spec(spec, box))


def bar_sigma_ms(
    m_max: int,
    hurst: float,
    dim: int,
    horizon: float = 1.0,
    spec: QuadratureSpec | None = None,
    box: float = 1.0,
    absolute_mu: bool = False,
    include_total: bool = False,
) -> list[QuadratureResult]:
    """``t int tilde-Psi_m`` for ``m = 1..m_max`` (optionally plus the total)."""
    _require_critical(hurst, dim)
    coef = horizon * _chaos_coefficients(m_max, dim) / (2.0 * hurst)
    pref_total = horizon / (hurst * (2.0 * math.pi) ** dim)
    expo = dim / 2.0 + 1.0

    def f(xs, xcs):
        a, b, c, jac = _simplex_coords(xs, xcs)
        rows = m_max + (1 if include_total else 0)
        acc = np.zeros((rows, a.shape[0]))
        for case in CASES:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                lam, rho, cov, det = _case_arrays(case, a, b, c, hurst, absolute_mu)
                prod = lam * rho
                base, gamma = _resolved(cov / prod**expo, cov * cov / prod)
                acc[:m_max] += _chaos_stack(coef, base, gamma)
                if include_total:
                    (term,) = _resolved(pref_total * cov / det**expo)
                    acc[m_max] += term
        return acc * jac

    return integrate_tensor(f, 2, _simplex_spec(spec, box))


def bar_sigma_m(m: int, hurst: float, dim: int, horizon: float = 1.0, spec=None, box=1.0, absolute_mu=False):
    """Single-order critical chaos constant ``t int tilde-Psi_m``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _require_critical(hurst, dim)
    ck = horizon * chaos_coefficient(m, dim) / (2.0 * hurst)
    expo = dim / 2.0 + m

    def f(xs, xcs):
        a, b, c, jac = _simplex_coords(xs, xcs)
        acc = np.zeros_like(a)
        for case in CASES:
            lam, rho, cov, _ = _case_arrays(case, a, b, c, hurst, absolute_mu)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                (term,) = _resolved(cov ** (2 * m - 1) / (lam * rho) ** expo)
            acc += term
        return ck * jac * acc

    return integrate_tensor(f, 2, _simplex_spec(spec, box))


# --------------------------------------------------------------------------
# zeta covariance


def _sign_changes(u1, u2, hurst, samples=257):
    """Zeros of ``v -> E[B_{u1}(B_{v+u2} - B_v)]`` on ``(0, u1)``."""
    v = np.linspace(0.0, u1, samples)[1:-1]
    g = g_signed(v, u1, u2, hurst)
    roots = []
    for k in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        roots.append(optimize.brentq(lambda x: float(g_signed(x, u1, u2, hurst)), v[k], v[k + 1], xtol=1e-15))
    return roots


def _half_line_pieces(u1, u2, hurst):
    cuts = {0.0, float(u1)}
    if u1 > u2:
        cuts.add(float(u1 - u2))
    cuts.update(_sign_changes(u1, u2, hurst))
    return sorted(cuts)


def zeta_covariance(
    m: int,
    u1: float,
    u2: float,
    hurst: float,
    spec: QuadratureSpec | None = None,
    box: float = 1.0,
    check_tail: bool = True,
    symmetrize: bool = True,
) -> QuadratureResult:
    """Limiting covariance of the normalised odd-power increment averages.

    With ``symmetrize`` (default) returns
    ``int_0^inf [G(v,u1,u2)^p + G(v,u2,u1)^p] dv`` with ``p = 2m - 1``: lags of
    both signs between an increment of length ``u1`` and one of length
    ``u2``.  It is symmetric in ``(u1, u2)`` and equals
    ``2 int_0^inf G(v,u,u)^p dv`` when ``u1 = u2 = u``.  ``symmetrize=False``
    returns ``2 int_0^inf G(v,u1,u2)^p dv`` (positive lags only, doubled).

    The line is split at the kinks of ``G`` (``v = u1``, ``v = u1 - u2``) and
    at sign changes of the underlying covariance; the last piece is mapped
    to ``[0, inf)`` with scale ``box * max(u1, u2)``.  With ``check_tail``
    the tail scale is doubled and a change above ``1e-6`` relative raises
    :class:`NotConverged`.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 < hurst < 1.0:
        raise OutOfRegime(f"hurst must lie in (0, 1), got {hurst}")
    if u1 < 0 or u2 < 0:
        raise ValueError("u1 and u2 must be nonnegative")
    if u1 == 0 or u2 == 0:
        return QuadratureResult(0.0, 0.0, 0, True)
    p = 2 * m - 1
    if hurst != 0.5 and (2.0 - 2.0 * hurst) * p <= 1.0:
        raise OutOfRegime(f"G^{p} is not integrable at infinity for H={hurst}")
    spec = spec or LINE_SPEC
    orders = [(u1, u2), (u2, u1)] if symmetrize else [(u1, u2), (u1, u2)]

    def run(scale):
        total, err, evals, ok = 0.0, 0.0, 0, True
        for x1, x2 in orders:
            def integrand(v, x1=x1, x2=x2):
                return np.abs(g_signed(v, x1, x2, hurst)) ** p

            cuts = _half_line_pieces(x1, x2, hurst)
            pieces = [integrate_1d(integrand, lo, hi, spec) for lo, hi in zip(cuts[:-1], cuts[1:])]
            if hurst != 0.5:
                tail_spec = spec.with_(transform=Transform("algebraic_decay", scale))
                pieces.append(integrate_1d(integrand, cuts[-1], math.inf, tail_spec))
            for r in pieces:
                total += r.value
                err += r.error_estimate
                evals += r.evaluations
                ok &= r.converged
        return QuadratureResult(total, err, evals, ok)

    scale = box * max(u1, u2)
    res = run(scale)
    if check_tail and hurst != 0.5:
        res2 = run(2.0 * scale)
        change = abs(res2.value - res.value)
        merged = QuadratureResult(
            res.value,
            max(res.error_estimate, change),
            res.evaluations + res2.evaluations,
            res.converged and res2.converged,
        )
        if change > max(spec.abs_tol, 1e-6 * abs(res.value)):
            raise NotConverged(f"tail doubling changed the value by {change:.3g}", merged)
        return merged
    return res
