"""Deterministic refinement quadrature on intervals, the 2-simplex and the octant.

Three base rules on ``[0, 1]`` are provided:

``gauss_legendre_composite``
    32-point Gauss-Legendre on ``2**level`` equal panels.
``tanh_sinh``
    double-exponential rule with step ``2**-level``; handles algebraic
    endpoint singularities of any integrable order without being told the
    exponent.
``tanh``
    single-exponential rule ``x = 1/(1+exp(-t))``, trapezoidal in ``t`` with
    step ``2**-level`` on ``|t| <= t_max``.  Features whose location scales
    algebraically towards an endpoint (e.g. a ridge at ``x ~ r**-q`` on an
    infinite radial axis) keep a fixed width in ``t``, whereas the
    double-exponential map squeezes them; combined with ``algebraic_decay``
    the axis becomes ``x = scale * exp(t)``.

All rules report nodes together with their distance to the right endpoint,
so integrands that depend on ``1 - x`` can be evaluated without loss of
precision where nodes crowd the boundary.  Multi-dimensional rules are
tensor products, evaluated in fixed-size chunks and reduced in a fixed order
so results are bit-reproducible for a given spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NonFiniteEvaluation, NotConverged

__all__ = [
    "Transform",
    "QuadratureSpec",
    "QuadratureResult",
    "unit_rule",
    "integrate_1d",
    "integrate_simplex_2d",
    "integrate_octant_3d",
    "integrate_tensor",
]

RULES = ("gauss_legendre_composite", "tanh_sinh", "tanh")
GAUSS_NODES = 32
CHUNK = 1 << 16


@dataclass(frozen=True)
class Transform:
    """Change of variables applied to one axis of ``[0, 1]``.

    kind
        ``"none"``, ``"power_law"`` (``x = v**p`` flattens an ``x**(p0-1)``
        singularity at 0 when ``p ~ 1/p0``) or ``"algebraic_decay"``
        (``x = scale * v / (1 - v)``, maps onto ``[0, inf)``).
    two_sided
        For ``power_law`` only: use ``x = v**p / (v**p + (1-v)**p)``, which
        flattens singularities of the same order at both endpoints.
    """

    kind: str = "none"
    param: float = 1.0
    two_sided: bool = False

    def __post_init__(self):
        if self.kind not in ("none", "power_law", "algebraic_decay"):
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.param <= 0:
            raise ValueError("transform parameter must be positive")

    def apply(self, v, vc, w):
        """Map unit nodes ``v`` (complement ``vc``) and weights ``w``.

        Returns ``(x, xc, w)`` where ``xc`` is ``1 - x`` for the bounded
        transforms and ``1/x`` for ``algebraic_decay``.
        """
        if self.kind == "none":
            return v, vc, w
        if self.kind == "power_law" and self.two_sided:
            p = self.param
            vp, vcp = v**p, vc**p
            den = vp + vcp
            return vp / den, vcp / den, w * p * (vp / v) * (vcp / vc) / (den * den)
        if self.kind == "power_law":
            p = self.param
            x = v**p
            with np.errstate(divide="ignore"):
                xc = -np.expm1(p * np.log(v))
            return x, xc, w * p * v ** (p - 1.0)
        s = self.param
        with np.errstate(divide="ignore"):
            x = s * v / vc
            return x, vc / (s * v), w * s / (vc * vc)


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "gauss_legendre_composite"
    base_level: int = 2
    max_level: int = 8
    rel_tol: float = 1e-7
    abs_tol: float = 1e-14
    transform: tuple[Transform, ...] | Transform = Transform()
    t_max: float = 5.0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.base_level > self.max_level:
            raise ValueError("base_level must not exceed max_level")
        if self.base_level < 0:
            raise ValueError("levels must be nonnegative")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")

    def axis_transform(self, axis: int) -> Transform:
        if isinstance(self.transform, Transform):
            return self.transform
        return self.transform[axis]

    def with_(self, **kw) -> "QuadratureSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool
    levels: tuple[float, ...] = field(default=(), compare=False)

    def __float__(self):
        return self.value


# --------------------------------------------------------------------------
# unit rules


@lru_cache(maxsize=64)
def _gauss_unit(level: int):
    g, gw = np.polynomial.legendre.leggauss(GAUSS_NODES)
    panels = 1 << level
    h = 1.0 / panels
    left = np.arange(panels) * h
    x = (left[:, None] + 0.5 * h * (g + 1.0)).ravel()
    xc = (left[::-1, None] + 0.5 * h * (1.0 - g)).ravel()
    w = np.tile(0.5 * h * gw, panels)
    return x, xc, w


@lru_cache(maxsize=64)
def _tanh_sinh_unit(level: int, t_max: float):
    h = 2.0 ** (-level)
    k = int(math.ceil(t_max / h))
    t = np.arange(-k, k + 1) * h
    s = 0.5 * math.pi * np.sinh(t)
    # x = 1/(1+exp(-2s)), 1-x = 1/(1+exp(2s)); weight = dx/dt * h
    with np.errstate(over="ignore"):
        x = 1.0 / (1.0 + np.exp(-2.0 * s))
        xc = 1.0 / (1.0 + np.exp(2.0 * s))
        w = h * 0.5 * math.pi * np.cosh(t) / (2.0 * np.cosh(s) ** 2)
    keep = (x > 0) & (xc > 0) & (w > 0)
    return x[keep], xc[keep], w[keep]


@lru_cache(maxsize=64)
def _tanh_unit(level: int, t_max: float):
    h = 2.0 ** (-level)
    k = int(math.ceil(t_max / h))
    t = np.arange(-k, k + 1) * h
    x = 1.0 / (1.0 + np.exp(-t))
    xc = 1.0 / (1.0 + np.exp(t))
    return x, xc, h * x * xc


def unit_rule(rule: str, level: int, t_max: float = 5.0):
    """Nodes ``x``, complements ``1-x`` and weights of a rule on ``[0, 1]``."""
    if rule == "gauss_legendre_composite":
        return _gauss_unit(level)
    if rule == "tanh_sinh":
        return _tanh_sinh_unit(level, float(t_max))
    if rule == "tanh":
        return _tanh_unit(level, float(t_max))
    raise ValueError(f"unknown rule {rule!r}")


def _axis_nodes(spec: QuadratureSpec, level: int, axis: int):
    v, vc, w = unit_rule(spec.rule, level, spec.t_max)
    return spec.axis_transform(axis).apply(v, vc, w)


# --------------------------------------------------------------------------
# driver


def _check_finite(vals):
    if not np.all(np.isfinite(vals)):
        raise NonFiniteEvaluation("integrand returned a non-finite value at an interior node")


def _tensor_sum(func, axes, chunk=CHUNK):
    """Sum ``w1*w2*...*f(nodes)`` over a tensor grid, chunked over the first axis.

    ``func`` may return shape ``(npts,)`` or ``(k, npts)`` for ``k`` integrands
    sharing the same nodes.
    """
    first = axes[0]
    rest = axes[1:]
    if rest:
        mesh = np.meshgrid(*[ax[0] for ax in rest], indexing="ij")
        mesh_c = np.meshgrid(*[ax[1] for ax in rest], indexing="ij")
        logrest = np.zeros(1)
        for ax in rest:
            logrest = np.add.outer(logrest, np.log(ax[2]))
        logrest = logrest.reshape(-1)
        mesh = [m.reshape(-1) for m in mesh]
        mesh_c = [m.reshape(-1) for m in mesh_c]
    else:
        mesh, mesh_c, logrest = [], [], np.zeros(1)
    inner = len(logrest)
    rows = max(1, chunk // inner)
    total = 0.0
    count = 0
    x0, xc0, w0 = first
    logw0 = np.log(w0)
    for start in range(0, len(x0), rows):
        sl = slice(start, start + rows)
        m = len(x0[sl])
        xs = [np.repeat(x0[sl], inner)] + [np.tile(g, m) for g in mesh]
        xcs = [np.repeat(xc0[sl], inner)] + [np.tile(g, m) for g in mesh_c]
        logw = np.repeat(logw0[sl], inner) + np.tile(logrest, m)
        vals = np.asarray(func(xs, xcs), dtype=float)
        _check_finite(vals)
        # weights of transformed infinite axes can exceed the float range
        # individually while w*f stays tiny, so combine them in log space
        with np.errstate(divide="ignore"):
            terms = np.sign(vals) * np.exp(logw + np.log(np.abs(vals)))
        total = total + np.sum(terms, axis=-1)
        count += m * inner
    return total, count


def integrate_tensor(
    func: Callable[[list, list], np.ndarray],
    dim: int,
    spec: QuadratureSpec,
    raise_on_failure: bool = False,
):
    """Refine a tensor-product rule on ``[0,1]**dim`` (after per-axis transforms).

    ``func(xs, xcs)`` receives lists of node arrays and their complements
    (see :meth:`Transform.apply`).  A vector-valued ``func`` returning
    ``(k, npts)`` yields a list of ``k`` results, each with its own error
    estimate; refinement continues until every component has converged.
    """
    history = []
    total_evals = 0
    for level in range(spec.base_level, spec.max_level + 1):
        axes = [_axis_nodes(spec, level, k) for k in range(dim)]
        value, n = _tensor_sum(func, axes)
        total_evals += n
        history.append(np.atleast_1d(value))
        if len(history) > 1:
            diff = np.abs(history[-1] - history[-2])
            tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(history[-1]))
            if np.all(diff <= tol):
                break
    vector = np.ndim(value) > 0
    results = []
    for k in range(len(history[-1])):
        vals = tuple(float(h[k]) for h in history)
        if len(vals) > 1:
            err = abs(vals[-1] - vals[-2])
            ok = err <= max(spec.abs_tol, spec.rel_tol * abs(vals[-1]))
        else:
            err, ok = math.inf, False
        results.append(QuadratureResult(vals[-1], err, total_evals, bool(ok), vals))
    if raise_on_failure:
        for r in results:
            if not r.converged:
                raise NotConverged(
                    f"quadrature did not converge (error {r.error_estimate:.3g})",
                    results if vector else r,
                )
    return results if vector else results[0]


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    spec: QuadratureSpec | None = None,
    raise_on_failure: bool = False,
) -> QuadratureResult:
    """Integrate ``f`` over ``[lo, hi]``; ``hi`` may be ``inf`` with ``algebraic_decay``."""
    spec = spec or QuadratureSpec()
    tr = spec.axis_transform(0)
    if math.isinf(hi):
        if tr.kind != "algebraic_decay":
            raise ValueError("an infinite upper limit requires the algebraic_decay transform")

        def g(xs, xcs):
            return f(lo + xs[0])

    else:
        if tr.kind == "algebraic_decay":
            raise ValueError("algebraic_decay maps onto [0, inf); use a finite transform")
        width = hi - lo

        def g(xs, xcs):
            return width * f(lo + width * xs[0])

    return integrate_tensor(g, 1, spec, raise_on_failure)


def integrate_simplex_2d(
    f: Callable[..., np.ndarray],
    spec: QuadratureSpec | None = None,
    with_complement: bool = False,
    raise_on_failure: bool = False,
) -> QuadratureResult:
    """Integrate ``f(alpha, beta)`` over ``{alpha, beta >= 0, alpha + beta <= 1}``.

    Uses collapsed coordinates ``alpha = s*w, beta = s*(1-w)`` (Jacobian ``s``)
    so that the corner at the origin becomes an edge.  With
    ``with_complement=True`` the integrand is called as
    ``f(alpha, beta, 1 - alpha - beta)`` with the last argument computed
    exactly from the node complement.
    """
    spec = spec or QuadratureSpec()

    def g(xs, xcs):
        s, w = xs
        sc, wc = xcs
        alpha = s * w
        beta = s * wc
        if with_complement:
            return s * f(alpha, beta, sc)
        return s * f(alpha, beta)

    return integrate_tensor(g, 2, spec, raise_on_failure)


def integrate_octant_3d(
    f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    spec: QuadratureSpec | None = None,
    raise_on_failure: bool = False,
) -> QuadratureResult:
    """Integrate ``f(x, y, z)`` over the positive octant.

    Each axis must carry an ``algebraic_decay`` transform; the default spec
    uses unit scale on every axis.
    """
    if spec is None:
        spec = QuadratureSpec(transform=Transform("algebraic_decay", 1.0))
    for k in range(3):
        if spec.axis_transform(k).kind != "algebraic_decay":
            raise ValueError("octant integration needs algebraic_decay on every axis")

    def g(xs, xcs):
        return f(*xs)

    return integrate_tensor(g, 3, spec, raise_on_failure)
