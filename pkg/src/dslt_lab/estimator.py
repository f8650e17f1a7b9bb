"""Discretised regularised derivative self-intersection local time.

On a uniform grid ``t_i = i * Delta`` the estimator is the left-point sum

    -sum_{0 <= j < i <= n} p_eps^(1)(B_{t_i} - B_{t_j}) * Delta**2

over the strict lower triangle.  The O(n^2) pair sum runs in a compiled
kernel when available and in numpy otherwise; :data:`BACKEND` names the one
in use.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import NonFinitePath, ResolutionViolation
from .fbm import FbmConfig, FbmPath

try:
    if os.environ.get("DSLT_LAB_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _backend

    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised when the extension is absent
    from . import _kernels_py as _backend

    BACKEND = "numpy"

__all__ = [
    "EstimatorConfig",
    "EstimatorSample",
    "estimate_dslt",
    "estimate_values",
    "guard_ratio",
    "path_steps_for",
    "BACKEND",
]

DEFAULT_GUARD = 1.0 / 8.0


@dataclass(frozen=True)
class EstimatorConfig:
    eps: float
    rule: str = "left_point"
    resolution_guard: float = DEFAULT_GUARD

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.rule != "left_point":
            raise ValueError(f"unsupported rule {self.rule!r}")
        if not 0.0 < self.resolution_guard < 1.0:
            raise ValueError("resolution_guard must lie in (0, 1)")


@dataclass(frozen=True)
class EstimatorSample:
    value: float
    eps: float
    path_config: FbmConfig
    guard_ratio: float


def guard_ratio(delta: float, hurst: float, eps: float) -> float:
    """``Delta^{2H} / eps``: per-step displacement variance over kernel width."""
    return delta ** (2.0 * hurst) / eps


def path_steps_for(eps: float, hurst: float, horizon: float = 1.0, guard: float = DEFAULT_GUARD) -> int:
    """Smallest power of two ``n >= 2`` with ``(t/n)^{2H} <= guard * eps``."""
    n = 2
    while guard_ratio(horizon / n, hurst, eps) > guard:
        n *= 2
    return n


def _pair_sum(values: np.ndarray, eps: float, backend=None) -> float:
    be = backend or _backend
    xt = np.ascontiguousarray(np.asarray(values, dtype=float).T)
    return float(be.pair_sum(xt, float(eps)))


def estimate_values(values, delta: float, eps: float, backend=None) -> float:
    """Estimator for raw path values of shape ``(n+1, d)`` (no guard check)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("values must have shape (n+1, d)")
    if not np.all(np.isfinite(values)):
        raise NonFinitePath("path contains NaN or inf")
    d = values.shape[1]
    if d > 2:
        # canonical order of components 2..d: the estimate is then exactly
        # symmetric in them, independent of floating-point summation order
        order = sorted(range(1, d), key=lambda k: values[:, k].tolist())
        values = values[:, [0, *order]]
    s = _pair_sum(values, eps, backend)
    # -p^(1)(x) = (x_1 / eps) (2 pi eps)^{-d/2} exp(-|x|^2 / (2 eps))
    return delta * delta * (2.0 * math.pi * eps) ** (-0.5 * d) / eps * s


def estimate_dslt(path: FbmPath, cfg: EstimatorConfig, backend=None) -> EstimatorSample:
    """Evaluate the estimator on one sampled path.

    Raises
    ------
    ResolutionViolation
        if ``Delta^{2H} / eps`` exceeds ``cfg.resolution_guard``.
    NonFinitePath
        if the path contains NaN or inf.
    """
    pc = path.config
    ratio = guard_ratio(pc.delta, pc.hurst, cfg.eps)
    if ratio > cfg.resolution_guard:
        raise ResolutionViolation(
            f"Delta^(2H)/eps = {ratio:.4g} exceeds guard {cfg.resolution_guard:.4g} "
            f"(n={pc.steps}, eps={cfg.eps})"
        )
    value = estimate_values(path.values, pc.delta, cfg.eps, backend)
    return EstimatorSample(value, cfg.eps, pc, ratio)
