"""Exact synthesis of d-dimensional fractional Brownian motion on uniform grids.

Increments (fractional Gaussian noise) are drawn by circulant embedding of
their Toeplitz covariance and the FFT (Davies-Harte).  If the embedding
spectrum has a negative eigenvalue the exact Cholesky factor of the
increment covariance is used instead.

Every component draws from its own counter-based Philox stream keyed by
``(seed, stream_index, component)``, so paths are reproducible and
independent of the order in which they are generated.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmbeddingFallback, GridTooLarge

__all__ = [
    "FbmConfig",
    "FbmPath",
    "exact_covariance",
    "fgn_autocovariance",
    "sample_path",
    "stream_generator",
    "DEFAULT_MEMORY_CAP",
]

DEFAULT_MEMORY_CAP = 512 * 2**20  # bytes for a dense Cholesky factor
_SPECTRUM_TOL = 1e-10


@dataclass(frozen=True)
class FbmConfig:
    hurst: float
    dim: int
    horizon: float
    steps: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def delta(self) -> float:
        return self.horizon / self.steps


@dataclass(frozen=True)
class FbmPath:
    config: FbmConfig
    times: np.ndarray
    values: np.ndarray = field(repr=False)
    method: str = "circulant"

    def to_csv(self, target=None) -> str | None:
        """Write ``time,comp_0,...`` rows with 17 significant digits.

        Returns the text when ``target`` is None, else writes to the path
        or file object.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + [f"comp_{j}" for j in range(self.config.dim)])
        for ti, row in zip(self.times, self.values):
            w.writerow([f"{ti:.17g}"] + [f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return None


def exact_covariance(s, u, hurst: float):
    """``E[B_s B_u] = (s^{2H} + u^{2H} - |s-u|^{2H}) / 2``."""
    h2 = 2.0 * hurst
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    out = 0.5 * (s**h2 + u**h2 - np.abs(s - u) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(k, hurst: float):
    """Autocovariance of unit-step fractional Gaussian noise at lag ``k``."""
    h2 = 2.0 * hurst
    k = np.abs(np.asarray(k, dtype=float))
    out = 0.5 * (np.abs(k + 1) ** h2 + np.abs(k - 1) ** h2 - 2.0 * k**h2)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# RNG streams


def _stream_key(stream_index) -> tuple[int, ...]:
    if isinstance(stream_index, (tuple, list)):
        key = tuple(int(k) for k in stream_index)
    else:
        key = (int(stream_index),)
    if any(k < 0 for k in key):
        raise ValueError("stream indices must be nonnegative")
    return key


def stream_generator(seed: int, stream_index, component: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *stream_index, component)``."""
    key = _stream_key(stream_index)
    ss = np.random.SeedSequence([int(seed), len(key), *key, int(component)])
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# synthesis


@lru_cache(maxsize=32)
def _embedding_sqrt_spectrum(hurst: float, n: int):
    """``sqrt(eig / N)`` of the circulant embedding, or None if not PSD."""
    gam = fgn_autocovariance(np.arange(n + 1), hurst)
    row = np.concatenate([gam, gam[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -_SPECTRUM_TOL * eig.max():
        return None
    out = np.sqrt(np.maximum(eig, 0.0) / len(row))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _cholesky_factor(hurst: float, n: int):
    from scipy.linalg import cholesky, toeplitz

    cov = toeplitz(fgn_autocovariance(np.arange(n), hurst))
    out = cholesky(cov, lower=True)
    out.setflags(write=False)
    return out


def _unit_fgn(hurst, n, rng, sqrt_eig, chol):
    if sqrt_eig is not None:
        m = len(sqrt_eig)
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return np.fft.fft(sqrt_eig * z)[:n].real
    return chol @ rng.standard_normal(n)


def sample_path(
    config: FbmConfig,
    stream_index=0,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    force_cholesky: bool = False,
) -> FbmPath:
    """Draw one path of ``config.dim`` independent fBm components.

    Parameters
    ----------
    config : FbmConfig
    stream_index : int or tuple of int
        Selects the random stream together with ``config.seed``.
    memory_cap : int
        Largest dense Cholesky factor (bytes) allowed in the fallback.
    force_cholesky : bool
        Skip the circulant embedding (used to cross-check both methods).
    """
    n, H = config.steps, config.hurst
    sqrt_eig = None if force_cholesky else _embedding_sqrt_spectrum(H, n)
    chol = None
    method = "circulant"
    if sqrt_eig is None:
        if 8 * n * n > memory_cap:
            raise GridTooLarge(f"Cholesky fallback for n={n} needs {8 * n * n} bytes > cap {memory_cap}")
        if not force_cholesky:
            warnings.warn(
                f"circulant embedding not nonnegative for H={H}, n={n}; using Cholesky",
                EmbeddingFallback,
                stacklevel=2,
            )
        chol = _cholesky_factor(H, n)
        method = "cholesky"
    scale = config.delta**H
    values = np.zeros((n + 1, config.dim))
    for j in range(config.dim):
        rng = stream_generator(config.seed, stream_index, j)
        values[1:, j] = np.cumsum(scale * _unit_fgn(H, n, rng, sqrt_eig, chol))
    times = np.linspace(0.0, config.horizon, n + 1)
    return FbmPath(config, times, values, method)
