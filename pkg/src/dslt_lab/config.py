"""Flat ``key = value`` run configuration.

Recognised keys
---------------
hurst          Hurst index in (0, 1) (required)
dim            spatial dimension >= 2 (required)
horizon        time horizon t > 0 (default 1)
eps_sweep      comma-separated, strictly decreasing bandwidths
replications   paths per bandwidth, >= 100 (default 2000)
seed           64-bit master seed (default 0)
regime         auto | supercritical | subcritical | critical (default auto)
quad_rel_tol   relative tolerance for the constant integrals (default: per-integral)
chaos_m_max    number of chaos orders in tables (default 30)

Blank lines and ``#`` comments are ignored.  Every problem in a file is
collected and reported together in :class:`ConfigInvalid`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .constants import Regime, resolve_regime
from .errors import ConfigInvalid, OutOfRegime

__all__ = ["RunConfig", "load_config", "parse_config", "KEYS"]

KEYS = (
    "hurst",
    "dim",
    "horizon",
    "eps_sweep",
    "replications",
    "seed",
    "regime",
    "quad_rel_tol",
    "chaos_m_max",
)
REQUIRED = ("hurst", "dim")


@dataclass(frozen=True)
class RunConfig:
    hurst: float
    dim: int
    horizon: float = 1.0
    eps_sweep: tuple[float, ...] = ()
    replications: int = 2000
    seed: int = 0
    regime: str | None = None  # resolved name, None outside every regime
    quad_rel_tol: float | None = None
    chaos_m_max: int = 30

    def echo(self) -> dict:
        out = asdict(self)
        out["eps_sweep"] = list(self.eps_sweep)
        return out

    def with_seed(self, seed: int | None) -> RunConfig:
        return self if seed is None else replace(self, seed=_check_seed(seed))


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _int_at_least(lo):
    def conv(text):
        v = int(text)
        if v < lo:
            raise ValueError(f"must be an integer >= {lo}")
        return v

    return conv


def _hurst(text):
    v = float(text)
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")
    return v


def _sweep(text):
    vals = tuple(float(x) for x in text.split(",") if x.strip())
    if not vals:
        raise ValueError("must list at least one value")
    if any(not v > 0 for v in vals):
        raise ValueError("values must be positive")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ValueError("must be strictly decreasing")
    return vals


def _regime(text):
    text = text.strip().lower()
    if text != "auto" and text not in {r.value for r in Regime}:
        raise ValueError("must be auto, supercritical, subcritical or critical")
    return text


_PARSERS = {
    "hurst": _hurst,
    "dim": _int_at_least(2),
    "horizon": _positive_float,
    "eps_sweep": _sweep,
    "replications": _int_at_least(100),
    "seed": _check_seed,
    "regime": _regime,
    "quad_rel_tol": _positive_float,
    "chaos_m_max": _int_at_least(1),
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    errors = []
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            errors.append(f"{where}: expected 'key = value', got {line!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            errors.append(f"{where}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"{where}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        try:
            values[key] = _PARSERS[key](val)
            lines[key] = lineno
        except ValueError as exc:
            errors.append(f"{where}: {key}: {exc}")
            values[key] = None
            lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            errors.append(f"{source}: missing required key {key!r}")

    regime = values.pop("regime", None) or "auto"
    resolved = None
    if values.get("hurst") is not None and values.get("dim") is not None:
        try:
            resolved = resolve_regime(values["hurst"], values["dim"]).value
        except OutOfRegime:
            resolved = None
        if regime != "auto" and regime != resolved:
            errors.append(
                f"{source}:{lines.get('regime', '?')}: regime: (hurst={values['hurst']}, dim={values['dim']}) "
                f"is {resolved or 'outside every regime'}, not {regime}"
            )
    if errors:
        raise ConfigInvalid(errors)
    return RunConfig(regime=resolved, **{k: v for k, v in values.items()})


def load_config(path) -> RunConfig:
    """Read and validate a configuration file (``OSError`` propagates)."""
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, str(path))
