"""Line-oriented run configuration.

Files hold ``key = value`` lines; ``#`` starts a comment, keys are case
insensitive and unknown keys are rejected.  Missing keys take the
defaults shipped in ``data/defaults.conf``.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Iterable, Optional, Tuple

from . import stat_bounds as sb
from .channel_model import ChannelParams
from .decoy_estimator import PulseEnsemble
from .errors import ConfigParseError, ValidationError

MODES = ("bounds", "estimate", "keyrate", "optimize", "sweep", "maxdist", "table2", "figures", "coverage")
FORMATS = ("csv", "json")


def _floats(text: str) -> Tuple[float, ...]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    return tuple(float(t) for t in items)


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(_int(t) for t in text.split(",") if t.strip())


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


def _optional_str(text: str) -> Optional[str]:
    text = text.strip()
    return None if text.lower() in ("", "none") else text


def _method(text: str) -> sb.BoundMethod:
    return sb.BoundMethod.parse(text)


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, sb.BoundMethod):
        return value.value
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# scheduling and destination only; excluded from the digest
_NOT_HASHED = ("workers", "out")

# key -> parser; attribute names match the keys
_PARSERS = {
    "eta_d": float,
    "y0": float,
    "e_d": float,
    "loss": float,
    "distance": float,
    "f": float,
    "epsilon": float,
    "n": float,
    "basis_prob": float,
    "method": _method,
    "mode": lambda t: t.strip().lower(),
    "mu": _optional_float,
    "nu": _optional_float,
    "q_signal": _optional_float,
    "q_weak": _optional_float,
    "tallies": _optional_str,
    "out": _optional_str,
    "seed": _int,
    "workers": _int,
    "format": lambda t: t.strip().lower(),
    "chi": _floats,
    "n_sigma": _floats,
    "distances": _floats,
    "n_values": _floats,
    "trials": _int,
    "soundness_trials": _int,
    "coverage_eps": float,
    "coverage_means": _floats,
    "figures": _ints,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; see ``data/defaults.conf`` for meanings."""

    eta_d: float = 0.045
    y0: float = 1.7e-6
    e_d: float = 0.033
    loss: float = 0.21
    distance: float = 100.0
    f: float = 1.22
    epsilon: float = 1e-10
    n: float = 1e10
    basis_prob: float = 0.5
    method: sb.BoundMethod = sb.BoundMethod.EXACT
    mode: str = "keyrate"
    mu: Optional[float] = None
    nu: Optional[float] = None
    q_signal: Optional[float] = None
    q_weak: Optional[float] = None
    tallies: Optional[str] = None
    out: Optional[str] = None
    seed: int = 0
    workers: int = 0
    format: str = "csv"
    chi: Tuple[float, ...] = (0.0, 10.0, 100.0, 1000.0, 10000.0)
    n_sigma: Tuple[float, ...] = (3.0, 5.0, 7.0, 9.0)
    distances: Tuple[float, ...] = tuple(float(d) for d in range(0, 151, 10))
    n_values: Tuple[float, ...] = tuple(10.0 ** k for k in range(6, 15))
    trials: int = 100000
    soundness_trials: int = 10000
    coverage_eps: float = 1e-2
    coverage_means: Tuple[float, ...] = (1.0, 5.0, 20.0, 100.0, 1000.0)
    figures: Tuple[int, ...] = (1, 2, 3, 4, 5)

    def __post_init__(self):
        for name in ("eta_d", "y0", "e_d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}", field=name)
        if not (self.loss >= 0.0 and math.isfinite(self.loss)):
            raise ValidationError("loss must be a finite non-negative dB/km value", field="loss")
        if not (self.distance >= 0.0 and math.isfinite(self.distance)):
            raise ValidationError("distance must be finite and non-negative", field="distance")
        if not self.f >= 1.0:
            raise ValidationError(f"f must be >= 1, got {self.f!r}", field="f")
        for name in ("epsilon", "coverage_eps"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {v!r}", field=name)
        if not (self.n > 0.0 and math.isfinite(self.n)):
            raise ValidationError("n must be positive", field="n")
        if not 0.0 < self.basis_prob < 1.0:
            raise ValidationError("basis_prob must lie in (0, 1)", field="basis_prob")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}", field="mode")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be csv or json, got {self.format!r}", field="format")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer", field="seed")
        if self.workers < 0:
            raise ValidationError("workers must be >= 0 (0 means all cores)", field="workers")
        for name in ("trials", "soundness_trials"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1", field=name)
        given = [getattr(self, k) is not None for k in ("mu", "nu", "q_signal", "q_weak")]
        if any(given) and not all(given):
            raise ValidationError("mu, nu, q_signal and q_weak must be given together", field="mu")
        if all(given):
            self.ensemble  # validates intensities and shares
        if self.tallies is not None and not os.path.isfile(self.tallies):
            raise ValidationError(f"tally file not found: {self.tallies}", field="tallies")
        if any(not (c >= 0.0 and math.isfinite(c)) for c in self.chi):
            raise ValidationError("chi values must be finite and non-negative", field="chi")
        if any(d < 0.0 for d in self.distances):
            raise ValidationError("distances must be non-negative", field="distances")
        if any(v <= 0.0 for v in self.n_values):
            raise ValidationError("n_values must be positive", field="n_values")
        if any(m <= 0.0 for m in self.coverage_means):
            raise ValidationError("coverage_means must be positive", field="coverage_means")
        if any(k not in (1, 2, 3, 4, 5) for k in self.figures):
            raise ValidationError("figures must be drawn from 1..5", field="figures")

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.eta_d, self.y0, self.e_d, self.loss, self.distance)

    @property
    def has_ensemble(self) -> bool:
        return self.mu is not None

    @property
    def ensemble(self) -> Optional[PulseEnsemble]:
        if self.mu is None:
            return None
        try:
            return PulseEnsemble(self.mu, self.nu, self.q_signal, self.q_weak, self.n,
                                 vacuum_share=max(0.0, 1.0 - self.q_signal - self.q_weak))
        except ValidationError as exc:
            raise ValidationError(str(exc), field=exc.field if exc.field != "intensities" else "mu") from None

    def entries(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((f.name, _fmt(getattr(self, f.name))) for f in fields(self)
                     if getattr(self, f.name) is not None)

    def updated(self, overrides: Iterable[Tuple[str, str]]) -> "RunConfig":
        """Copy with ``(key, text)`` overrides parsed like file entries."""
        return replace(self, **_parse_pairs(((k, v, None) for k, v in overrides), strict_duplicates=False))

    def digest(self) -> str:
        """Short hash of every setting that can change the numbers produced."""
        text = "\n".join(f"{k} = {v}" for k, v in self.entries() if k not in _NOT_HASHED)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _parse_pairs(items, strict_duplicates=True):
    values = {}
    for key, text, line in items:
        key = key.strip().lower()
        where = f" (line {line})" if line is not None else ""
        if key not in _PARSERS:
            raise ConfigParseError(f"unknown key {key!r}{where}", line=line)
        if strict_duplicates and key in values:
            raise ConfigParseError(f"duplicate key {key!r}{where}", line=line)
        try:
            values[key] = _PARSERS[key](text)
        except ValidationError as exc:
            raise ValidationError(f"{key}: {exc}{where}", field=key) from None
        except ValueError as exc:
            raise ValidationError(f"{key}: cannot parse {text.strip()!r}{where}: {exc}", field=key) from None
    return values


def parse_config(text: str, base_dir: Optional[str] = None) -> RunConfig:
    """Parse configuration text; relative paths resolve against ``base_dir``."""
    items = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        if not key.strip():
            raise ConfigParseError(f"line {lineno}: missing key", line=lineno)
        items.append((key, value, lineno))
    values = _parse_pairs(items)
    for key in ("tallies", "out"):
        path = values.get(key)
        if path is not None and base_dir is not None and not os.path.isabs(path):
            values[key] = os.path.normpath(os.path.join(base_dir, path))
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def default_config_text() -> str:
    return resources.files("decoyfk").joinpath("data/defaults.conf").read_text(encoding="utf-8")


def serialize(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.entries())
