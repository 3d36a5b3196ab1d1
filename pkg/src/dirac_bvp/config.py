"""Run configuration in a line-oriented ``section.key = value`` format, and snapshot files.

Example::

    # Kerr collar inside the Cauchy horizon
    metric.kind = kerr_ef
    metric.M = 1.0
    metric.a = 0.8
    metric.b = auto
    metric.r0 = 0.3
    grid.Nr = 33
    grid.Ntheta = 8

Every key has a default, so an empty file is a complete configuration.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AUTO",
    "ConfigError",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
]


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


AUTO = "auto"


@dataclass
class MetricSection:
    kind: str = "flat"
    d: int = 3
    M: float = 1.0
    a: float = 0.0
    Q: float = 0.0
    b: object = AUTO
    r0: float = 1.0


@dataclass
class GridSection:
    Nr: int = 65
    Ntheta: int = 8
    r_outer: float = 2.0
    k: int = 1


@dataclass
class OperatorSection:
    m: float = 0.5
    potential: str = "zero"
    V: float = 0.0
    order: int = 2


@dataclass
class SpectralSection:
    r_mid: object = AUTO
    p_max: int = 4


@dataclass
class EvolutionSection:
    T_final: float = 1.0
    dt: object = AUTO
    scheme: str = "crank_nicolson"
    CFL: float = 1.0
    r_max: object = AUTO
    series_phases: str = "cayley"
    bump_center: object = AUTO
    bump_radius: object = AUTO
    window_fraction: float = 0.5


@dataclass
class OutputSection:
    directory: str = "out"
    snapshot_every: int = 1


@dataclass
class TolerancesSection:
    hermiticity: float = 1e-12
    window: float = 1e-10
    norm: float = 1e-8
    support_threshold: float = 1e-10


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class RunConfig:
    metric: MetricSection = field(default_factory=MetricSection)
    grid: GridSection = field(default_factory=GridSection)
    operator: OperatorSection = field(default_factory=OperatorSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    output: OutputSection = field(default_factory=OutputSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)
    run: RunSection = field(default_factory=RunSection)

    # derived quantities -------------------------------------------------

    @property
    def r_max(self) -> float:
        ev = self.evolution.r_max
        return self.grid.r_outer - self.metric.r0 if ev == AUTO else float(ev)

    @property
    def r_mid(self) -> float:
        sm = self.spectral.r_mid
        return self.metric.r0 + self.r_max / 2 if sm == AUTO else float(sm)


_CHOICES = {
    ("metric", "kind"): ("kerr_ef", "ef_schwarzschild", "ef_charged_3d", "flat"),
    ("operator", "potential"): ("zero", "scalar"),
    ("evolution", "scheme"): ("crank_nicolson", "rk4"),
    ("evolution", "series_phases"): ("exact", "cayley"),
}

_AUTO_FLOAT = {("metric", "b"), ("spectral", "r_mid"), ("evolution", "dt"), ("evolution", "r_max"),
               ("evolution", "bump_center"), ("evolution", "bump_radius")}


def _convert(section, key, raw, default, line):
    if (section, key) in _AUTO_FLOAT:
        if raw == AUTO:
            return AUTO
        kind = float
    else:
        kind = type(default)
    try:
        if kind is bool:
            if raw.lower() not in ("true", "false"):
                raise ValueError
            return raw.lower() == "true"
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ConfigError(f"{section}.{key} must be finite", line)
            return value
        return raw
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot read {raw!r} as {kind.__name__}", line) from None


def _validate(cfg: RunConfig, lines: dict) -> None:
    def err(section, key, message):
        raise ConfigError(f"{section}.{key}: {message}", lines.get((section, key)))

    for (section, key), options in _CHOICES.items():
        if getattr(getattr(cfg, section), key) not in options:
            err(section, key, f"must be one of {', '.join(options)}")
    m = cfg.metric
    if m.kind == "flat" and m.d not in (3, 4):
        err("metric", "d", "flat metric supports d = 3 or 4")
    if m.kind != "flat" and not m.M > 0:
        err("metric", "M", "mass must be positive")
    if m.kind == "kerr_ef" and not abs(m.a) < m.M:
        err("metric", "a", f"|a| < M required (a={m.a}, M={m.M})")
    if m.kind == "ef_charged_3d" and not abs(m.Q) < m.M:
        err("metric", "Q", f"|Q| < M required (Q={m.Q}, M={m.M})")
    if not m.r0 > 0:
        err("metric", "r0", "r0 must be positive")
    g = cfg.grid
    if g.Nr < 4:
        err("grid", "Nr", "at least 4 radial nodes")
    if g.Ntheta < 4:
        err("grid", "Ntheta", "at least 4 polar nodes")
    if not g.r_outer > m.r0:
        err("grid", "r_outer", "r_outer must exceed metric.r0")
    if cfg.operator.order not in (2, 4):
        err("operator", "order", "stencil order must be 2 or 4")
    if cfg.spectral.p_max < 0:
        err("spectral", "p_max", "p_max >= 0")
    ev = cfg.evolution
    for key in ("dt", "r_max", "bump_radius"):
        value = getattr(ev, key)
        if value != AUTO and not value > 0:
            err("evolution", key, "must be positive")
    if ev.r_max != AUTO and ev.r_max > g.r_outer - m.r0 + 1e-12:
        err("evolution", "r_max", "collar depth exceeds the grid")
    if not 0 < ev.window_fraction <= 1:
        err("evolution", "window_fraction", "must lie in (0, 1]")
    if not ev.CFL > 0:
        err("evolution", "CFL", "must be positive")
    if cfg.output.snapshot_every < 1:
        err("output", "snapshot_every", "must be >= 1")
    for f in dataclasses.fields(cfg.tolerances):
        if not getattr(cfg.tolerances, f.name) > 0:
            err("tolerances", f.name, "must be positive")


def parse_config(text: str) -> RunConfig:
    """Parse and validate; errors carry the offending line number."""
    cfg = RunConfig()
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'section.key = value', got {body!r}", lineno)
        name, raw = (part.strip() for part in body.split("=", 1))
        if name.count(".") != 1:
            raise ConfigError(f"key {name!r} must have the form section.key", lineno)
        section, key = name.split(".")
        sub = getattr(cfg, section, None) if section in _sections() else None
        if sub is None:
            raise ConfigError(f"unknown section {section!r}", lineno)
        names = {f.name: f for f in dataclasses.fields(sub)}
        if key not in names:
            raise ConfigError(f"unknown key {section}.{key}", lineno)
        if (section, key) in lines:
            raise ConfigError(f"duplicate key {section}.{key}", lineno)
        default = names[key].default
        setattr(sub, key, _convert(section, key, raw, default, lineno))
        lines[(section, key)] = lineno
    _validate(cfg, lines)
    return cfg


def _sections():
    return [f.name for f in dataclasses.fields(RunConfig)]


def serialize_config(cfg: RunConfig) -> str:
    out = []
    for section in _sections():
        sub = getattr(cfg, section)
        for f in dataclasses.fields(sub):
            value = getattr(sub, f.name)
            text = repr(value) if isinstance(value, float) else str(value)
            out.append(f"{section}.{f.name} = {text}")
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# snapshots

SNAPSHOT_MAGIC = b"DIRH"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIII")


def write_snapshot(path, psi, d: int, f: int, Nr: int, Ntheta: int, k: int) -> None:
    """Write ``psi`` (node-major, component-minor) as little-endian ``(re, im)`` pairs.

    ``Ntheta`` is 1 for grids without a polar axis; ``k`` is stored as a
    32-bit two's complement pattern so negative modes survive the round trip.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != f * Nr * Ntheta:
        raise ValueError(f"snapshot size {psi.size} does not match f*Nr*Ntheta = {f * Nr * Ntheta}")
    pairs = np.empty(2 * psi.size, dtype="<f8")
    pairs[0::2] = psi.real
    pairs[1::2] = psi.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, d, f, Nr, Ntheta, k & 0xFFFFFFFF))
        fh.write(pairs.tobytes())


def read_snapshot(path):
    """Return ``(header, psi)``; ``header`` has keys ``version, d, f, Nr, Ntheta, k``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for a snapshot header")
    magic, version, d, f, Nr, Nth, k = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if k >= 2 ** 31:
        k -= 2 ** 32
    pairs = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if pairs.size != 2 * f * Nr * Nth:
        raise ValueError("payload length does not match header")
    psi = pairs[0::2] + 1j * pairs[1::2]
    return dict(version=version, d=d, f=f, Nr=Nr, Ntheta=Nth, k=k), psi
