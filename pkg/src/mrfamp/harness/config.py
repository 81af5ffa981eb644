"""Experiment configuration: YAML in, validated dataclasses out.

Validation collects every problem before raising, so one run of the CLI
reports everything that is wrong with a config file.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from ..amp import TAU_SOURCES
from ..denoisers import KINDS
from ..errors import ConfigError
from ..state_evolution import NOISE_FILLS

__all__ = [
    "LatticeConfig",
    "MrfConfig",
    "WindowConfig",
    "DenoiserConfig",
    "AmpSection",
    "SeSection",
    "VerifySection",
    "TextureSection",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "dump_config",
]


@dataclass(frozen=True)
class LatticeConfig:
    dim: int = 2
    N: int = 64


@dataclass(frozen=True)
class MrfConfig:
    p: float = 0.4
    q: float = 0.5
    r: float = 0.01
    s: float = 0.4

    def as_tuple(self):
        return (self.p, self.q, self.r, self.s)


@dataclass(frozen=True)
class WindowConfig:
    k: int = 1
    mask: tuple | None = None  # nested lists of 0/1, shape (2k+1,)*dim


@dataclass(frozen=True)
class DenoiserConfig:
    kind: str = "bayes_window"
    tv_lambda: float = 0.1
    tv_iters: int = 50


@dataclass(frozen=True)
class AmpSection:
    max_iters: int = 11
    tau_source: str = "state_evolution"
    stop_eps: float = 0.0
    onsager: bool = True


@dataclass(frozen=True)
class SeSection:
    mc_samples: int = 20000
    noise_fill: str = "joint"


@dataclass(frozen=True)
class VerifySection:
    t_first: int = 1
    t_last: int = 10
    tolerance: float = 0.10
    tolerance_first: float = 0.15
    band: float = 0.10


@dataclass(frozen=True)
class TextureSection:
    input: str | None = None
    threshold: bool = False
    denoisers: tuple = ("total_variation", "bayes_window", "bayes_separable")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    mrf: MrfConfig = field(default_factory=MrfConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    delta: float = 0.5
    snr_db: float = 17.0
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    amp: AmpSection = field(default_factory=AmpSection)
    se: SeSection = field(default_factory=SeSection)
    trials: int = 20
    master_seed: int = 0
    verify: VerifySection = field(default_factory=VerifySection)
    texture: TextureSection = field(default_factory=TextureSection)

    def to_dict(self) -> dict:
        out = asdict(self)
        win = out["window"]
        if win["mask"] is not None:
            win["mask"] = np.asarray(win["mask"]).astype(int).tolist()
        out["texture"]["denoisers"] = list(out["texture"]["denoisers"])
        return out

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, master_seed=int(seed))

    def mask_array(self):
        if self.window.mask is None:
            return None
        return np.asarray(self.window.mask, dtype=bool)


_SECTIONS = {
    "lattice": LatticeConfig,
    "mrf": MrfConfig,
    "window": WindowConfig,
    "denoiser": DenoiserConfig,
    "amp": AmpSection,
    "se": SeSection,
    "verify": VerifySection,
    "texture": TextureSection,
}
_SCALARS = {"name": str, "delta": float, "snr_db": float, "trials": int, "master_seed": int}


def _coerce(value, typ, where, problems):
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if typ is float:
            if isinstance(value, bool):
                raise TypeError
            if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf"):
                return math.inf
            return float(value)
        if typ is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        problems.append(f"{where}: expected {typ.__name__}, got {value!r}")
        return None
    return value


_FIELD_TYPES = {
    "dim": int, "N": int, "p": float, "q": float, "r": float, "s": float, "k": int,
    "kind": str, "tv_lambda": float, "tv_iters": int, "max_iters": int, "tau_source": str,
    "stop_eps": float, "onsager": bool, "mc_samples": int, "noise_fill": str, "t_first": int,
    "t_last": int, "tolerance": float, "tolerance_first": float, "band": float, "threshold": bool,
}


def _parse_section(name, cls, raw, problems):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        problems.append(f"{name}: expected a mapping")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            problems.append(f"{name}.{key}: unknown key")
    values = {}
    for key in known & set(raw):
        val = raw[key]
        where = f"{name}.{key}"
        if key == "mask":
            if val is not None:
                try:
                    arr = np.asarray(val, dtype=int)
                    if not np.isin(arr, (0, 1)).all():
                        raise ValueError
                    values[key] = _freeze(arr.tolist())
                except (TypeError, ValueError):
                    problems.append(f"{where}: expected nested lists of 0/1")
            continue
        if key == "input":
            if val is not None and not isinstance(val, str):
                problems.append(f"{where}: expected a path string")
            else:
                values[key] = val
            continue
        if key == "denoisers":
            if not isinstance(val, (list, tuple)) or not val:
                problems.append(f"{where}: expected a non-empty list")
            else:
                values[key] = tuple(val)
            continue
        out = _coerce(val, _FIELD_TYPES[key], where, problems)
        if out is not None:
            values[key] = out
    return cls(**values)


def _freeze(obj):
    if isinstance(obj, list):
        return tuple(_freeze(o) for o in obj)
    return obj


def _validate(cfg: ExperimentConfig, problems: list):
    lat = cfg.lattice
    if lat.dim not in (1, 2):
        problems.append(f"lattice.dim: must be 1 or 2, got {lat.dim}")
    if lat.N < 1:
        problems.append(f"lattice.N: must be >= 1, got {lat.N}")
    for name, val in zip("pqrs", cfg.mrf.as_tuple()):
        if not 0.0 < val < 1.0:
            problems.append(f"mrf.{name}: must lie strictly inside (0, 1), got {val}")
    k = cfg.window.k
    if k < 0:
        problems.append(f"window.k: must be >= 0, got {k}")
    elif 2 * k + 1 > lat.N:
        problems.append(f"window.k: window width {2 * k + 1} exceeds lattice side {lat.N}")
    if lat.dim == 2 and k > 1:
        problems.append("window.k: 2-D windows are limited to k <= 1")
    if cfg.window.mask is not None and k >= 0:
        mask = np.asarray(cfg.window.mask)
        if mask.shape != (2 * k + 1,) * lat.dim:
            problems.append(f"window.mask: expected shape {(2 * k + 1,) * lat.dim}, got {mask.shape}")
        elif not mask[(k,) * lat.dim]:
            problems.append("window.mask: must include the window centre")
    if not cfg.delta > 0:
        problems.append(f"delta: must be positive, got {cfg.delta}")
    elif lat.N >= 1 and math.floor(cfg.delta * lat.N**lat.dim + 1e-9) < 1:
        problems.append("delta: gives no measurements")
    if math.isnan(cfg.snr_db) or cfg.snr_db == -math.inf:
        problems.append(f"snr_db: must be finite or +inf, got {cfg.snr_db}")
    den = cfg.denoiser
    if den.kind not in KINDS:
        problems.append(f"denoiser.kind: must be one of {KINDS}, got {den.kind!r}")
    if den.kind == "bayes_separable" and k != 0:
        problems.append("denoiser.kind: bayes_separable requires window.k = 0")
    if den.kind == "total_variation" and lat.dim != 2:
        problems.append("denoiser.kind: total_variation needs a 2-D lattice")
    if den.kind == "total_variation" and cfg.amp.tau_source != "empirical":
        problems.append("amp.tau_source: total_variation has no state evolution; use empirical")
    if den.tv_lambda < 0:
        problems.append(f"denoiser.tv_lambda: must be >= 0, got {den.tv_lambda}")
    if den.tv_iters < 1:
        problems.append(f"denoiser.tv_iters: must be >= 1, got {den.tv_iters}")
    amp = cfg.amp
    if amp.max_iters < 1:
        problems.append(f"amp.max_iters: must be >= 1, got {amp.max_iters}")
    if amp.tau_source not in TAU_SOURCES:
        problems.append(f"amp.tau_source: must be one of {TAU_SOURCES}, got {amp.tau_source!r}")
    if amp.stop_eps < 0:
        problems.append(f"amp.stop_eps: must be >= 0, got {amp.stop_eps}")
    if cfg.se.mc_samples < 1:
        problems.append(f"se.mc_samples: must be >= 1, got {cfg.se.mc_samples}")
    if cfg.se.noise_fill not in NOISE_FILLS:
        problems.append(f"se.noise_fill: must be one of {NOISE_FILLS}, got {cfg.se.noise_fill!r}")
    if cfg.trials < 1:
        problems.append(f"trials: must be >= 1, got {cfg.trials}")
    if cfg.master_seed < 0:
        problems.append(f"master_seed: must be >= 0, got {cfg.master_seed}")
    ver = cfg.verify
    if not 0 <= ver.t_first <= ver.t_last:
        problems.append(f"verify: need 0 <= t_first <= t_last, got {ver.t_first}, {ver.t_last}")
    if ver.t_last > amp.max_iters - 1:
        problems.append(f"verify.t_last: needs amp.max_iters >= {ver.t_last + 1}")
    for name in ("tolerance", "tolerance_first", "band"):
        if not getattr(ver, name) > 0:
            problems.append(f"verify.{name}: must be positive")
    for kind in cfg.texture.denoisers:
        if kind not in KINDS:
            problems.append(f"texture.denoisers: unknown kind {kind!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Build and validate a config from a plain mapping (e.g. parsed YAML)."""
    problems: list[str] = []
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a mapping"])
    known = set(_SECTIONS) | set(_SCALARS)
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown key")
    values = {}
    for name, cls in _SECTIONS.items():
        values[name] = _parse_section(name, cls, raw.get(name), problems)
    for name, typ in _SCALARS.items():
        if name in raw:
            out = _coerce(raw[name], typ, name, problems)
            if out is not None:
                values[name] = out
    cfg = ExperimentConfig(**values)
    _validate(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: invalid YAML ({exc})"]) from exc
    return parse_config(copy.deepcopy(raw))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
