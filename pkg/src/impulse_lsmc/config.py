"""Run configuration: a flat ``key = value`` file plus ``--set key=value`` overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .model import PRESETS, ModelParams, reference_params


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=reference_params)
    rewards: str = "gbm"
    n_steps: int = 10
    m_paths: int = 2 ** 16
    m_new: int = 2 ** 10
    m_arbitrary: int = 2 ** 10
    stability_paths: int = 0  # 0 means m_new
    q: float = 100.0
    seed: int = 0
    output_dir: str = "out"
    threads: int = 1
    substeps: int = 1
    itm_filter: bool = False
    fitted_v1: bool = True
    normalize: bool = True
    dump_paths: bool = False

    def validate(self) -> "RunConfig":
        for name in ("n_steps", "m_paths", "m_new", "m_arbitrary", "threads", "substeps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.n_steps < 2:
            raise ConfigError("n_steps must be at least 2")
        if self.stability_paths < 0:
            raise ConfigError("stability_paths must be nonnegative")
        if not self.q > 0:
            raise ConfigError("q must be positive")
        if self.rewards not in PRESETS:
            raise ConfigError(f"rewards must be one of {sorted(PRESETS)}, got {self.rewards!r}")
        return self

    @property
    def curve_paths(self) -> int:
        return self.stability_paths or self.m_new

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = dataclasses.asdict(self.params)
        return d


_PARAM_KEYS = {"mu0": "mu0", "mus": "mus", "probs": "probs", "lam": "lam", "lambda": "lam",
               "sigma": "sigma", "x0": "x0", "horizon": "horizon", "T": "horizon"}
_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _convert(key: str, raw: str, kind):
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        if kind is int:
            return int(raw, 0)
        return kind(raw.strip())
    except (KeyError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_pairs(lines) -> dict:
    """``key = value`` lines to a dict; ``#`` starts a comment."""
    out = {}
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_config(pairs: dict) -> RunConfig:
    cfg = RunConfig()
    params = dataclasses.asdict(cfg.params)
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    for key, raw in pairs.items():
        if key in _PARAM_KEYS:
            name = _PARAM_KEYS[key]
            try:
                params[name] = _floats(raw) if name in ("mus", "probs") else float(raw)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {raw!r}") from None
        elif key in types and key != "params":
            kind = {"int": int, "float": float, "bool": bool, "str": str}[types[key]]
            setattr(cfg, key, _convert(key, raw, kind))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        cfg.params = ModelParams(**params)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None
    return cfg.validate()


def load_config(path=None, overrides=(), **direct) -> RunConfig:
    pairs = {}
    if path is not None:
        pairs.update(parse_pairs(Path(path).read_text(encoding="utf-8").splitlines()))
    pairs.update(parse_pairs(overrides))
    pairs.update({k: str(v) for k, v in direct.items() if v is not None})
    return build_config(pairs)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of ``load_config`` for the run manifest and example files."""
    p = cfg.params
    lines = [f"mu0 = {p.mu0!r}", f"mus = {','.join(repr(u) for u in p.mus)}",
             f"probs = {','.join(repr(v) for v in p.probs)}", f"lambda = {p.lam!r}",
             f"sigma = {p.sigma!r}", f"x0 = {p.x0!r}", f"horizon = {p.horizon!r}"]
    for f in dataclasses.fields(RunConfig):
        if f.name != "params":
            lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
