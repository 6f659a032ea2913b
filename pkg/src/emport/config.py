"""Plain-text run configuration.

Section-headed key=value format, diff-friendly, no external parser:

    [market]
    k1 = 0.015
    ...
    [train]
    episodes = 5000

Unknown keys are rejected with their names; missing keys fall back to the
default calibration.  ``serialize(parse(f))`` is a fixed point, and the
sha256 of the canonical serialization stamps every CSV the tools emit.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .actor_critic import TrainConfig
from .hjb import Grid1D
from .market import MarketParams
from .truncnorm import DomainError


class ConfigError(ValueError):
    pass


_MARKET_KEYS = ["k1", "k2", "delta_star", "sigma_star", "r", "c", "y0", "rho",
                "s0", "m", "eta", "T", "n_steps", "a", "b"]
_GRID_KEYS = ["y_lo", "y_hi", "n_y", "n_t"]
_TRAIN_KEYS = ["episodes", "batch_n", "lr_exponent", "seed", "mode", "grad_clip"]
_EVAL_KEYS = ["n_test", "mode", "seed"]
_OUTPUT_KEYS = ["dir"]
_SECTIONS = {"market": _MARKET_KEYS, "grid": _GRID_KEYS, "train": _TRAIN_KEYS,
             "eval": _EVAL_KEYS, "output": _OUTPUT_KEYS}

_INT_KEYS = {"n_steps", "n_y", "n_t", "episodes", "batch_n", "seed", "n_test"}
_STR_KEYS = {"mode", "dir"}

@dataclass(frozen=True)
class EvalConfig:
    n_test: int = 100000
    mode: str = "deterministic"
    seed: int = 1

    def __post_init__(self):
        if self.n_test < 1:
            raise DomainError("n_test must be >= 1")
        if self.mode not in ("deterministic", "stochastic"):
            raise DomainError(f"unknown eval mode {self.mode!r}")


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams = field(default_factory=MarketParams)
    grid: Grid1D = field(default_factory=Grid1D)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "out"


def _coerce(section: str, key: str, raw: str, lineno: int):
    if key in _STR_KEYS:
        return raw
    if key == "grad_clip":
        if raw.lower() in ("none", "off"):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {section}.{key}: {raw!r}")
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value for {section}.{key}: {raw!r}")


def parse_string(text: str) -> RunConfig:
    values = {s: {} for s in _SECTIONS}
    section = None
    unknown = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                unknown.append(f"[{section}]")
                section = "__unknown__"
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if section is None:
            raise ConfigError(f"line {lineno}: key {key!r} before any section header")
        if section == "__unknown__":
            continue
        if key not in _SECTIONS[section]:
            unknown.append(f"{section}.{key}")
            continue
        values[section][key] = _coerce(section, key, raw, lineno)
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(sorted(set(unknown))))
    try:
        market = MarketParams(**values["market"])
        grid_kw = dict(values["grid"])
        grid = Grid1D(T=market.T, **grid_kw)
        train = TrainConfig(**values["train"])
        ev = EvalConfig(**values["eval"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    out_dir = values["output"].get("dir", "out")
    return RunConfig(market=market, grid=grid, train=train, eval=ev,
                     output_dir=out_dir)


def parse_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_string(fh.read())


def serialize(cfg: RunConfig) -> str:
    m, g, t, e = cfg.market, cfg.grid, cfg.train, cfg.eval
    lines = ["[market]"]
    for k in _MARKET_KEYS:
        lines.append(f"{k} = {getattr(m, k)!r}")
    lines.append("")
    lines.append("[grid]")
    for k in _GRID_KEYS:
        lines.append(f"{k} = {getattr(g, k)!r}")
    lines.append("")
    lines.append("[train]")
    for k in _TRAIN_KEYS:
        v = getattr(t, k)
        lines.append(f"{k} = {'none' if v is None else (v if isinstance(v, str) else repr(v))}")
    lines.append("")
    lines.append("[eval]")
    for k in _EVAL_KEYS:
        v = getattr(e, k)
        lines.append(f"{k} = {v if isinstance(v, str) else repr(v)}")
    lines.append("")
    lines.append("[output]")
    lines.append(f"dir = {cfg.output_dir}")
    lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize(cfg).encode()).hexdigest()[:12]
