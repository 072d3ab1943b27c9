"""Run configuration with ini-file round-tripping.

Defaults follow the reference hyperparameters: 200000 inference steps, 200 s
time limit, bigsteps every 2000 playouts, exploration constant 3.0 for the
unguided iteration and 2.0 once models are loaded, 10000-dimensional
features, path limit 1000, discount 0.99, softmax temperature 2. Learner
defaults: eta 0.3, depth 9, lambda 1.5, 400 rounds, patience 50.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional


class ConfigError(Exception):
    pass


@dataclass
class Config:
    inference_limit: int = 200000
    time_limit_s: float = 200.0
    bigstep_freq: int = 2000
    cp_initial: float = 3.0
    cp_later: float = 2.0
    feature_dim: int = 10000
    path_limit: int = 1000
    discount: float = 0.99
    temperature: float = 2.0
    rewrite: bool = True
    guided_reduction: bool = False
    eager_reduction: Optional[bool] = None  # None = derived from guided_reduction
    single_action_optim: bool = True
    limited_policy: bool = True
    all_proofsteps: bool = True
    eta: float = 0.3
    max_depth: int = 9
    reg_lambda: float = 1.5
    rounds: int = 400
    patience: int = 50
    seed: int = 0
    workers: int = 1

    @property
    def eager(self) -> bool:
        """Effective eager-reduction flag.

        Guided reduction turns unification-requiring reductions into search
        actions, so eager reduction is forced off with it; otherwise it
        defaults on.
        """
        if self.guided_reduction:
            return False
        if self.eager_reduction is None:
            return True
        return self.eager_reduction


def _parse_value(name: str, kind, raw: str):
    raw = raw.strip()
    if kind is bool or name == "eager_reduction":
        low = raw.lower()
        if low in ("on", "true", "1", "yes"):
            return True
        if low in ("off", "false", "0", "no"):
            return False
        if name == "eager_reduction" and low == "auto":
            return None
        raise ConfigError(f"bad boolean for {name}: {raw!r}")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    raise ConfigError(f"unsupported option type for {name}")


_FIELD_KIND = {}
for f in fields(Config):
    if f.name == "eager_reduction":
        _FIELD_KIND[f.name] = bool
    else:
        _FIELD_KIND[f.name] = type(f.default)


def from_ini(text: str, base: Optional[Config] = None) -> Config:
    cfg = Config(**vars(base)) if base else Config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";", "%")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_KIND:
            raise ConfigError(f"line {lineno}: unknown option {key!r}")
        setattr(cfg, key, _parse_value(key, _FIELD_KIND[key], raw))
    return cfg


def _format_value(name: str, value) -> str:
    if name == "eager_reduction" and value is None:
        return "auto"
    if isinstance(value, bool):
        return "on" if value else "off"
    return repr(value)


def to_ini(cfg: Config) -> str:
    lines = [f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}" for f in fields(Config)]
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: Config, pairs) -> Config:
    """Apply key=value strings (CLI -s/--set) on top of a config."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value: {pair!r}")
        key, _, raw = pair.partition("=")
        key = key.strip()
        if key not in _FIELD_KIND:
            raise ConfigError(f"unknown option {key!r}")
        setattr(cfg, key, _parse_value(key, _FIELD_KIND[key], raw))
    return cfg


def load_config(path: Optional[str] = None, overrides=()) -> Config:
    cfg = Config()
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = from_ini(fh.read(), base=cfg)
    return apply_overrides(cfg, overrides)
