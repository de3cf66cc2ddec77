"""Line-oriented ``key = value`` experiment configuration.

One or more ``key=value`` pairs per line; ``#`` starts a comment.  Times are
in units of ``1 / kappa1``.
"""

from __future__ import annotations

import math
import re

from .emission import EmissionModel
from .engine import ExperimentConfig, StrategyPolicy

DEFAULTS = {
    "kappa1": 1.0,
    "rate_ratio": 1.1,
    "window": math.inf,
    "epsilon": 1e-5,
    "trials": 1_000_000,
    "seed": 42,
    "mode": "adaptive",
    "target": "bond",
    "max_retries": 3,
    "sign_rule": "matched",
    "realign_first": True,
}
KEYS = tuple(DEFAULTS)

_PAIR = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^\s=#]+)")


class ConfigError(ValueError):
    pass


def _to_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _to_int(s: str) -> int:
    # accept 1e6-style counts as long as they are integral
    try:
        return int(s)
    except ValueError:
        x = float(s)
        if not x.is_integer():
            raise ValueError(f"expected an integer, got {s!r}") from None
        return int(x)


_CONVERT = {
    "kappa1": float,
    "rate_ratio": float,
    "window": float,
    "epsilon": float,
    "trials": _to_int,
    "seed": _to_int,
    "mode": str,
    "target": str,
    "max_retries": _to_int,
    "sign_rule": str,
    "realign_first": _to_bool,
}


def parse_pairs(text: str) -> dict[str, object]:
    """Raw ``key -> value`` mapping; later assignments win."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        pos = 0
        for m in _PAIR.finditer(line):
            if line[pos:m.start()].strip():
                raise ConfigError(f"line {lineno}: cannot parse {line[pos:m.start()].strip()!r}")
            key, val = m.group(1), m.group(2)
            if key not in _CONVERT:
                raise ConfigError(f"line {lineno}: unknown key {key!r} (known: {', '.join(KEYS)})")
            try:
                values[key] = _CONVERT[key](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
            pos = m.end()
        if line[pos:].strip():
            raise ConfigError(f"line {lineno}: cannot parse {line[pos:].strip()!r}")
    return values


def build_config(values: dict[str, object], require=()) -> ExperimentConfig:
    missing = [k for k in require if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    v = {**DEFAULTS, **values}
    try:
        model = EmissionModel(kappa1=v["kappa1"], rate_ratio=v["rate_ratio"], window=v["window"])
        policy = StrategyPolicy(
            mode=v["mode"],
            epsilon=v["epsilon"],
            sign_rule=v["sign_rule"],
            max_retries=v["max_retries"],
            realign_first=v["realign_first"],
        )
        return ExperimentConfig(model=model, policy=policy, target=v["target"], trials=v["trials"], seed=v["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, require=()) -> ExperimentConfig:
    """Validated configuration with defaults applied for absent keys."""
    return build_config(parse_pairs(text), require)


def config_values(cfg: ExperimentConfig) -> dict[str, object]:
    m, p = cfg.model, cfg.policy
    return {
        "kappa1": m.kappa1,
        "rate_ratio": m.rate_ratio,
        "window": m.window,
        "epsilon": p.epsilon,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "mode": p.mode,
        "target": cfg.target,
        "max_retries": p.max_retries,
        "sign_rule": p.sign_rule,
        "realign_first": p.realign_first,
    }


def format_config(cfg: ExperimentConfig) -> str:
    """Text that ``parse_config`` maps back to an identical config."""
    out = []
    for k, val in config_values(cfg).items():
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        out.append(f"{k} = {val}")
    return "\n".join(out) + "\n"
