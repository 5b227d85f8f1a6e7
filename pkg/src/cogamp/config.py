"""Sectioned ``key = value`` configuration files.

Sections are ``environment``, ``dynamics``, ``regime``, ``engine``, ``sweep``
and ``optimize``; every key is optional and unknown keys are rejected. Keys
may also be written before any section header in dotted form
(``dynamics.delta = 0.002``). Lists are comma separated. ``configs`` entries
in ``[sweep]`` read ``LABEL:sensitivity:delta``.

See ``configs/defaults.ini`` for the full schema with every default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable

from .agents import ConfigError, DynamicsConfig, RegimeSpec
from .engine import SimConfig
from .environment import EnvError, EnvSpec
from .lab import DEFAULT_DELTA_GRID, DEFAULT_CONFIGS, OptSpec, ParamConfig, SweepSpec

ROOT = "__root__"


def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s, 0)


def _list(conv: Callable[[str], object]) -> Callable[[str], tuple]:
    def parse(s: str) -> tuple:
        return tuple(conv(x.strip()) for x in s.split(",") if x.strip())
    return parse


def _str(s: str) -> str:
    return s.strip()


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_ENV_KEYS = {
    "k": _int, "family_weights": _list(_float), "base_difficulty": _list(_float),
    "requirement_range": _list(_float), "difficulty_jitter": _float, "epsilon_max": _float,
    "lambda_m": _float, "lambda_c": _float, "mixed_size": _int,
    "phase3_weights": _list(_float), "novelty_weights": _list(_float),
}
_DYN_KEYS = {f.name: (_str if f.name == "atrophy_scope" else _float) for f in fields(DynamicsConfig)}
_ENGINE_KEYS = {
    "n_agents": _int, "phase_ticks": _list(_int), "eval_interval": _int, "eval_tasks": _int,
    "probe_tasks": _int, "final_window_fraction": _float, "hcdr_window": _str, "seed": _int,
}

SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "environment": _ENV_KEYS,
    "dynamics": _DYN_KEYS,
    "regime": {"name": _str},
    "engine": _ENGINE_KEYS,
    "sweep": {"regimes": _list(_str), "configs": _list(_str), "root_seed": _int, "n_seeds": _int},
    "optimize": {"delta_grid": _list(_float), "root_seed": _int, "n_seeds": _int},
}


def default_values() -> dict[str, dict[str, object]]:
    env, dyn, sim = EnvSpec(), DynamicsConfig(), SimConfig()
    return {
        "environment": {k: getattr(env, k) for k in _ENV_KEYS},
        "dynamics": {k: getattr(dyn, k) for k in _DYN_KEYS},
        "regime": {"name": sim.regime.name.value},
        "engine": {k: getattr(sim, k) for k in _ENGINE_KEYS},
        "sweep": {
            "regimes": ("full_delegation", "minimal_ai", "mixed"),
            "configs": tuple(f"{l}:{s}:{d}" for l, s, d in DEFAULT_CONFIGS),
            "root_seed": 1,
            "n_seeds": 20,
        },
        "optimize": {"delta_grid": DEFAULT_DELTA_GRID, "root_seed": 1, "n_seeds": 20},
    }


@dataclass(frozen=True)
class ResolvedConfig:
    values: dict
    sim: SimConfig
    sweep: SweepSpec
    optimize: OptSpec

    def dump(self) -> str:
        return dump_values(self.values)


def dump_values(values: dict) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {_fmt(values[section][k])}" for k in keys]
        lines.append("")
    return "\n".join(lines)


def _locate(text: str, section: str, key: str) -> int | None:
    current = ROOT
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            continue
        name = line.split("=", 1)[0].strip() if "=" in line else None
        if name is None:
            continue
        if (current == section and name == key) or (current == ROOT and name == f"{section}.{key}"):
            return no
    return None


def _where(source: str, line: int | None) -> str:
    return f"{source}:{line}" if line else source


def _assign(values: dict, section: str, key: str, raw: str, where: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"{where}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{where}: unknown key {section}.{key}")
    try:
        values[section][key] = SCHEMA[section][key](raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {section}.{key}: cannot parse {raw!r} ({exc})") from None


def read_values(text: str, source: str = "<config>", values: dict | None = None) -> dict:
    """Merge the file ``text`` into ``values`` (defaults when omitted)."""
    values = values if values is not None else default_values()
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__none__"
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{ROOT}]\n" + text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}:{exc.lineno - 1}: duplicate key {exc.option}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}:{exc.lineno - 1}: duplicate section [{exc.section}]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno - 1}: cannot parse line {line.strip()!r}") from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == ROOT:
                if "." not in key:
                    line = _locate(text, ROOT, key)
                    raise ConfigError(
                        f"{_where(source, line)}: key {key!r} outside a section needs a "
                        "'section.' prefix"
                    )
                sec, name = key.split(".", 1)
            else:
                sec, name = section, key
            _assign(values, sec, name, raw, _where(source, _locate(text, sec, name)))
    return values


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        _assign(values, section, key, raw.strip(), "--set")
    return values


def apply_fast(values: dict) -> dict:
    values["engine"]["phase_ticks"] = tuple(max(1, t // 2) for t in values["engine"]["phase_ticks"])
    for section in ("sweep", "optimize"):
        values[section]["n_seeds"] = min(5, values[section]["n_seeds"])
    return values


def _parse_param_config(entry: str) -> ParamConfig:
    parts = entry.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep.configs entry {entry!r} must read LABEL:sensitivity:delta")
    try:
        return ParamConfig(parts[0].strip(), float(parts[1]), float(parts[2]))
    except ValueError:
        raise ConfigError(f"sweep.configs entry {entry!r} has non-numeric values") from None


def build(values: dict) -> ResolvedConfig:
    try:
        env = EnvSpec(**values["environment"])
    except (EnvError, TypeError) as exc:
        raise ConfigError(f"environment: {exc}") from None
    dyn = DynamicsConfig(**values["dynamics"])
    try:
        regime = RegimeSpec(values["regime"]["name"])
    except ValueError:
        raise ConfigError(f"regime.name: unknown regime {values['regime']['name']!r}") from None
    sim = SimConfig(env=env, dynamics=dyn, regime=regime, **values["engine"])

    sw = values["sweep"]
    try:
        regimes = tuple(RegimeSpec(r) for r in sw["regimes"])
    except ValueError as exc:
        raise ConfigError(f"sweep.regimes: {exc}") from None
    for section in ("sweep", "optimize"):
        if values[section]["n_seeds"] < 1 or values[section]["root_seed"] < 0:
            raise ConfigError(f"{section}: n_seeds must be >= 1 and root_seed >= 0")
    sweep = SweepSpec(
        base=sim,
        regimes=regimes,
        configs=tuple(_parse_param_config(c) for c in sw["configs"]),
        seeds=tuple(range(sw["root_seed"], sw["root_seed"] + sw["n_seeds"])),
    )
    op = values["optimize"]
    optimize = OptSpec(
        base=sim,
        delta_grid=tuple(op["delta_grid"]),
        seeds=tuple(range(op["root_seed"], op["root_seed"] + op["n_seeds"])),
    )
    return ResolvedConfig(values, sim, sweep, optimize)


def parse_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    fast: bool = False,
) -> ResolvedConfig:
    """Resolve a config file plus overrides into runnable specs.

    Precedence: overrides beat the file, the file beats defaults. ``fast``
    halves phase lengths and caps seed lists at 5 after everything else.
    """
    values = default_values()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        read_values(text, str(p), values)
    apply_overrides(values, overrides or [])
    if fast:
        apply_fast(values)
    return build(values)


def with_seed(resolved: ResolvedConfig, seed: int, command: str) -> ResolvedConfig:
    values = {s: dict(v) for s, v in resolved.values.items()}
    if command == "run":
        values["engine"]["seed"] = seed
    else:
        values[command]["root_seed"] = seed
    return build(values)
