# src/udn_se_economics/config.py
"""
実験設定（config.json）の読込と検証。

優先順位: コマンドラインのフラグ > sweep.<コマンド> の掃引軸 > network/demand/costs の既定値。
エラーはファイル名と行番号付きの ConfigError にする。
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .econ_opt import SpectrumForm
from .errors import ConfigError, DomainError, UsageError
from .optimizer import OptimizerConfig
from .params import QuadratureConfig, check_alpha
from .stochastic_sim import SimConfig

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "UDN_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("./out")

COMMANDS = ("se_sweep", "montecarlo", "optimize")
AXES = ("lambda_b", "lambda_u", "alpha", "b")

Axis = tuple[float, ...]

_DEFAULT_SWEEPS: dict[str, dict[str, Axis]] = {
    "se_sweep": {
        "alpha": (3.0, 4.0, 6.0),
        "lambda_b": tuple(float(v) for v in np.logspace(-2.0, 1.0, 31)),
    },
    "montecarlo": {},
    "optimize": {
        "lambda_u": tuple(float(v) for v in np.logspace(math.log10(0.5), math.log10(50.0), 9)),
    },
}

_SIM_KEYS = {f.name for f in fields(SimConfig)}
_QUAD_KEYS = {f.name for f in fields(QuadratureConfig)}
_OPT_KEYS = {f.name for f in fields(OptimizerConfig)}

_BLOCKS: dict[str, set[str]] = {
    "network": {"lambda_b", "lambda_u", "alpha"},
    "demand": {"b"},
    "costs": {"c_b", "c_w", "spectrum_form"},
    "sim": _SIM_KEYS | {"scheduler", "dump_trials"},
    "quadrature": _QUAD_KEYS,
    "optimizer": _OPT_KEYS,
    "sweep": set(COMMANDS) | {"figure_points", "threads"},
}


def _freeze(sweeps: Mapping[str, Mapping[str, Axis]]) -> Mapping[str, Mapping[str, Axis]]:
    return MappingProxyType({k: MappingProxyType(dict(v)) for k, v in sweeps.items()})


@dataclass(frozen=True)
class ExperimentConfig:
    """
    全サブコマンド共通の実験設定。
    axis(command, name) が掃引値のタプルを返す（単一値でも長さ 1 のタプル）。
    """

    lambda_b: float = 0.2
    lambda_u: float = 0.02
    alpha: float = 4.0
    b: float = 10.0
    c_b: float = 0.1
    c_w: float = 0.1
    spectrum_form: SpectrumForm = "printed"
    scheduler: bool = False
    dump_trials: int = 0
    figure_points: int = 9
    sweep_threads: int = 1
    sim: SimConfig = field(default_factory=SimConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sweeps: Mapping[str, Mapping[str, Axis]] = field(default_factory=lambda: _freeze(_DEFAULT_SWEEPS))
    overrides: Mapping[str, Axis] = field(default_factory=lambda: MappingProxyType({}))
    source: str | None = None

    def axis(self, command: str, name: str) -> Axis:
        if name in self.overrides:
            return self.overrides[name]
        block = self.sweeps.get(command, {})
        if name in block:
            return block[name]
        return (float(getattr(self, name)),)


# ------------------------------------------------------------
# 値の検証
# ------------------------------------------------------------

def _line_of(text: str, *keys: str) -> int | None:
    """"key": を順に探して最後のキーの行番号（1 始まり）を返す。"""
    pos = 0
    for key in keys:
        m = re.compile(rf'"{re.escape(key)}"\s*:').search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def check_axis_value(name: str, value: float) -> None:
    if name == "alpha":
        check_alpha(value)
    elif not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive: {name}={value!r}")


def range_values(spec: Mapping[str, Any]) -> Axis:
    """{"start", "stop", "points", "scale"} を昇順の値列に展開する。端点は指定値そのもの。"""
    unknown = set(spec) - {"start", "stop", "points", "scale"}
    if unknown:
        raise DomainError(f"unknown range keys: {sorted(unknown)}")
    try:
        start, stop, points = float(spec["start"]), float(spec["stop"]), int(spec["points"])
    except KeyError as e:
        raise DomainError(f"range needs start/stop/points: missing {e.args[0]!r}") from e
    scale = spec.get("scale", "log")
    if points < 1:
        raise UsageError(f"range must have at least one point: points={points}")
    if not start <= stop:
        raise DomainError(f"range must satisfy start <= stop: {start!r} > {stop!r}")
    if points == 1:
        return (start,)
    if scale == "log":
        if not start > 0:
            raise DomainError(f"log range needs start > 0: start={start!r}")
        vals = np.logspace(math.log10(start), math.log10(stop), points)
    elif scale == "linear":
        vals = np.linspace(start, stop, points)
    else:
        raise DomainError(f"scale must be 'log' or 'linear': {scale!r}")
    out = [float(v) for v in vals]
    out[0], out[-1] = start, stop
    return tuple(out)


def parse_axis(name: str, raw: Any) -> Axis:
    """数値 / 数値のリスト / range オブジェクト を掃引値にする。"""
    if isinstance(raw, bool):
        raise DomainError(f"{name} must be a number, list or range: {raw!r}")
    if isinstance(raw, (int, float)):
        values: Axis = (float(raw),)
    elif isinstance(raw, list):
        values = tuple(float(v) for v in raw)
    elif isinstance(raw, dict):
        values = range_values(raw)
    else:
        raise DomainError(f"{name} must be a number, list or range: {raw!r}")
    if not values:
        raise UsageError(f"sweep axis {name} is empty")
    for v in values:
        check_axis_value(name, v)
    return values


# ------------------------------------------------------------
# ファイル読込
# ------------------------------------------------------------

def _build_sub(cls: type, raw: Mapping[str, Any]) -> Any:
    kwargs = {}
    for k, v in raw.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kwargs)


def _failing_key(exc: Exception, raw: Mapping[str, Any]) -> str:
    """例外メッセージに名前が出てくるキー。見つからなければ先頭のキー。"""
    message = str(exc)
    for key in raw:
        if re.search(rf"(?<!\w){re.escape(key)}(?!\w)", message):
            return key
    return next(iter(raw))


def config_from_dict(data: Mapping[str, Any], *, source: str | None = None, text: str = "") -> ExperimentConfig:
    """dict（JSON を読んだもの）から ExperimentConfig を組み立てる。"""

    def fail(exc: Exception, *keys: str) -> ConfigError:
        cls = UsageError if isinstance(exc, UsageError) else ConfigError
        return cls(str(exc), source, _line_of(text, *keys) if text else None)

    if not isinstance(data, Mapping):
        raise ConfigError("top level must be a JSON object", source, 1)

    for block, raw in data.items():
        if block not in _BLOCKS:
            raise ConfigError(f"unknown block {block!r} (valid: {sorted(_BLOCKS)})", source, _line_of(text, block))
        if not isinstance(raw, Mapping):
            raise ConfigError(f"block {block!r} must be an object", source, _line_of(text, block))
        unknown = set(raw) - _BLOCKS[block]
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key {block}.{key}", source, _line_of(text, block, key))

    cfg = ExperimentConfig(source=source)
    scalars: dict[str, Any] = {}

    for block in ("network", "demand"):
        for key, raw in data.get(block, {}).items():
            try:
                if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                    raise DomainError(f"{key} must be a number: {raw!r}")
                check_axis_value(key, float(raw))
            except (DomainError, TypeError) as e:
                raise fail(e, block, key) from e
            scalars[key] = float(raw)

    costs = data.get("costs", {})
    for key in ("c_b", "c_w"):
        if key in costs:
            v = costs[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be positive: {v!r}", source, _line_of(text, "costs", key))
            scalars[key] = float(v)
    if "spectrum_form" in costs:
        if costs["spectrum_form"] not in ("printed", "stationary"):
            raise ConfigError(
                f"spectrum_form must be 'printed' or 'stationary': {costs['spectrum_form']!r}",
                source, _line_of(text, "costs", "spectrum_form"),
            )
        scalars["spectrum_form"] = costs["spectrum_form"]

    sim_raw = dict(data.get("sim", {}))
    for key in ("scheduler", "dump_trials"):
        if key in sim_raw:
            scalars[key] = sim_raw.pop(key)
    if not isinstance(scalars.get("scheduler", False), bool):
        raise ConfigError("sim.scheduler must be true/false", source, _line_of(text, "sim", "scheduler"))
    if int(scalars.get("dump_trials", 0)) < 0:
        raise ConfigError("sim.dump_trials must be >= 0", source, _line_of(text, "sim", "dump_trials"))

    subs: dict[str, Any] = {}
    for block, cls, name in (
        ("sim", SimConfig, "sim"),
        ("quadrature", QuadratureConfig, "quadrature"),
        ("optimizer", OptimizerConfig, "optimizer"),
    ):
        raw = sim_raw if block == "sim" else data.get(block, {})
        if not raw:
            continue
        try:
            subs[name] = _build_sub(cls, raw)
        except (ConfigError, DomainError, TypeError, ValueError) as e:
            raise fail(e, block, _failing_key(e, raw)) from e

    sweep = data.get("sweep", {})
    sweeps = {k: dict(v) for k, v in _DEFAULT_SWEEPS.items()}
    for command in COMMANDS:
        if command not in sweep:
            continue
        block = sweep[command]
        if not isinstance(block, Mapping):
            raise ConfigError(f"sweep.{command} must be an object", source, _line_of(text, "sweep", command))
        parsed: dict[str, Axis] = {}
        for name, raw in block.items():
            if name not in AXES:
                raise ConfigError(
                    f"unknown sweep axis sweep.{command}.{name} (valid: {list(AXES)})",
                    source, _line_of(text, "sweep", command, name),
                )
            try:
                parsed[name] = parse_axis(name, raw)
            except (DomainError, UsageError, TypeError, ValueError) as e:
                raise fail(e, "sweep", command, name) from e
        sweeps[command] = parsed
    for key, attr in (("figure_points", "figure_points"), ("threads", "sweep_threads")):
        if key in sweep:
            v = sweep[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < (2 if key == "figure_points" else 0):
                raise ConfigError(f"sweep.{key} has invalid value {v!r}", source, _line_of(text, "sweep", key))
            scalars[attr] = resolve_threads(v) if key == "threads" else v

    return replace(cfg, sweeps=_freeze(sweeps), **scalars, **subs)


def load_config(path: Path | None) -> ExperimentConfig:
    """path=None なら組み込みの既定値。"""
    if path is None:
        return ExperimentConfig()
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", source) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", source, e.lineno) from e
    cfg = config_from_dict(data, source=source, text=text)
    logger.info("loaded experiment config from %s", source)
    return cfg


# ------------------------------------------------------------
# フラグ上書き
# ------------------------------------------------------------

def resolve_threads(n: int) -> int:
    """0 は自動（CPU 数）。"""
    if n < 0:
        raise ConfigError(f"threads must be >= 0: {n!r}")
    return n or (os.cpu_count() or 1)


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    axes: Mapping[str, list[float] | None] | None = None,
    c_b: float | None = None,
    c_w: float | None = None,
    seed: int | None = None,
    trials: int | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """コマンドラインの値で上書き（フラグが常に勝つ）。"""
    overrides = dict(cfg.overrides)
    for name, values in (axes or {}).items():
        if values is None:
            continue
        try:
            overrides[name] = parse_axis(name, list(values))
        except DomainError as e:
            raise ConfigError(str(e), f"--{name.replace('_', '-')}") from e

    changes: dict[str, Any] = {"overrides": MappingProxyType(overrides)}
    for name, v in (("c_b", c_b), ("c_w", c_w)):
        if v is not None:
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive: {v!r}", f"--{name.replace('_', '-')}")
            changes[name] = float(v)

    sim_changes: dict[str, Any] = {}
    if seed is not None:
        sim_changes["seed"] = seed
    if trials is not None:
        sim_changes["trials"] = trials
    if threads is not None:
        n = resolve_threads(threads)
        sim_changes["threads"] = n
        changes["sweep_threads"] = n
        changes["optimizer"] = replace(cfg.optimizer, threads=n)
    if sim_changes:
        changes["sim"] = replace(cfg.sim, **sim_changes)
    return replace(cfg, **changes)


def output_dir(out: Path | None) -> Path:
    """--out > 環境変数 UDN_OUTPUT_DIR > ./out"""
    if out is not None:
        return out
    env = os.getenv(OUTPUT_DIR_ENV)
    return Path(env) if env else DEFAULT_OUTPUT_DIR
