"""Experiment configuration files (INI dialect).

Example::

    [system]
    m_bs = 4
    m_ue = 2
    k_pilots = 2
    m_s1 = 30
    m_s2 = 20
    i_frames = 30
    j_frames = 20

    [experiment]
    snr_db = 0:5:30
    trials = 200
    estimators = ckraft, cals_random, cals_ckraft_init, baseline_uncoupled
    seed = 0

    [als]
    t_max = 10
    rel_change_tol = 1e-12

Only ``[system]`` is required. ``snr_db`` accepts a comma list or a
``start:step:stop`` range (inclusive). Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DimError
from .evaluation import ESTIMATORS
from .protocol import SystemDims

__all__ = [
    "ConfigError",
    "ParseError",
    "ValidationError",
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "config_from_dict",
    "preset_names",
    "preset_path",
    "OUTPUT_ENV",
]

OUTPUT_ENV = "DRISCE_OUTPUT_DIR"
DEFAULT_SNR = "0:5:30"

_SYSTEM_KEYS = ("m_bs", "m_ue", "m_s1", "m_s2", "i_frames", "j_frames", "k_pilots")
_ALIASES = {"i": "i_frames", "j": "j_frames", "k": "k_pilots"}
_SCHEMA = {
    "system": set(_SYSTEM_KEYS) | set(_ALIASES),
    "experiment": {"snr_db", "trials", "estimators", "seed", "output"},
    "als": {"t_max", "rel_change_tol"},
}


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


@dataclass
class ExperimentConfig:
    dims: SystemDims
    snr_db: list[float] = field(default_factory=lambda: parse_snr_grid(DEFAULT_SNR))
    trials: int = 200
    estimators: list[str] = field(default_factory=lambda: list(ESTIMATORS))
    t_max: int = 10
    rel_change_tol: float = 1e-12
    seed: int = 0
    output: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = asdict(self.dims)
        return d

    def output_dir(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, "results"))


def parse_snr_grid(text: str) -> list[float]:
    text = str(text).strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ValueError("range must be start:step:stop with positive step")
        start, step, stop = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _int(value, where: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise ParseError(f"{where}: expected an integer, got {value!r}") from None


def _float(value, where: str) -> float:
    try:
        return float(str(value).strip())
    except ValueError:
        raise ParseError(f"{where}: expected a number, got {value!r}") from None


def config_from_dict(sections: dict[str, dict[str, str]], source: str = "<config>") -> ExperimentConfig:
    """Build and validate a config from ``{section: {key: value}}`` strings."""
    for sec, items in sections.items():
        if sec not in _SCHEMA:
            raise ParseError(f"{source}: unknown section [{sec}]")
        for key in items:
            if key not in _SCHEMA[sec]:
                raise ParseError(f"{source}: unknown key '{key}' in [{sec}]")
    system = {_ALIASES.get(k, k): v for k, v in sections.get("system", {}).items()}
    missing = [k for k in _SYSTEM_KEYS if k not in system]
    if missing:
        raise ValidationError(f"{source}: [system] is missing {', '.join(missing)}")
    values = {k: _int(system[k], f"{source}: system.{k}") for k in _SYSTEM_KEYS}
    try:
        dims = SystemDims(**values)
    except DimError as exc:
        raise ValidationError(f"{source}: {exc}") from None

    cfg = ExperimentConfig(dims)
    exp = sections.get("experiment", {})
    if "snr_db" in exp:
        try:
            cfg.snr_db = parse_snr_grid(exp["snr_db"])
        except ValueError as exc:
            raise ParseError(f"{source}: experiment.snr_db: {exc}") from None
        if not cfg.snr_db:
            raise ValidationError(f"{source}: experiment.snr_db is empty")
    if "trials" in exp:
        cfg.trials = _int(exp["trials"], f"{source}: experiment.trials")
    if "seed" in exp:
        cfg.seed = _int(exp["seed"], f"{source}: experiment.seed")
    if "output" in exp:
        cfg.output = str(exp["output"]).strip() or None
    if "estimators" in exp:
        names = [e.strip() for e in str(exp["estimators"]).split(",") if e.strip()]
        unknown = [e for e in names if e not in ESTIMATORS]
        if unknown:
            raise ValidationError(f"{source}: unknown estimator(s) {unknown}; choose from {list(ESTIMATORS)}")
        if not names:
            raise ValidationError(f"{source}: experiment.estimators is empty")
        cfg.estimators = names
    als = sections.get("als", {})
    if "t_max" in als:
        cfg.t_max = _int(als["t_max"], f"{source}: als.t_max")
    if "rel_change_tol" in als:
        cfg.rel_change_tol = _float(als["rel_change_tol"], f"{source}: als.rel_change_tol")

    if cfg.trials < 1:
        raise ValidationError(f"{source}: trials must be >= 1")
    if cfg.t_max < 1:
        raise ValidationError(f"{source}: t_max must be >= 1")
    if cfg.rel_change_tol < 0:
        raise ValidationError(f"{source}: rel_change_tol must be >= 0")
    return cfg


def _read_ini(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def parse_config_text(text: str, overrides: dict[str, str] | None = None, source: str = "<string>") -> ExperimentConfig:
    sections = _read_ini(text, source)
    for dotted, value in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if not key:
            raise ParseError(f"override '{dotted}' must look like section.key")
        sections.setdefault(sec, {})[key] = value
    return config_from_dict(sections, source)


def parse_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Read an INI config (or preset name) and apply ``section.key`` overrides."""
    path = resolve_config_path(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, overrides, source=str(path))


def preset_names() -> list[str]:
    root = resources.files("drisce") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_path(name: str) -> Path:
    return Path(str(resources.files("drisce") / "presets" / f"{name}.ini"))


def resolve_config_path(path) -> Path:
    p = Path(path)
    if not p.exists() and str(path) in preset_names():
        return preset_path(str(path))
    return p
