"""Typed INI configuration with a closed schema (unknown sections or keys are errors)."""

from __future__ import annotations

import configparser
import copy
from pathlib import Path
from typing import Any, Optional


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split()) if text.strip() else ()


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    parse.__name__ = "choice"
    return parse


# section -> key -> (parser, default); a default of None means "take it from elsewhere"
SCHEMA: dict = {
    "system": {
        "kind": (_choice("capillary", "powerlaw"), "capillary"),
        "sigma": (float, 1.0),
        "rho": (float, 1.0),
        "alpha": (float, 2.0),
        "coefficient": (float, 1.0),
        "vertex": (float, 1.0),
        "epsilon": (float, 1.0),
    },
    "spectrum": {
        "kind": (_choice("zf", "powerlaw", "exponential", "file"), "zf"),
        "flux": (float, 1.0),
        "kz_constant": (float, 13.98),
        "amplitude": (float, 1.0),
        "exponent": (float, 4.25),
        "scale": (float, 1.0),
        "file": (str, ""),
        "extrapolation": (_choice("powerlaw", "zero"), "powerlaw"),
    },
    "grid": {
        "k_min": (float, 1.0),
        "k_max": (float, 100.0),
        "nodes": (int, 33),
    },
    "quadrature": {
        "epsrel": (float, None),
        "cutoff_rel": (float, None),
        "span": (float, None),
        "max_panels": (int, None),
    },
    "integrator": {
        "rtol": (float, 1e-10),
        "t_end": (float, 1.0),
        "checkpoints": (int, 11),
    },
    "scenario": {
        "P": (int, 8),
        "initial": (_choice("gaussian", "deterministic", "custom"), "gaussian"),
        "f_table": (_floats, ()),
        "rates": (_choice("frozen-stationary", "frozen", "self-consistent"), "frozen-stationary"),
        "gamma_source": (_choice("reference", "computed"), "reference"),
        "theta_end": (float, 1.0),
        "transport_P": (int, 512),
        "transport_p0": (float, 32.0),
        "transport_width": (float, 0.5),
        "oracle_samples": (int, 2**22),
        "oracle_triads": (int, 50),
        "oracle_k": (_floats, (0.3, 1.0, 3.0)),
    },
}


def default_config() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def load_config(path: Optional[str], base: Optional[dict] = None) -> dict:
    """``base`` (or the schema defaults) overlaid with the file at ``path``, if any."""
    cfg = copy.deepcopy(base) if base is not None else default_config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str          # keys are case-sensitive (P)
    try:
        parser.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
            conv, _ = SCHEMA[section][key]
            try:
                cfg[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from exc
    return cfg


def jsonable_config(cfg: dict) -> dict:
    def conv(v: Any):
        return list(v) if isinstance(v, tuple) else v
    return {s: {k: conv(v) for k, v in keys.items()} for s, keys in cfg.items()}
