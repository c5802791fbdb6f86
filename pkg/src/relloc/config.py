"""TOML scenario configuration.

A config file holds a ``[scenario]`` table mirroring ScenarioConfig, an
optional ``[channel]`` table, and optional per-command tables
(``[formation]``, ``[leader]``).  Every key has a default, so an empty file
is a valid config reproducing the two-robot simulation study.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import fields

from .ranging import ChannelModel, simulation_channel
from .sim.world import ScenarioConfig


class ConfigError(Exception):
    """Malformed configuration; message carries file/line context."""


_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"channel"}
_CHANNEL_KEYS = {f.name for f in fields(ChannelModel)}


def load_raw(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: not found") from exc
    except tomllib.TOMLDecodeError as exc:
        # tomllib messages already carry "(at line N, column M)".
        raise ConfigError(f"{path}: {exc}") from exc


def scenario_from_raw(raw: dict, path="<config>") -> ScenarioConfig:
    scen = raw.get("scenario", {})
    unknown = set(scen) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown [scenario] keys {sorted(unknown)}")
    chan_raw = raw.get("channel")
    if chan_raw is None:
        channel = simulation_channel()
    else:
        unknown = set(chan_raw) - _CHANNEL_KEYS
        if unknown:
            raise ConfigError(
                f"{path}: unknown [channel] keys {sorted(unknown)}")
        channel = ChannelModel(**chan_raw)
    if "phase_schedule" in scen:
        scen = dict(scen)
        scen["phase_schedule"] = tuple(
            (str(name), float(t)) for name, t in scen["phase_schedule"])
    try:
        return ScenarioConfig(channel=channel, **scen)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_scenario(path) -> tuple:
    """Parse a config file; returns (ScenarioConfig, raw dict)."""
    raw = load_raw(path)
    return scenario_from_raw(raw, path), raw
