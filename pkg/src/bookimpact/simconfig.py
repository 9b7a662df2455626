"""Plain-text key=value configuration files for the stream generator.

Example::

    # synthetic small-tick stream
    preset = small_tick
    n_events = 200000
    seed = 7
    n_days = 10

Without a preset, every generator field can be given directly; vector
fields take comma-separated values and the planted kernel tensor comes
from an .npz file (array name ``kappa``)::

    n_events = 100000
    type_process = iid
    type_probabilities = 0.2,0.25,0.2,0.1,0.0,0.25
    sign_process = per_type
    sign_persistence = 0.7,0.7,0.7,0.7,0.7,0.7
    gap_process = kernels
    delta_r = 0,2.0,0,0,2.0,2.0
    kappa_file = kernels.npz
    gap_noise = 0.2
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigInvalid
from . import sim

__all__ = ["config_from_file", "config_to_file"]

_PRESETS = {
    "large_tick": sim.large_tick_config,
    "small_tick": sim.small_tick_config,
    "planted_kernel": sim.planted_kernel_config,
    "spread_model": sim.spread_model_config,
}

_SCALARS = {
    "n_events": int, "seed": int, "n_days": int,
    "symbol": str, "tick_size": float, "mid_open": float,
    "spread_open": float, "type_process": str, "sign_process": str,
    "side_gamma": float, "gap_process": str, "gap_noise": float,
    "alpha": float, "target_spread": float, "kappa_scale": float,
    "kernel_lag": int,
}
_VECTORS = {"type_probabilities", "delta_r", "sign_persistence",
            "mean_spread_by_type"}


def _parse_lines(path):
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{ln}: expected key = value")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def config_from_file(path, seed_override=None) -> sim.GeneratorConfig:
    pairs = _parse_lines(path)
    preset = pairs.pop("preset", None)
    kwargs = {}
    base_dir = os.path.dirname(os.path.abspath(path))
    for key, raw in pairs.items():
        if key in _SCALARS:
            kwargs[key] = _SCALARS[key](raw)
        elif key in _VECTORS:
            kwargs[key] = np.array([float(v) for v in raw.split(",")])
        elif key == "kappa_file":
            npz = np.load(os.path.join(base_dir, raw))
            kwargs["kappa"] = npz["kappa"]
        elif key == "type_transition":
            vals = [float(v) for v in raw.split(",")]
            if len(vals) != 36:
                raise ConfigInvalid("type_transition needs 36 values")
            kwargs["type_transition"] = np.array(vals).reshape(6, 6)
        else:
            raise ConfigInvalid(f"unknown config key {key!r}")
    if seed_override is not None:
        kwargs["seed"] = seed_override
    if preset is not None:
        if preset not in _PRESETS:
            raise ConfigInvalid(
                f"unknown preset {preset!r}; choose from "
                f"{sorted(_PRESETS)}")
        n = kwargs.pop("n_events", None)
        if n is None:
            raise ConfigInvalid("preset configs still need n_events")
        cfg = _PRESETS[preset](n, **kwargs)
    else:
        if "n_events" not in kwargs:
            raise ConfigInvalid("n_events is required")
        cfg = sim.GeneratorConfig(**kwargs)
    cfg.validate()
    return cfg


def config_to_file(config: sim.GeneratorConfig, path) -> None:
    """Write a config back out (kernel tensors go to a sibling .npz)."""
    lines = []
    for key, caster in _SCALARS.items():
        if key in ("target_spread", "kappa_scale", "kernel_lag"):
            continue
        val = getattr(config, key, None)
        if val is not None:
            lines.append(f"{key} = {val}")
    for key in _VECTORS:
        val = getattr(config, key, None)
        if val is not None:
            lines.append(f"{key} = " + ",".join(repr(float(v)) for v in val))
    if config.type_transition is not None:
        flat = ",".join(repr(float(v))
                        for v in np.asarray(config.type_transition).ravel())
        lines.append(f"type_transition = {flat}")
    if config.kappa is not None:
        npz_path = path + ".kappa.npz"
        np.savez(npz_path, kappa=np.asarray(config.kappa))
        lines.append(f"kappa_file = {os.path.basename(npz_path)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
