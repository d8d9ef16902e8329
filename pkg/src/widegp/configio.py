"""Flat key=value config files for the CLI.

Keys are namespaced (``kernel.depth=4``, ``ess.burn_in=500``,
``heuristic.kind=exact``, ``grid.depth=1,4,16``) plus the top-level
``noise_variance``.  Unknown keys are errors.
"""

from __future__ import annotations

from .classification import EssConfig
from .confidence import HeuristicConfig
from .gridsearch import GridSpec
from .kernels import KernelConfig

__all__ = ["parse_config_file", "kernel_config_from", "ess_config_from",
           "heuristic_config_from", "grid_from"]

_KERNEL_KEYS = {
    "family": str, "activation": str, "depth": int,
    "weight_variance": float, "bias_variance": float,
    "readout_weight_variance": float, "readout_bias_variance": float,
    "kernel_scale": float, "diagonal_regularizer": float,
    "rbf_beta": float, "rbf_gamma": float,
}
_ESS_KEYS = {"n_chains": int, "burn_in": int, "n_samples": int,
             "thinning": int, "seed": int}
_HEURISTIC_KEYS = {"kind": str, "temperature": float, "n_mc": int,
                   "seed": int, "sqrt_temperature": bool}
_GRID_AXES = {
    "activation": str, "depth": int, "weight_variance": float,
    "bias_variance": float, "readout": str, "noise_std": float,
    "rbf_beta": float, "rbf_gamma": float, "kernel_scale": float,
    "diagonal_regularizer": float,
}
_TOP_KEYS = {"noise_variance": float}


def _convert(raw: str, typ, key: str):
    if typ is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from exc


def parse_config_file(path) -> dict:
    """Parse and validate; returns a dict of typed values keyed by the
    full namespaced key."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key in _TOP_KEYS:
                out[key] = _convert(raw, _TOP_KEYS[key], key)
            elif key.startswith("kernel.") and key[7:] in _KERNEL_KEYS:
                out[key] = _convert(raw, _KERNEL_KEYS[key[7:]], key)
            elif key.startswith("ess.") and key[4:] in _ESS_KEYS:
                out[key] = _convert(raw, _ESS_KEYS[key[4:]], key)
            elif key.startswith("heuristic.") and key[10:] in _HEURISTIC_KEYS:
                out[key] = _convert(raw, _HEURISTIC_KEYS[key[10:]], key)
            elif key == "grid.metric":
                out[key] = raw
            elif key == "grid.preset":
                out[key] = raw
            elif key.startswith("grid.") and key[5:] in _GRID_AXES:
                typ = _GRID_AXES[key[5:]]
                out[key] = [_convert(v.strip(), typ, key)
                            for v in raw.split(",")]
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return out


def _section(config: dict, prefix: str) -> dict:
    n = len(prefix)
    return {k[n:]: v for k, v in config.items() if k.startswith(prefix)}


def kernel_config_from(config: dict) -> KernelConfig:
    return KernelConfig(**_section(config, "kernel."))


def ess_config_from(config: dict) -> EssConfig:
    return EssConfig(**_section(config, "ess."))


def heuristic_config_from(config: dict, **overrides) -> HeuristicConfig:
    fields = _section(config, "heuristic.")
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return HeuristicConfig(**fields)


def grid_from(config: dict) -> GridSpec | None:
    """A GridSpec from grid.* keys, or None when no axes are given."""
    axes = {k: v for k, v in _section(config, "grid.").items()
            if k not in ("metric", "preset")}
    if not axes:
        return None
    return GridSpec(axes=axes, metric=config.get("grid.metric", "nll"))
