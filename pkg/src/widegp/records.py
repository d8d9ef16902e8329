"""Serializable records of individual runs and grid cells."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1

__all__ = ["RunRecord", "FORMAT_VERSION", "to_jsonable"]


def to_jsonable(value):
    """Recursively convert numpy scalars/arrays for json.dumps."""
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


@dataclass
class RunRecord:
    """Self-describing snapshot of one evaluated configuration."""

    config: dict
    split_seed: int = 0
    metrics: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    artifact_paths: list[str] = field(default_factory=list)
    error: str | None = None
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return to_jsonable({
            "format_version": self.format_version,
            "config": self.config,
            "split_seed": self.split_seed,
            "metrics": self.metrics,
            "wall_clock": self.wall_clock,
            "artifact_paths": self.artifact_paths,
            "error": self.error,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(config=d["config"], split_seed=d["split_seed"],
                   metrics=d["metrics"], wall_clock=d["wall_clock"],
                   artifact_paths=list(d["artifact_paths"]),
                   error=d.get("error"),
                   format_version=d.get("format_version", FORMAT_VERSION))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "RunRecord":
        return cls.from_dict(json.loads(payload))
