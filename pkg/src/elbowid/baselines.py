"""Literature impedance values shipped for comparison, loaded from a data file."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

from elbowid.errors import ValidationError

SUPPORTED_VERSION = 1


@lru_cache(maxsize=8)
def _load(path: Optional[str]) -> str:
    if path is None:
        return resources.files("elbowid").joinpath("data/baselines.json").read_text()
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"baselines file {p} does not exist")
    return p.read_text()


def load(path: Optional[str] = None) -> dict:
    """Baseline table; ``path`` swaps in an alternative file with the same schema."""
    data = json.loads(_load(None if path is None else str(path)))
    if data.get("version") != SUPPORTED_VERSION:
        raise ValidationError(f"unsupported baselines version {data.get('version')!r}")
    for key in ("human_static", "dynamic"):
        if key not in data:
            raise ValidationError(f"baselines file lacks {key!r}")
    return data
