"""Bundled scenario maps and lookup by name or path."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .world import GridMap, load_map

BUNDLED = ("scenario_a", "scenario_b")


def load_scenario(name_or_path: str | Path) -> GridMap:
    """Load a bundled map (``scenario_a``, ``scenario_a.map``) or a map file on disk."""
    key = Path(str(name_or_path)).name
    stem = key[:-4] if key.endswith(".map") else key
    path = Path(name_or_path)
    if path.is_file():
        return load_map(path.read_text(), name=path.stem)
    if stem in BUNDLED:
        text = resources.files("trashfleet.maps").joinpath(f"{stem}.map").read_text()
        return load_map(text, name=stem)
    raise FileNotFoundError(f"no scenario named {name_or_path!r}")


def open_map(height: int, width: int, deploy: int = 2, name: str | None = None) -> GridMap:
    """Obstacle-free rectangle with a ``deploy`` x ``deploy`` zone in the bottom-left corner."""
    nav = np.ones((height, width), dtype=bool)
    zone = frozenset((height - 1 - i, j) for i in range(deploy) for j in range(deploy))
    return GridMap(nav, [zone], name=name or f"open_{height}x{width}")
