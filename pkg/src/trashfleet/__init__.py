"""Heterogeneous scout/cleaner fleet simulator for floating-trash collection."""

from .world import (
    Action,
    AgentKind,
    DynamicsConfig,
    EpisodeState,
    FleetConfig,
    GridMap,
    apply_actions,
    legal_actions,
    load_map,
    reset_episode,
)
from .scenarios import load_scenario, open_map

__version__ = "0.1.0"
