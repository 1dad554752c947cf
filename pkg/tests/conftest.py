import numpy as np
import pytest

from trashfleet import load_map, open_map
from trashfleet.world import CLEANER, SCOUT, EpisodeState, GridMap, TrashField, bin_trash


def make_field(points, wind=(0.0, 0.0), noise_bound=0.0) -> TrashField:
    """Trash field from (x, y) points with controllable dynamics."""
    pos = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return TrashField(
        positions=pos,
        ids=np.arange(len(pos)),
        wind=np.asarray(wind, dtype=np.float64),
        n_spawned=len(pos),
        noise_bound=noise_bound,
    )


def make_state(grid: GridMap, positions, specs, trash_points=(), horizon=150, seed=0, wind=(0.0, 0.0), noise=0.0):
    """Hand-built episode state: nothing sensed yet, model and coverage empty."""
    trash = make_field(trash_points, wind, noise)
    return EpisodeState(
        grid=grid,
        positions=np.asarray(positions, dtype=np.int64).reshape(-1, 2),
        specs=list(specs),
        trash=trash,
        truth=bin_trash(trash, grid.shape),
        model=np.zeros(grid.shape, dtype=np.int64),
        coverage=np.zeros(grid.shape, dtype=np.uint8),
        horizon=horizon,
        n_initial=len(trash),
        rng=np.random.default_rng(seed),
    )


def at_cell(i, j, k=1):
    """``k`` trash points in the centre of cell (i, j), as (x, y)."""
    return [(j + 0.5, i + 0.5)] * k


@pytest.fixture
def open8():
    return open_map(8, 8)


@pytest.fixture
def walled():
    """Small map with a pillar and a wall stub, one deploy zone of 6 cells."""
    text = """7 9
# pillar at (2,4); wall stub along row 4
111111111
111111111
111101111
111111111
110000011
122211111
122211111
"""
    return load_map(text, name="walled")


__all__ = ["make_field", "make_state", "at_cell", "SCOUT", "CLEANER"]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
