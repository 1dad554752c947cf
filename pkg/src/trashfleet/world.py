"""Discrete harbour environment: map graph, fleet kinematics and trash dynamics.

Grid cells are addressed as ``(row, col)``.  Trash items live in continuous
coordinates ``(x, y)`` in cell units, where cell ``(i, j)`` owns the unit
square ``[j, j+1) x [i, i+1)``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Action",
    "ACTION_DELTAS",
    "AgentKind",
    "AgentSpec",
    "SCOUT",
    "CLEANER",
    "FleetConfig",
    "DynamicsConfig",
    "GridMap",
    "TrashField",
    "EpisodeState",
    "StepResult",
    "WorldError",
    "MapFormatError",
    "DisconnectedMapError",
    "FleetTooLargeError",
    "IllegalActionError",
    "EpisodeOverError",
    "SpawnError",
    "HOLD",
    "load_map",
    "spawn_trash",
    "step_trash",
    "legal_actions",
    "destination",
    "apply_actions",
    "reset_episode",
    "disk_offsets",
    "bin_trash",
]


class WorldError(Exception):
    """Base class for environment errors."""


class MapFormatError(WorldError):
    pass


class DisconnectedMapError(WorldError):
    pass


class FleetTooLargeError(WorldError):
    pass


class IllegalActionError(WorldError):
    pass


class EpisodeOverError(WorldError):
    pass


class SpawnError(WorldError):
    pass


class Action(IntEnum):
    """The eight compass moves. Indices are stable and used as network outputs."""

    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7


# (d_row, d_col) per action; north is decreasing row index.
ACTION_DELTAS = np.array(
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)],
    dtype=np.int64,
)
N_ACTIONS = len(Action)
_DELTAS = [tuple(int(v) for v in d) for d in ACTION_DELTAS]

#: Placeholder action for an agent whose mask is all-false; it stays put.
HOLD = -1


class AgentKind(IntEnum):
    SCOUT = 0
    CLEANER = 1


@dataclass(frozen=True)
class AgentSpec:
    kind: AgentKind
    speed: int
    sense_radius: float

    def __post_init__(self):
        if self.speed < 1 or self.sense_radius < 1:
            raise ValueError("speed and sense_radius must be >= 1")

    @property
    def can_clean(self) -> bool:
        return self.kind == AgentKind.CLEANER


SCOUT = AgentSpec(AgentKind.SCOUT, speed=2, sense_radius=6.0)
CLEANER = AgentSpec(AgentKind.CLEANER, speed=1, sense_radius=1.0)


@dataclass(frozen=True)
class FleetConfig:
    n_scouts: int = 2
    n_cleaners: int = 2
    scout: AgentSpec = SCOUT
    cleaner: AgentSpec = CLEANER

    def __post_init__(self):
        if self.n_scouts < 0 or self.n_cleaners < 0 or self.size < 1:
            raise ValueError("fleet needs non-negative team sizes and at least one agent")

    @property
    def size(self) -> int:
        return self.n_scouts + self.n_cleaners

    def specs(self) -> list[AgentSpec]:
        # Scouts first: agent index order is also the move-resolution order.
        return [self.scout] * self.n_scouts + [self.cleaner] * self.n_cleaners


@dataclass(frozen=True)
class DynamicsConfig:
    """Trash generation and drift parameters (cell units, per step)."""

    count_mean: float = 60.0
    count_std: float = 10.0
    spawn_spread: float = 5.0
    wind_bound: float = 0.05
    noise_bound: float = 0.10
    w_wind: float = 1.0
    w_rand: float = 1.0
    dt: float = 1.0


# ----------------------------------------------------------------------------
# Map
# ----------------------------------------------------------------------------


@dataclass
class GridMap:
    navigable: np.ndarray
    deploy_zones: list[frozenset[tuple[int, int]]]
    name: str = "unnamed"

    def __post_init__(self):
        self.navigable = np.asarray(self.navigable, dtype=bool)
        self.navigable.setflags(write=False)
        if not self.navigable.any():
            raise MapFormatError("map has no navigable cell")
        for zone in self.deploy_zones:
            for i, j in zone:
                if not self.navigable[i, j]:
                    raise MapFormatError(f"deploy cell {(i, j)} is an obstacle")
        if not _is_connected(self.navigable):
            raise DisconnectedMapError("navigable region is not a single 8-connected component")
        self._free = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(self.navigable)))
        self._disks: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def height(self) -> int:
        return self.navigable.shape[0]

    @property
    def width(self) -> int:
        return self.navigable.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.navigable.shape

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.height, self.width))

    def deploy_cells(self) -> list[tuple[int, int]]:
        cells = set()
        for zone in self.deploy_zones:
            cells |= zone
        return sorted(cells)

    def inside(self, i: int, j: int) -> bool:
        return 0 <= i < self.height and 0 <= j < self.width

    def is_free(self, i: int, j: int) -> bool:
        return (i, j) in self._free

    def disk(self, pos, radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Navigable cells strictly within ``radius`` of ``pos`` as (rows, cols)."""
        key = (int(pos[0]), int(pos[1]), radius)
        hit = self._disks.get(key)
        if hit is None:
            hit = self._disks[key] = _disk_cells(self, key[:2], radius)
        return hit


def _components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-connected components of the True cells, in row-major discovery order."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for i0, j0 in zip(*np.nonzero(mask)):
        if seen[i0, j0]:
            continue
        comp = []
        stack = [(int(i0), int(j0))]
        seen[i0, j0] = True
        while stack:
            i, j = stack.pop()
            comp.append((i, j))
            for di, dj in ACTION_DELTAS:
                a, b = i + di, j + dj
                if 0 <= a < h and 0 <= b < w and mask[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    stack.append((a, b))
        comps.append(comp)
    return comps


def _is_connected(mask: np.ndarray) -> bool:
    return len(_components(mask)) == 1


def load_map(text: str, name: str = "unnamed") -> GridMap:
    """Parse a scenario file.

    The format is a ``H W`` header followed by ``H`` rows of ``W`` characters:
    ``0`` obstacle, ``1`` navigable, ``2`` navigable deploy cell.  Lines starting
    with ``#`` and blank lines are ignored.  Each 8-connected group of ``2`` cells
    forms one deploy zone.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MapFormatError("empty scenario file")
    try:
        h, w = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise MapFormatError(f"bad header {lines[0]!r}, expected 'H W'") from exc
    if h < 1 or w < 1:
        raise MapFormatError("grid dimensions must be positive")
    rows = lines[1:]
    if len(rows) != h:
        raise MapFormatError(f"expected {h} rows, found {len(rows)}")
    codes = np.zeros((h, w), dtype=np.int8)
    for i, row in enumerate(rows):
        if len(row) != w:
            raise MapFormatError(f"row {i} has {len(row)} cells, expected {w}")
        bad = set(row) - {"0", "1", "2"}
        if bad:
            raise MapFormatError(f"row {i} has invalid characters {sorted(bad)}")
        codes[i] = [int(c) for c in row]
    zones = [frozenset(c) for c in _components(codes == 2)]
    return GridMap(codes > 0, zones, name=name)


def dump_map(grid: GridMap) -> str:
    codes = grid.navigable.astype(np.int8)
    for i, j in grid.deploy_cells():
        codes[i, j] = 2
    rows = ["".join(str(c) for c in row) for row in codes]
    return "\n".join([f"{grid.height} {grid.width}", *rows]) + "\n"


# ----------------------------------------------------------------------------
# Trash
# ----------------------------------------------------------------------------


@dataclass
class TrashField:
    """Continuous trash positions.

    ``ids`` tags each surviving item with its index at spawn time so that the
    per-item noise stream stays aligned no matter which items get collected.
    """

    positions: np.ndarray  # (n, 2) float64, columns (x, y)
    ids: np.ndarray  # (n,) int64
    wind: np.ndarray  # (2,) float64, (vx, vy)
    n_spawned: int
    noise_bound: float = 0.10
    w_wind: float = 1.0
    w_rand: float = 1.0
    dt: float = 1.0

    def __len__(self) -> int:
        return len(self.positions)

    def cells(self) -> np.ndarray:
        """(n, 2) integer (row, col) of the cell each item sits in."""
        return np.floor(self.positions[:, ::-1]).astype(np.int64)

    def copy(self) -> "TrashField":
        return copy.deepcopy(self)


def bin_trash(field: TrashField, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    cells = field.cells()
    flat = np.bincount(cells[:, 0] * w + cells[:, 1], minlength=h * w)
    return flat.reshape(h, w).astype(np.int64)


def _navigable_at(grid: GridMap, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    col = np.floor(x).astype(np.int64)
    row = np.floor(y).astype(np.int64)
    ok = (row >= 0) & (row < grid.height) & (col >= 0) & (col < grid.width)
    out = np.zeros(x.shape, dtype=bool)
    out[ok] = grid.navigable[row[ok], col[ok]]
    return out


def spawn_trash(
    grid: GridMap,
    rng: np.random.Generator,
    dyn: DynamicsConfig = DynamicsConfig(),
    count: int | None = None,
    max_rounds: int = 1000,
) -> TrashField:
    """Scatter a cluster of items around a random source cell.

    The item count is ``round(N(count_mean, count_std**2))`` clamped to at least
    one unless ``count`` is given.  Items falling outside navigable water are
    redrawn.
    """
    if count is None:
        count = max(1, int(round(rng.normal(dyn.count_mean, dyn.count_std))))
    nav = np.argwhere(grid.navigable)
    src = nav[rng.integers(len(nav))]
    center = np.array([src[1] + 0.5, src[0] + 0.5])

    pos = np.empty((count, 2))
    todo = np.arange(count)
    for _ in range(max_rounds):
        draw = rng.normal(center, dyn.spawn_spread, size=(len(todo), 2))
        ok = _navigable_at(grid, draw[:, 0], draw[:, 1])
        pos[todo[ok]] = draw[ok]
        todo = todo[~ok]
        if len(todo) == 0:
            break
    else:
        raise SpawnError(f"could not place {len(todo)} items in navigable water")

    wind = rng.uniform(-dyn.wind_bound, dyn.wind_bound, size=2)
    return TrashField(
        positions=pos,
        ids=np.arange(count),
        wind=wind,
        n_spawned=count,
        noise_bound=dyn.noise_bound,
        w_wind=dyn.w_wind,
        w_rand=dyn.w_rand,
        dt=dyn.dt,
    )


def step_trash(field: TrashField, grid: GridMap, rng: np.random.Generator) -> TrashField:
    """Advance every item by one step of wind plus uniform noise.

    Displacements are resolved axis by axis: x first, then y.  A component whose
    move would end outside navigable water is dropped, so items stay afloat.
    Noise is drawn for all spawned items every step and indexed by item id.
    """
    noise = rng.uniform(-field.noise_bound, field.noise_bound, size=(field.n_spawned, 2))
    disp = field.dt * (field.w_wind * field.wind + field.w_rand * noise[field.ids])

    x, y = field.positions[:, 0], field.positions[:, 1]
    nx = x + disp[:, 0]
    nx = np.where(_navigable_at(grid, nx, y), nx, x)
    ny = y + disp[:, 1]
    ny = np.where(_navigable_at(grid, nx, ny), ny, y)

    return replace(field, positions=np.column_stack([nx, ny]))


# ----------------------------------------------------------------------------
# Sensing
# ----------------------------------------------------------------------------

_DISK_CACHE: dict[float, np.ndarray] = {}


def disk_offsets(radius: float) -> np.ndarray:
    """Integer (d_row, d_col) offsets strictly closer than ``radius``."""
    if radius not in _DISK_CACHE:
        r = int(np.ceil(radius))
        d = np.arange(-r, r + 1)
        di, dj = np.meshgrid(d, d, indexing="ij")
        keep = di**2 + dj**2 < radius**2
        _DISK_CACHE[radius] = np.column_stack([di[keep], dj[keep]])
    return _DISK_CACHE[radius]


def _disk_cells(grid: GridMap, pos, radius: float) -> tuple[np.ndarray, np.ndarray]:
    cells = disk_offsets(radius) + np.asarray(pos)
    ok = (cells[:, 0] >= 0) & (cells[:, 0] < grid.height) & (cells[:, 1] >= 0) & (cells[:, 1] < grid.width)
    cells = cells[ok]
    ok = grid.navigable[cells[:, 0], cells[:, 1]]
    return cells[ok, 0], cells[ok, 1]


# ----------------------------------------------------------------------------
# Episode
# ----------------------------------------------------------------------------


@dataclass
class EpisodeState:
    grid: GridMap
    positions: np.ndarray  # (N, 2) int64 rows of (row, col)
    specs: list[AgentSpec]
    trash: TrashField
    truth: np.ndarray  # Y
    model: np.ndarray  # Y-hat
    coverage: np.ndarray  # U, uint8
    horizon: int
    n_initial: int  # K
    rng: np.random.Generator
    t: int = 0
    collected_total: int = 0
    collected_by_agent: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.collected_by_agent is None:
            self.collected_by_agent = np.zeros(len(self.specs), dtype=np.int64)

    @property
    def n_agents(self) -> int:
        return len(self.specs)

    @property
    def done(self) -> bool:
        return self.t >= self.horizon

    @property
    def remaining(self) -> int:
        return len(self.trash)

    def scouts(self) -> list[int]:
        return [n for n, s in enumerate(self.specs) if s.kind == AgentKind.SCOUT]

    def cleaners(self) -> list[int]:
        return [n for n, s in enumerate(self.specs) if s.kind == AgentKind.CLEANER]

    def resolution_order(self) -> list[int]:
        """Scouts first, then cleaners, ascending index within each team."""
        return self.scouts() + self.cleaners()

    def copy(self) -> "EpisodeState":
        # The map is read-only and shared; everything else is duplicated.
        return replace(
            self,
            positions=self.positions.copy(),
            trash=self.trash.copy(),
            truth=self.truth.copy(),
            model=self.model.copy(),
            coverage=self.coverage.copy(),
            rng=copy.deepcopy(self.rng),
            collected_by_agent=self.collected_by_agent.copy(),
        )


@dataclass
class StepResult:
    """Per-agent bookkeeping from one call to :func:`apply_actions`."""

    collected: np.ndarray  # int, items picked up
    new_coverage: np.ndarray  # float, newly covered cells split 1/k among k observers
    model_change: np.ndarray  # float, sum over the agent's disk of dY-hat / eta
    actions: list[int]
    covered_now: int  # sum U after the step


def destination(state: EpisodeState, n: int, action: int) -> tuple[int, int]:
    i, j = state.positions[n].tolist()
    if action == HOLD:
        return i, j
    di, dj = _DELTAS[action]
    speed = state.specs[n].speed
    return i + speed * di, j + speed * dj


def legal_actions(
    state: EpisodeState,
    n: int,
    reserved: Iterable[tuple[int, int]] = (),
) -> np.ndarray:
    """Boolean mask of the moves agent ``n`` may take.

    Every sub-step cell along the move must be navigable and must not hold any
    other agent's current position nor a destination already reserved by an
    agent resolved earlier this step.
    """
    free = state.grid._free
    pos = state.positions.tolist()
    blocked = {(p[0], p[1]) for m, p in enumerate(pos) if m != n}
    blocked.update(reserved)
    i0, j0 = pos[n]
    speed = state.specs[n].speed
    mask = np.zeros(N_ACTIONS, dtype=bool)
    for a, (di, dj) in enumerate(_DELTAS):
        for k in range(1, speed + 1):
            c = (i0 + k * di, j0 + k * dj)
            if c not in free or c in blocked:
                break
        else:
            mask[a] = True
    return mask


def _sense(state: EpisodeState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Refresh Y-hat and U inside every agent's disk.

    Returns per-agent newly covered cells and model change, each cell's share
    divided by the number of agents whose disks contain it, plus that count.
    """
    grid = state.grid
    disks = [grid.disk(state.positions[n], state.specs[n].sense_radius) for n in range(state.n_agents)]

    eta = np.zeros(grid.shape, dtype=np.int64)
    for rows, cols in disks:
        eta[rows, cols] += 1

    new_cov = np.zeros(state.n_agents)
    change = np.zeros(state.n_agents)
    for n, (rows, cols) in enumerate(disks):
        k = eta[rows, cols]
        new_cov[n] = float(np.sum((1 - state.coverage[rows, cols]) / k))
        change[n] = float(np.sum((state.truth[rows, cols] - state.model[rows, cols]) / k))
    for rows, cols in disks:
        state.model[rows, cols] = state.truth[rows, cols]
        state.coverage[rows, cols] = 1
    return new_cov, change, eta


def apply_actions(state: EpisodeState, actions: Mapping[int, int] | Sequence[int]) -> StepResult:
    """Advance the episode one step, mutating ``state`` in place.

    Order inside a step: agents move (resolved in :meth:`EpisodeState.resolution_order`),
    cleaners collect, trash drifts, Y is rebinned, then every disk refreshes Y-hat
    and U.  ``HOLD`` is only accepted when the agent has no legal move.
    """
    if state.done:
        raise EpisodeOverError(f"episode already at t={state.t} >= T={state.horizon}")
    if isinstance(actions, Mapping):
        actions = [actions[n] for n in range(state.n_agents)]
    actions = [int(a) for a in actions]
    if len(actions) != state.n_agents:
        raise IllegalActionError(f"expected {state.n_agents} actions, got {len(actions)}")

    reserved: list[tuple[int, int]] = []
    new_pos = state.positions.copy()
    for n in state.resolution_order():
        mask = legal_actions(state, n, reserved)
        a = actions[n]
        if a == HOLD:
            if mask.any():
                raise IllegalActionError(f"agent {n} holds but has legal moves")
        elif not (0 <= a < N_ACTIONS) or not mask[a]:
            raise IllegalActionError(f"agent {n}: action {a} is not legal (mask {mask.astype(int)})")
        dest = destination(state, n, a)
        reserved.append(dest)
        new_pos[n] = dest
    state.positions = new_pos

    collected = np.zeros(state.n_agents, dtype=np.int64)
    if len(state.trash):
        cells = state.trash.cells()
        keep = np.ones(len(cells), dtype=bool)
        for n in state.cleaners():
            here = (cells[:, 0] == new_pos[n, 0]) & (cells[:, 1] == new_pos[n, 1])
            collected[n] = int(np.count_nonzero(here & keep))
            keep &= ~here
        if not keep.all():
            state.trash.positions = state.trash.positions[keep]
            state.trash.ids = state.trash.ids[keep]
    state.collected_by_agent += collected
    state.collected_total += int(collected.sum())

    state.trash = step_trash(state.trash, state.grid, state.rng)
    state.truth = bin_trash(state.trash, state.grid.shape)
    new_cov, change, _ = _sense(state)
    state.t += 1
    return StepResult(
        collected=collected,
        new_coverage=new_cov,
        model_change=change,
        actions=actions,
        covered_now=int(state.coverage.sum()),
    )


def reset_episode(
    grid: GridMap,
    fleet: FleetConfig,
    rng: np.random.Generator,
    dyn: DynamicsConfig = DynamicsConfig(),
    horizon: int = 150,
) -> EpisodeState:
    """Start an episode: random deployment, fresh trash and wind, first sensing pass.

    ``rng`` is kept by the returned state and drives the trash drift noise.
    """
    cells = grid.deploy_cells()
    if fleet.size > len(cells):
        raise FleetTooLargeError(f"{fleet.size} agents but only {len(cells)} deploy cells")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pick = rng.choice(len(cells), size=fleet.size, replace=False)
    positions = np.array([cells[k] for k in pick], dtype=np.int64).reshape(fleet.size, 2)
    trash = spawn_trash(grid, rng, dyn)
    state = EpisodeState(
        grid=grid,
        positions=positions,
        specs=fleet.specs(),
        trash=trash,
        truth=bin_trash(trash, grid.shape),
        model=np.zeros(grid.shape, dtype=np.int64),
        coverage=np.zeros(grid.shape, dtype=np.uint8),
        horizon=horizon,
        n_initial=len(trash),
        rng=rng,
    )
    _sense(state)
    return state
