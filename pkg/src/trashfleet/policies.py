"""Benchmark planners: random walker, lawn mower, greedy and PSO.

Every planner sees the same information as the learned agents: the map, the
shared trash model, the coverage matrix and the fleet positions.  A policy is
asked for one agent at a time, in move-resolution order, with that agent's
legal-move mask already accounting for moves reserved earlier in the step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import ACTION_DELTAS, N_ACTIONS, Action, EpisodeState

AXIS_MOVES = (Action.N, Action.E, Action.S, Action.W)
_OPPOSITE = {Action.N: Action.S, Action.S: Action.N, Action.E: Action.W, Action.W: Action.E}


class Policy:
    """Common interface. Subclasses override :meth:`act` and optionally the hooks."""

    name = "policy"

    def reset(self, state: EpisodeState, rng: np.random.Generator) -> None:
        self.rng = rng

    def begin_step(self, state: EpisodeState) -> None:
        pass

    def act(self, state: EpisodeState, n: int, mask: np.ndarray) -> int:
        raise NotImplementedError


def _lowest_legal(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


# -- random walker ------------------------------------------------------------


def random_walker(mask: np.ndarray, rng: np.random.Generator) -> int:
    legal = np.flatnonzero(mask)
    return int(legal[rng.integers(len(legal))])


class RandomWalker(Policy):
    name = "random"

    def act(self, state, n, mask):
        return random_walker(mask, self.rng)


# -- lawn mower ---------------------------------------------------------------


@dataclass
class SweepMemory:
    primary: Action
    secondary: Action

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SweepMemory":
        primary = AXIS_MOVES[rng.integers(4)]
        perp = [a for a in AXIS_MOVES if a not in (primary, _OPPOSITE[primary])]
        return cls(primary, perp[rng.integers(2)])


def lawn_mower(memory: SweepMemory, mask: np.ndarray, rng: np.random.Generator) -> int:
    """Boustrophedon sweep; mutates ``memory``.

    Go along the primary direction until blocked, then shift one lane along the
    secondary direction and reverse.  If the secondary side is blocked too, try
    the other side; if boxed in, take any legal move and redraw the pattern.
    """
    if mask[memory.primary]:
        return int(memory.primary)
    if mask[memory.secondary]:
        memory.primary = _OPPOSITE[memory.primary]
        return int(memory.secondary)
    flipped = _OPPOSITE[memory.secondary]
    if mask[flipped]:
        memory.secondary = flipped
        memory.primary = _OPPOSITE[memory.primary]
        return int(flipped)
    fresh = SweepMemory.random(rng)
    memory.primary, memory.secondary = fresh.primary, fresh.secondary
    return random_walker(mask, rng)


class LawnMower(Policy):
    name = "lawnmower"

    def reset(self, state, rng):
        super().reset(state, rng)
        self.memory = [SweepMemory.random(rng) for _ in range(state.n_agents)]

    def act(self, state, n, mask):
        return lawn_mower(self.memory[n], mask, self.rng)


# -- greedy -------------------------------------------------------------------


def greedy(state: EpisodeState, n: int, mask: np.ndarray) -> int:
    """Move toward the nearest cell the model marks as dirty, else explore.

    With trash in the model, pick the legal move whose landing cell is closest
    (Euclidean) to the nearest such cell.  With an empty model, pick the move
    whose sensing disk would see the most uncovered cells.  Ties go to the
    lowest action index.
    """
    legal = np.flatnonzero(mask)
    spec = state.specs[n]
    landings = state.positions[n] + spec.speed * ACTION_DELTAS[legal]
    targets = np.argwhere(state.model > 0)
    if len(targets):
        d = landings[:, None, :] - targets[None, :, :]
        score = np.sqrt((d**2).sum(axis=2)).min(axis=1)
        return int(legal[np.argmin(score)])
    gain = np.empty(len(legal))
    for k, cell in enumerate(landings):
        rows, cols = state.grid.disk(cell, spec.sense_radius)
        gain[k] = np.count_nonzero(state.coverage[rows, cols] == 0)
    return int(legal[np.argmax(gain)])


class Greedy(Policy):
    name = "greedy"

    def act(self, state, n, mask):
        return greedy(state, n, mask)


# -- PSO ----------------------------------------------------------------------


@dataclass(frozen=True)
class PsoParams:
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5

    def __post_init__(self):
        if min(self.inertia, self.cognitive, self.social) < 0:
            raise ValueError("PSO coefficients must be non-negative")


def best_aligned(velocity: np.ndarray, mask: np.ndarray) -> int:
    """Legal move with the highest cosine similarity to ``velocity``."""
    norm = np.linalg.norm(velocity)
    if norm < 1e-9:
        return _lowest_legal(mask)
    dirs = ACTION_DELTAS / np.linalg.norm(ACTION_DELTAS, axis=1, keepdims=True)
    cos = dirs @ (velocity / norm)
    cos[~mask] = -np.inf
    return int(np.argmax(cos))


def pso_velocity(
    velocity: np.ndarray,
    position: np.ndarray,
    pbest: np.ndarray,
    gbest: np.ndarray,
    params: PsoParams,
    r1: float,
    r2: float,
) -> np.ndarray:
    return (
        params.inertia * velocity
        + params.cognitive * r1 * (pbest - position)
        + params.social * r2 * (gbest - position)
    )


def _best_cell(model: np.ndarray, allowed: np.ndarray, near: np.ndarray) -> np.ndarray | None:
    """Highest model value within ``allowed``; ties go to the cell nearest ``near``."""
    vals = np.where(allowed, model, 0)
    top = vals.max()
    if top <= 0:
        return None
    cand = np.argwhere(vals == top)
    d = ((cand - near) ** 2).sum(axis=1)
    return cand[np.argmin(d)].astype(np.float64)


def pso_step(
    state: EpisodeState,
    velocities: np.ndarray,
    seen: np.ndarray,
    last_covered: np.ndarray,
    params: PsoParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Update every vehicle's velocity in place and return the new array.

    ``seen[n]`` marks cells vehicle ``n`` has sensed; its personal best is the
    highest-model cell among those.  The global best is the highest-model cell
    anywhere.  With an empty model both fall back to the centroid of the cells
    covered least recently (never-covered cells first).
    """
    oldest = last_covered == last_covered[state.grid.navigable].min()
    oldest &= state.grid.navigable
    fallback = np.argwhere(oldest).mean(axis=0)
    everywhere = np.ones(state.grid.shape, dtype=bool)
    for n in range(state.n_agents):
        pos = state.positions[n].astype(np.float64)
        gbest = _best_cell(state.model, everywhere, np.zeros(2))
        pbest = _best_cell(state.model, seen[n], pos)
        gbest = fallback if gbest is None else gbest
        pbest = gbest if pbest is None else pbest
        r1, r2 = rng.random(2)
        velocities[n] = pso_velocity(velocities[n], pos, pbest, gbest, params, r1, r2)
    return velocities


class ParticleSwarm(Policy):
    name = "pso"

    def __init__(self, params: PsoParams = PsoParams()):
        self.params = params

    def reset(self, state, rng):
        super().reset(state, rng)
        self.velocities = np.zeros((state.n_agents, 2))
        self.seen = np.zeros((state.n_agents, *state.grid.shape), dtype=bool)
        self.last_covered = np.full(state.grid.shape, -1, dtype=np.int64)

    def begin_step(self, state):
        for n in range(state.n_agents):
            rows, cols = state.grid.disk(state.positions[n], state.specs[n].sense_radius)
            self.seen[n, rows, cols] = True
            self.last_covered[rows, cols] = state.t
        pso_step(state, self.velocities, self.seen, self.last_covered, self.params, self.rng)

    def act(self, state, n, mask):
        return best_aligned(self.velocities[n], mask)


BASELINES = {
    "random": RandomWalker,
    "lawnmower": LawnMower,
    "greedy": Greedy,
    "pso": ParticleSwarm,
}


def make_baseline(name: str) -> Policy:
    try:
        return BASELINES[name]()
    except KeyError:
        raise ValueError(f"unknown baseline {name!r}; choose from {sorted(BASELINES)}") from None


__all__ = [
    "Policy",
    "RandomWalker",
    "LawnMower",
    "Greedy",
    "ParticleSwarm",
    "PsoParams",
    "SweepMemory",
    "random_walker",
    "lawn_mower",
    "greedy",
    "pso_step",
    "pso_velocity",
    "best_aligned",
    "make_baseline",
    "BASELINES",
    "N_ACTIONS",
]
