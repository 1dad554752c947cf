"""Six-channel image observation for each agent.

Channels, all in ``[0, 1]``:

0. ``M - 0.5 U``: 1 for open water, 0.5 once covered, 0 for land.
1-3. shared trash model at ``t``, ``t-1``, ``t-2``, each divided by its own max.
4. observer's last ten visited cells, fading linearly toward the oldest.
5. other agents: 0.5 for scouts, 1 for cleaners.
"""

from __future__ import annotations

from collections import deque
from pathlib import Path

import numpy as np

from .world import AgentKind, EpisodeState

N_CHANNELS = 6
TRAIL_LENGTH = 10
HISTORY = 3


class TrailBuffer:
    """Ring of the most recent cells visited by each agent (newest last)."""

    def __init__(self, n_agents: int, length: int = TRAIL_LENGTH):
        self.length = length
        self.trails = [deque(maxlen=length) for _ in range(n_agents)]

    def push(self, positions) -> None:
        for trail, p in zip(self.trails, positions):
            trail.append((int(p[0]), int(p[1])))

    def __getitem__(self, n: int) -> list[tuple[int, int]]:
        return list(self.trails[n])


def _normalized(a: np.ndarray) -> np.ndarray:
    m = a.max() if a.size else 0
    if m <= 0:
        return np.zeros(a.shape, dtype=np.float32)
    return (a / m).astype(np.float32)


def observe(
    state: EpisodeState,
    history: list[np.ndarray],
    trails: TrailBuffer,
    n: int,
) -> np.ndarray:
    """Build agent ``n``'s observation.

    ``history`` holds model snapshots newest first; missing entries are treated
    as all-zero.
    """
    h, w = state.grid.shape
    obs = np.zeros((N_CHANNELS, h, w), dtype=np.float32)
    obs[0] = state.grid.navigable.astype(np.float32) - 0.5 * state.coverage
    for k in range(HISTORY):
        if k < len(history):
            obs[1 + k] = _normalized(history[k])

    trail = trails[n]
    span = len(trail)
    for age, (i, j) in enumerate(trail):
        obs[4, i, j] = (age + 1) / span

    for m, spec in enumerate(state.specs):
        if m == n:
            continue
        i, j = state.positions[m]
        obs[5, i, j] = 1.0 if spec.kind == AgentKind.CLEANER else 0.5
    return obs


class ObservationTracker:
    """Keeps the model history and trails in step with an episode."""

    def __init__(self, state: EpisodeState):
        self.history: deque[np.ndarray] = deque(maxlen=HISTORY)
        self.trails = TrailBuffer(state.n_agents)
        self.update(state)

    def update(self, state: EpisodeState) -> None:
        self.history.appendleft(state.model.copy())
        self.trails.push(state.positions)

    def observe(self, state: EpisodeState, n: int) -> np.ndarray:
        return observe(state, list(self.history), self.trails, n)

    def observe_all(self, state: EpisodeState, agents: list[int] | None = None) -> np.ndarray:
        agents = range(state.n_agents) if agents is None else agents
        return np.stack([self.observe(state, n) for n in agents])


def dump_pgm(obs: np.ndarray, out_dir: str | Path, prefix: str = "obs") -> list[Path]:
    """Write each channel as an 8-bit binary PGM, for eyeballing."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for c, chan in enumerate(obs):
        img = np.clip(np.round(chan * 255), 0, 255).astype(np.uint8)
        path = out_dir / f"{prefix}_ch{c + 1}.pgm"
        with open(path, "wb") as f:
            f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            f.write(img.tobytes())
        paths.append(path)
    return paths
