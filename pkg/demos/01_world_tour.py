"""
A walk through one episode
==========================

Load a bundled port, deploy two scouts and two cleaners, and let them wander
randomly for a full mission while we watch the bookkeeping.
"""

import numpy as np

from trashfleet import Action, FleetConfig, apply_actions, legal_actions, load_scenario
from trashfleet.rollout import new_episode, select_actions

# Scenario maps are plain text: 0 is land, 1 is water, 2 is a deploy cell.
grid = load_scenario("scenario_a")
print(f"{grid.name}: {grid.shape[0]}x{grid.shape[1]}, {int(grid.navigable.sum())} water cells")

# Every random draw in an episode hangs off one integer seed.
state = new_episode(grid, FleetConfig(n_scouts=2, n_cleaners=2), seed=7)
print(f"K = {state.n_initial} trash items, agents at {state.positions.tolist()}")

# Scouts see 6 cells around them, cleaners only their own cell.
print(f"covered after deployment: {int(state.coverage.sum())} cells")

# Legal moves respect walls, the map edge and other agents' reservations.
mask = legal_actions(state, 0)
print("scout 0 may move", [Action(a).name for a in np.flatnonzero(mask)])

# Play the mission with uniformly random legal moves. Agents choose in a fixed
# order and each later agent sees the cells already claimed by earlier ones.
rng = np.random.default_rng(0)
while not state.done:
    actions, _ = select_actions(state, lambda st, n, mask: int(rng.choice(np.flatnonzero(mask))))
    apply_actions(state, actions)
    assert state.collected_total + state.remaining == state.n_initial

print(f"after {state.t} steps: collected {state.collected_total}, {state.remaining} left")
print(f"per agent: {state.collected_by_agent.tolist()}  (scouts never collect)")
print(f"coverage {int(state.coverage.sum())} of {int(grid.navigable.sum())} cells")

# The belief model only matches the truth where someone has looked recently.
seen = state.coverage.astype(bool)
print(f"belief error inside covered area: {int(np.abs(state.truth - state.model)[seen].sum())} items")
