"""
What an agent sees
==================

Each agent's network input is a stack of six map-sized images. This script
plays a few greedy steps, prints a summary of each channel for one cleaner
and writes the channels as PGM images for inspection.

Usage: python demos/03_what_an_agent_sees.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from trashfleet import FleetConfig, apply_actions, load_scenario
from trashfleet.perception import ObservationTracker, dump_pgm
from trashfleet.policies import greedy
from trashfleet.rollout import new_episode, select_actions

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo_observation")

state = new_episode(load_scenario("scenario_b"), FleetConfig(2, 2), seed=3)
tracker = ObservationTracker(state)

# The tracker keeps the model history and the position trails between steps.
for _ in range(12):
    actions, _ = select_actions(state, greedy)
    apply_actions(state, actions)
    tracker.update(state)

cleaner = state.cleaners()[0]
obs = tracker.observe(state, cleaner)
names = ["water / covered", "model now", "model t-1", "model t-2", "own trail", "teammates"]
for k, name in enumerate(names):
    ch = obs[k]
    print(f"channel {k} {name:>15}: {int(np.count_nonzero(ch)):5d} non-zero cells, values {sorted({round(float(v), 2) for v in ch[ch > 0]})[:6]}")

# Land is 0, untouched water 1, water already seen 0.5.
print("covered fraction:", round(float((obs[0] == 0.5).sum() / (obs[0] > 0).sum()), 3))

paths = dump_pgm(obs, out, prefix=f"cleaner{cleaner}")
print("wrote", ", ".join(p.name for p in paths), "to", out)
