"""
Training both teams at desk scale
=================================

Train one dueling double-Q network per team on a small open pond, then put
the best checkpoint up against the random walker and the greedy planner on
held-out seeds. The defaults mirror the desk-scale acceptance run, which
takes a few hours on one CPU. Pass a smaller episode count for a quick look.

Usage: python demos/04_train_and_compare.py [episodes] [out_dir]
"""

import logging
import sys
from pathlib import Path

import numpy as np

from trashfleet import FleetConfig
from trashfleet.learner import TrainerConfig, train
from trashfleet.learner.agent import DQNPolicy
from trashfleet.policies import make_baseline
from trashfleet.rollout import EnvSpec, run_episode
from trashfleet.scenarios import open_map

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/demo_desk")

# A 24x18 open pond with two deploy rows along the bottom edge.
env = EnvSpec(open_map(24, 18), FleetConfig(2, 2))

# Exploration mixes uniform moves with greedy-planner moves, and the buffers are
# seeded with 20% greedy play before the first gradient step. Rewards are
# scaled down before storage so the squared TD loss stays well conditioned.
# A slimmer, zero-padded conv stack keeps a gradient step cheap on one CPU.
cfg = TrainerConfig(
    episodes=episodes,
    buffer_capacity=60_000,
    batch_size=64,
    lr=2.5e-4,
    train_every=4,
    behavior="greedy-mix",
    prefill=0.2,
    reward_scale=0.02,
    conv_channels=(16, 16, 16),
    fc=(128, 64, 64),
    padding=1,
    eval_every=max(1, min(100, episodes // 10)),
    checkpoint_every=50,
)
result = train(env, cfg, out)
print(f"best training-eval PTC {result.best_eval_ptc:.1f}; log in {result.log_path}")

# Held-out seeds were never seen during training or checkpoint selection.
seeds = [2_000_000 + k for k in range(50)]
contenders = {
    "dddql": DQNPolicy.from_checkpoint(out / "checkpoint_best.pt"),
    "random": make_baseline("random"),
    "greedy": make_baseline("greedy"),
}
for name, policy in contenders.items():
    traces = [run_episode(env, policy, s) for s in seeds]
    p = np.mean([t.ptc()[-1] for t in traces])
    m = np.mean([t.mse[-1] for t in traces])
    print(f"{name:>7}: PTC {p:6.2f}   final MSE {m:.5f}")
