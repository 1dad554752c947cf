"""Seeded episode driver shared by evaluation, training and the CLI."""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np

from .metrics import gaussian_mse, ptc
from .policies import Policy
from .rewards import RewardWeights, fleet_rewards
from .world import (
    HOLD,
    DynamicsConfig,
    EpisodeState,
    FleetConfig,
    GridMap,
    StepResult,
    apply_actions,
    destination,
    legal_actions,
    reset_episode,
)


@dataclass(frozen=True)
class EnvSpec:
    """Everything needed to generate episodes besides the seed."""

    grid: GridMap
    fleet: FleetConfig = FleetConfig()
    dyn: DynamicsConfig = DynamicsConfig()
    horizon: int = 150
    weights: RewardWeights = RewardWeights()


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer of a global seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def episode_seed(seed: int, stream: str, k: int) -> int:
    """Seed of the ``k``-th episode of a named stream (training, evaluation, prefill)."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode()), int(k)])
    return int(ss.generate_state(1)[0])


def new_episode(
    grid: GridMap,
    fleet: FleetConfig,
    seed: int,
    dyn: DynamicsConfig = DynamicsConfig(),
    horizon: int = 150,
) -> EpisodeState:
    return reset_episode(grid, fleet, substream(seed, "env"), dyn, horizon)


def select_actions(
    state: EpisodeState,
    choose: Callable[[EpisodeState, int, np.ndarray], int],
) -> tuple[list[int], list[np.ndarray]]:
    """Ask ``choose`` for each agent in resolution order with sequential reservations."""
    actions = [HOLD] * state.n_agents
    masks: list[np.ndarray] = [None] * state.n_agents
    reserved = []
    for n in state.resolution_order():
        mask = legal_actions(state, n, reserved)
        masks[n] = mask
        a = choose(state, n, mask) if mask.any() else HOLD
        actions[n] = a
        reserved.append(destination(state, n, a))
    return actions, masks


@dataclass
class EpisodeTrace:
    seed: int
    policy: str
    scenario: str
    n_initial: int
    collected: list[int] = field(default_factory=list)  # fleet total per step
    remaining: list[int] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    decision_ms: list[float] = field(default_factory=list)
    collected_total: int = 0

    def ptc(self) -> np.ndarray:
        return ptc(self.collected, self.n_initial)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "policy": self.policy,
            "scenario": self.scenario,
            "K": self.n_initial,
            "collected": self.collected,
            "remaining": self.remaining,
            "ptc": [round(float(v), 10) for v in self.ptc()],
            "mse": [round(float(v), 12) for v in self.mse],
            "decision_ms": self.decision_ms,
            "collected_total": self.collected_total,
        }


def header_record(state: EpisodeState, seed: int, fleet: FleetConfig, policy: str) -> dict:
    return {
        "type": "header",
        "seed": int(seed),
        "map": state.grid.name,
        "policy": policy,
        "fleet": {"scouts": fleet.n_scouts, "cleaners": fleet.n_cleaners},
        "wind": [float(v) for v in state.trash.wind],
        "K": state.n_initial,
        "horizon": state.horizon,
        "positions": state.positions.tolist(),
    }


def step_record(state: EpisodeState, result: StepResult, terms: list[dict] | None = None) -> dict:
    rec = {
        "t": state.t,
        "positions": state.positions.tolist(),
        "actions": list(result.actions),
        "collected": result.collected.tolist(),
        "remaining": state.remaining,
        "sum_U": result.covered_now,
    }
    if terms is not None:
        rec["rewards"] = [{k: round(v, 10) for k, v in t.items()} for t in terms]
    return rec


def run_episode(
    env: EnvSpec,
    policy: Policy,
    seed: int,
    log: IO[str] | None = None,
    timed: bool = False,
    on_step: Callable[[EpisodeState, StepResult], None] | None = None,
) -> EpisodeTrace:
    """Play one episode of ``policy`` and return its metric trace.

    The environment and the policy draw from separate sub-streams of ``seed`` so
    every policy sees the same initial map, trash, wind and drift noise.
    """
    state = new_episode(env.grid, env.fleet, seed, env.dyn, env.horizon)
    policy.reset(state, substream(seed, "policy"))
    trace = EpisodeTrace(seed=seed, policy=policy.name, scenario=env.grid.name, n_initial=state.n_initial)
    if log is not None:
        log.write(json.dumps(header_record(state, seed, env.fleet, policy.name)) + "\n")

    while not state.done:
        t0 = time.perf_counter()
        policy.begin_step(state)
        actions, _ = select_actions(state, policy.act)
        if timed:
            trace.decision_ms.append((time.perf_counter() - t0) * 1e3)
        result = apply_actions(state, actions)
        trace.collected.append(int(result.collected.sum()))
        trace.remaining.append(state.remaining)
        trace.mse.append(gaussian_mse(state.truth, state.model))
        if log is not None:
            _, terms = fleet_rewards(state, result, env.weights)
            log.write(json.dumps(step_record(state, result, terms)) + "\n")
        if on_step is not None:
            on_step(state, result)
    trace.collected_total = state.collected_total
    return trace
