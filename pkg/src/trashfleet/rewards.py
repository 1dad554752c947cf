"""Per-team reward functions.

Cleaners: ``c_alpha * r_alpha + c_delta * r_delta``.
Scouts:   ``c_alpha * r_alpha + c_beta * r_beta + c_gamma * r_gamma``.

``r_alpha`` is minus the distance to the nearest cell the shared model marks as
holding trash, divided by the map diagonal.  It applies only when the agent
collected nothing this step and the model knows of some trash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import AgentKind, EpisodeState, StepResult


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 1.0
    beta: float = 2.0
    gamma: float = 1.0
    delta: float = 50.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"weight {name} must be finite")


@dataclass(frozen=True)
class StepOutcome:
    collected: int = 0
    new_coverage: float = 0.0
    model_change: float = 0.0
    nearest_trash: float | None = None  # cells; None when the model is empty


def nearest_known_trash(model: np.ndarray, pos) -> float | None:
    cells = np.argwhere(model > 0)
    if len(cells) == 0:
        return None
    d = cells - np.asarray(pos)
    return float(np.sqrt((d**2).sum(axis=1)).min())


def _distance_penalty(outcome: StepOutcome, map_diag: float) -> float:
    if outcome.collected > 0 or outcome.nearest_trash is None:
        return 0.0
    return -outcome.nearest_trash / map_diag


def reward_terms_cleaner(outcome: StepOutcome, w: RewardWeights, map_diag: float) -> dict[str, float]:
    r_alpha = _distance_penalty(outcome, map_diag)
    r_delta = float(outcome.collected)
    return {"alpha": w.alpha * r_alpha, "delta": w.delta * r_delta}


def reward_terms_scout(outcome: StepOutcome, w: RewardWeights, map_diag: float) -> dict[str, float]:
    return {
        "alpha": w.alpha * _distance_penalty(outcome, map_diag),
        "beta": w.beta * float(outcome.new_coverage),
        "gamma": w.gamma * float(outcome.model_change),
    }


def reward_cleaner(outcome: StepOutcome, w: RewardWeights, map_diag: float) -> float:
    return sum(reward_terms_cleaner(outcome, w, map_diag).values())


def reward_scout(outcome: StepOutcome, w: RewardWeights, map_diag: float) -> float:
    return sum(reward_terms_scout(outcome, w, map_diag).values())


def step_outcomes(state: EpisodeState, result: StepResult) -> list[StepOutcome]:
    """Assemble each agent's :class:`StepOutcome` right after ``apply_actions``."""
    out = []
    for n in range(state.n_agents):
        out.append(
            StepOutcome(
                collected=int(result.collected[n]),
                new_coverage=float(result.new_coverage[n]),
                model_change=float(result.model_change[n]),
                nearest_trash=nearest_known_trash(state.model, state.positions[n]),
            )
        )
    return out


def fleet_rewards(
    state: EpisodeState, result: StepResult, w: RewardWeights = RewardWeights()
) -> tuple[np.ndarray, list[dict[str, float]]]:
    """Reward for every agent plus the per-term breakdown used in episode logs."""
    diag = state.grid.diagonal
    rewards = np.zeros(state.n_agents)
    terms = []
    for n, outcome in enumerate(step_outcomes(state, result)):
        if state.specs[n].kind == AgentKind.CLEANER:
            parts = reward_terms_cleaner(outcome, w, diag)
        else:
            parts = reward_terms_scout(outcome, w, diag)
        rewards[n] = sum(parts.values())
        terms.append(parts)
    return rewards, terms
