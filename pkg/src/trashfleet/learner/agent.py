"""Team networks, checkpoints and the greedy evaluation policy built on them."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..perception import ObservationTracker
from ..policies import Policy
from ..world import AgentKind, EpisodeState
from .dqn import masked
from .network import DuelingQNetwork, NetSpec

TEAMS = ("scout", "cleaner")
CHECKPOINT_FORMAT = "trashfleet-checkpoint"
CHECKPOINT_VERSION = 1


def team_of(state: EpisodeState, n: int) -> str:
    return "scout" if state.specs[n].kind == AgentKind.SCOUT else "cleaner"


@dataclass
class Team:
    online: DuelingQNetwork
    target: DuelingQNetwork
    optimizer: torch.optim.Optimizer | None = None
    grad_steps: int = 0
    losses: list[float] = field(default_factory=list)

    @classmethod
    def build(cls, spec: NetSpec, lr: float | None = None) -> "Team":
        online = DuelingQNetwork(spec)
        target = copy.deepcopy(online)
        for p in target.parameters():
            p.requires_grad_(False)
        opt = torch.optim.Adam(online.parameters(), lr=lr) if lr is not None else None
        return cls(online, target, opt)

    def sync(self) -> None:
        self.target.load_state_dict(self.online.state_dict())


def save_checkpoint(path: str | Path, teams: dict[str, Team], spec: NetSpec, **extra) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "net": spec.to_dict(),
        "teams": {
            name: {
                "online": t.online.state_dict(),
                "target": t.target.state_dict(),
                "optimizer": t.optimizer.state_dict() if t.optimizer else None,
                "grad_steps": t.grad_steps,
            }
            for name, t in teams.items()
        },
        **extra,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path, lr: float | None = None) -> tuple[dict[str, Team], NetSpec, dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a trashfleet checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    spec = NetSpec.from_dict(payload["net"])
    teams = {}
    for name, blob in payload["teams"].items():
        team = Team.build(spec, lr)
        team.online.load_state_dict(blob["online"])
        team.target.load_state_dict(blob["target"])
        if team.optimizer is not None and blob["optimizer"] is not None:
            team.optimizer.load_state_dict(blob["optimizer"])
        team.grad_steps = blob["grad_steps"]
        teams[name] = team
    return teams, spec, payload


def team_q_values(state: EpisodeState, teams: dict[str, Team], obs: np.ndarray) -> np.ndarray:
    """Unmasked Q-values for every agent, one batched forward pass per team."""
    q = np.zeros((state.n_agents, teams[TEAMS[0]].online.spec.n_actions))
    for name in TEAMS:
        idx = [n for n in range(state.n_agents) if team_of(state, n) == name]
        if not idx:
            continue
        net = teams[name].online
        with torch.no_grad():
            out = net(torch.as_tensor(obs[idx], dtype=next(net.parameters()).dtype))
        q[idx] = out.numpy()
    return q


class DQNPolicy(Policy):
    """Masked argmax of each team's online network."""

    def __init__(self, teams: dict[str, Team], name: str = "dddql"):
        self.teams = teams
        self.name = name

    @classmethod
    def from_checkpoint(cls, path: str | Path, name: str = "dddql") -> "DQNPolicy":
        teams, _, _ = load_checkpoint(path)
        return cls(teams, name)

    def reset(self, state, rng):
        super().reset(state, rng)
        self.tracker = ObservationTracker(state)
        self._t = state.t

    def begin_step(self, state):
        if state.t != self._t:
            self.tracker.update(state)
            self._t = state.t
        self.q = team_q_values(state, self.teams, self.tracker.observe_all(state))

    def act(self, state, n, mask):
        q = masked(torch.as_tensor(self.q[n]), torch.as_tensor(mask))
        return int(torch.argmax(q))
