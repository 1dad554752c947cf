"""Double-Q targets, prioritized gradient steps and behaviour policies."""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch
from torch import nn

from .replay import BufferUnderfilledError, PrioritizedReplayBuffer

NEG_INF = float("-inf")


def masked(q: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Set illegal entries to -inf. Rows with no legal action are left untouched."""
    mask = mask.bool()
    none_legal = ~mask.any(dim=-1, keepdim=True)
    return torch.where(mask | none_legal, q, torch.full_like(q, NEG_INF))


def q_values(net: nn.Module, obs, mask) -> np.ndarray:
    """Q-values for one observation with illegal actions at -inf."""
    x = torch.as_tensor(np.asarray(obs), dtype=next(net.parameters()).dtype).unsqueeze(0)
    with torch.no_grad():
        q = net(x)[0]
    return masked(q, torch.as_tensor(np.asarray(mask))).numpy().astype(np.float64)


def td_target(
    rewards: torch.Tensor,
    next_obs: torch.Tensor,
    next_masks: torch.Tensor,
    dones: torch.Tensor,
    net: nn.Module,
    target: nn.Module,
    gamma: float,
) -> tuple[torch.Tensor, torch.Tensor]:
    """``R + gamma * Q_target(s', argmax_a' Q(s', a'))``; terminal rows get ``R``.

    Returns the targets and the actions picked by the online network, which
    are the ones the target network evaluated.
    """
    with torch.no_grad():
        chosen = masked(net(next_obs), next_masks).argmax(dim=1)
        q_next = target(next_obs).gather(1, chosen[:, None]).squeeze(1)
        q_next = torch.where(dones.bool(), torch.zeros_like(q_next), q_next)
        return rewards + gamma * q_next, chosen


def _to_tensors(data: dict, dtype: torch.dtype) -> dict[str, torch.Tensor]:
    return {
        "obs": torch.as_tensor(data["obs"], dtype=dtype),
        "actions": torch.as_tensor(data["actions"], dtype=torch.int64),
        "rewards": torch.as_tensor(data["rewards"], dtype=dtype),
        "next_obs": torch.as_tensor(data["next_obs"], dtype=dtype),
        "next_masks": torch.as_tensor(data["next_masks"], dtype=torch.bool),
        "dones": torch.as_tensor(data["dones"], dtype=torch.bool),
    }


def train_step(
    buffer: PrioritizedReplayBuffer,
    net: nn.Module,
    target: nn.Module,
    optimizer: torch.optim.Optimizer,
    batch_size: int,
    gamma: float,
    beta: float,
    rng: np.random.Generator,
    audit: list | None = None,
) -> float:
    """One importance-weighted squared-TD gradient step; refreshes priorities.

    When ``audit`` is a list, each call appends ``(chosen, online_argmax)`` so
    callers can confirm the evaluated action is the online greedy one.
    """
    if len(buffer) < batch_size:
        raise BufferUnderfilledError(f"buffer holds {len(buffer)} < batch {batch_size}")
    dtype = next(net.parameters()).dtype
    idx, weights, data = buffer.sample(batch_size, beta, rng)
    b = _to_tensors(data, dtype)
    y, chosen = td_target(b["rewards"], b["next_obs"], b["next_masks"], b["dones"], net, target, gamma)
    if audit is not None:
        with torch.no_grad():
            audit.append((chosen.clone(), masked(net(b["next_obs"]), b["next_masks"]).argmax(dim=1)))

    q = net(b["obs"]).gather(1, b["actions"][:, None]).squeeze(1)
    td = y - q
    loss = (torch.as_tensor(weights, dtype=dtype) * td.pow(2)).mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    buffer.update_priorities(idx, td.detach().abs().numpy())
    return float(loss.item())


def behavior_action(
    q: np.ndarray,
    mask: np.ndarray,
    epsilon: float,
    mixed: bool,
    greedy_action: Callable[[], int],
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over masked Q-values.

    An exploratory draw is uniform over legal moves, or in mixed mode a fair
    coin between that and ``greedy_action()``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    legal = np.flatnonzero(mask)
    if rng.random() >= epsilon:
        qq = np.where(mask, q, -np.inf)
        return int(np.argmax(qq))
    if mixed and rng.random() < 0.5:
        return int(greedy_action())
    return int(legal[rng.integers(len(legal))])
