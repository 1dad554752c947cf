"""Convolutional dueling Q-network."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetSpec:
    height: int
    width: int
    in_channels: int = 6
    n_actions: int = 8
    conv_channels: tuple[int, ...] = (16, 32, 32)
    kernel: int = 3
    padding: int = 0
    fc: tuple[int, ...] = (256, 128, 64)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        d["fc"] = list(self.fc)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        d = dict(d)
        d["conv_channels"] = tuple(d["conv_channels"])
        d["fc"] = tuple(d["fc"])
        return cls(**d)


class DuelingQNetwork(nn.Module):
    """Conv feature extractor, fully connected trunk, then value/advantage heads.

    ``Q(s, a) = V(s) + A(s, a) - mean_a A(s, a)``.
    """

    def __init__(self, spec: NetSpec):
        super().__init__()
        self.spec = spec
        layers: list[nn.Module] = []
        c_in = spec.in_channels
        for c_out in spec.conv_channels:
            layers += [nn.Conv2d(c_in, c_out, spec.kernel, stride=1, padding=spec.padding), nn.ReLU()]
            c_in = c_out
        self.features = nn.Sequential(*layers, nn.Flatten())
        shrink = len(spec.conv_channels) * (spec.kernel - 1 - 2 * spec.padding)
        h, w = spec.height - shrink, spec.width - shrink
        if h < 1 or w < 1:
            raise ValueError(f"input {spec.height}x{spec.width} too small for the conv stack")
        n_in = c_in * h * w
        trunk: list[nn.Module] = []
        for n_out in spec.fc:
            trunk += [nn.Linear(n_in, n_out), nn.ReLU()]
            n_in = n_out
        self.trunk = nn.Sequential(*trunk)
        self.value = nn.Linear(n_in, 1)
        self.advantage = nn.Linear(n_in, spec.n_actions)

    def streams(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        z = self.trunk(self.features(x))
        return self.value(z), self.advantage(z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        v, a = self.streams(x)
        return v + a - a.mean(dim=1, keepdim=True)
