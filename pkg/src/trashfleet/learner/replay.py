"""Proportional prioritized replay backed by an array sum-tree."""

from __future__ import annotations

import numpy as np


class SumTree:
    """Binary tree whose internal nodes hold the sum of their children.

    Heap layout with the root at index 1 and leaves at ``[size, 2*size)``.
    Parents are recomputed from their children rather than patched by deltas,
    so the root never drifts from the sum of the leaves.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.size = 1 << max(0, (capacity - 1).bit_length())
        self.nodes = np.zeros(2 * self.size, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def leaves(self) -> np.ndarray:
        return self.nodes[self.size : self.size + self.capacity]

    def __getitem__(self, idx):
        return self.nodes[np.asarray(idx) + self.size]

    def update(self, idx, values) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), idx.shape)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("priorities must be finite and non-negative")
        nodes = idx + self.size
        if len(nodes) == 1:
            node = int(nodes[0])
            tree = self.nodes
            tree[node] = values[0]
            node //= 2
            while node >= 1:
                tree[node] = tree[2 * node] + tree[2 * node + 1]
                node //= 2
            return
        # later writes to the same slot win, as with sequential updates
        self.nodes[nodes] = values
        nodes = np.unique(nodes // 2)
        while nodes[0] >= 1:
            self.nodes[nodes] = self.nodes[2 * nodes] + self.nodes[2 * nodes + 1]
            if nodes[0] == 1:
                break
            nodes = np.unique(nodes // 2)

    def find(self, mass) -> np.ndarray:
        """Leaf index whose cumulative-sum interval contains each ``mass``."""
        mass = np.array(mass, dtype=np.float64, ndmin=1)
        node = np.ones(mass.shape, dtype=np.int64)
        while node[0] < self.size:
            left = 2 * node
            go_right = mass >= self.nodes[left]
            mass = np.where(go_right, mass - self.nodes[left], mass)
            node = np.where(go_right, left + 1, left)
        leaf = node - self.size
        # Round-off can walk past the last filled slot; pull back to a live leaf.
        bad = (leaf >= self.capacity) | (self.nodes[node] <= 0)
        if np.any(bad):
            live = np.flatnonzero(self.leaves() > 0)
            pos = np.searchsorted(live, leaf[bad], side="right") - 1
            leaf[bad] = live[np.clip(pos, 0, None)]
        return leaf


class BufferUnderfilledError(RuntimeError):
    pass


class PrioritizedReplayBuffer:
    """FIFO ring of transitions sampled with probability ``p_i**alpha / sum p**alpha``.

    Observations are stored as float16 and the storage arrays grow on demand,
    so a large nominal capacity costs memory only once it is actually filled.
    """

    _INITIAL_ROWS = 1024

    def __init__(
        self,
        capacity: int,
        obs_shape: tuple[int, ...],
        n_actions: int = 8,
        alpha: float = 0.6,
        eps: float = 1e-6,
        obs_dtype=np.float16,
    ):
        self.capacity = int(capacity)
        self.alpha = alpha
        self.eps = eps
        self.tree = SumTree(self.capacity)
        rows = min(self.capacity, self._INITIAL_ROWS)
        self.obs = np.zeros((rows, *obs_shape), dtype=obs_dtype)
        self.next_obs = np.zeros((rows, *obs_shape), dtype=obs_dtype)
        self.actions = np.zeros(rows, dtype=np.int64)
        self.rewards = np.zeros(rows, dtype=np.float32)
        self.dones = np.zeros(rows, dtype=bool)
        self.next_masks = np.zeros((rows, n_actions), dtype=bool)
        self.max_priority = 1.0
        self.cursor = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    _STORAGE = ("obs", "next_obs", "actions", "rewards", "dones", "next_masks")

    def _grow(self) -> None:
        rows = min(self.capacity, 2 * len(self.actions))
        for name in self._STORAGE:
            old = getattr(self, name)
            new = np.zeros((rows, *old.shape[1:]), dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def add(self, obs, action, reward, next_obs, next_mask, done, priority: float | None = None) -> int:
        i = self.cursor
        if i >= len(self.actions):
            self._grow()
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.dones[i] = done
        self.next_masks[i] = next_mask
        p = self.max_priority if priority is None else float(priority)
        if p <= 0:
            raise ValueError("priority must be positive")
        self.max_priority = max(self.max_priority, p)
        self.tree.update(i, p**self.alpha)
        self.cursor = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        leaves = self.tree.leaves()[: self.count]
        return leaves / leaves.sum()

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if self.count == 0:
            raise BufferUnderfilledError("cannot sample from an empty buffer")
        total = self.tree.total
        # one uniform draw inside each of ``batch`` equal slices of the mass
        edges = np.arange(batch) * (total / batch)
        mass = edges + rng.random(batch) * (total / batch)
        return self.tree.find(np.minimum(mass, np.nextafter(total, 0)))

    def sample(self, batch: int, beta: float, rng: np.random.Generator):
        if self.count < batch:
            raise BufferUnderfilledError(f"buffer holds {self.count} < batch {batch}")
        idx = self.sample_indices(batch, rng)
        probs = self.tree[idx] / self.tree.total
        weights = (self.count * probs) ** (-beta)
        weights = weights / weights.max()
        data = {
            "obs": self.obs[idx].astype(np.float32),
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx].astype(np.float32),
            "next_masks": self.next_masks[idx],
            "dones": self.dones[idx],
        }
        return idx, weights.astype(np.float32), data

    def update_priorities(self, idx, td_errors) -> None:
        p = np.abs(np.asarray(td_errors, dtype=np.float64)) + self.eps
        self.max_priority = max(self.max_priority, float(p.max()))
        self.tree.update(idx, p**self.alpha)
