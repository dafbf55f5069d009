"""Shared experience replay used by both layers."""

import numpy as np


class ReplayBuffer:
    """Fixed-capacity FIFO ring of named array fields with uniform sampling."""

    def __init__(self, capacity, fields, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.data = {name: np.zeros((self.capacity, *shape), dtype=dtype)
                     for name, shape in fields.items()}
        self.size = 0
        self.next = 0

    def __len__(self):
        return self.size

    def add(self, **items):
        for name, arr in self.data.items():
            arr[self.next] = items[name]
        self.next = (self.next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch, rng):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=min(batch, self.size))

    def sample(self, batch, rng):
        idx = self.sample_indices(batch, rng)
        return {name: arr[idx].astype(np.float64) for name, arr in self.data.items()}
