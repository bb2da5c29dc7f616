"""First-in-first-out delay lines for sensory observations and motor commands.

Each line returns the element pushed a fixed number of simulation
timesteps earlier (default timestep 5 ms), with a caller-supplied prefill
covering the warm-up period.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_TIMESTEP_S = 0.005


class DelayLine:
    """Fixed-latency FIFO over elements of constant shape."""

    def __init__(self, delay_steps: int, prefill_value):
        if delay_steps < 0:
            raise InvalidInputError("delay_steps must be nonnegative")
        self.delay_steps = int(delay_steps)
        first = np.array(prefill_value, dtype=float)
        self._shape = first.shape
        self._buf = deque(
            (first.copy() for _ in range(self.delay_steps)),
            maxlen=self.delay_steps + 1,
        )

    def step(self, value):
        """Push the current element, return the one from delay_steps ago."""
        value = np.array(value, dtype=float)
        if value.shape != self._shape:
            raise InvalidInputError(
                f"element shape {value.shape} does not match line shape {self._shape}"
            )
        if self.delay_steps == 0:
            return value
        self._buf.append(value)
        return self._buf.popleft()

    def __len__(self):
        return len(self._buf)


def delay_step(line: DelayLine, value):
    """Functional alias for DelayLine.step."""
    return line.step(value)


@dataclass(frozen=True)
class DelayConfig:
    """Per-modality delays in integer timesteps."""

    proprioception: int = 0
    vision: int = 0
    motor: int = 0

    def __post_init__(self):
        for name in ("proprioception", "vision", "motor"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise InvalidInputError(f"{name} delay must be a nonnegative integer")

    @classmethod
    def from_dict(cls, d: dict) -> "DelayConfig":
        known = {"proprioception", "vision", "motor"}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown delay keys: {sorted(unknown)}")
        return cls(**{k: int(v) for k, v in d.items()})
