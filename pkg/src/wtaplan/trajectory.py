"""Time-stamped state histories shared by targets and interceptors."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "Vx", "Vy", "Vz")


class Outcome(str, Enum):
    INTERCEPT = "intercept"
    MISS = "miss"
    TIMEOUT = "timeout"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of (x, y, z, Vx, Vy, Vz) at strictly increasing times.

    Axis convention: z points down, so altitude is ``-z``.
    """

    times: np.ndarray
    states: np.ndarray
    outcome: Outcome | None = None
    miss_distance: float = float("nan")

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if times.ndim != 1 or states.shape != (times.size, 6):
            raise ValueError(f"bad trajectory shapes {times.shape} / {states.shape}")
        if times.size == 0:
            raise ValueError("empty trajectory")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def launch_time(self) -> float:
        return float(self.times[0])

    @property
    def terminal_time(self) -> float:
        return float(self.times[-1])

    @property
    def flight_time(self) -> float:
        return self.terminal_time - self.launch_time

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :3]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, 3:]

    def shifted(self, dt: float) -> "Trajectory":
        """Same trajectory with every timestamp moved by ``dt``."""
        return Trajectory(self.times + dt, self.states, self.outcome, self.miss_distance)

    def sample(self, t) -> np.ndarray:
        """Linearly interpolated state(s) at time(s) ``t`` (clamped to the window)."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.states[:, j]) for j in range(6)], axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.outcome == other.outcome
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.states, other.states)
        )

    __hash__ = None

    def to_tsv(self) -> str:
        lines = ["\t".join(TRAJECTORY_COLUMNS)]
        for t, row in zip(self.times, self.states):
            lines.append("\t".join([f"{t:.4f}"] + [f"{v:.4f}" for v in row]))
        return "\n".join(lines) + "\n"
