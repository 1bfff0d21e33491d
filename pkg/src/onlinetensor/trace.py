"""Per-run records produced by every online learner."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class PlayRecord:
    t: int
    index: tuple[int, int, int]
    prediction: float
    y: float
    g: float
    loss: float


@dataclass
class ExperimentTrace:
    """Everything one algorithm did in one game.

    Arrays are aligned by play: ``indices[t]`` was played at step ``t + 1``.
    """

    algorithm: str
    indices: np.ndarray
    y: np.ndarray
    p: np.ndarray
    g: np.ndarray
    loss: np.ndarray
    eta: np.ndarray
    G: np.ndarray
    config: dict = field(default_factory=dict)
    comparator_loss: float | None = None
    final: np.ndarray | None = None
    wall_time: float = 0.0

    @property
    def T(self) -> int:
        return int(self.loss.shape[0])

    @property
    def cumulative_loss(self) -> float:
        return float(np.sum(self.loss))

    @property
    def regret(self) -> float | None:
        if self.comparator_loss is None:
            return None
        return self.cumulative_loss - self.comparator_loss

    def records(self) -> Iterator[PlayRecord]:
        for t in range(self.T):
            yield PlayRecord(
                t=t + 1,
                index=tuple(int(v) for v in self.indices[t]),
                prediction=float(self.p[t]),
                y=float(self.y[t]),
                g=float(self.g[t]),
                loss=float(self.loss[t]),
            )

    def round_average(self, R: int, window: int | None = None) -> np.ndarray:
        return round_average(self.loss, R, window=window)


def round_average(losses, R: int, window: int | None = None) -> np.ndarray:
    """Mean loss over ``R`` contiguous blocks whose sizes differ by at most one.

    With ``window`` set, each round reports instead the trailing moving
    average of the last ``window`` losses ending at that round's last step.
    """
    losses = np.asarray(losses, dtype=float)
    T = losses.shape[0]
    if R < 1 or R > T:
        raise ValueError(f"need 1 <= R <= T, got R={R}, T={T}")
    blocks = np.array_split(losses, R)
    if window is None:
        return np.array([b.mean() for b in blocks])
    ends = np.cumsum([b.shape[0] for b in blocks])
    return np.array([losses[max(0, e - window):e].mean() for e in ends])


def empty_trace(algorithm: str, T: int, **kwargs) -> ExperimentTrace:
    return ExperimentTrace(
        algorithm=algorithm,
        indices=np.zeros((T, 3), dtype=np.int64),
        y=np.full(T, np.nan),
        p=np.zeros(T),
        g=np.zeros(T),
        loss=np.zeros(T),
        eta=np.zeros(T),
        G=np.zeros(T),
        **kwargs,
    )
