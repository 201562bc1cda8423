"""Linear confidence-margin schedule."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractError


@dataclass(frozen=True)
class MarginSchedule:
    """Margin moves linearly from ``c_start`` to ``c_stop`` over ``c_epochs`` epochs, then stays."""

    c_start: float = 14.0
    c_stop: float = 4.0
    c_epochs: int = 10

    def __post_init__(self):
        if self.c_epochs < 1:
            raise ContractError(f"c_epochs must be >= 1, got {self.c_epochs}")
        if self.c_start < 0 or self.c_stop < 0:
            raise ContractError(f"margins must be >= 0, got {self.c_start}, {self.c_stop}")

    def margin_at(self, epoch: float) -> float:
        # fractional epochs are accepted for per-step sweeping
        if epoch < 0:
            raise ContractError(f"epoch must be >= 0, got {epoch}")
        if epoch >= self.c_epochs:
            return float(self.c_stop)
        return self.c_start + (self.c_stop - self.c_start) * (epoch / self.c_epochs)


def margin_at(schedule: MarginSchedule, epoch: float) -> float:
    return schedule.margin_at(epoch)
