"""Stage tracing for dry runs and debugging."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class StageEvent:
    stage: str
    in_rms: float | None = None
    out_rms: float | None = None

    def line(self) -> str:
        if self.in_rms is None or self.out_rms is None:
            return f"stage={self.stage}"
        return f"stage={self.stage} in_rms={self.in_rms:.6g} out_rms={self.out_rms:.6g}"


@dataclass
class StageTrace:
    """Ordered record of processing stages, with in/out RMS when executed."""

    events: list[StageEvent] = field(default_factory=list)

    def add(self, stage: str, in_rms: float, out_rms: float) -> None:
        self.events.append(StageEvent(stage, float(in_rms), float(out_rms)))

    def mark(self, stage: str) -> None:
        """Record a stage that is planned but not executed (dry runs)."""
        self.events.append(StageEvent(stage))

    def stages(self) -> list[str]:
        return [e.stage for e in self.events]

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]
