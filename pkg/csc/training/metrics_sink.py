"""Where training records go: one JSON object per line, never only the log."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

from pydantic import BaseModel, ConfigDict

from csc.models import EpochSummary, StepMetrics

STEP_FILE = "metrics.jsonl"
EPOCH_FILE = "epochs.jsonl"
DIAGNOSTIC_FILE = "diagnostics.jsonl"


class TrainingDiagnostic(BaseModel):
    epoch: int
    step: int
    example_id: str | None = None
    reason: str
    values: dict[str, Any] = {}

    model_config = ConfigDict(frozen=True)


@runtime_checkable
class MetricsSink(Protocol):
    def write_step(self, record: StepMetrics) -> None:
        ...

    def write_epoch(self, record: EpochSummary) -> None:
        ...

    def write_diagnostic(self, record: TrainingDiagnostic) -> None:
        ...


class JsonlMetricsSink:
    """Appends records to ``metrics.jsonl``, ``epochs.jsonl`` and ``diagnostics.jsonl``."""

    def __init__(self, directory: str | Path) -> None:
        self._directory = Path(directory)
        self._directory.mkdir(parents=True, exist_ok=True)

    @property
    def directory(self) -> Path:
        return self._directory

    def _append(self, name: str, record: BaseModel) -> None:
        with (self._directory / name).open("a", encoding="utf-8") as handle:
            handle.write(record.model_dump_json() + "\n")

    def write_step(self, record: StepMetrics) -> None:
        self._append(STEP_FILE, record)

    def write_epoch(self, record: EpochSummary) -> None:
        self._append(EPOCH_FILE, record)

    def write_diagnostic(self, record: TrainingDiagnostic) -> None:
        self._append(DIAGNOSTIC_FILE, record)

    def truncate_after(self, epoch: int) -> None:
        """Drop records of epochs later than ``epoch`` so a resumed run continues the files."""
        for name in (STEP_FILE, EPOCH_FILE):
            path = self._directory / name
            if not path.exists():
                continue
            kept = [
                line
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip() and json.loads(line)["epoch"] <= epoch
            ]
            path.write_text("".join(f"{line}\n" for line in kept), encoding="utf-8")


def read_step_metrics(directory: str | Path) -> list[StepMetrics]:
    path = Path(directory) / STEP_FILE
    if not path.exists():
        return []
    return [
        StepMetrics.model_validate_json(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


__all__ = [
    "DIAGNOSTIC_FILE",
    "EPOCH_FILE",
    "STEP_FILE",
    "JsonlMetricsSink",
    "MetricsSink",
    "TrainingDiagnostic",
    "read_step_metrics",
]
