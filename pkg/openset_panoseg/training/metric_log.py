"""
Per-step metric logs.
"""
import csv
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Literal, Optional

from ..models import LossBreakdown
from ..paths import ensure_directory

COLUMNS = list(LossBreakdown.model_fields)


class MetricLog(ABC):
    """Abstract base class for metric log implementations."""

    @abstractmethod
    def append(self, entry: LossBreakdown) -> None:
        """Record one training step."""
        pass

    @abstractmethod
    def entries(self) -> List[LossBreakdown]:
        """All recorded steps in order."""
        pass

    def close(self) -> None:
        """Flush and release resources (no-op by default)."""
        pass


class MemoryMetricLog(MetricLog):
    """In-memory metric log (for development/testing)."""

    def __init__(self):
        self._entries: List[LossBreakdown] = []

    def append(self, entry: LossBreakdown) -> None:
        self._entries.append(entry.model_copy())

    def entries(self) -> List[LossBreakdown]:
        return list(self._entries)


class CsvMetricLog(MetricLog):
    """Appends one CSV row per step; an existing file is continued (resume)."""

    def __init__(self, path: str):
        self.path = Path(path)
        ensure_directory(self.path.parent)
        new_file = not self.path.exists() or self.path.stat().st_size == 0
        self._file = open(self.path, "a", encoding="utf-8", newline="")
        self._writer = csv.DictWriter(self._file, fieldnames=COLUMNS)
        if new_file:
            self._writer.writeheader()
            self._file.flush()

    def append(self, entry: LossBreakdown) -> None:
        self._writer.writerow({key: repr(value) if isinstance(value, float) else value
                               for key, value in entry.model_dump().items()})
        self._file.flush()

    def entries(self) -> List[LossBreakdown]:
        self._file.flush()
        with open(self.path, "r", encoding="utf-8", newline="") as f:
            return [
                LossBreakdown(**{k: (v == "True") if k == "skipped" else v for k, v in row.items()})
                for row in csv.DictReader(f)
            ]

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()


def create_metric_log(log_type: Literal["memory", "csv"], path: Optional[str] = None) -> MetricLog:
    """
    Create a metric log instance.

    Args:
        log_type: Type of log ("memory" or "csv")
        path: CSV file path (csv only)
    """
    if log_type == "memory":
        return MemoryMetricLog()
    elif log_type == "csv":
        if path is None:
            raise ValueError("csv metric log needs a path")
        return CsvMetricLog(path)
    else:
        raise ValueError(f"Unknown metric log type: {log_type}")
