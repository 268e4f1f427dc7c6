"""In-process run counters with an optional JSON mirror."""

from __future__ import annotations

import json
import threading
from typing import Dict, Optional

_metrics: Dict[str, int] = {
    "fitness_evaluations": 0,
    "generations": 0,
    "failed_evaluations": 0,
    "trace_renormalizations": 0,
    "checkpoints_written": 0,
}

_output_file: Optional[str] = None
_lock = threading.Lock()


def get_metrics() -> Dict[str, int]:
    """Return a snapshot of the current metrics."""
    with _lock:
        return dict(_metrics)


def reset_metrics() -> None:
    """Reset all counters to zero."""
    with _lock:
        for key in _metrics:
            _metrics[key] = 0
    _write()


def set_output_file(path: str | None) -> None:
    """Write metrics to ``path`` whenever they change."""
    global _output_file
    _output_file = path
    _write()


def _bump(key: str, amount: int = 1) -> None:
    with _lock:
        _metrics[key] += amount
    _write()


def record_fitness_evaluations(count: int = 1) -> None:
    _bump("fitness_evaluations", count)


def record_generation() -> None:
    _bump("generations")


def record_failed_evaluation() -> None:
    _bump("failed_evaluations")


def record_trace_renormalization() -> None:
    _bump("trace_renormalizations")


def record_checkpoint() -> None:
    _bump("checkpoints_written")


def _write() -> None:
    if _output_file:
        snapshot = get_metrics()
        with open(_output_file, "w", encoding="utf-8") as f:
            json.dump(snapshot, f)
