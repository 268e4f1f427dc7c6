"""Optimizer progress callbacks.

:class:`OptimizerHooks` groups optional callables invoked by
:func:`optimizer.run_sussade`:

``on_generation``
    Called after every generation with ``(generation, best, mean)``.
``on_improvement``
    Called when the best fitness strictly increases, with
    ``(generation, best)``.
``on_checkpoint``
    Called with the path of every checkpoint file written.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional


@dataclass
class OptimizerHooks:
    """Container for optimizer progress callbacks."""

    on_generation: Optional[Callable[[int, float, float], None]] = None
    on_improvement: Optional[Callable[[int, float], None]] = None
    on_checkpoint: Optional[Callable[[Path], None]] = None
