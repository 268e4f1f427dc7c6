"""Evaluator back ends for batches of independent evaluations."""

from .pool import Evaluator, PoolEvaluator, RecordingEvaluator, SerialEvaluator, make_evaluator

__all__ = ["Evaluator", "SerialEvaluator", "PoolEvaluator", "RecordingEvaluator", "make_evaluator"]
