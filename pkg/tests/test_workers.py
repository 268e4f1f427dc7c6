import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).resolve().parents[1] / "src"))

from workers import (  # noqa: E402
    PoolEvaluator,
    RecordingEvaluator,
    SerialEvaluator,
    make_evaluator,
)


def _square(x):
    return x * x


def test_serial_preserves_order():
    assert SerialEvaluator().map(_square, [3, 1, 2]) == [9, 1, 4]


def test_recording_evaluator_counts_batches():
    rec = RecordingEvaluator()
    rec.map(_square, range(4))
    rec.map(_square, iter([5, 6]))
    assert rec.batches == [4, 2]


def test_pool_matches_serial():
    items = [-3, 1, -2, 7, 0, -5]
    with PoolEvaluator(2) as pool:
        assert pool.map(abs, items) == SerialEvaluator().map(abs, items)


def test_make_evaluator_selects_backend():
    assert isinstance(make_evaluator(None), SerialEvaluator)
    assert isinstance(make_evaluator(1), SerialEvaluator)
    pool = make_evaluator(3)
    assert isinstance(pool, PoolEvaluator)
    pool.close()


def test_pool_rejects_zero_workers():
    with pytest.raises(ValueError):
        PoolEvaluator(0)
