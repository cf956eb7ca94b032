"""
Tests for the per-c task queue and its retry policy.
"""
import threading

import pytest

from src.task_executor import TaskExecutor
from src.task_manager import TaskManager

from tests.conftest import make_config

CONFIG = {'tasks': {'max_retries': 3}, 'solver': {'c0_factor': 1.5}}


class ThresholdExecutor:
    """Succeeds for c >= threshold and fails like a solve below it."""

    def __init__(self, threshold):
        self.threshold = threshold
        self.calls = []
        self.lock = threading.Lock()

    def execute_task(self, task_id, task_type, data):
        c = data['config'].c
        with self.lock:
            self.calls.append(c)
        if c >= self.threshold:
            return {"status": "success", "task_id": task_id, "task_type": task_type, "result": c}
        return {"status": "error", "task_id": task_id, "error": f"no contraction at c={c}",
                "error_type": "BallExit", "retryable": True}


def test_all_tasks_complete_in_creation_order():
    manager = TaskManager(CONFIG, ThresholdExecutor(0.0), workers=3)
    ladder = [2.0, 4.0, 8.0, 16.0, 32.0]
    for c in ladder:
        manager.create_task(make_config(c=c))
    tasks = manager.run()
    assert [task['c'] for task in tasks] == ladder
    assert [task['result'] for task in tasks] == ladder
    assert all(task['status'] == 'completed' for task in tasks)
    status = manager.get_task_status()
    assert status['completed'] == 5
    assert status['failed'] == 0
    assert status['pending'] == 0
    assert status['workers'] == 3


def test_retry_walks_c_upward_with_auto_c0():
    executor = ThresholdExecutor(4.0)
    manager = TaskManager(CONFIG, executor, workers=1, auto_c0=True)
    manager.create_task(make_config(c=2.0))
    (task,) = manager.run()
    assert task['status'] == 'completed'
    assert task['attempts'] == [2.0, 3.0, 4.5]
    assert task['config'].c == pytest.approx(4.5)
    assert task['retry_count'] == 2


def test_retries_are_bounded():
    manager = TaskManager(CONFIG, ThresholdExecutor(1e9), workers=2, auto_c0=True)
    manager.create_task(make_config(c=2.0))
    (task,) = manager.run()
    assert task['status'] == 'failed'
    assert len(task['attempts']) == CONFIG['tasks']['max_retries'] + 1


def test_failure_without_auto_c0_is_final():
    executor = ThresholdExecutor(4.0)
    manager = TaskManager(CONFIG, executor, workers=2)
    manager.create_task(make_config(c=2.0))
    manager.create_task(make_config(c=8.0))
    failed, done = manager.run()
    assert failed['status'] == 'failed'
    assert failed['attempts'] == [2.0]
    assert 'no contraction' in failed['error']
    assert done['status'] == 'completed'
    assert sorted(executor.calls) == [2.0, 8.0]


def test_executor_reports_solver_failures(context1):
    outcome = TaskExecutor(context1).execute_task('t1', 'solve', {'config': make_config(c=1.05)})
    assert outcome['status'] == 'error'
    assert outcome['retryable'] is True
    assert outcome['error_type'] in {'BallExit', 'NeumannDivergence', 'NoContraction'}


def test_executor_solves(context1):
    executor = TaskExecutor(context1)
    outcome = executor.execute_task('t2', 'solve', {'config': make_config(c=8.0).model_dump()})
    assert outcome['status'] == 'success'
    assert outcome['result'].accepted
    assert executor.tasks_processed == 1


def test_executor_rejects_unknown_type(context1):
    outcome = TaskExecutor(context1).execute_task('t3', 'summarize', {})
    assert outcome['status'] == 'error'
    assert outcome['retryable'] is False
