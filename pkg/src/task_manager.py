"""
Task manager for concurrent per-c solves.
"""
import threading
import logging
import uuid
from typing import Dict, List, Optional, Any
from queue import Queue
from datetime import datetime

from .solver import SolveConfig

logger = logging.getLogger(__name__)


class TaskManager:
    def __init__(self, config: Dict[str, Any], task_executor, workers: int = 1, auto_c0: bool = False):
        self.config = config
        self.task_executor = task_executor
        self.workers = max(1, int(workers))
        self.auto_c0 = auto_c0
        self.c0_factor = float(config.get('solver', {}).get('c0_factor', 1.5))

        # Task queues
        self.pending_tasks: Queue = Queue()
        self.in_progress_tasks: Dict[str, Dict] = {}
        self.completed_tasks: Dict[str, Dict] = {}
        self.failed_tasks: Dict[str, Dict] = {}
        self.order: List[str] = []

        # Thread safety
        self.lock = threading.RLock()

        logger.info(f"Task manager initialized with {self.workers} worker(s)")

    def create_task(self, solve_config: SolveConfig) -> str:
        """Queue a solve at one c."""
        task_id = str(uuid.uuid4())[:8]

        task = {
            "id": task_id,
            "type": "solve",
            "c": solve_config.c,
            "config": solve_config,
            "status": "pending",
            "created_at": datetime.now().isoformat(),
            "attempts": [],
            "retry_count": 0,
            "result": None,
            "error": None
        }

        with self.lock:
            self.order.append(task_id)
            self.pending_tasks.put(task)

        logger.info(f"Created task {task_id} for c={solve_config.c}")
        return task_id

    def run(self) -> List[Dict]:
        """Drain the queue with the worker threads; returns tasks in creation order."""
        threads = []
        for i in range(self.workers):
            thread = threading.Thread(target=self._worker, name=f"solve-worker-{i}", daemon=True)
            thread.start()
            threads.append(thread)

        self.pending_tasks.join()
        for _ in threads:
            self.pending_tasks.put(None)
        for thread in threads:
            thread.join()

        return self.tasks()

    def _worker(self):
        while True:
            task = self.pending_tasks.get()
            try:
                if task is None:
                    return
                self._execute(task)
            except Exception as e:
                logger.error(f"Error in task processing: {str(e)}")
            finally:
                self.pending_tasks.task_done()

    def _execute(self, task: Dict):
        with self.lock:
            task['status'] = 'in_progress'
            task['attempts'].append(task['config'].c)
            self.in_progress_tasks[task['id']] = task

        outcome = self.task_executor.execute_task(task['id'], task['type'], {"config": task['config']})

        if outcome['status'] == 'success':
            self._process_task_result(task['id'], outcome['result'])
        else:
            self._handle_task_failure(task['id'], outcome)

    def _process_task_result(self, task_id: str, result: Any):
        with self.lock:
            task = self.in_progress_tasks.pop(task_id)
            task['status'] = 'completed'
            task['result'] = result
            task['completed_at'] = datetime.now().isoformat()
            self.completed_tasks[task_id] = task
            logger.info(f"Task {task_id} completed at c={task['config'].c}")

    def _handle_task_failure(self, task_id: str, outcome: Dict):
        """Handle task failure; with auto_c0 a NoContraction is retried at a larger c."""
        with self.lock:
            task = self.in_progress_tasks.pop(task_id)
            task['error'] = outcome.get('error')
            task['retry_count'] += 1

            max_retries = self.config['tasks']['max_retries']

            if not (self.auto_c0 and outcome.get('retryable')) or task['retry_count'] > max_retries:
                task['status'] = 'failed'
                task['failed_at'] = datetime.now().isoformat()
                self.failed_tasks[task_id] = task
                logger.warning(f"Task {task_id} failed at c={task['config'].c}: {task['error']}")
            else:
                next_c = task['config'].c * self.c0_factor
                task['config'] = task['config'].with_c(next_c)
                task['status'] = 'pending'
                self.pending_tasks.put(task)
                logger.info(f"Task {task_id} queued for retry at c={next_c:.6g} "
                            f"({task['retry_count']}/{max_retries})")

    def tasks(self) -> List[Dict]:
        with self.lock:
            lookup = {**self.completed_tasks, **self.failed_tasks, **self.in_progress_tasks}
            return [lookup[task_id] for task_id in self.order if task_id in lookup]

    def get_task_status(self) -> Dict:
        """Get status of all tasks."""
        with self.lock:
            return {
                "pending": self.pending_tasks.qsize(),
                "in_progress": len(self.in_progress_tasks),
                "completed": len(self.completed_tasks),
                "failed": len(self.failed_tasks),
                "workers": self.workers
            }
