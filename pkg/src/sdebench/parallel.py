"""Worker-pool plumbing shared by the experiment drivers.

Tasks are pure functions of their arguments (all randomness comes from
per-trajectory streams), so results depend only on the task list, never
on scheduling.  Results are returned in task order, which keeps
floating-point reductions reproducible at any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

__all__ = ["default_workers", "run_tasks"]


def default_workers() -> int:
    return os.cpu_count() or 1


def run_tasks(fn, tasks, workers: int):
    """Apply ``fn`` to each task, in parallel when workers > 1.

    Returns results in task order.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
