"""Process-wide knobs: atom budget and worker-pool size."""
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

DEFAULT_BUDGET = 5_000_000
BUDGET_ENV = "CONFORMAL_LAB_BUDGET"

_state = {"budget": None, "threads": 1}


def default_budget():
    if _state["budget"] is not None:
        return _state["budget"]
    env = os.environ.get(BUDGET_ENV)
    if env:
        return int(env)
    return DEFAULT_BUDGET


def resolve_budget(budget):
    return default_budget() if budget is None else int(budget)


def set_budget(budget):
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive")
    _state["budget"] = budget


def threads():
    return _state["threads"]


def set_threads(n):
    if n < 1:
        raise ValueError("threads must be >= 1")
    _state["threads"] = int(n)


@contextmanager
def settings(budget=None, threads=None):
    saved = dict(_state)
    try:
        if budget is not None:
            set_budget(budget)
        if threads is not None:
            set_threads(threads)
        yield
    finally:
        _state.update(saved)


def ordered_map(fn, items):
    """``[fn(x) for x in items]``, fanned out over the worker pool.

    Results come back in input order, so the output never depends on
    scheduling.
    """
    items = list(items)
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
