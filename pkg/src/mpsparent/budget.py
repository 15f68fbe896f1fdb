"""Process-wide memory budget for dense allocations.

Every dense array whose size grows like ``d**L`` is checked here before it is
allocated.  Exceeding the budget raises :class:`ResourceLimitError`, which
carries the requested size, instead of letting the process get OOM-killed.
"""

from __future__ import annotations

import contextlib
import threading

DEFAULT_BUDGET = 4 * 1024**3

_state = threading.local()


class ResourceLimitError(MemoryError):
    def __init__(self, what: str, requested: int, budget: int):
        super().__init__(
            f"{what}: needs {requested / 2**20:.1f} MiB, budget is {budget / 2**20:.1f} MiB"
        )
        self.what = what
        self.requested = int(requested)
        self.budget = int(budget)


def get_memory_budget() -> int:
    return getattr(_state, "budget", DEFAULT_BUDGET)


def set_memory_budget(nbytes: int) -> None:
    _state.budget = int(nbytes)


@contextlib.contextmanager
def memory_budget(nbytes: int):
    """Temporarily replace the budget for the current thread."""
    old = get_memory_budget()
    set_memory_budget(nbytes)
    try:
        yield
    finally:
        set_memory_budget(old)


def require(nbytes: int, what: str) -> int:
    """Raise if ``nbytes`` exceeds the budget; otherwise record it as a peak candidate."""
    budget = get_memory_budget()
    if nbytes > budget:
        raise ResourceLimitError(what, nbytes, budget)
    if nbytes > getattr(_state, "peak", 0):
        _state.peak = int(nbytes)
    return int(nbytes)


def complex_bytes(*shape: int) -> int:
    n = 16
    for s in shape:
        n *= int(s)
    return n


@contextlib.contextmanager
def track_peak():
    """Collect the largest planned allocation inside the block.

    Yields a one-element list that holds the peak (in bytes) once the block exits.
    The value is deterministic: it is the largest size passed to :func:`require`,
    not a measurement of the allocator.
    """
    outer = getattr(_state, "peak", 0)
    _state.peak = 0
    box = [0]
    try:
        yield box
    finally:
        box[0] = _state.peak
        _state.peak = max(outer, box[0])
