"""Injectable clocks.

Everything in the pilot loop that waits or timestamps goes through a clock
object, so integration tests can drive hours of polling in milliseconds.
Real time exists only at the outermost edge of a live deployment.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimClock:
    """Deterministic simulated clock with scheduled side effects.

    ``sleep`` advances simulated time, firing any actions scheduled inside
    the interval in timestamp order (time stands at the action's instant
    while it runs).  ``now`` is safe from other threads; scheduling and
    sleeping belong to the driving thread.
    """

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()
        self._seq = itertools.count()
        self._actions: list[tuple[float, int, Callable[[], None]]] = []

    def now(self) -> float:
        with self._lock:
            return self._now

    def schedule(self, t: float, action: Callable[[], None]) -> None:
        with self._lock:
            heapq.heappush(self._actions, (t, next(self._seq), action))

    def advance(self, seconds: float) -> None:
        self.sleep(seconds)

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot sleep a negative interval")
        with self._lock:
            target = self._now + seconds
        while True:
            with self._lock:
                if self._actions and self._actions[0][0] <= target:
                    t, _, action = heapq.heappop(self._actions)
                    self._now = max(self._now, t)
                else:
                    self._now = target
                    return
            action()
