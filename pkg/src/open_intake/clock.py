"""Time sources.

The engine stamps every mutation through a Clock so that fixture replays can
run on a logical clock and produce identical stores on every run. Production
uses the wall clock.
"""

from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone


def to_rfc3339(dt: datetime) -> str:
    """Render a UTC datetime as RFC 3339 with a trailing Z."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def parse_rfc3339(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


class WallClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class LogicalClock:
    """Deterministic clock: starts at ``start`` and advances one second per call."""

    def __init__(self, start: str = "2020-01-01T00:00:00Z"):
        self._next = parse_rfc3339(start)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            current = self._next
            self._next = current + timedelta(seconds=1)
            return current
