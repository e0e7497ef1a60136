"""Token-bucket rate limiting for the public submission endpoint.

One bucket per client key (a salted hash of the client address). A bucket
holds at most ``capacity`` tokens and refills at ``refill_per_minute``;
each submission spends one token.
"""

from __future__ import annotations

import hashlib
import threading
import time


def client_key(address: str, salt: str) -> str:
    """Salted, truncated hash: stable per client, never the raw address."""
    return hashlib.sha256(f"{salt}:{address}".encode("utf-8")).hexdigest()[:24]


class TokenBucketLimiter:
    def __init__(
        self,
        capacity: int = 10,
        refill_per_minute: float = 5.0,
        time_fn=time.monotonic,
    ):
        self.capacity = capacity
        self.refill_per_second = refill_per_minute / 60.0
        self._time = time_fn
        self._buckets: dict[str, tuple[float, float]] = {}  # key -> (tokens, last)
        self._lock = threading.Lock()

    def allow(self, key: str) -> bool:
        with self._lock:
            now = self._time()
            tokens, last = self._buckets.get(key, (float(self.capacity), now))
            tokens = min(float(self.capacity), tokens + (now - last) * self.refill_per_second)
            if tokens >= 1.0:
                self._buckets[key] = (tokens - 1.0, now)
                return True
            self._buckets[key] = (tokens, now)
            return False

    def retry_after(self, key: str) -> float:
        """Seconds until the next token exists for this key."""
        with self._lock:
            now = self._time()
            tokens, last = self._buckets.get(key, (float(self.capacity), now))
            tokens = min(float(self.capacity), tokens + (now - last) * self.refill_per_second)
            if tokens >= 1.0:
                return 0.0
            if self.refill_per_second <= 0:
                return float("inf")
            return (1.0 - tokens) / self.refill_per_second
