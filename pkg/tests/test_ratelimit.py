"""Token bucket behavior under a controlled clock."""

from open_intake.ratelimit import TokenBucketLimiter, client_key


class FakeTime:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


def test_burst_capacity_then_deny():
    clock = FakeTime()
    limiter = TokenBucketLimiter(capacity=10, refill_per_minute=5.0, time_fn=clock)
    assert all(limiter.allow("c") for _ in range(10))
    assert not limiter.allow("c")  # 11th in the same instant
    assert limiter.retry_after("c") > 0


def test_refill_rate():
    clock = FakeTime()
    limiter = TokenBucketLimiter(capacity=10, refill_per_minute=5.0, time_fn=clock)
    for _ in range(10):
        limiter.allow("c")
    assert not limiter.allow("c")
    clock.now += 12.0  # one token at 5/minute
    assert limiter.allow("c")
    assert not limiter.allow("c")
    clock.now += 60.0
    allowed = sum(limiter.allow("c") for _ in range(10))
    assert allowed == 5  # a minute refills five, capacity permitting


def test_sustained_rate_never_exceeds_refill():
    clock = FakeTime()
    limiter = TokenBucketLimiter(capacity=10, refill_per_minute=5.0, time_fn=clock)
    granted = 0
    for _ in range(60):  # one request every 10 s for 10 minutes
        if limiter.allow("c"):
            granted += 1
        clock.now += 10.0
    assert granted <= 10 + 5 * 10  # initial burst plus sustained refill


def test_buckets_are_per_client():
    clock = FakeTime()
    limiter = TokenBucketLimiter(capacity=2, refill_per_minute=5.0, time_fn=clock)
    assert limiter.allow("a") and limiter.allow("a")
    assert not limiter.allow("a")
    assert limiter.allow("b")


def test_client_key_salted_and_stable():
    key = client_key("203.0.113.9", "salt-1")
    assert key == client_key("203.0.113.9", "salt-1")
    assert key != client_key("203.0.113.9", "salt-2")
    assert "203.0.113.9" not in key
    assert len(key) == 24
