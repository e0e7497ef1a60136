"""Composition root: builds the store, registries, notifier, and engine
from one ServiceConfig. The HTTP app and the CLI both assemble through here
so the two paths run the exact same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clock import LogicalClock, WallClock
from .config import ServiceConfig
from .engine import SubmissionEngine
from .errors import ConfigError
from .model import SiteDirectory, TypeRegistry
from .notifier import MemoryAdapter, Notifier, OutboxFileAdapter, SmtpAdapter
from .ratelimit import TokenBucketLimiter
from .store import JournalStore


@dataclass
class Services:
    config: ServiceConfig
    store: JournalStore
    types: TypeRegistry
    sites: SiteDirectory
    notifier: Notifier
    engine: SubmissionEngine
    limiter: TokenBucketLimiter
    clock: object

    def close(self) -> None:
        self.notifier.stop_worker()
        self.store.close()

    def __enter__(self) -> "Services":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def owner_key_for(self, site_id: str) -> str | None:
        """Config keys take precedence over the key stored with the site."""
        if site_id in self.config.owner_keys:
            return self.config.owner_keys[site_id]
        rec = self.store.get("site", site_id)
        return rec.body["owner_key"] if rec is not None else None


def build_clock(config: ServiceConfig):
    if config.clock_mode == "wall":
        return WallClock()
    if config.clock_mode == "logical":
        return LogicalClock(config.clock_start)
    raise ConfigError(f"clock mode must be wall or logical, got {config.clock_mode!r}")


def build_notifier(config: ServiceConfig, clock) -> Notifier:
    kind = config.notifier.adapter
    if kind == "outbox":
        adapter = OutboxFileAdapter(config.resolved_outbox_path())
    elif kind == "memory":
        adapter = MemoryAdapter()
    elif kind == "smtp":
        smtp = config.notifier.smtp
        adapter = SmtpAdapter(
            host=smtp.host,
            port=smtp.port,
            username=smtp.username,
            password=smtp.password,
            use_tls=smtp.use_tls,
            sender=smtp.sender,
        )
    else:
        raise ConfigError(f"unknown notifier adapter: {kind!r}")
    notifier = Notifier(
        adapter,
        max_retries=config.notifier.max_retries,
        backoff_seconds=config.notifier.backoff_seconds,
        clock=clock,
    )
    if config.notifier.async_worker:
        notifier.start_worker()
    return notifier


def build_services(
    config: ServiceConfig, store: JournalStore | None = None
) -> Services:
    """Assemble everything. Pass an explicit store to reuse an open one
    (tests) or to run in-memory (store=JournalStore(None))."""
    clock = build_clock(config)
    if store is None:
        store = JournalStore(config.data_dir)
    notifier = build_notifier(config, clock)
    types = TypeRegistry(store)
    sites = SiteDirectory(store, types, clock)
    engine = SubmissionEngine(
        store, types, sites, notifier, clock, base_url=config.base_url
    )
    limiter = TokenBucketLimiter(
        capacity=config.rate_limit.capacity,
        refill_per_minute=config.rate_limit.refill_per_minute,
    )
    return Services(
        config=config,
        store=store,
        types=types,
        sites=sites,
        notifier=notifier,
        engine=engine,
        limiter=limiter,
        clock=clock,
    )
