import pytest

from open_intake.config import NotifierConfig, ServiceConfig
from open_intake.service import build_services
from open_intake.store import JournalStore


@pytest.fixture
def mem_store():
    return JournalStore(None)


@pytest.fixture
def svc(mem_store):
    """In-memory service wiring: logical clock, memory mail sink, no files."""
    config = ServiceConfig(
        clock_mode="logical",
        notifier=NotifierConfig(adapter="memory"),
        base_url="http://test.local",
    )
    services = build_services(config, store=mem_store)
    yield services
    services.close()


@pytest.fixture
def demo_site(svc):
    svc.sites.create_site("demo", "Demo site", "demo-key", "owner@example.com")
    svc.sites.create_section(
        "demo", "testimonials", "Testimonials", ["testimonial"], policy="anyone"
    )
    svc.sites.create_section(
        "demo", "news", "News", ["news"], policy="anyone"
    )
    svc.sites.create_section(
        "demo", "all", "Everything", ["testimonial", "billboard", "qa", "news", "text"],
        policy="anyone",
    )
    return "demo"
