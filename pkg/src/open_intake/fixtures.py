"""Fixture scripts: line-delimited JSON operations that drive the engine.

Two builders live here. ``build_deployment_fixture`` produces a full-scale
synthetic deployment (hundreds of sites, thousands of submissions with a
realistic accept/decline mix) used by the stats acceptance run.
``build_equivalence_script`` emits a small submit/decide script whose replay
is fully deterministic under a logical clock, for differential testing of
the CLI and HTTP paths.

Replay applies each op through the engine, so a replayed store is
indistinguishable from one grown through ordinary operation.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .engine import SubmitterIdentity, owner_identity
from .ratelimit import client_key
from .service import Services

# Deployment-scale fixture shape: site count, element volume, moderation mix,
# and how much of the volume concentrates on the busiest sites.
DEPLOYMENT_SITES = 526
DEPLOYMENT_TOTAL = 7226
DEPLOYMENT_ACCEPTED = 4061
DEPLOYMENT_TOP_SITES = 41
DEPLOYMENT_TOP_SITE_ELEMENTS = 3149
DEPLOYMENT_ACCEPTED_BY_TYPE = {
    "testimonial": 274,
    "billboard": 705,
    "qa": 560,
    "news": 43,
    "client_info": 65,
    "text": 559,
}
# Remaining accepted volume spread over the other custom types.
DEPLOYMENT_FILLER_TYPES = {"video": 620, "link": 620, "image_gallery": 615}
DEPLOYMENT_DECLINED = 1900  # the non-accepted remainder splits declined/pending

ALL_TYPE_IDS = (
    "testimonial", "billboard", "qa", "news", "client_info",
    "text", "video", "link", "image_gallery",
)


def _payload(type_id: str, i: int) -> dict:
    if type_id == "testimonial":
        return {"author_name": f"Visitor {i}", "body": f"Testimonial body {i}"}
    if type_id == "billboard":
        return {"title": f"Announcement {i}", "body": f"Billboard body {i}"}
    if type_id == "qa":
        return {"question": f"Question number {i}?"}
    if type_id == "news":
        return {"title": f"News {i}", "body": f"News body {i}"}
    if type_id == "client_info":
        return {"firm_name": f"Firm {i}"}
    if type_id == "text":
        return {"title": f"Text {i}", "body": f"Text body {i}"}
    if type_id == "video":
        return {"title": f"Video {i}", "url": f"http://example.com/video/{i}"}
    if type_id == "link":
        return {"title": f"Link {i}", "url": f"http://example.com/page/{i}"}
    if type_id == "image_gallery":
        return {"title": f"Gallery {i}", "images": [f"images/{i}-a.jpg", f"images/{i}-b.jpg"]}
    raise ValueError(type_id)


def _site_quotas() -> list[tuple[str, int]]:
    """Element count per site: the busiest 41 sites hold exactly the
    concentrated share, every remaining site stays well below them."""
    quotas: list[tuple[str, int]] = []
    base, extra = divmod(DEPLOYMENT_TOP_SITE_ELEMENTS, DEPLOYMENT_TOP_SITES)
    for i in range(DEPLOYMENT_TOP_SITES):
        quotas.append((f"site-{i + 1:03d}", base + (1 if i < extra else 0)))
    rest_sites = DEPLOYMENT_SITES - DEPLOYMENT_TOP_SITES
    rest_total = DEPLOYMENT_TOTAL - DEPLOYMENT_TOP_SITE_ELEMENTS
    base, extra = divmod(rest_total, rest_sites)
    for i in range(rest_sites):
        site_no = DEPLOYMENT_TOP_SITES + i + 1
        quotas.append((f"site-{site_no:03d}", base + (1 if i < extra else 0)))
    assert sum(q for _, q in quotas) == DEPLOYMENT_TOTAL
    return quotas


def build_deployment_fixture(seed: int = 2010) -> list[dict]:
    """Synthetic deployment: every site gets one open section, submissions
    arrive anonymously, and the owner works through the queue."""
    rng = random.Random(seed)

    pairs: list[tuple[str, str]] = []  # (type_id, final_status)
    for type_id, count in DEPLOYMENT_ACCEPTED_BY_TYPE.items():
        pairs.extend((type_id, "accepted") for _ in range(count))
    for type_id, count in DEPLOYMENT_FILLER_TYPES.items():
        pairs.extend((type_id, "accepted") for _ in range(count))
    assert sum(1 for _, s in pairs if s == "accepted") == DEPLOYMENT_ACCEPTED
    remainder = DEPLOYMENT_TOTAL - DEPLOYMENT_ACCEPTED
    for i in range(remainder):
        status = "declined" if i < DEPLOYMENT_DECLINED else "pending"
        pairs.append((ALL_TYPE_IDS[i % len(ALL_TYPE_IDS)], status))
    rng.shuffle(pairs)

    ops: list[dict] = []
    slots: list[str] = []
    for site_id, quota in _site_quotas():
        ops.append(
            {
                "op": "create_site",
                "site_id": site_id,
                "name": f"Site {site_id.split('-')[1]}",
                "owner_key": f"key-{site_id}",
                "owner_email": f"owner@{site_id}.example",
            }
        )
        ops.append(
            {
                "op": "create_section",
                "site_id": site_id,
                "section_id": "main",
                "name": "Open section",
                "allowed_types": list(ALL_TYPE_IDS),
                "policy": "anyone",
            }
        )
        slots.extend([site_id] * quota)

    decisions: list[dict] = []
    for i, ((type_id, status), site_id) in enumerate(zip(pairs, slots)):
        ref = f"e{i:05d}"
        ops.append(
            {
                "op": "submit",
                "ref": ref,
                "site_id": site_id,
                "section_id": "main",
                "type_id": type_id,
                "values": _payload(type_id, i),
                "identity": {"class": "anonymous", "subject": f"client-{i % 997}"},
            }
        )
        if status != "pending":
            decisions.append(
                {
                    "op": "decide",
                    "ref": ref,
                    "decision": "accept" if status == "accepted" else "decline",
                }
            )
    rng.shuffle(decisions)
    ops.extend(decisions)
    return ops


def build_equivalence_script(
    n_ops: int = 200,
    site_id: str = "site-a",
    section_id: str = "main",
    client_addr: str = "127.0.0.1",
    salt: str = "open-intake",
    seed: int = 77,
) -> list[dict]:
    """Submit/decide script replayable both directly and over HTTP.

    Anonymous submitter subjects are precomputed with the same salted client
    hash the HTTP layer derives, so both replay paths write identical
    identities. No emails: link tokens are random by design and would differ.
    """
    rng = random.Random(seed)
    anon_subject = client_key(client_addr, salt)
    ops: list[dict] = []
    refs: list[str] = []
    for i in range(n_ops):
        roll = rng.random()
        if roll < 0.55 or not refs:
            type_id = rng.choice(("testimonial", "billboard", "text"))
            as_owner = rng.random() < 0.2
            identity = (
                {"class": "owner", "subject": site_id}
                if as_owner
                else {"class": "anonymous", "subject": anon_subject}
            )
            ref = f"q{i:04d}"
            refs.append(ref)
            ops.append(
                {
                    "op": "submit",
                    "ref": ref,
                    "site_id": site_id,
                    "section_id": section_id,
                    "type_id": type_id,
                    "values": _payload(type_id, i),
                    "identity": identity,
                }
            )
        else:
            ops.append(
                {
                    "op": "decide",
                    "ref": rng.choice(refs),
                    "decision": rng.choice(("accept", "decline")),
                }
            )
    return ops


# -- file io --------------------------------------------------------------------


def write_fixture(path: str | Path, ops: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for op in ops:
            fh.write(json.dumps(op, sort_keys=True) + "\n")
            count += 1
    return count


def read_fixture(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: not valid JSON: {exc}")


# -- replay ---------------------------------------------------------------------


@dataclass
class ReplaySummary:
    ops: int = 0
    submitted: int = 0
    accepted: int = 0
    declined: int = 0
    elapsed_seconds: float = 0.0
    refs: dict[str, str] = field(default_factory=dict)  # ref -> element_id


def replay(
    services: Services,
    ops: Iterable[dict],
    on_commit=None,
) -> ReplaySummary:
    """Apply a fixture through the engine. ``on_commit(label)`` fires after
    each durable op, which the durability harness uses as its ack channel."""
    engine = services.engine
    summary = ReplaySummary()
    started = time.monotonic()
    for op in ops:
        kind = op["op"]
        if kind == "create_site":
            services.sites.create_site(
                op["site_id"],
                op.get("name", op["site_id"]),
                op["owner_key"],
                op["owner_email"],
                remoderate_on_edit=op.get(
                    "remoderate_on_edit", services.config.remoderate_on_edit
                ),
            )
            label = f"site:{op['site_id']}"
        elif kind == "create_section":
            services.sites.create_section(
                op["site_id"],
                op["section_id"],
                op.get("name", op["section_id"]),
                op["allowed_types"],
                policy=op.get("policy", "anyone"),
                parent_id=op.get("parent_id"),
                description=op.get("description", ""),
                open_input_enabled=op.get("open_input_enabled", True),
            )
            label = f"section:{op['site_id']}/{op['section_id']}"
        elif kind == "register_type":
            services.types.import_schema(op["spec"])
            label = f"type:{op['spec']['type_id']}"
        elif kind == "submit":
            identity = SubmitterIdentity(
                class_=op["identity"]["class"], subject=op["identity"].get("subject")
            )
            element, _ = engine.submit(
                op["site_id"],
                op["section_id"],
                op["type_id"],
                op["values"],
                identity,
                email=op.get("email"),
            )
            if "ref" in op:
                summary.refs[op["ref"]] = element.element_id
            summary.submitted += 1
            label = element.element_id
        elif kind == "decide":
            element_id = op.get("element_id") or summary.refs[op["ref"]]
            current = engine.get_element(element_id)
            element = engine.decide(
                element_id, op["decision"], owner_identity(current.site_id)
            )
            if op["decision"] == "accept":
                summary.accepted += 1
            else:
                summary.declined += 1
            label = f"{element_id}:{element.status}"
        else:
            raise ValueError(f"unknown fixture op: {kind!r}")
        summary.ops += 1
        if on_commit is not None:
            on_commit(label)
    summary.elapsed_seconds = time.monotonic() - started
    return summary


def top_site_share(services: Services, n: int = DEPLOYMENT_TOP_SITES) -> int:
    """Total elements held by the n busiest sites."""
    per_site: dict[str, int] = {}
    for rec in services.store.scan("element"):
        per_site[rec.body["site_id"]] = per_site.get(rec.body["site_id"], 0) + 1
    return sum(sorted(per_site.values(), reverse=True)[:n])
