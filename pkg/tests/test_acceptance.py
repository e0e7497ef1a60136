"""Acceptance criteria, one test per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. Tolerances are pinned here and nowhere else.
"""

import random
import signal
import socket
import subprocess
import sys
import threading
import time
import uuid

import httpx
import pytest
import uvicorn
from click.testing import CliRunner

from open_intake import fixtures
from open_intake.cli import main as cli_main
from open_intake.config import NotifierConfig, ServiceConfig
from open_intake.engine import SubmitterIdentity, owner_identity
from open_intake.errors import PolicyDenied, UnknownToken
from open_intake.service import build_services
from open_intake.store import JournalStore

ANON = SubmitterIdentity("anonymous")
runner = CliRunner()


def _mem_services(**config_kwargs):
    config = ServiceConfig(
        clock_mode="logical",
        notifier=NotifierConfig(adapter="memory"),
        base_url="http://accept.test",
        **config_kwargs,
    )
    return build_services(config, store=JournalStore(None))


def _passed(name, detail=""):
    print(f"\nACCEPTANCE {name}: PASS {detail}".rstrip())


# -- criterion 1: deployment fixture replay + stats -------------------------------------


def test_deployment_fixture_replay_and_stats(tmp_path):
    """7226 submissions over 526 sites; 4061 accepted with exact per-type
    counts; acceptance_rate 0.5620 +/- 0.0001; top-41 sites hold 3149;
    full durable replay + stats in under 60 s."""
    config = ServiceConfig(
        data_dir=str(tmp_path / "data"),
        clock_mode="logical",
        notifier=NotifierConfig(adapter="outbox", outbox_path=str(tmp_path / "outbox.jsonl")),
    )
    ops = fixtures.build_deployment_fixture()
    started = time.monotonic()
    with build_services(config) as services:
        summary = fixtures.replay(services, ops)
        stats = services.engine.stats()
        top_share = fixtures.top_site_share(services, 41)
    elapsed = time.monotonic() - started

    assert summary.submitted == 7226
    assert stats.total_submitted == 7226
    assert stats.accepted == 4061
    assert abs(stats.acceptance_rate - 0.5620) <= 0.0001
    expected_per_type = {
        "testimonial": 274,
        "billboard": 705,
        "qa": 560,
        "news": 43,
        "client_info": 65,
        "text": 559,
    }
    for type_id, count in expected_per_type.items():
        assert stats.per_type[type_id].accepted == count, type_id
    filler_accepted = stats.accepted - sum(expected_per_type.values())
    assert filler_accepted == 4061 - 2206 == 1855
    assert stats.pending + stats.declined == 7226 - 4061 == 3165
    assert top_share == 3149

    site_count = len({op["site_id"] for op in ops if op["op"] == "create_site"})
    assert site_count == 526
    assert elapsed < 60.0, f"replay took {elapsed:.1f}s"
    _passed(
        "fixture-replay-stats",
        f"(total=7226 accepted=4061 rate={stats.acceptance_rate:.4f} "
        f"top41={top_share} in {elapsed:.1f}s)",
    )


# -- criterion 2: policy x identity matrix ------------------------------------------------


def test_policy_identity_matrix():
    """All 20 (policy tier, identity class) combinations produce exactly the
    specified initial status or PolicyDenied."""
    expected = {
        ("anyone", "owner"): "accepted",
        ("anyone", "registered_trusted"): "accepted",
        ("anyone", "registered"): "pending",
        ("anyone", "external_authenticated"): "pending",
        ("anyone", "anonymous"): "pending",
        ("external_authenticated", "owner"): "accepted",
        ("external_authenticated", "registered_trusted"): "accepted",
        ("external_authenticated", "registered"): "pending",
        ("external_authenticated", "external_authenticated"): "pending",
        ("external_authenticated", "anonymous"): "denied",
        ("registered_users", "owner"): "accepted",
        ("registered_users", "registered_trusted"): "accepted",
        ("registered_users", "registered"): "pending",
        ("registered_users", "external_authenticated"): "denied",
        ("registered_users", "anonymous"): "denied",
        ("owner_only", "owner"): "accepted",
        ("owner_only", "registered_trusted"): "denied",
        ("owner_only", "registered"): "denied",
        ("owner_only", "external_authenticated"): "denied",
        ("owner_only", "anonymous"): "denied",
    }
    assert len(expected) == 20
    services = _mem_services()
    services.sites.create_site("m", "Matrix", "k", "o@example.com")
    for policy in ("anyone", "external_authenticated", "registered_users", "owner_only"):
        services.sites.create_section("m", policy, policy, ["testimonial"], policy=policy)

    matches = 0
    for (policy, identity_class), outcome in expected.items():
        identity = SubmitterIdentity(
            identity_class, "m" if identity_class == "owner" else "subject-1"
        )
        try:
            element, _ = services.engine.submit(
                "m", policy, "testimonial",
                {"author_name": "A", "body": "B"}, identity,
            )
            got = element.status
        except PolicyDenied:
            got = "denied"
        assert got == outcome, f"{policy} x {identity_class}: {got} != {outcome}"
        matches += 1
    assert matches == 20
    services.close()
    _passed("policy-identity-matrix", "(20/20)")


# -- criteria 3 and 6: visibility fuzz + notification completeness -------------------------

FUZZ_OPS = 10_000


@pytest.fixture(scope="module")
def fuzz_run():
    """One 10,000-operation random walk shared by the two criteria it feeds."""
    services = _mem_services()
    services.sites.create_site("fz", "Fuzz", "k", "owner@example.com")
    sections = ("alpha", "beta", "gamma")
    for section in sections:
        services.sites.create_section(
            "fz", section, section, ["testimonial", "text"], policy="anyone"
        )
    owner = owner_identity("fz")
    rng = random.Random(20_10)

    accepted_by_section = {s: set() for s in sections}
    status_of = {}
    section_of = {}
    tokens = {}
    entered_pending = set()
    violations = 0

    def submit(step):
        section = rng.choice(sections)
        type_id = rng.choice(("testimonial", "text"))
        values = (
            {"author_name": "A", "body": f"b{step}"}
            if type_id == "testimonial"
            else {"title": "T", "body": f"b{step}"}
        )
        email = f"v{step}@example.com" if rng.random() < 0.4 else None
        element, link = services.engine.submit(
            "fz", section, type_id, values, ANON, email=email
        )
        status_of[element.element_id] = "pending"
        section_of[element.element_id] = section
        entered_pending.add(element.element_id)
        if link:
            tokens[element.element_id] = link.token

    def apply_status(element_id, new_status):
        old = status_of[element_id]
        section = section_of[element_id]
        if old == "accepted":
            accepted_by_section[section].discard(element_id)
        if new_status == "accepted":
            accepted_by_section[section].add(element_id)
        status_of[element_id] = new_status

    def remove(element_id):
        apply_status(element_id, "gone")
        del status_of[element_id]
        del section_of[element_id]
        tokens.pop(element_id, None)

    def check(step):
        nonlocal violations
        for section in sections:
            got = set()
            page = 1
            while True:
                result = services.engine.list_public("fz", section, page=page, page_size=100)
                got |= {e.element_id for e in result.items}
                if len(result.items) < 100:
                    break
                page += 1
            if got != accepted_by_section[section]:
                violations += 1
        stats = services.engine.stats("fz")
        assert stats.total_submitted == len(status_of)
        assert stats.accepted + stats.declined + stats.pending == stats.total_submitted

    for step in range(FUZZ_OPS):
        roll = rng.random()
        if roll < 0.32 or not status_of:
            submit(step)
        elif roll < 0.62:
            element_id = rng.choice(list(status_of))
            decision = rng.choice(("accept", "decline"))
            services.engine.decide(element_id, decision, owner)
            apply_status(element_id, "accepted" if decision == "accept" else "declined")
        elif roll < 0.75 and tokens:
            element_id = rng.choice(list(tokens))
            element = services.engine.get_element(element_id)
            values = dict(element.values)
            values["body"] = f"edited {step}"
            services.engine.edit_via_link(tokens[element_id], element.type_id, values)
            if status_of[element_id] == "accepted":
                apply_status(element_id, "pending")  # default remoderation
        else:
            element_id = rng.choice(list(status_of))
            if element_id in tokens and rng.random() < 0.5:
                services.engine.delete_via_link(tokens[element_id])
            else:
                services.engine.delete_element(element_id, owner)
            remove(element_id)
        check(step)

    result = {
        "services": services,
        "violations": violations,
        "entered_pending": entered_pending,
        "ops": FUZZ_OPS,
    }
    yield result
    services.close()


def test_visibility_invariant_fuzz(fuzz_run):
    """Public listings equal the oracle's accepted set after every one of the
    10,000 operations; zero violations."""
    assert fuzz_run["ops"] >= 10_000
    assert fuzz_run["violations"] == 0
    _passed("visibility-fuzz", f"({fuzz_run['ops']} ops, 0 violations)")


def test_notification_completeness(fuzz_run):
    """Delivered pending_submission events correspond one-to-one (by dedup
    key) with elements that entered pending status at submission."""
    services = fuzz_run["services"]
    delivered = [
        r.event.dedup_key
        for r in services.notifier.outcomes()
        if r.event.kind == "pending_submission" and r.status == "delivered"
    ]
    assert len(delivered) == len(set(delivered)), "duplicate deliveries"
    expected = {f"pending_submission:{eid}" for eid in fuzz_run["entered_pending"]}
    assert set(delivered) == expected
    _passed("notification-completeness", f"({len(delivered)} events, one-to-one)")


# -- criterion 4: editor-link unforgeability ---------------------------------------------


def test_editor_link_unforgeability():
    """1,000 live tokens; 1,000,000 uniform random redemption attempts yield
    zero successes; every real token redeems to its own element."""
    services = _mem_services()
    services.sites.create_site("s", "S", "k", "o@example.com")
    services.sites.create_section("s", "main", "Main", ["testimonial"])
    issued = {}
    for i in range(1_000):
        element, link = services.engine.submit(
            "s", "main", "testimonial",
            {"author_name": f"V{i}", "body": "B"}, ANON,
            email=f"v{i}@example.com",
        )
        issued[link.token] = element.element_id
    assert len(issued) == 1_000

    rng = random.Random(0xF00D)
    hits = 0
    for _ in range(1_000_000):
        guess = str(uuid.UUID(int=rng.getrandbits(128)))
        if guess in issued:  # astronomically unlikely; a hit must count
            hits += 1
            continue
        try:
            services.engine.redeem(guess)
            hits += 1
        except UnknownToken:
            pass
    assert hits == 0

    for token, element_id in issued.items():
        capability = services.engine.redeem(token)
        assert capability.element.element_id == element_id
    services.close()
    _passed("editor-link-unforgeability", "(10^6 guesses vs 10^3 tokens, 0 hits)")


# -- criterion 5: durability under SIGKILL -------------------------------------------------


def _durability_fixture():
    ops = []
    for i in range(1, 6):
        ops.append({"op": "create_site", "site_id": f"s{i}", "name": f"S{i}",
                    "owner_key": f"k{i}", "owner_email": f"o{i}@example.com"})
        ops.append({"op": "create_section", "site_id": f"s{i}", "section_id": "main",
                    "name": "Main", "allowed_types": ["testimonial"], "policy": "anyone"})
    rng = random.Random(5)
    for i in range(1_200):
        ref = f"d{i:04d}"
        ops.append({"op": "submit", "ref": ref, "site_id": f"s{(i % 5) + 1}",
                    "section_id": "main", "type_id": "testimonial",
                    "values": {"author_name": f"V{i}", "body": f"B{i}"},
                    "identity": {"class": "anonymous"}})
        if rng.random() < 0.5:  # at most one decision per element
            ops.append({"op": "decide", "ref": ref,
                        "decision": rng.choice(("accept", "decline"))})
    return ops


def test_durability_survives_sigkill(tmp_path):
    """SIGKILL the replaying process at 10 random points; after restart every
    acknowledged write is present. Zero lost acknowledged submissions."""
    fixture_path = tmp_path / "durability.jsonl"
    total_ops = fixtures.write_fixture(fixture_path, _durability_fixture())
    rng = random.Random(99)
    interrupted = 0

    for round_no in range(10):
        data_dir = tmp_path / f"round-{round_no}"
        config_path = tmp_path / f"round-{round_no}.toml"
        config_path.write_text(
            f'data_dir = "{data_dir}"\n[notifier]\nadapter = "outbox"\n'
            f'outbox_path = "{tmp_path}/outbox-{round_no}.jsonl"\n'
        )
        out_path = tmp_path / f"acks-{round_no}.log"
        with open(out_path, "wb") as out:
            child = subprocess.Popen(
                [sys.executable, "-m", "open_intake.cli", "--config", str(config_path),
                 "fixture", "replay", "--ack", str(fixture_path)],
                stdout=out, stderr=subprocess.DEVNULL,
            )
            deadline = time.monotonic() + 30
            while out_path.stat().st_size == 0 and time.monotonic() < deadline:
                if child.poll() is not None:
                    break
                time.sleep(0.01)
            if child.poll() is None:
                time.sleep(rng.uniform(0.05, 0.8))
                child.send_signal(signal.SIGKILL)
            child.wait()

        acks = [
            line[4:].strip()
            for line in out_path.read_text().splitlines()
            if line.startswith("ack ")
        ]
        assert acks, f"round {round_no}: no acknowledged ops at all"
        if len(acks) < total_ops:
            interrupted += 1

        with JournalStore(data_dir) as store:
            for label in acks:
                if label.startswith("site:"):
                    assert store.get("site", label[5:]) is not None, label
                elif label.startswith("section:"):
                    assert store.get("section", label[8:]) is not None, label
                elif ":" in label:  # decide ack: el-x:status
                    element_id, status = label.split(":")
                    rec = store.get("element", element_id)
                    assert rec is not None, label
                    assert rec.body["status"] == status, label
                else:  # submit ack
                    assert store.get("element", label) is not None, label

    assert interrupted >= 5, f"only {interrupted}/10 rounds were killed mid-replay"
    _passed("durability-kill-restart", f"(10 rounds, {interrupted} interrupted, 0 lost)")


# -- criterion 7: CLI / API equivalence ------------------------------------------------------


def _free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _equiv_config(tmp_path, lane, port):
    data_dir = tmp_path / f"{lane}-data"
    path = tmp_path / f"{lane}.toml"
    path.write_text(
        "\n".join(
            [
                f'data_dir = "{data_dir}"',
                f'bind = "127.0.0.1:{port}"',
                f'base_url = "http://127.0.0.1:{port}"',
                "[clock]",
                'mode = "logical"',
                "[owner_keys]",
                'site-a = "equiv-key"',
                "[rate_limit]",
                "enabled = false",
                "[notifier]",
                'adapter = "outbox"',
                f'outbox_path = "{tmp_path}/{lane}-outbox.jsonl"',
            ]
        )
        + "\n"
    )
    return path


def _preseed(config_path):
    from open_intake.config import load_config

    with build_services(load_config(config_path)) as services:
        services.sites.create_site("site-a", "Equivalence", "equiv-key", "o@example.com")
        services.sites.create_section(
            "site-a", "main", "Main",
            ["testimonial", "billboard", "text"], policy="anyone",
        )


def test_cli_api_equivalence(tmp_path):
    """The same 200-operation script, replayed through the CLI and driven
    through the HTTP API, yields byte-identical store exports."""
    port = _free_port()
    script = fixtures.build_equivalence_script(n_ops=200, client_addr="127.0.0.1")
    script_path = tmp_path / "script.jsonl"
    fixtures.write_fixture(script_path, script)

    # lane 1: CLI replay straight into the store
    cli_config = _equiv_config(tmp_path, "cli", port)
    _preseed(cli_config)
    result = runner.invoke(
        cli_main, ["--config", str(cli_config), "fixture", "replay", str(script_path)]
    )
    assert result.exit_code == 0, result.output
    cli_export = tmp_path / "cli.json"
    result = runner.invoke(cli_main, ["--config", str(cli_config), "export", str(cli_export)])
    assert result.exit_code == 0, result.output

    # lane 2: every op as an HTTP request against a live server
    http_config = _equiv_config(tmp_path, "http", port)
    _preseed(http_config)
    from open_intake.api import create_app
    from open_intake.config import load_config

    services = build_services(load_config(http_config))
    server = uvicorn.Server(
        uvicorn.Config(
            create_app(services, own_services=True),
            host="127.0.0.1", port=port, log_level="error",
        )
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        try:
            httpx.get(base + "/healthz", timeout=0.5)
            break
        except httpx.TransportError:
            time.sleep(0.05)

    refs = {}
    with httpx.Client(base_url=base, timeout=10) as client:
        for op in script:
            if op["op"] == "submit":
                headers = (
                    {"X-Owner-Key": "equiv-key"}
                    if op["identity"]["class"] == "owner"
                    else {}
                )
                response = client.post(
                    f"/sites/{op['site_id']}/sections/{op['section_id']}/elements",
                    json={"type_id": op["type_id"], "values": op["values"]},
                    headers=headers,
                )
                assert response.status_code == 201, response.text
                refs[op["ref"]] = response.json()["element_id"]
            else:
                response = client.post(
                    f"/admin/elements/{refs[op['ref']]}/decision",
                    json={"decision": op["decision"]},
                    headers={"X-Owner-Key": "equiv-key"},
                )
                assert response.status_code == 200, response.text
    server.should_exit = True
    thread.join(timeout=10)

    http_export = tmp_path / "http.json"
    result = runner.invoke(cli_main, ["--config", str(http_config), "export", str(http_export)])
    assert result.exit_code == 0, result.output

    cli_bytes = cli_export.read_bytes()
    http_bytes = http_export.read_bytes()
    assert cli_bytes == http_bytes, "store exports differ between CLI and HTTP lanes"
    _passed("cli-api-equivalence", f"({len(script)} ops, {len(cli_bytes)} identical bytes)")
