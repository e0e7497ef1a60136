"""Store contract: versioned CAS, snapshot scans, journal durability."""

import json
import os
import signal
import subprocess
import sys
import threading
import time

import pytest

from open_intake.errors import AlreadyExists, NotFound, StoreLocked, VersionConflict
from open_intake.store import JournalStore, export_json_bytes


def test_put_new_then_get_roundtrip(mem_store):
    version = mem_store.put_new("element", "el-1", {"x": 1})
    assert version == 1
    rec = mem_store.get("element", "el-1")
    assert rec.body == {"x": 1}
    assert rec.version == 1


def test_put_new_twice_same_key(mem_store):
    mem_store.put_new("element", "el-1", {"x": 1})
    with pytest.raises(AlreadyExists):
        mem_store.put_new("element", "el-1", {"x": 2})


def test_cas_correct_version_increments(mem_store):
    mem_store.put_new("element", "el-1", {"x": 1})
    assert mem_store.compare_and_set("element", "el-1", 1, {"x": 2}) == 2
    assert mem_store.get("element", "el-1").body == {"x": 2}


def test_cas_stale_version_rejected_body_unchanged(mem_store):
    mem_store.put_new("element", "el-1", {"x": 1})
    mem_store.compare_and_set("element", "el-1", 1, {"x": 2})
    with pytest.raises(VersionConflict):
        mem_store.compare_and_set("element", "el-1", 1, {"x": 3})
    assert mem_store.get("element", "el-1").body == {"x": 2}


def test_cas_missing_key(mem_store):
    with pytest.raises(NotFound):
        mem_store.compare_and_set("element", "nope", 1, {})


def test_delete_then_get_none(mem_store):
    mem_store.put_new("element", "el-1", {"x": 1})
    mem_store.delete("element", "el-1")
    assert mem_store.get("element", "el-1") is None
    with pytest.raises(NotFound):
        mem_store.delete("element", "el-1")


def test_failed_batch_writes_nothing(mem_store):
    mem_store.put_new("element", "el-1", {"x": 1})
    with pytest.raises(VersionConflict):
        mem_store.apply(
            [
                ("put_new", "audit", "ev-1", {"a": 1}),
                ("cas", "element", "el-1", 99, {"x": 2}),
            ]
        )
    assert mem_store.get("audit", "ev-1") is None
    assert mem_store.get("element", "el-1").body == {"x": 1}


def test_scan_filters_and_sorts(mem_store):
    for i in (3, 1, 2):
        mem_store.put_new("element", f"el-{i}", {"status": "pending" if i != 2 else "accepted"})
    pending = mem_store.scan(
        "element", predicate=lambda r: r.body["status"] == "pending", sort_key=lambda r: r.id
    )
    assert [r.id for r in pending] == ["el-1", "el-3"]
    assert mem_store.scan("link") == []


def test_concurrent_cas_single_winner(mem_store):
    """Two racing writers per round: exactly one CAS succeeds."""
    mem_store.put_new("element", "el-1", {"n": 0})
    rounds = 50
    for _ in range(rounds):
        rec = mem_store.get("element", "el-1")
        results = []

        def racer():
            try:
                mem_store.compare_and_set("element", "el-1", rec.version, {"n": rec.body["n"] + 1})
                results.append("win")
            except VersionConflict:
                results.append("lose")

        threads = [threading.Thread(target=racer) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == ["lose", "win"]
    assert mem_store.get("element", "el-1").version == 1 + rounds


def test_scan_sees_committed_prefix_under_concurrent_writes(mem_store):
    """A scan never observes record k without records 1..k-1 (single appender)."""
    stop = threading.Event()

    def writer():
        for i in range(1, 2001):
            if stop.is_set():
                return
            mem_store.put_new("audit", f"ev-{i:05d}", {"seq": i})

    t = threading.Thread(target=writer)
    t.start()
    try:
        for _ in range(200):
            seen = sorted(r.body["seq"] for r in mem_store.scan("audit"))
            assert seen == list(range(1, len(seen) + 1))
    finally:
        stop.set()
        t.join()


def test_persistence_roundtrip(tmp_path):
    with JournalStore(tmp_path / "data") as store:
        store.put_new("site", "s1", {"name": "one"})
        store.put_new("element", "el-1", {"x": 1})
        store.compare_and_set("element", "el-1", 1, {"x": 2})
        store.delete("site", "s1")
    with JournalStore(tmp_path / "data") as store:
        assert store.get("site", "s1") is None
        rec = store.get("element", "el-1")
        assert rec.body == {"x": 2}
        assert rec.version == 2


def test_exclusive_lock(tmp_path):
    with JournalStore(tmp_path / "data"):
        with pytest.raises(StoreLocked):
            JournalStore(tmp_path / "data")
    # released on close
    JournalStore(tmp_path / "data").close()


def test_torn_tail_is_truncated(tmp_path):
    with JournalStore(tmp_path / "data") as store:
        store.put_new("element", "el-1", {"x": 1})
        store.put_new("element", "el-2", {"x": 2})
    journal = next((tmp_path / "data").glob("journal-*.log"))
    raw = journal.read_bytes()
    journal.write_bytes(raw + b"999 {\"ns\": \"element\", \"id\": \"el-3\"")  # torn write
    with JournalStore(tmp_path / "data") as store:
        assert store.get("element", "el-1") is not None
        assert store.get("element", "el-2") is not None
        assert store.get("element", "el-3") is None
        store.put_new("element", "el-4", {"x": 4})  # appends must stay parseable
    with JournalStore(tmp_path / "data") as store:
        assert store.get("element", "el-4") is not None


def test_snapshot_compaction_and_recovery(tmp_path):
    with JournalStore(tmp_path / "data", snapshot_every=10) as store:
        for i in range(35):
            store.put_new("element", f"el-{i:03d}", {"i": i})
        generation = store._generation
        assert generation >= 3
    snapshots = list((tmp_path / "data").glob("snapshot-*.json"))
    assert len(snapshots) == 1  # old generations cleaned up
    doc = json.loads(snapshots[0].read_text())
    assert doc["generation"] == generation
    with JournalStore(tmp_path / "data") as store:
        assert store.count("element") == 35
        assert store.get("element", "el-034").body == {"i": 34}


def test_export_import_roundtrip(tmp_path):
    with JournalStore(tmp_path / "a") as store:
        store.put_new("site", "s1", {"name": "one"})
        store.put_new("element", "el-1", {"x": 1})
        store.compare_and_set("element", "el-1", 1, {"x": 2})
        dump = store.export_dump()
        raw = export_json_bytes(store)
    with JournalStore(tmp_path / "b") as store:
        store.import_dump(dump)
        assert export_json_bytes(store) == raw
        assert store.get("element", "el-1").version == 2


CRASH_CHILD = """
import sys, time
from open_intake.store import JournalStore

store = JournalStore(sys.argv[1])
i = 0
while True:
    i += 1
    store.put_new("element", f"el-{i:06d}", {"i": i})
    print(f"ack el-{i:06d}", flush=True)
    if i >= 5000:
        break
"""


def test_crash_recovery_preserves_acknowledged_writes(tmp_path):
    """SIGKILL the writer mid-stream; every acked record must survive replay."""
    child_src = tmp_path / "writer.py"
    child_src.write_text(CRASH_CHILD)
    for round_no in range(3):
        data_dir = tmp_path / f"data-{round_no}"
        out_path = tmp_path / f"out-{round_no}.txt"
        with open(out_path, "wb") as out:
            proc = subprocess.Popen(
                [sys.executable, str(child_src), str(data_dir)],
                stdout=out,
                stderr=subprocess.DEVNULL,
            )
            # wait for the first ack so the kill always lands mid-stream
            deadline = time.monotonic() + 30
            while out_path.stat().st_size == 0 and time.monotonic() < deadline:
                if proc.poll() is not None:
                    break
                time.sleep(0.01)
            time.sleep(0.05 + round_no * 0.1)
            proc.send_signal(signal.SIGKILL)
            proc.wait()
        acked = [
            line.split()[1]
            for line in out_path.read_text().splitlines()
            if line.startswith("ack ")
        ]
        assert acked, "child never acknowledged anything; test setup broken"
        with JournalStore(data_dir) as store:
            for rec_id in acked:
                assert store.get("element", rec_id) is not None, f"lost {rec_id}"
