"""Durable key-value store: an append-only journal plus periodic snapshots.

Layout inside the data directory:

    store.lock          exclusive-access lock (one process at a time)
    snapshot-<G>.json   full state at generation G, written atomically
    journal-<G>.log     every mutation committed after snapshot G

A journal entry is one length-prefixed JSON segment per record::

    <byte length> <json>\\n

Writes are fsynced before the call returns, so an acknowledged mutation
survives a hard kill. Recovery loads the newest readable snapshot, replays
its journal, and truncates a torn tail (an interrupted final write).

Pass ``data_dir=None`` for an ephemeral in-memory store with the same
interface; unit tests of higher layers use that mode.
"""

from __future__ import annotations

import json
import os
import threading
from copy import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from filelock import FileLock, Timeout

from .errors import AlreadyExists, NotFound, StoreLocked, VersionConflict

NAMESPACES = ("site", "section", "type", "element", "link", "audit")

FORMAT_NAME = "open-intake-store"
FORMAT_VERSION = 1


@dataclass
class Record:
    namespace: str
    id: str
    body: dict
    version: int


def _check_namespace(namespace: str) -> None:
    if namespace not in NAMESPACES:
        raise ValueError(f"unknown namespace: {namespace!r}")


def _encode_segment(entry: dict) -> bytes:
    payload = json.dumps(entry, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return b"%d %s\n" % (len(payload), payload)


def _iter_segments(raw: bytes):
    """Yield (entry, end_offset) pairs; stop silently at a torn tail."""
    pos = 0
    total = len(raw)
    while pos < total:
        space = raw.find(b" ", pos, pos + 20)
        if space < 0:
            return
        try:
            length = int(raw[pos:space])
        except ValueError:
            return
        start = space + 1
        end = start + length
        if end + 1 > total or raw[end:end + 1] != b"\n":
            return
        try:
            entry = json.loads(raw[start:end])
        except ValueError:
            return
        yield entry, end + 1
        pos = end + 1


class JournalStore:
    """Versioned records with compare-and-set as the only update primitive."""

    def __init__(
        self,
        data_dir: str | Path | None,
        *,
        snapshot_every: int = 20000,
        sync: bool = True,
    ):
        self._lock = threading.RLock()
        self._index: dict[str, dict[str, Record]] = {ns: {} for ns in NAMESPACES}
        self._snapshot_every = snapshot_every
        self._sync = sync
        self._entries_since_snapshot = 0
        self._generation = 0
        self._journal_fh = None
        self._flock = None
        self._dir: Path | None = None

        if data_dir is not None:
            self._dir = Path(data_dir)
            self._dir.mkdir(parents=True, exist_ok=True)
            # not thread-local: the lock guards against other processes, and
            # close() may run on a different thread (server lifespan shutdown)
            self._flock = FileLock(str(self._dir / "store.lock"), thread_local=False)
            try:
                self._flock.acquire(timeout=0)
            except Timeout:
                raise StoreLocked(f"data dir {self._dir} is locked by another process")
            self._recover()

    # -- lifecycle -----------------------------------------------------------

    @property
    def persistent(self) -> bool:
        return self._dir is not None

    def close(self) -> None:
        with self._lock:
            if self._journal_fh is not None:
                self._journal_fh.close()
                self._journal_fh = None
            if self._flock is not None and self._flock.is_locked:
                self._flock.release()

    def __enter__(self) -> "JournalStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- recovery ------------------------------------------------------------

    def _snapshot_path(self, generation: int) -> Path:
        return self._dir / f"snapshot-{generation}.json"

    def _journal_path(self, generation: int) -> Path:
        return self._dir / f"journal-{generation}.log"

    def _recover(self) -> None:
        generations = sorted(
            (
                int(p.stem.split("-", 1)[1])
                for p in self._dir.glob("snapshot-*.json")
                if p.stem.split("-", 1)[1].isdigit()
            ),
            reverse=True,
        )
        for generation in generations:
            try:
                doc = json.loads(self._snapshot_path(generation).read_text("utf-8"))
            except ValueError:
                continue  # half-written snapshot from an interrupted compaction
            if doc.get("format") != FORMAT_NAME:
                continue
            for rec in doc["records"]:
                self._index[rec["ns"]][rec["id"]] = Record(
                    rec["ns"], rec["id"], rec["body"], rec["ver"]
                )
            self._generation = generation
            break

        journal = self._journal_path(self._generation)
        valid_end = 0
        if journal.exists():
            raw = journal.read_bytes()
            for entry, end in _iter_segments(raw):
                self._apply_entry(entry)
                valid_end = end
            if valid_end < len(raw):
                with open(journal, "r+b") as fh:
                    fh.truncate(valid_end)

        self._journal_fh = open(journal, "ab")

    def _apply_entry(self, entry: dict) -> None:
        ns, rec_id = entry["ns"], entry["id"]
        if entry.get("op") == "del":
            self._index[ns].pop(rec_id, None)
        else:
            self._index[ns][rec_id] = Record(ns, rec_id, entry["body"], entry["ver"])

    # -- journal -------------------------------------------------------------

    def _append(self, entries: list[dict]) -> None:
        """Write all entries in one buffer and fsync before returning."""
        if self._journal_fh is None:
            return
        buf = b"".join(_encode_segment(e) for e in entries)
        self._journal_fh.write(buf)
        self._journal_fh.flush()
        if self._sync:
            os.fsync(self._journal_fh.fileno())
        self._entries_since_snapshot += len(entries)

    def _maybe_compact(self) -> None:
        # only after the index reflects the just-written entries
        if self._journal_fh is not None and self._entries_since_snapshot >= self._snapshot_every:
            self._compact()

    def _compact(self) -> None:
        """Write a fresh snapshot and start an empty journal for the next generation."""
        new_gen = self._generation + 1
        tmp = self._dir / f"snapshot-{new_gen}.json.tmp"
        doc = {
            "format": FORMAT_NAME,
            "format_version": FORMAT_VERSION,
            "generation": new_gen,
            "records": [
                {"ns": r.namespace, "id": r.id, "ver": r.version, "body": r.body}
                for ns in NAMESPACES
                for r in self._index[ns].values()
            ],
        }
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._snapshot_path(new_gen))

        old_journal = self._journal_fh
        self._journal_fh = open(self._journal_path(new_gen), "ab")
        if old_journal is not None:
            old_journal.close()
        # old generation files are redundant once the new snapshot is durable
        self._journal_path(self._generation).unlink(missing_ok=True)
        self._snapshot_path(self._generation).unlink(missing_ok=True)
        self._generation = new_gen
        self._entries_since_snapshot = 0

    # -- primitives ----------------------------------------------------------

    def get(self, namespace: str, rec_id: str) -> Record | None:
        _check_namespace(namespace)
        with self._lock:
            rec = self._index[namespace].get(rec_id)
            if rec is None:
                return None
            return Record(rec.namespace, rec.id, copy(rec.body), rec.version)

    def put_new(self, namespace: str, rec_id: str, body: dict) -> int:
        return self.apply([("put_new", namespace, rec_id, body)])[0]

    def compare_and_set(
        self, namespace: str, rec_id: str, expected_version: int, body: dict
    ) -> int:
        return self.apply([("cas", namespace, rec_id, expected_version, body)])[0]

    def delete(self, namespace: str, rec_id: str) -> None:
        self.apply([("delete", namespace, rec_id)])

    def apply(self, ops: list[tuple]) -> list[int]:
        """Apply a batch of mutations atomically (single journal write).

        Ops: ("put_new", ns, id, body) | ("cas", ns, id, expected_version, body)
        | ("delete", ns, id). All precondition checks run before anything is
        written, so a failed batch leaves no partial state.
        """
        with self._lock:
            entries: list[dict] = []
            versions: list[int] = []
            staged: list[tuple[str, str, Record | None]] = []
            for op in ops:
                kind, ns, rec_id = op[0], op[1], op[2]
                _check_namespace(ns)
                current = self._index[ns].get(rec_id)
                if kind == "put_new":
                    if current is not None:
                        raise AlreadyExists(f"{ns}/{rec_id} already exists")
                    body = op[3]
                    rec = Record(ns, rec_id, copy(body), 1)
                elif kind == "cas":
                    expected, body = op[3], op[4]
                    if current is None:
                        raise NotFound(f"{ns}/{rec_id} not found")
                    if current.version != expected:
                        raise VersionConflict(
                            f"{ns}/{rec_id}: expected v{expected}, found v{current.version}"
                        )
                    rec = Record(ns, rec_id, copy(body), expected + 1)
                elif kind == "delete":
                    if current is None:
                        raise NotFound(f"{ns}/{rec_id} not found")
                    rec = None
                else:
                    raise ValueError(f"unknown op: {kind!r}")

                if rec is None:
                    entries.append({"ns": ns, "id": rec_id, "op": "del"})
                    versions.append(0)
                else:
                    entries.append(
                        {"ns": ns, "id": rec_id, "ver": rec.version, "body": rec.body}
                    )
                    versions.append(rec.version)
                staged.append((ns, rec_id, rec))

            self._append(entries)
            for ns, rec_id, rec in staged:
                if rec is None:
                    self._index[ns].pop(rec_id, None)
                else:
                    self._index[ns][rec_id] = rec
            self._maybe_compact()
            return versions

    def scan(
        self,
        namespace: str,
        predicate: Callable[[Record], bool] | None = None,
        sort_key: Callable[[Record], Any] | None = None,
    ) -> list[Record]:
        """Point-in-time snapshot of a namespace, optionally filtered and sorted."""
        _check_namespace(namespace)
        with self._lock:
            records = [
                Record(r.namespace, r.id, copy(r.body), r.version)
                for r in self._index[namespace].values()
            ]
        if predicate is not None:
            records = [r for r in records if predicate(r)]
        if sort_key is not None:
            records.sort(key=sort_key)
        return records

    def count(self, namespace: str) -> int:
        _check_namespace(namespace)
        with self._lock:
            return len(self._index[namespace])

    # -- full-store dump (CLI export/import) ----------------------------------

    def export_dump(self) -> dict:
        with self._lock:
            records = [
                {"ns": r.namespace, "id": r.id, "ver": r.version, "body": r.body}
                for ns in NAMESPACES
                for r in sorted(self._index[ns].values(), key=lambda r: r.id)
            ]
        return {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "records": records}

    def import_dump(self, doc: dict) -> int:
        if doc.get("format") != FORMAT_NAME:
            raise ValueError("not an open-intake store dump")
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported dump version {doc.get('format_version')}")
        with self._lock:
            if any(self._index[ns] for ns in NAMESPACES):
                raise AlreadyExists("import requires an empty store")
            entries = []
            for rec in doc["records"]:
                _check_namespace(rec["ns"])
                entries.append(
                    {"ns": rec["ns"], "id": rec["id"], "ver": rec["ver"], "body": rec["body"]}
                )
            self._append(entries)
            for entry in entries:
                self._apply_entry(entry)
            self._maybe_compact()
            return len(entries)


def export_json_bytes(store: JournalStore) -> bytes:
    """Canonical byte rendering of a dump: stable key order, no whitespace drift."""
    return json.dumps(store.export_dump(), sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    ) + b"\n"
