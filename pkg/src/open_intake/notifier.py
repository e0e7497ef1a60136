"""Outbound notifications: owner queue alerts and editor-link mail.

Every logical event carries a dedup key; a second notify with the same key is
suppressed, so redelivery storms collapse to one message. Failed sends land in
a retry queue flushed by ``drain()`` (or a background worker when enabled),
with exponential backoff and a bounded attempt count.

The default adapter appends messages to a local outbox file, one JSON object
per line, which keeps the pipeline testable with no mail infrastructure. An
SMTP adapter is available through configuration.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .clock import WallClock, to_rfc3339
from .errors import AdapterFailure, InvalidRecipient
from .model import is_valid_email

KINDS = ("pending_submission", "editor_link", "remoderation")

QUEUED = "queued"
DELIVERED = "delivered"
SUPPRESSED = "suppressed_duplicate"
FAILED = "failed"


@dataclass(frozen=True)
class NotificationEvent:
    event_id: str
    kind: str
    recipient: str
    subject_line: str
    body: str
    dedup_key: str
    created_at: str

    def to_doc(self) -> dict:
        return {
            "recipient": self.recipient,
            "subject_line": self.subject_line,
            "body": self.body,
            "dedup_key": self.dedup_key,
            "at": self.created_at,
            "kind": self.kind,
        }


@dataclass
class DeliveryRecord:
    event: NotificationEvent
    status: str
    attempts: int = 0
    error: str | None = None


class OutboxFileAdapter:
    """Appends one JSON object per line to a local outbox file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def send(self, event: NotificationEvent) -> None:
        line = json.dumps(event.to_doc(), sort_keys=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def existing_dedup_keys(self) -> set[str]:
        keys: set[str] = set()
        if self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                try:
                    keys.add(json.loads(line)["dedup_key"])
                except (ValueError, KeyError):
                    continue
        return keys

    def messages(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text("utf-8").splitlines()]


class MemoryAdapter:
    """In-process sink; can be told to fail the first N sends per dedup key."""

    def __init__(self, fail_first: int = 0):
        self.sent: list[NotificationEvent] = []
        self.attempts: dict[str, int] = {}
        self.fail_first = fail_first
        self._lock = threading.Lock()

    def send(self, event: NotificationEvent) -> None:
        with self._lock:
            n = self.attempts.get(event.dedup_key, 0) + 1
            self.attempts[event.dedup_key] = n
            if n <= self.fail_first:
                raise AdapterFailure(f"injected failure #{n}")
            self.sent.append(event)


class SmtpAdapter:
    """Plain-text mail over SMTP; settings come from the notifier config."""

    def __init__(
        self,
        host: str,
        port: int = 25,
        username: str | None = None,
        password: str | None = None,
        use_tls: bool = False,
        sender: str = "open-intake@localhost",
    ):
        self.host = host
        self.port = port
        self.username = username
        self.password = password
        self.use_tls = use_tls
        self.sender = sender

    def send(self, event: NotificationEvent) -> None:
        import smtplib
        from email.message import EmailMessage

        msg = EmailMessage()
        msg["From"] = self.sender
        msg["To"] = event.recipient
        msg["Subject"] = event.subject_line
        msg.set_content(event.body)
        try:
            with smtplib.SMTP(self.host, self.port, timeout=10) as smtp:
                if self.use_tls:
                    smtp.starttls()
                if self.username:
                    smtp.login(self.username, self.password or "")
                smtp.send_message(msg)
        except (OSError, smtplib.SMTPException) as exc:
            raise AdapterFailure(str(exc)) from exc


@dataclass
class _RetryItem:
    record: DeliveryRecord
    not_before: float = 0.0


class Notifier:
    """Dispatches events to one adapter, at least once per dedup key.

    In the default inline mode the first delivery attempt happens inside
    ``notify``; failures queue for retry and are flushed by ``drain``. With
    ``start_worker()`` a background thread owns all attempts and ``notify``
    only enqueues (the returned record settles asynchronously).
    """

    def __init__(
        self,
        adapter,
        max_retries: int = 3,
        backoff_seconds: float = 1.0,
        queue_capacity: int = 1000,
        clock=None,
        time_fn=time.monotonic,
        sleep_fn=time.sleep,
    ):
        self._adapter = adapter
        self._max_retries = max_retries
        self._backoff = backoff_seconds
        self._clock = clock or WallClock()
        self._time = time_fn
        self._sleep = sleep_fn
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        self._log: list[DeliveryRecord] = []
        self._retry: list[_RetryItem] = []
        self._counter = 0
        self._queue: queue.Queue[_RetryItem] = queue.Queue(maxsize=queue_capacity)
        self._worker: threading.Thread | None = None
        self._stop = threading.Event()
        if hasattr(adapter, "existing_dedup_keys"):
            self._seen |= adapter.existing_dedup_keys()

    # -- public API ------------------------------------------------------------

    def notify(
        self, kind: str, recipient: str, subject_line: str, body: str, dedup_key: str
    ) -> DeliveryRecord:
        if kind not in KINDS:
            raise ValueError(f"unknown notification kind: {kind!r}")
        if not is_valid_email(recipient):
            raise InvalidRecipient(f"not a valid recipient address: {recipient!r}")
        with self._lock:
            self._counter += 1
            event = NotificationEvent(
                event_id=f"nt-{self._counter:08d}",
                kind=kind,
                recipient=recipient,
                subject_line=subject_line,
                body=body,
                dedup_key=dedup_key,
                created_at=to_rfc3339(self._clock.now()),
            )
            if dedup_key in self._seen:
                record = DeliveryRecord(event, SUPPRESSED)
                self._log.append(record)
                return record
            self._seen.add(dedup_key)
            record = DeliveryRecord(event, QUEUED)
            self._log.append(record)

        if self._worker is not None:
            self._queue.put(_RetryItem(record))  # blocks only on queue admission
        else:
            self._attempt(record)
        return record

    def drain(self) -> list[DeliveryRecord]:
        """Flush the retry queue, then return all outcomes in dispatch order."""
        if self._worker is not None:
            self._queue.join()
        while True:
            with self._lock:
                if not self._retry:
                    break
                item = self._retry.pop(0)
            wait = item.not_before - self._time()
            if wait > 0:
                self._sleep(wait)
            self._attempt(item.record)
        with self._lock:
            return list(self._log)

    def outcomes(self) -> list[DeliveryRecord]:
        with self._lock:
            return list(self._log)

    # -- background worker -------------------------------------------------------

    def start_worker(self) -> None:
        if self._worker is not None:
            return
        self._stop.clear()
        self._worker = threading.Thread(target=self._run_worker, daemon=True)
        self._worker.start()

    def stop_worker(self) -> None:
        if self._worker is None:
            return
        self._stop.set()
        self._worker.join(timeout=5)
        self._worker = None

    def _run_worker(self) -> None:
        while not self._stop.is_set():
            try:
                item = self._queue.get(timeout=0.1)
            except queue.Empty:
                self._flush_due_retries()
                continue
            self._attempt(item.record)
            self._queue.task_done()

    def _flush_due_retries(self) -> None:
        now = self._time()
        with self._lock:
            due = [i for i in self._retry if i.not_before <= now]
            self._retry = [i for i in self._retry if i.not_before > now]
        for item in due:
            self._attempt(item.record)

    # -- delivery ----------------------------------------------------------------

    def _attempt(self, record: DeliveryRecord) -> None:
        record.attempts += 1
        try:
            self._adapter.send(record.event)
        except AdapterFailure as exc:
            record.error = str(exc)
            if record.attempts >= self._max_retries:
                record.status = FAILED
                return
            record.status = FAILED  # transient; drain/worker will retry
            delay = self._backoff * (2 ** (record.attempts - 1))
            with self._lock:
                self._retry.append(_RetryItem(record, not_before=self._time() + delay))
        else:
            record.status = DELIVERED
            record.error = None
