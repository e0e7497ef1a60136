"""The open-input state machine.

Submissions enter through ``submit``, which gates on the section's allow-list
and policy tier, validates the payload, and assigns the initial status:
owners and trusted users publish immediately, everyone else lands in the
pending queue and the site owner gets a notification. ``decide`` resolves
pending elements with one call; repeating a decision is a no-op and the
opposite decision reverses it. Pending and declined content never appears in
public listings.

Every mutation is an atomic store batch (audit record + element write) under
compare-and-set, so concurrent moderators serialize per element.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field

from .clock import parse_rfc3339, to_rfc3339
from .errors import (
    ConflictRetryExhausted,
    ElementGone,
    InputDisabled,
    InvalidEmail,
    NotAuthorized,
    PolicyDenied,
    TypeChangeForbidden,
    TypeNotAllowed,
    UnknownElement,
    UnknownToken,
    ValidationFailed,
    VersionConflict,
)
from .links import EditorLink, EditorLinks
from .model import SiteDirectory, SubmissionPolicy, TypeRegistry, is_valid_email
from .store import JournalStore

PENDING = "pending"
ACCEPTED = "accepted"
DECLINED = "declined"
STATUSES = (PENDING, ACCEPTED, DECLINED)

IDENTITY_CLASSES = (
    "owner",
    "registered_trusted",
    "registered",
    "external_authenticated",
    "anonymous",
)

# Identity strength, used to match submitters against a section's policy tier.
_IDENTITY_RANK = {
    "anonymous": 0,
    "external_authenticated": 1,
    "registered": 2,
    "registered_trusted": 3,
    "owner": 4,
}

_POLICY_MIN_RANK = {
    SubmissionPolicy.ANYONE: 0,
    SubmissionPolicy.EXTERNAL_AUTHENTICATED: 1,
    SubmissionPolicy.REGISTERED_USERS: 2,
    SubmissionPolicy.OWNER_ONLY: 4,
}

# Who skips the confirmation queue.
INITIAL_STATUS = {
    "owner": ACCEPTED,
    "registered_trusted": ACCEPTED,
    "registered": PENDING,
    "external_authenticated": PENDING,
    "anonymous": PENDING,
}

_CAS_RETRIES = 3


@dataclass(frozen=True)
class SubmitterIdentity:
    class_: str
    subject: str | None = None

    def __post_init__(self):
        if self.class_ not in IDENTITY_CLASSES:
            raise ValueError(f"unknown identity class: {self.class_!r}")

    def to_doc(self) -> dict:
        return {"class": self.class_, "subject": self.subject}

    @classmethod
    def from_doc(cls, doc: dict) -> "SubmitterIdentity":
        return cls(class_=doc["class"], subject=doc.get("subject"))


def owner_identity(site_id: str) -> SubmitterIdentity:
    return SubmitterIdentity(class_="owner", subject=site_id)


@dataclass(frozen=True)
class Element:
    element_id: str
    site_id: str
    section_id: str
    type_id: str
    values: dict
    status: str
    submitter: SubmitterIdentity
    submitter_email: str | None
    created_at: str
    decided_at: str | None
    version: int

    @classmethod
    def from_record(cls, rec) -> "Element":
        body = rec.body
        return cls(
            element_id=body["element_id"],
            site_id=body["site_id"],
            section_id=body["section_id"],
            type_id=body["type_id"],
            values=body["values"],
            status=body["status"],
            submitter=SubmitterIdentity.from_doc(body["submitter"]),
            submitter_email=body.get("submitter_email"),
            created_at=body["created_at"],
            decided_at=body.get("decided_at"),
            version=rec.version,
        )


@dataclass
class Page:
    items: list[Element]
    page: int
    page_size: int
    total: int


@dataclass
class TypeCount:
    submitted: int = 0
    accepted: int = 0


@dataclass
class QueueStats:
    total_submitted: int
    accepted: int
    declined: int
    pending: int
    acceptance_rate: float
    per_type: dict[str, TypeCount] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "total_submitted": self.total_submitted,
            "accepted": self.accepted,
            "declined": self.declined,
            "pending": self.pending,
            "acceptance_rate": self.acceptance_rate,
            "per_type": {
                t: {"submitted": c.submitted, "accepted": c.accepted}
                for t, c in sorted(self.per_type.items())
            },
        }


@dataclass(frozen=True)
class Capability:
    """What a redeemed editor link grants: one element, edit and delete."""

    element: Element
    actions: tuple[str, ...]
    link: EditorLink


@dataclass(frozen=True)
class AuditEvent:
    event_id: str
    element_id: str
    action: str  # submitted | accepted | declined | edited | deleted | link_issued
    actor: SubmitterIdentity
    at: str


class IdAllocator:
    """Monotonic per-namespace ids, reseeded from the store on startup."""

    _PREFIXES = {"element": "el", "audit": "ev"}

    def __init__(self, store: JournalStore):
        self._lock = threading.Lock()
        self._counters: dict[str, int] = {}
        for namespace, prefix in self._PREFIXES.items():
            pattern = re.compile(rf"^{prefix}-(\d+)$")
            highest = 0
            for rec in store.scan(namespace):
                m = pattern.match(rec.id)
                if m:
                    highest = max(highest, int(m.group(1)))
            self._counters[namespace] = highest

    def next(self, namespace: str) -> str:
        with self._lock:
            self._counters[namespace] += 1
            return f"{self._PREFIXES[namespace]}-{self._counters[namespace]:08d}"


class AuditLog:
    def __init__(self, store: JournalStore, ids: IdAllocator, clock):
        self._store = store
        self._ids = ids
        self._clock = clock

    def entry(self, element_id: str, action: str, actor: SubmitterIdentity, at: str) -> tuple:
        """Build a store op for batching with the mutation it describes."""
        event_id = self._ids.next("audit")
        body = {
            "event_id": event_id,
            "element_id": element_id,
            "action": action,
            "actor": actor.to_doc(),
            "at": at,
        }
        return ("put_new", "audit", event_id, body)

    def record(self, element_id: str, action: str, actor: SubmitterIdentity) -> None:
        op = self.entry(element_id, action, actor, to_rfc3339(self._clock.now()))
        self._store.apply([op])

    def events_for(self, element_id: str) -> list[AuditEvent]:
        recs = self._store.scan(
            "audit",
            predicate=lambda r: r.body["element_id"] == element_id,
            sort_key=lambda r: (r.body["at"], r.body["event_id"]),
        )
        return [
            AuditEvent(
                event_id=r.body["event_id"],
                element_id=r.body["element_id"],
                action=r.body["action"],
                actor=SubmitterIdentity.from_doc(r.body["actor"]),
                at=r.body["at"],
            )
            for r in recs
        ]


class SubmissionEngine:
    def __init__(
        self,
        store: JournalStore,
        types: TypeRegistry,
        sites: SiteDirectory,
        notifier,
        clock,
        base_url: str = "http://localhost:8080",
    ):
        self._store = store
        self.types = types
        self.sites = sites
        self._notifier = notifier
        self._clock = clock
        self._base_url = base_url.rstrip("/")
        self._ids = IdAllocator(store)
        self.audit = AuditLog(store, self._ids, clock)
        self.links = EditorLinks(store, notifier, self.audit, clock, self._base_url)

    # -- submission -----------------------------------------------------------

    def submit(
        self,
        site_id: str,
        section_id: str,
        type_id: str,
        values: dict,
        identity: SubmitterIdentity,
        email: str | None = None,
    ) -> tuple[Element, EditorLink | None]:
        """Accept one typed submission; returns the element and, when an email
        was given, the freshly issued editor link."""
        section = self.sites.get_section(site_id, section_id)
        site = self.sites.get_site(site_id)
        is_owner = identity.class_ == "owner"
        if is_owner and identity.subject not in (None, site_id):
            raise NotAuthorized(f"owner identity does not match site {site_id!r}")
        if email is not None and email != "" and not is_valid_email(email):
            raise InvalidEmail(f"not a valid email address: {email!r}")

        if not section.open_input_enabled and not is_owner:
            raise InputDisabled(f"section {section_id!r} does not accept public input")
        if type_id not in section.allowed_types:
            raise TypeNotAllowed(
                f"type {type_id!r} is not allowed in section {section_id!r}"
            )
        report = self.types.validate_payload(type_id, values)
        if not report.ok:
            raise ValidationFailed(report)
        if _IDENTITY_RANK[identity.class_] < _POLICY_MIN_RANK[section.policy]:
            raise PolicyDenied(
                f"section {section_id!r} requires {section.policy.value}"
            )

        status = INITIAL_STATUS[identity.class_]
        element_id = self._ids.next("element")
        at = to_rfc3339(self._clock.now())
        body = {
            "element_id": element_id,
            "site_id": site_id,
            "section_id": section_id,
            "type_id": type_id,
            "values": values,
            "status": status,
            "submitter": identity.to_doc(),
            "submitter_email": email or None,
            "created_at": at,
            "decided_at": None,
        }
        audit_op = self.audit.entry(element_id, "submitted", identity, at)
        self._store.apply([audit_op, ("put_new", "element", element_id, body)])
        element = Element.from_record(_Rec(body, 1))

        if status == PENDING:
            self._notify_pending(site, element)

        link = None
        if email:
            link = self.links.issue(element_id, email, actor=identity)
        return element, link

    def _notify_pending(self, site, element: Element) -> None:
        queue_url = f"{self._base_url}/admin/sites/{site.site_id}/queue"
        self._notifier.notify(
            kind="pending_submission",
            recipient=site.owner_email,
            subject_line=f'New pending submission for "{site.name}"',
            body=(
                f"A visitor submitted new {element.type_id} content to section "
                f"'{element.section_id}' of your site '{site.site_id}'.\n"
                f"Element: {element.element_id}\n"
                f"Review it here: {queue_url}?highlight={element.element_id}\n"
            ),
            dedup_key=f"pending_submission:{element.element_id}",
        )

    # -- moderation -------------------------------------------------------------

    def decide(self, element_id: str, decision: str, actor: SubmitterIdentity) -> Element:
        """Resolve (or reverse) an element. Repeating a decision is a no-op."""
        if decision not in ("accept", "decline"):
            raise ValueError(f"decision must be accept or decline, got {decision!r}")
        target = ACCEPTED if decision == "accept" else DECLINED
        for _ in range(_CAS_RETRIES):
            rec = self._store.get("element", element_id)
            if rec is None:
                raise UnknownElement(f"no such element: {element_id!r}")
            self._authorize_owner(actor, rec.body["site_id"])
            if rec.body["status"] == target:
                return Element.from_record(rec)
            at = to_rfc3339(self._clock.now())
            body = {**rec.body, "status": target, "decided_at": at}
            audit_op = self.audit.entry(element_id, target, actor, at)
            try:
                self._store.apply(
                    [audit_op, ("cas", "element", element_id, rec.version, body)]
                )
            except VersionConflict:
                continue  # someone else moved it; re-read and re-evaluate
            return Element.from_record(_Rec(body, rec.version + 1))
        raise ConflictRetryExhausted(f"element {element_id!r} kept changing; try again")

    def pending_queue(self, site_id: str, actor: SubmitterIdentity) -> list[Element]:
        self.sites.get_site(site_id)
        self._authorize_owner(actor, site_id)
        recs = self._store.scan(
            "element",
            predicate=lambda r: r.body["site_id"] == site_id and r.body["status"] == PENDING,
        )
        recs.sort(key=lambda r: (parse_rfc3339(r.body["created_at"]), r.id))
        return [Element.from_record(r) for r in recs]

    def delete_element(self, element_id: str, actor: SubmitterIdentity) -> None:
        rec = self._store.get("element", element_id)
        if rec is None:
            raise UnknownElement(f"no such element: {element_id!r}")
        self._authorize_owner(actor, rec.body["site_id"])
        at = to_rfc3339(self._clock.now())
        audit_op = self.audit.entry(element_id, "deleted", actor, at)
        self._store.apply([audit_op, ("delete", "element", element_id)])

    # -- reading ------------------------------------------------------------------

    def get_element(self, element_id: str) -> Element:
        rec = self._store.get("element", element_id)
        if rec is None:
            raise UnknownElement(f"no such element: {element_id!r}")
        return Element.from_record(rec)

    def list_public(
        self,
        site_id: str,
        section_id: str,
        page: int = 1,
        page_size: int = 20,
        sort: str = "newest_first",
    ) -> Page:
        """Accepted elements only, stably ordered, exact gap-free pagination."""
        if sort not in ("newest_first", "oldest_first"):
            raise ValueError(f"unknown sort: {sort!r}")
        if page < 1 or page_size < 1:
            raise ValueError("page and page_size must be >= 1")
        self.sites.get_section(site_id, section_id)
        recs = self._store.scan(
            "element",
            predicate=lambda r: (
                r.body["site_id"] == site_id
                and r.body["section_id"] == section_id
                and r.body["status"] == ACCEPTED
            ),
        )
        recs.sort(key=lambda r: r.id)  # tie-break: element_id ascending
        recs.sort(
            key=lambda r: parse_rfc3339(r.body["created_at"]),
            reverse=(sort == "newest_first"),
        )
        start = (page - 1) * page_size
        items = [Element.from_record(r) for r in recs[start:start + page_size]]
        return Page(items=items, page=page, page_size=page_size, total=len(recs))

    def stats(self, site_id: str | None = None) -> QueueStats:
        if site_id is not None:
            self.sites.get_site(site_id)
            predicate = lambda r: r.body["site_id"] == site_id
        else:
            predicate = None
        per_type: dict[str, TypeCount] = {}
        counts = {PENDING: 0, ACCEPTED: 0, DECLINED: 0}
        for rec in self._store.scan("element", predicate=predicate):
            status = rec.body["status"]
            counts[status] += 1
            tc = per_type.setdefault(rec.body["type_id"], TypeCount())
            tc.submitted += 1
            if status == ACCEPTED:
                tc.accepted += 1
        total = sum(counts.values())
        return QueueStats(
            total_submitted=total,
            accepted=counts[ACCEPTED],
            declined=counts[DECLINED],
            pending=counts[PENDING],
            acceptance_rate=counts[ACCEPTED] / max(total, 1),
            per_type=per_type,
        )

    # -- editor links ----------------------------------------------------------------

    def issue_link(self, element_id: str, email: str, actor: SubmitterIdentity) -> EditorLink:
        """Late issuance by the owner (submit-time issuance goes through submit)."""
        rec = self._store.get("element", element_id)
        if rec is None:
            raise UnknownElement(f"no such element: {element_id!r}")
        self._authorize_owner(actor, rec.body["site_id"])
        return self.links.issue(element_id, email, actor=actor)

    def redeem(self, token: str) -> Capability:
        link = self.links.redeem(token)
        return Capability(
            element=self.get_element(link.element_id),
            actions=("edit", "delete"),
            link=link,
        )

    def edit_via_link(self, token: str, type_id: str | None, values: dict) -> Element:
        """Replace the payload through a capability link. ``type_id`` may be
        omitted (None) to mean "keep the element's type"; passing a different
        type is forbidden."""
        link = self.links.redeem(token)
        actor = SubmitterIdentity(
            class_="anonymous", subject=f"editor-link:{link.element_id}"
        )
        for _ in range(_CAS_RETRIES):
            rec = self._store.get("element", link.element_id)
            if rec is None:
                raise ElementGone("the linked content no longer exists")
            if type_id is not None and type_id != rec.body["type_id"]:
                raise TypeChangeForbidden(
                    f"element is a {rec.body['type_id']}; links cannot change the type"
                )
            report = self.types.validate_payload(rec.body["type_id"], values)
            if not report.ok:
                raise ValidationFailed(report)
            site = self.sites.get_site(rec.body["site_id"])

            remoderated = rec.body["status"] == ACCEPTED and site.remoderate_on_edit
            status = PENDING if remoderated else rec.body["status"]
            decided_at = None if remoderated else rec.body["decided_at"]
            at = to_rfc3339(self._clock.now())
            body = {
                **rec.body,
                "values": values,
                "status": status,
                "decided_at": decided_at,
            }
            audit_op = self.audit.entry(link.element_id, "edited", actor, at)
            try:
                self._store.apply(
                    [audit_op, ("cas", "element", link.element_id, rec.version, body)]
                )
            except VersionConflict:
                continue
            element = Element.from_record(_Rec(body, rec.version + 1))
            if remoderated:
                self._notifier.notify(
                    kind="remoderation",
                    recipient=site.owner_email,
                    subject_line=f'Edited content awaiting re-approval on "{site.name}"',
                    body=(
                        f"Element {element.element_id} was edited through its editor link "
                        f"and returned to the pending queue.\n"
                        f"Review it here: {self._base_url}/admin/sites/{site.site_id}/queue"
                        f"?highlight={element.element_id}\n"
                    ),
                    dedup_key=f"remoderation:{element.element_id}:v{element.version}",
                )
            return element
        raise ConflictRetryExhausted(f"element {link.element_id!r} kept changing; try again")

    def delete_via_link(self, token: str) -> None:
        link = self.links.redeem(token)
        actor = SubmitterIdentity(
            class_="anonymous", subject=f"editor-link:{link.element_id}"
        )
        at = to_rfc3339(self._clock.now())
        audit_op = self.audit.entry(link.element_id, "deleted", actor, at)
        self._store.apply([audit_op, ("delete", "element", link.element_id)])

    def revoke_link(
        self,
        actor: SubmitterIdentity,
        token: str | None = None,
        element_id: str | None = None,
    ) -> int:
        """Revoke one link by token, or every link of an element. Owner only."""
        if (token is None) == (element_id is None):
            raise ValueError("pass exactly one of token or element_id")
        if token is not None:
            rec = self._store.get("link", _link_digest(token))
            if rec is None:
                raise UnknownToken("no such token")
            self._authorize_owner_of_element_or_site(actor, rec.body["element_id"])
            self.links.revoke(token)
            return 1
        rec = self._store.get("element", element_id)
        if rec is None:
            raise UnknownElement(f"no such element: {element_id!r}")
        self._authorize_owner(actor, rec.body["site_id"])
        return self.links.revoke_for_element(element_id)

    # -- authorization ---------------------------------------------------------------

    def _authorize_owner(self, actor: SubmitterIdentity, site_id: str) -> None:
        if actor.class_ != "owner" or actor.subject not in (None, site_id):
            raise NotAuthorized(f"requires the owner of site {site_id!r}")

    def _authorize_owner_of_element_or_site(
        self, actor: SubmitterIdentity, element_id: str
    ) -> None:
        rec = self._store.get("element", element_id)
        if rec is not None:
            self._authorize_owner(actor, rec.body["site_id"])
        elif actor.class_ != "owner":
            raise NotAuthorized("requires a site owner")


def _link_digest(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class _Rec:
    """Lightweight record view for freshly written bodies (avoids a re-read)."""

    __slots__ = ("body", "version")

    def __init__(self, body: dict, version: int):
        self.body = body
        self.version = version
