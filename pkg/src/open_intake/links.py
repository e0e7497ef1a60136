"""Editor links: unguessable capability tokens for registration-free editing.

A link binds one element to one email address. The token is 128 bits from a
CSPRNG rendered in canonical UUID form; possession of the token is the whole
credential. Lookups go through a SHA-256 digest index and a constant-time
compare, so redemption leaks nothing about near-miss tokens.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import uuid
from dataclasses import dataclass

from .clock import to_rfc3339
from .errors import ElementGone, InvalidEmail, Revoked, UnknownElement, UnknownToken
from .model import is_valid_email


def _digest(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def new_token() -> str:
    """128 random bits in lowercase hyphenated UUID rendering."""
    return str(uuid.UUID(bytes=secrets.token_bytes(16)))


@dataclass(frozen=True)
class EditorLink:
    token: str
    element_id: str
    email: str
    issued_at: str
    revoked: bool

    def edit_url(self, base_url: str) -> str:
        return f"{base_url.rstrip('/')}/edit/{self.token}"

    def to_doc(self) -> dict:
        return {
            "token": self.token,
            "element_id": self.element_id,
            "email": self.email,
            "issued_at": self.issued_at,
            "revoked": self.revoked,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EditorLink":
        return cls(
            token=doc["token"],
            element_id=doc["element_id"],
            email=doc["email"],
            issued_at=doc["issued_at"],
            revoked=bool(doc["revoked"]),
        )


class EditorLinks:
    def __init__(self, store, notifier, audit, clock, base_url: str):
        self._store = store
        self._notifier = notifier
        self._audit = audit
        self._clock = clock
        self._base_url = base_url

    def issue(self, element_id: str, email: str, actor) -> EditorLink:
        """Mint a link for an element and mail it to the bound address."""
        if self._store.get("element", element_id) is None:
            raise UnknownElement(f"no such element: {element_id!r}")
        if not is_valid_email(email):
            raise InvalidEmail(f"not a valid email address: {email!r}")
        token = new_token()
        link = EditorLink(
            token=token,
            element_id=element_id,
            email=email,
            issued_at=to_rfc3339(self._clock.now()),
            revoked=False,
        )
        self._store.put_new("link", _digest(token), link.to_doc())
        self._audit.record(element_id, "link_issued", actor)
        url = link.edit_url(self._base_url)
        self._notifier.notify(
            kind="editor_link",
            recipient=email,
            subject_line="Your content edit link",
            body=(
                "You can edit or remove the content you submitted at any time "
                f"using this private link:\n\n{url}\n\n"
                "Keep it to yourself; anyone holding the link can change the content."
            ),
            dedup_key=f"editor_link:{token}",
        )
        return link

    def redeem(self, token: str) -> EditorLink:
        """Resolve a presented token to a live link or fail without a hint."""
        rec = self._store.get("link", _digest(token))
        if rec is None or not hmac.compare_digest(rec.body["token"], token):
            raise UnknownToken("no such token")
        if rec.body["revoked"]:
            raise Revoked("this edit link was revoked")
        if self._store.get("element", rec.body["element_id"]) is None:
            raise ElementGone("the linked content no longer exists")
        return EditorLink.from_doc(rec.body)

    def revoke(self, token: str) -> None:
        rec = self._store.get("link", _digest(token))
        if rec is None:
            raise UnknownToken("no such token")
        if rec.body["revoked"]:
            return
        body = {**rec.body, "revoked": True}
        self._store.compare_and_set("link", rec.id, rec.version, body)

    def revoke_for_element(self, element_id: str) -> int:
        """Revoke every link bound to an element; returns how many were live."""
        count = 0
        for rec in self._store.scan(
            "link", predicate=lambda r: r.body["element_id"] == element_id
        ):
            if not rec.body["revoked"]:
                body = {**rec.body, "revoked": True}
                self._store.compare_and_set("link", rec.id, rec.version, body)
                count += 1
        return count

    def links_for_element(self, element_id: str) -> list[EditorLink]:
        return [
            EditorLink.from_doc(r.body)
            for r in self._store.scan(
                "link",
                predicate=lambda r: r.body["element_id"] == element_id,
                sort_key=lambda r: r.body["issued_at"],
            )
        ]
