"""Content model: semantic types, payload validation, sites and section trees.

A semantic type describes one kind of content element (a testimonial, a
billboard announcement, ...) as an ordered list of field specs. Sections are
the structural nodes of a site; each section carries an allow-list of types
and a submission policy tier. Both registries are backed by the store so
custom types and sections survive restarts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from urllib.parse import urlsplit

from .clock import to_rfc3339
from .errors import (
    CycleWouldForm,
    DuplicateSection,
    DuplicateSite,
    DuplicateTypeId,
    EmptySchema,
    InvalidSchema,
    UnknownParent,
    UnknownSection,
    UnknownSite,
    UnknownType,
)
from .store import JournalStore

MAX_URL_LENGTH = 2048

# Default per-kind limits. For textual kinds max_length counts characters;
# for image_list it caps the number of entries.
DEFAULT_MAX_LENGTH = {
    "short_text": 200,
    "long_text": 64 * 1024,
    "url": MAX_URL_LENGTH,
    "date": 10,
    "integer_rating": 1,
    "image_ref": 2048,
    "image_list": 50,
}

VALUE_KINDS = tuple(DEFAULT_MAX_LENGTH)


class SubmissionPolicy(str, Enum):
    OWNER_ONLY = "owner_only"
    REGISTERED_USERS = "registered_users"
    EXTERNAL_AUTHENTICATED = "external_authenticated"
    ANYONE = "anyone"


@dataclass(frozen=True)
class FieldSpec:
    name: str
    value_kind: str
    required: bool = False
    max_length: int | None = None

    def effective_max_length(self) -> int:
        if self.max_length is not None:
            return self.max_length
        return DEFAULT_MAX_LENGTH[self.value_kind]

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "value_kind": self.value_kind,
            "required": self.required,
            "max_length": self.effective_max_length(),
        }


@dataclass(frozen=True)
class SemanticType:
    type_id: str
    kind: str  # builtin | custom
    label: str
    fields: tuple[FieldSpec, ...]

    def field_map(self) -> dict[str, FieldSpec]:
        return {f.name: f for f in self.fields}

    def to_doc(self) -> dict:
        return {
            "type_id": self.type_id,
            "kind": self.kind,
            "label": self.label,
            "fields": [f.to_doc() for f in self.fields],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SemanticType":
        return cls(
            type_id=doc["type_id"],
            kind=doc["kind"],
            label=doc["label"],
            fields=tuple(
                FieldSpec(
                    name=f["name"],
                    value_kind=f["value_kind"],
                    required=bool(f.get("required", False)),
                    max_length=f.get("max_length"),
                )
                for f in doc["fields"]
            ),
        )


@dataclass(frozen=True)
class FieldError:
    field: str
    code: str  # missing_field | unknown_field | invalid_value | too_long
    message: str

    def to_doc(self) -> dict:
        return {"field": self.field, "code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    ok: bool
    errors: list[FieldError] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {"ok": self.ok, "errors": [e.to_doc() for e in self.errors]}


@dataclass(frozen=True)
class Section:
    section_id: str
    site_id: str
    parent_id: str | None
    name: str
    description: str
    allowed_types: tuple[str, ...]
    policy: SubmissionPolicy
    open_input_enabled: bool

    def to_doc(self) -> dict:
        return {
            "section_id": self.section_id,
            "site_id": self.site_id,
            "parent_id": self.parent_id,
            "name": self.name,
            "description": self.description,
            "allowed_types": list(self.allowed_types),
            "policy": self.policy.value,
            "open_input_enabled": self.open_input_enabled,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Section":
        return cls(
            section_id=doc["section_id"],
            site_id=doc["site_id"],
            parent_id=doc.get("parent_id"),
            name=doc["name"],
            description=doc.get("description", ""),
            allowed_types=tuple(doc["allowed_types"]),
            policy=SubmissionPolicy(doc["policy"]),
            open_input_enabled=bool(doc["open_input_enabled"]),
        )


@dataclass(frozen=True)
class Site:
    site_id: str
    name: str
    owner_key: str
    owner_email: str
    remoderate_on_edit: bool
    created_at: str

    def to_doc(self) -> dict:
        return {
            "site_id": self.site_id,
            "name": self.name,
            "owner_key": self.owner_key,
            "owner_email": self.owner_email,
            "remoderate_on_edit": self.remoderate_on_edit,
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Site":
        return cls(
            site_id=doc["site_id"],
            name=doc["name"],
            owner_key=doc["owner_key"],
            owner_email=doc["owner_email"],
            remoderate_on_edit=bool(doc["remoderate_on_edit"]),
            created_at=doc["created_at"],
        )


@dataclass
class SectionNode:
    section: Section
    children: list["SectionNode"] = field(default_factory=list)


# -- built-in schemas ---------------------------------------------------------

def _t(name, kind, required=False, max_length=None):
    return FieldSpec(name=name, value_kind=kind, required=required, max_length=max_length)


BUILTIN_TYPES: tuple[SemanticType, ...] = (
    SemanticType("testimonial", "builtin", "Testimonial", (
        _t("author_name", "short_text", required=True),
        _t("body", "long_text", required=True),
        _t("rating", "integer_rating"),
    )),
    SemanticType("billboard", "builtin", "Billboard announcement", (
        _t("title", "short_text", required=True),
        _t("body", "long_text", required=True),
        _t("contact", "short_text"),
        _t("expires_at", "date"),
    )),
    SemanticType("qa", "builtin", "Question and answer", (
        _t("question", "long_text", required=True),
        _t("answer", "long_text"),
    )),
    SemanticType("news", "builtin", "News / event", (
        _t("title", "short_text", required=True),
        _t("body", "long_text", required=True),
        _t("published_at", "date"),
    )),
    SemanticType("client_info", "builtin", "Client info", (
        _t("firm_name", "short_text", required=True),
        _t("description", "long_text"),
        _t("url", "url"),
    )),
    SemanticType("text", "custom", "Text", (
        _t("title", "short_text", required=True),
        _t("body", "long_text", required=True),
    )),
    SemanticType("video", "custom", "Video", (
        _t("title", "short_text", required=True),
        _t("url", "url", required=True),
    )),
    SemanticType("link", "custom", "Link", (
        _t("title", "short_text", required=True),
        _t("url", "url", required=True),
        _t("description", "long_text"),
    )),
    SemanticType("image_gallery", "custom", "Image gallery", (
        _t("title", "short_text", required=True),
        _t("images", "image_list", required=True),
    )),
)


# -- value validation ---------------------------------------------------------

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


def is_valid_email(value: str) -> bool:
    return isinstance(value, str) and len(value) <= 320 and bool(_EMAIL_RE.match(value))


def is_valid_url(value: str) -> bool:
    """Fixed URL grammar: http/https scheme, non-empty host, length <= 2048."""
    if not isinstance(value, str) or len(value) > MAX_URL_LENGTH:
        return False
    if any(c.isspace() for c in value):
        return False
    try:
        parts = urlsplit(value)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.hostname)


def _is_empty(value) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value.strip() == ""
    if isinstance(value, list):
        return len(value) == 0
    return False


def _check_value(spec: FieldSpec, value) -> FieldError | None:
    kind = spec.value_kind
    limit = spec.effective_max_length()
    if kind in ("short_text", "long_text"):
        if not isinstance(value, str):
            return FieldError(spec.name, "invalid_value", f"{spec.name} must be text")
        if len(value) > limit:
            return FieldError(
                spec.name, "too_long", f"{spec.name} exceeds {limit} characters"
            )
    elif kind == "url":
        if not isinstance(value, str) or not is_valid_url(value):
            return FieldError(spec.name, "invalid_value", f"{spec.name} must be an http(s) URL")
        if len(value) > limit:
            return FieldError(spec.name, "too_long", f"{spec.name} exceeds {limit} characters")
    elif kind == "date":
        if not isinstance(value, str):
            return FieldError(spec.name, "invalid_value", f"{spec.name} must be an ISO date")
        try:
            date.fromisoformat(value)
        except ValueError:
            return FieldError(spec.name, "invalid_value", f"{spec.name} must be an ISO date")
    elif kind == "integer_rating":
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            return FieldError(
                spec.name, "invalid_value", f"{spec.name} must be an integer from 1 to 5"
            )
    elif kind == "image_ref":
        if not isinstance(value, str) or _is_empty(value):
            return FieldError(spec.name, "invalid_value", f"{spec.name} must be an image reference")
        if len(value) > limit:
            return FieldError(spec.name, "too_long", f"{spec.name} exceeds {limit} characters")
    elif kind == "image_list":
        if not isinstance(value, list) or any(
            not isinstance(item, str) or _is_empty(item) or len(item) > MAX_URL_LENGTH
            for item in value
        ):
            return FieldError(
                spec.name, "invalid_value", f"{spec.name} must be a list of image references"
            )
        if len(value) > limit:
            return FieldError(spec.name, "too_long", f"{spec.name} exceeds {limit} entries")
    return None


# -- registries ---------------------------------------------------------------

class TypeRegistry:
    """Semantic-type registry: the nine built-ins plus owner-registered customs."""

    def __init__(self, store: JournalStore):
        self._store = store
        for builtin in BUILTIN_TYPES:
            if store.get("type", builtin.type_id) is None:
                store.put_new("type", builtin.type_id, builtin.to_doc())

    def register(self, spec: SemanticType) -> str:
        if not spec.type_id or not spec.type_id.strip():
            raise InvalidSchema("type_id must be non-empty")
        if spec.kind not in ("builtin", "custom"):
            raise InvalidSchema(f"unknown type kind: {spec.kind!r}")
        if not spec.fields:
            raise EmptySchema(f"type {spec.type_id!r} declares no fields")
        names = [f.name for f in spec.fields]
        if len(set(names)) != len(names):
            raise InvalidSchema(f"type {spec.type_id!r} has duplicate field names")
        for f in spec.fields:
            if not f.name or not f.name.strip():
                raise InvalidSchema("field names must be non-empty")
            if f.value_kind not in VALUE_KINDS:
                raise InvalidSchema(f"unknown value kind: {f.value_kind!r}")
            if f.max_length is not None and f.max_length < 1:
                raise InvalidSchema("max_length must be >= 1")
        if self._store.get("type", spec.type_id) is not None:
            raise DuplicateTypeId(f"type {spec.type_id!r} is already registered")
        self._store.put_new("type", spec.type_id, spec.to_doc())
        return spec.type_id

    def get(self, type_id: str) -> SemanticType:
        rec = self._store.get("type", type_id)
        if rec is None:
            raise UnknownType(f"no such type: {type_id!r}")
        return SemanticType.from_doc(rec.body)

    def exists(self, type_id: str) -> bool:
        return self._store.get("type", type_id) is not None

    def list(self) -> list[SemanticType]:
        return [
            SemanticType.from_doc(r.body)
            for r in self._store.scan("type", sort_key=lambda r: r.id)
        ]

    def export_schema(self, type_id: str) -> dict:
        return self.get(type_id).to_doc()

    def import_schema(self, doc: dict) -> str:
        return self.register(SemanticType.from_doc(doc))

    def validate_payload(self, type_id: str, values: dict) -> ValidationReport:
        """Check a payload against its schema; the report lists every violation.

        Deterministic regardless of the payload dict's insertion order: schema
        fields are checked in declaration order, unknown keys alphabetically.
        """
        spec = self.get(type_id)
        if not isinstance(values, dict):
            return ValidationReport(
                ok=False, errors=[FieldError("", "invalid_value", "values must be an object")]
            )
        errors: list[FieldError] = []
        known = spec.field_map()
        for fspec in spec.fields:
            present = fspec.name in values
            value = values.get(fspec.name)
            if not present or _is_empty(value):
                if fspec.required:
                    errors.append(
                        FieldError(fspec.name, "missing_field", f"{fspec.name} is required")
                    )
                continue  # empty optional values are treated as absent
            err = _check_value(fspec, value)
            if err is not None:
                errors.append(err)
        for name in sorted(values):
            if name not in known:
                errors.append(
                    FieldError(name, "unknown_field", f"{name} is not a field of {type_id}")
                )
        return ValidationReport(ok=not errors, errors=errors)


class SiteDirectory:
    """Sites and their section trees.

    Section ids are per-site slugs; the store key is ``site_id/section_id``.
    Parent links form a forest under an implicit per-site root: parentless
    sections are top-level siblings.
    """

    def __init__(self, store: JournalStore, types: TypeRegistry, clock):
        self._store = store
        self._types = types
        self._clock = clock

    @staticmethod
    def section_key(site_id: str, section_id: str) -> str:
        return f"{site_id}/{section_id}"

    def create_site(
        self,
        site_id: str,
        name: str,
        owner_key: str,
        owner_email: str,
        remoderate_on_edit: bool = True,
    ) -> Site:
        if not site_id or "/" in site_id:
            raise InvalidSchema("site_id must be non-empty and must not contain '/'")
        if self._store.get("site", site_id) is not None:
            raise DuplicateSite(f"site {site_id!r} already exists")
        site = Site(
            site_id=site_id,
            name=name,
            owner_key=owner_key,
            owner_email=owner_email,
            remoderate_on_edit=remoderate_on_edit,
            created_at=to_rfc3339(self._clock.now()),
        )
        self._store.put_new("site", site_id, site.to_doc())
        return site

    def get_site(self, site_id: str) -> Site:
        rec = self._store.get("site", site_id)
        if rec is None:
            raise UnknownSite(f"no such site: {site_id!r}")
        return Site.from_doc(rec.body)

    def site_exists(self, site_id: str) -> bool:
        return self._store.get("site", site_id) is not None

    def list_sites(self) -> list[Site]:
        return [Site.from_doc(r.body) for r in self._store.scan("site", sort_key=lambda r: r.id)]

    def create_section(
        self,
        site_id: str,
        section_id: str,
        name: str,
        allowed_types: list[str],
        policy: SubmissionPolicy | str = SubmissionPolicy.ANYONE,
        parent_id: str | None = None,
        description: str = "",
        open_input_enabled: bool = True,
    ) -> Section:
        self.get_site(site_id)
        if not section_id or "/" in section_id:
            raise InvalidSchema("section_id must be non-empty and must not contain '/'")
        if parent_id == section_id:
            raise CycleWouldForm(f"section {section_id!r} cannot be its own parent")
        if parent_id is not None and self._store.get(
            "section", self.section_key(site_id, parent_id)
        ) is None:
            raise UnknownParent(f"no such parent section: {parent_id!r}")
        if self._store.get("section", self.section_key(site_id, section_id)) is not None:
            raise DuplicateSection(f"section {section_id!r} already exists in {site_id!r}")
        policy = SubmissionPolicy(policy)
        allowed = tuple(dict.fromkeys(allowed_types))
        if open_input_enabled and not allowed:
            raise InvalidSchema("an open section needs at least one allowed type")
        for type_id in allowed:
            if not self._types.exists(type_id):
                raise UnknownType(f"no such type: {type_id!r}")
        section = Section(
            section_id=section_id,
            site_id=site_id,
            parent_id=parent_id,
            name=name,
            description=description,
            allowed_types=allowed,
            policy=policy,
            open_input_enabled=open_input_enabled,
        )
        self._store.put_new("section", self.section_key(site_id, section_id), section.to_doc())
        return section

    def get_section(self, site_id: str, section_id: str) -> Section:
        rec = self._store.get("section", self.section_key(site_id, section_id))
        if rec is None:
            raise UnknownSection(f"no such section: {site_id}/{section_id}")
        return Section.from_doc(rec.body)

    def list_sections(self, site_id: str) -> list[Section]:
        self.get_site(site_id)
        return [
            Section.from_doc(r.body)
            for r in self._store.scan(
                "section",
                predicate=lambda r: r.body["site_id"] == site_id,
                sort_key=lambda r: r.id,
            )
        ]

    def section_tree(self, site_id: str) -> list[SectionNode]:
        """Every section exactly once, parents before children, siblings by id."""
        sections = self.list_sections(site_id)
        children: dict[str | None, list[Section]] = {}
        for section in sections:
            children.setdefault(section.parent_id, []).append(section)

        def build(parent: str | None) -> list[SectionNode]:
            return [
                SectionNode(section=s, children=build(s.section_id))
                for s in children.get(parent, [])
            ]

        return build(None)
