"""Request/response models for the HTTP surface.

Public responses never carry submitter identity or email; admin responses do.
Errors are rendered as {code, message, fields?} by the app's exception
handlers, not here.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

from ..engine import Element


class SubmitRequest(BaseModel):
    type_id: str
    values: dict[str, Any]
    email: str | None = None


class SubmitResponse(BaseModel):
    element_id: str
    status: str
    editor_link_url: str | None = None


class ElementPublic(BaseModel):
    element_id: str
    section_id: str
    type_id: str
    values: dict[str, Any]
    status: str
    created_at: str

    @classmethod
    def from_element(cls, element: Element) -> "ElementPublic":
        return cls(
            element_id=element.element_id,
            section_id=element.section_id,
            type_id=element.type_id,
            values=element.values,
            status=element.status,
            created_at=element.created_at,
        )


class ElementAdmin(ElementPublic):
    site_id: str
    submitter_class: str
    submitter_subject: str | None
    submitter_email: str | None
    decided_at: str | None
    version: int

    @classmethod
    def from_element(cls, element: Element) -> "ElementAdmin":
        return cls(
            element_id=element.element_id,
            section_id=element.section_id,
            type_id=element.type_id,
            values=element.values,
            status=element.status,
            created_at=element.created_at,
            site_id=element.site_id,
            submitter_class=element.submitter.class_,
            submitter_subject=element.submitter.subject,
            submitter_email=element.submitter_email,
            decided_at=element.decided_at,
            version=element.version,
        )


class PublicListResponse(BaseModel):
    items: list[ElementPublic]
    page: int
    page_size: int
    total: int


class QueueResponse(BaseModel):
    items: list[ElementAdmin]


class DecisionRequest(BaseModel):
    decision: Literal["accept", "decline"]


class IssueLinkRequest(BaseModel):
    email: str


class IssueLinkResponse(BaseModel):
    element_id: str
    email: str
    edit_url: str


class TypeCountDoc(BaseModel):
    submitted: int
    accepted: int


class StatsResponse(BaseModel):
    total_submitted: int
    accepted: int
    declined: int
    pending: int
    acceptance_rate: float
    per_type: dict[str, TypeCountDoc]


class FieldSpecDoc(BaseModel):
    name: str
    value_kind: str
    required: bool
    max_length: int


class TypeSchemaDoc(BaseModel):
    type_id: str
    kind: str
    label: str
    fields: list[FieldSpecDoc]


class SectionInfoResponse(BaseModel):
    section_id: str
    site_id: str
    parent_id: str | None
    name: str
    description: str
    policy: str
    open_input_enabled: bool
    allowed_types: list[TypeSchemaDoc]


class SectionCreateRequest(BaseModel):
    section_id: str
    name: str
    allowed_types: list[str]
    policy: str = "anyone"
    parent_id: str | None = None
    description: str = ""
    open_input_enabled: bool = True


class SectionNodeDoc(BaseModel):
    section_id: str
    parent_id: str | None
    name: str
    description: str
    policy: str
    open_input_enabled: bool
    allowed_types: list[str]
    children: list["SectionNodeDoc"] = Field(default_factory=list)


class EditViewResponse(BaseModel):
    element: ElementPublic
    actions: list[str]
    schema_: TypeSchemaDoc = Field(alias="schema")

    model_config = {"populate_by_name": True}


class EditRequest(BaseModel):
    values: dict[str, Any]


class DeleteResponse(BaseModel):
    deleted: bool = True
