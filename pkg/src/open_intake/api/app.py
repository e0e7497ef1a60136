"""The wire protocol.

Public surface: schema discovery, submission, and accepted-only listings.
Admin surface (X-Owner-Key header): the pending queue, one-click decisions,
late editor-link issuance, stats, section management. Editor surface: the
capability token in the path is the whole credential.

CORS is split: public endpoints answer any origin (the submission widget
embeds on third-party pages); /admin answers only configured origins.
"""

from __future__ import annotations

import secrets
from contextlib import asynccontextmanager

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from ..engine import SubmitterIdentity, owner_identity
from ..errors import (
    NotAuthorized,
    OpenIntakeError,
    RateLimited,
    UnknownElement,
    ValidationFailed,
)
from ..model import SectionNode
from ..ratelimit import client_key
from ..service import Services
from . import schemas

_STATUS_BY_CODE = {
    "unknown_site": 404,
    "unknown_section": 404,
    "unknown_element": 404,
    "unknown_type": 404,
    "unknown_parent": 404,
    "unknown_token": 404,
    "element_gone": 404,
    "not_found": 404,
    "validation_failed": 422,
    "invalid_email": 422,
    "policy_denied": 403,
    "type_not_allowed": 403,
    "input_disabled": 403,
    "not_authorized": 401,
    "revoked": 410,
    "rate_limited": 429,
    "conflict": 409,
    "version_conflict": 409,
    "already_exists": 409,
    "duplicate_type_id": 409,
    "duplicate_site": 409,
    "duplicate_section": 409,
    "empty_schema": 400,
    "invalid_schema": 400,
    "cycle_would_form": 400,
    "invalid_recipient": 422,
}


class _SplitCors:
    """Permissive CORS for public paths, allow-listed origins for /admin."""

    def __init__(self, app, admin_origins: list[str]):
        self.app = app
        self.admin_origins = set(admin_origins)

    def _allowed_origin(self, path: str, origin: str | None) -> str | None:
        if origin is None:
            return None
        if path.startswith("/admin"):
            return origin if origin in self.admin_origins else None
        return "*"

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return
        headers = {k.decode("latin-1").lower(): v.decode("latin-1") for k, v in scope["headers"]}
        origin = headers.get("origin")
        allowed = self._allowed_origin(scope["path"], origin)

        if scope["method"] == "OPTIONS" and "access-control-request-method" in headers:
            response_headers = []
            if allowed is not None:
                response_headers = [
                    (b"access-control-allow-origin", allowed.encode()),
                    (b"access-control-allow-methods", b"GET, POST, PUT, DELETE, OPTIONS"),
                    (b"access-control-allow-headers", b"Content-Type, X-Owner-Key"),
                    (b"access-control-max-age", b"600"),
                ]
            await send(
                {"type": "http.response.start", "status": 204 if allowed else 403,
                 "headers": response_headers}
            )
            await send({"type": "http.response.body", "body": b""})
            return

        async def send_with_cors(message):
            if message["type"] == "http.response.start" and allowed is not None:
                message.setdefault("headers", []).append(
                    (b"access-control-allow-origin", allowed.encode())
                )
            await send(message)

        await self.app(scope, receive, send_with_cors)


def create_app(services: Services, own_services: bool = False) -> FastAPI:
    config = services.config

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if own_services:
            services.close()

    app = FastAPI(title="open-intake", version="0.1.0", lifespan=lifespan)
    engine = services.engine

    @app.exception_handler(OpenIntakeError)
    async def handle_domain_error(request: Request, exc: OpenIntakeError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        body = {"code": exc.code, "message": exc.message}
        if isinstance(exc, ValidationFailed):
            body["fields"] = [e.to_doc() for e in exc.report.errors]
        headers = {}
        if isinstance(exc, RateLimited):
            headers["Retry-After"] = str(max(1, int(exc.retry_after + 0.999)))
        return JSONResponse(status_code=status, content=body, headers=headers)

    # -- auth helpers ---------------------------------------------------------

    def _presented_key(request: Request) -> str:
        key = request.headers.get("X-Owner-Key")
        if not key:
            raise NotAuthorized("missing X-Owner-Key header")
        return key

    def _check_site_key(site_id: str, key: str) -> SubmitterIdentity:
        services.sites.get_site(site_id)  # 404 before key comparison
        expected = services.owner_key_for(site_id)
        if expected is None or not secrets.compare_digest(expected, key):
            raise NotAuthorized(f"wrong owner key for site {site_id!r}")
        return owner_identity(site_id)

    def site_owner(site_id: str, request: Request) -> SubmitterIdentity:
        return _check_site_key(site_id, _presented_key(request))

    def element_owner(element_id: str, request: Request) -> SubmitterIdentity:
        key = _presented_key(request)
        element = engine.get_element(element_id)  # 404 for unknown ids
        return _check_site_key(element.site_id, key)

    def any_owner(request: Request) -> SubmitterIdentity:
        """Operator-level check: the key must belong to some site."""
        key = _presented_key(request)
        for site in services.sites.list_sites():
            expected = services.owner_key_for(site.site_id)
            if expected is not None and secrets.compare_digest(expected, key):
                return owner_identity(site.site_id)
        raise NotAuthorized("key does not match any site")

    def _type_doc(type_id: str) -> schemas.TypeSchemaDoc:
        return schemas.TypeSchemaDoc(**services.types.export_schema(type_id))

    # -- public: discovery -------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/types", response_model=list[schemas.TypeSchemaDoc])
    def list_types():
        return [schemas.TypeSchemaDoc(**t.to_doc()) for t in services.types.list()]

    @app.get("/types/{type_id}", response_model=schemas.TypeSchemaDoc)
    def get_type(type_id: str):
        return _type_doc(type_id)

    @app.get(
        "/sites/{site_id}/sections/{section_id}",
        response_model=schemas.SectionInfoResponse,
    )
    def section_info(site_id: str, section_id: str):
        section = services.sites.get_section(site_id, section_id)
        return schemas.SectionInfoResponse(
            section_id=section.section_id,
            site_id=section.site_id,
            parent_id=section.parent_id,
            name=section.name,
            description=section.description,
            policy=section.policy.value,
            open_input_enabled=section.open_input_enabled,
            allowed_types=[_type_doc(t) for t in section.allowed_types],
        )

    # -- public: submit and list ---------------------------------------------------

    @app.post(
        "/sites/{site_id}/sections/{section_id}/elements",
        response_model=schemas.SubmitResponse,
        status_code=201,
    )
    def submit_element(
        site_id: str, section_id: str, body: schemas.SubmitRequest, request: Request
    ):
        key = request.headers.get("X-Owner-Key")
        if key:
            identity = _check_site_key(site_id, key)
        else:
            address = request.client.host if request.client else "unknown"
            subject = client_key(address, config.rate_limit.salt)
            identity = SubmitterIdentity("anonymous", subject)
            if config.rate_limit.enabled and not services.limiter.allow(subject):
                raise RateLimited(retry_after=services.limiter.retry_after(subject))
        element, link = engine.submit(
            site_id, section_id, body.type_id, body.values, identity, email=body.email
        )
        return schemas.SubmitResponse(
            element_id=element.element_id,
            status=element.status,
            editor_link_url=link.edit_url(config.base_url) if link else None,
        )

    @app.get(
        "/sites/{site_id}/sections/{section_id}/elements",
        response_model=schemas.PublicListResponse,
    )
    def list_elements(
        site_id: str,
        section_id: str,
        page: int = Query(1, ge=1),
        page_size: int = Query(20, ge=1, le=100),
        sort: str = Query("newest_first", pattern="^(newest_first|oldest_first)$"),
    ):
        result = engine.list_public(site_id, section_id, page=page, page_size=page_size, sort=sort)
        return schemas.PublicListResponse(
            items=[schemas.ElementPublic.from_element(e) for e in result.items],
            page=result.page,
            page_size=result.page_size,
            total=result.total,
        )

    # -- admin ----------------------------------------------------------------------

    @app.get("/admin/sites/{site_id}/queue", response_model=schemas.QueueResponse)
    def pending_queue(site_id: str, request: Request):
        actor = site_owner(site_id, request)
        items = engine.pending_queue(site_id, actor)
        return schemas.QueueResponse(
            items=[schemas.ElementAdmin.from_element(e) for e in items]
        )

    @app.get("/admin/sites/{site_id}/stats", response_model=schemas.StatsResponse)
    def site_stats(site_id: str, request: Request):
        site_owner(site_id, request)
        return schemas.StatsResponse(**engine.stats(site_id).to_doc())

    @app.get("/admin/elements/{element_id}", response_model=schemas.ElementAdmin)
    def get_element(element_id: str, request: Request):
        element_owner(element_id, request)
        return schemas.ElementAdmin.from_element(engine.get_element(element_id))

    @app.post("/admin/elements/{element_id}/decision", response_model=schemas.ElementAdmin)
    def decide(element_id: str, body: schemas.DecisionRequest, request: Request):
        actor = element_owner(element_id, request)
        element = engine.decide(element_id, body.decision, actor)
        return schemas.ElementAdmin.from_element(element)

    @app.post(
        "/admin/elements/{element_id}/editor-link",
        response_model=schemas.IssueLinkResponse,
        status_code=201,
    )
    def issue_link(element_id: str, body: schemas.IssueLinkRequest, request: Request):
        actor = element_owner(element_id, request)
        link = engine.issue_link(element_id, body.email, actor)
        return schemas.IssueLinkResponse(
            element_id=element_id, email=link.email, edit_url=link.edit_url(config.base_url)
        )

    @app.delete("/admin/elements/{element_id}", response_model=schemas.DeleteResponse)
    def delete_element(element_id: str, request: Request):
        actor = element_owner(element_id, request)
        engine.delete_element(element_id, actor)
        return schemas.DeleteResponse()

    @app.post("/admin/elements/{element_id}/revoke-links")
    def revoke_links(element_id: str, request: Request):
        actor = element_owner(element_id, request)
        count = engine.revoke_link(actor, element_id=element_id)
        return {"revoked": count}

    def _section_node_doc(node: SectionNode) -> schemas.SectionNodeDoc:
        s = node.section
        return schemas.SectionNodeDoc(
            section_id=s.section_id,
            parent_id=s.parent_id,
            name=s.name,
            description=s.description,
            policy=s.policy.value,
            open_input_enabled=s.open_input_enabled,
            allowed_types=list(s.allowed_types),
            children=[_section_node_doc(c) for c in node.children],
        )

    @app.get(
        "/admin/sites/{site_id}/sections",
        response_model=list[schemas.SectionNodeDoc],
    )
    def list_sections(site_id: str, request: Request):
        site_owner(site_id, request)
        return [_section_node_doc(n) for n in services.sites.section_tree(site_id)]

    @app.post(
        "/admin/sites/{site_id}/sections",
        response_model=schemas.SectionInfoResponse,
        status_code=201,
    )
    def create_section(site_id: str, body: schemas.SectionCreateRequest, request: Request):
        site_owner(site_id, request)
        section = services.sites.create_section(
            site_id,
            body.section_id,
            body.name,
            body.allowed_types,
            policy=body.policy,
            parent_id=body.parent_id,
            description=body.description,
            open_input_enabled=body.open_input_enabled,
        )
        return section_info(site_id, section.section_id)

    @app.post("/admin/types", response_model=schemas.TypeSchemaDoc, status_code=201)
    def register_type(body: schemas.TypeSchemaDoc, request: Request):
        any_owner(request)
        type_id = services.types.import_schema(body.model_dump())
        return _type_doc(type_id)

    # -- editor links ------------------------------------------------------------------

    @app.get("/edit/{token}", response_model=schemas.EditViewResponse)
    def edit_view(token: str):
        capability = engine.redeem(token)
        return schemas.EditViewResponse(
            element=schemas.ElementPublic.from_element(capability.element),
            actions=list(capability.actions),
            schema=_type_doc(capability.element.type_id),
        )

    @app.put("/edit/{token}", response_model=schemas.ElementPublic)
    def edit_element(token: str, body: schemas.EditRequest):
        element = engine.edit_via_link(token, None, body.values)
        return schemas.ElementPublic.from_element(element)

    @app.delete("/edit/{token}", response_model=schemas.DeleteResponse)
    def delete_via_link(token: str):
        engine.delete_via_link(token)
        return schemas.DeleteResponse()

    app.add_middleware(_SplitCors, admin_origins=config.admin_origins)
    return app
