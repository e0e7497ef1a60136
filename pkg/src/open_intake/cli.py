"""Operator CLI.

Commands map one-to-one onto engine operations. Mutating commands prefer
direct store access (exclusive lock on the data dir); when a server already
holds the lock they fall through to the HTTP API using the owner keys from
the config file. `init`, `serve`, `fixture`, `export`, and `import` always
need exclusive access.

Exit code 0 on success; errors print one `error[<code>]: <message>` line on
stderr and exit 1.
"""

from __future__ import annotations

import functools
import json
import secrets
import sys
from pathlib import Path

import click
import httpx

from . import fixtures
from .config import ServiceConfig, load_config
from .engine import owner_identity
from .errors import ConfigError, OpenIntakeError, StoreLocked
from .service import Services, build_services
from .store import JournalStore, export_json_bytes


class RemoteError(OpenIntakeError):
    """An error response relayed from the running server."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class HttpClient:
    """Thin admin client used when a server holds the data directory."""

    def __init__(self, config: ServiceConfig):
        host = config.bind_host
        if host in ("0.0.0.0", "::", ""):
            host = "127.0.0.1"
        self.base = f"http://{host}:{config.bind_port}"
        self.keys = dict(config.owner_keys)
        self._client = httpx.Client(base_url=self.base, timeout=10.0)

    def close(self) -> None:
        self._client.close()

    def _raise_for(self, response: httpx.Response):
        try:
            body = response.json()
        except ValueError:
            body = {}
        raise RemoteError(
            body.get("code", f"http_{response.status_code}"),
            body.get("message", response.text[:200]),
        )

    def _request(self, method: str, url: str, key: str | None = None, **kwargs):
        headers = {"X-Owner-Key": key} if key else {}
        response = self._client.request(method, url, headers=headers, **kwargs)
        if response.status_code >= 400:
            self._raise_for(response)
        return response.json() if response.content else None

    def _site_key(self, site_id: str) -> str:
        key = self.keys.get(site_id)
        if key is None:
            raise ConfigError(
                f"no owner key for site {site_id!r} in config; "
                "add it under [owner_keys] to administer a running server"
            )
        return key

    def _element_key(self, element_id: str) -> str:
        """Find which configured site key owns this element."""
        last_error: OpenIntakeError | None = None
        for site_id, key in self.keys.items():
            response = self._client.get(
                f"/admin/elements/{element_id}", headers={"X-Owner-Key": key}
            )
            if response.status_code == 200:
                return key
            if response.status_code == 404:
                last_error = RemoteError("unknown_element", f"no such element: {element_id!r}")
            else:
                last_error = RemoteError("not_authorized", "no configured key matches")
        raise last_error or ConfigError("no owner keys configured")

    def queue(self, site_id: str) -> list[dict]:
        return self._request("GET", f"/admin/sites/{site_id}/queue", self._site_key(site_id))["items"]

    def decide(self, element_id: str, decision: str) -> dict:
        key = self._element_key(element_id)
        return self._request(
            "POST", f"/admin/elements/{element_id}/decision", key, json={"decision": decision}
        )

    def issue_link(self, element_id: str, email: str) -> dict:
        key = self._element_key(element_id)
        return self._request(
            "POST", f"/admin/elements/{element_id}/editor-link", key, json={"email": email}
        )

    def stats(self, site_id: str) -> dict:
        return self._request("GET", f"/admin/sites/{site_id}/stats", self._site_key(site_id))

    def sections(self, site_id: str) -> list[dict]:
        return self._request("GET", f"/admin/sites/{site_id}/sections", self._site_key(site_id))

    def add_section(self, site_id: str, payload: dict) -> dict:
        return self._request(
            "POST", f"/admin/sites/{site_id}/sections", self._site_key(site_id), json=payload
        )

    def types(self) -> list[dict]:
        return self._request("GET", "/types")

    def register_type(self, doc: dict) -> dict:
        key = next(iter(self.keys.values()), None)
        if key is None:
            raise ConfigError("registering a type over HTTP needs an owner key in config")
        return self._request("POST", "/admin/types", key, json=doc)


def _open_handle(config: ServiceConfig, need_direct: bool = False):
    """Direct Services when the data dir is free, HttpClient otherwise."""
    try:
        return build_services(config)
    except StoreLocked:
        if need_direct:
            raise StoreLocked(
                "the data directory is locked (server running?); "
                "this command needs exclusive access"
            )
        return HttpClient(config)


def cli_command(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OpenIntakeError as exc:
            click.echo(f"error[{exc.code}]: {exc.message}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option(
    "--config", "config_path", type=click.Path(), default=None,
    help="Path to the TOML config (default ./open-intake.toml if present).",
)
@click.option("--data-dir", default=None, help="Override the data directory.")
@click.option("--bind", default=None, help="Override host:port for serve.")
@click.pass_context
def main(ctx, config_path, data_dir, bind):
    """open-intake: typed public submissions with a moderation queue."""
    try:
        config = load_config(config_path)
    except OpenIntakeError as exc:
        click.echo(f"error[{exc.code}]: {exc.message}", err=True)
        sys.exit(1)
    if data_dir:
        config.data_dir = data_dir
    if bind:
        config.bind = bind
    ctx.obj = config


@main.command()
@click.option("--site", "site_id", required=True)
@click.option("--name", default=None)
@click.option("--owner-email", required=True)
@click.option("--owner-key", default=None, help="Generated when omitted.")
@click.option("--remoderate/--no-remoderate", "remoderate", default=None,
              help="Re-queue accepted content after link edits (default from config).")
@click.pass_obj
@cli_command
def init(config, site_id, name, owner_email, owner_key, remoderate):
    """Create the data directory and register a site."""
    key = owner_key or secrets.token_urlsafe(24)
    with _services_only(config, need_direct=True) as services:
        site = services.sites.create_site(
            site_id,
            name or site_id,
            key,
            owner_email,
            remoderate_on_edit=(
                config.remoderate_on_edit if remoderate is None else remoderate
            ),
        )
    click.echo(f"site {site.site_id} initialized (owner key: {key})")


@main.command()
@click.pass_obj
@cli_command
def serve(config):
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    services = build_services(config)
    app = create_app(services, own_services=True)
    click.echo(f"serving on http://{config.bind_host}:{config.bind_port}")
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="warning")


def _services_only(config, need_direct=True) -> Services:
    handle = _open_handle(config, need_direct=need_direct)
    assert isinstance(handle, Services)
    return handle


# -- sections -------------------------------------------------------------------


@main.group()
def section():
    """Manage a site's sections."""


@section.command("add")
@click.argument("site_id")
@click.argument("section_id")
@click.option("--name", default=None)
@click.option("--types", "types_csv", required=True, help="Comma-separated allowed type ids.")
@click.option("--policy", default="anyone",
              type=click.Choice(["anyone", "external_authenticated", "registered_users", "owner_only"]))
@click.option("--parent", default=None)
@click.option("--description", default="")
@click.option("--closed", is_flag=True, help="Create with open input disabled.")
@click.pass_obj
@cli_command
def section_add(config, site_id, section_id, name, types_csv, policy, parent, description, closed):
    allowed = [t.strip() for t in types_csv.split(",") if t.strip()]
    payload = {
        "section_id": section_id,
        "name": name or section_id,
        "allowed_types": allowed,
        "policy": policy,
        "parent_id": parent,
        "description": description,
        "open_input_enabled": not closed,
    }
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            section = handle.sites.create_section(
                site_id, section_id, payload["name"], allowed,
                policy=policy, parent_id=parent, description=description,
                open_input_enabled=not closed,
            )
            click.echo(f"section {site_id}/{section.section_id} created")
        else:
            handle.add_section(site_id, payload)
            click.echo(f"section {site_id}/{section_id} created")
    finally:
        handle.close()


@section.command("list")
@click.argument("site_id")
@click.pass_obj
@cli_command
def section_list(config, site_id):
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            def walk(nodes, depth):
                for node in nodes:
                    s = node.section
                    click.echo(
                        f"{'  ' * depth}{s.section_id}  [{s.policy.value}] "
                        f"types={','.join(s.allowed_types)}"
                        f"{'' if s.open_input_enabled else ' (closed)'}"
                    )
                    walk(node.children, depth + 1)

            walk(handle.sites.section_tree(site_id), 0)
        else:
            def walk(nodes, depth):
                for node in nodes:
                    click.echo(
                        f"{'  ' * depth}{node['section_id']}  [{node['policy']}] "
                        f"types={','.join(node['allowed_types'])}"
                        f"{'' if node['open_input_enabled'] else ' (closed)'}"
                    )
                    walk(node["children"], depth + 1)

            walk(handle.sections(site_id), 0)
    finally:
        handle.close()


# -- types -----------------------------------------------------------------------


@main.group("type")
def type_group():
    """Inspect and register semantic types."""


@type_group.command("list")
@click.pass_obj
@cli_command
def type_list(config):
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            rows = [t.to_doc() for t in handle.types.list()]
        else:
            rows = handle.types()
        for t in rows:
            names = ", ".join(f["name"] + ("*" if f["required"] else "") for f in t["fields"])
            click.echo(f"{t['type_id']:<16} {t['kind']:<8} {t['label']:<24} [{names}]")
    finally:
        handle.close()


@type_group.command("register")
@click.argument("schema_file", type=click.Path(exists=True, allow_dash=True))
@click.pass_obj
@cli_command
def type_register(config, schema_file):
    """Register a custom type from a JSON schema document."""
    raw = sys.stdin.read() if schema_file == "-" else Path(schema_file).read_text("utf-8")
    doc = json.loads(raw)
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            type_id = handle.types.import_schema(doc)
        else:
            type_id = handle.register_type(doc)["type_id"]
        click.echo(f"type {type_id} registered")
    finally:
        handle.close()


# -- moderation ------------------------------------------------------------------


@main.group()
def queue():
    """Work the confirmation queue."""


@queue.command("list")
@click.argument("site_id")
@click.pass_obj
@cli_command
def queue_list(config, site_id):
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            items = [
                {
                    "element_id": e.element_id,
                    "type_id": e.type_id,
                    "section_id": e.section_id,
                    "created_at": e.created_at,
                }
                for e in handle.engine.pending_queue(site_id, owner_identity(site_id))
            ]
        else:
            items = handle.queue(site_id)
        for e in items:
            click.echo(
                f"{e['element_id']}  {e['type_id']:<14} {e['section_id']:<16} {e['created_at']}"
            )
        if not items:
            click.echo("nothing pending")
    finally:
        handle.close()


def _decide(config, element_id, decision):
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            current = handle.engine.get_element(element_id)
            element = handle.engine.decide(
                element_id, decision, owner_identity(current.site_id)
            )
            click.echo(f"{element.element_id} {element.status}")
        else:
            body = handle.decide(element_id, decision)
            click.echo(f"{body['element_id']} {body['status']}")
    finally:
        handle.close()


@queue.command("accept")
@click.argument("element_id")
@click.pass_obj
@cli_command
def queue_accept(config, element_id):
    """Publish a pending element."""
    _decide(config, element_id, "accept")


@queue.command("decline")
@click.argument("element_id")
@click.pass_obj
@cli_command
def queue_decline(config, element_id):
    """Reject a pending element."""
    _decide(config, element_id, "decline")


# -- links ------------------------------------------------------------------------


@main.group()
def link():
    """Editor links."""


@link.command("issue")
@click.argument("element_id")
@click.argument("email")
@click.pass_obj
@cli_command
def link_issue(config, element_id, email):
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            current = handle.engine.get_element(element_id)
            issued = handle.engine.issue_link(
                element_id, email, owner_identity(current.site_id)
            )
            click.echo(issued.edit_url(config.base_url))
        else:
            click.echo(handle.issue_link(element_id, email)["edit_url"])
    finally:
        handle.close()


# -- stats -------------------------------------------------------------------------


@main.command()
@click.option("--site", "site_id", default=None, help="Restrict to one site.")
@click.pass_obj
@cli_command
def stats(config, site_id):
    """Print queue statistics (global without --site)."""
    handle = _open_handle(config)
    try:
        if isinstance(handle, Services):
            doc = handle.engine.stats(site_id).to_doc()
        else:
            if site_id is None:
                raise ConfigError("global stats need direct store access; pass --site")
            doc = handle.stats(site_id)
        click.echo(f"total_submitted  {doc['total_submitted']}")
        click.echo(f"accepted         {doc['accepted']}")
        click.echo(f"declined         {doc['declined']}")
        click.echo(f"pending          {doc['pending']}")
        click.echo(f"acceptance_rate  {doc['acceptance_rate']:.4f}")
        for type_id, counts in doc["per_type"].items():
            click.echo(
                f"  {type_id:<16} submitted={counts['submitted']:<6} accepted={counts['accepted']}"
            )
    finally:
        handle.close()


# -- fixtures ------------------------------------------------------------------------


@main.group()
def fixture():
    """Build and replay operation scripts."""


@fixture.command("build")
@click.option("--profile", default="deployment",
              type=click.Choice(["deployment", "equivalence"]))
@click.option("--seed", default=None, type=int)
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
@cli_command
def fixture_build(config, profile, seed, output):
    if profile == "deployment":
        ops = fixtures.build_deployment_fixture(**({"seed": seed} if seed is not None else {}))
    else:
        kwargs = {"salt": config.rate_limit.salt}
        if seed is not None:
            kwargs["seed"] = seed
        ops = fixtures.build_equivalence_script(**kwargs)
    count = fixtures.write_fixture(output, ops)
    click.echo(f"wrote {count} ops to {output}")


@fixture.command("replay")
@click.argument("fixture_file", type=click.Path(exists=True))
@click.option("--ack", is_flag=True, help="Print one ack line per committed op.")
@click.pass_obj
@cli_command
def fixture_replay(config, fixture_file, ack):
    with _services_only(config, need_direct=True) as services:
        on_commit = (lambda label: print(f"ack {label}", flush=True)) if ack else None
        summary = fixtures.replay(services, fixtures.read_fixture(fixture_file), on_commit)
    click.echo(
        f"replayed {summary.ops} ops: {summary.submitted} submitted, "
        f"{summary.accepted} accepted, {summary.declined} declined "
        f"in {summary.elapsed_seconds:.1f}s"
    )


# -- export / import -----------------------------------------------------------------


@main.command()
@click.argument("output", type=click.Path(allow_dash=True))
@click.pass_obj
@cli_command
def export(config, output):
    """Dump the full store as canonical JSON."""
    with JournalStore(config.data_dir) as store:  # bare store: no type seeding
        raw = export_json_bytes(store)
    if output == "-":
        sys.stdout.buffer.write(raw)
    else:
        Path(output).write_bytes(raw)
        click.echo(f"exported {len(raw)} bytes to {output}")


@main.command("import")
@click.argument("dump_file", type=click.Path(exists=True))
@click.pass_obj
@cli_command
def import_(config, dump_file):
    """Load a dump into an empty store."""
    doc = json.loads(Path(dump_file).read_text("utf-8"))
    with JournalStore(config.data_dir) as store:
        try:
            count = store.import_dump(doc)
        except ValueError as exc:
            raise ConfigError(str(exc))
    click.echo(f"imported {count} records")


if __name__ == "__main__":
    main()
