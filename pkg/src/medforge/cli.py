"""Command-line entry points: validate, compile, check-submission, serve.

Exit codes: 0 clean, 1 validation findings (bad profile, rejected or
out-of-range submission), 2 usage or I/O errors. Every pipeline stage is
runnable offline so CI never needs the HTTP service.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .auth import Credentials, make_credential_line
from .compiler import compile_profile, lower_to_widget_tree, widget_tree_to_json
from .gateway import create_app, finding_to_json, rejection_to_json
from .profile_xml import ProfileValidationError, XmlError, parse_profile
from .store import Store, WebhookSender
from .template_engine import TemplateSet, load_default_templates, load_template_dir
from .uiml import serialize_ui
from .validation import MalformedSubmission, submission_from_json, validate_submission

EXIT_FINDINGS = 1
EXIT_USAGE = 2


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _load_profile(path: str):
    text = _read_text(path)
    try:
        return parse_profile(text)
    except XmlError as exc:
        click.echo(f"{path}: malformed XML: {exc}", err=True)
        sys.exit(EXIT_FINDINGS)
    except ProfileValidationError as exc:
        for diagnostic in exc.diagnostics:
            click.echo(f"{path}: {diagnostic}", err=True)
        sys.exit(EXIT_FINDINGS)


def _load_templates(directory: str | None) -> TemplateSet:
    if directory is None:
        return load_default_templates()
    try:
        return load_template_dir(directory)
    except (OSError, ValueError) as exc:
        click.echo(f"error: cannot load templates from {directory}: {exc}", err=True)
        sys.exit(EXIT_USAGE)


@click.group()
def main() -> None:
    """Profile-driven medical data-entry tooling."""


@main.command()
@click.argument("profile_xml")
def validate(profile_xml: str) -> None:
    """Parse and validate a profile document."""
    profile = _load_profile(profile_xml)
    click.echo(f"{profile_xml}: OK ({len(profile.medcomps)} medcomp(s), "
               f"{len(profile.value_index())} value(s))")


@main.command()
@click.argument("profile_xml")
@click.option("--templates", "templates_dir", envvar="MEDFORGE_TEMPLATES",
              help="Template directory (defaults to the built-in set).")
@click.option("-o", "--output", help="Write to a file instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["uiml", "widget-json"]),
              default="uiml", show_default=True)
def compile(profile_xml: str, templates_dir: str | None, output: str | None,
            fmt: str) -> None:
    """Compile a profile into a UI document."""
    profile = _load_profile(profile_xml)
    templates = _load_templates(templates_dir)
    doc = compile_profile(profile, templates)
    if fmt == "uiml":
        payload = serialize_ui(doc)
    else:
        tree = lower_to_widget_tree(doc, profile)
        payload = json.dumps(widget_tree_to_json(tree), indent=2, sort_keys=True) + "\n"
    if output is None:
        click.echo(payload, nl=False)
    else:
        try:
            Path(output).write_text(payload, encoding="utf-8")
        except OSError as exc:
            click.echo(f"error: cannot write {output}: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        click.echo(f"wrote {output}")


@main.command("check-submission")
@click.argument("profile_xml")
@click.argument("submission_json")
def check_submission(profile_xml: str, submission_json: str) -> None:
    """Run one submission through the validation pipeline."""
    profile = _load_profile(profile_xml)
    text = _read_text(submission_json)
    try:
        sub = submission_from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        click.echo(f"{submission_json}: not JSON: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except MalformedSubmission as exc:
        click.echo(f"{submission_json}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    outcome = validate_submission(profile, sub)
    click.echo(json.dumps({
        "status": outcome.status,
        "rejections": [rejection_to_json(r) for r in outcome.rejections],
        "findings": [finding_to_json(f) for f in outcome.findings],
    }, indent=2, sort_keys=True))
    if outcome.status != "accepted" or outcome.findings:
        sys.exit(EXIT_FINDINGS)


@main.command()
@click.option("--data", "data_dir", envvar="MEDFORGE_DATA", required=True,
              help="Data directory (records, alerts, profiles).")
@click.option("--templates", "templates_dir", envvar="MEDFORGE_TEMPLATES",
              help="Template directory (defaults to the built-in set).")
@click.option("--port", envvar="MEDFORGE_PORT", type=int, default=8000,
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--webhook", "webhook_url", help="POST each alert to this URL.")
@click.option("--credentials", "credentials_path",
              help="Credential file [default: <data>/credentials.txt].")
def serve(data_dir: str, templates_dir: str | None, port: int, host: str,
          webhook_url: str | None, credentials_path: str | None) -> None:
    """Run the HTTP gateway."""
    import uvicorn

    templates = _load_templates(templates_dir)
    webhook = WebhookSender(webhook_url) if webhook_url else None
    store = Store(data_dir, webhook=webhook)
    creds_file = credentials_path or str(Path(data_dir) / "credentials.txt")
    credentials = Credentials.load(creds_file)
    app = create_app(store, templates, credentials)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        store.close()


@main.command("add-user")
@click.argument("credentials_file")
@click.argument("principal")
@click.argument("role", type=click.Choice(["patient", "doctor"]))
@click.option("--password", prompt=True, hide_input=True, confirmation_prompt=False)
def add_user(credentials_file: str, principal: str, role: str, password: str) -> None:
    """Append a credential line for a patient, doctor, or device."""
    line = make_credential_line(principal, role, password)
    path = Path(credentials_file)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    except OSError as exc:
        click.echo(f"error: cannot write {credentials_file}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    click.echo(f"added {role} {principal!r} to {credentials_file}")


if __name__ == "__main__":
    main()
