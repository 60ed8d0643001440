"""HTTP gateway: login, profile fetch/update, compiled UI, submissions, alerts.

The service is stateless above the store: sessions, the per-version UI
cache, and the idempotency cache live in process memory and vanish on
restart without losing accepted data. Endpoints, payloads, and the
authorization matrix are documented in docs/api.md.
"""

from __future__ import annotations

import json
import threading
import time


from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .auth import Credentials, Session, SessionManager
from .compiler import compile_profile, lower_to_widget_tree, widget_tree_to_json
from .model import PatientProfile
from .profile_xml import ProfileValidationError, XmlError, parse_profile
from .store import NotFound, Store, VersionConflict, alert_to_json, record_to_json
from .template_engine import TemplateSet
from .typed_values import payload_to_json
from .uiml import serialize_ui
from .validation import (
    BoundFinding,
    MalformedSubmission,
    Rejection,
    submission_from_json,
    validate_submission,
)

UI_FORMATS = ("uiml", "widget-json")


class ApiError(Exception):
    def __init__(self, status_code: int, payload: dict):
        self.status_code = status_code
        self.payload = payload


def rejection_to_json(rejection: Rejection) -> dict:
    return {"subject": rejection.subject, "code": rejection.code,
            "message": rejection.message}


def finding_to_json(finding: BoundFinding) -> dict:
    return {
        "value_id": finding.value_id,
        "kind": finding.kind,
        "limit": payload_to_json(finding.limit),
        "observed": payload_to_json(finding.observed),
        "excess": finding.excess,
    }


def diagnostics_to_json(diagnostics) -> list[dict]:
    return [
        {"severity": d.severity, "code": d.code, "location": d.location,
         "message": d.message}
        for d in diagnostics
    ]


def create_app(
    store: Store,
    templates: TemplateSet,
    credentials: Credentials,
    session_ttl: float = 3600.0,
    nonce_ttl: float = 600.0,
) -> FastAPI:
    app = FastAPI(title="medforge gateway", docs_url=None, redoc_url=None,
                  openapi_url=None)
    sessions = SessionManager(ttl_seconds=session_ttl)
    ui_cache: dict[tuple[str, int, str], bytes] = {}
    nonce_cache: dict[tuple[str, str], tuple[float, dict]] = {}
    cache_lock = threading.Lock()

    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code, content=exc.payload)

    def authenticate(request: Request) -> Session:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise ApiError(401, {"detail": "missing bearer token"})
        session = sessions.lookup(header[len("Bearer "):])
        if session is None:
            raise ApiError(401, {"detail": "invalid or expired token"})
        return session

    def require_patient_access(session: Session, patient_id: str) -> None:
        if session.role == "doctor":
            return
        if session.principal != patient_id:
            raise ApiError(403, {"detail": "patients may only access their own resources"})

    def require_doctor(session: Session) -> None:
        if session.role != "doctor":
            raise ApiError(403, {"detail": "doctor role required"})

    def current_profile(patient_id: str) -> PatientProfile:
        try:
            return store.get_profile(patient_id)
        except NotFound:
            raise ApiError(404, {"detail": f"no profile for patient {patient_id!r}"})

    def compiled_bytes(patient_id: str, profile: PatientProfile, fmt: str) -> bytes:
        key = (patient_id, profile.version, fmt)
        with cache_lock:
            cached = ui_cache.get(key)
        if cached is not None:
            return cached
        doc = compile_profile(profile, templates)
        if fmt == "uiml":
            payload = serialize_ui(doc).encode("utf-8")
        else:
            tree = lower_to_widget_tree(doc, profile)
            payload = json.dumps(widget_tree_to_json(tree), indent=2,
                                 sort_keys=True).encode("utf-8")
        with cache_lock:
            ui_cache[key] = payload
        return payload

    @app.post("/api/login")
    async def login(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            raise ApiError(400, {"detail": "request body must be JSON"})
        if not isinstance(body, dict) or not isinstance(body.get("principal"), str) \
                or not isinstance(body.get("password"), str):
            raise ApiError(400, {"detail": "expected {principal, password}"})
        role = credentials.verify(body["principal"], body["password"])
        if role is None:
            raise ApiError(401, {"detail": "invalid credentials"})
        session = sessions.create(body["principal"], role)
        return {"token": session.token, "role": session.role,
                "expires_at": session.expires_at}

    @app.get("/api/patients/{patient_id}/profile")
    async def get_profile(patient_id: str, request: Request):
        session = authenticate(request)
        require_patient_access(session, patient_id)
        profile = current_profile(patient_id)
        from .profile_xml import serialize_profile

        return Response(
            content=serialize_profile(profile),
            media_type="application/xml",
            headers={"X-Profile-Version": str(profile.version)},
        )

    @app.put("/api/patients/{patient_id}/profile")
    async def put_profile(patient_id: str, request: Request,
                          expected_version: int = 0):
        session = authenticate(request)
        require_doctor(session)
        body = await request.body()
        try:
            profile = parse_profile(body)
        except XmlError as exc:
            raise ApiError(422, {"diagnostics": [{
                "severity": "error", "code": "XML_SYNTAX",
                "location": f"line {exc.line} column {exc.column}",
                "message": str(exc)}]})
        except ProfileValidationError as exc:
            raise ApiError(422, {"diagnostics": diagnostics_to_json(exc.diagnostics)})
        if profile.patient_id != patient_id:
            raise ApiError(422, {"diagnostics": [{
                "severity": "error", "code": "PATIENT_MISMATCH", "location": "/profile",
                "message": f"profile is for {profile.patient_id!r}, "
                           f"not {patient_id!r}"}]})
        try:
            version = store.store_profile(patient_id, profile, expected_version)
        except VersionConflict as exc:
            raise ApiError(409, {"detail": str(exc), "current_version": exc.current})
        return {"version": version}

    @app.get("/api/patients/{patient_id}/ui")
    async def get_ui(patient_id: str, request: Request, format: str = "uiml"):
        session = authenticate(request)
        require_patient_access(session, patient_id)
        if format not in UI_FORMATS:
            raise ApiError(400, {"detail": f"format must be one of {', '.join(UI_FORMATS)}"})
        profile = current_profile(patient_id)
        payload = compiled_bytes(patient_id, profile, format)
        media = "application/xml" if format == "uiml" else "application/json"
        return Response(content=payload, media_type=media,
                        headers={"X-Profile-Version": str(profile.version)})

    @app.post("/api/patients/{patient_id}/submissions")
    async def post_submission(patient_id: str, request: Request):
        session = authenticate(request)
        require_patient_access(session, patient_id)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            raise ApiError(400, {"detail": "request body must be JSON"})
        try:
            sub = submission_from_json(body)
        except MalformedSubmission as exc:
            raise ApiError(400, {"detail": str(exc)})
        if sub.patient_id != patient_id:
            raise ApiError(400, {"detail": "patient_id in body does not match the URL"})

        nonce = body.get("submission_nonce")
        now = time.time()
        if nonce is not None:
            if not isinstance(nonce, str):
                raise ApiError(400, {"detail": "submission_nonce must be a string"})
            with cache_lock:
                hit = nonce_cache.get((patient_id, nonce))
                if hit is not None and hit[0] > now:
                    return JSONResponse(status_code=200, content=hit[1])

        profile = current_profile(patient_id)
        client_version = body.get("profile_version")
        if client_version is not None and client_version != profile.version:
            raise ApiError(409, {
                "detail": "profile version skew; refetch the UI and resubmit",
                "current_version": profile.version,
            })

        outcome = validate_submission(profile, sub)
        if outcome.status == "rejected":
            raise ApiError(422, {
                "status": "rejected",
                "rejections": [rejection_to_json(r) for r in outcome.rejections],
            })

        assert outcome.record is not None
        record_id = store.append_record(patient_id, outcome.record)
        record = store.get_record(patient_id, record_id)
        alerts = store.raise_alerts(record, list(outcome.findings))
        response = {
            "status": "accepted",
            "record_id": record_id,
            "alerts": [alert_to_json(a) for a in alerts],
        }
        if nonce is not None:
            with cache_lock:
                nonce_cache[(patient_id, nonce)] = (now + nonce_ttl, response)
                for key in [k for k, v in nonce_cache.items() if v[0] <= now]:
                    del nonce_cache[key]
        return response

    @app.get("/api/patients/{patient_id}/records")
    async def get_records(patient_id: str, request: Request,
                          since: str | None = None):
        session = authenticate(request)
        require_patient_access(session, patient_id)
        try:
            records = store.list_records(patient_id, since=since)
        except NotFound:
            raise ApiError(404, {"detail": f"unknown patient {patient_id!r}"})
        except ValueError:
            raise ApiError(400, {"detail": "since must be an RFC3339 timestamp"})
        return {"records": [record_to_json(r) for r in records]}

    @app.get("/api/alerts")
    async def get_alerts(request: Request, patient: str | None = None,
                         since: str | None = None,
                         unacknowledged_only: bool = False):
        session = authenticate(request)
        require_doctor(session)
        try:
            alerts = store.list_alerts(patient=patient, since=since,
                                       unacknowledged_only=unacknowledged_only)
        except ValueError:
            raise ApiError(400, {"detail": "since must be an RFC3339 timestamp"})
        return {"alerts": [alert_to_json(a) for a in alerts]}

    @app.post("/api/alerts/{alert_id}/ack")
    async def ack_alert(alert_id: int, request: Request):
        session = authenticate(request)
        require_doctor(session)
        try:
            alert = store.acknowledge_alert(alert_id)
        except NotFound:
            raise ApiError(404, {"detail": f"no alert {alert_id}"})
        return {"alert": alert_to_json(alert)}

    return app
