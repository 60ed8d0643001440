"""Append-only persistence for records, alerts, and versioned profiles.

Layout under the data root, one directory per patient:

    <patient>/records.jsonl      one SubmissionRecord object per line
    <patient>/alerts.jsonl       one Alert object per line; ack events
                                 are separate {"event": "ack", ...} lines
    <patient>/profile.v<N>.xml   canonical profile XML, all versions kept

Every append is flushed and fsynced before the call returns, so a
restarted store replays to exactly the same state. Writes are serialized
per patient; reads work on snapshots. Line formats are frozen in
docs/storage.md.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable
from urllib.parse import quote, unquote

import httpx

from .model import PatientProfile
from .profile_xml import ProfileValidationError, parse_profile, serialize_profile
from .typed_values import TypedValue, payload_from_json, payload_to_json
from .validation import BoundFinding, SubmissionRecord

logger = logging.getLogger(__name__)


class NotFound(KeyError):
    pass


class StorageError(RuntimeError):
    pass


class VersionConflict(RuntimeError):
    def __init__(self, expected: int, current: int):
        super().__init__(f"expected profile version {expected}, store has {current}")
        self.expected = expected
        self.current = current


@dataclass(frozen=True)
class Alert:
    alert_id: int
    patient_id: str
    record_id: int
    value_id: str
    kind: str  # "bound_max" | "bound_min"
    severity: str  # always "high"
    message: str
    server_timestamp: str
    acknowledged: bool = False


def record_to_json(record: SubmissionRecord) -> dict:
    return {
        "record_id": record.record_id,
        "patient_id": record.patient_id,
        "period": record.period,
        "server_timestamp": record.server_timestamp,
        "profile_version": record.profile_version,
        "values": {
            vid: {"datatype": tv.datatype, "value": payload_to_json(tv.payload)}
            for vid, tv in record.values.items()
        },
    }


def record_from_json(obj: dict) -> SubmissionRecord:
    values = {
        vid: TypedValue(vid, entry["datatype"],
                        payload_from_json(entry["value"], entry["datatype"]))
        for vid, entry in obj["values"].items()
    }
    return SubmissionRecord(
        patient_id=obj["patient_id"],
        period=obj["period"],
        values=values,
        profile_version=obj["profile_version"],
        record_id=obj["record_id"],
        server_timestamp=obj["server_timestamp"],
    )


def alert_to_json(alert: Alert) -> dict:
    return {
        "alert_id": alert.alert_id,
        "patient_id": alert.patient_id,
        "record_id": alert.record_id,
        "value_id": alert.value_id,
        "kind": alert.kind,
        "severity": alert.severity,
        "message": alert.message,
        "server_timestamp": alert.server_timestamp,
        "acknowledged": alert.acknowledged,
    }


def alert_from_json(obj: dict) -> Alert:
    return Alert(
        alert_id=obj["alert_id"],
        patient_id=obj["patient_id"],
        record_id=obj["record_id"],
        value_id=obj["value_id"],
        kind=obj["kind"],
        severity=obj["severity"],
        message=obj["message"],
        server_timestamp=obj["server_timestamp"],
        acknowledged=obj["acknowledged"],
    )


def parse_rfc3339(stamp: str) -> datetime:
    return datetime.fromisoformat(stamp.replace("Z", "+00:00"))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace(
        "+00:00", "Z")


class WebhookSender:
    """Fire-and-forget alert delivery with retries (at-least-once)."""

    def __init__(self, url: str, retries: int = 3, retry_delay: float = 0.5,
                 timeout: float = 5.0):
        self.url = url
        self.retries = retries
        self.retry_delay = retry_delay
        self.timeout = timeout
        self._queue: queue.Queue = queue.Queue()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def send(self, payload: dict) -> None:
        self._queue.put(payload)

    def _run(self) -> None:
        while True:
            payload = self._queue.get()
            if payload is None:
                self._queue.task_done()
                return
            try:
                self._deliver(payload)
            finally:
                self._queue.task_done()

    def _deliver(self, payload: dict) -> None:
        for attempt in range(1, self.retries + 1):
            try:
                response = httpx.post(self.url, json=payload, timeout=self.timeout)
                if response.status_code < 500:
                    return
                logger.warning("webhook %s returned %s (attempt %d)",
                               self.url, response.status_code, attempt)
            except httpx.HTTPError as exc:
                logger.warning("webhook %s failed: %s (attempt %d)", self.url, exc, attempt)
            if attempt < self.retries:
                time.sleep(self.retry_delay)
        logger.error("webhook %s: giving up on alert %s", self.url,
                     payload.get("alert_id"))

    def flush(self) -> None:
        self._queue.join()

    def close(self) -> None:
        self._queue.put(None)
        self._worker.join(timeout=5)


@dataclass
class _PatientState:
    directory: Path
    lock: threading.Lock = field(default_factory=threading.Lock)
    records: list[SubmissionRecord] = field(default_factory=list)
    alerts: list[Alert] = field(default_factory=list)
    record_seq: int = 0
    versions: list[int] = field(default_factory=list)
    latest_profile: PatientProfile | None = None


class Store:
    """Thread-safe store handle; one instance per data directory."""

    def __init__(self, root: str | Path, clock: Callable[[], str] | None = None,
                 webhook: WebhookSender | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._clock = clock or _utc_now
        self._webhook = webhook
        self._lock = threading.Lock()
        self._patients: dict[str, _PatientState] = {}
        self._alert_seq = 0
        self._alert_owner: dict[int, str] = {}
        self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        for directory in sorted(p for p in self.root.iterdir() if p.is_dir()):
            patient_id = unquote(directory.name)
            state = _PatientState(directory=directory)
            for profile_file in directory.glob("profile.v*.xml"):
                try:
                    state.versions.append(int(profile_file.name[len("profile.v"):-4]))
                except ValueError:
                    raise StorageError(f"unrecognized profile file {profile_file}")
            state.versions.sort()
            if state.versions:
                latest = directory / f"profile.v{state.versions[-1]}.xml"
                profile = parse_profile(latest.read_text(encoding="utf-8"))
                state.latest_profile = replace(profile, version=state.versions[-1])
            state.records = [
                record_from_json(obj)
                for obj in self._read_jsonl(directory / "records.jsonl")
            ]
            state.record_seq = max((r.record_id or 0 for r in state.records), default=0)
            for obj in self._read_jsonl(directory / "alerts.jsonl"):
                if obj.get("event") == "ack":
                    state.alerts = [
                        replace(a, acknowledged=True) if a.alert_id == obj["alert_id"] else a
                        for a in state.alerts
                    ]
                else:
                    state.alerts.append(alert_from_json(obj))
            for alert in state.alerts:
                self._alert_owner[alert.alert_id] = patient_id
                self._alert_seq = max(self._alert_seq, alert.alert_id)
            self._patients[patient_id] = state

    @staticmethod
    def _read_jsonl(path: Path) -> list[dict]:
        if not path.exists():
            return []
        out: list[dict] = []
        lines = path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    logger.warning("skipping torn trailing line in %s", path)
                    continue
                raise StorageError(f"corrupt line {i + 1} in {path}")
        return out

    # -- internals -------------------------------------------------------

    def _state(self, patient_id: str) -> _PatientState:
        with self._lock:
            state = self._patients.get(patient_id)
        if state is None:
            raise NotFound(f"unknown patient {patient_id!r}")
        return state

    def _state_or_create(self, patient_id: str) -> _PatientState:
        with self._lock:
            state = self._patients.get(patient_id)
            if state is None:
                directory = self.root / quote(patient_id, safe="")
                directory.mkdir(parents=True, exist_ok=True)
                state = _PatientState(directory=directory)
                self._patients[patient_id] = state
            return state

    @staticmethod
    def _append_line(path: Path, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(f"append to {path} failed: {exc}") from exc

    # -- profiles --------------------------------------------------------

    def store_profile(self, patient_id: str, profile: PatientProfile,
                      expected_version: int) -> int:
        """Optimistic-concurrency profile update; returns the new version."""
        from .profile_xml import validate_profile

        diags = validate_profile(profile)
        if any(d.severity == "error" for d in diags):
            raise ProfileValidationError(diags)
        state = self._state_or_create(patient_id)
        with state.lock:
            current = state.versions[-1] if state.versions else 0
            if expected_version != current:
                raise VersionConflict(expected_version, current)
            new_version = current + 1
            target = state.directory / f"profile.v{new_version}.xml"
            tmp = state.directory / f".profile.v{new_version}.xml.tmp"
            try:
                tmp.write_text(serialize_profile(profile), encoding="utf-8")
                with open(tmp, "rb") as fh:
                    os.fsync(fh.fileno())
                tmp.rename(target)
            except OSError as exc:
                raise StorageError(f"profile write failed: {exc}") from exc
            state.versions.append(new_version)
            state.latest_profile = replace(profile, version=new_version)
            return new_version

    def get_profile(self, patient_id: str, version: int | None = None) -> PatientProfile:
        state = self._state(patient_id)
        with state.lock:
            if not state.versions:
                raise NotFound(f"patient {patient_id!r} has no stored profile")
            if version is None or version == state.versions[-1]:
                assert state.latest_profile is not None
                return state.latest_profile
            if version not in state.versions:
                raise NotFound(f"patient {patient_id!r} has no profile version {version}")
        text = (state.directory / f"profile.v{version}.xml").read_text(encoding="utf-8")
        return replace(parse_profile(text), version=version)

    def profile_versions(self, patient_id: str) -> list[int]:
        state = self._state(patient_id)
        with state.lock:
            return list(state.versions)

    # -- records ---------------------------------------------------------

    def append_record(self, patient_id: str, record: SubmissionRecord) -> int:
        """Durably append; ids are dense 1..n per patient."""
        state = self._state(patient_id)
        with state.lock:
            if not state.versions:
                raise NotFound(f"patient {patient_id!r} has no stored profile")
            completed = replace(record, patient_id=patient_id,
                                record_id=state.record_seq + 1,
                                server_timestamp=self._clock())
            self._append_line(state.directory / "records.jsonl",
                              record_to_json(completed))
            state.record_seq = completed.record_id or 0
            state.records.append(completed)
            return completed.record_id or 0

    def get_record(self, patient_id: str, record_id: int) -> SubmissionRecord:
        state = self._state(patient_id)
        with state.lock:
            for record in state.records:
                if record.record_id == record_id:
                    return record
        raise NotFound(f"patient {patient_id!r} has no record {record_id}")

    def list_records(self, patient_id: str, since: str | None = None
                     ) -> list[SubmissionRecord]:
        state = self._state(patient_id)
        with state.lock:
            records = list(state.records)
        if since is not None:
            threshold = parse_rfc3339(since)
            records = [r for r in records
                       if parse_rfc3339(r.server_timestamp or "") >= threshold]
        return records

    # -- alerts ----------------------------------------------------------

    def raise_alerts(self, record: SubmissionRecord,
                     findings: list[BoundFinding]) -> list[Alert]:
        """One alert per bound finding; no findings means no write at all."""
        if record.record_id is None:
            raise StorageError("record must be stored before raising alerts")
        if not findings:
            return []
        state = self._state(record.patient_id)
        alerts: list[Alert] = []
        with state.lock:
            stamp = self._clock()
            for finding in findings:
                with self._lock:
                    self._alert_seq += 1
                    alert_id = self._alert_seq
                    self._alert_owner[alert_id] = record.patient_id
                direction = "above max" if finding.kind == "max" else "below min"
                alert = Alert(
                    alert_id=alert_id,
                    patient_id=record.patient_id,
                    record_id=record.record_id,
                    value_id=finding.value_id,
                    kind=f"bound_{finding.kind}",
                    severity="high",
                    message=(f"{finding.value_id}: observed {finding.observed} is "
                             f"{direction} limit {finding.limit} (excess {finding.excess})"),
                    server_timestamp=stamp,
                )
                self._append_line(state.directory / "alerts.jsonl", alert_to_json(alert))
                state.alerts.append(alert)
                alerts.append(alert)
        if self._webhook is not None:
            for alert in alerts:
                self._webhook.send(alert_to_json(alert))
        return alerts

    def list_alerts(self, patient: str | None = None, since: str | None = None,
                    unacknowledged_only: bool = False) -> list[Alert]:
        with self._lock:
            states = dict(self._patients)
        alerts: list[Alert] = []
        for pid, state in states.items():
            if patient is not None and pid != patient:
                continue
            with state.lock:
                alerts.extend(state.alerts)
        if since is not None:
            threshold = parse_rfc3339(since)
            alerts = [a for a in alerts if parse_rfc3339(a.server_timestamp) >= threshold]
        if unacknowledged_only:
            alerts = [a for a in alerts if not a.acknowledged]
        alerts.sort(key=lambda a: (a.server_timestamp, a.alert_id))
        return alerts

    def acknowledge_alert(self, alert_id: int) -> Alert:
        with self._lock:
            patient_id = self._alert_owner.get(alert_id)
        if patient_id is None:
            raise NotFound(f"no alert {alert_id}")
        state = self._state(patient_id)
        with state.lock:
            for i, alert in enumerate(state.alerts):
                if alert.alert_id == alert_id:
                    if not alert.acknowledged:
                        self._append_line(
                            state.directory / "alerts.jsonl",
                            {"event": "ack", "alert_id": alert_id,
                             "server_timestamp": self._clock()},
                        )
                        state.alerts[i] = replace(alert, acknowledged=True)
                    return state.alerts[i]
        raise NotFound(f"no alert {alert_id}")

    # -- misc ------------------------------------------------------------

    def patients(self) -> list[str]:
        with self._lock:
            return sorted(self._patients)

    def close(self) -> None:
        if self._webhook is not None:
            self._webhook.close()
