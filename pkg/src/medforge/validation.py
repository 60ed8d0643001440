"""Server-side validation of submitted medical data.

Pipeline per submission: reject unknown value ids, parse every present
value under its declared datatype, compute the required set (all values,
minus trigger-gated ones, plus whatever fired triggers demand), check
cross-value relations, then evaluate bounds. Bound breaches never reject:
a pathological reading is real data the doctor must see, so it is
recorded and surfaced as findings. Relation violations are entry
mistakes and reject.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from .model import PatientProfile, RelationConstraint, TriggerRule, ValueSpec
from .typed_values import (
    Payload,
    TypedValue,
    ValueTypeError,
    compare,
    excess_magnitude,
    parse_payload,
    parse_typed,
)

PERIODS = ("morning", "noon", "evening", "night")

REJECTION_CODES = ("UNKNOWN_VALUE", "TYPE_ERROR", "MISSING_REQUIRED", "RELATION_VIOLATION")

# optional gateway-level extras allowed alongside the core wire format
_SUBMISSION_KEYS = {"patient_id", "period", "client_timestamp", "values",
                    "submission_nonce", "profile_version"}


class MalformedSubmission(ValueError):
    """Request body is not a structurally valid submission."""


@dataclass(frozen=True)
class SubmissionInput:
    patient_id: str
    period: str
    raw_values: dict[str, str]
    client_timestamp: str


@dataclass(frozen=True)
class Rejection:
    subject: str  # value id, or "left op right" for a relation
    code: str
    message: str


@dataclass(frozen=True)
class BoundFinding:
    value_id: str
    kind: str  # "min" | "max"
    limit: Payload
    observed: Payload
    excess: str  # decimal string; minutes for time values


@dataclass(frozen=True)
class SubmissionRecord:
    """One validated data entry event; id and server time come from the store."""

    patient_id: str
    period: str
    values: dict[str, TypedValue]
    profile_version: int
    record_id: int | None = None
    server_timestamp: str | None = None


@dataclass(frozen=True)
class ValidationOutcome:
    status: str  # "accepted" | "rejected"
    record: SubmissionRecord | None = None
    rejections: tuple[Rejection, ...] = ()
    findings: tuple[BoundFinding, ...] = ()


def submission_from_json(obj: object) -> SubmissionInput:
    """Check the submission wire format strictly; gateway extras allowed."""
    if not isinstance(obj, dict):
        raise MalformedSubmission("submission must be a JSON object")
    unknown = set(obj) - _SUBMISSION_KEYS
    if unknown:
        raise MalformedSubmission(f"unknown submission field(s): {', '.join(sorted(unknown))}")
    for field_name in ("patient_id", "period", "client_timestamp"):
        if not isinstance(obj.get(field_name), str):
            raise MalformedSubmission(f"{field_name} must be a string")
    if obj["period"] not in PERIODS:
        raise MalformedSubmission(
            f"period must be one of {', '.join(PERIODS)}; got {obj['period']!r}")
    stamp = obj["client_timestamp"]
    try:
        datetime.fromisoformat(stamp.replace("Z", "+00:00"))
    except ValueError:
        raise MalformedSubmission(f"client_timestamp {stamp!r} is not RFC3339") from None
    values = obj.get("values")
    if not isinstance(values, dict):
        raise MalformedSubmission("values must be an object of raw strings")
    for vid, raw in values.items():
        if not isinstance(raw, str):
            raise MalformedSubmission(f"value {vid!r} must be a raw string")
    return SubmissionInput(
        patient_id=obj["patient_id"],
        period=obj["period"],
        raw_values=dict(values),
        client_timestamp=stamp,
    )


def check_bounds(value: TypedValue, spec: ValueSpec) -> list[BoundFinding]:
    """Inclusive bound semantics; char and boolean values never breach."""
    if value.datatype in ("char", "boolean"):
        return []
    findings: list[BoundFinding] = []
    if spec.min_bound is not None:
        limit = parse_payload(spec.min_bound, spec.datatype)
        if compare("lt", value.payload, limit):
            findings.append(BoundFinding(
                value_id=value.value_id, kind="min", limit=limit, observed=value.payload,
                excess=excess_magnitude(value.datatype, value.payload, limit)))
    if spec.max_bound is not None:
        limit = parse_payload(spec.max_bound, spec.datatype)
        if compare("gt", value.payload, limit):
            findings.append(BoundFinding(
                value_id=value.value_id, kind="max", limit=limit, observed=value.payload,
                excess=excess_magnitude(value.datatype, value.payload, limit)))
    return findings


def check_relations(
    relations: tuple[RelationConstraint, ...] | list[RelationConstraint],
    values: dict[str, TypedValue],
) -> list[Rejection]:
    """Violations of cross-value comparisons; absent operands stay inert."""
    violations: list[Rejection] = []
    for rel in relations:
        left = values.get(rel.left)
        right = values.get(rel.right)
        if left is None or right is None:
            continue
        if not compare(rel.op, left.payload, right.payload):
            violations.append(Rejection(
                subject=f"{rel.left} {rel.op} {rel.right}",
                code="RELATION_VIOLATION",
                message=f"{rel.left}={left.payload} must be {rel.op} "
                        f"{rel.right}={right.payload}",
            ))
    return violations


def evaluate_triggers(
    triggers: tuple[TriggerRule, ...] | list[TriggerRule],
    values: dict[str, TypedValue],
) -> set[str]:
    """Value ids made required by fired triggers (single pass, non-recursive)."""
    required: set[str] = set()
    for trig in triggers:
        observed = values.get(trig.value_id)
        if observed is None:
            continue  # condition on an absent value is inert
        constant = parse_payload(trig.literal, observed.datatype)
        if compare(trig.op, observed.payload, constant):
            required.update(trig.requires)
    return required


def validate_submission(profile: PatientProfile, sub: SubmissionInput) -> ValidationOutcome:
    """Run the full pipeline; problems are expressed in the outcome, never thrown."""
    specs = profile.value_index()
    rejections: list[Rejection] = []

    for vid in sorted(set(sub.raw_values) - set(specs)):
        rejections.append(Rejection(vid, "UNKNOWN_VALUE",
                                    f"value id {vid!r} is not in the profile"))

    typed: dict[str, TypedValue] = {}
    ordered_ids = [v.id for mc in profile.medcomps for v in mc.values]
    for vid in ordered_ids:
        if vid not in sub.raw_values:
            continue
        raw = sub.raw_values[vid]
        try:
            typed[vid] = parse_typed(vid, raw, specs[vid].datatype)
        except ValueTypeError:
            rejections.append(Rejection(
                vid, "TYPE_ERROR",
                f"{raw!r} is not a valid {specs[vid].datatype} for {vid!r}"))

    gated = profile.trigger_gated_ids()
    required = (set(ordered_ids) - gated) | evaluate_triggers(profile.triggers, typed)
    for vid in ordered_ids:
        if vid in required and vid not in sub.raw_values:
            rejections.append(Rejection(vid, "MISSING_REQUIRED",
                                        f"required value {vid!r} was not submitted"))

    rejections.extend(check_relations(profile.relations, typed))

    if rejections:
        return ValidationOutcome(status="rejected", rejections=tuple(rejections))

    findings: list[BoundFinding] = []
    for mc in profile.medcomps:
        for spec in mc.values:
            if spec.id in typed:
                findings.extend(check_bounds(typed[spec.id], spec))

    record = SubmissionRecord(
        patient_id=sub.patient_id,
        period=sub.period,
        values=typed,
        profile_version=profile.version,
    )
    return ValidationOutcome(status="accepted", record=record, findings=tuple(findings))
