"""Typed parsing and comparison of raw value strings.

The grammar is deliberately strict: free-text medical entry must never be
silently coerced. Bound literals, trigger constants, and submitted values
all go through the same parser.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Union

from .model import COMPARABLE_DATATYPES

Payload = Union[int, Decimal, str, bool]

_INTEGER_RE = re.compile(r"[+-]?[0-9]+\Z")
_DECIMAL_RE = re.compile(r"[+-]?[0-9]+(\.[0-9]+)?\Z")
_TIME_RE = re.compile(r"([01][0-9]|2[0-3]):[0-5][0-9]\Z")


class ValueTypeError(ValueError):
    """Raw string does not conform to the datatype grammar."""

    def __init__(self, datatype: str, raw: str):
        super().__init__(f"{raw!r} is not a valid {datatype}")
        self.datatype = datatype
        self.raw = raw


@dataclass(frozen=True)
class TypedValue:
    """A successfully parsed value; payload variant matches the datatype."""

    value_id: str
    datatype: str
    payload: Payload


def parse_payload(raw: str, datatype: str) -> Payload:
    """Parse a raw string under a datatype, raising ValueTypeError.

    Surrounding whitespace is trimmed for every datatype before the
    grammar applies. Times are zero-padded 24-hour "HH:MM" strings.
    """
    text = raw.strip()
    if datatype == "integer":
        if not _INTEGER_RE.match(text):
            raise ValueTypeError(datatype, raw)
        return int(text)
    if datatype == "decimal":
        if not _DECIMAL_RE.match(text):
            raise ValueTypeError(datatype, raw)
        return Decimal(text)
    if datatype == "time":
        if not _TIME_RE.match(text):
            raise ValueTypeError(datatype, raw)
        return text
    if datatype == "boolean":
        if text == "true":
            return True
        if text == "false":
            return False
        raise ValueTypeError(datatype, raw)
    if datatype == "char":
        return text
    raise ValueTypeError(datatype, raw)


def parse_typed(value_id: str, raw: str, datatype: str) -> TypedValue:
    """parse_payload plus the id, packaged as a TypedValue."""
    return TypedValue(value_id, datatype, parse_payload(raw, datatype))


def is_comparable(datatype: str) -> bool:
    return datatype in COMPARABLE_DATATYPES


def compare(op: str, left: Payload, right: Payload) -> bool:
    """Apply a relation operator under numeric or time order.

    Zero-padded "HH:MM" strings compare correctly lexicographically.
    """
    if op == "lt":
        return left < right
    if op == "le":
        return left <= right
    if op == "gt":
        return left > right
    if op == "ge":
        return left >= right
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    raise ValueError(f"unknown relation operator {op!r}")


def time_to_minutes(text: str) -> int:
    hh, mm = text.split(":")
    return int(hh) * 60 + int(mm)


def excess_magnitude(datatype: str, observed: Payload, limit: Payload) -> str:
    """How far a value lies beyond a bound, as a plain decimal string.

    Time excess is reported in minutes.
    """
    if datatype == "time":
        delta = abs(time_to_minutes(str(observed)) - time_to_minutes(str(limit)))
        return str(delta)
    return str(abs(observed - limit))  # type: ignore[operator]


def payload_to_json(payload: Payload) -> object:
    """JSON-safe form: Decimal becomes a string so exactness survives."""
    if isinstance(payload, Decimal):
        return str(payload)
    return payload


def payload_from_json(value: object, datatype: str) -> Payload:
    """Inverse of payload_to_json for store replay."""
    if datatype == "decimal":
        return Decimal(str(value))
    if datatype == "integer":
        return int(value)  # type: ignore[arg-type]
    if datatype == "boolean":
        return bool(value)
    return str(value)
