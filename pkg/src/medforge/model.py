"""In-memory model of patient profiles.

A profile is the set of medical components (medcomps) monitored for one
patient, plus cross-value relations, conditional triggers, and the peers
bindings that describe how each value is retrieved from the interface.
Everything here is an immutable value object; all derivations are pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

DATATYPES = ("integer", "decimal", "char", "boolean", "time")
COMPARABLE_DATATYPES = ("integer", "decimal", "time")
RELATION_OPS = ("lt", "le", "gt", "ge", "eq", "ne")

ENTITY_KEY_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


class InvalidName(ValueError):
    """Entity name is empty or yields no usable key characters."""


@dataclass(frozen=True)
class Descrip:
    """One descriptive tag attached to a value (tags are opaque)."""

    type_tag: str
    class_tag: str
    text: str


@dataclass(frozen=True)
class ValueSpec:
    """One measurable value of a medcomp: typed, optionally bounded."""

    id: str
    datatype: str
    descrips: tuple[Descrip, ...] = ()
    min_bound: str | None = None
    max_bound: str | None = None
    extensions: tuple[str, ...] = ()

    def label(self) -> str:
        """Human label: first descrip text, falling back to the value id."""
        for d in self.descrips:
            if d.text:
                return d.text
        return self.id


@dataclass(frozen=True)
class RetrieveBinding:
    """Peers entry: how one value is pulled out of the rendered interface."""

    idref: str
    type_tag: str
    method_name: str
    params: tuple[tuple[str, str], ...] = ()  # (datatype, name) pairs
    return_datatype: str = "char"


@dataclass(frozen=True)
class MedComp:
    """A single monitored entity and its set of measurable values."""

    id: str
    name: str
    state: str = ""
    key: str | None = None
    help_text: str | None = None
    values: tuple[ValueSpec, ...] = ()
    retrieves: tuple[RetrieveBinding, ...] = ()
    extensions: tuple[str, ...] = ()


@dataclass(frozen=True)
class RelationConstraint:
    """Cross-value comparison that must hold in every submission."""

    op: str
    left: str
    right: str


@dataclass(frozen=True)
class TriggerRule:
    """Condition on one entered value that makes further values required."""

    value_id: str
    op: str
    literal: str
    requires: tuple[str, ...] = ()


@dataclass(frozen=True)
class PatientProfile:
    """Complete per-patient configuration: medcomps, relations, triggers.

    `version` is assigned by the store, not by the XML author; freshly
    parsed profiles carry version 0.
    """

    patient_id: str
    medcomps: tuple[MedComp, ...] = ()
    relations: tuple[RelationConstraint, ...] = ()
    triggers: tuple[TriggerRule, ...] = ()
    version: int = 0
    extensions: tuple[str, ...] = ()

    def value_index(self) -> dict[str, ValueSpec]:
        """Map of value id -> ValueSpec across all medcomps."""
        index: dict[str, ValueSpec] = {}
        for mc in self.medcomps:
            for v in mc.values:
                index.setdefault(v.id, v)
        return index

    def owner_index(self) -> dict[str, MedComp]:
        """Map of value id -> owning medcomp."""
        index: dict[str, MedComp] = {}
        for mc in self.medcomps:
            for v in mc.values:
                index.setdefault(v.id, mc)
        return index

    def trigger_gated_ids(self) -> frozenset[str]:
        """Value ids that are only required once some trigger fires."""
        gated: set[str] = set()
        for t in self.triggers:
            gated.update(t.requires)
        return frozenset(gated)


def derive_entity_key(medcomp: MedComp, taken: set[str]) -> str:
    """Short unique identifier for a medcomp ("Blood Pressure" -> "BP").

    Uses the explicit key when the profile provides one; otherwise the
    uppercase initials of a multi-word name, or the single-word name
    stripped of non-alphanumerics. Collisions against `taken` get the
    smallest integer suffix starting at 2. The result always matches
    ``[A-Za-z][A-Za-z0-9]*``; `taken` is not mutated.
    """
    if medcomp.key:
        base = medcomp.key
    else:
        if not medcomp.name.strip():
            raise InvalidName(f"medcomp {medcomp.id!r} has an empty name")
        words = medcomp.name.split()
        if len(words) >= 2:
            initials = []
            for word in words:
                for ch in word:
                    if ch.isascii() and ch.isalnum():
                        initials.append(ch.upper())
                        break
            base = "".join(initials)
        else:
            base = "".join(ch for ch in words[0] if ch.isascii() and ch.isalnum())
        # keys must start with a letter; drop any leading digits
        base = base.lstrip("0123456789")
        if not base or not ENTITY_KEY_RE.match(base):
            raise InvalidName(
                f"medcomp name {medcomp.name!r} reduces to no usable key"
            )
    if base not in taken:
        return base
    n = 2
    while f"{base}{n}" in taken:
        n += 1
    return f"{base}{n}"


def assign_entity_keys(profile: PatientProfile) -> dict[str, str]:
    """Deterministic medcomp id -> key assignment in profile order."""
    keys: dict[str, str] = {}
    taken: set[str] = set()
    for mc in profile.medcomps:
        key = derive_entity_key(mc, taken)
        taken.add(key)
        keys[mc.id] = key
    return keys


def default_help_text(medcomp: MedComp) -> str:
    """Generated help copy naming the entity, its state, and its bounds."""
    sentence = f"Enter your {medcomp.name} readings"
    if medcomp.state:
        sentence += f" while {medcomp.state}"
    parts = [sentence + "."]
    for v in medcomp.values:
        label = v.label()
        if v.min_bound is not None and v.max_bound is not None:
            parts.append(f"{label} must be between {v.min_bound} and {v.max_bound}.")
        elif v.max_bound is not None:
            parts.append(f"{label} must be at most {v.max_bound}.")
        elif v.min_bound is not None:
            parts.append(f"{label} must be at least {v.min_bound}.")
    return " ".join(parts)


def substitution_context(medcomp: MedComp, key: str) -> dict[str, str]:
    """Slot values for instantiating this medcomp's templates.

    Values are plain text; escaping happens at instantiation time.
    """
    help_text = medcomp.help_text
    if help_text is None:
        help_text = default_help_text(medcomp)
    return {
        "key": key,
        "name": medcomp.name,
        "state": medcomp.state,
        "help_text": help_text,
        "medcomp_id": medcomp.id,
    }
