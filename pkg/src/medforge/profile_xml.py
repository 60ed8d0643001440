"""Profile XML parsing, validation, and canonical serialization.

The document shape is::

    profile > medComp* relation* trigger* peers?
    medComp > name state? help? value+ peers?
    value   > descrip* bound*
    peers   > retrieve*  (retrieve > method > name param* return)

Peers are accepted either nested inside a medComp or as a trailing
sibling block; canonical output always uses the sibling form. Unknown
elements are schema errors unless they live in the reserved extension
namespace, in which case they are preserved verbatim for round-trips.
The full format, including all diagnostic codes, is documented in
docs/profile-format.md.
"""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .model import (
    DATATYPES,
    ENTITY_KEY_RE,
    RELATION_OPS,
    Descrip,
    InvalidName,
    MedComp,
    PatientProfile,
    RelationConstraint,
    RetrieveBinding,
    TriggerRule,
    ValueSpec,
    derive_entity_key,
)
from .typed_values import ValueTypeError, compare, is_comparable, parse_payload
from .xmlwriter import XmlWriter

EXTENSION_NS = "urn:medforge:ext"

DIAGNOSTIC_CODES = (
    "MISSING_ATTR",
    "UNKNOWN_ATTR",
    "UNKNOWN_ELEMENT",
    "DUP_ELEMENT",
    "MISSING_ELEMENT",
    "STRAY_TEXT",
    "DUP_MEDCOMP_ID",
    "DUP_VALUE_ID",
    "NO_VALUES",
    "BAD_NAME",
    "BAD_KEY",
    "BAD_DATATYPE",
    "BAD_BOUND_KIND",
    "DUP_BOUND",
    "BAD_BOUND_LITERAL",
    "BOUND_ORDER",
    "BAD_OP",
    "DANGLING_IDREF",
    "BAD_RELATION_TYPES",
    "BAD_TRIGGER_LITERAL",
    "MISSING_RETRIEVE",
    "DUP_RETRIEVE",
    "RETRIEVE_SCOPE",
    "RETRIEVE_TYPE_MISMATCH",
)


@dataclass(frozen=True)
class ProfileDiagnostic:
    severity: str  # "error" | "warning"
    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity} {self.code} at {self.location}: {self.message}"


class XmlError(ValueError):
    """Input is not well-formed XML."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ProfileValidationError(ValueError):
    """Profile violates the schema; carries the full diagnostic list."""

    def __init__(self, diagnostics: list[ProfileDiagnostic]):
        errors = [d for d in diagnostics if d.severity == "error"]
        summary = str(errors[0]) if errors else "invalid profile"
        if len(errors) > 1:
            summary += f" (+{len(errors) - 1} more)"
        super().__init__(summary)
        self.diagnostics = diagnostics


def _err(diags: list[ProfileDiagnostic], code: str, location: str, message: str) -> None:
    diags.append(ProfileDiagnostic("error", code, location, message))


def _is_extension(elem: ET.Element) -> bool:
    return elem.tag.startswith("{" + EXTENSION_NS + "}")


def _canonical_fragment(elem: ET.Element) -> str:
    # tostring normalizes prefixes (ns0, ns1, ...); C14N then fixes
    # attribute order, so the stored string is a stable fixpoint.
    raw = ET.tostring(elem, encoding="unicode")
    out = io.StringIO()
    ET.canonicalize(xml_data=raw, out=out)
    return out.getvalue().strip()


def _check_attrs(
    elem: ET.Element,
    path: str,
    required: tuple[str, ...],
    optional: tuple[str, ...],
    diags: list[ProfileDiagnostic],
) -> dict[str, str]:
    found: dict[str, str] = {}
    for name, value in elem.attrib.items():
        if name in required or name in optional:
            found[name] = value
        else:
            _err(diags, "UNKNOWN_ATTR", path, f"unknown attribute {name!r}")
    for name in required:
        if name not in found:
            _err(diags, "MISSING_ATTR", path, f"missing required attribute {name!r}")
            found[name] = ""
    return found


def _check_no_stray_text(elem: ET.Element, path: str, diags: list[ProfileDiagnostic]) -> None:
    if elem.text and elem.text.strip():
        _err(diags, "STRAY_TEXT", path, f"unexpected text {elem.text.strip()!r}")
    for child in elem:
        if child.tail and child.tail.strip():
            _err(diags, "STRAY_TEXT", path, f"unexpected text {child.tail.strip()!r}")


def _text_of(elem: ET.Element) -> str:
    return elem.text or ""


def parse_profile(xml_text: str | bytes) -> PatientProfile:
    """Parse a profile document, raising on malformed XML or schema errors.

    The returned profile preserves medcomp document order, descrips, and
    extension-namespace elements; its version is 0 until a store assigns
    one. Raises XmlError for syntax problems and ProfileValidationError
    (with ordered diagnostics) for schema violations.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise XmlError(line, column, exc.msg.split(":")[0]) from exc

    diags: list[ProfileDiagnostic] = []
    if root.tag != "profile":
        _err(diags, "UNKNOWN_ELEMENT", "/" + str(root.tag), "root element must be <profile>")
        raise ProfileValidationError(diags)

    path = "/profile"
    attrs = _check_attrs(root, path, ("patient",), (), diags)
    _check_no_stray_text(root, path, diags)

    medcomps: list[MedComp] = []
    relations: list[RelationConstraint] = []
    triggers: list[TriggerRule] = []
    extensions: list[str] = []
    loose_retrieves: list[tuple[RetrieveBinding, str]] = []  # sibling-form peers

    counters = {"medComp": 0, "relation": 0, "trigger": 0, "peers": 0}
    for child in root:
        tag = child.tag
        if _is_extension(child):
            extensions.append(_canonical_fragment(child))
            continue
        if tag not in counters:
            _err(diags, "UNKNOWN_ELEMENT", f"{path}/{tag}", f"unknown element <{tag}>")
            continue
        counters[tag] += 1
        child_path = f"{path}/{tag}[{counters[tag]}]"
        if tag == "medComp":
            medcomps.append(_parse_medcomp(child, child_path, diags))
        elif tag == "relation":
            relations.append(_parse_relation(child, child_path, diags))
        elif tag == "trigger":
            triggers.append(_parse_trigger(child, child_path, diags))
        else:
            loose_retrieves.extend(_parse_peers(child, child_path, diags))

    # attach sibling-form retrieves to the medcomp owning the referenced value
    if loose_retrieves:
        owner_by_value: dict[str, int] = {}
        for i, mc in enumerate(medcomps):
            for v in mc.values:
                owner_by_value.setdefault(v.id, i)
        extra: dict[int, list[RetrieveBinding]] = {}
        for binding, rb_path in loose_retrieves:
            if binding.idref in owner_by_value:
                extra.setdefault(owner_by_value[binding.idref], []).append(binding)
            else:
                _err(diags, "DANGLING_IDREF", rb_path,
                     f"retrieve references unknown value id {binding.idref!r}")
        for i, bindings in extra.items():
            mc = medcomps[i]
            medcomps[i] = MedComp(
                id=mc.id, name=mc.name, state=mc.state, key=mc.key,
                help_text=mc.help_text, values=mc.values,
                retrieves=mc.retrieves + tuple(bindings), extensions=mc.extensions,
            )

    profile = PatientProfile(
        patient_id=attrs["patient"],
        medcomps=tuple(medcomps),
        relations=tuple(relations),
        triggers=tuple(triggers),
        extensions=tuple(extensions),
    )
    diags.extend(validate_profile(profile))
    if any(d.severity == "error" for d in diags):
        raise ProfileValidationError(diags)
    return profile


def _parse_medcomp(elem: ET.Element, path: str, diags: list[ProfileDiagnostic]) -> MedComp:
    attrs = _check_attrs(elem, path, ("id",), ("key",), diags)
    _check_no_stray_text(elem, path, diags)

    name: str | None = None
    state = ""
    help_text: str | None = None
    values: list[ValueSpec] = []
    retrieves: list[RetrieveBinding] = []
    extensions: list[str] = []
    seen_single: set[str] = set()
    value_n = 0
    for child in elem:
        tag = child.tag
        if _is_extension(child):
            extensions.append(_canonical_fragment(child))
            continue
        if tag in ("name", "state", "help"):
            if tag in seen_single:
                _err(diags, "DUP_ELEMENT", f"{path}/{tag}", f"repeated <{tag}>")
                continue
            seen_single.add(tag)
            _check_attrs(child, f"{path}/{tag}", (), (), diags)
            if tag == "name":
                name = _text_of(child)
            elif tag == "state":
                state = _text_of(child)
            else:
                help_text = _text_of(child)
        elif tag == "value":
            value_n += 1
            values.append(_parse_value(child, f"{path}/value[{value_n}]", diags))
        elif tag == "peers":
            if "peers" in seen_single:
                _err(diags, "DUP_ELEMENT", f"{path}/peers", "repeated <peers>")
                continue
            seen_single.add(tag)
            for binding, _ in _parse_peers(child, f"{path}/peers", diags):
                retrieves.append(binding)
        else:
            _err(diags, "UNKNOWN_ELEMENT", f"{path}/{tag}", f"unknown element <{tag}>")
    if name is None:
        _err(diags, "MISSING_ELEMENT", path, "medComp requires a <name>")
        name = ""
    return MedComp(
        id=attrs["id"], name=name, state=state, key=attrs.get("key"),
        help_text=help_text, values=tuple(values), retrieves=tuple(retrieves),
        extensions=tuple(extensions),
    )


def _parse_value(elem: ET.Element, path: str, diags: list[ProfileDiagnostic]) -> ValueSpec:
    attrs = _check_attrs(elem, path, ("id", "datatype"), (), diags)
    _check_no_stray_text(elem, path, diags)

    descrips: list[Descrip] = []
    extensions: list[str] = []
    min_bound: str | None = None
    max_bound: str | None = None
    bound_n = 0
    for child in elem:
        tag = child.tag
        if _is_extension(child):
            extensions.append(_canonical_fragment(child))
            continue
        if tag == "descrip":
            d_attrs = _check_attrs(child, f"{path}/descrip", (), ("type", "class"), diags)
            descrips.append(Descrip(d_attrs.get("type", ""), d_attrs.get("class", ""),
                                    _text_of(child)))
        elif tag == "bound":
            bound_n += 1
            b_path = f"{path}/bound[{bound_n}]"
            b_attrs = _check_attrs(child, b_path, ("type",), (), diags)
            kind = b_attrs["type"]
            literal = _text_of(child)
            if kind == "min":
                if min_bound is not None:
                    _err(diags, "DUP_BOUND", b_path, "more than one min bound")
                else:
                    min_bound = literal
            elif kind == "max":
                if max_bound is not None:
                    _err(diags, "DUP_BOUND", b_path, "more than one max bound")
                else:
                    max_bound = literal
            else:
                _err(diags, "BAD_BOUND_KIND", b_path,
                     f"bound type must be min or max, got {kind!r}")
        else:
            _err(diags, "UNKNOWN_ELEMENT", f"{path}/{tag}", f"unknown element <{tag}>")
    return ValueSpec(
        id=attrs["id"], datatype=attrs["datatype"], descrips=tuple(descrips),
        min_bound=min_bound, max_bound=max_bound, extensions=tuple(extensions),
    )


def _parse_relation(elem: ET.Element, path: str, diags: list[ProfileDiagnostic]) -> RelationConstraint:
    attrs = _check_attrs(elem, path, ("op", "left", "right"), (), diags)
    _check_no_stray_text(elem, path, diags)
    for child in elem:
        _err(diags, "UNKNOWN_ELEMENT", f"{path}/{child.tag}", f"unknown element <{child.tag}>")
    return RelationConstraint(op=attrs["op"], left=attrs["left"], right=attrs["right"])


def _parse_trigger(elem: ET.Element, path: str, diags: list[ProfileDiagnostic]) -> TriggerRule:
    attrs = _check_attrs(elem, path, ("idref", "op", "value"), (), diags)
    _check_no_stray_text(elem, path, diags)
    requires: list[str] = []
    req_n = 0
    for child in elem:
        if child.tag == "require":
            req_n += 1
            r_attrs = _check_attrs(child, f"{path}/require[{req_n}]", ("idref",), (), diags)
            requires.append(r_attrs["idref"])
        else:
            _err(diags, "UNKNOWN_ELEMENT", f"{path}/{child.tag}", f"unknown element <{child.tag}>")
    return TriggerRule(value_id=attrs["idref"], op=attrs["op"], literal=attrs["value"],
                       requires=tuple(requires))


def _parse_peers(
    elem: ET.Element, path: str, diags: list[ProfileDiagnostic]
) -> list[tuple[RetrieveBinding, str]]:
    _check_attrs(elem, path, (), (), diags)
    _check_no_stray_text(elem, path, diags)
    out: list[tuple[RetrieveBinding, str]] = []
    retrieve_n = 0
    for child in elem:
        if child.tag != "retrieve":
            _err(diags, "UNKNOWN_ELEMENT", f"{path}/{child.tag}", f"unknown element <{child.tag}>")
            continue
        retrieve_n += 1
        r_path = f"{path}/retrieve[{retrieve_n}]"
        r_attrs = _check_attrs(child, r_path, ("idref", "type"), (), diags)
        _check_no_stray_text(child, r_path, diags)
        method_name = ""
        params: list[tuple[str, str]] = []
        return_datatype = ""
        method_seen = False
        for m in child:
            if m.tag != "method":
                _err(diags, "UNKNOWN_ELEMENT", f"{r_path}/{m.tag}", f"unknown element <{m.tag}>")
                continue
            if method_seen:
                _err(diags, "DUP_ELEMENT", f"{r_path}/method", "repeated <method>")
                continue
            method_seen = True
            m_path = f"{r_path}/method"
            _check_attrs(m, m_path, (), (), diags)
            name_seen = return_seen = False
            for part in m:
                if part.tag == "name":
                    if name_seen:
                        _err(diags, "DUP_ELEMENT", f"{m_path}/name", "repeated <name>")
                        continue
                    name_seen = True
                    method_name = _text_of(part)
                elif part.tag == "param":
                    p_attrs = _check_attrs(part, f"{m_path}/param", ("datatype", "name"), (), diags)
                    params.append((p_attrs["datatype"], p_attrs["name"]))
                elif part.tag == "return":
                    if return_seen:
                        _err(diags, "DUP_ELEMENT", f"{m_path}/return", "repeated <return>")
                        continue
                    return_seen = True
                    rt_attrs = _check_attrs(part, f"{m_path}/return", ("datatype",), (), diags)
                    return_datatype = rt_attrs["datatype"]
                else:
                    _err(diags, "UNKNOWN_ELEMENT", f"{m_path}/{part.tag}",
                         f"unknown element <{part.tag}>")
            if not name_seen:
                _err(diags, "MISSING_ELEMENT", m_path, "method requires a <name>")
            if not return_seen:
                _err(diags, "MISSING_ELEMENT", m_path, "method requires a <return>")
        if not method_seen:
            _err(diags, "MISSING_ELEMENT", r_path, "retrieve requires a <method>")
        out.append((
            RetrieveBinding(idref=r_attrs["idref"], type_tag=r_attrs["type"],
                            method_name=method_name, params=tuple(params),
                            return_datatype=return_datatype),
            r_path,
        ))
    return out


def validate_profile(profile: PatientProfile) -> list[ProfileDiagnostic]:
    """Semantic checks over an in-memory profile.

    Returns an empty list iff every model invariant holds: unique ids,
    known datatypes and operators, parseable ordered bounds, comparable
    relation operands, parseable trigger constants, and exactly one
    retrieve binding (with matching return type) per value. Diagnostics
    come out in canonical document order and are deterministic.
    """
    diags: list[ProfileDiagnostic] = []
    seen_medcomp_ids: set[str] = set()
    seen_value_ids: set[str] = set()
    value_types: dict[str, str] = {}
    taken_keys: set[str] = set()

    for mi, mc in enumerate(profile.medcomps, start=1):
        m_path = f"/profile/medComp[{mi}]"
        if mc.id in seen_medcomp_ids:
            _err(diags, "DUP_MEDCOMP_ID", m_path, f"duplicate medcomp id {mc.id!r}")
        seen_medcomp_ids.add(mc.id)
        if mc.key is not None and not ENTITY_KEY_RE.match(mc.key):
            _err(diags, "BAD_KEY", m_path,
                 f"key {mc.key!r} must match [A-Za-z][A-Za-z0-9]*")
        else:
            try:
                taken_keys.add(derive_entity_key(mc, taken_keys))
            except InvalidName:
                _err(diags, "BAD_NAME", m_path,
                     f"name {mc.name!r} yields no usable entity key")
        if not mc.values:
            _err(diags, "NO_VALUES", m_path, "medComp requires at least one value")
        for vi, v in enumerate(mc.values, start=1):
            v_path = f"{m_path}/value[{vi}]"
            if v.id in seen_value_ids:
                _err(diags, "DUP_VALUE_ID", v_path, f"duplicate value id {v.id!r}")
            seen_value_ids.add(v.id)
            value_types.setdefault(v.id, v.datatype)
            if v.datatype not in DATATYPES:
                _err(diags, "BAD_DATATYPE", v_path, f"unknown datatype {v.datatype!r}")
                continue
            bounds = []
            for kind, literal in (("min", v.min_bound), ("max", v.max_bound)):
                if literal is None:
                    continue
                try:
                    bounds.append((kind, parse_payload(literal, v.datatype)))
                except ValueTypeError:
                    _err(diags, "BAD_BOUND_LITERAL", v_path,
                         f"{kind} bound {literal!r} is not a valid {v.datatype}")
            if len(bounds) == 2 and is_comparable(v.datatype):
                if compare("gt", bounds[0][1], bounds[1][1]):
                    _err(diags, "BOUND_ORDER", v_path,
                         f"min bound {v.min_bound!r} exceeds max bound {v.max_bound!r}")

    for ri, rel in enumerate(profile.relations, start=1):
        r_path = f"/profile/relation[{ri}]"
        if rel.op not in RELATION_OPS:
            _err(diags, "BAD_OP", r_path, f"unknown relation operator {rel.op!r}")
        resolved = True
        for side, idref in (("left", rel.left), ("right", rel.right)):
            if idref not in value_types:
                _err(diags, "DANGLING_IDREF", r_path,
                     f"{side} references unknown value id {idref!r}")
                resolved = False
        if resolved:
            lt, rt = value_types[rel.left], value_types[rel.right]
            if lt != rt or not is_comparable(lt):
                _err(diags, "BAD_RELATION_TYPES", r_path,
                     f"cannot compare {lt !r} with {rt!r}")

    for ti, trig in enumerate(profile.triggers, start=1):
        t_path = f"/profile/trigger[{ti}]"
        if trig.op not in RELATION_OPS:
            _err(diags, "BAD_OP", t_path, f"unknown trigger operator {trig.op!r}")
        if trig.value_id not in value_types:
            _err(diags, "DANGLING_IDREF", t_path,
                 f"condition references unknown value id {trig.value_id!r}")
        else:
            dt = value_types[trig.value_id]
            if dt in DATATYPES:
                try:
                    parse_payload(trig.literal, dt)
                except ValueTypeError:
                    _err(diags, "BAD_TRIGGER_LITERAL", t_path,
                         f"constant {trig.literal!r} is not a valid {dt}")
        for idref in trig.requires:
            if idref not in value_types:
                _err(diags, "DANGLING_IDREF", t_path,
                     f"require references unknown value id {idref!r}")

    retrieve_counts: dict[str, int] = {}
    for mi, mc in enumerate(profile.medcomps, start=1):
        own_ids = {v.id for v in mc.values}
        own_types = {v.id: v.datatype for v in mc.values}
        for bi, rb in enumerate(mc.retrieves, start=1):
            rb_path = f"/profile/medComp[{mi}]/peers/retrieve[{bi}]"
            retrieve_counts[rb.idref] = retrieve_counts.get(rb.idref, 0) + 1
            if retrieve_counts[rb.idref] == 2:
                _err(diags, "DUP_RETRIEVE", rb_path,
                     f"value id {rb.idref!r} has more than one retrieve binding")
            if rb.idref not in value_types:
                _err(diags, "DANGLING_IDREF", rb_path,
                     f"retrieve references unknown value id {rb.idref!r}")
            elif rb.idref not in own_ids:
                _err(diags, "RETRIEVE_SCOPE", rb_path,
                     f"retrieve for {rb.idref!r} is attached to medcomp {mc.id!r}")
            elif rb.return_datatype != own_types[rb.idref]:
                _err(diags, "RETRIEVE_TYPE_MISMATCH", rb_path,
                     f"return datatype {rb.return_datatype!r} does not match "
                     f"value datatype {own_types[rb.idref]!r}")
            for datatype, _name in rb.params:
                if datatype not in DATATYPES:
                    _err(diags, "BAD_DATATYPE", rb_path,
                         f"unknown param datatype {datatype!r}")

    for mi, mc in enumerate(profile.medcomps, start=1):
        for vi, v in enumerate(mc.values, start=1):
            if retrieve_counts.get(v.id, 0) == 0:
                _err(diags, "MISSING_RETRIEVE", f"/profile/medComp[{mi}]/value[{vi}]",
                     f"value id {v.id!r} has no retrieve binding")

    return diags


def serialize_profile(profile: PatientProfile) -> str:
    """Canonical document for a valid profile.

    Fixed attribute order, 2-space indent, LF endings; peers emitted as a
    trailing sibling block grouped by medcomp. parse(serialize(p)) is
    structurally equal to p. Raises ProfileValidationError when the
    profile has validation errors.
    """
    diags = validate_profile(profile)
    if any(d.severity == "error" for d in diags):
        raise ProfileValidationError(diags)

    w = XmlWriter()
    has_children = bool(
        profile.medcomps or profile.relations or profile.triggers or profile.extensions
        or any(mc.retrieves for mc in profile.medcomps)
    )
    if not has_children:
        w.leaf("profile", [("patient", profile.patient_id)])
        return w.result()

    w.open("profile", [("patient", profile.patient_id)])
    for mc in profile.medcomps:
        attrs = [("id", mc.id)]
        if mc.key is not None:
            attrs.append(("key", mc.key))
        w.open("medComp", attrs)
        w.leaf("name", text=mc.name)
        if mc.state:
            w.leaf("state", text=mc.state)
        if mc.help_text is not None:
            w.leaf("help", text=mc.help_text)
        for v in mc.values:
            w.open("value", [("id", v.id), ("datatype", v.datatype)])
            for d in v.descrips:
                d_attrs = []
                if d.type_tag:
                    d_attrs.append(("type", d.type_tag))
                if d.class_tag:
                    d_attrs.append(("class", d.class_tag))
                w.leaf("descrip", d_attrs, text=d.text)
            if v.min_bound is not None:
                w.leaf("bound", [("type", "min")], text=v.min_bound)
            if v.max_bound is not None:
                w.leaf("bound", [("type", "max")], text=v.max_bound)
            for fragment in v.extensions:
                w.raw(fragment)
            w.close("value")
        for fragment in mc.extensions:
            w.raw(fragment)
        w.close("medComp")
    for rel in profile.relations:
        w.leaf("relation", [("op", rel.op), ("left", rel.left), ("right", rel.right)])
    for trig in profile.triggers:
        t_attrs = [("idref", trig.value_id), ("op", trig.op), ("value", trig.literal)]
        if trig.requires:
            w.open("trigger", t_attrs)
            for idref in trig.requires:
                w.leaf("require", [("idref", idref)])
            w.close("trigger")
        else:
            w.leaf("trigger", t_attrs)
    for fragment in profile.extensions:
        w.raw(fragment)
    if any(mc.retrieves for mc in profile.medcomps):
        w.open("peers")
        for mc in profile.medcomps:
            for rb in mc.retrieves:
                w.open("retrieve", [("idref", rb.idref), ("type", rb.type_tag)])
                w.open("method")
                w.leaf("name", text=rb.method_name)
                for datatype, name in rb.params:
                    w.leaf("param", [("datatype", datatype), ("name", name)])
                w.leaf("return", [("datatype", rb.return_datatype)])
                w.close("method")
                w.close("retrieve")
        w.close("peers")
    w.close("profile")
    return w.result()
