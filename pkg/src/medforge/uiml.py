"""UIML-subset document model, parser, and canonical serializer.

The emitted grammar is fixed: a uiml root holding one interface
(structure, style, behavior sections) followed by a peers block. Style
properties may be written nested inside parts (the template form); they
are hoisted to the flat style section with part-name references, which is
the only form canonical output uses.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

from .model import RetrieveBinding
from .xmlwriter import XmlWriter

WIDGET_CLASSES = ("JFrame", "JPanel", "JLabel", "JTextField", "JTextArea", "JButton")
EVENT_CLASSES = ("actionPerformed",)

ROLE_BY_CLASS = {
    "JFrame": "window",
    "JPanel": "panel",
    "JLabel": "label",
    "JTextField": "text_input",
    "JTextArea": "text_area",
    "JButton": "button",
}


class InvalidDocument(ValueError):
    """Document violates a UiDocument invariant."""


@dataclass(frozen=True)
class Part:
    widget_class: str
    name: str
    children: tuple["Part", ...] = ()
    bound_value_id: str | None = None  # input parts only


@dataclass(frozen=True)
class StyleProperty:
    part_name: str
    name: str
    value: str


@dataclass(frozen=True)
class BehaviorRule:
    event_class: str
    source: str  # part name the event fires on
    actions: tuple[tuple[str, str, str], ...]  # (property, target part, value)


@dataclass(frozen=True)
class UiDocument:
    parts: tuple[Part, ...] = ()  # tree roots; frames only appear here
    styles: tuple[StyleProperty, ...] = ()
    behavior: tuple[BehaviorRule, ...] = ()
    peers: tuple[RetrieveBinding, ...] = ()

    def iter_parts(self):
        """All parts in document order, depth first."""
        stack = list(reversed(self.parts))
        while stack:
            part = stack.pop()
            yield part
            stack.extend(reversed(part.children))


def check_document(doc: UiDocument) -> list[str]:
    """Invariant violations as human-readable strings (empty = valid)."""
    problems: list[str] = []
    names: set[str] = set()
    bound_ids: list[str] = []
    for root in doc.parts:
        if root.widget_class != "JFrame":
            problems.append(f"root part {root.name!r} must be a JFrame")
    for part in doc.iter_parts():
        if part.widget_class not in WIDGET_CLASSES:
            problems.append(f"part {part.name!r} has unknown class {part.widget_class!r}")
        if part.name in names:
            problems.append(f"duplicate part name {part.name!r}")
        names.add(part.name)
        if part.bound_value_id is not None:
            bound_ids.append(part.bound_value_id)
        for child in part.children:
            if child.widget_class == "JFrame":
                problems.append(f"JFrame {child.name!r} may only appear at a tree root")
    for style in doc.styles:
        if style.part_name not in names:
            problems.append(f"style property targets unknown part {style.part_name!r}")
    for rule in doc.behavior:
        if rule.event_class not in EVENT_CLASSES:
            problems.append(f"unknown event class {rule.event_class!r}")
        if rule.source not in names:
            problems.append(f"rule event source {rule.source!r} is not a part")
        for _prop, target, _value in rule.actions:
            if target not in names:
                problems.append(f"rule action targets unknown part {target!r}")
    peer_ids = [rb.idref for rb in doc.peers]
    if sorted(bound_ids) != sorted(set(bound_ids)):
        problems.append("a value id is bound to more than one input part")
    if sorted(peer_ids) != sorted(set(peer_ids)):
        problems.append("a value id appears more than once in peers")
    if set(bound_ids) != set(peer_ids):
        problems.append("input-part value ids and peers value ids differ")
    return problems


def serialize_ui(doc: UiDocument) -> str:
    """Canonical UIML-subset XML; raises InvalidDocument on bad input."""
    problems = check_document(doc)
    if problems:
        raise InvalidDocument("; ".join(problems))

    w = XmlWriter()
    w.open("uiml")
    w.open("interface")
    if doc.parts:
        w.open("structure")
        for root in doc.parts:
            _write_part(w, root)
        w.close("structure")
    else:
        w.leaf("structure")
    if doc.styles:
        w.open("style")
        for s in doc.styles:
            w.leaf("property", [("part-name", s.part_name), ("name", s.name)], text=s.value)
        w.close("style")
    else:
        w.leaf("style")
    if doc.behavior:
        w.open("behavior")
        for rule in doc.behavior:
            w.open("rule")
            w.open("condition")
            w.leaf("event", [("class", rule.event_class), ("part-name", rule.source)])
            w.close("condition")
            w.open("action")
            for prop, target, value in rule.actions:
                w.leaf("property", [("name", prop), ("part-name", target)], text=value)
            w.close("action")
            w.close("rule")
        w.close("behavior")
    else:
        w.leaf("behavior")
    w.close("interface")
    if doc.peers:
        w.open("peers")
        for rb in doc.peers:
            w.open("retrieve", [("idref", rb.idref), ("type", rb.type_tag)])
            w.open("method")
            w.leaf("name", text=rb.method_name)
            for datatype, name in rb.params:
                w.leaf("param", [("datatype", datatype), ("name", name)])
            w.leaf("return", [("datatype", rb.return_datatype)])
            w.close("method")
            w.close("retrieve")
        w.close("peers")
    else:
        w.leaf("peers")
    w.close("uiml")
    return w.result()


def _write_part(w: XmlWriter, part: Part) -> None:
    attrs = [("class", part.widget_class), ("name", part.name)]
    if part.bound_value_id is not None:
        attrs.append(("value-idref", part.bound_value_id))
    if part.children:
        w.open("part", attrs)
        for child in part.children:
            _write_part(w, child)
        w.close("part")
    else:
        w.leaf("part", attrs)


@dataclass
class Fragment:
    """Parsed template output before it is merged into a document."""

    parts: list[Part] = field(default_factory=list)
    styles: list[StyleProperty] = field(default_factory=list)
    rules: list[BehaviorRule] = field(default_factory=list)


def parse_fragment(xml_text: str, origin: str = "fragment") -> Fragment:
    """Parse an instantiated template (root <template> or <uiml>)."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise InvalidDocument(f"{origin}: not well-formed XML: {exc}") from exc
    if root.tag not in ("template", "uiml"):
        raise InvalidDocument(f"{origin}: expected <template> or <uiml> root, got <{root.tag}>")
    frag = Fragment()
    sections = list(root)
    # a uiml document nests sections under <interface>
    if root.tag == "uiml":
        sections = []
        for child in root:
            if child.tag == "interface":
                sections.extend(list(child))
            else:
                sections.append(child)
    for section in sections:
        if section.tag == "structure":
            for part_elem in section:
                if part_elem.tag != "part":
                    raise InvalidDocument(f"{origin}: unexpected <{part_elem.tag}> in structure")
                frag.parts.append(_parse_part(part_elem, frag.styles, origin))
        elif section.tag == "style":
            for prop in section:
                if prop.tag != "property":
                    raise InvalidDocument(f"{origin}: unexpected <{prop.tag}> in style")
                part_name = prop.get("part-name")
                name = prop.get("name")
                if not part_name or not name:
                    raise InvalidDocument(f"{origin}: style property needs part-name and name")
                frag.styles.append(StyleProperty(part_name, name, prop.text or ""))
        elif section.tag == "behavior":
            for rule_elem in section:
                if rule_elem.tag != "rule":
                    raise InvalidDocument(f"{origin}: unexpected <{rule_elem.tag}> in behavior")
                frag.rules.append(_parse_rule(rule_elem, origin))
        elif section.tag == "peers":
            continue  # handled by parse_ui
        else:
            raise InvalidDocument(f"{origin}: unexpected section <{section.tag}>")
    return frag


def _parse_part(elem: ET.Element, styles: list[StyleProperty], origin: str) -> Part:
    widget_class = elem.get("class")
    name = elem.get("name")
    if not widget_class or not name:
        raise InvalidDocument(f"{origin}: part needs class and name attributes")
    children: list[Part] = []
    for child in elem:
        if child.tag == "part":
            children.append(_parse_part(child, styles, origin))
        elif child.tag == "style":
            # nested template form: hoist onto this part
            for prop in child:
                if prop.tag != "property":
                    raise InvalidDocument(f"{origin}: unexpected <{prop.tag}> in style")
                prop_name = prop.get("name")
                if not prop_name:
                    raise InvalidDocument(f"{origin}: style property needs a name")
                styles.append(StyleProperty(prop.get("part-name", name), prop_name,
                                            prop.text or ""))
        else:
            raise InvalidDocument(f"{origin}: unexpected <{child.tag}> inside part")
    return Part(widget_class=widget_class, name=name, children=tuple(children),
                bound_value_id=elem.get("value-idref"))


def _parse_rule(elem: ET.Element, origin: str) -> BehaviorRule:
    event_class = source = None
    actions: list[tuple[str, str, str]] = []
    for child in elem:
        if child.tag == "condition":
            for ev in child:
                if ev.tag != "event":
                    raise InvalidDocument(f"{origin}: unexpected <{ev.tag}> in condition")
                event_class = ev.get("class")
                source = ev.get("part-name")
        elif child.tag == "action":
            for prop in child:
                if prop.tag != "property":
                    raise InvalidDocument(f"{origin}: unexpected <{prop.tag}> in action")
                prop_name = prop.get("name")
                target = prop.get("part-name")
                if not prop_name or not target:
                    raise InvalidDocument(f"{origin}: action property needs name and part-name")
                actions.append((prop_name, target, prop.text or ""))
        else:
            raise InvalidDocument(f"{origin}: unexpected <{child.tag}> in rule")
    if not event_class or not source:
        raise InvalidDocument(f"{origin}: rule requires a condition event")
    return BehaviorRule(event_class=event_class, source=source, actions=tuple(actions))


def parse_ui(xml_text: str | bytes) -> UiDocument:
    """Parse a full uiml document back into a UiDocument.

    Used for round-trip checks and for hand-written documents headed to
    the lowering stage; invariants are NOT enforced here.
    """
    text = xml_text.decode("utf-8") if isinstance(xml_text, bytes) else xml_text
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise InvalidDocument(f"not well-formed XML: {exc}") from exc
    if root.tag != "uiml":
        raise InvalidDocument(f"expected <uiml> root, got <{root.tag}>")
    frag = parse_fragment(text, origin="uiml")
    peers: list[RetrieveBinding] = []
    for child in root:
        if child.tag == "peers":
            from .profile_xml import _parse_peers  # same grammar as profile peers

            diags: list = []
            for binding, _path in _parse_peers(child, "/uiml/peers", diags):
                peers.append(binding)
            errors = [d for d in diags if d.severity == "error"]
            if errors:
                raise InvalidDocument("; ".join(str(d) for d in errors))
    return UiDocument(parts=tuple(frag.parts), styles=tuple(frag.styles),
                      behavior=tuple(frag.rules), peers=tuple(peers))


def graft_children(
    part: Part, container: str, extra: tuple[Part, ...], before: str | None = None
) -> tuple[Part, bool]:
    """Return a copy of `part` with `extra` inserted under `container`.

    Insertion goes before the child named `before` when present, else at
    the end. Second element reports whether the container was found.
    """
    if part.name == container:
        children = list(part.children)
        index = len(children)
        if before is not None:
            for i, child in enumerate(children):
                if child.name == before:
                    index = i
                    break
        children[index:index] = list(extra)
        return replace(part, children=tuple(children)), True
    hit = False
    new_children: list[Part] = []
    for child in part.children:
        if hit:
            new_children.append(child)
            continue
        new_child, found = graft_children(child, container, extra, before)
        new_children.append(new_child)
        hit = found
    if hit:
        return replace(part, children=tuple(new_children)), True
    return part, False
