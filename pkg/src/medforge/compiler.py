"""Compile a patient profile plus a template set into one UI document.

Per medcomp the compiler instantiates the entity shell, appends one label
and one input part per value, adds a help button, and instantiates the
help frame; everything lands inside the app shell, which contributes the
Submit button. The result can be serialized to the UIML subset or lowered
to the renderer-neutral widget tree the patient console consumes
(docs/widget-tree.md).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import PatientProfile, assign_entity_keys, substitution_context
from .profile_xml import ProfileValidationError, validate_profile
from .template_engine import TemplateSet, instantiate
from .typed_values import parse_payload, payload_to_json
from .uiml import (
    ROLE_BY_CLASS,
    BehaviorRule,
    Part,
    StyleProperty,
    UiDocument,
    graft_children,
    parse_fragment,
)

APP_CONTAINER = "AppMainPanel"
SUBMIT_BUTTON = "SubmitButton"


class CompileError(RuntimeError):
    """Template contract violation or internal consistency failure."""


class LoweringError(ValueError):
    """Document contains a widget class outside the closed vocabulary."""


def compile_profile(profile: PatientProfile, templates: TemplateSet) -> UiDocument:
    """Build the complete interface document for a valid profile.

    Deterministic: equal profiles compile to identical documents. Raises
    ProfileValidationError when the profile has errors and CompileError
    when a template breaks its contract (missing container part,
    duplicate part name).
    """
    diags = validate_profile(profile)
    if any(d.severity == "error" for d in diags):
        raise ProfileValidationError(diags)

    keys = assign_entity_keys(profile)

    app_ctx = {"title": f"Medical Data Entry ({profile.patient_id})"}
    app = parse_fragment(instantiate(templates["app-shell"], app_ctx), "app-shell")
    if len(app.parts) != 1:
        raise CompileError("app-shell template must define exactly one root part")
    app_root = app.parts[0]
    styles: list[StyleProperty] = list(app.styles)
    rules: list[BehaviorRule] = list(app.rules)
    help_roots: list[Part] = []

    for mc in profile.medcomps:
        key = keys[mc.id]
        ctx = substitution_context(mc, key)

        entity = parse_fragment(instantiate(templates["entity-shell"], ctx), "entity-shell")
        if len(entity.parts) != 1:
            raise CompileError("entity-shell template must define exactly one root part")
        panel_root = entity.parts[0]

        row_parts: list[Part] = []
        for v in mc.values:
            label_name = f"{key}_{v.id}Label"
            input_name = f"{key}_{v.id}"
            row_parts.append(Part("JLabel", label_name))
            styles.append(StyleProperty(label_name, "text", v.label()))
            row_parts.append(Part("JTextField", input_name, bound_value_id=v.id))
        help_button = f"{key}HelpButton"
        row_parts.append(Part("JButton", help_button))
        styles.append(StyleProperty(help_button, "text", "Help"))

        panel_root, found = graft_children(panel_root, f"{key}Panel", tuple(row_parts))
        if not found:
            raise CompileError(f"entity-shell template defines no part named {key}Panel")
        styles.extend(entity.styles)
        rules.append(BehaviorRule("actionPerformed", help_button,
                                  (("visible", f"{key}HelpFrame", "true"),)))

        help_frame = parse_fragment(instantiate(templates["help-frame"], ctx), "help-frame")
        if len(help_frame.parts) != 1:
            raise CompileError("help-frame template must define exactly one root part")
        help_roots.append(help_frame.parts[0])
        styles.extend(help_frame.styles)
        rules.extend(help_frame.rules)

        app_root, found = graft_children(app_root, APP_CONTAINER, (panel_root,),
                                         before=SUBMIT_BUTTON)
        if not found:
            raise CompileError(f"app-shell template defines no part named {APP_CONTAINER}")

    peers = tuple(rb for mc in profile.medcomps for rb in mc.retrieves)
    doc = UiDocument(parts=(app_root, *help_roots), styles=tuple(styles),
                     behavior=tuple(rules), peers=peers)

    # key uniqueness makes derived names unique; a collision here means a
    # pathological profile defeated the naming scheme
    seen: set[str] = set()
    for part in doc.iter_parts():
        if part.name in seen:
            raise CompileError(f"internal error: duplicate derived part name {part.name!r}")
        seen.add(part.name)
    return doc


@dataclass(frozen=True)
class InputDescriptor:
    value_id: str
    datatype: str
    min: object | None = None  # raw literal for time, number otherwise
    max: object | None = None


@dataclass(frozen=True)
class WidgetNode:
    role: str
    name: str
    children: tuple["WidgetNode", ...] = ()
    text: str | None = None
    visible: bool | None = None  # windows only
    input: InputDescriptor | None = None
    rules: tuple[BehaviorRule, ...] = ()


@dataclass(frozen=True)
class TriggerDescriptor:
    value_id: str
    op: str
    literal: str
    show: tuple[str, ...]


@dataclass(frozen=True)
class WidgetTree:
    version: int
    roots: tuple[WidgetNode, ...]
    triggers: tuple[TriggerDescriptor, ...] = ()
    relations: tuple[tuple[str, str, str], ...] = ()  # (op, left, right)


def lower_to_widget_tree(doc: UiDocument, profile: PatientProfile) -> WidgetTree:
    """Map the UIML document onto abstract widget roles.

    Inputs carry their value's datatype and bounds; behavior rules ride
    on their event-source node; profile triggers become conditional
    visibility descriptors. Raises LoweringError on a widget class
    outside the closed vocabulary (reachable for hand-written documents).
    """
    style_map: dict[tuple[str, str], str] = {}
    for s in doc.styles:
        style_map.setdefault((s.part_name, s.name), s.value)
    rules_by_source: dict[str, list[BehaviorRule]] = {}
    for rule in doc.behavior:
        rules_by_source.setdefault(rule.source, []).append(rule)
    values = profile.value_index()

    def lower_part(part: Part) -> WidgetNode:
        role = ROLE_BY_CLASS.get(part.widget_class)
        if role is None:
            raise LoweringError(f"no role for widget class {part.widget_class!r}")
        text = style_map.get((part.name, "text"))
        visible = None
        if role == "window":
            text = style_map.get((part.name, "title"), text)
            visible = style_map.get((part.name, "visible"), "true") != "false"
        if role == "panel" and text is None:
            text = style_map.get((part.name, "title"))
        descriptor = None
        if part.bound_value_id is not None:
            spec = values.get(part.bound_value_id)
            if spec is None:
                raise LoweringError(f"input {part.name!r} binds unknown value id "
                                    f"{part.bound_value_id!r}")
            descriptor = InputDescriptor(
                value_id=spec.id,
                datatype=spec.datatype,
                min=_bound_json(spec.datatype, spec.min_bound),
                max=_bound_json(spec.datatype, spec.max_bound),
            )
        return WidgetNode(
            role=role,
            name=part.name,
            children=tuple(lower_part(c) for c in part.children),
            text=text,
            visible=visible,
            input=descriptor,
            rules=tuple(rules_by_source.get(part.name, ())),
        )

    triggers = tuple(
        TriggerDescriptor(t.value_id, t.op, t.literal, t.requires) for t in profile.triggers
    )
    relations = tuple((r.op, r.left, r.right) for r in profile.relations)
    return WidgetTree(
        version=profile.version,
        roots=tuple(lower_part(root) for root in doc.parts),
        triggers=triggers,
        relations=relations,
    )


def _bound_json(datatype: str, literal: str | None):
    if literal is None:
        return None
    if datatype in ("integer", "decimal"):
        return payload_to_json(parse_payload(literal, datatype))
    return literal.strip()


def widget_tree_to_json(tree: WidgetTree) -> dict:
    """The exact wire object served as format=widget-json."""

    def node_json(node: WidgetNode) -> dict:
        out: dict = {"role": node.role, "name": node.name,
                     "children": [node_json(c) for c in node.children]}
        if node.text is not None:
            out["text"] = node.text
        if node.visible is not None:
            out["visible"] = node.visible
        if node.input is not None:
            inp: dict = {"value_id": node.input.value_id, "datatype": node.input.datatype}
            if node.input.min is not None:
                inp["min"] = node.input.min
            if node.input.max is not None:
                inp["max"] = node.input.max
            out["input"] = inp
        out["rules"] = [
            {
                "event": rule.event_class,
                "actions": [
                    {"property": prop, "target": target, "value": value}
                    for prop, target, value in rule.actions
                ],
            }
            for rule in node.rules
        ]
        return out

    return {
        "version": tree.version,
        "roots": [node_json(r) for r in tree.roots],
        "triggers": [
            {"value_id": t.value_id, "op": t.op, "literal": t.literal, "show": list(t.show)}
            for t in tree.triggers
        ],
        "relations": [
            {"op": op, "left": left, "right": right} for op, left, right in tree.relations
        ],
    }
