"""Prewritten UI templates with `{{key}}` slot substitution.

Templates are plain text files holding the static part of the interface;
the compiler fills their slots from the profile. Slot keys are lowercase
snake case. Substituted values are escaped for XML text and attribute
contexts, and `{` is emitted as a character reference so instantiated
output can never re-scan as containing a slot marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

TEMPLATE_SUFFIX = ".uiml.tpl"
REQUIRED_TEMPLATES = ("entity-shell", "help-frame", "app-shell")

_KEY_RE = re.compile(r"[a-z_][a-z0-9_]*")


class TemplateSyntaxError(ValueError):
    """Malformed or unbalanced slot marker in template text."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class MissingSlot(KeyError):
    """Template has a slot the substitution context does not fill."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key


class TemplateSetError(ValueError):
    """A required template is missing from the set."""


def escape_slot_value(value: str) -> str:
    """XML-escape for both text and attribute positions; also neutralizes
    brace pairs so no ctx value can smuggle a slot marker back in."""
    return (
        value.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("{", "&#123;")
    )


@dataclass(frozen=True)
class Template:
    name: str
    raw_text: str
    slots: frozenset[str]
    # alternating ("text", chunk) / ("slot", key) pieces, in document order
    segments: tuple[tuple[str, str], ...]


def load_template(name: str, text: str) -> Template:
    """Scan template text into literal segments and slot keys."""
    segments: list[tuple[str, str]] = []
    slots: set[str] = set()
    pos = 0
    while True:
        start = text.find("{{", pos)
        if start == -1:
            segments.append(("text", text[pos:]))
            break
        segments.append(("text", text[pos:start]))
        m = _KEY_RE.match(text, start + 2)
        if not m:
            raise TemplateSyntaxError(start, "expected a slot key after '{{'")
        key = m.group(0)
        if not text.startswith("}}", m.end()):
            raise TemplateSyntaxError(start, f"slot '{{{{{key}' is not closed with '}}}}'")
        segments.append(("slot", key))
        slots.add(key)
        pos = m.end() + 2
    return Template(name=name, raw_text=text, slots=frozenset(slots),
                    segments=tuple(segments))


def instantiate(template: Template, ctx: dict[str, str]) -> str:
    """Fill every slot from ctx; extra ctx keys are ignored.

    Non-slot text passes through byte-identical; the output never
    contains a residual slot marker.
    """
    out: list[str] = []
    for kind, value in template.segments:
        if kind == "text":
            out.append(value)
        else:
            if value not in ctx:
                raise MissingSlot(value)
            out.append(escape_slot_value(ctx[value]))
    return "".join(out)


@dataclass(frozen=True)
class TemplateSet:
    """Named templates; the compiler requires the three shell members."""

    templates: dict[str, Template]

    def __post_init__(self) -> None:
        missing = [n for n in REQUIRED_TEMPLATES if n not in self.templates]
        if missing:
            raise TemplateSetError(f"missing required template(s): {', '.join(missing)}")

    def __getitem__(self, name: str) -> Template:
        return self.templates[name]


def load_template_dir(path: str | Path) -> TemplateSet:
    """Load every *.uiml.tpl file in a directory."""
    templates: dict[str, Template] = {}
    for file in sorted(Path(path).glob(f"*{TEMPLATE_SUFFIX}")):
        name = file.name[: -len(TEMPLATE_SUFFIX)]
        templates[name] = load_template(name, file.read_text(encoding="utf-8"))
    return TemplateSet(templates)


def load_default_templates() -> TemplateSet:
    """The templates shipped with the package."""
    templates: dict[str, Template] = {}
    root = resources.files("medforge") / "templates"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(TEMPLATE_SUFFIX):
            name = entry.name[: -len(TEMPLATE_SUFFIX)]
            templates[name] = load_template(name, entry.read_text(encoding="utf-8"))
    return TemplateSet(templates)
