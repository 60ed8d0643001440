"""Canonical XML output helpers.

Both serializers (profile XML and the UIML subset) emit the same shape:
UTF-8, LF line endings, 2-space indent, fixed attribute order supplied by
the caller, self-closed element only when attribute-only.
"""

from __future__ import annotations

from typing import Iterable

XML_DECL = '<?xml version="1.0" encoding="UTF-8"?>'


def escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def escape_attr(text: str) -> str:
    return escape_text(text).replace('"', "&quot;")


def format_attrs(attrs: Iterable[tuple[str, str]]) -> str:
    return "".join(f' {k}="{escape_attr(v)}"' for k, v in attrs)


class XmlWriter:
    """Line-oriented writer; callers drive nesting explicitly."""

    def __init__(self) -> None:
        self._lines: list[str] = [XML_DECL]
        self._depth = 0

    def _indent(self) -> str:
        return "  " * self._depth

    def open(self, tag: str, attrs: Iterable[tuple[str, str]] = ()) -> None:
        self._lines.append(f"{self._indent()}<{tag}{format_attrs(attrs)}>")
        self._depth += 1

    def close(self, tag: str) -> None:
        self._depth -= 1
        self._lines.append(f"{self._indent()}</{tag}>")

    def leaf(
        self,
        tag: str,
        attrs: Iterable[tuple[str, str]] = (),
        text: str | None = None,
    ) -> None:
        head = f"{self._indent()}<{tag}{format_attrs(attrs)}"
        if text is None:
            self._lines.append(head + "/>")
        else:
            self._lines.append(f"{head}>{escape_text(text)}</{tag}>")

    def raw(self, fragment: str) -> None:
        """Emit a pre-serialized fragment verbatim on its own line."""
        self._lines.append(f"{self._indent()}{fragment}")

    def result(self) -> str:
        return "\n".join(self._lines) + "\n"
