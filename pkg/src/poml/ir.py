"""Typed intermediate representation: the contract between lowering and writers.

21 node kinds with kebab-case attributes, a validator, and a canonical JSON
serialization (sorted keys, no insignificant whitespace) so that byte equality
of serialized forms coincides with structural equality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .diagnostics import ERROR, Diagnostic

KINDS = frozenset({
    "any", "b", "code", "env", "h", "i", "img", "item", "list", "nl",
    "obj", "p", "s", "span", "table", "tbody", "tcell", "text", "thead",
    "trow", "u",
})

SPEAKERS = ("human", "ai", "system")
LIST_STYLES = ("dash", "star", "plus", "decimal", "latin")
PRESENTATIONS = ("markup", "serialize", "free", "multimedia")
MARKUP_LANGS = ("markdown", "html", "xml", "text")
SERIALIZERS = ("json", "yaml")
IMG_POSITIONS = ("here", "top", "bottom")
MEDIA_TYPES = ("image/png", "image/jpeg")
ANY_TYPES = (
    "string", "integer", "float", "boolean", "array", "object",
    "buffer", "null", "undefined",
)


@dataclass(frozen=True)
class IRNode:
    """Immutable IR node. `text` carries the payload for kind "text" only."""

    kind: str
    attrs: dict[str, Any] = field(default_factory=dict)
    children: tuple["IRNode", ...] = ()
    text: str | None = None


def node(kind: str, *children: IRNode, text: str | None = None, **attrs: Any) -> IRNode:
    """Build a node; snake_case keyword names become kebab-case attributes."""
    named = {key.replace("_", "-"): value for key, value in attrs.items()}
    return IRNode(kind=kind, attrs=named, children=tuple(children), text=text)


def text(payload: str, **attrs: Any) -> IRNode:
    named = {key.replace("_", "-"): value for key, value in attrs.items()}
    return IRNode(kind="text", attrs=named, text=payload)


class IRError(ValueError):
    """Raised by deserialize_ir; code is one of malformed-json, unknown-kind,
    invariant-violation."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _is_bool(v: Any) -> bool:
    return isinstance(v, bool)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_str(v: Any) -> bool:
    return isinstance(v, str)


def _is_json_value(v: Any) -> bool:
    if v is None or isinstance(v, (bool, int, float, str)):
        return True
    if isinstance(v, list):
        return all(_is_json_value(item) for item in v)
    if isinstance(v, dict):
        return all(isinstance(k, str) and _is_json_value(val) for k, val in v.items())
    return False


def _enum(*choices: str):
    return lambda v: isinstance(v, str) and v in choices


_UNIVERSAL_ATTRS = {
    "speaker": _enum(*SPEAKERS),
    "original-start-index": lambda v: _is_int(v) and v >= 0,
    "original-end-index": lambda v: _is_int(v) and v >= 0,
}

_KIND_ATTRS: dict[str, dict[str, Any]] = {
    "any": {"type": _enum(*ANY_TYPES), "name": _is_str, "data": _is_json_value},
    "code": {"inline": _is_bool, "lang": _is_str, "blank-line": _is_bool},
    "env": {
        "presentation": _enum(*PRESENTATIONS),
        "markup-lang": _enum(*MARKUP_LANGS),
        "serializer": _enum(*SERIALIZERS),
        "writer-options": lambda v: isinstance(v, dict) and _is_json_value(v),
    },
    "h": {"level": lambda v: _is_int(v) and 1 <= v <= 6},
    "img": {
        "base64": _is_str,
        "alt": _is_str,
        "position": _enum(*IMG_POSITIONS),
        "type": _enum(*MEDIA_TYPES),
        # advisory pixel bounds recorded by the image adapter, never applied
        "max-width": lambda v: _is_int(v) and v > 0,
        "max-height": lambda v: _is_int(v) and v > 0,
    },
    "list": {"list-style": _enum(*LIST_STYLES)},
    "nl": {"count": lambda v: _is_int(v) and v >= 1},
    "obj": {"data": _is_json_value},
    "p": {"blank-line": _is_bool},
}

# child-kind restrictions enforced downward
_CHILD_KINDS = {
    "table": frozenset({"thead", "tbody"}),
    "thead": frozenset({"trow"}),
    "tbody": frozenset({"trow"}),
    "trow": frozenset({"tcell"}),
}


def validate(root: IRNode) -> list[Diagnostic]:
    """One diagnostic per invariant violation; empty list means valid."""
    out: list[Diagnostic] = []

    def problem(n: IRNode, message: str) -> None:
        start = n.attrs.get("original-start-index", 0)
        end = n.attrs.get("original-end-index", start)
        if not (_is_int(start) and _is_int(end)):
            start, end = 0, 0
        out.append(Diagnostic(ERROR, "invalid-ir", message, (start, end)))

    def walk(n: IRNode, parent_kind: str | None) -> None:
        if not isinstance(n, IRNode):
            problem(root, f"child is not an IR node: {n!r}")
            return
        if n.kind not in KINDS:
            problem(n, f"unknown IR kind {n.kind!r}")
            return
        allowed = _KIND_ATTRS.get(n.kind, {})
        for name, value in n.attrs.items():
            check = allowed.get(name) or _UNIVERSAL_ATTRS.get(name)
            if check is None:
                problem(n, f"attribute {name!r} not allowed on kind {n.kind!r}")
            elif not check(value):
                problem(n, f"bad value {value!r} for attribute {name!r} on {n.kind!r}")
        start = n.attrs.get("original-start-index")
        end = n.attrs.get("original-end-index")
        if _is_int(start) and _is_int(end) and start > end:
            problem(n, "original-start-index exceeds original-end-index")
        if n.kind == "text":
            if not isinstance(n.text, str):
                problem(n, "text node requires a string payload")
            if n.children:
                problem(n, "text node cannot have children")
        elif n.text is not None:
            problem(n, f"kind {n.kind!r} cannot carry a text payload")
        if n.kind == "item" and parent_kind != "list":
            problem(n, "item node only allowed under list")
        restrict = _CHILD_KINDS.get(n.kind)
        for child in n.children:
            if restrict is not None and isinstance(child, IRNode) and child.kind not in restrict:
                problem(child, f"kind {child.kind!r} not allowed under {n.kind!r}")
            walk(child, n.kind)

    walk(root, None)
    return out


def _to_jsonable(n: IRNode) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": n.kind}
    if n.attrs:
        out["attrs"] = n.attrs
    if n.text is not None:
        out["text"] = n.text
    if n.children:
        out["children"] = [_to_jsonable(c) for c in n.children]
    return out


def serialize_ir(n: IRNode) -> str:
    return json.dumps(_to_jsonable(n), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _from_jsonable(value: Any) -> IRNode:
    if not isinstance(value, dict):
        raise IRError("malformed-json", f"IR node must be an object, got {type(value).__name__}")
    kind = value.get("kind")
    if not isinstance(kind, str):
        raise IRError("malformed-json", "IR node missing string 'kind'")
    if kind not in KINDS:
        raise IRError("unknown-kind", f"unknown IR kind {kind!r}")
    unknown = set(value) - {"kind", "attrs", "text", "children"}
    if unknown:
        raise IRError("malformed-json", f"unexpected keys {sorted(unknown)}")
    attrs = value.get("attrs", {})
    if not isinstance(attrs, dict):
        raise IRError("malformed-json", "'attrs' must be an object")
    children = value.get("children", [])
    if not isinstance(children, list):
        raise IRError("malformed-json", "'children' must be an array")
    text_payload = value.get("text")
    if text_payload is not None and not isinstance(text_payload, str):
        raise IRError("malformed-json", "'text' must be a string")
    return IRNode(
        kind=kind,
        attrs=dict(attrs),
        children=tuple(_from_jsonable(c) for c in children),
        text=text_payload,
    )


def deserialize_ir(payload: str) -> IRNode:
    try:
        raw = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise IRError("malformed-json", f"not valid JSON: {exc}") from exc
    root = _from_jsonable(raw)
    problems = validate(root)
    if problems:
        raise IRError("invariant-violation", problems[0].message)
    return root
