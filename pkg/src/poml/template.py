"""Template expansion over the parse tree.

Executes `<let>`, `for`, `if`/`else`, `<include>` and `{{ }}` interpolation,
producing a fully data-resolved tree. Errors never abort the pass: the
offending node is dropped, a diagnostic is recorded, and expansion continues.
"""

from __future__ import annotations

import json
import re
from collections import ChainMap
from dataclasses import dataclass, field

from .diagnostics import ERROR, Diagnostic
from .expressions import ExpressionError, evaluate, is_truthy, stringify
from .parser import Attribute, SourceNode, parse
from .resources import ResourceError

MAX_INCLUDE_DEPTH = 32

_HOLE_RE = re.compile(r"\{\{(.*?)\}\}", re.DOTALL)
_FOR_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s+in\s+(.+)$", re.DOTALL)
_CONTROL_ATTRS = frozenset({"if", "for", "else"})


@dataclass
class _Context:
    loader: object
    base: str
    diagnostics: list[Diagnostic] = field(default_factory=list)
    include_stack: tuple[str, ...] = ()
    depth: int = 0
    span_override: tuple[int, int] | None = None

    def report(self, code: str, message: str, span: tuple[int, int]) -> None:
        if self.span_override is not None:
            span = self.span_override
        self.diagnostics.append(Diagnostic(ERROR, code, message, span))

    def nested(self, base: str, key: str, span: tuple[int, int]) -> "_Context":
        ctx = _Context(self.loader, base, self.diagnostics,
                       self.include_stack + (key,), self.depth + 1,
                       self.span_override or span)
        return ctx


def _attr_obj(element: SourceNode, name: str) -> Attribute | None:
    for a in element.attributes:
        if a.name == name:
            return a
    return None


def _interpolate(raw: str, scope, ctx: _Context, span) -> str | None:
    """Replace {{expr}} holes in an attribute value; None signals failure."""
    failed = False

    def replace(match: re.Match) -> str:
        nonlocal failed
        try:
            return stringify(evaluate(match.group(1), scope))
        except ExpressionError as exc:
            failed = True
            ctx.report("expression-error", str(exc), span)
            return ""

    result = _HOLE_RE.sub(replace, raw)
    return None if failed else result


def _append_text(out: list[SourceNode], node: SourceNode) -> None:
    if out and out[-1].kind == "text":
        prev = out[-1]
        prev.text = (prev.text or "") + (node.text or "")
        prev.span = (prev.span[0], node.span[1])
    else:
        out.append(node)


def _handle_let(element: SourceNode, scope, ctx: _Context) -> None:
    name_attr = _attr_obj(element, "name")
    if name_attr is None or not name_attr.value:
        ctx.report("invalid-let", "let requires a name attribute", element.span)
        return
    name = name_attr.value
    value_attr = _attr_obj(element, "value")
    src_attr = _attr_obj(element, "src")
    if value_attr is not None:
        try:
            value = evaluate(value_attr.value, scope)
        except ExpressionError as exc:
            ctx.report("expression-error", str(exc), value_attr.span)
            return
    elif src_attr is not None:
        src = _interpolate(src_attr.value, scope, ctx, src_attr.span)
        if src is None:
            return
        if ctx.loader is None:
            ctx.report("resource-error",
                       f"no loader available for src {src!r}", src_attr.span)
            return
        try:
            path = ctx.loader.resolve(ctx.base, src)
            payload = ctx.loader.read_text(path)
        except ResourceError as exc:
            ctx.report("resource-error", str(exc), src_attr.span)
            return
        try:
            value = json.loads(payload)
        except ValueError as exc:
            ctx.report("resource-error",
                       f"cannot parse {src!r} as JSON: {exc}", src_attr.span)
            return
    else:
        ctx.report("invalid-let",
                   "let requires a value or src attribute", element.span)
        return
    scope.maps[0][name] = value


def _handle_include(element: SourceNode, scope, ctx: _Context,
                    out: list[SourceNode]) -> None:
    src_attr = _attr_obj(element, "src")
    if src_attr is None or not src_attr.value:
        ctx.report("invalid-include",
                   "include requires a src attribute", element.span)
        return
    src = _interpolate(src_attr.value, scope, ctx, src_attr.span)
    if src is None:
        return
    if ctx.loader is None:
        ctx.report("resource-error",
                   f"no loader available for src {src!r}", src_attr.span)
        return
    try:
        path = ctx.loader.resolve(ctx.base, src)
        payload = ctx.loader.read_text(path)
    except ResourceError as exc:
        ctx.report("resource-error", str(exc), src_attr.span)
        return
    if path in ctx.include_stack or path == ctx.base:
        ctx.report("include-cycle",
                   f"circular include of {src!r}", element.span)
        return
    if ctx.depth >= MAX_INCLUDE_DEPTH:
        ctx.report("include-depth",
                   f"include nesting deeper than {MAX_INCLUDE_DEPTH}",
                   element.span)
        return
    included, parse_diags = parse(payload)
    inner = ctx.nested(path, path, element.span)
    for d in parse_diags:
        inner.diagnostics.append(Diagnostic(
            d.severity, d.code, f"in {src}: {d.message}",
            inner.span_override))
    for node in _expand_children(included.children, scope, inner):
        if node.kind == "text":
            _append_text(out, node)
        else:
            out.append(node)


def _copy_element(element: SourceNode, scope, ctx: _Context) -> SourceNode | None:
    """Interpolate attributes and expand children into a fresh node."""
    attrs: list[Attribute] = []
    for a in element.attributes:
        if a.name in _CONTROL_ATTRS:
            continue
        value = _interpolate(a.value, scope, ctx, a.span)
        if value is None:
            return None
        attrs.append(Attribute(a.name, value, a.span))
    child_scope = scope.new_child()
    children = _expand_children(element.children, child_scope, ctx)
    return SourceNode("element", name=element.name, attributes=attrs,
                      children=children, span=element.span,
                      synthetic=element.synthetic)


def _expand_children(children, scope, ctx: _Context) -> list[SourceNode]:
    out: list[SourceNode] = []
    pending_if: bool | None = None
    for child in children:
        if child.kind == "comment":
            continue
        if child.kind == "text":
            _append_text(out, SourceNode("text", span=child.span, text=child.text))
            continue
        if child.kind == "expression-hole":
            try:
                value = evaluate(child.text or "", scope)
            except ExpressionError as exc:
                ctx.report("expression-error", str(exc), child.span)
                continue
            _append_text(out, SourceNode("text", span=child.span,
                                         text=stringify(value)))
            continue

        element = child
        if element.has_attr("else"):
            if pending_if is None:
                ctx.report("else-without-if",
                           "else with no preceding if at this level",
                           element.span)
                continue
            kept = not pending_if
            pending_if = None
            if not kept:
                continue

        for_attr = _attr_obj(element, "for")
        if_attr = _attr_obj(element, "if")

        if element.name == "let":
            _handle_let(element, scope, ctx)
            continue
        if element.name == "include":
            _handle_include(element, scope, ctx, out)
            continue

        if for_attr is not None:
            m = _FOR_RE.match(for_attr.value)
            if m is None:
                ctx.report("invalid-for",
                           "for must have the form 'name in expression'",
                           for_attr.span)
                continue
            var, expr = m.group(1), m.group(2)
            try:
                items = evaluate(expr, scope)
            except ExpressionError as exc:
                ctx.report("expression-error", str(exc), for_attr.span)
                continue
            if not isinstance(items, list):
                ctx.report("invalid-for",
                           "for expression must yield an array", for_attr.span)
                continue
            length = len(items)
            for index, item in enumerate(items):
                loop_scope = scope.new_child({
                    var: item,
                    "loop": {"index": index, "length": length,
                             "first": index == 0, "last": index == length - 1},
                })
                if if_attr is not None:
                    try:
                        if not is_truthy(evaluate(if_attr.value, loop_scope)):
                            continue
                    except ExpressionError as exc:
                        ctx.report("expression-error", str(exc), if_attr.span)
                        continue
                copy = _copy_element(element, loop_scope, ctx)
                if copy is not None:
                    out.append(copy)
            continue

        if if_attr is not None:
            try:
                verdict = is_truthy(evaluate(if_attr.value, scope))
            except ExpressionError as exc:
                ctx.report("expression-error", str(exc), if_attr.span)
                pending_if = None
                continue
            pending_if = verdict
            if not verdict:
                continue

        copy = _copy_element(element, scope, ctx)
        if copy is not None:
            out.append(copy)
    return out


def expand(root: SourceNode, initial_scope: dict | None = None, loader=None,
           base: str = "<input>") -> tuple[SourceNode, list[Diagnostic]]:
    """Expand templates in a parsed tree.

    Returns a new tree; the input is not modified. Diagnostics from included
    files point at the include element in the original source.
    """
    ctx = _Context(loader, base)
    scope = ChainMap({}, dict(initial_scope or {}))
    attrs = []
    for a in root.attributes:
        value = _interpolate(a.value, scope, ctx, a.span)
        attrs.append(Attribute(a.name, value if value is not None else a.value,
                               a.span))
    children = _expand_children(root.children, scope, ctx)
    expanded = SourceNode("element", name=root.name, attributes=attrs,
                          children=children, span=root.span,
                          synthetic=root.synthetic)
    return expanded, ctx.diagnostics
