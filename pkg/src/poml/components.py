"""Component registry and lowering of styled component trees to IR.

Structural components map directly onto IR kinds. Intention components
become captioned blocks. Data components delegate to the data adapters.
A syntax value that differs from the enclosing environment opens a new
env subtree; json/yaml syntax switches the subtree into serialize mode,
where content is folded into plain data held by an obj node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from . import data
from .diagnostics import ERROR, WARNING, Diagnostic
from .ir import IRNode
from .resources import ResourceError

SPEAKERS = ("human", "ai", "system")
SYNTAXES = ("markdown", "html", "xml", "text", "json", "yaml")
_MARKUP_SYNTAXES = ("markdown", "html", "xml", "text")
_SERIALIZE_SYNTAXES = ("json", "yaml")
_TABLE_SYNTAXES = ("csv", "tsv", "json", "markdown", "html", "xml", "text")
_LIST_STYLES = ("dash", "star", "plus", "decimal", "latin")
_INLINE_COMPONENTS = frozenset({"b", "i", "u", "s", "span", "br", "img"})


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    category: str
    defaults: dict
    allowed: frozenset


_BASE_ATTRS = frozenset({"speaker", "syntax", "className"})
_CAPTION_ATTRS = _BASE_ATTRS | {"caption", "captionStyle",
                                "captionTextTransform", "captionEnding",
                                "blankLine"}


def _spec(name: str, category: str, allowed=_BASE_ATTRS) -> ComponentSpec:
    return ComponentSpec(name, category, {}, frozenset(allowed))


def _intention(name: str, caption: str, style: str = "bold",
               ending: str = "colon", extra_allowed=(),
               extra_defaults: dict | None = None) -> ComponentSpec:
    defaults = {"caption": caption, "captionStyle": style,
                "captionTextTransform": "none", "captionEnding": ending}
    defaults.update(extra_defaults or {})
    return ComponentSpec(name, "intention", defaults,
                         frozenset(_CAPTION_ATTRS | set(extra_allowed)))


COMPONENTS = {spec.name: spec for spec in (
    _spec("poml", "structural"),
    _spec("div", "structural"),
    _spec("p", "structural", _BASE_ATTRS | {"blankLine"}),
    _spec("span", "structural"),
    _spec("b", "structural"),
    _spec("i", "structural"),
    _spec("u", "structural"),
    _spec("s", "structural"),
    _spec("code", "structural", _BASE_ATTRS | {"inline", "lang", "blankLine"}),
    _spec("h", "structural", _BASE_ATTRS | {"level"}),
    _spec("br", "structural"),
    _spec("list", "structural", _BASE_ATTRS | {"listStyle"}),
    _spec("item", "structural"),
    _intention("role", "Role"),
    _intention("task", "Task"),
    _intention("hint", "Hint"),
    _intention("cp", ""),
    _intention("example", "Example", style="hidden"),
    _intention("examples", "Examples", style="hidden",
               extra_allowed=("chat", "introducer"),
               extra_defaults={"chat": "true"}),
    _intention("input", "Input", ending="none"),
    _intention("output", "Output", ending="none"),
    _intention("output-format", "Output Format"),
    _intention("stepwise-instructions", "Stepwise Instructions"),
    _intention("introducer", "Introducer", style="hidden"),
    _spec("table", "data", _BASE_ATTRS | {
        "src", "records", "includeHeader", "includeIndex",
        "selectedRecords", "selectedColumns"}),
    _spec("document", "data", _BASE_ATTRS | {"src", "selectedPages"}),
    _spec("folder", "data", _BASE_ATTRS | {
        "src", "maxDepth", "filter", "showSize"}),
    _spec("img", "data", _BASE_ATTRS | {
        "src", "alt", "base64", "type", "position",
        "maxWidth", "maxHeight"}),
    _spec("conversation", "data", _BASE_ATTRS | {"src", "messages"}),
    _spec("let", "template", _BASE_ATTRS | {"name", "value", "src"}),
    _spec("include", "template", _BASE_ATTRS | {"src"}),
    _spec("stylesheet", "meta"),
)}

ALIASES = {
    "doc": "document",
    "outputformat": "output-format",
    "stepwiseinstructions": "stepwise-instructions",
}

DEFAULTS_BY_COMPONENT = {name: dict(spec.defaults)
                         for name, spec in COMPONENTS.items()}
ALLOWED_ATTRIBUTES = {name: set(spec.allowed)
                      for name, spec in COMPONENTS.items()}
for _alias, _target in ALIASES.items():
    DEFAULTS_BY_COMPONENT[_alias] = dict(COMPONENTS[_target].defaults)
    ALLOWED_ATTRIBUTES[_alias] = set(COMPONENTS[_target].allowed)


def caption_block(caption: str, style: dict, depth: int,
                  stamp: dict | None = None) -> list[IRNode]:
    """Caption nodes for a captioned block. header yields an h at the given
    depth, bold a b node, plain a bare text node, hidden nothing."""
    kind = style.get("captionStyle", "bold")
    if kind == "hidden" or not caption:
        return []
    text = caption
    if style.get("captionTextTransform") == "upper":
        text = text.upper()
    if style.get("captionEnding", "none") == "colon":
        text += ":"
    attrs = dict(stamp or {})
    leaf = IRNode("text", dict(stamp or {}), (), text)
    if kind == "header":
        level = min(max(depth, 1), 6)
        return [IRNode("h", {**attrs, "level": level}, (leaf,))]
    if kind == "plain":
        return [leaf]
    return [IRNode("b", attrs, (leaf,))]


@dataclass
class _Ctx:
    loader: object
    base: str
    diags: list
    speaker_force: str | None = None

    def report(self, severity, code, message, span) -> None:
        self.diags.append(Diagnostic(severity, code, message, span))


def _canonical(name):
    return ALIASES.get(name, name)


def _stamp(node, speaker: str) -> dict:
    return {"speaker": speaker,
            "original-start-index": node.span[0],
            "original-end-index": node.span[1]}


def _speaker(node, parent: str, ctx: _Ctx) -> str:
    if ctx.speaker_force:
        return ctx.speaker_force
    value = node.attrs.get("speaker")
    if value is None:
        return parent
    if value not in SPEAKERS:
        ctx.report(ERROR, "invalid-attribute-value",
                   f"speaker must be one of {', '.join(SPEAKERS)}, "
                   f"got {value!r}", node.span)
        return parent
    return value


def _as_bool(value, default: bool, name: str, node, ctx: _Ctx) -> bool:
    if value is None:
        return default
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s == "true":
        return True
    if s == "false":
        return False
    ctx.report(ERROR, "invalid-attribute-value",
               f"{name} expects true or false, got {value!r}", node.span)
    return default


def _as_int(value, default: int, name: str, node, ctx: _Ctx,
            lo: int | None = None, hi: int | None = None) -> int:
    if value is None:
        return default
    try:
        number = int(str(value).strip())
    except ValueError:
        number = None
    if number is None or (lo is not None and number < lo) \
            or (hi is not None and number > hi):
        ctx.report(ERROR, "invalid-attribute-value",
                   f"{name} got unusable value {value!r}", node.span)
        return default
    return number


def _inline_code(node) -> bool:
    value = node.attrs.get("inline")
    return value is True or str(value).strip().lower() == "true"


def _is_inline(node) -> bool:
    if node.name == "#text":
        return True
    name = _canonical(node.name)
    if name == "code":
        return _inline_code(node)
    return name in _INLINE_COMPONENTS


def _flat_text(node) -> str:
    """Concatenated text content of an element; br contributes a newline."""
    parts: list[str] = []

    def visit(n) -> None:
        if n.name == "#text":
            parts.append(n.text or "")
            return
        if _canonical(n.name) == "br":
            parts.append("\n")
        for child in n.children:
            visit(child)

    for child in node.children:
        visit(child)
    return "".join(parts)


def _trim_run(nodes: list[IRNode]) -> list[IRNode]:
    nodes = list(nodes)
    while nodes and nodes[0].kind == "text" \
            and not (nodes[0].text or "").strip():
        nodes.pop(0)
    while nodes and nodes[-1].kind == "text" \
            and not (nodes[-1].text or "").strip():
        nodes.pop()
    if not nodes:
        return nodes
    if nodes[0].kind == "text" and nodes[0].text:
        nodes[0] = replace(nodes[0], text=nodes[0].text.lstrip())
    if nodes[-1].kind == "text" and nodes[-1].text:
        nodes[-1] = replace(nodes[-1], text=nodes[-1].text.rstrip())
    return nodes


def lower(root, loader=None, base: str = "<input>",
          ) -> tuple[IRNode, list[Diagnostic]]:
    """Lower a styled component tree to a validated IR tree rooted at env."""
    ctx = _Ctx(loader, base, [])
    speaker = _speaker(root, "human", ctx)
    syntax = root.attrs.get("syntax")
    if syntax is not None and syntax not in SYNTAXES:
        ctx.report(ERROR, "invalid-attribute-value",
                   f"syntax must be one of {', '.join(SYNTAXES)}, "
                   f"got {syntax!r}", root.span)
        syntax = None
    stamp = _stamp(root, speaker)
    if syntax in _SERIALIZE_SYNTAXES:
        value = _fold(_value_items(root.children, ctx, speaker))
        obj = IRNode("obj", {**stamp, "data": value}, ())
        attrs = {**stamp, "presentation": "serialize", "serializer": syntax}
        return IRNode("env", attrs, (obj,)), ctx.diags
    attrs = dict(stamp)
    if syntax:
        attrs["presentation"] = "markup"
        attrs["markup-lang"] = syntax
    children = _blocks(root.children, ctx, speaker, 0, syntax)
    return IRNode("env", attrs, tuple(children)), ctx.diags


def _blocks(children, ctx: _Ctx, speaker: str, depth: int,
            env_syntax) -> list[IRNode]:
    """Group a child list into block-level IR: inline runs become implicit
    paragraphs with trimmed edges, whitespace between blocks is dropped."""
    out: list[IRNode] = []
    run: list[IRNode] = []

    def flush() -> None:
        nonlocal run
        nodes, run = _trim_run(run), []
        if not nodes:
            return
        if all(n.kind == "nl" for n in nodes):
            out.extend(nodes)
            return
        attrs = {"speaker": speaker,
                 "original-start-index":
                     nodes[0].attrs["original-start-index"],
                 "original-end-index":
                     nodes[-1].attrs["original-end-index"]}
        out.append(IRNode("p", attrs, tuple(nodes)))

    for child in children:
        if child.name == "#text":
            run.append(IRNode("text", _stamp(child, speaker), (),
                              child.text or ""))
        elif _is_inline(child):
            run.extend(_lower_element(child, ctx, speaker, depth, env_syntax))
        else:
            flush()
            out.extend(_lower_element(child, ctx, speaker, depth, env_syntax))
    flush()
    return out


def _inline_children(element, ctx: _Ctx, speaker: str, depth: int,
                     env_syntax) -> list[IRNode]:
    out: list[IRNode] = []
    for child in element.children:
        if child.name == "#text":
            out.append(IRNode("text", _stamp(child, speaker), (),
                              child.text or ""))
        else:
            out.extend(_lower_element(child, ctx, speaker, depth, env_syntax))
    return out


def _lower_element(child, ctx: _Ctx, parent_speaker: str, depth: int,
                   env_syntax) -> list[IRNode]:
    name = _canonical(child.name)
    spec = COMPONENTS.get(name)
    speaker = _speaker(child, parent_speaker, ctx)
    if spec is None:
        ctx.report(ERROR, "unknown-component",
                   f"unknown component <{child.name}>", child.span)
        body = _blocks(child.children, ctx, speaker, depth, env_syntax)
        if len(body) == 1 and body[0].kind == "p":
            return body
        return [IRNode("p", _stamp(child, speaker), tuple(body))]
    if spec.category == "data":
        return _lower_data(name, child, ctx, speaker, env_syntax)

    syntax = child.attrs.get("syntax")
    if syntax is not None and syntax != env_syntax:
        stamp = _stamp(child, speaker)
        if syntax in _SERIALIZE_SYNTAXES:
            value = _fold(_value_items([child], ctx, speaker))
            obj = IRNode("obj", {**stamp, "data": value}, ())
            return [IRNode("env", {**stamp, "presentation": "serialize",
                                   "serializer": syntax}, (obj,))]
        if syntax in _MARKUP_SYNTAXES:
            inner = _dispatch(name, spec, child, ctx, speaker, depth, syntax)
            return [IRNode("env", {**stamp, "presentation": "markup",
                                   "markup-lang": syntax}, tuple(inner))]
        ctx.report(ERROR, "invalid-attribute-value",
                   f"syntax must be one of {', '.join(SYNTAXES)}, "
                   f"got {syntax!r}", child.span)
    return _dispatch(name, spec, child, ctx, speaker, depth, env_syntax)


def _dispatch(name: str, spec: ComponentSpec, child, ctx: _Ctx, speaker: str,
              depth: int, env_syntax) -> list[IRNode]:
    stamp = _stamp(child, speaker)
    if spec.category == "intention":
        return _lower_captioned(name, child, ctx, speaker, depth, env_syntax)
    if name in ("poml", "div"):
        return _blocks(child.children, ctx, speaker, depth, env_syntax)
    if name == "p":
        attrs = dict(stamp)
        blank = child.attrs.get("blankLine")
        if blank is not None:
            attrs["blank-line"] = _as_bool(blank, True, "blankLine",
                                           child, ctx)
        return [IRNode("p", attrs, tuple(
            _inline_children(child, ctx, speaker, depth, env_syntax)))]
    if name in ("b", "i", "u", "s", "span"):
        return [IRNode(name, stamp, tuple(
            _inline_children(child, ctx, speaker, depth, env_syntax)))]
    if name == "code":
        inline = _as_bool(child.attrs.get("inline"), False, "inline",
                          child, ctx)
        payload = _flat_text(child)
        if not inline:
            payload = payload.strip()
        attrs = {**stamp, "inline": inline}
        if child.attrs.get("lang"):
            attrs["lang"] = str(child.attrs["lang"])
        blank = child.attrs.get("blankLine")
        if blank is not None:
            attrs["blank-line"] = _as_bool(blank, True, "blankLine",
                                           child, ctx)
        return [IRNode("code", attrs, (IRNode("text", stamp, (), payload),))]
    if name == "h":
        level = _as_int(child.attrs.get("level"), min(depth + 1, 6),
                        "level", child, ctx, 1, 6)
        return [IRNode("h", {**stamp, "level": level}, tuple(
            _inline_children(child, ctx, speaker, depth, env_syntax)))]
    if name == "br":
        return [IRNode("nl", {**stamp, "count": 1}, ())]
    if name == "list":
        return [_lower_list(child, ctx, speaker, depth, env_syntax, stamp)]
    if name == "item":
        ctx.report(WARNING, "invalid-structure",
                   "<item> is only meaningful inside <list>", child.span)
        return _blocks(child.children, ctx, speaker, depth, env_syntax)
    return []  # let/include/stylesheet leftovers are consumed upstream


def _lower_list(child, ctx: _Ctx, speaker: str, depth: int, env_syntax,
                stamp: dict) -> IRNode:
    style = child.attrs.get("listStyle", "dash")
    if str(style) not in _LIST_STYLES:
        ctx.report(ERROR, "invalid-attribute-value",
                   f"listStyle must be one of {', '.join(_LIST_STYLES)}, "
                   f"got {style!r}", child.span)
        style = "dash"
    items: list[IRNode] = []
    for sub in child.children:
        if sub.name == "#text":
            if not (sub.text or "").strip():
                continue
            ctx.report(WARNING, "invalid-structure",
                       "list content must live inside <item> elements",
                       sub.span)
            item_stamp = _stamp(sub, speaker)
            text_node = IRNode("text", item_stamp, (), (sub.text or "").strip())
            items.append(IRNode("item", item_stamp,
                                (IRNode("p", item_stamp, (text_node,)),)))
        elif _canonical(sub.name) == "item":
            sub_speaker = _speaker(sub, speaker, ctx)
            items.append(IRNode("item", _stamp(sub, sub_speaker), tuple(
                _blocks(sub.children, ctx, sub_speaker, depth, env_syntax))))
        else:
            ctx.report(WARNING, "invalid-structure",
                       "list content must live inside <item> elements",
                       sub.span)
            body = _lower_element(sub, ctx, speaker, depth, env_syntax)
            items.append(IRNode("item", _stamp(sub, speaker), tuple(body)))
    return IRNode("list", {**stamp, "list-style": str(style)}, tuple(items))


def _caption_style(child, ctx: _Ctx) -> dict:
    style = {}
    for key, options, fallback in (
            ("captionStyle", ("header", "bold", "plain", "hidden"), "bold"),
            ("captionTextTransform", ("none", "upper"), "none"),
            ("captionEnding", ("colon", "none"), "colon")):
        value = child.attrs.get(key)
        if value is not None and value not in options:
            ctx.report(ERROR, "invalid-attribute-value",
                       f"{key} must be one of {', '.join(options)}, "
                       f"got {value!r}", child.span)
            value = fallback
        if value is not None:
            style[key] = value
    return style


def _lower_captioned(name: str, child, ctx: _Ctx, speaker: str, depth: int,
                     env_syntax) -> list[IRNode]:
    stamp = _stamp(child, speaker)
    style = _caption_style(child, ctx)
    caption = str(child.attrs.get("caption", ""))
    visible = style.get("captionStyle", "bold") != "hidden" and caption != ""
    body_depth = depth + 1 if visible else depth
    if name == "examples":
        body = _examples_body(child, ctx, speaker, body_depth, env_syntax)
    else:
        body = _blocks(child.children, ctx, speaker, body_depth, env_syntax)
    caps = caption_block(caption, style, min(depth + 1, 6), stamp)
    if not caps:
        return body
    head = caps[0]
    if head.kind == "h":
        return [head] + body
    if body and body[0].kind == "p":
        first = body[0]
        space = IRNode("text", dict(stamp), (), " ")
        merged = IRNode("p", first.attrs, (head, space) + first.children)
        return [merged] + body[1:]
    return [IRNode("p", dict(stamp), (head,))] + body


def _examples_body(child, ctx: _Ctx, speaker: str, depth: int,
                   env_syntax) -> list[IRNode]:
    stamp = _stamp(child, speaker)
    chat = _as_bool(child.attrs.get("chat"), True, "chat", child, ctx)
    nodes: list[IRNode] = []
    introducer = child.attrs.get("introducer")
    if introducer:
        nodes.append(IRNode("p", dict(stamp),
                            (IRNode("text", dict(stamp), (),
                                    str(introducer)),)))
    for sub in child.children:
        if sub.name == "#text":
            if (sub.text or "").strip():
                text_stamp = _stamp(sub, speaker)
                nodes.append(IRNode("p", text_stamp, (IRNode(
                    "text", text_stamp, (), (sub.text or "").strip()),)))
            continue
        sub_name = _canonical(sub.name)
        if chat and sub_name == "example":
            nodes.extend(_chat_example(sub, ctx, speaker, depth, env_syntax))
        elif chat and sub_name in ("input", "output"):
            forced = "human" if sub_name == "input" else "ai"
            nodes.extend(_forced_body(sub, forced, ctx, depth, env_syntax))
        else:
            nodes.extend(_lower_element(sub, ctx, speaker, depth, env_syntax))
    return nodes


def _chat_example(example, ctx: _Ctx, speaker: str, depth: int,
                  env_syntax) -> list[IRNode]:
    nodes: list[IRNode] = []
    example_speaker = _speaker(example, speaker, ctx)
    for sub in example.children:
        if sub.name == "#text":
            if (sub.text or "").strip():
                text_stamp = _stamp(sub, example_speaker)
                nodes.append(IRNode("p", text_stamp, (IRNode(
                    "text", text_stamp, (), (sub.text or "").strip()),)))
            continue
        name = _canonical(sub.name)
        if name == "input":
            nodes.extend(_forced_body(sub, "human", ctx, depth, env_syntax))
        elif name == "output":
            nodes.extend(_forced_body(sub, "ai", ctx, depth, env_syntax))
        else:
            nodes.extend(_lower_element(sub, ctx, example_speaker, depth,
                                        env_syntax))
    return nodes


def _forced_body(element, speaker: str, ctx: _Ctx, depth: int,
                 env_syntax) -> list[IRNode]:
    previous = ctx.speaker_force
    ctx.speaker_force = speaker
    try:
        return _blocks(element.children, ctx, speaker, depth, env_syntax)
    finally:
        ctx.speaker_force = previous


# -- data component delegation ----------------------------------------------------

def _read_source(child, ctx: _Ctx, attr: str = "src"):
    src = child.attrs.get(attr)
    if not src:
        ctx.report(ERROR, "missing-src",
                   f"<{child.name}> needs a {attr} attribute", child.span)
        return None, None
    src = str(src)
    if ctx.loader is None:
        ctx.report(ERROR, "unreadable-file",
                   f"no loader available for {src!r}", child.span)
        return None, src
    try:
        return ctx.loader.read_text(ctx.loader.resolve(ctx.base, src)), src
    except ResourceError as exc:
        ctx.report(ERROR, "unreadable-file", str(exc), child.span)
        return None, src


def _parse_table(child, ctx: _Ctx):
    records = child.attrs.get("records")
    if records is not None:
        payload = records if isinstance(records, str) else json.dumps(records)
        table, diags = data.parse_table_source(payload, "json",
                                               span=child.span)
    else:
        text, src = _read_source(child, ctx)
        if text is None:
            return None
        table, diags = data.parse_table_source(text, "auto", filename=src,
                                               span=child.span)
    ctx.diags.extend(diags)
    return table


def _column_list(value, ctx: _Ctx, child):
    if value is None:
        return None
    if isinstance(value, list):
        return [str(v) for v in value]
    text = str(value).strip()
    if text.startswith("["):
        try:
            parsed = json.loads(text)
            if isinstance(parsed, list):
                return [str(v) for v in parsed]
        except ValueError:
            pass
        ctx.report(ERROR, "invalid-attribute-value",
                   f"selectedColumns got unusable value {value!r}", child.span)
        return None
    return [part.strip() for part in text.split(",") if part.strip()]


def _lower_table(child, ctx: _Ctx, stamp: dict, env_syntax) -> list[IRNode]:
    table = _parse_table(child, ctx)
    if table is None:
        return []
    syntax = child.attrs.get("syntax")
    if syntax is not None and syntax not in _TABLE_SYNTAXES:
        ctx.report(ERROR, "invalid-attribute-value",
                   f"table syntax must be one of {', '.join(_TABLE_SYNTAXES)}"
                   f", got {syntax!r}", child.span)
        syntax = None
    selected = child.attrs.get("selectedRecords")
    opts = dict(
        include_header=_as_bool(child.attrs.get("includeHeader"), True,
                                "includeHeader", child, ctx),
        include_index=_as_bool(child.attrs.get("includeIndex"), False,
                               "includeIndex", child, ctx),
        selected_records=str(selected) if selected is not None else None,
        selected_columns=_column_list(child.attrs.get("selectedColumns"),
                                      ctx, child),
        stamp=stamp, span=child.span)
    if syntax in ("csv", "tsv", "json"):
        node, diags = data.render_table(table, syntax, **opts)
        ctx.diags.extend(diags)
        return [node]
    node, diags = data.render_table(table, "markdown", **opts)
    ctx.diags.extend(diags)
    table_node = node.children[0]
    if syntax and syntax != env_syntax:
        return [IRNode("env", {**stamp, "presentation": "markup",
                               "markup-lang": syntax}, (table_node,))]
    return [table_node]


def _document_pages(child, ctx: _Ctx) -> list[str]:
    src = child.attrs.get("src")
    if not src:
        ctx.report(ERROR, "missing-src",
                   "<document> needs a src attribute", child.span)
        return []
    if ctx.loader is None:
        ctx.report(ERROR, "unreadable-file",
                   f"no loader available for {src!r}", child.span)
        return []
    try:
        path = ctx.loader.resolve(ctx.base, str(src))
    except ResourceError as exc:
        ctx.report(ERROR, "unreadable-file", str(exc), child.span)
        return []
    pages_attr = child.attrs.get("selectedPages")
    doc, diags = data.read_document(
        path, ctx.loader,
        str(pages_attr) if pages_attr is not None else None, child.span)
    ctx.diags.extend(diags)
    # page edges are file framing, not content
    return [page.strip() for page in doc.pages]


def _scan_folder_for(child, ctx: _Ctx):
    src = child.attrs.get("src")
    if not src:
        ctx.report(ERROR, "missing-src",
                   "<folder> needs a src attribute", child.span)
        return None, False
    if ctx.loader is None:
        ctx.report(ERROR, "unreadable-file",
                   f"no loader available for {src!r}", child.span)
        return None, False
    try:
        path = ctx.loader.resolve(ctx.base, str(src))
    except ResourceError as exc:
        ctx.report(ERROR, "unreadable-file", str(exc), child.span)
        return None, False
    max_depth = _as_int(child.attrs.get("maxDepth"), 3, "maxDepth",
                        child, ctx, lo=1)
    pattern = child.attrs.get("filter")
    tree, diags = data.scan_folder(path, max_depth,
                                   str(pattern) if pattern else None,
                                   ctx.loader, child.span)
    ctx.diags.extend(diags)
    show = _as_bool(child.attrs.get("showSize"), False, "showSize",
                    child, ctx)
    return tree, show


def _folder_syntax(child, ctx: _Ctx) -> str:
    syntax = child.attrs.get("syntax")
    if syntax in (None, "tree", "yaml", "json"):
        return syntax or "tree"
    if syntax in _MARKUP_SYNTAXES:
        return "tree"  # inherited document syntax; tree view still applies
    ctx.report(ERROR, "invalid-attribute-value",
               f"folder syntax must be tree, yaml or json, got {syntax!r}",
               child.span)
    return "tree"


def _conversation_messages(child, ctx: _Ctx):
    raw = child.attrs.get("messages")
    if raw is not None:
        if not isinstance(raw, str):
            return raw
        try:
            return json.loads(raw)
        except ValueError as exc:
            ctx.report(ERROR, "bad-shape",
                       f"conversation JSON does not parse: {exc}", child.span)
            return None
    text, _ = _read_source(child, ctx)
    if text is None:
        return None
    try:
        return json.loads(text)
    except ValueError as exc:
        ctx.report(ERROR, "bad-shape",
                   f"conversation JSON does not parse: {exc}", child.span)
        return None


def _lower_data(name: str, child, ctx: _Ctx, speaker: str,
                env_syntax) -> list[IRNode]:
    stamp = _stamp(child, speaker)
    if name == "table":
        return _lower_table(child, ctx, stamp, env_syntax)
    if name == "document":
        return [IRNode("p", stamp, (IRNode("text", stamp, (), page),))
                for page in _document_pages(child, ctx)]
    if name == "folder":
        tree, show = _scan_folder_for(child, ctx)
        if tree is None:
            return []
        return [data.render_folder(tree, _folder_syntax(child, ctx),
                                   show, stamp)]
    if name == "img":
        node, diags = data.load_image(child.attrs, ctx.loader, ctx.base,
                                      stamp, child.span)
        ctx.diags.extend(diags)
        return [node] if node is not None else []
    if name == "conversation":
        messages = _conversation_messages(child, ctx)
        if messages is None:
            return []
        nodes, diags = data.lower_conversation(messages, stamp, child.span)
        ctx.diags.extend(diags)
        return nodes
    return []


# -- serialize mode -----------------------------------------------------------------

def _fold(items):
    """Fold pair/value entries: all pairs make a dict (duplicate keys
    accumulate into arrays), a single bare value stays scalar."""
    if not items:
        return None
    if all(entry[0] == "pair" for entry in items):
        result: dict = {}
        merged: set = set()
        for _, key, value in items:
            if key in result:
                if key in merged:
                    result[key].append(value)
                else:
                    result[key] = [result[key], value]
                    merged.add(key)
            else:
                result[key] = value
        return result
    out = [({entry[1]: entry[2]} if entry[0] == "pair" else entry[1])
           for entry in items]
    return out[0] if len(out) == 1 else out


def _serialize_captioned(child, ctx: _Ctx, speaker: str):
    style = _caption_style(child, ctx)
    caption = str(child.attrs.get("caption", ""))
    if style.get("captionTextTransform") == "upper":
        caption = caption.upper()
    body = _fold(_value_items(child.children, ctx, speaker))
    if style.get("captionStyle", "bold") == "hidden" or not caption:
        return None, body
    return caption, body


def _value_items(children, ctx: _Ctx, speaker: str) -> list:
    items: list = []
    run_parts: list[str] = []

    def flush() -> None:
        if run_parts:
            text = "".join(run_parts).strip()
            run_parts.clear()
            if text:
                items.append(("value", text))

    for child in children:
        if child.name == "#text":
            run_parts.append(child.text or "")
            continue
        name = _canonical(child.name)
        spec = COMPONENTS.get(name)
        if spec is None:
            ctx.report(ERROR, "unknown-component",
                       f"unknown component <{child.name}>", child.span)
            flush()
            value = _fold(_value_items(child.children, ctx, speaker))
            if value is not None:
                items.append(("value", value))
            continue
        if name == "br":
            run_parts.append("\n")
            continue
        if _is_inline(child) and name != "img":
            run_parts.append(_flat_text(child))
            continue
        flush()
        if spec.category == "intention":
            key, value = _serialize_captioned(child, ctx, speaker)
            if key is not None:
                items.append(("pair", key, value))
            elif value is not None:
                items.append(("value", value))
        elif name in ("p", "h"):
            value = _flat_text(child).strip()
            if value:
                items.append(("value", value))
        elif name in ("poml", "div"):
            items.extend(_value_items(child.children, ctx, speaker))
        elif name == "list":
            array = []
            for sub in child.children:
                if sub.name == "#text":
                    if (sub.text or "").strip():
                        array.append((sub.text or "").strip())
                elif _canonical(sub.name) == "item":
                    array.append(_fold(_value_items(sub.children, ctx,
                                                    speaker)))
                else:
                    array.append(_fold(_value_items([sub], ctx, speaker)))
            items.append(("value", array))
        elif name == "code":
            value = _flat_text(child)
            items.append(("value",
                          value if _inline_code(child) else value.strip()))
        elif name == "table":
            table = _parse_table(child, ctx)
            if table is not None:
                items.append(("value", {"columns": list(table.columns),
                                        "records": [list(r)
                                                    for r in table.records]}))
        elif name == "document":
            pages = _document_pages(child, ctx)
            if pages:
                items.append(("value",
                              pages[0] if len(pages) == 1 else pages))
        elif name == "folder":
            tree, show = _scan_folder_for(child, ctx)
            if tree is not None:
                items.append(("value", data.folder_data(tree, show)))
        elif name == "conversation":
            messages = _conversation_messages(child, ctx)
            if messages is not None:
                items.append(("value", messages))
        elif name == "img":
            ctx.report(ERROR, "unsupported-kind-for-writer",
                       "images cannot be serialized; using alt text",
                       child.span)
            alt = str(child.attrs.get("alt") or "")
            if alt:
                items.append(("value", alt))
        elif name == "item":
            value = _fold(_value_items(child.children, ctx, speaker))
            if value is not None:
                items.append(("value", value))
        # let/include/stylesheet leftovers contribute nothing
    flush()
    return items
