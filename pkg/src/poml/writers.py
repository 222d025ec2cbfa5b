"""Writers: turn validated IR into markdown, plain text, HTML, XML, or
serialized data, and split documents into speaker-partitioned messages.

Dialect switching happens at env nodes: each env renders its subtree with its
own markup language or serializer and the result is spliced into the parent
output as one block. Markdown and plain text share the same line-oriented
layout engine; HTML and XML share the tag machinery.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

import yaml

from .diagnostics import WARNING, Diagnostic
from .ir import IRNode

_CONTROL = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")

_MD_WRAP = {"b": "**", "i": "*", "u": "__", "s": "~~", "span": ""}

_LIST_TIGHT_KINDS = ("markdown", "text")

# attrs stamped on every node; structural output never repeats them
_STAMP_ATTRS = {"speaker", "original-start-index", "original-end-index"}


def write(root: IRNode, options: dict | None = None) -> tuple[str, list[Diagnostic]]:
    """Render IR to text in the requested format.

    Recognized options: markup-lang (markdown|html|xml|text, default
    markdown), serializer (json|yaml), pretty (default True). An env node's
    own attributes win over options for its subtree.
    """
    opts = _merge_options(options)
    diags: list[Diagnostic] = []
    body = _render_document(root, opts, diags)
    return _normalize(body), diags


def _merge_options(options: dict | None) -> dict:
    opts = {"markup-lang": "markdown", "pretty": True}
    for key, value in (options or {}).items():
        if value is not None:
            opts[key] = value
    return opts


def _normalize(s: str) -> str:
    return _CONTROL.sub("", s).rstrip("\n") + "\n"


def _render_document(node: IRNode, opts: dict, diags: list) -> str:
    if node.kind != "env":
        return _blocks([node], opts.get("markup-lang", "markdown"), opts, diags)
    sub = dict(opts)
    wo = node.attrs.get("writer-options")
    if isinstance(wo, dict):
        sub.update(wo)
    presentation = node.attrs.get("presentation")
    if presentation == "serialize" or node.attrs.get("serializer"):
        serializer = node.attrs.get("serializer") or sub.get("serializer") or "json"
        return _write_serialized(node.children, serializer, sub, diags)
    if presentation in ("free", "multimedia"):
        lang = "text"
    else:
        lang = node.attrs.get("markup-lang") or sub.get("markup-lang", "markdown")
    return _blocks(node.children, lang, sub, diags)


# -- block layout -----------------------------------------------------------------


def _blocks(children, lang: str, opts: dict, diags: list, tight: bool = False) -> str:
    if lang in ("html", "xml"):
        pretty = opts.get("pretty", True)
        render = _html_block if lang == "html" else _xml_block
        rendered = [s for s in (render(c, opts, diags, 0) for c in children) if s]
        return ("\n" if pretty else "").join(rendered)

    parts: list[str] = []
    prev: IRNode | None = None
    pending_nl: int | None = None
    for child in children:
        if child.kind == "nl":
            pending_nl = (pending_nl or 0) + int(child.attrs.get("count", 1))
            continue
        s = _md_block(child, lang, opts, diags)
        if not s:
            continue
        if parts:
            if pending_nl is not None:
                parts.append("\n" * pending_nl)
            else:
                parts.append(_gap(prev, child, tight))
        elif pending_nl:
            parts.append("\n" * pending_nl)
        parts.append(s)
        prev = child
        pending_nl = None
    if pending_nl and parts:
        parts.append("\n" * pending_nl)
    return "".join(parts)


def _gap(prev: IRNode | None, cur: IRNode, tight: bool) -> str:
    if tight:
        return "\n"
    if prev is not None and prev.attrs.get("blank-line") is False:
        return "\n"
    if cur.attrs.get("blank-line") is False:
        return "\n"
    return "\n\n"


def _flat_text(node: IRNode) -> str:
    if node.kind == "text":
        return node.text or ""
    if node.kind == "nl":
        return "\n" * int(node.attrs.get("count", 1))
    return "".join(_flat_text(c) for c in node.children)


# -- markdown and plain text ------------------------------------------------------


def _md_block(node: IRNode, lang: str, opts: dict, diags: list) -> str:
    kind = node.kind
    if kind == "env":
        return _render_document(node, {**opts, "markup-lang": lang}, diags)
    if kind == "p":
        return _inline(node.children, lang, opts, diags)
    if kind == "h":
        content = _inline(node.children, lang, opts, diags)
        if lang == "text":
            return content
        return "#" * int(node.attrs.get("level", 1)) + " " + content
    if kind == "code" and not node.attrs.get("inline"):
        body = _flat_text(node)
        if lang == "text":
            return body
        return f"```{node.attrs.get('lang', '')}\n{body}\n```"
    if kind == "list":
        return _md_list(node, lang, opts, diags)
    if kind == "table":
        return _md_table(node, lang, opts, diags)
    if kind in ("obj", "any"):
        return json.dumps(node.attrs.get("data"), indent=2, ensure_ascii=False)
    if kind in ("thead", "tbody", "trow", "item"):
        return _blocks(node.children, lang, opts, diags)
    return _inline([node], lang, opts, diags)


def _marker(style: str, index: int) -> str:
    if style == "decimal":
        return f"{index + 1}. "
    if style == "latin":
        letter = chr(ord("a") + index % 26) * (index // 26 + 1)
        return f"{letter}. "
    return {"star": "* ", "plus": "+ "}.get(style, "- ")


def _md_list(node: IRNode, lang: str, opts: dict, diags: list) -> str:
    style = node.attrs.get("list-style", "dash")
    lines = []
    index = 0
    for child in node.children:
        if child.kind != "item":
            body = _md_block(child, lang, opts, diags)
            if body:
                lines.append(body)
            continue
        marker = _marker(style, index)
        index += 1
        body = _blocks(child.children, lang, opts, diags, tight=True)
        pad = " " * len(marker)
        first, *rest = body.split("\n")
        item_lines = [marker + first]
        item_lines.extend(pad + line if line else line for line in rest)
        lines.append("\n".join(item_lines))
    return "\n".join(lines)


def _md_table(node: IRNode, lang: str, opts: dict, diags: list) -> str:
    lines = []
    for section in node.children:
        if section.kind not in ("thead", "tbody"):
            continue
        for row in section.children:
            if row.kind != "trow":
                continue
            cells = [
                _escape_md_cell(_inline(cell.children, lang, opts, diags))
                for cell in row.children
                if cell.kind == "tcell"
            ]
            lines.append("| " + " | ".join(cells) + " |")
            if section.kind == "thead":
                lines.append("| " + " | ".join(["---"] * len(cells)) + " |")
    return "\n".join(lines)


def _escape_md_cell(s: str) -> str:
    s = s.replace("\\", "\\\\")
    s = s.replace("&", "&amp;")
    s = s.replace("<", "&lt;")
    s = s.replace("|", "\\|")
    return s.replace("\n", "<br>")


# -- inline content ---------------------------------------------------------------


def _inline(nodes, lang: str, opts: dict, diags: list) -> str:
    return "".join(_inline_one(n, lang, opts, diags) for n in nodes)


def _inline_one(node: IRNode, lang: str, opts: dict, diags: list) -> str:
    kind = node.kind
    if kind == "text":
        payload = node.text or ""
        if lang in ("html", "xml"):
            return _escape_markup(payload)
        return payload
    if kind == "nl":
        count = int(node.attrs.get("count", 1))
        if lang == "html":
            return "<br/>" * count
        if lang == "xml":
            return f'<nl count="{count}"/>'
        return "\n" * count
    if kind == "img":
        return _img(node, lang)
    if kind == "code" and node.attrs.get("inline"):
        body = _flat_text(node)
        if lang == "markdown":
            return f"`{body}`"
        if lang == "text":
            return body
        if lang == "html":
            return f"<code>{_escape_markup(body)}</code>"
        return f"<code{_xml_attr_string(node)}>{_escape_markup(body)}</code>"
    if kind in _MD_WRAP:
        inner = _inline(node.children, lang, opts, diags)
        if lang == "markdown":
            wrap = _MD_WRAP[kind]
            return f"{wrap}{inner}{wrap}"
        if lang == "text":
            return inner
        attrs = _xml_attr_string(node) if lang == "xml" else ""
        return f"<{kind}{attrs}>{inner}</{kind}>"
    # block node in inline position: render it standalone
    if lang == "html":
        return _html_block(node, opts, diags, 0)
    if lang == "xml":
        return _xml_block(node, opts, diags, 0)
    return _md_block(node, lang, opts, diags)


def _img(node: IRNode, lang: str) -> str:
    alt = node.attrs.get("alt", "")
    if lang == "html":
        media = node.attrs.get("type", "image/png")
        src = f"data:{media};base64,{node.attrs.get('base64', '')}"
        return f'<img src="{_escape_attr(src)}" alt="{_escape_attr(alt)}"/>'
    if lang == "xml":
        return f"<img{_xml_attr_string(node)}/>"
    return f"![{alt}]"


# -- HTML -------------------------------------------------------------------------


def _escape_markup(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(s: str) -> str:
    return _escape_markup(s).replace('"', "&quot;").replace("'", "&#39;")


def _html_block(node: IRNode, opts: dict, diags: list, depth: int) -> str:
    pretty = opts.get("pretty", True)
    pad = "  " * depth if pretty else ""
    joiner = "\n" if pretty else ""
    kind = node.kind
    if kind == "env":
        return _render_document(node, {**opts, "markup-lang": "html"}, diags).rstrip("\n")
    if kind == "p":
        return pad + "<p>" + _inline(node.children, "html", opts, diags) + "</p>"
    if kind == "h":
        level = int(node.attrs.get("level", 1))
        content = _inline(node.children, "html", opts, diags)
        return pad + f"<h{level}>{content}</h{level}>"
    if kind == "code" and not node.attrs.get("inline"):
        body = _escape_markup(_flat_text(node))
        lang_attr = node.attrs.get("lang")
        cls = f' class="language-{_escape_attr(str(lang_attr))}"' if lang_attr else ""
        return pad + f"<pre><code{cls}>{body}</code></pre>"
    if kind == "list":
        style = node.attrs.get("list-style", "dash")
        if style in ("dash", "star", "plus"):
            tag, extra = "ul", ""
        else:
            tag, extra = "ol", ' type="a"' if style == "latin" else ""
        lines = [pad + f"<{tag}{extra}>"]
        lines.extend(_html_item(c, opts, diags, depth + 1) for c in node.children)
        lines.append(pad + f"</{tag}>")
        return joiner.join(lines)
    if kind == "table":
        return _html_table(node, opts, diags, depth)
    if kind == "nl":
        return pad + "<br/>" * int(node.attrs.get("count", 1))
    if kind in ("obj", "any"):
        body = json.dumps(node.attrs.get("data"), ensure_ascii=False,
                          indent=2 if pretty else None)
        return pad + "<pre>" + _escape_markup(body) + "</pre>"
    if kind == "img":
        return pad + _img(node, "html")
    if kind in ("thead", "tbody", "trow", "tcell", "item"):
        return joiner.join(
            s for s in (_html_block(c, opts, diags, depth) for c in node.children) if s)
    return pad + _inline_one(node, "html", opts, diags)


def _html_item(item: IRNode, opts: dict, diags: list, depth: int) -> str:
    pretty = opts.get("pretty", True)
    pad = "  " * depth if pretty else ""
    if item.kind != "item":
        return _html_block(item, opts, diags, depth)
    children = item.children
    if len(children) == 1 and children[0].kind == "p":
        content = _inline(children[0].children, "html", opts, diags)
        return pad + f"<li>{content}</li>"
    lines = [pad + "<li>"]
    lines.extend(_html_block(c, opts, diags, depth + 1) for c in children)
    lines.append(pad + "</li>")
    return ("\n" if pretty else "").join(lines)


def _html_table(node: IRNode, opts: dict, diags: list, depth: int) -> str:
    pretty = opts.get("pretty", True)

    def pad(d):
        return "  " * d if pretty else ""

    lines = [pad(depth) + "<table>"]
    for section in node.children:
        if section.kind not in ("thead", "tbody"):
            continue
        cell_tag = "th" if section.kind == "thead" else "td"
        lines.append(pad(depth + 1) + f"<{section.kind}>")
        for row in section.children:
            if row.kind != "trow":
                continue
            lines.append(pad(depth + 2) + "<tr>")
            for cell in row.children:
                if cell.kind != "tcell":
                    continue
                content = _inline(cell.children, "html", opts, diags)
                lines.append(pad(depth + 3) + f"<{cell_tag}>{content}</{cell_tag}>")
            lines.append(pad(depth + 2) + "</tr>")
        lines.append(pad(depth + 1) + f"</{section.kind}>")
    lines.append(pad(depth) + "</table>")
    return ("\n" if pretty else "").join(lines)


# -- XML --------------------------------------------------------------------------


def _xml_attr_string(node: IRNode) -> str:
    parts = []
    for key, value in node.attrs.items():
        if key in _STAMP_ATTRS or value is None or isinstance(value, (dict, list)):
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        parts.append(f' {key}="{_escape_attr(str(value))}"')
    return "".join(parts)


def _xml_inline_only(node: IRNode) -> bool:
    for child in node.children:
        if child.kind in ("text", "b", "i", "u", "s", "span", "nl", "img"):
            continue
        if child.kind == "code" and child.attrs.get("inline"):
            continue
        return False
    return True


def _xml_block(node: IRNode, opts: dict, diags: list, depth: int) -> str:
    pretty = opts.get("pretty", True)
    pad = "  " * depth if pretty else ""
    joiner = "\n" if pretty else ""
    kind = node.kind
    attrs = _xml_attr_string(node)
    if kind == "text":
        return pad + _escape_markup(node.text or "")
    if kind in ("img", "nl"):
        return pad + f"<{kind}{attrs}/>"
    if kind in ("obj", "any"):
        body = _escape_markup(json.dumps(node.attrs.get("data"), ensure_ascii=False))
        return pad + f"<{kind}{attrs}>{body}</{kind}>"
    if kind == "env":
        inner_lang = node.attrs.get("markup-lang")
        serialized = (node.attrs.get("presentation") in ("serialize", "free",
                                                         "multimedia")
                      or node.attrs.get("serializer")
                      or (inner_lang and inner_lang != "xml"))
        if serialized:
            body = _render_document(node, {**opts, "markup-lang": "xml"}, diags)
            return pad + f"<env{attrs}>" + _escape_markup(body.rstrip("\n")) + "</env>"
        # xml subtree: plain container
    if _xml_inline_only(node):
        content = _inline(node.children, "xml", opts, diags)
        return pad + f"<{kind}{attrs}>{content}</{kind}>"
    lines = [pad + f"<{kind}{attrs}>"]
    lines.extend(_xml_block(c, opts, diags, depth + 1) for c in node.children)
    lines.append(pad + f"</{kind}>")
    return joiner.join(lines)


# -- serializer output ------------------------------------------------------------


def _write_serialized(children, serializer: str, opts: dict, diags: list) -> str:
    values: list[Any] = []
    for child in children:
        _collect_value(child, values, diags)
    if not values:
        value = None
    elif len(values) == 1:
        value = values[0]
    else:
        value = values
    if serializer == "yaml":
        return yaml.safe_dump(value, sort_keys=False, allow_unicode=True,
                              default_flow_style=False).rstrip("\n")
    if opts.get("pretty", True):
        return json.dumps(value, indent=2, ensure_ascii=False)
    return json.dumps(value, ensure_ascii=False)


def _collect_value(node: IRNode, values: list, diags: list) -> None:
    kind = node.kind
    if kind in ("obj", "any"):
        values.append(node.attrs.get("data"))
        return
    if kind == "text":
        if (node.text or "").strip():
            values.append(node.text)
        return
    if kind == "env":
        for child in node.children:
            _collect_value(child, values, diags)
        return
    if kind == "img":
        diags.append(Diagnostic(
            WARNING, "unsupported-kind-for-writer",
            "image cannot be serialized, substituting alt text",
            _span_of(node)))
        values.append(node.attrs.get("alt", ""))
        return
    diags.append(Diagnostic(
        WARNING, "unsupported-kind-for-writer",
        f"{kind} cannot be serialized, substituting flattened text",
        _span_of(node)))
    values.append(_flat_text(node))


def _span_of(node: IRNode) -> tuple[int, int]:
    return (node.attrs.get("original-start-index", 0),
            node.attrs.get("original-end-index", 0))


# -- message splitting ------------------------------------------------------------


@dataclass
class Message:
    """One chat turn: a speaker and ordered text/image parts."""

    speaker: str
    parts: list = field(default_factory=list)


def messages_to_json(messages) -> list:
    return [{"speaker": m.speaker, "content": m.parts} for m in messages]


def split_messages(root: IRNode, options: dict | None = None) -> tuple[list[Message], list[Diagnostic]]:
    """Partition a document into messages at speaker boundaries.

    Consecutive blocks with the same resolved speaker form one message; text
    within a message is rendered with the active writer and images become
    separate parts.
    """
    opts = _merge_options(options)
    diags: list[Diagnostic] = []
    entries: list[tuple[str, tuple]] = []
    _collect_entries(root, opts.get("markup-lang", "markdown"), entries, opts, diags)

    messages: list[Message] = []
    i = 0
    while i < len(entries):
        speaker = entries[i][0]
        j = i
        while j < len(entries) and entries[j][0] == speaker:
            j += 1
        parts = _run_parts([e[1] for e in entries[i:j]], opts, diags)
        if parts:
            messages.append(Message(speaker, parts))
        i = j
    return messages, diags


def _speaker_of(node: IRNode) -> str:
    return node.attrs.get("speaker", "human")


def _collect_entries(node: IRNode, lang: str, entries: list, opts: dict, diags: list) -> None:
    if node.kind != "env":
        entries.append((_speaker_of(node), ("block", node, lang)))
        return
    presentation = node.attrs.get("presentation")
    if presentation == "serialize" or node.attrs.get("serializer"):
        serializer = node.attrs.get("serializer") or "json"
        dump = _write_serialized(node.children, serializer, opts, diags)
        entries.append((_speaker_of(node), ("atom", dump)))
        return
    if presentation in ("free", "multimedia"):
        inner = "text"
    else:
        inner = node.attrs.get("markup-lang") or lang
    for child in node.children:
        _collect_entries(child, inner, entries, opts, diags)


def _has_image(node: IRNode) -> bool:
    if node.kind == "img":
        return True
    return any(_has_image(c) for c in node.children)


def _run_parts(items: list[tuple], opts: dict, diags: list) -> list[dict]:
    parts: list[dict] = []

    def add_text(s: str) -> None:
        s = _CONTROL.sub("", s)
        if not s:
            return
        if parts and "text" in parts[-1]:
            parts[-1] = {"text": parts[-1]["text"] + "\n\n" + s}
        else:
            parts.append({"text": s})

    def add_fragment(s: str) -> None:
        # inline fragment next to an image: glue without a block gap
        s = _CONTROL.sub("", s)
        if not s:
            return
        if parts and "text" in parts[-1]:
            parts[-1] = {"text": parts[-1]["text"] + s}
        else:
            parts.append({"text": s})

    segment: list[IRNode] = []
    segment_lang = "markdown"

    def flush() -> None:
        nonlocal segment
        if segment:
            add_text(_blocks(segment, segment_lang, opts, diags))
            segment = []

    for item in items:
        if item[0] == "atom":
            flush()
            add_text(item[1])
            continue
        block, lang = item[1], item[2]
        if not _has_image(block):
            if segment and segment_lang != lang:
                flush()
            segment_lang = lang
            segment.append(block)
            continue
        flush()
        if block.kind == "img":
            parts.append(_image_part(block))
        elif block.kind == "p":
            buffer: list[IRNode] = []
            first = True
            for child in block.children:
                if child.kind == "img":
                    fragment = _inline(buffer, lang, opts, diags)
                    if first:
                        add_text(fragment)
                    else:
                        add_fragment(fragment)
                    first = False
                    buffer = []
                    parts.append(_image_part(child))
                else:
                    buffer.append(child)
            tail = _inline(buffer, lang, opts, diags)
            if first:
                add_text(tail)
            else:
                add_fragment(tail)
        else:
            add_text(_blocks([block], lang, opts, diags))
    flush()
    return parts


def _image_part(node: IRNode) -> dict:
    return {"image": {
        "base64": node.attrs.get("base64", ""),
        "media-type": node.attrs.get("type", "image/png"),
        "alt": node.attrs.get("alt", ""),
    }}
