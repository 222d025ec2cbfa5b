"""Data adapters: tables, folders, documents, conversations, images.

Each adapter ingests an external representation and produces IR. Adapters
never write to the filesystem; all reads go through a resource loader. The
optional `stamp` dict (speaker and source span) is attached to every created
node; bulk nodes such as table cells share one dict instance rather than
copying it per cell.
"""

from __future__ import annotations

import base64
import csv
import io
import json
import posixpath
import re
from dataclasses import dataclass, field

import yaml

from .diagnostics import ERROR, WARNING, Diagnostic
from .ir import IRNode
from .resources import ResourceError

SPEAKERS = ("human", "ai", "system")

_EXTENSION_FORMATS = {".csv": "csv", ".tsv": "tsv", ".json": "json"}
_IMAGE_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}
_DOCUMENT_EXTENSIONS = (".txt", ".md")


@dataclass
class TableData:
    columns: list[str]
    records: list[list[str]]
    source_format: str


@dataclass
class FolderNode:
    name: str
    is_dir: bool
    size: int = 0
    children: list["FolderNode"] = field(default_factory=list)


@dataclass
class DocumentContent:
    pages: list[str]
    source_path: str


def _cell(value) -> str:
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        return str(value)
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"))


def parse_slice(text: str, length: int, span=(0, 0)):
    """0-based half-open "start:end"; a bare integer n means n:n+1."""
    diags: list[Diagnostic] = []

    def bad(reason: str):
        diags.append(Diagnostic(ERROR, "bad-slice",
                                f"invalid slice {text!r}: {reason}", span))
        return None, diags

    parts = text.split(":")
    if len(parts) > 2:
        return bad("too many ':'")
    try:
        if len(parts) == 1:
            if not parts[0].strip():
                return bad("empty")
            start = int(parts[0])
            end = start + 1
        else:
            start = int(parts[0]) if parts[0].strip() else 0
            end = int(parts[1]) if parts[1].strip() else length
    except ValueError:
        return bad("endpoints must be integers")
    if start < 0 or end < 0:
        return bad("endpoints must be non-negative")
    if start > end:
        return bad("start exceeds end")
    return (min(start, length), min(end, length)), diags


# -- tables ---------------------------------------------------------------------

def parse_table_source(data: bytes | str, fmt: str = "auto",
                       filename: str = "", span=(0, 0),
                       ) -> tuple[TableData, list[Diagnostic]]:
    """Parse csv/tsv/json table input; ragged rows are repaired, not fatal."""
    diags: list[Diagnostic] = []
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    if fmt == "auto":
        ext = posixpath.splitext(filename)[1].lower()
        fmt = _EXTENSION_FORMATS.get(ext, "csv")
    if not data.strip():
        diags.append(Diagnostic(WARNING, "empty-input",
                                "table source is empty", span))
        return TableData([], [], fmt), diags

    if fmt == "json":
        try:
            parsed = json.loads(data)
        except ValueError as exc:
            diags.append(Diagnostic(ERROR, "invalid-table",
                                    f"table JSON does not parse: {exc}", span))
            return TableData([], [], fmt), diags
        if not isinstance(parsed, list) or any(
                not isinstance(row, dict) for row in parsed):
            diags.append(Diagnostic(ERROR, "json-not-array",
                                    "table JSON must be an array of objects",
                                    span))
            return TableData([], [], fmt), diags
        columns: list[str] = []
        for row in parsed:
            for key in row:
                if key not in columns:
                    columns.append(key)
        records = [[_cell(row.get(col)) for col in columns] for row in parsed]
        return TableData(columns, records, "json"), diags

    delimiter = "\t" if fmt == "tsv" else ","
    rows = list(csv.reader(io.StringIO(data), delimiter=delimiter))
    if not rows:
        diags.append(Diagnostic(WARNING, "empty-input",
                                "table source is empty", span))
        return TableData([], [], fmt), diags
    columns = rows[0]
    width = len(columns)
    records = []
    for number, row in enumerate(rows[1:], start=2):
        if len(row) < width:
            diags.append(Diagnostic(WARNING, "ragged-row",
                                    f"row {number} has {len(row)} cells, "
                                    f"expected {width}; padded", span))
            row = row + [""] * (width - len(row))
        elif len(row) > width:
            diags.append(Diagnostic(WARNING, "ragged-row",
                                    f"row {number} has {len(row)} cells, "
                                    f"expected {width}; truncated", span))
            row = row[:width]
        records.append(row)
    return TableData(columns, records, fmt), diags


def _serialize_delimited(columns, records, delimiter, include_header):
    out = io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    if include_header:
        writer.writerow(columns)
    writer.writerows(records)
    text = out.getvalue()
    return text[:-1] if text.endswith("\n") else text


def render_table(table: TableData, syntax: str, *, include_header: bool = True,
                 include_index: bool = False, selected_records: str | None = None,
                 selected_columns: list[str] | None = None,
                 stamp: dict | None = None, span=(0, 0),
                 ) -> tuple[IRNode, list[Diagnostic]]:
    """Render a table as an IR subtree (markdown/html/xml) or code block
    (csv/tsv/json). The index column uses pre-slice row ordinals."""
    diags: list[Diagnostic] = []
    stamp = stamp if stamp is not None else {}

    columns = list(table.columns)
    records = [list(row) for row in table.records]
    if selected_columns is not None:
        keep = []
        for name in selected_columns:
            if name in table.columns:
                keep.append(name)
            else:
                diags.append(Diagnostic(ERROR, "unknown-column",
                                        f"no column named {name!r}", span))
        picks = [table.columns.index(name) for name in keep]
        columns = keep
        records = [[row[i] for i in picks] for row in records]
    if include_index:
        columns = ["index"] + columns
        records = [[str(i)] + row for i, row in enumerate(records)]
    if selected_records is not None:
        bounds, slice_diags = parse_slice(selected_records, len(records), span)
        diags.extend(slice_diags)
        if bounds is not None:
            records = records[bounds[0]:bounds[1]]

    if syntax in ("csv", "tsv", "json"):
        if syntax == "json":
            payload = json.dumps(
                [dict(zip(columns, row)) for row in records],
                indent=2, ensure_ascii=False)
        else:
            payload = _serialize_delimited(
                columns, records, "\t" if syntax == "tsv" else ",",
                include_header)
        code = IRNode("code", {**stamp, "lang": syntax, "inline": False},
                      (IRNode("text", stamp, (), payload),))
        return code, diags

    def row_node(cells) -> IRNode:
        return IRNode("trow", stamp, tuple(
            IRNode("tcell", stamp, (IRNode("text", stamp, (), cell),))
            for cell in cells))

    sections = []
    if include_header:
        sections.append(IRNode("thead", stamp, (row_node(columns),)))
    sections.append(IRNode("tbody", stamp,
                           tuple(row_node(row) for row in records)))
    table_node = IRNode("table", stamp, tuple(sections))
    env = IRNode("env", {**stamp, "presentation": "markup",
                         "markup-lang": syntax}, (table_node,))
    return env, diags


# -- folders -------------------------------------------------------------------

def scan_folder(path: str, max_depth: int, pattern: str | None, loader,
                span=(0, 0)) -> tuple[FolderNode, list[Diagnostic]]:
    """Build a filtered, name-sorted folder tree; depth 1 = direct children."""
    diags: list[Diagnostic] = []
    regex = None
    if pattern:
        try:
            regex = re.compile(pattern)
        except re.error as exc:
            diags.append(Diagnostic(ERROR, "invalid-filter",
                                    f"bad filter pattern: {exc}", span))

    def walk(dir_path: str, name: str, depth: int) -> FolderNode:
        node = FolderNode(name, True)
        try:
            entries = loader.list_dir(dir_path)
        except ResourceError as exc:
            diags.append(Diagnostic(WARNING, "unreadable-dir", str(exc), span))
            return node
        for entry in entries:
            if depth + 1 > max_depth:
                continue
            child_path = posixpath.join(dir_path, entry.name)
            if entry.is_dir:
                sub = walk(child_path, entry.name, depth + 1)
                if sub.children:
                    node.children.append(sub)
            elif regex is None or regex.search(entry.name):
                node.children.append(FolderNode(entry.name, False, entry.size))
        return node

    root_name = posixpath.basename(path.rstrip("/")) or path
    return walk(path, root_name, 0), diags


def folder_data(tree: FolderNode, show_size: bool = False):
    """Folder tree as plain data: dirs become single-key objects, files
    become name strings (or {name: size} with show_size). Root is implied."""
    def to_data(node: FolderNode):
        if node.is_dir:
            return {node.name: [to_data(c) for c in node.children]}
        if show_size:
            return {node.name: node.size}
        return node.name

    return [to_data(child) for child in tree.children]


def render_folder(tree: FolderNode, syntax: str = "tree",
                  show_size: bool = False, stamp: dict | None = None,
                  ) -> IRNode:
    """Emit a folder tree as a code block: box-drawing view, YAML, or JSON."""
    stamp = stamp if stamp is not None else {}

    if syntax in ("yaml", "json"):
        data = folder_data(tree, show_size)
        if syntax == "yaml":
            payload = yaml.safe_dump(data, sort_keys=False,
                                     allow_unicode=True).rstrip("\n")
        else:
            payload = json.dumps(data, indent=2, ensure_ascii=False)
        attrs = {**stamp, "lang": syntax, "inline": False}
        return IRNode("code", attrs, (IRNode("text", stamp, (), payload),))

    lines: list[str] = []

    def emit(node: FolderNode, prefix: str) -> None:
        for i, child in enumerate(node.children):
            last = i == len(node.children) - 1
            connector = "└── " if last else "├── "
            label = child.name
            if show_size and not child.is_dir:
                label += f" ({child.size} bytes)"
            lines.append(prefix + connector + label)
            if child.is_dir:
                emit(child, prefix + ("    " if last else "│   "))

    emit(tree, "")
    attrs = {**stamp, "inline": False}
    return IRNode("code", attrs, (IRNode("text", stamp, (), "\n".join(lines)),))


# -- documents ------------------------------------------------------------------

def slice_pages(pages: list[str], slice_text: str, span=(0, 0),
                ) -> tuple[list[str], list[Diagnostic]]:
    bounds, diags = parse_slice(slice_text, len(pages), span)
    if bounds is None:
        return list(pages), diags
    return pages[bounds[0]:bounds[1]], diags


def read_document(path: str, loader, selected_pages: str | None = None,
                  span=(0, 0)) -> tuple[DocumentContent, list[Diagnostic]]:
    """Read a plain-text or markdown document as a single page."""
    diags: list[Diagnostic] = []
    ext = posixpath.splitext(path)[1].lower()
    if ext not in _DOCUMENT_EXTENSIONS:
        diags.append(Diagnostic(ERROR, "unsupported-format",
                                f"cannot read {ext or 'extensionless'} "
                                "documents (txt and md only)", span))
        return DocumentContent([], path), diags
    if loader is None:
        diags.append(Diagnostic(ERROR, "unreadable-file",
                                f"no loader available for {path!r}", span))
        return DocumentContent([], path), diags
    try:
        text = loader.read_text(path)
    except ResourceError as exc:
        diags.append(Diagnostic(ERROR, "unreadable-file", str(exc), span))
        return DocumentContent([], path), diags
    pages = [text]
    if selected_pages and len(pages) > 1:
        pages, slice_diags = slice_pages(pages, selected_pages, span)
        diags.extend(slice_diags)
    return DocumentContent(pages, path), diags


# -- conversations ----------------------------------------------------------------

def lower_conversation(messages, stamp: dict | None = None, span=(0, 0),
                       ) -> tuple[list[IRNode], list[Diagnostic]]:
    """Messages [{speaker, content}] become one p node each."""
    diags: list[Diagnostic] = []
    stamp = stamp if stamp is not None else {}
    nodes: list[IRNode] = []
    if not isinstance(messages, list):
        diags.append(Diagnostic(ERROR, "bad-shape",
                                "conversation must be an array of messages",
                                span))
        return nodes, diags
    for i, message in enumerate(messages):
        if not isinstance(message, dict) or "speaker" not in message \
                or not isinstance(message.get("content"), str):
            diags.append(Diagnostic(
                ERROR, "bad-shape",
                f"message {i} must be {{speaker, content}}", span))
            continue
        speaker = message["speaker"]
        if speaker not in SPEAKERS:
            diags.append(Diagnostic(
                ERROR, "bad-speaker",
                f"message {i} speaker must be one of "
                f"{', '.join(SPEAKERS)}, got {speaker!r}", span))
            continue
        attrs = {**stamp, "speaker": speaker}
        nodes.append(IRNode("p", attrs,
                            (IRNode("text", attrs, (), message["content"]),)))
    return nodes, diags


# -- images -----------------------------------------------------------------------

def load_image(attrs: dict, loader, base: str, stamp: dict | None = None,
               span=(0, 0)) -> tuple[IRNode | None, list[Diagnostic]]:
    """Resolve an image to a base64 img node; returns None when unusable."""
    diags: list[Diagnostic] = []
    stamp = stamp if stamp is not None else {}
    media_type = attrs.get("type")

    if attrs.get("base64"):
        payload = attrs["base64"]
        try:
            base64.b64decode(payload, validate=True)
        except (ValueError, TypeError):
            diags.append(Diagnostic(ERROR, "invalid-image",
                                    "base64 payload does not decode", span))
            return None, diags
    elif attrs.get("src"):
        src = attrs["src"]
        if media_type is None:
            ext = posixpath.splitext(src)[1].lower()
            media_type = _IMAGE_TYPES.get(ext)
            if media_type is None:
                diags.append(Diagnostic(
                    ERROR, "invalid-image",
                    f"cannot infer image type from {src!r} "
                    "(png and jpeg only)", span))
                return None, diags
        if loader is None:
            diags.append(Diagnostic(ERROR, "invalid-image",
                                    f"no loader available for {src!r}", span))
            return None, diags
        try:
            raw = loader.read_bytes(loader.resolve(base, src))
        except ResourceError as exc:
            diags.append(Diagnostic(ERROR, "invalid-image", str(exc), span))
            return None, diags
        payload = base64.b64encode(raw).decode("ascii")
    else:
        diags.append(Diagnostic(ERROR, "invalid-image",
                                "img needs a src or base64 attribute", span))
        return None, diags

    if media_type not in ("image/png", "image/jpeg"):
        diags.append(Diagnostic(ERROR, "invalid-image",
                                f"unsupported image type {media_type!r}", span))
        return None, diags

    node_attrs = {**stamp, "base64": payload, "type": media_type}
    if attrs.get("alt"):
        node_attrs["alt"] = attrs["alt"]
    position = attrs.get("position", "here")
    if position not in ("top", "bottom", "here"):
        diags.append(Diagnostic(ERROR, "invalid-attribute-value",
                                f"img position {position!r} must be top, "
                                "bottom or here; using here", span))
        position = "here"
    node_attrs["position"] = position
    for source_key, target_key in (("maxWidth", "max-width"),
                                   ("maxHeight", "max-height")):
        if source_key in attrs:
            try:
                node_attrs[target_key] = int(attrs[source_key])
            except (TypeError, ValueError):
                diags.append(Diagnostic(
                    ERROR, "invalid-attribute-value",
                    f"{source_key} must be an integer", span))
    return IRNode("img", node_attrs, ()), diags
