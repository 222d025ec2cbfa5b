"""Data adapters: tables, slices, folders, documents, conversations, images."""

from __future__ import annotations

import base64
import csv
import io
import json

import pytest
import yaml

from poml.data import (
    TableData,
    load_image,
    lower_conversation,
    parse_slice,
    parse_table_source,
    read_document,
    render_folder,
    render_table,
    scan_folder,
    slice_pages,
)
from poml.resources import MemoryLoader


def flat_text(node):
    if node.kind == "text":
        return node.text or ""
    return "".join(flat_text(c) for c in node.children)


def table_cells(table_node):
    """Rows of cell strings from a table IR subtree, header first."""
    rows = []
    for section in table_node.children:
        for trow in section.children:
            rows.append([flat_text(cell) for cell in trow.children])
    return rows


# -- parsing -------------------------------------------------------------------

def test_parse_minimal_csv():
    table, diags = parse_table_source("a,b\n1,2", "csv")
    assert diags == []
    assert table.columns == ["a", "b"]
    assert table.records == [["1", "2"]]


def test_parse_json_union_of_keys():
    table, diags = parse_table_source('[{"x":1},{"x":2,"y":3}]', "json")
    assert diags == []
    assert table.columns == ["x", "y"]
    assert table.records == [["1", ""], ["2", "3"]]


def test_parse_csv_quoting():
    table, _ = parse_table_source('h1,h2\n"x,y","a""b"', "csv")
    assert table.records == [["x,y", 'a"b']]


def test_parse_tsv():
    table, diags = parse_table_source("time\tline\n00:01\thello", "tsv")
    assert table.columns == ["time", "line"]
    assert table.records == [["00:01", "hello"]]


def test_ragged_rows_padded_and_truncated():
    table, diags = parse_table_source("a,b\n1\n1,2,3", "csv")
    assert table.records == [["1", ""], ["1", "2"]]
    assert len(diags) == 2


def test_empty_input_warns():
    table, diags = parse_table_source("", "csv")
    assert table.columns == [] and table.records == []
    assert len(diags) == 1 and diags[0].severity == "warning"


def test_json_not_array_errors():
    table, diags = parse_table_source('{"a": 1}', "json")
    assert len(diags) == 1 and diags[0].severity == "error"


def test_auto_format_by_extension():
    table, _ = parse_table_source('[{"k": "v"}]', "auto", filename="d.json")
    assert table.columns == ["k"]
    table, _ = parse_table_source("a\tb\n1\t2", "auto", filename="d.tsv")
    assert table.columns == ["a", "b"]
    table, _ = parse_table_source("a,b\n1,2", "auto", filename="d.csv")
    assert table.columns == ["a", "b"]


# -- rendering -------------------------------------------------------------------

def _table():
    return TableData(["name", "qty"], [["apple", "5"], ["pear", "2"]], "csv")


def test_render_markdown_is_ir_table_in_env():
    node, diags = render_table(_table(), "markdown")
    assert diags == []
    assert node.kind == "env"
    assert node.attrs["markup-lang"] == "markdown"
    (table,) = node.children
    assert table.kind == "table"
    assert [c.kind for c in table.children] == ["thead", "tbody"]
    assert table_cells(table) == [
        ["name", "qty"], ["apple", "5"], ["pear", "2"]]


def test_render_csv_code_block():
    node, diags = render_table(_table(), "csv")
    assert node.kind == "code"
    assert node.attrs["lang"] == "csv"
    assert node.attrs["inline"] is False
    assert flat_text(node) == "name,qty\napple,5\npear,2"


def test_render_json_code_block():
    node, _ = render_table(_table(), "json")
    data = json.loads(flat_text(node))
    assert data == [{"name": "apple", "qty": "5"}, {"name": "pear", "qty": "2"}]


def test_render_tsv_round_trips():
    node, _ = render_table(_table(), "tsv")
    back, diags = parse_table_source(flat_text(node), "tsv")
    assert back.columns == ["name", "qty"]
    assert back.records == [["apple", "5"], ["pear", "2"]]


def test_include_index_uses_pre_slice_ordinals():
    node, diags = render_table(_table(), "csv", include_index=True,
                               selected_records="1:2")
    assert diags == []
    assert flat_text(node) == "index,name,qty\n1,pear,2"


def test_empty_slice_keeps_header_only():
    node, _ = render_table(_table(), "markdown", selected_records="0:0")
    (table,) = node.children
    assert table_cells(table) == [["name", "qty"]]


def test_selected_columns_subset_and_order():
    node, diags = render_table(_table(), "csv",
                               selected_columns=["qty", "name"])
    assert diags == []
    assert flat_text(node) == "qty,name\n5,apple\n2,pear"


def test_unknown_selected_column():
    node, diags = render_table(_table(), "csv", selected_columns=["ghost", "name"])
    assert any(d.code == "unknown-column" for d in diags)
    assert flat_text(node) == "name\napple\npear"


def test_header_suppressed():
    node, _ = render_table(_table(), "csv", include_header=False)
    assert flat_text(node) == "apple,5\npear,2"


def test_bad_slice_reported_and_ignored():
    node, diags = render_table(_table(), "csv", selected_records="3:1")
    assert any(d.code == "bad-slice" for d in diags)
    assert flat_text(node) == "name,qty\napple,5\npear,2"


def test_cells_share_one_attrs_dict():
    stamp = {"speaker": "human", "original-start-index": 0,
             "original-end-index": 9}
    node, _ = render_table(_table(), "markdown", stamp=stamp)
    (table,) = node.children
    cells = [cell for section in table.children
             for row in section.children for cell in row.children]
    assert len(cells) == 6
    assert all(cell.attrs is cells[0].attrs for cell in cells)
    assert cells[0].attrs["speaker"] == "human"


# -- slices ------------------------------------------------------------------------

@pytest.mark.parametrize("text,length,expected", [
    ("1:3", 5, (1, 3)),
    (":2", 5, (0, 2)),
    ("2:", 5, (2, 5)),
    (":", 5, (0, 5)),
    ("4", 10, (4, 5)),
    ("0:0", 5, (0, 0)),
    ("2:99", 5, (2, 5)),
])
def test_parse_slice_ok(text, length, expected):
    bounds, diags = parse_slice(text, length)
    assert diags == []
    assert bounds == expected


@pytest.mark.parametrize("text", ["a", "3:1", "-1:2", "1:2:3", ""])
def test_parse_slice_bad(text):
    bounds, diags = parse_slice(text, 5)
    assert bounds is None
    assert len(diags) == 1 and diags[0].code == "bad-slice"


# -- folders ----------------------------------------------------------------------

def _folder_loader():
    return MemoryLoader({
        "proj/readme.md": "hi",
        "proj/src/main.py": "print()",
        "proj/src/util.py": "pass",
        "proj/src/deep/inner.py": "x",
        "proj/empty_note.txt": "",
    })


def test_scan_sorts_by_name():
    loader = MemoryLoader({"d/b.txt": "1", "d/a.txt": "2"})
    tree, diags = scan_folder("d", 3, None, loader)
    assert diags == []
    assert [c.name for c in tree.children] == ["a.txt", "b.txt"]


def test_scan_filter_keeps_matching_files():
    tree, _ = scan_folder("proj", 5, r"\.py$", _folder_loader())
    names = [c.name for c in tree.children]
    assert names == ["src"]
    src = tree.children[0]
    assert [c.name for c in src.children] == ["deep", "main.py", "util.py"]


def test_scan_depth_limit():
    tree, _ = scan_folder("proj", 1, None, _folder_loader())
    names = [c.name for c in tree.children]
    assert "src" not in names or all(
        not c.children for c in tree.children if c.name == "src")
    tree2, _ = scan_folder("proj", 2, None, _folder_loader())
    src = [c for c in tree2.children if c.name == "src"][0]
    assert all(not c.children for c in src.children if c.is_dir)


def test_render_tree_single_file():
    loader = MemoryLoader({"d/a.txt": "hello"})
    tree, _ = scan_folder("d", 2, None, loader)
    node = render_folder(tree, "tree")
    assert node.kind == "code"
    assert flat_text(node) == "└── a.txt"


def test_render_tree_two_siblings():
    loader = MemoryLoader({"d/a": "1", "d/b": "2"})
    tree, _ = scan_folder("d", 2, None, loader)
    assert flat_text(render_folder(tree, "tree")) == "├── a\n└── b"


def test_render_tree_nested_prefixes():
    loader = MemoryLoader({
        "d/pkg/one.py": "1",
        "d/pkg/two.py": "2",
        "d/z.txt": "3",
    })
    tree, _ = scan_folder("d", 3, None, loader)
    assert flat_text(render_folder(tree, "tree")) == (
        "├── pkg\n"
        "│   ├── one.py\n"
        "│   └── two.py\n"
        "└── z.txt"
    )


def test_render_tree_line_count_equals_node_count():
    tree, _ = scan_folder("proj", 5, None, _folder_loader())

    def count(node):
        return len(node.children) + sum(count(c) for c in node.children)

    lines = flat_text(render_folder(tree, "tree")).split("\n")
    assert len(lines) == count(tree)


def test_render_tree_with_sizes():
    loader = MemoryLoader({"d/a.txt": "hello"})
    tree, _ = scan_folder("d", 2, None, loader)
    assert flat_text(render_folder(tree, "tree", show_size=True)) \
        == "└── a.txt (5 bytes)"


def test_render_folder_yaml_round_trips():
    loader = MemoryLoader({"d/src/m.py": "x", "d/top.txt": "y"})
    tree, _ = scan_folder("d", 3, None, loader)
    node = render_folder(tree, "yaml")
    assert node.attrs["lang"] == "yaml"
    data = yaml.safe_load(flat_text(node))
    assert data == [{"src": ["m.py"]}, "top.txt"]


def test_render_folder_json():
    loader = MemoryLoader({"d/a.txt": "x"})
    tree, _ = scan_folder("d", 2, None, loader)
    assert json.loads(flat_text(render_folder(tree, "json"))) == ["a.txt"]


# -- documents ----------------------------------------------------------------------

def test_read_text_document_identity():
    loader = MemoryLoader({"notes.txt": "line one\nline two"})
    doc, diags = read_document("notes.txt", loader)
    assert diags == []
    assert doc.pages == ["line one\nline two"]


def test_slice_pages_half_open():
    pages = ["p0", "p1", "p2", "p3", "p4"]
    sliced, diags = slice_pages(pages, "1:3")
    assert diags == []
    assert sliced == ["p1", "p2"]


def test_unsupported_document_format():
    loader = MemoryLoader({"f.pdf": "%PDF"})
    doc, diags = read_document("f.pdf", loader)
    assert any(d.code == "unsupported-format" for d in diags)


def test_missing_document():
    doc, diags = read_document("gone.txt", MemoryLoader({}))
    assert any(d.code == "unreadable-file" for d in diags)


# -- conversations ----------------------------------------------------------------

def test_conversation_empty():
    nodes, diags = lower_conversation([])
    assert nodes == [] and diags == []


def test_conversation_two_messages():
    nodes, diags = lower_conversation([
        {"speaker": "human", "content": "hi"},
        {"speaker": "ai", "content": "hello"},
    ])
    assert diags == []
    assert [n.kind for n in nodes] == ["p", "p"]
    assert nodes[0].attrs["speaker"] == "human"
    assert flat_text(nodes[0]) == "hi"
    assert nodes[1].attrs["speaker"] == "ai"


def test_conversation_bad_speaker():
    nodes, diags = lower_conversation([{"speaker": "robot", "content": "x"}])
    assert nodes == []
    assert any(d.code == "bad-speaker" for d in diags)


def test_conversation_bad_shape():
    nodes, diags = lower_conversation(["what"])
    assert any(d.code == "bad-shape" for d in diags)


# -- images ------------------------------------------------------------------------

_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk"
    "+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg==")


def test_load_image_from_file():
    loader = MemoryLoader({"pix.png": _PNG})
    node, diags = load_image({"src": "pix.png", "alt": "dot"}, loader, "main.poml")
    assert diags == []
    assert node.kind == "img"
    assert node.attrs["type"] == "image/png"
    assert node.attrs["alt"] == "dot"
    assert base64.b64decode(node.attrs["base64"]) == _PNG


def test_load_image_from_base64_attr():
    payload = base64.b64encode(b"\xff\xd8\xff").decode()
    node, diags = load_image({"base64": payload, "type": "image/jpeg"},
                             None, "main.poml")
    assert diags == []
    assert node.attrs["type"] == "image/jpeg"


def test_image_bad_base64():
    node, diags = load_image({"base64": "@@not@@", "type": "image/png"},
                             None, "main.poml")
    assert node is None
    assert any(d.code == "invalid-image" for d in diags)


def test_image_unknown_extension():
    loader = MemoryLoader({"pic.bmp": b"BM"})
    node, diags = load_image({"src": "pic.bmp"}, loader, "main.poml")
    assert node is None
    assert any(d.code == "invalid-image" for d in diags)


def test_image_position_validated():
    payload = base64.b64encode(b"\x89PNG").decode()
    node, diags = load_image(
        {"base64": payload, "type": "image/png", "position": "floating"},
        None, "main.poml")
    assert node.attrs["position"] == "here"
    assert any(d.code == "invalid-attribute-value" for d in diags)
