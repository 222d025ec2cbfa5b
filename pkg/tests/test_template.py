"""Template expansion: let, for, if/else, interpolation, includes."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poml.parser import parse
from poml.resources import MemoryLoader
from poml.template import expand


def expand_source(source, scope=None, loader=None, base="main.poml"):
    root, parse_diags = parse(source)
    assert not [d for d in parse_diags if d.severity == "error"]
    return expand(root, scope or {}, loader=loader, base=base)


def texts(node):
    """Flatten to (kind-or-name, merged text) pairs in document order."""
    out = []
    for child in node.children:
        if child.kind == "text":
            out.append(("text", child.text))
        elif child.kind == "element":
            out.append((child.name, "".join(
                t.text for t in child.children if t.kind == "text")))
    return out


def test_let_value_binds_for_following_siblings():
    root, diags = expand_source('<let name="x" value="1 + 2"><p>{{x}}</p>')
    assert diags == []
    assert texts(root) == [("p", "3")]


def test_let_shadowing_and_frame_pop():
    source = '<let name="x" value="1"/><p for="x in [2,3]">{{x}}</p>{{x}}'
    root, diags = expand_source(source)
    assert diags == []
    assert texts(root) == [("p", "2"), ("p", "3"), ("text", "1")]


def test_let_src_loads_json():
    loader = MemoryLoader({"files.json": '[{"name": "a.txt"}, {"name": "b.txt"}]'})
    source = '<let name="files" src="files.json"/><p for="f in files">{{ f.name }}</p>'
    root, diags = expand_source(source, loader=loader)
    assert diags == []
    assert texts(root) == [("p", "a.txt"), ("p", "b.txt")]


def test_for_replicates_items():
    root, diags = expand_source(
        '<list><item for="f in files">{{f}}</item></list>',
        {"files": ["a", "b", "c"]})
    (lst,) = root.children
    assert [texts(lst)[i] for i in range(3)] == [
        ("item", "a"), ("item", "b"), ("item", "c")]


def test_for_over_empty_array_yields_nothing():
    root, diags = expand_source('<p for="x in []">{{x}}</p>')
    assert diags == []
    assert root.children == []


def test_loop_metadata():
    source = '<p for="x in [\'a\',\'b\',\'c\']">{{loop.index}}|{{loop.first}}|{{loop.last}}|{{loop.length}}</p>'
    root, diags = expand_source(source)
    assert diags == []
    assert texts(root) == [
        ("p", "0|true|false|3"),
        ("p", "1|false|false|3"),
        ("p", "2|false|true|3"),
    ]


def test_if_keeps_truthy_drops_falsy():
    root, diags = expand_source('<p if="1 < 2">yes</p><p if="false">no</p>')
    assert diags == []
    assert texts(root) == [("p", "yes")]


def test_else_pairs_with_preceding_if():
    root, _ = expand_source('<p if="x > 0">pos</p><p else>neg</p>', {"x": 5})
    assert texts(root) == [("p", "pos")]
    root, _ = expand_source('<p if="x > 0">pos</p><p else>neg</p>', {"x": -5})
    assert texts(root) == [("p", "neg")]


def test_else_without_if_is_dropped():
    root, diags = expand_source("<p else>orphan</p>")
    assert texts(root) == []
    assert len(diags) == 1 and diags[0].code == "else-without-if"


def test_for_then_if_on_same_element():
    root, diags = expand_source(
        '<p for="x in [1,2,3,4]" if="x % 2 == 1">{{x}}</p>')
    assert diags == []
    assert texts(root) == [("p", "1"), ("p", "3")]


def test_attribute_interpolation():
    root, diags = expand_source(
        '<task caption="{{name}}!">x</task>', {"name": "Ada"})
    (task,) = root.children
    assert task.attr("caption") == "Ada!"
    assert diags == []


def test_control_attributes_consumed():
    root, _ = expand_source('<p if="true" for="x in [1]">t</p>')
    (p,) = root.children
    assert not p.has_attr("if") and not p.has_attr("for")


def test_adjacent_text_merges():
    root, diags = expand_source("a {{1 + 1}} c")
    (child,) = root.children
    assert child.kind == "text" and child.text == "a 2 c"


def test_hole_error_drops_hole_only():
    root, diags = expand_source("<p>keep {{missing}} kept</p>")
    (p,) = root.children
    assert "".join(t.text for t in p.children) == "keep  kept"
    assert len(diags) == 1 and diags[0].code == "expression-error"


def test_if_error_drops_element():
    root, diags = expand_source('<p if="1 +">x</p><p>y</p>')
    assert texts(root) == [("p", "y")]
    assert len(diags) == 1 and diags[0].code == "expression-error"


def test_for_over_non_array_drops_element():
    root, diags = expand_source('<p for="x in 5">x</p>')
    assert texts(root) == []
    assert len(diags) == 1 and diags[0].code == "invalid-for"


def test_let_requires_name():
    root, diags = expand_source('<let value="1"/>')
    assert len(diags) == 1 and diags[0].code == "invalid-let"


def test_let_src_missing_file():
    loader = MemoryLoader({})
    root, diags = expand_source('<let name="x" src="gone.json"/>', loader=loader)
    assert len(diags) == 1 and diags[0].code == "resource-error"


def test_let_src_invalid_json():
    loader = MemoryLoader({"x.json": "not json"})
    root, diags = expand_source('<let name="x" src="x.json"/>', loader=loader)
    assert len(diags) == 1 and diags[0].code == "resource-error"


def test_src_without_loader():
    root, diags = expand_source('<let name="x" src="x.json"/>')
    assert len(diags) == 1 and diags[0].code == "resource-error"


def test_include_splices_children():
    loader = MemoryLoader({"inc.poml": "<p>from include</p><p>second</p>"})
    root, diags = expand_source(
        '<p>before</p><include src="inc.poml"/><p>after</p>', loader=loader)
    assert diags == []
    assert texts(root) == [
        ("p", "before"), ("p", "from include"), ("p", "second"), ("p", "after")]


def test_include_sees_current_scope():
    loader = MemoryLoader({"inc.poml": "<p>{{greeting}}</p>"})
    root, diags = expand_source(
        '<let name="greeting" value="\'hi\'"/><include src="inc.poml"/>',
        loader=loader)
    assert diags == []
    assert texts(root) == [("p", "hi")]


def test_include_resolves_relative_to_referrer():
    loader = MemoryLoader({
        "dir/main.poml": "unused",
        "dir/sub.poml": "<p>sub</p>",
    })
    root, diags = expand_source(
        '<include src="sub.poml"/>', loader=loader, base="dir/main.poml")
    assert diags == []
    assert texts(root) == [("p", "sub")]


def test_include_cycle_detected():
    loader = MemoryLoader({
        "a.poml": '<p>a</p><include src="b.poml"/>',
        "b.poml": '<p>b</p><include src="a.poml"/>',
    })
    root, diags = expand_source('<include src="a.poml"/>', loader=loader)
    assert [c for c in diags if c.code == "include-cycle"]
    assert texts(root) == [("p", "a"), ("p", "b")]


def test_include_depth_capped():
    files = {f"f{i}.poml": f'<p>{i}</p><include src="f{i + 1}.poml"/>'
             for i in range(40)}
    files["f40.poml"] = "<p>40</p>"
    loader = MemoryLoader(files)
    root, diags = expand_source('<include src="f0.poml"/>', loader=loader)
    assert [d for d in diags if d.code == "include-depth"]
    kept = [t for _, t in texts(root)]
    assert "0" in kept and "40" not in kept


def test_include_missing_file():
    loader = MemoryLoader({})
    root, diags = expand_source('<include src="nope.poml"/>', loader=loader)
    assert len(diags) == 1 and diags[0].code == "resource-error"


def test_expansion_is_deterministic():
    source = '<let name="x" value="2"/><p for="i in [1,2]">{{i * x}}</p>'
    assert expand_source(source) == expand_source(source)


def test_ternary_in_attribute():
    root, _ = expand_source(
        "<p>{{ file.size < 1000 ? 'small' : 'big' }}</p>",
        {"file": {"size": 1200}})
    assert texts(root) == [("p", "big")]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-100, 100), max_size=20))
def test_for_count_matches_array_length(values):
    root, diags = expand_source(
        '<p for="v in data">{{v}}</p>', {"data": list(values)})
    assert diags == []
    assert len(root.children) == len(values)
    assert [t for _, t in texts(root)] == [str(v) for v in values]


@settings(max_examples=40, deadline=None)
@given(st.booleans())
def test_if_else_mutual_exclusion(condition):
    root, diags = expand_source(
        '<p if="c">then</p><p else>otherwise</p>', {"c": condition})
    assert diags == []
    assert texts(root) == [("p", "then" if condition else "otherwise")]
