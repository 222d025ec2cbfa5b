"""End-to-end pipeline: source text in, rendered output or IR out."""

import json

import pytest

from poml.engine import compile_source, render, render_messages
from poml.resources import MemoryLoader


def test_plain_text_compatibility():
    assert render("hi") == ("hi\n", [])


def test_compile_produces_env_root():
    ir_root, diags = compile_source("hello")
    assert diags == []
    assert ir_root.kind == "env"
    assert [c.kind for c in ir_root.children] == ["p"]


def test_context_binds_template_holes():
    out, diags = render("<poml><p>{{name}}</p></poml>", context={"name": "Ada"})
    assert (out, diags) == ("Ada\n", [])


def test_default_task_caption():
    out, _ = render("<poml><task>Do.</task></poml>")
    assert out == "**Task:** Do.\n"


def test_stylesheet_changes_caption_style():
    sheet = '{"task": {"captionStyle": "header"}}'
    out, diags = render("<poml><task>Do.</task></poml>", stylesheets=[sheet])
    assert (out, diags) == ("# Task:\n\nDo.\n", [])


def test_later_stylesheet_wins():
    a = '{"task": {"captionStyle": "header"}}'
    b = '{"task": {"captionStyle": "plain"}}'
    out, _ = render("<poml><task>Do.</task></poml>", stylesheets=[a, b])
    assert out == "Task: Do.\n"


def test_render_formats():
    src = "<poml><role>Data analyst</role></poml>"
    assert render(src)[0] == "**Role:** Data analyst\n"
    assert render(src, format="text")[0] == "Role: Data analyst\n"
    assert render(src, format="html")[0] == "<p><b>Role:</b> Data analyst</p>\n"


def test_ir_json_is_deterministic():
    src = "<poml><p>x</p></poml>"
    first, _ = render(src, format="ir-json")
    second, _ = render(src, format="ir-json")
    assert first == second
    assert first.endswith("\n")
    assert json.loads(first)["kind"] == "env"


def test_chat_json_shape():
    out, diags = render('<poml><p speaker="ai">yo</p></poml>',
                        format="chat-json")
    assert diags == []
    assert json.loads(out) == [{"speaker": "ai", "content": [{"text": "yo"}]}]


def test_render_messages():
    messages, diags = render_messages('<poml><p speaker="ai">yo</p></poml>')
    assert diags == []
    assert [(m.speaker, m.parts) for m in messages] == [
        ("ai", [{"text": "yo"}])]


def test_recovery_still_produces_output():
    out, diags = render("<p>a")
    assert out == "a\n"
    assert any(d.code == "unclosed-tag" for d in diags)


def test_include_via_loader():
    loader = MemoryLoader({
        "main.poml": '<poml><include src="part.poml"/></poml>',
        "part.poml": "<p>shared</p>",
    })
    out, diags = render(loader.read_text("main.poml"), loader=loader,
                        base="main.poml")
    assert (out, diags) == ("shared\n", [])


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render("hi", format="pdf")


def test_author_syntax_beats_format_flag():
    out, _ = render('<poml syntax="html"><p>x</p></poml>', format="markdown")
    assert out == "<p>x</p>\n"
