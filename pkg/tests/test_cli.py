"""CLI behavior: subcommands, exit codes, diagnostics format, piping."""

import io
import json
import re
import subprocess
import sys
import types

import pytest

from poml import cli


def run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def poml_file(tmp_path):
    def make(content, name="input.poml"):
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return str(path)
    return make


def test_render_plain_file(poml_file, capsys):
    path = poml_file("hi")
    assert run(["render", path], capsys) == (0, "hi\n", "")


def test_render_is_deterministic(poml_file, capsys):
    path = poml_file("<poml><task>Sort the data.</task></poml>")
    first = run(["render", path], capsys)
    second = run(["render", path], capsys)
    assert first == second == (0, "**Task:** Sort the data.\n", "")


def test_broken_file_partial_output_exit_1(poml_file, capsys):
    path = poml_file("<p>a")
    code, out, err = run(["render", path], capsys)
    assert code == 1
    assert out == "a\n"
    assert err.count("\n") == 1
    assert "\x1b" not in err
    pattern = rf"^error unclosed-tag {re.escape(path)}:\d+-\d+ .+\n$"
    assert re.match(pattern, err)


def test_missing_input_exit_2(tmp_path, capsys):
    code, out, err = run(["render", str(tmp_path / "absent.poml")], capsys)
    assert code == 2
    assert out == ""
    assert err != ""


def test_unknown_format_exit_2(poml_file, capsys):
    path = poml_file("hi")
    code, _, err = run(["render", path, "--format", "pdf"], capsys)
    assert code == 2
    assert err != ""


def test_format_flag(poml_file, capsys):
    path = poml_file("<poml><role>analyst</role></poml>")
    assert run(["render", path, "--format", "text"], capsys) == (
        0, "Role: analyst\n", "")
    assert run(["render", path, "--format", "html"], capsys) == (
        0, "<p><b>Role:</b> analyst</p>\n", "")


def test_context_and_var(tmp_path, poml_file, capsys):
    path = poml_file("<poml><p>{{greet}} {{name}}</p></poml>")
    ctx = tmp_path / "ctx.json"
    ctx.write_text('{"greet": "hello", "name": "Ada"}', encoding="utf-8")
    assert run(["render", path, "--context", str(ctx)], capsys) == (
        0, "hello Ada\n", "")
    code, out, _ = run(["render", path, "--context", str(ctx),
                        "--var", "name=Bob"], capsys)
    assert (code, out) == (0, "hello Bob\n")


def test_var_requires_equals(poml_file, capsys):
    path = poml_file("hi")
    code, _, err = run(["render", path, "--var", "oops"], capsys)
    assert code == 2
    assert "NAME=VALUE" in err


def test_bad_context_file_exit_2(tmp_path, poml_file, capsys):
    path = poml_file("hi")
    bad = tmp_path / "ctx.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    code, _, err = run(["render", path, "--context", str(bad)], capsys)
    assert code == 2
    assert err != ""


def test_stylesheet_order_later_wins(tmp_path, poml_file, capsys):
    path = poml_file("<poml><task>Do.</task></poml>")
    a = tmp_path / "a.json"
    a.write_text('{"task": {"captionStyle": "header"}}', encoding="utf-8")
    b = tmp_path / "b.json"
    b.write_text('{"task": {"captionStyle": "plain"}}', encoding="utf-8")
    code, out, _ = run(["render", path, "--stylesheet", str(a),
                        "--stylesheet", str(b)], capsys)
    assert (code, out) == (0, "Task: Do.\n")


def test_strict_fails_on_warnings(poml_file, capsys):
    path = poml_file('<poml><p zap="1">x</p></poml>')
    code, out, _ = run(["render", path], capsys)
    assert (code, out) == (0, "x\n")
    code, out, err = run(["render", path, "--strict"], capsys)
    assert code == 1
    assert out == "x\n"
    assert "unknown-attribute" in err


def test_lint_clean_file(poml_file, capsys):
    path = poml_file("<poml><p>x</p></poml>")
    assert run(["lint", path], capsys) == (0, "", "")
    code, out, _ = run(["lint", path, "--json"], capsys)
    assert code == 0
    assert json.loads(out) == []


def test_lint_reports_all_errors_in_one_run(poml_file, capsys):
    path = poml_file("<p>a<p>b<p>c")
    code, out, err = run(["lint", path, "--json"], capsys)
    assert code == 1
    findings = json.loads(out)
    assert len(findings) >= 3
    for finding in findings:
        assert set(finding) == {"severity", "code", "span", "message"}
        assert finding["severity"] in ("error", "warning")
        start, end = finding["span"]
        assert 0 <= start <= end


def test_lint_strict_counts_warnings(poml_file, capsys):
    path = poml_file('<poml><p zap="1">x</p></poml>')
    assert run(["lint", path], capsys)[0] == 0
    assert run(["lint", path, "--strict"], capsys)[0] == 1


def test_ir_deterministic_and_spanned(poml_file, capsys):
    path = poml_file('<h level="1">x</h>')
    first = run(["ir", path], capsys)
    second = run(["ir", path], capsys)
    assert first == second
    code, out, err = first
    assert (code, err) == (0, "")
    root = json.loads(out)
    assert root["kind"] == "env"
    heading = root["children"][0]
    assert heading["kind"] == "h"
    assert heading["attrs"]["original-start-index"] == 0


def test_ir_pipe_matches_direct_render(tmp_path, poml_file, capsys):
    path = poml_file("<poml><role>analyst</role><task>Sort.</task></poml>")
    direct = run(["render", path, "--format", "markdown"], capsys)
    code, ir_json, _ = run(["ir", path], capsys)
    assert code == 0
    ir_path = tmp_path / "doc.ir.json"
    ir_path.write_text(ir_json, encoding="utf-8")
    piped = run(["render", str(ir_path), "--from-ir", "--format", "markdown"],
                capsys)
    assert piped == direct


def test_from_ir_rejects_garbage(poml_file, capsys):
    path = poml_file("not json", name="bad.ir.json")
    code, out, err = run(["render", path, "--from-ir"], capsys)
    assert code == 2
    assert out == ""
    assert err != ""


def test_stdin_input(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin",
                        types.SimpleNamespace(buffer=io.BytesIO(b"hi")))
    assert run(["render", "-"], capsys) == (0, "hi\n", "")


def test_chat_json_output(poml_file, capsys):
    path = poml_file(
        "<poml><examples>"
        "<example><input>2+2</input><output>4</output></example>"
        "</examples></poml>")
    code, out, err = run(["render", path, "--format", "chat-json"], capsys)
    assert (code, err) == (0, "")
    messages = json.loads(out)
    assert [m["speaker"] for m in messages] == ["human", "ai"]
    assert messages[0]["content"] == [{"text": "2+2"}]


def test_module_entry_point(tmp_path):
    path = tmp_path / "hello.poml"
    path.write_text("hi", encoding="utf-8")
    proc = subprocess.run([sys.executable, "-m", "poml", "render", str(path)],
                          capture_output=True)
    assert proc.returncode == 0
    assert proc.stdout == b"hi\n"
    assert proc.stderr == b""
