"""Command-line front end: render, lint, and IR inspection for .poml files.

Diagnostics go to stderr, one per line, as `severity code file:start-end
message`. Exit codes: 0 success (warnings allowed unless --strict), 1 when
the pipeline reported errors but still produced output, 2 when the input
could not be used at all.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .diagnostics import ERROR, WARNING, has_errors
from .engine import FORMATS, compile_source, render_ir
from .ir import IRError, deserialize_ir, serialize_ir
from .resources import FileSystemLoader

_RESET = "\x1b[0m"
_COLORS = {ERROR: "\x1b[31m", WARNING: "\x1b[33m"}


class _InputError(Exception):
    """Unusable input: missing file, bad context JSON, invalid IR."""


def _add_common_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("input", help="path to a .poml file, or - for stdin")
    sub.add_argument("--var", action="append", default=[],
                     metavar="NAME=VALUE",
                     help="bind a string variable in the root scope")
    sub.add_argument("--context", metavar="FILE",
                     help="JSON object file merged into the root scope")
    sub.add_argument("--stylesheet", action="append", default=[],
                     metavar="FILE",
                     help="stylesheet JSON file; repeatable, later files win")
    sub.add_argument("--strict", action="store_true",
                     help="treat warnings as failures")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poml", description="Render POML prompt markup.")
    commands = parser.add_subparsers(dest="command", required=True)

    render_cmd = commands.add_parser(
        "render", help="render a file to the chosen output format")
    _add_common_arguments(render_cmd)
    render_cmd.add_argument("--format", choices=FORMATS, default="markdown")
    render_cmd.add_argument("--from-ir", action="store_true",
                            help="treat input as IR JSON from `poml ir`")

    lint_cmd = commands.add_parser(
        "lint", help="run the pipeline and report diagnostics")
    _add_common_arguments(lint_cmd)
    lint_cmd.add_argument("--json", action="store_true", dest="as_json",
                          help="emit diagnostics as a JSON array on stdout")

    ir_cmd = commands.add_parser(
        "ir", help="print the canonical IR JSON for a file")
    _add_common_arguments(ir_cmd)
    return parser


def _read_input(path: str):
    """Returns (bytes, display label, loader, base path for includes)."""
    if path == "-":
        data = sys.stdin.buffer.read()
        return data, "<stdin>", FileSystemLoader(os.getcwd()), "stdin.poml"
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc.strerror}") from None
    directory = os.path.dirname(os.path.abspath(path))
    return data, path, FileSystemLoader(directory), os.path.basename(path)


def _build_context(args) -> dict:
    context: dict = {}
    if args.context:
        try:
            with open(args.context, encoding="utf-8") as handle:
                payload = json.load(handle)
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise _InputError(
                f"cannot load context {args.context}: {exc}") from None
        if not isinstance(payload, dict):
            raise _InputError(
                f"context file {args.context} must hold a JSON object")
        context.update(payload)
    for binding in args.var:
        name, sep, value = binding.partition("=")
        if not sep or not name:
            raise _InputError(
                f"--var expects NAME=VALUE, got {binding!r}")
        context[name] = value
    return context


def _read_stylesheets(args) -> list[str]:
    texts = []
    for path in args.stylesheet:
        try:
            with open(path, encoding="utf-8") as handle:
                texts.append(handle.read())
        except OSError as exc:
            raise _InputError(
                f"cannot read stylesheet {path}: {exc.strerror}") from None
    return texts


def _emit_diagnostics(diags, label: str) -> None:
    color = sys.stderr.isatty() and not os.environ.get("POML_NO_COLOR")
    for diag in diags:
        line = diag.format(label)
        if color:
            line = _COLORS.get(diag.severity, "") + line + _RESET
        print(line, file=sys.stderr)


def _exit_code(diags, strict: bool) -> int:
    if has_errors(diags):
        return 1
    if strict and any(d.severity == WARNING for d in diags):
        return 1
    return 0


def _compile(args):
    data, label, loader, base = _read_input(args.input)
    context = _build_context(args)
    sheets = _read_stylesheets(args)
    ir_root, diags = compile_source(data, base=base, loader=loader,
                                    context=context, stylesheets=sheets)
    return ir_root, diags, label


def _cmd_render(args) -> int:
    if args.from_ir:
        data, label, _, _ = _read_input(args.input)
        try:
            ir_root = deserialize_ir(data.decode("utf-8"))
        except (IRError, UnicodeDecodeError) as exc:
            raise _InputError(f"invalid IR input: {exc}") from None
        diags = []
    else:
        ir_root, diags, label = _compile(args)
    out, write_diags = render_ir(ir_root, format=args.format)
    diags = diags + write_diags
    sys.stdout.write(out)
    _emit_diagnostics(diags, label)
    return _exit_code(diags, args.strict)


def _cmd_lint(args) -> int:
    _, diags, label = _compile(args)
    if args.as_json:
        payload = [{"severity": d.severity, "code": d.code,
                    "span": list(d.span), "message": d.message}
                   for d in diags]
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        _emit_diagnostics(diags, label)
    return _exit_code(diags, args.strict)


def _cmd_ir(args) -> int:
    ir_root, diags, label = _compile(args)
    sys.stdout.write(serialize_ir(ir_root) + "\n")
    _emit_diagnostics(diags, label)
    return _exit_code(diags, args.strict)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "lint":
            return _cmd_lint(args)
        return _cmd_ir(args)
    except _InputError as exc:
        print(f"poml: {exc}", file=sys.stderr)
        return 2
