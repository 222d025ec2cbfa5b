"""High-level pipeline: compile POML source to IR and render the IR.

compile_source runs parse, template expansion, style resolution, lowering,
and validation, accumulating diagnostics across all stages. render and
render_messages are the one-call front ends the CLI and SDK sit on.
"""

from __future__ import annotations

import json

from .components import ALLOWED_ATTRIBUTES, DEFAULTS_BY_COMPONENT, lower
from .diagnostics import Diagnostic
from .ir import IRNode, serialize_ir, validate
from .parser import parse
from .styles import apply_styles, parse_stylesheet
from .template import expand
from .writers import Message, messages_to_json, split_messages, write

FORMATS = ("markdown", "text", "html", "xml", "chat-json", "ir-json")

_MARKUP_FORMATS = ("markdown", "text", "html", "xml")


def compile_source(source: str | bytes, *, base: str = "<input>", loader=None,
                   context: dict | None = None,
                   stylesheets: list[str] | None = None,
                   ) -> tuple[IRNode, list[Diagnostic]]:
    """Compile markup to a validated IR tree, collecting all diagnostics.

    stylesheets are JSON texts applied in order, later ones winning; context
    values seed the root template scope.
    """
    diags: list[Diagnostic] = []
    sheets = []
    for sheet_text in stylesheets or ():
        ruleset, sheet_diags = parse_stylesheet(sheet_text)
        sheets.append(ruleset)
        diags.extend(sheet_diags)
    tree, parse_diags = parse(source)
    diags.extend(parse_diags)
    expanded, template_diags = expand(tree, context, loader, base)
    diags.extend(template_diags)
    styled, style_diags = apply_styles(expanded, sheets, DEFAULTS_BY_COMPONENT,
                                       ALLOWED_ATTRIBUTES)
    diags.extend(style_diags)
    ir_root, lower_diags = lower(styled, loader, base)
    diags.extend(lower_diags)
    diags.extend(validate(ir_root))
    return ir_root, diags


def render_ir(ir_root: IRNode, *, format: str = "markdown",
              options: dict | None = None) -> tuple[str, list[Diagnostic]]:
    """Render an already-compiled IR tree to the requested format."""
    if format == "ir-json":
        return serialize_ir(ir_root) + "\n", []
    if format == "chat-json":
        messages, diags = split_messages(ir_root, options)
        return (json.dumps(messages_to_json(messages), ensure_ascii=False,
                           indent=2) + "\n", diags)
    if format not in _MARKUP_FORMATS:
        raise ValueError(f"unknown format: {format!r}")
    return write(ir_root, {**(options or {}), "markup-lang": format})


def render(source: str | bytes, *, format: str = "markdown",
           base: str = "<input>", loader=None, context: dict | None = None,
           stylesheets: list[str] | None = None, options: dict | None = None,
           ) -> tuple[str, list[Diagnostic]]:
    """Compile and render in one step."""
    if format not in FORMATS:
        raise ValueError(f"unknown format: {format!r}")
    ir_root, diags = compile_source(source, base=base, loader=loader,
                                    context=context, stylesheets=stylesheets)
    out, write_diags = render_ir(ir_root, format=format, options=options)
    return out, diags + write_diags


def render_messages(source: str | bytes, *, base: str = "<input>",
                    loader=None, context: dict | None = None,
                    stylesheets: list[str] | None = None,
                    options: dict | None = None,
                    ) -> tuple[list[Message], list[Diagnostic]]:
    """Compile and split into speaker-partitioned chat messages."""
    ir_root, diags = compile_source(source, base=base, loader=loader,
                                    context=context, stylesheets=stylesheets)
    messages, split_diags = split_messages(ir_root, options)
    return messages, diags + split_diags
