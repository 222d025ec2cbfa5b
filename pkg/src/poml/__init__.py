"""POML rendering engine: tolerant parsing, templating, styling, IR, writers."""

from .diagnostics import ERROR, WARNING, Diagnostic, has_errors
from .engine import FORMATS, compile_source, render, render_ir, render_messages
from .ir import IRNode, deserialize_ir, serialize_ir, validate
from .writers import Message, messages_to_json, split_messages, write

__all__ = [
    "Diagnostic", "ERROR", "WARNING", "has_errors",
    "FORMATS", "compile_source", "render", "render_ir", "render_messages",
    "IRNode", "deserialize_ir", "serialize_ir", "validate",
    "Message", "messages_to_json", "split_messages", "write",
]
