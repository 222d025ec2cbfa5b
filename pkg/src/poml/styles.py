"""Style cascade.

Stylesheets are flat JSON objects mapping a selector (component name or
`.class`) to attribute assignments. The computed value of each attribute
follows a fixed precedence: registry defaults, then element rules, then class
rules, then inline attributes; later sheets override earlier ones within a
layer. `syntax` and `speaker` additionally inherit from the nearest ancestor
that resolved them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .diagnostics import ERROR, WARNING, Diagnostic
from .parser import SourceNode, normalize_attribute_name

UNIVERSAL_ATTRS = frozenset({
    "speaker", "syntax", "className", "caption", "captionStyle",
    "captionTextTransform", "captionEnding", "blankLine",
})

INHERITED_ATTRS = ("syntax", "speaker")


@dataclass(frozen=True)
class StyleRule:
    selector: str
    attrs: dict


@dataclass(frozen=True)
class StyleRuleSet:
    rules: list[StyleRule] = field(default_factory=list)


@dataclass(frozen=True)
class ComputedStyle:
    attributes: dict
    provenance: dict


@dataclass
class ComponentNode:
    name: str  # component name, or "#text" for text leaves
    attrs: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    children: list["ComponentNode"] = field(default_factory=list)
    span: tuple[int, int] = (0, 0)
    text: str | None = None


def parse_stylesheet(text: str) -> tuple[StyleRuleSet, list[Diagnostic]]:
    """Parse a JSON stylesheet; malformed entries are skipped, not fatal."""
    diags: list[Diagnostic] = []
    try:
        data = json.loads(text)
    except ValueError as exc:
        diags.append(Diagnostic(ERROR, "invalid-stylesheet",
                                f"stylesheet is not valid JSON: {exc}"))
        return StyleRuleSet([]), diags
    if not isinstance(data, dict):
        diags.append(Diagnostic(ERROR, "invalid-stylesheet",
                                "stylesheet must be a JSON object"))
        return StyleRuleSet([]), diags
    rules: list[StyleRule] = []
    for selector, attrs in data.items():
        if not selector or not isinstance(attrs, dict):
            diags.append(Diagnostic(ERROR, "invalid-style-rule",
                                    f"rule {selector!r} must map a selector "
                                    "to an attribute object"))
            continue
        if selector.startswith("."):
            if len(selector) == 1:
                diags.append(Diagnostic(ERROR, "invalid-style-rule",
                                        "empty class selector"))
                continue
            normalized = selector
        else:
            normalized = selector.lower()
        rules.append(StyleRule(normalized, {
            normalize_attribute_name(k): v for k, v in attrs.items()
        }))
    return StyleRuleSet(rules), diags


def resolve_style(element: SourceNode, sheets: list[StyleRuleSet],
                  defaults: dict) -> ComputedStyle:
    """Cascade one element's attributes; see module docstring for precedence."""
    attrs: dict = {}
    provenance: dict = {}

    def put(layer: str, mapping: dict) -> None:
        for key, value in mapping.items():
            attrs[key] = value
            provenance[key] = layer

    put("default", defaults)
    name = element.name
    for sheet in sheets:
        for rule in sheet.rules:
            if rule.selector == name:
                put("element-rule", rule.attrs)
    inline = {a.name: a.value for a in element.attributes}
    class_name = inline.get("className", attrs.get("className"))
    if class_name:
        selector = "." + str(class_name)
        for sheet in sheets:
            for rule in sheet.rules:
                if rule.selector == selector:
                    put("class-rule", rule.attrs)
    put("inline", inline)
    return ComputedStyle(attrs, provenance)


def _gather_stylesheets(node: SourceNode, embedded: list[StyleRuleSet],
                        diags: list[Diagnostic]) -> None:
    for child in node.children:
        if child.kind != "element":
            continue
        if child.name == "stylesheet":
            body = "".join(t.text or "" for t in child.children
                           if t.kind == "text")
            ruleset, sheet_diags = parse_stylesheet(body)
            for d in sheet_diags:
                diags.append(Diagnostic(d.severity, d.code, d.message,
                                        child.span))
            embedded.append(ruleset)
        else:
            _gather_stylesheets(child, embedded, diags)


def apply_styles(root: SourceNode, sheets: list[StyleRuleSet],
                 defaults_by_component: dict, allowed: dict | None = None,
                 ) -> tuple[ComponentNode, list[Diagnostic]]:
    """Resolve the whole tree to ComponentNodes, removing stylesheet tags.

    Embedded stylesheet bodies are appended after the supplied sheets, so an
    embedded rule wins against an external one for the same selector.
    """
    diags: list[Diagnostic] = []
    embedded: list[StyleRuleSet] = []
    _gather_stylesheets(root, embedded, diags)
    all_sheets = list(sheets) + embedded

    def convert(element: SourceNode, inherited: dict) -> ComponentNode:
        style = resolve_style(element, all_sheets,
                              defaults_by_component.get(element.name, {}))
        attrs = dict(style.attributes)
        provenance = dict(style.provenance)
        for key in INHERITED_ATTRS:
            if key not in attrs and key in inherited:
                attrs[key], provenance[key] = inherited[key]
        if allowed is not None and element.name in allowed:
            permitted = allowed[element.name] | UNIVERSAL_ATTRS
            for a in element.attributes:
                if a.name not in permitted:
                    diags.append(Diagnostic(
                        WARNING, "unknown-attribute",
                        f"component <{element.name}> does not use "
                        f"attribute {a.name!r}", a.span))
        next_inherited = dict(inherited)
        for key in INHERITED_ATTRS:
            if key in style.attributes:
                next_inherited[key] = (attrs[key], provenance[key])
        node = ComponentNode(element.name, attrs, provenance,
                             span=element.span)
        for child in element.children:
            if child.kind == "text":
                node.children.append(ComponentNode(
                    "#text", span=child.span, text=child.text))
            elif child.kind == "element" and child.name != "stylesheet":
                node.children.append(convert(child, next_inherited))
        return node

    return convert(root, {}), diags
