"""Template expression language.

A small expression grammar over JSON-shaped values: literals, identifiers,
member and index access, arithmetic, comparisons, boolean logic, and the
ternary operator. Evaluation follows familiar scripting conventions: `+`
concatenates when either side is a string, `/` always yields a float, `&&`
and `||` return their operands, and missing dictionary keys or out-of-range
indexes yield null rather than failing.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache


class ExpressionError(ValueError):
    pass


def is_truthy(value) -> bool:
    """Empty dict is truthy; false, null, 0, empty string and empty list are not."""
    if value is None or value is False:
        return False
    if isinstance(value, (int, float)) and value == 0:
        return False
    if isinstance(value, (str, list)) and len(value) == 0:
        return False
    return True


def stringify(value) -> str:
    """Convert an evaluated value to template text."""
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        if math.isfinite(value) and value == int(value):
            return str(int(value))
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"))


# -- tokenizer ---------------------------------------------------------------

_PUNCT = ("==", "!=", "<=", ">=", "&&", "||",
          "+", "-", "*", "/", "%", "<", ">", "!", "?", ":",
          "(", ")", "[", "]", "{", "}", ",", ".")
_KEYWORDS = {"true": True, "false": False, "null": None}
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"',
            "/": "/", "b": "\b", "f": "\f", "0": "\0"}


def _tokenize(source: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    pos = 0
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch in " \t\r\n":
            pos += 1
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and source[pos + 1].isdigit()):
            start = pos
            while pos < n and (source[pos].isdigit() or source[pos] == "."):
                pos += 1
            raw = source[start:pos]
            if raw.count(".") > 1:
                raise ExpressionError(f"malformed number {raw!r}")
            tokens.append(("num", float(raw) if "." in raw else int(raw)))
            continue
        if ch.isalpha() or ch == "_":
            start = pos
            while pos < n and (source[pos].isalnum() or source[pos] == "_"):
                pos += 1
            tokens.append(("name", source[start:pos]))
            continue
        if ch in "\"'":
            quote = ch
            pos += 1
            parts: list[str] = []
            while True:
                if pos >= n:
                    raise ExpressionError("unterminated string literal")
                c = source[pos]
                if c == quote:
                    pos += 1
                    break
                if c == "\\":
                    if pos + 1 >= n:
                        raise ExpressionError("unterminated string escape")
                    nxt = source[pos + 1]
                    if nxt == "u":
                        digits = source[pos + 2:pos + 6]
                        if len(digits) != 4:
                            raise ExpressionError("truncated \\u escape")
                        try:
                            parts.append(chr(int(digits, 16)))
                        except ValueError:
                            raise ExpressionError(f"invalid \\u escape {digits!r}")
                        pos += 6
                    else:
                        parts.append(_ESCAPES.get(nxt, nxt))
                        pos += 2
                else:
                    parts.append(c)
                    pos += 1
            tokens.append(("str", "".join(parts)))
            continue
        for punct in _PUNCT:
            if source.startswith(punct, pos):
                tokens.append(("op", punct))
                pos += len(punct)
                break
        else:
            raise ExpressionError(f"unexpected character {ch!r}")
    tokens.append(("end", None))
    return tokens


# -- parser (AST as nested tuples) --------------------------------------------

class _Reader:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def eat_op(self, symbol: str) -> bool:
        kind, value = self.peek()
        if kind == "op" and value == symbol:
            self.pos += 1
            return True
        return False

    def expect_op(self, symbol: str):
        if not self.eat_op(symbol):
            kind, value = self.peek()
            raise ExpressionError(f"expected {symbol!r}, found {value!r}")


def _parse_primary(r: _Reader):
    kind, value = r.next()
    if kind == "num" or kind == "str":
        return ("lit", value)
    if kind == "name":
        if value in _KEYWORDS:
            return ("lit", _KEYWORDS[value])
        return ("var", value)
    if kind == "op" and value == "(":
        inner = _parse_ternary(r)
        r.expect_op(")")
        return inner
    if kind == "op" and value == "[":
        items = []
        if not r.eat_op("]"):
            while True:
                items.append(_parse_ternary(r))
                if r.eat_op("]"):
                    break
                r.expect_op(",")
        return ("array", items)
    if kind == "op" and value == "{":
        pairs = []
        if not r.eat_op("}"):
            while True:
                key_kind, key = r.next()
                if key_kind not in ("str", "name"):
                    raise ExpressionError("object key must be a string or name")
                r.expect_op(":")
                pairs.append((key, _parse_ternary(r)))
                if r.eat_op("}"):
                    break
                r.expect_op(",")
        return ("object", pairs)
    raise ExpressionError(f"unexpected token {value!r}")


def _parse_postfix(r: _Reader):
    node = _parse_primary(r)
    while True:
        if r.eat_op("."):
            kind, value = r.next()
            if kind != "name":
                raise ExpressionError("expected property name after '.'")
            node = ("member", node, value)
        elif r.eat_op("["):
            index = _parse_ternary(r)
            r.expect_op("]")
            node = ("index", node, index)
        else:
            return node


def _parse_unary(r: _Reader):
    if r.eat_op("!"):
        return ("not", _parse_unary(r))
    if r.eat_op("-"):
        return ("neg", _parse_unary(r))
    return _parse_postfix(r)


_BINARY_LEVELS = (
    ("*", "/", "%"),
    ("+", "-"),
    ("<", "<=", ">", ">="),
    ("==", "!="),
)


def _parse_binary(r: _Reader, level: int = len(_BINARY_LEVELS) - 1):
    if level < 0:
        return _parse_unary(r)
    node = _parse_binary(r, level - 1)
    symbols = _BINARY_LEVELS[level]
    while True:
        kind, value = r.peek()
        if kind == "op" and value in symbols:
            r.next()
            right = _parse_binary(r, level - 1)
            node = ("bin", value, node, right)
        else:
            return node


def _parse_and(r: _Reader):
    node = _parse_binary(r)
    while r.eat_op("&&"):
        node = ("and", node, _parse_binary(r))
    return node


def _parse_or(r: _Reader):
    node = _parse_and(r)
    while r.eat_op("||"):
        node = ("or", node, _parse_and(r))
    return node


def _parse_ternary(r: _Reader):
    condition = _parse_or(r)
    if r.eat_op("?"):
        then = _parse_ternary(r)
        r.expect_op(":")
        otherwise = _parse_ternary(r)
        return ("ternary", condition, then, otherwise)
    return condition


@lru_cache(maxsize=4096)
def _parse(source: str):
    reader = _Reader(_tokenize(source))
    node = _parse_ternary(reader)
    kind, value = reader.peek()
    if kind != "end":
        raise ExpressionError(f"unexpected trailing input {value!r}")
    return node


# -- evaluation ----------------------------------------------------------------

def _type_name(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    return "object"


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _arith(op: str, left, right):
    if op == "+" and (isinstance(left, str) or isinstance(right, str)):
        return stringify(left) + stringify(right)
    if not (_is_number(left) and _is_number(right)):
        raise ExpressionError(
            f"cannot apply {op!r} to {_type_name(left)} and {_type_name(right)}")
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0:
            raise ExpressionError("division by zero")
        return left / right
    if op == "%":
        if right == 0:
            raise ExpressionError("modulo by zero")
        result = math.fmod(left, right)
        if isinstance(left, int) and isinstance(right, int):
            return int(result)
        return result
    raise AssertionError(op)


def _compare(op: str, left, right):
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if not ((_is_number(left) and _is_number(right))
            or (isinstance(left, str) and isinstance(right, str))):
        raise ExpressionError(
            f"cannot compare {_type_name(left)} with {_type_name(right)}")
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def _member(value, name: str):
    if value is None:
        raise ExpressionError(f"cannot read property {name!r} of null")
    if isinstance(value, dict):
        if name in value:
            return value[name]
        if name == "length":
            return len(value)
        return None
    if isinstance(value, (list, str)) and name == "length":
        return len(value)
    raise ExpressionError(
        f"cannot read property {name!r} of {_type_name(value)}")


def _index(value, key):
    if value is None:
        raise ExpressionError("cannot index null")
    if isinstance(value, dict):
        if not isinstance(key, str):
            raise ExpressionError("object index must be a string")
        return value.get(key)
    if isinstance(value, (list, str)):
        if not isinstance(key, int) or isinstance(key, bool):
            raise ExpressionError("array index must be an integer")
        if -len(value) <= key < len(value):
            return value[key]
        return None
    raise ExpressionError(f"cannot index {_type_name(value)}")


def _eval(node, scope: dict):
    tag = node[0]
    if tag == "lit":
        return node[1]
    if tag == "var":
        name = node[1]
        if name not in scope:
            raise ExpressionError(f"undefined variable {name!r}")
        return scope[name]
    if tag == "array":
        return [_eval(item, scope) for item in node[1]]
    if tag == "object":
        return {key: _eval(value, scope) for key, value in node[1]}
    if tag == "member":
        return _member(_eval(node[1], scope), node[2])
    if tag == "index":
        return _index(_eval(node[1], scope), _eval(node[2], scope))
    if tag == "not":
        return not is_truthy(_eval(node[1], scope))
    if tag == "neg":
        value = _eval(node[1], scope)
        if not _is_number(value):
            raise ExpressionError(f"cannot negate {_type_name(value)}")
        return -value
    if tag == "bin":
        op = node[1]
        left = _eval(node[2], scope)
        right = _eval(node[3], scope)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            return _compare(op, left, right)
        return _arith(op, left, right)
    if tag == "and":
        left = _eval(node[1], scope)
        return _eval(node[2], scope) if is_truthy(left) else left
    if tag == "or":
        left = _eval(node[1], scope)
        return left if is_truthy(left) else _eval(node[2], scope)
    if tag == "ternary":
        if is_truthy(_eval(node[1], scope)):
            return _eval(node[2], scope)
        return _eval(node[3], scope)
    raise AssertionError(tag)


def evaluate(source: str, scope: dict):
    """Evaluate an expression against a variable scope.

    Raises ExpressionError for syntax errors, unknown identifiers, and type
    misuse. Never mutates the scope.
    """
    return _eval(_parse(source), scope)
