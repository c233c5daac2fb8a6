"""A small arithmetic language for fields given in configuration files.

Grammar (``^`` is right-associative and unary signs bind tighter than it,
so ``-2^2 == 4`` and ``2^3^2 == 512``)::

    expr   := term (("+" | "-") term)*
    term   := power (("*" | "/") power)*
    power  := unary ("^" power)?
    unary  := ("-" | "+") unary | atom
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are variables (``x1``, ``s``, ``xi2``, ...) or the constant ``pi``.
Evaluation is vectorised: bindings may be numpy arrays of a common shape.
"""

from dataclasses import dataclass
import re
from typing import Dict, Tuple

import numpy as np

__all__ = ["ExpressionError", "Expression", "parse_expression", "eval_expression", "FUNCTIONS"]


class ExpressionError(ValueError):
    """Parse or evaluation error; ``pos`` is the 1-based column in the source."""

    def __init__(self, message, pos=None, source=None):
        self.message = message
        self.pos = pos
        self.source = source
        where = f" at column {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}
CONSTANTS = {"pi": np.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ExpressionError(f"unexpected character {text[i]!r}", i + 1, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start + 1))
        i = m.end()
    out.append(("end", "", n + 1))
    return out


# syntax tree nodes: tuples tagged by their first entry
#   ("num", value, pos) ("var", name, pos) ("neg", node, pos)
#   ("bin", op, left, right, pos) ("call", name, args, pos)


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            got = "end of input" if kind == "end" else repr(val)
            raise ExpressionError(f"expected {value!r}, got {got}", pos, self.text)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = ("bin", op, node, self.term(), pos)
        return node

    def term(self):
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = ("bin", op, node, self.power(), pos)
        return node

    def power(self):
        node = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            _, _, pos = self.take()
            node = ("bin", "^", node, self.power(), pos)
        return node

    def unary(self):
        kind, val, pos = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            inner = self.unary()
            return ("neg", inner, pos) if val == "-" else inner
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", float(val), pos)
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", pos, self.text)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[val][0]
                if len(args) != arity:
                    raise ExpressionError(
                        f"{val} takes {arity} argument(s), got {len(args)}", pos, self.text
                    )
                return ("call", val, tuple(args), pos)
            if val in FUNCTIONS:
                raise ExpressionError(f"function {val!r} needs arguments", pos, self.text)
            return ("var", val, pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"unexpected {got}", pos, self.text)


def _names(node, acc):
    tag = node[0]
    if tag == "var":
        if node[1] not in CONSTANTS:
            acc.add(node[1])
    elif tag == "neg":
        _names(node[1], acc)
    elif tag == "bin":
        _names(node[2], acc)
        _names(node[3], acc)
    elif tag == "call":
        for a in node[2]:
            _names(a, acc)
    return acc


@dataclass(frozen=True)
class Expression:
    """Parsed expression; ``variables`` lists its free names."""

    source: str
    tree: tuple
    variables: Tuple[str, ...]

    def __call__(self, **bindings):
        return eval_expression(self, bindings)

    def __str__(self):
        return self.source


def parse_expression(text: str) -> Expression:
    if not isinstance(text, str):
        raise ExpressionError("expression must be a string")
    if not text.strip():
        raise ExpressionError("empty expression", 1, text)
    tree = _Parser(text).parse()
    return Expression(text, tree, tuple(sorted(_names(tree, set()))))


def _domain(msg, node, src):
    return ExpressionError(msg, node[-1], src)


def _eval(node, env, src):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        name = node[1]
        if name in env:
            return env[name]
        if name in CONSTANTS:
            return CONSTANTS[name]
        raise ExpressionError(f"unbound variable {name!r}", node[2], src)
    if tag == "neg":
        return -_eval(node[1], env, src)
    if tag == "call":
        args = [np.asarray(_eval(a, env, src), dtype=float) for a in node[2]]
        name = node[1]
        if name == "sqrt" and np.any(args[0] < 0):
            raise _domain("sqrt of a negative number", node, src)
        with np.errstate(over="ignore"):
            return FUNCTIONS[name][1](*args)
    op = node[1]
    a = np.asarray(_eval(node[2], env, src), dtype=float)
    b = np.asarray(_eval(node[3], env, src), dtype=float)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(b == 0):
            raise _domain("division by zero", node, src)
        return a / b
    # power
    if np.any((a == 0) & (b < 0)):
        raise _domain("zero raised to a negative power", node, src)
    if np.any((a < 0) & (b != np.round(b))):
        raise _domain("negative base with a non-integer exponent", node, src)
    with np.errstate(over="ignore"):
        return np.power(a, b)


def eval_expression(e, bindings: Dict[str, object]):
    """Evaluate ``e`` (an :class:`Expression` or source text) under ``bindings``.

    Returns a float for scalar bindings and an array otherwise.
    """
    if isinstance(e, str):
        e = parse_expression(e)
    env = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    out = np.asarray(_eval(e.tree, env, e.source), dtype=float)
    shape = np.broadcast_shapes(*(v.shape for v in env.values())) if env else ()
    out = np.broadcast_to(out, np.broadcast_shapes(out.shape, shape))
    return float(out) if out.ndim == 0 else np.array(out)
