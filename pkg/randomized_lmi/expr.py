"""Scalar expressions in the uncertain parameters.

An expression is either an ``Expr`` or a plain number. Parameters are
nullary ``Expr`` nodes (``Param("c")``), negation is ``Expr("-", a)``,
binary operators are ``+ - * /`` and powers are ``Expr("^", base, k)`` with
an integer exponent ``k``.
"""
import re
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np

Number = (int, float)


class ExprSyntaxError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    def __init__(self, message, subexpression):
        super().__init__(f"{message}: {format_expr(subexpression)}")
        self.subexpression = subexpression


class Expr:
    """A node with an operator and 0 or more arguments.
    Expr('x') is a parameter, Expr('-', x) a negation, Expr('+', x, 1) a sum.
    """

    __slots__ = ("op", "args")

    def __init__(self, op, *args):
        self.op = str(op)
        self.args = args

    def __neg__(self):
        return Expr("-", self)

    def __add__(self, rhs):
        return Expr("+", self, rhs)

    def __sub__(self, rhs):
        return Expr("-", self, rhs)

    def __mul__(self, rhs):
        return Expr("*", self, rhs)

    def __truediv__(self, rhs):
        return Expr("/", self, rhs)

    def __pow__(self, rhs):
        if not isinstance(rhs, int):
            raise TypeError("exponents must be integers")
        return Expr("^", self, rhs)

    def __radd__(self, lhs):
        return Expr("+", lhs, self)

    def __rsub__(self, lhs):
        return Expr("-", lhs, self)

    def __rmul__(self, lhs):
        return Expr("*", lhs, self)

    def __rtruediv__(self, lhs):
        return Expr("/", lhs, self)

    def __eq__(self, other):
        "'x == y' compares trees; it does not build an Expr."
        return (
            isinstance(other, Expr)
            and self.op == other.op
            and self.args == other.args
        )

    def __hash__(self):
        return hash(self.op) ^ hash(self.args)

    def __repr__(self):
        return format_expr(self)

    @property
    def is_param(self):
        return not self.args


Expression = Union[Expr, float]


def Constant(value) -> float:
    return float(value)


def Param(name: str) -> Expr:
    """A parameter is just an Expr with no args."""
    if not IDENTIFIER.fullmatch(name):
        raise ValueError(f"invalid parameter name {name!r}")
    return Expr(name)


def format_expr(e: Expression) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Number):
        text = repr(float(e))
        return f"({text})" if text.startswith("-") else text
    if e.is_param:
        return e.op
    if e.op == "-" and len(e.args) == 1:
        operand = e.args[0]
        if isinstance(operand, Number):
            return f"-({format_expr(operand)})"
        return "-" + format_expr(operand)
    if e.op == "^":
        base, exponent = e.args
        text = format_expr(base)
        if isinstance(base, Expr) and base.op == "-" and len(base.args) == 1:
            text = "(" + text + ")"
        return f"({text} ^ {exponent})"
    left, right = e.args
    return f"({format_expr(left)} {e.op} {format_expr(right)})"


def subexpressions(e: Expression):
    """Yield the subexpressions of an Expression (including e itself)."""
    yield e
    if isinstance(e, Expr) and e.op != "^":
        for arg in e.args:
            yield from subexpressions(arg)
    elif isinstance(e, Expr):
        yield from subexpressions(e.args[0])


def free_params(e: Expression) -> set:
    return {
        sub.op
        for sub in subexpressions(e)
        if isinstance(sub, Expr) and sub.is_param
    }


# ______________________________________________________________________________
# Evaluation


def evaluate(e: Expression, q: Dict[str, Union[float, np.ndarray]]):
    """Evaluate e with the parameter values in q.

    Values may be floats or equal-length arrays (one entry per sample), in
    which case the result is an array too.
    """
    if isinstance(e, Number):
        return float(e)
    if e.is_param:
        try:
            return q[e.op]
        except KeyError:
            raise EvaluationError("unbound parameter", e) from None

    if e.op == "^":
        base, exponent = e.args
        value = evaluate(base, q)
        if exponent < 0 and np.any(np.asarray(value) == 0):
            raise EvaluationError("division by zero", e)
        with np.errstate(over="ignore"):
            result = np.power(np.asarray(value, dtype=float), exponent)
        return _finite(result, e)

    if len(e.args) == 1:
        return -evaluate(e.args[0], q)

    left, right = (evaluate(arg, q) for arg in e.args)
    if e.op == "+":
        result = np.add(left, right)
    elif e.op == "-":
        result = np.subtract(left, right)
    elif e.op == "*":
        result = np.multiply(left, right)
    else:
        if np.any(np.asarray(right) == 0):
            raise EvaluationError("division by zero", e)
        result = np.divide(left, right)
    return _finite(result, e)


def _finite(result, e):
    if not np.all(np.isfinite(result)):
        raise EvaluationError("non-finite value", e)
    return result if np.ndim(result) else float(result)


# ______________________________________________________________________________
# Parsing
#
# expr   := term (("+"|"-") term)*
# term   := factor (("*"|"/") factor)*
# factor := "-" factor | base
# base   := atom ("^" integer)?
# atom   := number | identifier | "(" expr ")"

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
TOKEN = re.compile(
    r"(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position].isspace():
            position += 1
            continue
        match = TOKEN.match(text, position)
        if not match or match.lastgroup is None:
            offset = len(text[:position].encode("utf-8"))
            raise ExprSyntaxError(
                f"unknown character {text[position]!r}", offset
            )
        start = match.start(match.lastgroup)
        offset = len(text[:start].encode("utf-8"))
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), offset))
        position = match.end()
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


@dataclass
class Parser:
    tokens: List[Token]
    position: int = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def accept(self, text) -> Optional[Token]:
        token = self.current
        if token.kind == "op" and token.text == text:
            self.position += 1
            return token
        return None

    def expect(self, text):
        if not self.accept(text):
            self.fail(f"expected {text!r}")

    def fail(self, message):
        token = self.current
        found = token.text or "end of input"
        raise ExprSyntaxError(f"{message}, found {found!r}", token.offset)

    def expr(self) -> Expression:
        node = self.term()
        while True:
            if self.accept("+"):
                node = Expr("+", node, self.term())
            elif self.accept("-"):
                node = Expr("-", node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.factor()
        while True:
            if self.accept("*"):
                node = Expr("*", node, self.factor())
            elif self.accept("/"):
                node = Expr("/", node, self.factor())
            else:
                return node

    def factor(self) -> Expression:
        if self.accept("-"):
            token, following = self.current, self.tokens[self.position + 1 :]
            if token.kind == "number" and following[0].text != "^":
                # a signed literal is a negative constant
                self.position += 1
                return -float(token.text)
            return Expr("-", self.factor())
        return self.base()

    def base(self) -> Expression:
        node = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            token = self.current
            if token.kind != "number" or not token.text.isdigit():
                self.fail("expected an integer exponent")
            self.position += 1
            node = Expr("^", node, sign * int(token.text))
        return node

    def atom(self) -> Expression:
        token = self.current
        if token.kind == "number":
            self.position += 1
            return float(token.text)
        if token.kind == "name":
            self.position += 1
            return Expr(token.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, a parameter or '('")


def parse(text: str) -> Expression:
    parser = Parser(tokenize(text))
    node = parser.expr()
    if parser.current.kind != "end":
        parser.fail("unexpected token")
    return node
