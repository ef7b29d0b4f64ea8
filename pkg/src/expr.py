"""
Scalar density expressions: parsing, evaluation and symbolic differentiation.

Grammar (one variable, ``x`` or ``r``):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?            # right-associative
    atom   := number | x | r | pi | parameter | func '(' expr ')' | '(' expr ')'

Functions: exp, log, sqrt, abs, sin, cos and sgn (produced by differentiating abs).
"""
import logging
import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, Optional, Tuple, Union

from src.errors import ExprDomainError, ExprSyntaxError, InputError, UnknownIdentifierError

logger = logging.getLogger(__name__)

VARIABLES = ("x", "r")
FUNCTIONS = ("exp", "log", "sqrt", "abs", "sin", "cos", "sgn")
NAMED_CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Parameter:
    name: str


@dataclass(frozen=True)
class UnaryOp:
    op: str  # 'neg' or one of FUNCTIONS
    operand: "ExprAst"


@dataclass(frozen=True)
class BinaryOp:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"


ExprAst = Union[Constant, Variable, Parameter, UnaryOp, BinaryOp]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ExprSyntaxError(f"Unexpected character '{text[pos]}'", pos)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list, parameters: FrozenSet[str]):
        self.tokens = tokens
        self.index = 0
        self.parameters = parameters

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> None:
        token = self.peek()
        if token.text != text:
            if token.kind == "end":
                raise ExprSyntaxError(f"Unexpected end of expression, expected '{text}'", token.pos)
            raise ExprSyntaxError(f"Expected '{text}' but found '{token.text}'", token.pos)
        self.advance()

    def parse(self) -> ExprAst:
        node = self.parse_expr()
        token = self.peek()
        if token.kind != "end":
            raise ExprSyntaxError(f"Unexpected token '{token.text}'", token.pos)
        return node

    def parse_expr(self) -> ExprAst:
        node = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinaryOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> ExprAst:
        node = self.parse_unary()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = BinaryOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> ExprAst:
        token = self.peek()
        if token.text == "-":
            self.advance()
            return UnaryOp("neg", self.parse_unary())
        if token.text == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> ExprAst:
        base = self.parse_atom()
        if self.peek().text == "^":
            self.advance()
            return BinaryOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> ExprAst:
        token = self.advance()
        if token.kind == "number":
            return Constant(float(token.text))
        if token.kind == "name":
            name = token.text
            if name in FUNCTIONS:
                self.expect("(")
                operand = self.parse_expr()
                self.expect(")")
                return UnaryOp(name, operand)
            if name in VARIABLES:
                return Variable(name)
            if name in NAMED_CONSTANTS:
                return Constant(NAMED_CONSTANTS[name])
            if name in self.parameters:
                return Parameter(name)
            raise UnknownIdentifierError(name, token.pos)
        if token.text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if token.kind == "end":
            raise ExprSyntaxError("Unexpected end of expression", token.pos)
        raise ExprSyntaxError(f"Unexpected token '{token.text}'", token.pos)


def parse(text: str, parameters: Iterable[str] = ()) -> ExprAst:
    """
    Parse an ASCII expression into an AST.

    Args:
        text: expression source, e.g. ``"exp(c*r^2)"``
        parameters: names that may appear as late-bound parameters

    Raises:
        ExprSyntaxError: malformed input (carries the 0-based position)
        UnknownIdentifierError: a name that is not a variable, function, constant or parameter
    """
    if not text.isascii():
        bad = next(i for i, ch in enumerate(text) if not ch.isascii())
        raise ExprSyntaxError("Non-ASCII character", bad)
    params = frozenset(parameters)
    clash = params.intersection(VARIABLES + FUNCTIONS + tuple(NAMED_CONSTANTS))
    if clash:
        raise InputError(f"Parameter names shadow reserved identifiers: {sorted(clash)}")
    ast = _Parser(_tokenize(text), params).parse()
    used = variables(ast)
    if len(used) > 1:
        raise InputError(f"Expression mixes variables {sorted(used)}; use a single one of x, r")
    return ast


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------

def walk(ast: ExprAst) -> Iterator[ExprAst]:
    """Pre-order traversal."""
    stack = [ast]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, UnaryOp):
            stack.append(node.operand)
        elif isinstance(node, BinaryOp):
            stack.append(node.right)
            stack.append(node.left)


def variables(ast: ExprAst) -> FrozenSet[str]:
    return frozenset(node.name for node in walk(ast) if isinstance(node, Variable))


def parameters(ast: ExprAst) -> FrozenSet[str]:
    return frozenset(node.name for node in walk(ast) if isinstance(node, Parameter))


def depends_on(ast: ExprAst, var: str) -> bool:
    return var in variables(ast)


def kink_arguments(ast: ExprAst) -> Tuple[ExprAst, ...]:
    """Arguments of abs/sgn nodes: the kinks of the expression are their zeros."""
    return tuple(node.operand for node in walk(ast)
                 if isinstance(node, UnaryOp) and node.op in ("abs", "sgn"))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _safe_exp(u: float) -> float:
    try:
        return math.exp(u)
    except OverflowError:
        return math.inf


def _log(u: float) -> float:
    if u <= 0.0:
        raise ExprDomainError(f"log of non-positive value {u!r}")
    return math.log(u)


def _sqrt(u: float) -> float:
    if u < 0.0:
        raise ExprDomainError(f"sqrt of negative value {u!r}")
    return math.sqrt(u)


def _sgn(u: float) -> float:
    # right-derivative convention: abs'(0) = +1
    return 1.0 if u >= 0.0 else -1.0


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


def _pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0.0:
        raise ExprDomainError("0 raised to a negative power")
    if a < 0.0 and not float(b).is_integer():
        raise ExprDomainError(f"negative base {a!r} raised to non-integer power {b!r}")
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.inf if a > 0.0 or float(b) % 2 == 0 else -math.inf


_UNARY: Dict[str, Callable[[float], float]] = {
    "neg": lambda u: -u,
    "exp": _safe_exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "sgn": _sgn,
}

_BINARY: Dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


@singledispatch
def _compile(node, bindings: Dict[str, float]) -> Callable[[float], float]:
    raise TypeError(f"Cannot compile a {type(node).__name__}")


@_compile.register
def _(node: Constant, bindings):
    value = node.value
    return lambda t: value


@_compile.register
def _(node: Variable, bindings):
    return lambda t: t


@_compile.register
def _(node: Parameter, bindings):
    if node.name not in bindings:
        raise InputError(f"Parameter '{node.name}' is not bound")
    value = float(bindings[node.name])
    return lambda t: value


@_compile.register
def _(node: UnaryOp, bindings):
    inner = _compile(node.operand, bindings)
    fn = _UNARY[node.op]
    return lambda t: fn(inner(t))


@_compile.register
def _(node: BinaryOp, bindings):
    left = _compile(node.left, bindings)
    right = _compile(node.right, bindings)
    fn = _BINARY[node.op]
    return lambda t: fn(left(t), right(t))


def compile_expr(ast: ExprAst, bindings: Optional[Dict[str, float]] = None) -> Callable[[float], float]:
    """Turn an AST into a reentrant closure t -> value with parameters bound once."""
    return _compile(ast, dict(bindings or {}))


def evaluate(ast: ExprAst, bindings: Optional[Dict[str, float]], point: float) -> float:
    return compile_expr(ast, bindings)(float(point))


# ---------------------------------------------------------------------------
# Construction with light constant folding
# ---------------------------------------------------------------------------

def _is_const(node: ExprAst, value: Optional[float] = None) -> bool:
    return isinstance(node, Constant) and (value is None or node.value == value)


def const(value: float) -> Constant:
    return Constant(float(value))


def add(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinaryOp("+", a, b)


def sub(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinaryOp("-", a, b)


def mul(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinaryOp("*", a, b)


def div(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a, 0.0):
        return const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return const(a.value / b.value)
    return BinaryOp("/", a, b)


def power(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return const(1.0)
    return BinaryOp("^", a, b)


def neg(a: ExprAst) -> ExprAst:
    if _is_const(a):
        return const(-a.value)
    if isinstance(a, UnaryOp) and a.op == "neg":
        return a.operand
    return UnaryOp("neg", a)


def func(name: str, a: ExprAst) -> ExprAst:
    if _is_const(a):
        try:
            return const(_UNARY[name](a.value))
        except ExprDomainError:
            pass
    return UnaryOp(name, a)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

@singledispatch
def _derive(node, var: str) -> ExprAst:
    raise TypeError(f"Cannot differentiate a {type(node).__name__}")


@_derive.register
def _(node: Constant, var):
    return const(0.0)


@_derive.register
def _(node: Parameter, var):
    return const(0.0)


@_derive.register
def _(node: Variable, var):
    return const(1.0 if node.name == var else 0.0)


@_derive.register
def _(node: UnaryOp, var):
    u = node.operand
    du = _derive(u, var)
    if _is_const(du, 0.0):
        return const(0.0)
    if node.op == "neg":
        return neg(du)
    if node.op == "exp":
        return mul(node, du)
    if node.op == "log":
        return div(du, u)
    if node.op == "sqrt":
        return div(du, mul(const(2.0), node))
    if node.op == "abs":
        return mul(UnaryOp("sgn", u), du)
    if node.op == "sgn":
        return const(0.0)
    if node.op == "sin":
        return mul(func("cos", u), du)
    if node.op == "cos":
        return mul(neg(func("sin", u)), du)
    raise TypeError(f"Unknown unary operator {node.op}")


@_derive.register
def _(node: BinaryOp, var):
    a, b = node.left, node.right
    da, db = _derive(a, var), _derive(b, var)
    if node.op == "+":
        return add(da, db)
    if node.op == "-":
        return sub(da, db)
    if node.op == "*":
        return add(mul(da, b), mul(a, db))
    if node.op == "/":
        return div(sub(mul(da, b), mul(a, db)), power(b, const(2.0)))
    if node.op == "^":
        if not depends_on(b, var):
            return mul(mul(b, power(a, sub(b, const(1.0)))), da)
        if not depends_on(a, var):
            return mul(mul(node, func("log", a)), db)
        return mul(node, add(mul(db, func("log", a)), div(mul(b, da), a)))
    raise TypeError(f"Unknown binary operator {node.op}")


def differentiate(ast: ExprAst, var: str = "x") -> ExprAst:
    """Symbolic derivative; apply twice for the second derivative."""
    return _derive(ast, var)


# ---------------------------------------------------------------------------
# log f -> psi
# ---------------------------------------------------------------------------

def _is_positive(node: ExprAst) -> bool:
    if isinstance(node, Constant):
        return node.value > 0.0
    if isinstance(node, UnaryOp):
        return node.op == "exp"
    if isinstance(node, BinaryOp):
        if node.op in ("+", "*", "/"):
            return _is_positive(node.left) and _is_positive(node.right)
        if node.op == "^":
            return _is_positive(node.left)
    return False


def log_of(ast: ExprAst) -> ExprAst:
    """
    Build log(ast) for a positive expression, unfolding exp, products, quotients and powers
    so that e.g. log(exp(r^2)) is exactly r^2 instead of overflowing for large r.
    """
    if isinstance(ast, Constant) and ast.value > 0.0:
        return const(math.log(ast.value))
    if isinstance(ast, UnaryOp) and ast.op == "exp":
        return ast.operand
    if isinstance(ast, BinaryOp):
        if ast.op == "*" and _is_positive(ast.left) and _is_positive(ast.right):
            return add(log_of(ast.left), log_of(ast.right))
        if ast.op == "/" and _is_positive(ast.left) and _is_positive(ast.right):
            return sub(log_of(ast.left), log_of(ast.right))
        if ast.op == "^" and _is_positive(ast.left):
            return mul(ast.right, log_of(ast.left))
    return UnaryOp("log", ast)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _precedence(node: ExprAst) -> int:
    if isinstance(node, Constant):
        return 3 if node.value < 0 or math.copysign(1.0, node.value) < 0 else _ATOM
    if isinstance(node, UnaryOp):
        return _PRECEDENCE["neg"] if node.op == "neg" else _ATOM
    if isinstance(node, BinaryOp):
        return _PRECEDENCE[node.op]
    return _ATOM


def _format_number(value: float) -> str:
    if not math.isfinite(value):
        raise InputError(f"Cannot render non-finite constant {value!r}")
    magnitude = abs(value)
    if magnitude.is_integer() and magnitude < 1e15:
        text = str(int(magnitude))
    else:
        text = repr(magnitude)
    return ("-" + text) if math.copysign(1.0, value) < 0 and value != 0.0 else text


def _wrap(node: ExprAst, needs_parens: bool) -> str:
    text = render(node)
    return f"({text})" if needs_parens else text


def render(ast: ExprAst) -> str:
    """Render an AST back to grammar text; parse(render(a)) evaluates identically to a."""
    if isinstance(ast, Constant):
        return _format_number(ast.value)
    if isinstance(ast, (Variable, Parameter)):
        return ast.name
    if isinstance(ast, UnaryOp):
        if ast.op == "neg":
            return "-" + _wrap(ast.operand, _precedence(ast.operand) < 3)
        return f"{ast.op}({render(ast.operand)})"
    if isinstance(ast, BinaryOp):
        p = _PRECEDENCE[ast.op]
        if ast.op == "^":
            left = _wrap(ast.left, _precedence(ast.left) <= p)
            right = _wrap(ast.right, _precedence(ast.right) < 3)
            return f"{left}^{right}"
        left = _wrap(ast.left, _precedence(ast.left) < p)
        right = _wrap(ast.right, _precedence(ast.right) <= p)
        return f"{left}{ast.op}{right}"
    raise TypeError(f"Cannot render a {type(ast).__name__}")
