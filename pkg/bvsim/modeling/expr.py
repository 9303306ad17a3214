"""
A small arithmetic language for vector fields, control segments and cost terms.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative, binds tighter than unary minus
    atom    := number | variable | name '(' expr ')' | '(' expr ')'

Variables are ``t``, ``k``, ``x1..xn``, ``u1..um`` and ``v1..vl`` (1-based). Functions are
``sin cos exp log abs sqrt``.
"""
import re
import math
import numpy as np
from dataclasses import dataclass
from bvsim import base
from bvsim.base import (ArityError, EvaluationError, ExprSyntaxError, UnknownIdentifierError,
                        UnsupportedDerivativeError)

FUNCTIONS = ('sin', 'cos', 'exp', 'log', 'abs', 'sqrt')
BINARY_OPS = ('+', '-', '*', '/', '^')
_VAR_RE = re.compile(r'^(?:t|k|([xuv])([0-9]+))$')
_TOKEN_RE = re.compile(r'\s*(?:(?P<num>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)'
                       r'|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))')


class Expr(object):
    """Base class of expression nodes. Nodes are immutable and compare structurally."""

    def serialize(self) -> str:
        """Produce source text that parses back to an equal tree."""
        return serialize(self)

    def variables(self) -> set:
        """Names of the variables occurring in the tree."""
        return variables(self)

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen = True)
class Num(Expr):
    value: float


@dataclass(frozen = True)
class Var(Expr):
    name: str


@dataclass(frozen = True)
class Unary(Expr):
    op: str  # 'neg' or a function name
    arg: Expr


@dataclass(frozen = True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


def check_variable(name: str, dims: dict = None) -> None:
    """
    Validate a variable name against declared dimensions.

    :name (str): Variable name.
    :dims (dict, default = None): Upper index per family, e.g. {'x': 6, 'u': 3, 'v': 0}.
    """
    match = _VAR_RE.match(name)
    if match is None:
        raise UnknownIdentifierError(f"Unknown identifier '{name}'")
    family, index = match.group(1), match.group(2)
    if family is None:
        return
    index = int(index)
    if index < 1:
        raise UnknownIdentifierError(f"Variable indices start at 1, got '{name}'")
    if dims is not None and index > dims.get(family, 0):
        raise UnknownIdentifierError(f"Variable '{name}' exceeds declared dimension {family}={dims.get(family, 0)}")


class _Parser(object):
    """Recursive descent over the token list."""

    def __init__(self, source: str, dims: dict = None):
        self.source = source
        self.dims = dims
        self.tokens = self._tokenize(source)
        self.ix = 0

    @staticmethod
    def _tokenize(source: str) -> base.List[tuple]:
        tokens, pos = [], 0
        stripped_end = len(source.rstrip())
        while pos < stripped_end:
            match = _TOKEN_RE.match(source, pos)
            if match is None or match.end() == pos:
                bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
                raise ExprSyntaxError(f"Unexpected character '{source[bad]}'", bad)
            kind = match.lastgroup
            start = match.start(kind)
            tokens.append((kind, match.group(kind), start))
            pos = match.end()
        tokens.append(('end', '', len(source)))
        return tokens

    def peek(self) -> tuple:
        return self.tokens[self.ix]

    def take(self) -> tuple:
        token = self.tokens[self.ix]
        self.ix += 1
        return token

    def expect(self, text: str) -> tuple:
        token = self.take()
        if token[1] != text:
            raise ExprSyntaxError(f"Expected '{text}' but found '{token[1] or 'end of input'}'", token[2])
        return token

    def parse(self) -> Expr:
        if self.peek()[0] == 'end':
            raise ExprSyntaxError("Empty expression", 0)
        tree = self.expr()
        token = self.peek()
        if token[0] != 'end':
            raise ExprSyntaxError(f"Unexpected token '{token[1]}'", token[2])
        return tree

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ('+', '-') and self.peek()[0] == 'op':
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ('*', '/') and self.peek()[0] == 'op':
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == '-' and self.peek()[0] == 'op':
            self.take()
            return Unary('neg', self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        if self.peek()[1] == '^':
            self.take()
            node = Binary('^', node, self.unary())
        return node

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == 'num':
            return Num(float(text))
        if kind == 'name':
            if self.peek()[1] == '(':
                return self.call(text, pos)
            if text in FUNCTIONS:
                raise ArityError(f"Function '{text}' expects 1 argument", pos)
            check_variable(text, self.dims)
            return Var(text)
        if text == '(':
            node = self.expr()
            self.expect(')')
            return node
        raise ExprSyntaxError(f"Unexpected token '{text or 'end of input'}'", pos)

    def call(self, name: str, pos: int) -> Expr:
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(f"Unknown function '{name}'", pos)
        self.expect('(')
        args = []
        if self.peek()[1] != ')':
            args.append(self.expr())
            while self.peek()[1] == ',':
                self.take()
                args.append(self.expr())
        self.expect(')')
        if len(args) != 1:
            raise ArityError(f"Function '{name}' expects 1 argument, got {len(args)}", pos)
        return Unary(name, args[0])


def parse(source: str, dims: dict = None) -> Expr:
    """
    Parse expression source into a tree.

    :source (str): Expression text.
    :dims (dict, default = None): Declared dimensions {'x': n, 'u': m, 'v': l} for index checks.
    :returns (Expr): The parsed tree.
    """
    return _Parser(source, dims).parse()


def serialize(e: Expr) -> str:
    """
    Fully parenthesised source for a tree.

    :e (Expr): Tree to write out.
    :returns (str): Text that parses back to an equal tree.
    """
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == 'neg':
            return f"(-{serialize(e.arg)})"
        return f"{e.op}({serialize(e.arg)})"
    return f"({serialize(e.left)} {e.op} {serialize(e.right)})"


def variables(e: Expr) -> set:
    """
    Collect variable names.

    :e (Expr): Tree to inspect.
    :returns (set): Variable names occurring in e.
    """
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.arg)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    return set()


def _apply_unary(op: str, a: float) -> float:
    if op == 'neg':
        return -a
    if op == 'log' and a <= 0:
        raise EvaluationError(f"log of non-positive value {a}")
    if op == 'sqrt' and a < 0:
        raise EvaluationError(f"sqrt of negative value {a}")
    try:
        return abs(a) if op == 'abs' else getattr(math, op)(a)
    except (OverflowError, ValueError) as e:
        raise EvaluationError(f"{op}({a}) failed: {e}")


def _apply_binary(op: str, a: float, b: float) -> float:
    if op == '+':
        return a + b
    if op == '-':
        return a - b
    if op == '*':
        return a * b
    if op == '/':
        if b == 0:
            raise EvaluationError("Division by zero")
        return a / b
    try:
        return math.pow(a, b)
    except (OverflowError, ValueError, ZeroDivisionError) as e:
        raise EvaluationError(f"{a} ^ {b} failed: {e}")


def evaluate(e: Expr, env: dict) -> float:
    """
    Evaluate a tree in IEEE double arithmetic.

    :e (Expr): Tree to evaluate.
    :env (dict): Variable assignment, name -> value.
    :returns (float): The value.
    """
    if isinstance(e, Num):
        value = e.value
    elif isinstance(e, Var):
        try:
            value = float(env[e.name])
        except KeyError:
            raise EvaluationError(f"Variable '{e.name}' is not assigned")
    elif isinstance(e, Unary):
        value = _apply_unary(e.op, evaluate(e.arg, env))
    else:
        value = _apply_binary(e.op, evaluate(e.left, env), evaluate(e.right, env))
    if not math.isfinite(value):
        raise EvaluationError(f"Non-finite value while evaluating {serialize(e)}")
    return value


# Smart constructors: constant folding and 0/1 identities, nothing more.

def _const(e: Expr) -> base.Optional[float]:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Unary) and e.op == 'neg' and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def _num(value: float) -> Expr:
    if value < 0:
        return Unary('neg', Num(-value))
    return Num(value + 0.0)


def _fold(op: str, *args: Expr) -> base.Optional[Expr]:
    values = [_const(a) for a in args]
    if any(v is None for v in values):
        return None
    try:
        result = _apply_unary(op, values[0]) if len(values) == 1 else _apply_binary(op, *values)
    except EvaluationError:
        return None
    return _num(result) if math.isfinite(result) else None


def neg(a: Expr) -> Expr:
    if isinstance(a, Unary) and a.op == 'neg':
        return a.arg
    if _const(a) == 0:
        return ZERO
    return Unary('neg', a)


def add(a: Expr, b: Expr) -> Expr:
    folded = _fold('+', a, b)
    if folded is not None:
        return folded
    if _const(a) == 0:
        return b
    if _const(b) == 0:
        return a
    return Binary('+', a, b)


def sub(a: Expr, b: Expr) -> Expr:
    folded = _fold('-', a, b)
    if folded is not None:
        return folded
    if _const(b) == 0:
        return a
    if _const(a) == 0:
        return neg(b)
    return Binary('-', a, b)


def mul(a: Expr, b: Expr) -> Expr:
    folded = _fold('*', a, b)
    if folded is not None:
        return folded
    if _const(a) == 0 or _const(b) == 0:
        return ZERO
    if _const(a) == 1:
        return b
    if _const(b) == 1:
        return a
    return Binary('*', a, b)


def div(a: Expr, b: Expr) -> Expr:
    folded = _fold('/', a, b)
    if folded is not None:
        return folded
    if _const(a) == 0:
        return ZERO
    if _const(b) == 1:
        return a
    return Binary('/', a, b)


def power(a: Expr, b: Expr) -> Expr:
    folded = _fold('^', a, b)
    if folded is not None:
        return folded
    if _const(b) == 0:
        return ONE
    if _const(b) == 1:
        return a
    return Binary('^', a, b)


def func(name: str, a: Expr) -> Expr:
    folded = _fold(name, a)
    return folded if folded is not None else Unary(name, a)


def differentiate(e: Expr, var: str) -> Expr:
    """
    Symbolic derivative with respect to one variable.

    :e (Expr): Tree to differentiate.
    :var (str): Variable name, e.g. 'x1' or 't'.
    :returns (Expr): Derivative tree, lightly simplified.
    """
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if var not in variables(e):
        return ZERO

    if isinstance(e, Unary):
        a, da = e.arg, differentiate(e.arg, var)
        if e.op == 'neg':
            return neg(da)
        if e.op == 'sin':
            return mul(func('cos', a), da)
        if e.op == 'cos':
            return neg(mul(func('sin', a), da))
        if e.op == 'exp':
            return mul(func('exp', a), da)
        if e.op == 'log':
            return div(da, a)
        if e.op == 'sqrt':
            return div(da, mul(Num(2.0), func('sqrt', a)))
        raise UnsupportedDerivativeError(f"'{e.op}' is not differentiable in '{serialize(e)}'")

    a, b = e.left, e.right
    da, db = differentiate(a, var), differentiate(b, var)
    if e.op == '+':
        return add(da, db)
    if e.op == '-':
        return sub(da, db)
    if e.op == '*':
        return add(mul(da, b), mul(a, db))
    if e.op == '/':
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))

    # a ^ b
    if var not in variables(b):
        return mul(mul(b, power(a, sub(b, ONE))), da)
    if var not in variables(a):
        return mul(mul(e, func('log', a)), db)
    return mul(e, add(mul(db, func('log', a)), div(mul(b, da), a)))


def substitute(e: Expr, name: str, value: base.Union[float, Expr]) -> Expr:
    """
    Replace a variable with a constant or with another tree.

    :e (Expr): Tree to rewrite.
    :name (str): Variable to bind, typically 'k'.
    :value (float | Expr): Value to bind, or a replacement tree.
    :returns (Expr): Rewritten tree.
    """
    if isinstance(e, Var):
        if e.name != name:
            return e
        return value if isinstance(value, Expr) else _num(float(value))
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, name, value))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, name, value), substitute(e.right, name, value))
    return e


def _source(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        if e.name in ('t', 'k'):
            return e.name
        return f"{e.name[0]}[{int(e.name[1:]) - 1}]"
    if isinstance(e, Unary):
        if e.op == 'neg':
            return f"(-{_source(e.arg)})"
        return f"_{e.op}({_source(e.arg)})"
    if e.op == '^':
        return f"_pow({_source(e.left)}, {_source(e.right)})"
    return f"({_source(e.left)} {e.op} {_source(e.right)})"


def _math_log(a):
    if a <= 0:
        raise ValueError("math domain error")
    return math.log(a)


_NAMESPACES = {
    'math': {'_sin': math.sin, '_cos': math.cos, '_exp': math.exp, '_log': _math_log, '_abs': abs,
             '_sqrt': math.sqrt, '_pow': math.pow},
    'numpy': {'_sin': np.sin, '_cos': np.cos, '_exp': np.exp, '_log': np.log, '_abs': np.abs,
              '_sqrt': np.sqrt, '_pow': np.float_power},
}


def compile_exprs(exprs: base.List[Expr], backend: str = 'math') -> base.Callable:
    """
    Compile a list of trees into one callable f(t, x, u, v, k) returning a tuple.

    The 'math' backend works on floats and is what the RK4 loops call. The 'numpy' backend
    broadcasts over arrays.

    :exprs (base.List[Expr]): Trees to compile, in output order.
    :backend (str, default = 'math'): 'math' or 'numpy'.
    :returns (base.Callable): The compiled function.
    """
    namespace = dict(_NAMESPACES[backend])
    body = ', '.join(_source(e) for e in exprs)
    raw = eval(f"lambda t, x, u, v, k: ({body}{',' if len(exprs) == 1 else ''})", namespace)
    text = [serialize(e) for e in exprs]

    if backend == 'math':
        def compiled(t, x = (), u = (), v = (), k = 0.0):
            try:
                out = raw(t, x, u, v, k)
            except (ZeroDivisionError, ValueError, OverflowError) as e:
                raise EvaluationError(f"Evaluating {text} failed: {e}")
            if not all(map(math.isfinite, out)):
                raise EvaluationError(f"Evaluating {text} gave the non-finite value {out}")
            return out
    else:
        def compiled(t, x = (), u = (), v = (), k = 0.0):
            try:
                with np.errstate(divide = 'raise', invalid = 'raise', over = 'raise'):
                    return raw(t, x, u, v, k)
            except (ZeroDivisionError, FloatingPointError, ValueError, OverflowError) as e:
                raise EvaluationError(f"Evaluating {text} failed: {e}")
    return compiled
