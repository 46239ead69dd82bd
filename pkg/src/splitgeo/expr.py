"""Scalar expression language used by scenario files and the catalog.

Grammar: float literals; variables t, r, x1..x9; binary + - * / ^ (right
associative power); unary minus; functions exp, ln, sin, cos, sinh, cosh,
tanh, sqrt, abs and two-argument min, max.  Expressions compile to flat
register programs evaluated by the kernel backend, with optional forward
gradients with respect to every variable slot.
"""

from dataclasses import dataclass

import numpy as np

from . import _opcodes as op
from . import kernel
from .errors import EvaluationError, ExpressionSyntaxError

VARIABLES = ("t", "r") + tuple(f"x{i}" for i in range(1, 10))
FUNCTIONS = {"exp": 1, "ln": 1, "sin": 1, "cos": 1, "sinh": 1, "cosh": 1,
             "tanh": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2}


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float
    col: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    col: int = 0


@dataclass(frozen=True)
class Unary:
    arg: object
    col: int = 0


@dataclass(frozen=True)
class Bin:
    op: str
    lhs: object
    rhs: object
    col: int = 0


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    col: int = 0


def ast_equal(a, b):
    """Structural equality, ignoring source columns."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Num):
        return a.value == b.value
    if isinstance(a, Var):
        return a.name == b.name
    if isinstance(a, Unary):
        return ast_equal(a.arg, b.arg)
    if isinstance(a, Bin):
        return a.op == b.op and ast_equal(a.lhs, b.lhs) and ast_equal(a.rhs, b.rhs)
    if isinstance(a, Call):
        return (a.fn == b.fn and len(a.args) == len(b.args)
                and all(ast_equal(x, y) for x, y in zip(a.args, b.args)))
    raise TypeError(f"not an AST node: {a!r}")


def ast_variables(node, out=None):
    if out is None:
        out = set()
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Unary):
        ast_variables(node.arg, out)
    elif isinstance(node, Bin):
        ast_variables(node.lhs, out)
        ast_variables(node.rhs, out)
    elif isinstance(node, Call):
        for a in node.args:
            ast_variables(a, out)
    return out


# ---------------------------------------------------------------------------
# Tokenizer / parser

_OPS = set("+-*/^(),")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        col = i + 1
        if ch in _OPS:
            tokens.append((ch, ch, col))
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExpressionSyntaxError(f"bad number {text[i:j]!r}", col)
            tokens.append(("num", value, col))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], col))
            i = j
        else:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", col)
    tokens.append(("end", None, n + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ExpressionSyntaxError(
                f"expected {kind!r}, found {tok[1]!r}" if tok[0] != "end"
                else f"expected {kind!r}, found end of input", tok[2])
        return tok

    def parse(self):
        node = self.additive()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def additive(self):
        node = self.multiplicative()
        while self.peek()[0] in ("+", "-"):
            kind, _, col = self.next()
            rhs = self.multiplicative()
            node = Bin(kind, node, rhs, col)
        return node

    def multiplicative(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            kind, _, col = self.next()
            rhs = self.unary()
            node = Bin(kind, node, rhs, col)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "-":
            self.next()
            return Unary(self.unary(), tok[2])
        if tok[0] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "^":
            self.next()
            # right associative; exponent may carry a sign
            exponent = self.unary()
            return Bin("^", base, exponent, tok[2])
        return base

    def atom(self):
        kind, value, col = self.next()
        if kind == "num":
            return Num(value, col)
        if kind == "(":
            node = self.additive()
            tok = self.next()
            if tok[0] != ")":
                raise ExpressionSyntaxError("missing ')'", tok[2])
            return node
        if kind == "name":
            if self.peek()[0] == "(":
                return self.call(value, col)
            if value not in VARIABLES:
                raise ExpressionSyntaxError(f"unknown variable {value!r}", col)
            return Var(value, col)
        if kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", col)
        raise ExpressionSyntaxError(f"unexpected {value!r}", col)

    def call(self, name, col):
        if name not in FUNCTIONS:
            raise ExpressionSyntaxError(f"unknown function {name!r}", col)
        self.expect("(")
        args = [self.additive()]
        while self.peek()[0] == ",":
            self.next()
            args.append(self.additive())
        tok = self.next()
        if tok[0] != ")":
            raise ExpressionSyntaxError("missing ')'", tok[2])
        arity = FUNCTIONS[name]
        if len(args) != arity:
            raise ExpressionSyntaxError(
                f"{name} takes {arity} argument(s), got {len(args)}", col)
        return Call(name, tuple(args), col)


def parse(text):
    """Parse expression text into an AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Compiler

_FN_OPCODE = {"exp": op.EXP, "ln": op.LN, "sin": op.SIN, "cos": op.COS,
              "sinh": op.SINH, "cosh": op.COSH, "tanh": op.TANH,
              "sqrt": op.SQRT, "abs": op.ABS, "min": op.MIN, "max": op.MAX}
_BIN_OPCODE = {"+": op.ADD, "-": op.SUB, "*": op.MUL, "/": op.DIV}


@dataclass
class Program:
    """A compiled multi-output expression program."""

    ops: np.ndarray       # (N, 3) int32
    consts: np.ndarray    # (C,) float64
    out_regs: np.ndarray  # (K,) int32
    cols: np.ndarray      # (N,) int32 source column per op
    var_order: tuple      # slot -> variable name

    @property
    def n_outputs(self):
        return len(self.out_regs)

    def __call__(self, varvals, grad=False):
        """Evaluate on (P, V) points; see kernel.run_program."""
        varvals = np.atleast_2d(np.asarray(varvals, dtype=np.float64))
        n_grad = len(self.var_order) if grad else 0
        vals, grads = kernel.run_program(self.ops, self.consts, self.out_regs,
                                         varvals, n_grad)
        bad = ~np.isfinite(vals)
        if grads is not None:
            bad |= ~np.isfinite(grads).all(axis=2)
        if bad.any():
            self._raise_domain_error(varvals)
        return (vals, grads) if grad else vals

    def _raise_domain_error(self, varvals):
        hit = kernel.first_bad_op(self.ops, self.consts, varvals)
        if hit is None:
            # only the gradient degenerated (e.g. sqrt at 0)
            raise EvaluationError("derivative is singular at the evaluation "
                                  "point (e.g. sqrt/ln at a boundary)")
        k, lane = hit
        name = op.NAMES.get(int(self.ops[k, 0]), "?")
        col = int(self.cols[k])
        binding = ", ".join(f"{v}={varvals[lane, i]:.6g}"
                            for i, v in enumerate(self.var_order))
        raise EvaluationError(
            f"domain error in {name!r} at column {col} with {binding}")


class _Compiler:
    def __init__(self, var_order):
        self.var_slot = {name: i for i, name in enumerate(var_order)}
        self.ops = []
        self.cols = []
        self.consts = []
        self._const_ix = {}

    def const(self, value):
        key = float(value)
        if key not in self._const_ix:
            self._const_ix[key] = len(self.consts)
            self.consts.append(key)
        return self._const_ix[key]

    def emit(self, code, a, b, col):
        self.ops.append((code, a, b))
        self.cols.append(col)
        return len(self.ops) - 1

    def node(self, n):
        if isinstance(n, Num):
            return self.emit(op.CONST, self.const(n.value), 0, n.col)
        if isinstance(n, Var):
            if n.name not in self.var_slot:
                raise EvaluationError(f"unbound variable {n.name!r}")
            return self.emit(op.VAR, self.var_slot[n.name], 0, n.col)
        if isinstance(n, Unary):
            return self.emit(op.NEG, self.node(n.arg), 0, n.col)
        if isinstance(n, Bin):
            if n.op == "^":
                if isinstance(n.rhs, Num):
                    a = self.node(n.lhs)
                    return self.emit(op.POWC, a, self.const(n.rhs.value), n.col)
                if isinstance(n.rhs, Unary) and isinstance(n.rhs.arg, Num):
                    a = self.node(n.lhs)
                    return self.emit(op.POWC, a, self.const(-n.rhs.arg.value),
                                     n.col)
                a = self.node(n.lhs)
                b = self.node(n.rhs)
                return self.emit(op.POW, a, b, n.col)
            a = self.node(n.lhs)
            b = self.node(n.rhs)
            return self.emit(_BIN_OPCODE[n.op], a, b, n.col)
        if isinstance(n, Call):
            args = [self.node(a) for a in n.args]
            if len(args) == 1:
                args.append(0)
            return self.emit(_FN_OPCODE[n.fn], args[0], args[1], n.col)
        raise TypeError(f"not an AST node: {n!r}")


def compile_outputs(nodes, var_order):
    """Compile a sequence of ASTs into one multi-output program."""
    comp = _Compiler(tuple(var_order))
    outs = [comp.node(n) for n in nodes]
    return Program(
        ops=np.asarray(comp.ops, dtype=np.int32).reshape(-1, 3),
        consts=np.asarray(comp.consts, dtype=np.float64),
        out_regs=np.asarray(outs, dtype=np.int32),
        cols=np.asarray(comp.cols, dtype=np.int32),
        var_order=tuple(var_order),
    )


# ---------------------------------------------------------------------------
# User-facing wrapper

class Expression:
    """A parsed scalar expression with its source text."""

    def __init__(self, source):
        if isinstance(source, Expression):
            source = source.source
        self.source = source
        self.ast = parse(source)
        self.variables = frozenset(ast_variables(self.ast))
        self._programs = {}

    @classmethod
    def from_ast(cls, node, source):
        obj = cls.__new__(cls)
        obj.source = source
        obj.ast = node
        obj.variables = frozenset(ast_variables(node))
        obj._programs = {}
        return obj

    def program(self, var_order):
        var_order = tuple(var_order)
        if var_order not in self._programs:
            self._programs[var_order] = compile_outputs([self.ast], var_order)
        return self._programs[var_order]

    def __call__(self, **bindings):
        return self.evaluate(bindings)

    def evaluate(self, bindings):
        """Evaluate with a dict of variable values; raises on unbound names."""
        missing = self.variables - set(bindings)
        if missing:
            raise EvaluationError(f"unbound variable(s): {sorted(missing)}")
        order = tuple(sorted(self.variables))
        prog = self.program(order)
        row = np.array([[bindings[v] for v in order]], dtype=np.float64)
        return float(prog(row)[0, 0])

    def derivative(self, bindings, wrt):
        """Forward-mode derivative with respect to one variable."""
        order = tuple(sorted(self.variables | {wrt}))
        prog = self.program(order)
        row = np.array([[bindings.get(v, 0.0) for v in order]],
                       dtype=np.float64)
        _, grads = prog(row, grad=True)
        return float(grads[0, 0, order.index(wrt)])

    def __eq__(self, other):
        return isinstance(other, Expression) and ast_equal(self.ast, other.ast)

    def __hash__(self):
        return hash(self.source)

    def __repr__(self):
        return f"Expression({self.source!r})"
