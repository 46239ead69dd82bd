"""Scalar and metric-family fields on I x F with derivative access.

Fields are either expression-backed (derivatives by forward-mode duals
through the kernel) or callable-backed (central finite differences with the
step h0*(1+|coordinate|), h0 = cbrt(machine epsilon), which balances
truncation against rounding for second-order differences).
"""

import numpy as np

from .errors import UsageError
from .expr import Bin, Expression, Num, compile_outputs, parse

FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


def _as_ast(obj):
    if isinstance(obj, Expression):
        return obj.ast
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float)):
        return Num(float(obj))
    raise UsageError(f"cannot interpret {obj!r} as an expression")


def _var_order(fiber_dim):
    # slot 0 is t; "r" aliases the first fiber coordinate
    return ("t",) + tuple(f"x{i}" for i in range(1, fiber_dim + 1))


def _substitute_r(node):
    """Rewrite the radial alias r -> x1 so programs share one namespace."""
    from .expr import Call, Unary, Var
    if isinstance(node, Var):
        return Var("x1", node.col) if node.name == "r" else node
    if isinstance(node, Unary):
        return Unary(_substitute_r(node.arg), node.col)
    if isinstance(node, Bin):
        return Bin(node.op, _substitute_r(node.lhs), _substitute_r(node.rhs),
                   node.col)
    if isinstance(node, Call):
        return Call(node.fn, tuple(_substitute_r(a) for a in node.args),
                    node.col)
    return node


def _pack(t, x):
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return np.concatenate([t[:, None], x], axis=1)


class ScalarField:
    """Scalar function of (t, x1..xd)."""

    def __init__(self, fiber_dim, program=None, fn=None, source=None,
                 fd_step=None):
        self.fiber_dim = fiber_dim
        self._program = program
        self._fn = fn
        self.source = source
        self.fd_step = FD_STEP if fd_step is None else fd_step

    @classmethod
    def from_expression(cls, expr, fiber_dim):
        ast = _substitute_r(_as_ast(expr))
        program = compile_outputs([ast], _var_order(fiber_dim))
        source = expr.source if isinstance(expr, Expression) else str(expr)
        return cls(fiber_dim, program=program, source=source)

    @classmethod
    def constant(cls, value, fiber_dim):
        return cls.from_expression(str(float(value)), fiber_dim)

    @classmethod
    def from_callable(cls, fn, fiber_dim, fd_step=None):
        return cls(fiber_dim, fn=fn, fd_step=fd_step)

    @property
    def analytic(self):
        return self._program is not None

    def value(self, t, x):
        return float(self.value_many([t], np.asarray(x)[None, :])[0])

    def value_many(self, t, x):
        if self._program is not None:
            return self._program(_pack(t, x))[:, 0]
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.array([self._fn(float(tt), xx) for tt, xx in zip(t, x)])

    def value_and_grad(self, t, x):
        v, g = self.value_and_grad_many([t], np.asarray(x)[None, :])
        return float(v[0]), g[0]

    def value_and_grad_many(self, t, x):
        """Values plus gradients over (t, x1..xd); shape (P,), (P, 1+d)."""
        if self._program is not None:
            vals, grads = self._program(_pack(t, x), grad=True)
            return vals[:, 0], grads[:, 0, :]
        pts = _pack(t, x)
        vals = self.value_many(t, x)
        grads = np.empty((pts.shape[0], pts.shape[1]))
        for c in range(pts.shape[1]):
            h = self.fd_step * (1.0 + np.abs(pts[:, c]))
            up = pts.copy()
            up[:, c] += h
            dn = pts.copy()
            dn[:, c] -= h
            fu = self.value_many(up[:, 0], up[:, 1:])
            fd = self.value_many(dn[:, 0], dn[:, 1:])
            grads[:, c] = (fu - fd) / (2.0 * h)
        return vals, grads


class MetricField:
    """Symmetric (d x d) matrix field g_t on I x F."""

    def __init__(self, fiber_dim, program=None, fn=None, sources=None,
                 fd_step=None):
        self.fiber_dim = fiber_dim
        self._program = program
        self._fn = fn
        self.sources = sources  # row-major list of lists of source strings
        self.fd_step = FD_STEP if fd_step is None else fd_step

    @classmethod
    def from_expressions(cls, rows, fiber_dim):
        d = fiber_dim
        if len(rows) != d or any(len(r) != d for r in rows):
            raise UsageError(f"metric needs a {d}x{d} array of entries")
        asts = [[_substitute_r(_as_ast(e)) for e in row] for row in rows]
        # compile the upper triangle; symmetry fills the rest
        flat = [asts[i][j] for i in range(d) for j in range(i, d)]
        program = compile_outputs(flat, _var_order(d))
        sources = [[e.source if isinstance(e, Expression) else str(e)
                    for e in row] for row in rows]
        return cls(fiber_dim, program=program, sources=sources)

    @classmethod
    def identity(cls, fiber_dim):
        rows = [["1" if i == j else "0" for j in range(fiber_dim)]
                for i in range(fiber_dim)]
        return cls.from_expressions(rows, fiber_dim)

    @classmethod
    def scaled(cls, factor, base_rows, fiber_dim):
        """Entrywise product factor * base, at the AST level."""
        f_ast = _as_ast(factor)
        rows = []
        for i in range(fiber_dim):
            row = []
            for j in range(fiber_dim):
                b = _as_ast(base_rows[i][j])
                if isinstance(b, Num) and b.value == 0.0:
                    row.append(Expression.from_ast(b, "0"))
                else:
                    fsrc = factor.source if isinstance(factor, Expression) else str(factor)
                    bsrc = (base_rows[i][j].source
                            if isinstance(base_rows[i][j], Expression)
                            else str(base_rows[i][j]))
                    row.append(Expression.from_ast(Bin("*", f_ast, b),
                                                   f"({fsrc})*({bsrc})"))
            rows.append(row)
        return cls.from_expressions(rows, fiber_dim)

    @classmethod
    def from_callable(cls, fn, fiber_dim, fd_step=None):
        return cls(fiber_dim, fn=fn, fd_step=fd_step)

    @property
    def analytic(self):
        return self._program is not None

    def _unpack(self, flat):
        d = self.fiber_dim
        out = np.empty(flat.shape[:-1] + (d, d))
        k = 0
        for i in range(d):
            for j in range(i, d):
                out[..., i, j] = flat[..., k]
                out[..., j, i] = flat[..., k]
                k += 1
        return out

    def matrix(self, t, x):
        return self.matrix_many([t], np.asarray(x)[None, :])[0]

    def matrix_many(self, t, x):
        if self._program is not None:
            return self._unpack(self._program(_pack(t, x)))
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.array([self._fn(float(tt), xx) for tt, xx in zip(t, x)])

    def matrix_and_grad(self, t, x):
        g, dg = self.matrix_and_grad_many([t], np.asarray(x)[None, :])
        return g[0], dg[0]

    def matrix_and_grad_many(self, t, x):
        """Returns g (P,d,d) and dg (P,1+d,d,d); dg[:,c] = d(g)/d(coord c)."""
        if self._program is not None:
            flat, grads = self._program(_pack(t, x), grad=True)
            g = self._unpack(flat)
            dg = self._unpack(np.moveaxis(grads, 2, 1))
            return g, dg
        pts = _pack(t, x)
        g = self.matrix_many(t, x)
        d = self.fiber_dim
        dg = np.empty((pts.shape[0], pts.shape[1], d, d))
        for c in range(pts.shape[1]):
            h = self.fd_step * (1.0 + np.abs(pts[:, c]))
            up = pts.copy()
            up[:, c] += h
            dn = pts.copy()
            dn[:, c] -= h
            gu = self.matrix_many(up[:, 0], up[:, 1:])
            gd = self.matrix_many(dn[:, 0], dn[:, 1:])
            dg[:, c] = (gu - gd) / (2.0 * h[:, None, None])
        return g, dg
