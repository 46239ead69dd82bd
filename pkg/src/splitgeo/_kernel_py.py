"""Pure-numpy program evaluator; the fallback when the C kernel is absent.

Registers are (P,) arrays over the batch of evaluation points, so the cost
per opcode is a handful of numpy calls regardless of batch size.  Gradients
are forward-mode: each register carries a (P, V) array of partials with
respect to all variable slots.
"""

import numpy as np

from . import _opcodes as op

BACKEND = "python"


def run_program(ops, consts, out_regs, varvals, n_grad):
    """Evaluate a compiled program on a batch of points.

    Parameters
    ----------
    ops : int32 array (N, 3) of (opcode, a, b) triples; result of op k is
        register k.
    consts : float64 array of literals.
    out_regs : int32 array (K,) selecting output registers.
    varvals : float64 array (P, V), one row per evaluation point.
    n_grad : 0 for value-only evaluation, otherwise must equal V and the
        gradient with respect to every slot is returned.

    Returns
    -------
    vals : (P, K) array
    grads : (P, K, V) array or None
    """
    varvals = np.asarray(varvals, dtype=np.float64)
    npts, nvar = varvals.shape
    want_grad = n_grad > 0
    vals = [None] * len(ops)
    grads = [None] * len(ops) if want_grad else None

    with np.errstate(all="ignore"):
        for k, (code, a, b) in enumerate(ops):
            if code == op.CONST:
                v = np.full(npts, consts[a])
                g = np.zeros((npts, nvar)) if want_grad else None
            elif code == op.VAR:
                v = varvals[:, a].copy()
                if want_grad:
                    g = np.zeros((npts, nvar))
                    g[:, a] = 1.0
            elif code == op.ADD:
                v = vals[a] + vals[b]
                g = grads[a] + grads[b] if want_grad else None
            elif code == op.SUB:
                v = vals[a] - vals[b]
                g = grads[a] - grads[b] if want_grad else None
            elif code == op.MUL:
                v = vals[a] * vals[b]
                if want_grad:
                    g = vals[b][:, None] * grads[a] + vals[a][:, None] * grads[b]
            elif code == op.DIV:
                v = vals[a] / vals[b]
                if want_grad:
                    g = (grads[a] - v[:, None] * grads[b]) / vals[b][:, None]
            elif code == op.NEG:
                v = -vals[a]
                g = -grads[a] if want_grad else None
            elif code == op.POW:
                v = vals[a] ** vals[b]
                if want_grad:
                    # requires vals[a] > 0; nan propagates otherwise
                    g = v[:, None] * (np.log(vals[a])[:, None] * grads[b]
                                      + (vals[b] / vals[a])[:, None] * grads[a])
            elif code == op.POWC:
                c = consts[b]
                v = vals[a] ** c
                if want_grad:
                    g = (c * vals[a] ** (c - 1.0))[:, None] * grads[a]
            elif code == op.EXP:
                v = np.exp(vals[a])
                g = v[:, None] * grads[a] if want_grad else None
            elif code == op.LN:
                v = np.log(vals[a])
                g = grads[a] / vals[a][:, None] if want_grad else None
            elif code == op.SIN:
                v = np.sin(vals[a])
                g = np.cos(vals[a])[:, None] * grads[a] if want_grad else None
            elif code == op.COS:
                v = np.cos(vals[a])
                g = -np.sin(vals[a])[:, None] * grads[a] if want_grad else None
            elif code == op.SINH:
                v = np.sinh(vals[a])
                g = np.cosh(vals[a])[:, None] * grads[a] if want_grad else None
            elif code == op.COSH:
                v = np.cosh(vals[a])
                g = np.sinh(vals[a])[:, None] * grads[a] if want_grad else None
            elif code == op.TANH:
                v = np.tanh(vals[a])
                g = (1.0 - v * v)[:, None] * grads[a] if want_grad else None
            elif code == op.SQRT:
                v = np.sqrt(vals[a])
                g = grads[a] / (2.0 * v)[:, None] if want_grad else None
            elif code == op.ABS:
                v = np.abs(vals[a])
                if want_grad:
                    g = np.sign(vals[a])[:, None] * grads[a]
            elif code == op.MIN:
                take_a = vals[a] <= vals[b]
                v = np.where(take_a, vals[a], vals[b])
                if want_grad:
                    g = np.where(take_a[:, None], grads[a], grads[b])
            elif code == op.MAX:
                take_a = vals[a] >= vals[b]
                v = np.where(take_a, vals[a], vals[b])
                if want_grad:
                    g = np.where(take_a[:, None], grads[a], grads[b])
            else:
                raise ValueError(f"unknown opcode {code}")
            vals[k] = v
            if want_grad:
                grads[k] = g

    out_vals = np.stack([vals[r] for r in out_regs], axis=1)
    if not want_grad:
        return out_vals, None
    out_grads = np.stack([grads[r] for r in out_regs], axis=1)
    return out_vals, out_grads


def first_bad_op(ops, consts, varvals):
    """Locate the first opcode producing a non-finite value.

    Re-runs the program value-only and returns (op_index, lane) of the
    earliest register that turns non-finite, or None if all registers stay
    finite.  Used for error reporting only, so speed is irrelevant.
    """
    varvals = np.asarray(varvals, dtype=np.float64)
    vals = [None] * len(ops)
    with np.errstate(all="ignore"):
        for k, (code, a, b) in enumerate(ops):
            if code == op.CONST:
                v = np.full(varvals.shape[0], consts[a])
            elif code == op.VAR:
                v = varvals[:, a]
            elif code == op.ADD:
                v = vals[a] + vals[b]
            elif code == op.SUB:
                v = vals[a] - vals[b]
            elif code == op.MUL:
                v = vals[a] * vals[b]
            elif code == op.DIV:
                v = vals[a] / vals[b]
            elif code == op.NEG:
                v = -vals[a]
            elif code == op.POW:
                v = vals[a] ** vals[b]
            elif code == op.POWC:
                v = vals[a] ** consts[b]
            elif code == op.EXP:
                v = np.exp(vals[a])
            elif code == op.LN:
                v = np.log(vals[a])
            elif code == op.SIN:
                v = np.sin(vals[a])
            elif code == op.COS:
                v = np.cos(vals[a])
            elif code == op.SINH:
                v = np.sinh(vals[a])
            elif code == op.COSH:
                v = np.cosh(vals[a])
            elif code == op.TANH:
                v = np.tanh(vals[a])
            elif code == op.SQRT:
                v = np.sqrt(vals[a])
            elif code == op.ABS:
                v = np.abs(vals[a])
            elif code == op.MIN:
                v = np.minimum(vals[a], vals[b])
            elif code == op.MAX:
                v = np.maximum(vals[a], vals[b])
            vals[k] = v
            bad = ~np.isfinite(v)
            if bad.any():
                return k, int(np.argmax(bad))
    return None
