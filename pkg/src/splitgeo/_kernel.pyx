# cython: boundscheck=False, wraparound=False, cdivision=True
"""C evaluator for compiled expression programs (values + forward gradients).

Opcode encoding must match splitgeo._opcodes; the backend-agreement test in
the suite pins it.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport (cos, cosh, exp, fabs, log, pow, sin, sinh, sqrt,
                        tanh)

cnp.import_array()

BACKEND = "cython"

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_NEG = 6
DEF OP_POW = 7
DEF OP_POWC = 8
DEF OP_EXP = 9
DEF OP_LN = 10
DEF OP_SIN = 11
DEF OP_COS = 12
DEF OP_SINH = 13
DEF OP_COSH = 14
DEF OP_TANH = 15
DEF OP_SQRT = 16
DEF OP_ABS = 17
DEF OP_MIN = 18
DEF OP_MAX = 19


def run_program(ops, consts, out_regs, varvals, int n_grad):
    """Same contract as splitgeo._kernel_py.run_program."""
    cdef cnp.int32_t[:, ::1] code = np.ascontiguousarray(ops, dtype=np.int32)
    cdef double[::1] cs = np.ascontiguousarray(consts, dtype=np.float64)
    cdef cnp.int32_t[::1] outs = np.ascontiguousarray(out_regs, dtype=np.int32)
    cdef double[:, ::1] xs = np.ascontiguousarray(varvals, dtype=np.float64)

    cdef Py_ssize_t npts = xs.shape[0]
    cdef Py_ssize_t nvar = xs.shape[1]
    cdef Py_ssize_t nops = code.shape[0]
    cdef Py_ssize_t nout = outs.shape[0]
    cdef bint want_grad = n_grad > 0

    vals_np = np.empty((npts, nout), dtype=np.float64)
    cdef double[:, ::1] vals = vals_np
    grads_np = None
    cdef double[:, :, ::1] grads
    if want_grad:
        grads_np = np.empty((npts, nout, nvar), dtype=np.float64)
        grads = grads_np

    reg_np = np.empty(nops, dtype=np.float64)
    cdef double[::1] reg = reg_np
    dreg_np = np.empty((nops, nvar if want_grad else 1), dtype=np.float64)
    cdef double[:, ::1] dreg = dreg_np

    cdef Py_ssize_t p, k, g
    cdef int oc, a, b
    cdef double va, vb, v, c

    for p in range(npts):
        for k in range(nops):
            oc = code[k, 0]
            a = code[k, 1]
            b = code[k, 2]
            if oc == OP_CONST:
                reg[k] = cs[a]
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = 0.0
            elif oc == OP_VAR:
                reg[k] = xs[p, a]
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = 0.0
                    dreg[k, a] = 1.0
            elif oc == OP_ADD:
                reg[k] = reg[a] + reg[b]
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = dreg[a, g] + dreg[b, g]
            elif oc == OP_SUB:
                reg[k] = reg[a] - reg[b]
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = dreg[a, g] - dreg[b, g]
            elif oc == OP_MUL:
                va = reg[a]
                vb = reg[b]
                reg[k] = va * vb
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = vb * dreg[a, g] + va * dreg[b, g]
            elif oc == OP_DIV:
                va = reg[a]
                vb = reg[b]
                v = va / vb
                reg[k] = v
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = (dreg[a, g] - v * dreg[b, g]) / vb
            elif oc == OP_NEG:
                reg[k] = -reg[a]
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = -dreg[a, g]
            elif oc == OP_POW:
                va = reg[a]
                vb = reg[b]
                v = pow(va, vb)
                reg[k] = v
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = v * (log(va) * dreg[b, g]
                                          + vb / va * dreg[a, g])
            elif oc == OP_POWC:
                va = reg[a]
                c = cs[b]
                reg[k] = pow(va, c)
                if want_grad:
                    v = c * pow(va, c - 1.0)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_EXP:
                v = exp(reg[a])
                reg[k] = v
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_LN:
                va = reg[a]
                reg[k] = log(va)
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = dreg[a, g] / va
            elif oc == OP_SIN:
                va = reg[a]
                reg[k] = sin(va)
                if want_grad:
                    v = cos(va)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_COS:
                va = reg[a]
                reg[k] = cos(va)
                if want_grad:
                    v = -sin(va)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_SINH:
                va = reg[a]
                reg[k] = sinh(va)
                if want_grad:
                    v = cosh(va)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_COSH:
                va = reg[a]
                reg[k] = cosh(va)
                if want_grad:
                    v = sinh(va)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_TANH:
                v = tanh(reg[a])
                reg[k] = v
                if want_grad:
                    v = 1.0 - v * v
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_SQRT:
                v = sqrt(reg[a])
                reg[k] = v
                if want_grad:
                    for g in range(nvar):
                        dreg[k, g] = dreg[a, g] / (2.0 * v)
            elif oc == OP_ABS:
                va = reg[a]
                reg[k] = fabs(va)
                if want_grad:
                    v = 1.0 if va > 0.0 else (-1.0 if va < 0.0 else 0.0)
                    for g in range(nvar):
                        dreg[k, g] = v * dreg[a, g]
            elif oc == OP_MIN:
                if reg[a] <= reg[b]:
                    reg[k] = reg[a]
                    if want_grad:
                        for g in range(nvar):
                            dreg[k, g] = dreg[a, g]
                else:
                    reg[k] = reg[b]
                    if want_grad:
                        for g in range(nvar):
                            dreg[k, g] = dreg[b, g]
            elif oc == OP_MAX:
                if reg[a] >= reg[b]:
                    reg[k] = reg[a]
                    if want_grad:
                        for g in range(nvar):
                            dreg[k, g] = dreg[a, g]
                else:
                    reg[k] = reg[b]
                    if want_grad:
                        for g in range(nvar):
                            dreg[k, g] = dreg[b, g]
            else:
                raise ValueError(f"unknown opcode {oc}")
        for k in range(nout):
            vals[p, k] = reg[outs[k]]
            if want_grad:
                for g in range(nvar):
                    grads[p, k, g] = dreg[outs[k], g]

    return vals_np, grads_np
