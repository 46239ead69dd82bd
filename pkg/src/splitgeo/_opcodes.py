"""Opcode table shared by the expression compiler and both kernels.

The Cython kernel hardcodes the same integers; test_kernel cross-checks the
two backends on random programs, which pins the encoding.
"""

CONST = 0   # a: index into consts
VAR = 1     # a: variable slot
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
POW = 7     # general a^b, requires a > 0
POWC = 8    # a^c with literal exponent (b: index into consts)
EXP = 9
LN = 10
SIN = 11
COS = 12
SINH = 13
COSH = 14
TANH = 15
SQRT = 16
ABS = 17
MIN = 18
MAX = 19

NAMES = {
    CONST: "const", VAR: "var", ADD: "+", SUB: "-", MUL: "*", DIV: "/",
    NEG: "neg", POW: "^", POWC: "^", EXP: "exp", LN: "ln", SIN: "sin",
    COS: "cos", SINH: "sinh", COSH: "cosh", TANH: "tanh", SQRT: "sqrt",
    ABS: "abs", MIN: "min", MAX: "max",
}
