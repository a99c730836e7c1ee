"""Platform-independent scalar numerics for the workload adapters.

Only IEEE-754 +, -, *, / and ``math.sqrt`` (correctly rounded) are used,
always in a fixed evaluation order, so results are bit-identical on any
conforming machine. The exponential is computed here instead of via the
C library, whose ``exp`` is not guaranteed to round identically.
"""

from __future__ import annotations

import math

# Cody-Waite split of ln 2: _LN2_HI has trailing zero bits so k * _LN2_HI is exact.
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_LN2 = 1.44269504088896338700e00
_TAYLOR_TERMS = 18
_EXP_CLAMP = 700.0
SIGMOID_CLAMP = 40.0


def exp(x: float) -> float:
    """e**x by range reduction to |r| <= ln2/2 and a Horner-form Taylor polynomial."""
    if x > _EXP_CLAMP:
        x = _EXP_CLAMP
    elif x < -_EXP_CLAMP:
        x = -_EXP_CLAMP
    k = math.floor(x * _INV_LN2 + 0.5)
    r = (x - k * _LN2_HI) - k * _LN2_LO
    p = 1.0
    for n in range(_TAYLOR_TERMS, 0, -1):
        p = 1.0 + p * r / n
    return math.ldexp(p, k)


def sigmoid(z: float) -> float:
    """Logistic function, input clamped to [-40, 40]."""
    if z > SIGMOID_CLAMP:
        z = SIGMOID_CLAMP
    elif z < -SIGMOID_CLAMP:
        z = -SIGMOID_CLAMP
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def dot(a, b) -> float:
    s = 0.0
    for x, y in zip(a, b):
        s += x * y
    return s


def mean(xs) -> float:
    s = 0.0
    for x in xs:
        s += x
    return s / len(xs)


def pstdev(xs, mu: float) -> float:
    s = 0.0
    for x in xs:
        d = x - mu
        s += d * d
    return math.sqrt(s / len(xs))
