"""Random expression trees for the AD and printer tests.

Every tree is total and smooth on t, a in [-1, 1]: divisors, square roots and
negative powers only ever see arguments bounded away from zero.
"""

import numpy as np

from folicheck.exprdsl import Bin, Call, Name, Neg, Num, Pi, Pow

VARS = ("t", "a")


def _safe(rng, depth):
    """A subtree bounded below by 1."""
    inner = random_expr(rng, depth)
    return Bin("+", Num(2.0), Call(rng.choice(["sin", "cos"]), inner))


def random_expr(rng, depth=6):
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.5:
            return Name(VARS[int(rng.integers(2))])
        if r < 0.9:
            return Num(float(np.round(rng.uniform(0, 2), 3)))
        return Pi()
    kind = rng.choice(["add", "sub", "mul", "div", "neg", "sin", "cos", "exp", "sqrt", "abs", "pow", "npow"])
    d = depth - 1
    if kind in ("add", "sub", "mul"):
        op = {"add": "+", "sub": "-", "mul": "*"}[kind]
        return Bin(op, random_expr(rng, d), random_expr(rng, d))
    if kind == "div":
        return Bin("/", random_expr(rng, d), _safe(rng, d))
    if kind == "neg":
        return Neg(random_expr(rng, d))
    if kind in ("sin", "cos"):
        return Call(kind, random_expr(rng, d))
    if kind == "exp":
        return Call("exp", Call("sin", random_expr(rng, d)))
    if kind in ("sqrt", "abs"):
        return Call(kind, _safe(rng, d))
    if kind == "pow":
        return Pow(random_expr(rng, d), int(rng.integers(0, 4)))
    return Pow(_safe(rng, d), -int(rng.integers(1, 3)))


def expressions(n, seed=20240611, depth=6):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        e = random_expr(rng, depth)
        point = {v: float(rng.uniform(-1, 1)) for v in VARS}
        out.append((e, point))
    return out


def richardson(f, x, h=1e-5):
    """Central difference at h and h/2, Richardson-extrapolated."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3
