"""Independent reference computations used only by the tests.

None of these share code paths with the package: kernels come from
enumerating every flip mask, hitting times from a sympy linear solve of the
full (I - Q) t = 1 system, and stone levels from the closed form of the
iterated map.
"""
from fractions import Fraction
from itertools import product
import math

import sympy


def kernel_row_by_masks(n, i, q):
    """Offspring unitation law from the parent 1^i 0^(n-i), over all 2^n masks."""
    q = Fraction(q)
    parent = [1] * i + [0] * (n - i)
    row = [Fraction(0)] * (n + 1)
    for mask in product((0, 1), repeat=n):
        k = sum(mask)
        prob = q**k * (1 - q) ** (n - k)
        ones = sum(b ^ m for b, m in zip(parent, mask))
        row[ones] += prob
    return row


def levels_by_closed_form(p, n):
    """floor(n * s_k) with s_k = (1-2p)^k / 2 + 1/2, deduplicated, up to floor(n/2)."""
    p = Fraction(p)
    out = []
    k = 0
    while True:
        s = (1 - 2 * p) ** k / 2 + Fraction(1, 2)
        lvl = math.floor(n * s)
        if lvl not in out and (k == 0 or lvl != n):
            out.append(lvl)
        if lvl == n // 2:
            return out
        k += 1


def hitting_time_by_linear_solve(fitness_values, n, q, start=None):
    """E[T] for the elitist (1+1) EA via sympy's exact solve of the full system."""
    q = sympy.Rational(str(Fraction(q)))
    opt = n
    rows = [kernel_row_by_masks(n, i, Fraction(str(q))) for i in range(n + 1)]
    P = sympy.zeros(n + 1, n + 1)
    for i in range(n + 1):
        if i == opt:
            P[i, i] = 1
            continue
        for j in range(n + 1):
            if fitness_values[j] >= fitness_values[i]:
                P[i, j] += sympy.Rational(rows[i][j].numerator, rows[i][j].denominator)
            else:
                P[i, i] += sympy.Rational(rows[i][j].numerator, rows[i][j].denominator)
    transient = [i for i in range(n + 1) if i != opt]
    Q = P.extract(transient, transient)
    t = (sympy.eye(len(transient)) - Q).LUsolve(sympy.ones(len(transient), 1))
    if start is None:
        start = [sympy.Rational(math.comb(n, i), 2**n) for i in range(n + 1)]
    total = sum(start[i] * t[idx] for idx, i in enumerate(transient))
    return Fraction(int(sympy.numer(total)), int(sympy.denom(total)))
