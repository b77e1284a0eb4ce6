"""Exact solution of small rational linear systems by Bareiss elimination."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence


class SingularMatrixError(ArithmeticError):
    pass


def _integer_rows(A, b):
    rows = []
    for row, rhs in zip(A, b):
        entries = [Fraction(x) for x in row] + [Fraction(rhs)]
        m = math.lcm(*(e.denominator for e in entries))
        rows.append([int(e * m) for e in entries])
    return rows


def solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve ``A x = b`` exactly for square nonsingular ``A``.

    Rows are cleared of denominators first, so the elimination itself runs
    on integers; every intermediate entry is a minor of the augmented
    matrix (Bareiss' one-step fraction-free scheme).
    """
    n = len(A)
    if n == 0:
        return []
    M = _integer_rows(A, b)
    prev = 1
    for k in range(n):
        piv = next((i for i in range(k, n) if M[i][k] != 0), None)
        if piv is None:
            raise SingularMatrixError("matrix is singular")
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
        pk = M[k][k]
        for i in range(k + 1, n):
            mik = M[i][k]
            Mi, Mk = M[i], M[k]
            for j in range(k + 1, n + 1):
                Mi[j] = (pk * Mi[j] - mik * Mk[j]) // prev
            Mi[k] = 0
        prev = pk
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        s = Fraction(M[i][n]) - sum(M[i][j] * x[j] for j in range(i + 1, n))
        x[i] = s / M[i][i]
    return x
