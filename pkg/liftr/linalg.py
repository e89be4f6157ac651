"""Exact linear algebra over the rationals.

Matrices are numpy object arrays of ``Fraction`` so row operations stay exact.
"""

from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction

import numpy as np

from .exceptions import InconsistentSystem, ParamsError, SingularMatrix

ZERO = Fraction(0)
ONE = Fraction(1)


def as_matrix(rows: Sequence[Sequence[object]]) -> np.ndarray:
    matrix = np.array([[Fraction(v) for v in row] for row in rows], dtype=object)
    if matrix.ndim != 2:
        raise ParamsError("expected a rectangular matrix")
    return matrix


def identity(n: int) -> np.ndarray:
    return np.array([[ONE if i == j else ZERO for j in range(n)] for i in range(n)], dtype=object)


def row_reduce(matrix: np.ndarray, columns: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form; pivots are searched in the first ``columns`` columns."""
    m = matrix.copy()
    rows, cols = m.shape
    limit = cols if columns is None else columns
    pivots: list[int] = []
    r = 0
    for c in range(limit):
        if r == rows:
            break
        k = next((i for i in range(r, rows) if m[i, c] != ZERO), None)
        if k is None:
            continue
        if k != r:
            m[[r, k]] = m[[k, r]]
        m[r, :] = m[r, :] / m[r, c]
        for i in range(rows):
            if i != r and m[i, c] != ZERO:
                m[i, :] = m[i, :] - m[i, c] * m[r, :]
        pivots.append(c)
        r += 1
    return m, pivots


def solve(a: Sequence[Sequence[object]] | np.ndarray, b: Sequence[object]) -> list[Fraction]:
    """Unique solution of a square system ``a x = b``.

    :raises SingularMatrix: if ``a`` is not invertible.
    """
    matrix = a if isinstance(a, np.ndarray) else as_matrix(a)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or len(b) != n:
        raise ParamsError(f"expected an {n}x{n} system, got {matrix.shape} and {len(b)} values")
    augmented = np.hstack([matrix, as_matrix([[v] for v in b])]) if n else matrix
    reduced, pivots = row_reduce(augmented, n)
    if len(pivots) < n:
        raise SingularMatrix(f"matrix has rank {len(pivots)} < {n}")
    return [reduced[i, n] for i in range(n)]


def solve_rectangular(a: Sequence[Sequence[object]] | np.ndarray, b: Sequence[object]) -> list[Fraction]:
    """Solve an overdetermined system with full column rank.

    :raises SingularMatrix: if the columns are dependent.
    :raises InconsistentSystem: if no exact solution exists.
    """
    matrix = a if isinstance(a, np.ndarray) else as_matrix(a)
    rows, cols = matrix.shape
    if len(b) != rows:
        raise ParamsError(f"{rows} equations but {len(b)} right-hand sides")
    reduced, pivots = row_reduce(np.hstack([matrix, as_matrix([[v] for v in b])]), cols)
    if len(pivots) < cols:
        raise SingularMatrix(f"columns have rank {len(pivots)} < {cols}")
    if any(reduced[i, cols] != ZERO for i in range(cols, rows)):
        raise InconsistentSystem("the equations admit no exact solution")
    return [reduced[i, cols] for i in range(cols)]


def determinant(a: Sequence[Sequence[object]] | np.ndarray) -> Fraction:
    """Fraction-exact determinant by elimination."""
    m = (a if isinstance(a, np.ndarray) else as_matrix(a)).copy()
    n = m.shape[0]
    if m.shape != (n, n):
        raise ParamsError(f"determinant needs a square matrix, got {m.shape}")
    det = ONE
    for c in range(n):
        k = next((i for i in range(c, n) if m[i, c] != ZERO), None)
        if k is None:
            return ZERO
        if k != c:
            m[[c, k]] = m[[k, c]]
            det = -det
        det *= m[c, c]
        for i in range(c + 1, n):
            if m[i, c] != ZERO:
                m[i, :] = m[i, :] - (m[i, c] / m[c, c]) * m[c, :]
    return det


def vandermonde(points: Sequence[Fraction], degree: int | None = None) -> np.ndarray:
    """Rows ``(1, p, p^2, ...)``; square unless ``degree`` says otherwise."""
    width = len(points) if degree is None else degree + 1
    return as_matrix([[Fraction(p) ** j for j in range(width)] for p in points])
