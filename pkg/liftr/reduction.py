"""Count satisfying assignments of a positive partitioned 2-CNF with a
probability oracle for the query

    (R(x) | !S(x,y) | T(y)) & (!R(x) | S(x,y) | !T(y))

The gadget database has domain ``1..n`` with ``Pr(R(i)) = x``,
``Pr(T(j)) = y`` and ``Pr(S(i,j)) = a`` on edges and ``b`` elsewhere. Grouping
the assignments of the 2-CNF by ``k = |R|``, ``l = |T|``, ``p`` (edges with both
ends true) and ``q`` (edges with both ends false) gives::

    Pr(Q) / ((1-b)^(n^2) (1-x)^n (1-y)^n) = sum N(k,l,p,q) A^p B^q X^k Y^l C^(k*l)

with ``A = a/b``, ``B = (1-a)/(1-b)``, ``X = x / ((1-x)(1-b)^n)``, ``Y`` alike
and ``C = b(1-b)``. Probing the oracle on a product grid in (X, Y, A, B) and
solving exactly recovers every N; the count is the sum of N(k,l,p,0).
"""

from __future__ import annotations

import itertools
import random
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from loguru import logger

from .aio import run_in_threads
from .exceptions import GridExhausted, NonIntegralSolution, ParamsError, SingularMatrix
from .linalg import as_matrix, solve, solve_rectangular
from .logic import Domain, clause, lit, query
from .oracle import pr_oracle
from .pdb import ONE, ZERO, Pdb, Relation
from .settings import Settings, get_settings
from .timing import Timer, timeit

REDUCTION_QUERY = query(
    clause(lit("R", "x"), lit("S", "x", "y", positive=False), lit("T", "y")),
    clause(lit("R", "x", positive=False), lit("S", "x", "y"), lit("T", "y", positive=False)),
)

Cell = tuple[int, int, int, int]
Oracle = Callable[[Pdb], Fraction]


@dataclass(frozen=True)
class Pp2Cnf:
    """``AND over (i,j) in edges of (X_i | Y_j)`` on variables X_1..X_n, Y_1..Y_n."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParamsError(f"n must be >= 1, got {self.n}")
        if not self.edges:
            raise ParamsError("the formula needs at least one edge")
        for i, j in self.edges:
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ParamsError(f"edge {i}-{j} is outside 1..{self.n}")

    @classmethod
    def parse(cls, n: int, edges: str) -> Pp2Cnf:
        """``"1-1,2-2"`` style edge lists."""
        pairs = set()
        for item in edges.replace(" ", "").split(","):
            if not item:
                continue
            try:
                left, right = item.split("-")
                pairs.add((int(left), int(right)))
            except ValueError:
                raise ParamsError(f"cannot read edge {item!r}; expected i-j") from None
        return cls(n, frozenset(pairs))

    @property
    def m(self) -> int:
        return len(self.edges)

    def brute_force_count(self) -> int:
        count = 0
        for xs in itertools.product((False, True), repeat=self.n):
            for ys in itertools.product((False, True), repeat=self.n):
                if all(xs[i - 1] or ys[j - 1] for i, j in self.edges):
                    count += 1
        return count


@dataclass(frozen=True)
class GadgetParams:
    x: Fraction
    y: Fraction
    a: Fraction
    b: Fraction

    def __post_init__(self) -> None:
        for name in ("x", "y", "a", "b"):
            value = getattr(self, name)
            if not ZERO < value < ONE:
                raise ParamsError(f"{name}={value} must lie strictly between 0 and 1")
        if self.a == self.b:
            raise ParamsError("a and b must differ")

    @classmethod
    def from_coordinates(cls, X: Fraction, Y: Fraction, A: Fraction, B: Fraction, n: int) -> GadgetParams:
        """Invert ``(x, y, a, b) -> (X, Y, A, B)``; needs ``A > 1 > B > 0`` and ``X, Y > 0``."""
        if not (A > ONE > B > ZERO and X > ZERO and Y > ZERO):
            raise ParamsError(f"coordinates out of range: X={X}, Y={Y}, A={A}, B={B}")
        b = (ONE - B) / (A - B)
        u = X * (ONE - b) ** n
        v = Y * (ONE - b) ** n
        return cls(u / (ONE + u), v / (ONE + v), A * b, b)

    def coordinates(self, n: int) -> tuple[Fraction, Fraction, Fraction, Fraction, Fraction]:
        """``(X, Y, A, B, C)``"""
        x, y, a, b = self.x, self.y, self.a, self.b
        scale = (ONE - b) ** n
        return (
            x / ((ONE - x) * scale),
            y / ((ONE - y) * scale),
            a / b,
            (ONE - a) / (ONE - b),
            b * (ONE - b),
        )


@dataclass
class CountTable:
    n: int
    m: int
    counts: dict[Cell, int] = field(default_factory=dict)

    def __getitem__(self, cell: Cell) -> int:
        return self.counts.get(cell, 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def satisfying(self) -> int:
        return sum(v for (_, _, _, q), v in self.counts.items() if q == 0)

    def nonzero(self) -> list[tuple[Cell, int]]:
        return sorted((c, v) for c, v in self.counts.items() if v)


def build_gadget(phi: Pp2Cnf, gp: GadgetParams) -> Pdb:
    constants = tuple(str(i) for i in range(1, phi.n + 1))
    s_rows = {
        (str(i), str(j)): gp.a if (i, j) in phi.edges else gp.b
        for i in range(1, phi.n + 1)
        for j in range(1, phi.n + 1)
    }
    return Pdb(
        Domain(constants),
        {
            "R": Relation("R", 1, {(c,): gp.x for c in constants}),
            "T": Relation("T", 1, {(c,): gp.y for c in constants}),
            "S": Relation("S", 2, s_rows),
        },
    )


def _axis(count: int, start: int, rng: random.Random | None) -> list[Fraction]:
    return [Fraction(start + i) + (Fraction(rng.randint(1, 9), 10) if rng else ZERO) for i in range(count)]


def choose_grid(n: int, m: int, seed: int | None = None) -> list[GadgetParams]:
    """``(n+1)^2 (m+1)^2`` parameter tuples forming a product grid in (X, Y, A, B).

    Without a seed the axes are ``A = 2, 3, ...``, ``B = 1/2, 1/3, ...`` and
    ``X, Y = 1, 2, ...``; a seed shifts each axis value by a random tenth.
    """
    rng = None if seed is None else random.Random(seed)
    xs = _axis(n + 1, 1, rng)
    ys = _axis(n + 1, 1, rng)
    a_axis = _axis(m + 1, 2, rng)
    b_axis = [ONE / v for v in _axis(m + 1, 2, rng)]
    return [
        GadgetParams.from_coordinates(X, Y, A, B, n)
        for A in a_axis
        for B in b_axis
        for X in xs
        for Y in ys
    ]


def validate_grid(grid: Sequence[GadgetParams], n: int, m: int) -> None:
    """Reject grids that are not a full product of distinct axis values."""
    coords = [gp.coordinates(n)[:4] for gp in grid]
    expected = (n + 1) ** 2 * (m + 1) ** 2
    if len(coords) != expected:
        raise ParamsError(f"grid has {len(coords)} points, expected {expected}")
    if len(set(coords)) != len(coords):
        raise ParamsError("grid has duplicated points")
    sizes = [len({c[i] for c in coords}) for i in range(4)]
    if sizes != [n + 1, n + 1, m + 1, m + 1]:
        raise ParamsError(f"grid axes have {sizes} distinct values, expected {[n + 1, n + 1, m + 1, m + 1]}")


def jacobian_determinant(gp: GadgetParams, n: int) -> Fraction:
    """Determinant of the Jacobian of ``(x, y, a, b) -> (X, Y, A, B)``."""
    x, y, a, b = gp.x, gp.y, gp.a, gp.b
    return (b - a) / ((ONE - y) ** 2 * (ONE - x) ** 2 * b**2 * (ONE - b) ** (2 * (n + 1)))


def cells(n: int, m: int, feasible_only: bool = False) -> list[Cell]:
    out = []
    for k, l, p, q in itertools.product(range(n + 1), range(n + 1), range(m + 1), range(m + 1)):
        if feasible_only and (p > min(m, k * l) or q > min(m, (n - k) * (n - l)) or p + q > m):
            continue
        out.append((k, l, p, q))
    return out


def assemble_system(
    grid: Sequence[GadgetParams], n: int, m: int, columns: Sequence[Cell] | None = None
) -> np.ndarray:
    """Coefficient matrix of the full system, one row per grid point."""
    columns = list(columns or cells(n, m))
    rows = []
    for gp in grid:
        X, Y, A, B, C = gp.coordinates(n)
        rows.append([A**p * B**q * X**k * Y**l * C ** (k * l) for k, l, p, q in columns])
    return as_matrix(rows)


def normalized_value(pr: Fraction, gp: GadgetParams, n: int) -> Fraction:
    return pr / ((ONE - gp.b) ** (n * n) * (ONE - gp.x) ** n * (ONE - gp.y) ** n)


def _solve_staged(
    grid: Sequence[GadgetParams], values: Sequence[Fraction], n: int, m: int
) -> dict[Cell, Fraction]:
    blocks: dict[tuple[Fraction, Fraction], list[tuple[Fraction, Fraction, Fraction]]] = {}
    weights: dict[tuple[Fraction, Fraction], Fraction] = {}
    for gp, v in zip(grid, values):
        X, Y, A, B, C = gp.coordinates(n)
        blocks.setdefault((A, B), []).append((X, Y, v))
        weights[(A, B)] = C
    xy = [(k, l) for k in range(n + 1) for l in range(n + 1)]  # noqa: E741
    pq = [(p, q) for p in range(m + 1) for q in range(m + 1)]
    per_kl: dict[tuple[int, int], list[Fraction]] = {kl: [] for kl in xy}
    ab = list(blocks)
    for key in ab:
        rows = blocks[key]
        h = solve([[X**k * Y**l for k, l in xy] for X, Y, _ in rows], [v for *_, v in rows])
        C = weights[key]
        for (k, l), value in zip(xy, h):
            per_kl[(k, l)].append(value / C ** (k * l))
    outer = as_matrix([[A**p * B**q for p, q in pq] for A, B in ab])
    solution: dict[Cell, Fraction] = {}
    for (k, l), g in per_kl.items():
        for (p, q), value in zip(pq, solve(outer, g)):
            solution[(k, l, p, q)] = value
    return solution


def _solve_full(
    grid: Sequence[GadgetParams], values: Sequence[Fraction], n: int, m: int
) -> dict[Cell, Fraction]:
    columns = cells(n, m)
    try:
        return dict(zip(columns, solve(assemble_system(grid, n, m, columns), values)))
    except SingularMatrix:
        logger.warning("full index box is singular; retrying on the feasible cells")
    columns = cells(n, m, feasible_only=True)
    return dict(zip(columns, solve_rectangular(assemble_system(grid, n, m, columns), values)))


def _integral(solution: dict[Cell, Fraction], n: int, m: int) -> CountTable:
    table = CountTable(n, m)
    for cell, value in solution.items():
        if value.denominator != 1 or value < 0:
            raise NonIntegralSolution(f"N{cell} = {value} is not a non-negative integer")
        if value:
            table.counts[cell] = int(value)
    if table.total != 4**n:
        raise NonIntegralSolution(f"counts sum to {table.total}, expected {4**n}")
    return table


def _default_oracle(db: Pdb) -> Fraction:
    return pr_oracle(REDUCTION_QUERY, db)


def recover_counts(
    phi: Pp2Cnf,
    oracle: Optional[Oracle] = None,
    settings: Settings | None = None,
    staged: bool = True,
    seed: int = 0,
) -> CountTable:
    """Recover the N(k,l,p,q) table from oracle calls, retrying perturbed
    grids when elimination hits a singular matrix.

    :param oracle: maps a gadget database to Pr(Q); the ground oracle by default.
    :param staged: solve block-wise (X,Y then A,B) instead of the full matrix.
    :raises GridExhausted: if every grid attempt was singular.
    """
    settings = settings or get_settings()
    oracle = oracle or _default_oracle
    n, m = phi.n, phi.m
    for attempt in range(settings.grid_retries):
        grid = choose_grid(n, m, None if attempt == 0 else seed + attempt)
        validate_grid(grid, n, m)
        with Timer(f"{len(grid)} oracle calls", verbose=False) as t:
            answers = run_in_threads(lambda gp: oracle(build_gadget(phi, gp)), grid, settings.workers)
        logger.info(str(t))
        values = [normalized_value(pr, gp, n) for pr, gp in zip(answers, grid)]
        try:
            with Timer("exact solve"):
                solution = (_solve_staged if staged else _solve_full)(grid, values, n, m)
        except SingularMatrix as e:
            logger.warning("grid attempt {} is singular ({}); perturbing", attempt + 1, e)
            continue
        return _integral(solution, n, m)
    raise GridExhausted(f"no nonsingular grid in {settings.grid_retries} attempts")


@timeit
def count_pp2cnf(phi: Pp2Cnf, oracle: Optional[Oracle] = None, settings: Settings | None = None) -> int:
    return recover_counts(phi, oracle, settings).satisfying


def edge_sets(n: int) -> Iterable[frozenset[tuple[int, int]]]:
    """Non-empty bipartite edge sets on 1..n, one per orbit of row/column relabelling."""
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    seen: set[frozenset[tuple[int, int]]] = set()
    perms = list(itertools.permutations(range(1, n + 1)))
    for size in range(1, len(pairs) + 1):
        for chosen in itertools.combinations(pairs, size):
            edges = frozenset(chosen)
            if edges in seen:
                continue
            for pi in perms:
                for sigma in perms:
                    seen.add(frozenset((pi[i - 1], sigma[j - 1]) for i, j in edges))
            yield edges
