"""Latin squares, column signs, Alon-Tarsi differences and the invariant f_T."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import InvalidSquare, OutOfRange, SizeMismatch
from .polyring import CycloScalar, LinearForm, Poly, rank
from .symrep import Partition

MAX_ORDER = 5


@dataclass(frozen=True)
class LatinSquare:
    n: int
    grid: tuple

    def __post_init__(self):
        grid = tuple(tuple(int(v) for v in row) for row in self.grid)
        object.__setattr__(self, "grid", grid)
        full = set(range(1, self.n + 1))
        if len(grid) != self.n or any(set(row) != full or len(row) != self.n for row in grid):
            raise InvalidSquare("rows must be permutations of 1..n")
        for c in range(self.n):
            if {grid[r][c] for r in range(self.n)} != full:
                raise InvalidSquare(f"column {c} is not a permutation")

    @classmethod
    def of(cls, rows) -> "LatinSquare":
        rows = [list(r) for r in rows]
        return cls(len(rows), tuple(map(tuple, rows)))

    def swap_rows(self, i: int, j: int) -> "LatinSquare":
        g = list(self.grid)
        g[i], g[j] = g[j], g[i]
        return LatinSquare(self.n, tuple(g))


def perm_sign(p: Sequence[int]) -> int:
    """Sign of a permutation of 0..n-1 given in one-line notation."""
    inv = sum(1 for i in range(len(p)) for j in range(i + 1, len(p)) if p[i] > p[j])
    return -1 if inv % 2 else 1


def column_sign(L: LatinSquare) -> int:
    """Product over columns of the sign of row -> entry."""
    s = 1
    for c in range(L.n):
        s *= perm_sign([L.grid[r][c] - 1 for r in range(L.n)])
    return s


def latin_squares(n: int):
    """All Latin squares of order n, generated row by row."""
    if n < 1:
        return
    col_used = [set() for _ in range(n)]
    rows: list = []

    def fill_row(r, c, row, used):
        if c == n:
            rows.append(tuple(row))
            if r + 1 == n:
                yield LatinSquare(n, tuple(rows))
            else:
                yield from fill_row(r + 1, 0, [], set())
            rows.pop()
            return
        for v in range(1, n + 1):
            if v in used or v in col_used[c]:
                continue
            used.add(v)
            col_used[c].add(v)
            row.append(v)
            yield from fill_row(r, c + 1, row, used)
            row.pop()
            col_used[c].discard(v)
            used.discard(v)

    yield from fill_row(0, 0, [], set())


def _signed_count_normalized(n: int) -> int:
    """Sum of column signs over squares whose first row is 1..n.

    Inversions are counted incrementally so no square is materialized.
    """
    col_vals = [[c + 1] for c in range(n)]
    total = 0

    def rec(r, c, used, parity):
        nonlocal total
        if r == n:
            total += -1 if parity else 1
            return
        if c == n:
            rec(r + 1, 0, set(), parity)
            return
        vals = col_vals[c]
        for v in range(1, n + 1):
            if v in used or v in vals:
                continue
            inv = sum(1 for u in vals if u > v)
            vals.append(v)
            used.add(v)
            rec(r, c + 1, used, parity ^ (inv & 1))
            used.discard(v)
            vals.pop()

    rec(1, 0, set(), 0)
    return total


def alon_tarsi_difference(n: int, brute: bool = False) -> int:
    """Signed count of Latin squares of order n by column sign.

    Relabeling symbols by sigma multiplies the sign by sgn(sigma)^n, so the
    count is n! times the normalized count for even n and 0 for odd n.  With
    brute=True every square is enumerated instead.
    """
    if n < 1 or n > MAX_ORDER:
        raise OutOfRange(f"order {n} outside 1..{MAX_ORDER}")
    if brute:
        return sum(column_sign(L) for L in latin_squares(n))
    if n == 1:
        return 1
    if n % 2:
        return 0
    return math.factorial(n) * _signed_count_normalized(n)


# ---------------------------------------------------------------- tableaux and tensors


@dataclass(frozen=True)
class Tableau:
    shape: Partition
    entries: tuple  # rows of positive integers

    def __post_init__(self):
        object.__setattr__(self, "shape", Partition(self.shape))
        rows = tuple(tuple(int(v) for v in r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        if tuple(len(r) for r in rows) != tuple(self.shape):
            raise SizeMismatch("entries do not match the shape")

    @classmethod
    def of(cls, rows) -> "Tableau":
        rows = [tuple(r) for r in rows]
        return cls(Partition(len(r) for r in rows), tuple(rows))

    @classmethod
    def row_blocks(cls, rows: int, cols: int) -> "Tableau":
        """The rectangle whose row i is filled with i."""
        return cls.of([[i + 1] * cols for i in range(rows)])

    def content(self) -> dict:
        out: dict = {}
        for r in self.entries:
            for v in r:
                out[v] = out.get(v, 0) + 1
        return out

    def blocks(self) -> list:
        """Box lists (row, col) per entry value, in increasing value order."""
        out: dict = {}
        for i, r in enumerate(self.entries):
            for j, v in enumerate(r):
                out.setdefault(v, []).append((i, j))
        return [out[k] for k in sorted(out)]


@dataclass(frozen=True)
class TensorPoint:
    """sum_i l_{i,1} (x) ... (x) l_{i,d} with eps-free linear forms."""

    summands: tuple

    def __post_init__(self):
        object.__setattr__(self, "summands", tuple(tuple(s) for s in self.summands))
        if len({len(s) for s in self.summands}) > 1:
            raise SizeMismatch("summands of different orders")

    @property
    def order(self) -> int:
        return len(self.summands[0]) if self.summands else 0

    @property
    def dim(self) -> int:
        return self.summands[0][0].nvars if self.summands else 0

    @classmethod
    def symmetrize(cls, f: Poly) -> "TensorPoint":
        """Plain orbit sum: each monomial term c x_{i1}...x_{id} gives all d! orderings.

        Repeated variables are counted once (x^d gives the single x (x) ... (x) x).
        """
        n = f.nvars
        summands = []
        for exps, c in f.items():
            vars_ = [i for i, e in enumerate(exps) for _ in range(e)]
            scalar = CycloScalar.of(c)
            for k, order in enumerate(sorted(set(itertools.permutations(vars_)))):
                forms = [LinearForm.basis(i, n) for i in order]
                forms[0] = forms[0].scale(scalar)
                summands.append(tuple(forms))
        return cls(tuple(summands))


def _vector(f: LinearForm) -> tuple:
    return tuple(CycloScalar.of(c) for c in f.coeffs)


def _monomial_vec(v: tuple):
    nz = [(i, c) for i, c in enumerate(v) if not c.is_zero()]
    return nz[0] if len(nz) == 1 else None


def _det(cols: list) -> CycloScalar:
    """Determinant of the top square part of the matrix with these columns."""
    h = len(cols)
    if h == 0:
        return CycloScalar.of(1)
    mono = [_monomial_vec(v) for v in cols]
    if all(m is not None for m in mono):
        idx = [m[0] for m in mono]
        if len(set(idx)) < h or max(idx) >= h:
            return CycloScalar.of(0)
        out = CycloScalar.of(perm_sign(idx))
        for _, c in mono:
            out = out * c
        return out
    M = [[cols[j][i] for j in range(h)] for i in range(h)]
    return _det_elim(M)


def _det_elim(M) -> CycloScalar:
    M = [row[:] for row in M]
    n = len(M)
    det = CycloScalar.of(1)
    for c in range(n):
        p = next((r for r in range(c, n) if not M[r][c].is_zero()), None)
        if p is None:
            return CycloScalar.of(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det = det * M[c][c]
        inv = M[c][c].inv()
        for r in range(c + 1, n):
            if not M[r][c].is_zero():
                f = M[r][c] * inv
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return det


def _independent(cols: list) -> bool:
    mono = [_monomial_vec(v) for v in cols]
    if all(m is not None for m in mono):
        return len({m[0] for m in mono}) == len(mono)
    return rank([list(v) for v in cols]) == len(cols)


def _block_options(block, p: TensorPoint):
    """Distinct vector assignments for one block, with multiplicities."""
    d = len(block)
    opts: dict = {}
    vecs = [[_vector(f) for f in s] for s in p.summands]
    for s in vecs:
        for perm in itertools.permutations(range(d)):
            key = tuple(s[perm[k]] for k in range(d))
            hk = tuple(tuple(c.coords for c in v) for v in key)
            if hk in opts:
                opts[hk][1] += 1
            else:
                opts[hk] = [key, 1]
    return [(k, m) for k, m in opts.values()]


def _placement_sum(T: Tableau, p: TensorPoint, forced=None) -> CycloScalar:
    blocks = T.blocks()
    options = [_block_options(b, p) for b in blocks]
    ncols = T.shape[0] if T.shape else 0
    columns: list = [dict() for _ in range(ncols)]  # column -> {row: vector}
    total = CycloScalar.of(0)

    def rec(k, weight):
        nonlocal total
        if k == len(blocks):
            prod = CycloScalar.of(weight)
            for col in columns:
                prod = prod * _det([col[r] for r in sorted(col)])
                if prod.is_zero():
                    return
            total = total + prod
            return
        for idx, (vecs, mult) in enumerate(options[k]):
            if forced is not None and not forced(k, vecs):
                continue
            ok = True
            placed = []
            for (r, c), v in zip(blocks[k], vecs):
                columns[c][r] = v
                placed.append((r, c))
                if not _independent(list(columns[c].values())):
                    ok = False
                    break
            if ok:
                rec(k + 1, weight * mult)
            for r, c in placed:
                del columns[c][r]

    rec(0, 1)
    return total


def fundamental_invariant_eval(T: Tableau, p: TensorPoint, literal: bool = False) -> CycloScalar:
    """f_T(p), averaged over the d! orderings inside each block.

    The literal sum over proper placements is (d!)^(number of blocks) times
    the returned value on symmetric points; pass literal=True to get it.
    """
    d = p.order
    content = T.content()
    if any(v != d for v in content.values()) or sorted(content) != list(range(1, len(content) + 1)):
        raise SizeMismatch(f"tableau content is not n x {d}")
    total = _placement_sum(T, p)
    if literal:
        return total
    return total * CycloScalar.of(Fraction(1, math.factorial(d) ** len(content)))


def alon_tarsi_point(d: int) -> TensorPoint:
    n = d + 1
    mono = Poly.const(1, n)
    for i in range(d):
        mono = mono * Poly.var(i, n)
    return TensorPoint.symmetrize(mono + Poly.var(d, n) ** d)


def fundamental_invariant_parts(d: int) -> list:
    """Contributions grouped by the row holding the x_{d+1} block."""
    T = Tableau.row_blocks(d + 1, d)
    p = alon_tarsi_point(d)
    last = tuple(CycloScalar.of(1 if i == d else 0) for i in range(d + 1))
    norm = CycloScalar.of(Fraction(1, math.factorial(d) ** (d + 1)))
    parts = []
    for row in range(d + 1):
        def forced(k, vecs, row=row):
            return (all(v == last for v in vecs)) == (k == row)

        parts.append(_placement_sum(T, p, forced) * norm)
    return parts


def alon_tarsi_fundamental_check(d: int) -> bool:
    """f_T at x_1...x_d + x_{d+1}^d equals (d+1) AT(d); returns whether it is nonzero."""
    if d not in (2, 4):
        raise OutOfRange("d must be 2 or 4")
    value = fundamental_invariant_eval(Tableau.row_blocks(d + 1, d), alon_tarsi_point(d))
    expected = (d + 1) * alon_tarsi_difference(d)
    if value != expected:
        raise AssertionError(f"f_T = {value}, expected {expected}")
    return not value.is_zero()
