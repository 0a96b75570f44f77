"""Partitions, characters, plethysm and Littlewood-Richardson coefficients,
orbit multiplicities and obstruction scans.

Plethysm coefficients a_mu(d, delta) are multiplicities of S_mu in
Sym^d(Sym^delta).  Two independent routes are provided: a weight-table route
(count multisets of monomials by weight, then antisymmetrize against the
Vandermonde) used for bulk scans, and the power-sum route (expand
h_d[h_delta] over p_nu and convert with Murnaghan-Nakayama characters).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import NotInvariant, OutOfRange, SizeMismatch
from .polyring import CycloScalar, LinearForm, Poly, substitute_linear


class Partition(tuple):
    """Nonincreasing tuple of positive integers (zeros are dropped)."""

    def __new__(cls, parts: Iterable[int] = ()):
        parts = tuple(int(p) for p in parts if p)
        if any(p < 0 for p in parts) or any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"not a partition: {parts}")
        return super().__new__(cls, parts)

    @property
    def size(self) -> int:
        return sum(self)

    @property
    def length(self) -> int:
        return len(self)

    def part(self, i: int) -> int:
        return self[i] if i < len(self) else 0

    def transpose(self) -> "Partition":
        if not self:
            return Partition()
        return Partition(sum(1 for p in self if p > j) for j in range(self[0]))

    def __add__(self, other):
        n = max(len(self), len(other))
        return Partition(self.part(i) + Partition(other).part(i) for i in range(n))

    def contains(self, other) -> bool:
        other = Partition(other)
        return len(other) <= len(self) and all(a <= self[i] for i, a in enumerate(other))

    def __repr__(self):
        return "(" + ",".join(map(str, self)) + ")"


def rectangle(rows: int, cols: int) -> Partition:
    """The partition rows x cols = (cols, ..., cols)."""
    return Partition([cols] * rows)


def frequency(rho: Sequence[int], m: int | None = None) -> tuple:
    """Frequency notation: entry i counts the parts equal to i + 1."""
    rho = Partition(rho)
    m = m if m is not None else (rho[0] if rho else 0)
    c = Counter(rho)
    return tuple(c.get(i + 1, 0) for i in range(m))


def partitions(n: int, max_part: int | None = None, max_len: int | None = None):
    """All partitions of n, in reverse lexicographic order."""
    max_part = n if max_part is None else min(max_part, n)
    if n == 0:
        yield Partition()
        return
    if max_len == 0:
        return
    for first in range(max_part, 0, -1):
        if max_len is not None and first * max_len < n:
            break
        for rest in partitions(n - first, first, None if max_len is None else max_len - 1):
            yield Partition((first,) + rest)


def partitions_inside(outer: Sequence[int], n: int):
    """Partitions of n contained in outer."""
    outer = Partition(outer)

    def rec(i, left, cap):
        if left == 0:
            yield ()
            return
        if i >= len(outer):
            return
        hi = min(cap, outer[i], left)
        for p in range(hi, 0, -1):
            for rest in rec(i + 1, left - p, p):
                yield (p,) + rest

    for t in rec(0, n, n):
        yield Partition(t)


def pieri_precedes(mu, lam) -> bool:
    """mu within lam with at most one box of lam/mu in each column."""
    mu, lam = Partition(mu), Partition(lam)
    if not lam.contains(mu):
        return False
    return all(lam.part(i + 1) <= mu.part(i) for i in range(len(lam)))


def horizontal_strip_removals(lam):
    """All mu with mu preceding lam in the Pieri order."""
    lam = Partition(lam)
    ranges = [range(lam.part(i + 1), lam[i] + 1) for i in range(len(lam))]
    for t in itertools.product(*ranges):
        yield Partition(t)


def z_factor(nu) -> int:
    out = 1
    for k, m in Counter(nu).items():
        out *= k ** m * math.factorial(m)
    return out


# ---------------------------------------------------------------- characters


@lru_cache(maxsize=None)
def _mn(beta: tuple, nu: tuple) -> int:
    if not nu:
        return 1
    k, rest = nu[0], nu[1:]
    occupied = set(beta)
    total = 0
    for b in beta:
        t = b - k
        if t < 0 or t in occupied:
            continue
        sign = -1 if sum(1 for c in beta if t < c < b) % 2 else 1
        nb = tuple(sorted((c if c != b else t) for c in beta))
        total += sign * _mn(nb, rest)
    return total


def mn_character(lam, nu) -> int:
    """chi^lam evaluated at the class of cycle type nu."""
    lam, nu = Partition(lam), Partition(nu)
    if lam.size != nu.size:
        raise SizeMismatch(f"|{lam}| != |{nu}|")
    n = len(lam)
    beta = tuple(sorted(lam[i] + n - 1 - i for i in range(n)))
    return _mn(beta, tuple(nu))


# ---------------------------------------------------------------- symmetric functions


@dataclass
class SymFunc:
    """Homogeneous symmetric function in a fixed basis."""

    basis: str
    terms: dict = field(default_factory=dict)  # Partition -> Fraction

    def __mul__(self, other: "SymFunc") -> "SymFunc":
        if self.basis != "PowerSum" or other.basis != "PowerSum":
            raise ValueError("products are implemented in the power-sum basis")
        out: dict = defaultdict(Fraction)
        for a, x in self.terms.items():
            for b, y in other.terms.items():
                out[Partition(sorted(tuple(a) + tuple(b), reverse=True))] += x * y
        return SymFunc("PowerSum", {k: v for k, v in out.items() if v})

    def to_schur(self) -> "SymFunc":
        if self.basis != "PowerSum":
            raise ValueError("expected power-sum basis")
        if not self.terms:
            return SymFunc("Schur", {})
        n = next(iter(self.terms)).size
        out = {}
        for lam in partitions(n):
            c = sum((x * mn_character(lam, nu) for nu, x in self.terms.items()), Fraction(0))
            if c:
                out[lam] = c
        return SymFunc("Schur", out)


def h_powersum(n: int) -> SymFunc:
    return SymFunc("PowerSum", {nu: Fraction(1, z_factor(nu)) for nu in partitions(n)})


def plethysm_powersum(outer: int, inner: int) -> SymFunc:
    """h_outer[h_inner] in the power-sum basis."""
    inner_terms = h_powersum(inner).terms
    total: dict = defaultdict(Fraction)
    for nu in partitions(outer):
        acc = SymFunc("PowerSum", {Partition(): Fraction(1, z_factor(nu))})
        for k in nu:
            pk = SymFunc("PowerSum", {Partition(k * r for r in rho): c for rho, c in inner_terms.items()})
            acc = acc * pk
        for lam, c in acc.terms.items():
            total[lam] += c
    return SymFunc("PowerSum", {k: v for k, v in total.items() if v})


# ---------------------------------------------------------------- weight tables


def _weights(n: int, deg: int):
    """Exponent vectors of the monomials of degree deg in n variables."""
    for c in itertools.combinations_with_replacement(range(n), deg):
        w = [0] * n
        for i in c:
            w[i] += 1
        yield tuple(w)


def weight_table(outer: int, inner: int, n: int) -> dict:
    """Weight multiplicities of Sym^outer(Sym^inner(C^n)), dominant weights only."""
    monos = list(_weights(n, inner)) if inner else [tuple([0] * n)]
    levels = [defaultdict(int) for _ in range(outer + 1)]
    levels[0][tuple([0] * n)] = 1
    for m in monos:
        for k in range(1, outer + 1):
            src = levels[k - 1]
            dst = levels[k]
            for w, c in list(src.items()):
                dst[tuple(a + b for a, b in zip(w, m))] += c
    return {w: c for w, c in levels[outer].items() if all(w[i] >= w[i + 1] for i in range(n - 1))}


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


class SymrepContext:
    """Per-computation caches for plethysm tables and coefficients."""

    def __init__(self):
        self._tables: dict = {}
        self._schur: dict = {}

    def schur_table(self, outer: int, inner: int, n: int) -> dict:
        """All a_mu(outer, inner) with l(mu) <= n, as a dict mu -> coefficient."""
        key = (outer, inner, n)
        if key in self._schur:
            return self._schur[key]
        K = weight_table(outer, inner, n)
        delta = tuple(range(n - 1, -1, -1))
        perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(n))]
        out = {}
        for mu in partitions(outer * inner, max_len=n):
            mu_v = tuple(mu.part(i) for i in range(n))
            acc = 0
            for p, sg in perms:
                w = [mu_v[i] + delta[i] - delta[p[i]] for i in range(n)]
                if min(w) < 0:
                    continue
                acc += sg * K.get(tuple(sorted(w, reverse=True)), 0)
            if acc:
                out[mu] = acc
        self._schur[key] = out
        return out

    def plethysm(self, mu, outer: int, inner: int) -> int:
        mu = Partition(mu)
        if mu.size != outer * inner:
            raise SizeMismatch(f"|{mu}| != {outer}*{inner}")
        if outer == 0:
            return 1 if not mu else 0
        if inner == 0:
            return 1 if not mu else 0
        if len(mu) > outer:
            return 0
        n = max(len(mu), 1)
        if n > 6:
            return plethysm_coeff(mu, outer, inner, method="powersum")
        return self.schur_table(outer, inner, n).get(mu, 0)


def plethysm_coeff(mu, outer: int, inner: int, method: str = "weight", ctx: SymrepContext | None = None) -> int:
    """Multiplicity of S_mu in Sym^outer(Sym^inner).

    Tabulated values a_lambda(delta, d) correspond to outer=delta, inner=d.
    """
    mu = Partition(mu)
    if mu.size != outer * inner:
        raise SizeMismatch(f"|{mu}| != {outer}*{inner}")
    if method == "weight":
        return (ctx or SymrepContext()).plethysm(mu, outer, inner)
    if method == "powersum":
        if outer == 0 or inner == 0:
            return 1 if not mu else 0
        f = plethysm_powersum(outer, inner)
        c = sum((x * mn_character(mu, nu) for nu, x in f.terms.items()), Fraction(0))
        assert c.denominator == 1
        return int(c)
    raise ValueError(f"unknown method {method}")


# ---------------------------------------------------------------- Littlewood-Richardson


def lr_coeff(lam, mu, nu) -> int:
    """c^lam_{mu,nu} by counting LR fillings of lam/mu with content nu."""
    lam, mu, nu = Partition(lam), Partition(mu), Partition(nu)
    if lam.size != mu.size + nu.size:
        raise SizeMismatch("sizes do not add up")
    if not lam.contains(mu) or not lam.contains(nu):
        return 0
    rows = [(i, mu.part(i), lam[i]) for i in range(len(lam))]
    boxes = [(i, j) for i, lo, hi in rows for j in range(hi - 1, lo - 1, -1)]
    k = len(nu)
    fill: dict = {}
    counts = [0] * (k + 1)

    def rec(t):
        if t == len(boxes):
            return 1
        i, j = boxes[t]
        total = 0
        right = fill.get((i, j + 1))
        above = fill.get((i - 1, j))
        hi = k if right is None else right
        lo = 1 if above is None else above + 1
        if above is None and i > 0 and j < mu.part(i - 1):
            lo = 1
        for v in range(lo, hi + 1):
            if counts[v] >= nu[v - 1]:
                continue
            if v > 1 and counts[v] + 1 > counts[v - 1]:
                continue
            fill[(i, j)] = v
            counts[v] += 1
            total += rec(t + 1)
            counts[v] -= 1
            del fill[(i, j)]
        return total

    return rec(0)


def multi_lr_coeff(kappa, mus: Sequence) -> int:
    """Multiplicity of S_kappa in the product of S_mu over mus."""
    kappa = Partition(kappa)
    mus = [Partition(m) for m in mus]
    if sum(m.size for m in mus) != kappa.size:
        raise SizeMismatch("sizes do not add up")
    current = {Partition(): 1}
    for m in mus:
        nxt: dict = defaultdict(int)
        for tau, c in current.items():
            size = tau.size + m.size
            for nu in partitions_inside(kappa, size):
                if nu.contains(tau):
                    v = lr_coeff(nu, tau, m)
                    if v:
                        nxt[nu] += c * v
        current = nxt
    return current.get(kappa, 0)


# ---------------------------------------------------------------- orbit multiplicities


def orbit_mult_P11(lam, d: int, D: int, ctx: SymrepContext | None = None) -> int:
    """Multiplicity of lam in the coordinate ring of the orbit of x_1...x_d + x_{d+1}^d."""
    lam = Partition(lam)
    if lam.size != d * D:
        raise SizeMismatch(f"|{lam}| != {d}*{D}")
    if len(lam) > d + 1:
        raise OutOfRange(f"{lam} has more than {d + 1} parts")
    ctx = ctx or SymrepContext()
    total = 0
    for mu in horizontal_strip_removals(lam):
        if len(mu) > d or mu.size % d:
            continue
        total += ctx.plethysm(mu, d, mu.size // d)
    return total


def strip_columns(lam, d: int) -> tuple[Partition, int]:
    """Remove the widest (d+1) x c block with c a multiple of lcm(2, d).

    Returns (rest, c).  Even width keeps the sign character trivial and
    d | c keeps the degree a multiple of d.
    """
    lam = Partition(lam)
    if len(lam) < d + 1:
        return lam, 0
    step = 2 * d // math.gcd(2, d)
    c = lam[d] - lam[d] % step
    return Partition(p - c for p in lam), c


def orbit_mult_P11_reduced(lam, d: int, D: int, ctx: SymrepContext | None = None) -> int:
    """orbit_mult_P11 after stripping a full-height block of columns."""
    rest, c = strip_columns(lam, d)
    return orbit_mult_P11(rest, d, D - (d + 1) * c // d, ctx)


def b_term(kappa, rho, d: int, D: int, ctx: SymrepContext | None = None) -> int:
    """One summand b(kappa, rho, d, D) of the power-sum orbit formula."""
    kappa = Partition(kappa)
    ctx = ctx or SymrepContext()
    hat = frequency(rho, D)
    choices = []
    for i, h in enumerate(hat, start=1):
        size = d * i * h
        opts = []
        for mu in partitions_inside(kappa, size):
            a = ctx.plethysm(mu, h, i * d)
            if a:
                opts.append((mu, a))
        if not opts:
            return 0
        choices.append(opts)
    total = 0
    for combo in itertools.product(*choices):
        prod = 1
        for _, a in combo:
            prod *= a
        total += prod * multi_lr_coeff(kappa, [mu for mu, _ in combo])
    return total


def orbit_mult_powersum(kappa, d: int, D: int, m: int, ctx: SymrepContext | None = None) -> int:
    """Multiplicity of kappa in the orbit coordinate ring of x_1^d + ... + x_m^d."""
    kappa = Partition(kappa)
    if kappa.size != d * D:
        raise SizeMismatch(f"|{kappa}| != {d}*{D}")
    if len(kappa) > m:
        raise OutOfRange(f"{kappa} has more than {m} parts")
    ctx = ctx or SymrepContext()
    return sum(b_term(kappa, rho, d, D, ctx) for rho in partitions(D, max_len=m))


def reduced_obstruction_check(d: int, ctx: SymrepContext | None = None) -> tuple[int, int]:
    """(upper, lower) multiplicities for lam = (5d-1,1) + (d+1) x 10d."""
    if d < 3:
        raise OutOfRange("need d >= 3")
    ctx = ctx or SymrepContext()
    kappa = Partition((5 * d - 1, 1))
    lam = kappa + rectangle(d + 1, 10 * d)
    D = lam.size // d
    upper = orbit_mult_P11_reduced(lam, d, D, ctx)
    lower = orbit_mult_powersum(kappa, d, 5, d + 1, ctx)
    return upper, lower


# ---------------------------------------------------------------- scans


def _scan_chunk(args):
    d, D, lams = args
    ctx = SymrepContext()
    out = []
    for lam in lams:
        a = ctx.plethysm(lam, D, d)
        if not a:
            continue
        b = orbit_mult_P11(lam, d, D, ctx)
        if a > b:
            out.append((lam, a, b))
    return out


def obstruction_scan(d: int, D: int, jobs: int = 1) -> list[tuple[Partition, int, int]]:
    """All lam |- dD with at most d+1 parts where a_lam(D, d) exceeds the orbit multiplicity."""
    lams = list(partitions(d * D, max_len=d + 1))
    if jobs <= 1:
        rows = _scan_chunk((d, D, lams))
    else:
        from concurrent.futures import ProcessPoolExecutor

        chunks = [(d, D, lams[i::jobs]) for i in range(jobs)]
        with ProcessPoolExecutor(jobs) as ex:
            rows = [r for part in ex.map(_scan_chunk, chunks) for r in part]
    return sorted(rows, key=lambda r: tuple(r[0]))


def format_scan_tsv(rows) -> str:
    return "".join(f"{tuple(lam)}\t{a}\t{b}\n".replace(" ", "") for lam, a, b in rows)


def format_scan_subscript(rows) -> str:
    return ", ".join(f"{lam!r}_{{{a}>{b}}}" for lam, a, b in rows)


# ---------------------------------------------------------------- stabilizers


def _var_index(d: int, r: int, s: int):
    def x(j, i):  # x_{ji}: position j in block i, both 0-based
        return i * d + j

    def y(k):
        return r * d + k

    return x, y


def p_polynomial(d: int, r: int, s: int) -> Poly:
    """sum_i prod_j x_{ji} + sum_k y_k^d."""
    n = d * r + s
    x, y = _var_index(d, r, s)
    out = Poly.zero(n)
    for i in range(r):
        e = [0] * n
        for j in range(d):
            e[x(j, i)] = 1
        out = out + Poly.monomial(e, 1, n)
    for k in range(s):
        e = [0] * n
        e[y(k)] = d
        out = out + Poly.monomial(e, 1, n)
    return out


def _identity(n):
    return [[CycloScalar.of(1 if i == j else 0) for j in range(n)] for i in range(n)]


def _perm_matrix(n, mapping: dict):
    g = _identity(n)
    for src, dst in mapping.items():
        g[src] = [CycloScalar.of(1 if c == dst else 0) for c in range(n)]
    return g


def stabilizer_generators(d: int, r: int, s: int, t=2) -> list:
    """Generators of the stabilizer of P^[d]_{r,s} as (n x n) matrices.

    Row i holds the image of variable i.  The torus element uses the
    rational t (any nonzero value works).
    """
    n = d * r + s
    x, y = _var_index(d, r, s)
    gens = []
    if r and d >= 2:
        g = _identity(n)
        g[x(0, 0)][x(0, 0)] = CycloScalar.of(t)
        g[x(1, 0)][x(1, 0)] = CycloScalar.of(Fraction(1, t)) if not isinstance(t, CycloScalar) else t.inv()
        gens.append(g)
        gens.append(_perm_matrix(n, {x(0, 0): x(1, 0), x(1, 0): x(0, 0)}))
        if d >= 3:
            gens.append(_perm_matrix(n, {x(j, 0): x((j + 1) % d, 0) for j in range(d)}))
    if r >= 2:
        gens.append(_perm_matrix(n, {**{x(j, 0): x(j, 1) for j in range(d)}, **{x(j, 1): x(j, 0) for j in range(d)}}))
        if r >= 3:
            gens.append(_perm_matrix(n, {x(j, i): x(j, (i + 1) % r) for i in range(r) for j in range(d)}))
    if s:
        g = _identity(n)
        g[y(0)][y(0)] = CycloScalar.zeta(d) if d > 2 else CycloScalar.of(-1 if d == 2 else 1)
        gens.append(g)
    if s >= 2:
        gens.append(_perm_matrix(n, {y(0): y(1), y(1): y(0)}))
        if s >= 3:
            gens.append(_perm_matrix(n, {y(k): y((k + 1) % s) for k in range(s)}))
    return gens


def _apply(g, f: Poly) -> Poly:
    return substitute_linear(f, [LinearForm(row) for row in g])


def verify_stabilizer(g, d: int, r: int, s: int) -> bool:
    P = p_polynomial(d, r, s)
    return _apply(g, P) == P


def characterize_by_stabilizer(f: Poly, d: int, r: int, s: int):
    """(alpha, beta) with f = alpha * sum prod x + beta * sum y^d, for invariant f."""
    n = d * r + s
    if f.nvars != n:
        raise SizeMismatch(f"expected {n} variables")
    for k, g in enumerate(stabilizer_generators(d, r, s)):
        if _apply(g, f) != f:
            raise NotInvariant(k)
    x, y = _var_index(d, r, s)
    alpha = beta = 0
    if r:
        e = [0] * n
        for j in range(d):
            e[x(j, 0)] = 1
        alpha = f.coefficient(e)
    if s:
        e = [0] * n
        e[y(0)] = d
        beta = f.coefficient(e)
    P_x = p_polynomial(d, r, 0).with_nvars(n) if r else Poly.zero(n)
    P_y = p_polynomial(d, r, s) - P_x
    if f != P_x.scale(alpha) + P_y.scale(beta):
        raise NotInvariant(None, "invariant polynomial is not of the two-parameter form")
    return alpha, beta
