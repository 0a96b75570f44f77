"""Exact scalars in Q(zeta_N)[eps, 1/eps] and sparse polynomials over them.

Rationals are gmpy2.mpq.  An element of Q(zeta_N) is stored as a coordinate
vector in the power basis of Q[t]/Phi_N(t); when phi(N) == 1 (N in {1, 2}) the
element is a bare mpq.  Different orders meet in Q(zeta_lcm) via t -> t^(L/N).

Polynomials keep their monomials packed into Python ints (16 bits per
variable) and map each monomial to a dict {eps exponent: field element}.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterable, Sequence

from gmpy2 import mpq, mpz

from .errors import DivergentLimit, SizeMismatch

ZERO = mpq(0)
ONE = mpq(1)
_BITS = 16
_MASK = (1 << _BITS) - 1


class _AnyDegree:
    """Degree marker of the zero polynomial (homogeneous of every degree)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "ANY"


ANY = _AnyDegree()


def rat(x) -> mpq:
    """Coerce int, str ('p/q'), Fraction or mpq to mpq."""
    if isinstance(x, str):
        return mpq(x.strip())
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def rat_str(q) -> str:
    q = mpq(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------- cyclotomic


def _exact_div(a: list[int], b: Sequence[int]) -> list[int]:
    a = list(a)
    db = len(b) - 1
    q = [0] * (len(a) - db)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i] // b[-1]
        q[i - db] = c
        if c:
            for j, bj in enumerate(b):
                a[i - db + j] -= c * bj
    assert not any(a[:db]), "inexact division"
    return q


@lru_cache(maxsize=None)
def cyclotomic_poly(n: int) -> tuple[int, ...]:
    """Coefficients of Phi_n, lowest degree first."""
    p = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            p = _exact_div(p, cyclotomic_poly(d))
    return tuple(p)


def euler_phi(n: int) -> int:
    return len(cyclotomic_poly(n)) - 1


class _Field:
    """Arithmetic on raw elements of Q(zeta_N)."""

    def __init__(self, N: int):
        self.N = N
        phi = euler_phi(N)
        self.phi = phi
        self.scalar = phi == 1
        if self.scalar:
            self.zero = ZERO
            self.one = ONE
            self.pow_table = [ONE if (N == 1 or k % 2 == 0) else -ONE for k in range(N)]
            return
        self.zero = (ZERO,) * phi
        self.one = (ONE,) + (ZERO,) * (phi - 1)
        cyc = cyclotomic_poly(N)
        # t^k reduced mod Phi_N for k < max(N, 2*phi - 1)
        table = []
        cur = [ONE] + [ZERO] * (phi - 1)
        for _ in range(max(N, 2 * phi - 1)):
            table.append(tuple(cur))
            top = cur[-1]
            cur = [ZERO] + cur[:-1]
            if top:
                for i in range(phi):
                    cur[i] -= top * cyc[i]
        self.pow_table = table[:N]
        self._red = [[(i, c) for i, c in enumerate(table[k]) if c] for k in range(2 * phi - 1)]

    def coerce_rat(self, q):
        q = mpq(q)
        if self.scalar:
            return q
        return (q,) + (ZERO,) * (self.phi - 1)

    def is_zero(self, a) -> bool:
        if self.scalar:
            return not a
        return not any(a)

    def add(self, a, b):
        if self.scalar:
            return a + b
        return tuple(x + y for x, y in zip(a, b))

    def sub(self, a, b):
        if self.scalar:
            return a - b
        return tuple(x - y for x, y in zip(a, b))

    def neg(self, a):
        if self.scalar:
            return -a
        return tuple(-x for x in a)

    def smul(self, q, a):
        if self.scalar:
            return q * a
        return tuple(q * x for x in a)

    def mul(self, a, b):
        if self.scalar:
            return a * b
        phi = self.phi
        c = [ZERO] * (2 * phi - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        c[i + j] += x * y
        out = c[:phi]
        red = self._red
        for k in range(phi, 2 * phi - 1):
            ck = c[k]
            if ck:
                for i, r in red[k]:
                    out[i] += ck * r
        return tuple(out)

    def inv(self, a):
        if self.scalar:
            if not a:
                raise ZeroDivisionError("inverse of zero")
            return 1 / a
        phi = self.phi
        cols = [self.mul(a, self.pow_table[j] if j < self.N else self.one) for j in range(phi)]
        mat = [[cols[j][i] for j in range(phi)] + [ONE if i == 0 else ZERO] for i in range(phi)]
        sol = _rat_solve_aug(mat, phi)
        if sol is None:
            raise ZeroDivisionError("inverse of zero")
        return tuple(sol)

    def rational_value(self, a):
        """Return the rational if a lies in Q, else None."""
        if self.scalar:
            return a
        if any(a[1:]):
            return None
        return a[0]

    def coords(self, a) -> tuple:
        return (a,) if self.scalar else a

    def from_coords(self, coords):
        coords = [rat(c) for c in coords]
        if len(coords) != self.phi:
            raise SizeMismatch(f"expected {self.phi} coordinates for N={self.N}")
        return coords[0] if self.scalar else tuple(coords)

    def zeta(self, k: int):
        return self.pow_table[k % self.N]


def _rat_solve_aug(mat, n):
    """Gauss-Jordan on an n x (n+1) augmented rational matrix; None if singular."""
    for col in range(n):
        piv = next((r for r in range(col, n) if mat[r][col]), None)
        if piv is None:
            return None
        mat[col], mat[piv] = mat[piv], mat[col]
        p = mat[col][col]
        row = [x / p for x in mat[col]]
        mat[col] = row
        for r in range(n):
            if r != col and mat[r][col]:
                f = mat[r][col]
                mat[r] = [x - f * y for x, y in zip(mat[r], row)]
    return [mat[r][n] for r in range(n)]


@lru_cache(maxsize=None)
def field(N: int) -> _Field:
    if N < 1:
        raise ValueError("cyclotomic order must be positive")
    return _Field(N)


def embed(a, N: int, L: int):
    """Embed a raw element of Q(zeta_N) into Q(zeta_L), N | L."""
    if N == L:
        return a
    F, G = field(N), field(L)
    if F.scalar:
        return G.coerce_rat(a)
    step = L // N
    out = list(G.zero) if not G.scalar else None
    if G.scalar:
        acc = ZERO
        for i, x in enumerate(a):
            if x:
                acc += x * G.pow_table[(i * step) % L]
        return acc
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(G.pow_table[(i * step) % L]):
                if y:
                    out[j] += x * y
    return tuple(out)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


# ---------------------------------------------------------------- scalars


class CycloScalar:
    """An element of Q(zeta_N)."""

    __slots__ = ("N", "_v")

    def __init__(self, N: int, v):
        self.N = N
        self._v = v

    @classmethod
    def of(cls, x) -> "CycloScalar":
        if isinstance(x, CycloScalar):
            return x
        if isinstance(x, LaurentScalar):
            if any(e != 0 for e in x.terms_raw):
                raise ValueError("scalar depends on eps")
            return cls(x.N, x.terms_raw.get(0, field(x.N).zero))
        return cls(1, rat(x))

    @classmethod
    def from_coords(cls, N: int, coords) -> "CycloScalar":
        return cls(N, field(N).from_coords(coords))

    @classmethod
    def zeta(cls, N: int, k: int = 1) -> "CycloScalar":
        return cls(N, field(N).zeta(k))

    @property
    def coords(self) -> tuple:
        return field(self.N).coords(self._v)

    def promote(self, L: int) -> "CycloScalar":
        return CycloScalar(L, embed(self._v, self.N, L))

    def _pair(self, other):
        o = CycloScalar.of(other)
        if o.N == self.N:
            return self.N, self._v, o._v
        L = _lcm(self.N, o.N)
        return L, embed(self._v, self.N, L), embed(o._v, o.N, L)

    def __add__(self, other):
        if isinstance(other, LaurentScalar):
            return NotImplemented
        N, a, b = self._pair(other)
        return CycloScalar(N, field(N).add(a, b))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, LaurentScalar):
            return NotImplemented
        N, a, b = self._pair(other)
        return CycloScalar(N, field(N).sub(a, b))

    def __rsub__(self, other):
        return CycloScalar.of(other) - self

    def __neg__(self):
        return CycloScalar(self.N, field(self.N).neg(self._v))

    def __mul__(self, other):
        if isinstance(other, (LaurentScalar, Poly, LinearForm)):
            return NotImplemented
        N, a, b = self._pair(other)
        return CycloScalar(N, field(N).mul(a, b))

    __rmul__ = __mul__

    def inv(self) -> "CycloScalar":
        return CycloScalar(self.N, field(self.N).inv(self._v))

    def __truediv__(self, other):
        if isinstance(other, LaurentScalar):
            return NotImplemented
        return self * CycloScalar.of(other).inv()

    def __rtruediv__(self, other):
        return CycloScalar.of(other) * self.inv()

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        F = field(self.N)
        out, base = F.one, self._v
        while k:
            if k & 1:
                out = F.mul(out, base)
            base = F.mul(base, base)
            k >>= 1
        return CycloScalar(self.N, out)

    def is_zero(self) -> bool:
        return field(self.N).is_zero(self._v)

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, LaurentScalar):
            return LaurentScalar.of(self) == other
        try:
            N, a, b = self._pair(other)
        except (TypeError, ValueError):
            return NotImplemented
        return field(N).is_zero(field(N).sub(a, b))

    __hash__ = None

    def rational(self):
        """The value as mpq, or None when irrational."""
        return field(self.N).rational_value(self._v)

    def __repr__(self):
        return _cyclo_str(self.N, self._v)


def _cyclo_str(N, v) -> str:
    F = field(N)
    if F.scalar:
        return rat_str(v)
    parts = []
    for i, c in enumerate(v):
        if c:
            mon = "" if i == 0 else (f"z{N}" if i == 1 else f"z{N}^{i}")
            if i == 0:
                parts.append(rat_str(c))
            elif c == 1:
                parts.append(mon)
            elif c == -1:
                parts.append("-" + mon)
            else:
                parts.append(f"{rat_str(c)}*{mon}")
    if not parts:
        return "0"
    s = parts[0]
    for p in parts[1:]:
        s += (" - " + p[1:]) if p.startswith("-") else (" + " + p)
    return s if len(parts) == 1 else f"({s})"


class LaurentScalar:
    """A finite Laurent polynomial in eps with Q(zeta_N) coefficients."""

    __slots__ = ("N", "terms_raw")

    def __init__(self, N: int = 1, terms_raw: dict | None = None):
        self.N = N
        self.terms_raw = terms_raw if terms_raw is not None else {}

    @classmethod
    def of(cls, x) -> "LaurentScalar":
        if isinstance(x, LaurentScalar):
            return x
        if isinstance(x, CycloScalar):
            F = field(x.N)
            return cls(x.N, {} if F.is_zero(x._v) else {0: x._v})
        q = rat(x)
        return cls(1, {0: q} if q else {})

    @classmethod
    def eps(cls, k: int = 1, coeff=1) -> "LaurentScalar":
        c = CycloScalar.of(coeff)
        if c.is_zero():
            return cls(c.N, {})
        return cls(c.N, {k: c._v})

    @classmethod
    def zeta(cls, N: int, k: int = 1) -> "LaurentScalar":
        return cls(N, {0: field(N).zeta(k)})

    @property
    def terms(self) -> dict:
        return {e: CycloScalar(self.N, v) for e, v in sorted(self.terms_raw.items())}

    def coeff(self, e: int) -> CycloScalar:
        return CycloScalar(self.N, self.terms_raw.get(e, field(self.N).zero))

    def promote(self, L: int) -> "LaurentScalar":
        if L == self.N:
            return self
        return LaurentScalar(L, {e: embed(v, self.N, L) for e, v in self.terms_raw.items()})

    def _pair(self, other):
        o = LaurentScalar.of(other)
        if o.N == self.N:
            return self.N, self.terms_raw, o.terms_raw
        L = _lcm(self.N, o.N)
        return L, self.promote(L).terms_raw, o.promote(L).terms_raw

    def __add__(self, other):
        if isinstance(other, (Poly, LinearForm)):
            return NotImplemented
        N, a, b = self._pair(other)
        return LaurentScalar(N, _ladd(field(N), a, b))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Poly, LinearForm)):
            return NotImplemented
        return self + (-LaurentScalar.of(other))

    def __rsub__(self, other):
        return LaurentScalar.of(other) - self

    def __neg__(self):
        F = field(self.N)
        return LaurentScalar(self.N, {e: F.neg(v) for e, v in self.terms_raw.items()})

    def __mul__(self, other):
        if isinstance(other, (Poly, LinearForm)):
            return NotImplemented
        N, a, b = self._pair(other)
        return LaurentScalar(N, _lmul(field(N), a, b))

    __rmul__ = __mul__

    def mul(self, other, cutoff: int | None = None) -> "LaurentScalar":
        N, a, b = self._pair(other)
        return LaurentScalar(N, _lmul(field(N), a, b, cutoff))

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = LaurentScalar.of(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_monomial(self) -> bool:
        return len(self.terms_raw) == 1

    def inv(self) -> "LaurentScalar":
        """Inverse of a single-term Laurent scalar (units of the Laurent ring)."""
        if len(self.terms_raw) != 1:
            raise ZeroDivisionError("only monomial Laurent scalars are invertible")
        (e, v), = self.terms_raw.items()
        return LaurentScalar(self.N, {-e: field(self.N).inv(v)})

    def __truediv__(self, other):
        o = LaurentScalar.of(other)
        return self * o.inv()

    def is_zero(self) -> bool:
        return not self.terms_raw

    def __bool__(self):
        return bool(self.terms_raw)

    def __eq__(self, other):
        if isinstance(other, (Poly, LinearForm)):
            return NotImplemented
        try:
            N, a, b = self._pair(other)
        except (TypeError, ValueError):
            return NotImplemented
        return not _ladd(field(N), a, {e: field(N).neg(v) for e, v in b.items()})

    __hash__ = None

    def min_exp(self):
        return min(self.terms_raw) if self.terms_raw else None

    def max_exp(self):
        return max(self.terms_raw) if self.terms_raw else None

    def leading(self) -> tuple[int, CycloScalar]:
        """Lowest eps exponent and its coefficient."""
        e = self.min_exp()
        return e, CycloScalar(self.N, self.terms_raw[e])

    def limit(self) -> CycloScalar:
        if self.terms_raw and min(self.terms_raw) < 0:
            raise DivergentLimit((), min(self.terms_raw))
        return self.coeff(0)

    def truncate(self, cutoff: int) -> "LaurentScalar":
        return LaurentScalar(self.N, {e: v for e, v in self.terms_raw.items() if e < cutoff})

    def shift(self, k: int) -> "LaurentScalar":
        return LaurentScalar(self.N, {e + k: v for e, v in self.terms_raw.items()})

    def subst_eps_power(self, k: int) -> "LaurentScalar":
        if k < 1:
            raise ValueError("k must be positive")
        return LaurentScalar(self.N, {e * k: v for e, v in self.terms_raw.items()})

    def is_eps_free(self) -> bool:
        return all(e == 0 for e in self.terms_raw)

    def to_json(self) -> dict:
        F = field(self.N)
        return {
            "N": self.N,
            "terms": [[e, [rat_str(c) for c in F.coords(v)]] for e, v in sorted(self.terms_raw.items())],
        }

    @classmethod
    def from_json(cls, obj) -> "LaurentScalar":
        if not isinstance(obj, dict):
            return cls.of(obj)
        N = int(obj["N"])
        F = field(N)
        terms = {}
        for e, coords in obj["terms"]:
            v = F.from_coords(coords)
            if not F.is_zero(v):
                terms[int(e)] = v
        return cls(N, terms)

    def __repr__(self):
        if not self.terms_raw:
            return "0"
        parts = []
        for e, v in sorted(self.terms_raw.items()):
            c = _cyclo_str(self.N, v)
            if e == 0:
                parts.append(c)
            else:
                mon = "eps" if e == 1 else f"eps^{e}"
                parts.append(mon if c == "1" else (f"-{mon}" if c == "-1" else f"{c}*{mon}"))
        return " + ".join(parts) if len(parts) > 1 else parts[0]


def _ladd(F: _Field, a: dict, b: dict) -> dict:
    if not b:
        return dict(a)
    out = dict(a)
    for e, v in b.items():
        w = out.get(e)
        if w is None:
            out[e] = v
        else:
            s = F.add(w, v)
            if F.is_zero(s):
                del out[e]
            else:
                out[e] = s
    return out


def _lmul(F: _Field, a: dict, b: dict, cutoff=None) -> dict:
    out: dict = {}
    mul, add = F.mul, F.add
    for e1, v1 in a.items():
        for e2, v2 in b.items():
            e = e1 + e2
            if cutoff is not None and e >= cutoff:
                continue
            p = mul(v1, v2)
            w = out.get(e)
            out[e] = p if w is None else add(w, p)
    iz = F.is_zero
    return {e: v for e, v in out.items() if not iz(v)}


def scalar_lcm_order(*xs) -> int:
    out = 1
    for x in xs:
        n = getattr(x, "N", 1)
        out = _lcm(out, n)
    return out


# ---------------------------------------------------------------- monomials


def pack(exps: Sequence[int]) -> int:
    m = 0
    for i, e in enumerate(exps):
        if e < 0 or e > _MASK:
            raise ValueError("exponent out of range")
        m |= e << (_BITS * i)
    return m


def unpack(m: int, n: int) -> tuple[int, ...]:
    return tuple((m >> (_BITS * i)) & _MASK for i in range(n))


def mono_degree(m: int) -> int:
    d = 0
    while m:
        d += m & _MASK
        m >>= _BITS
    return d


def trim(exps: Sequence[int]) -> tuple[int, ...]:
    exps = list(exps)
    while exps and exps[-1] == 0:
        exps.pop()
    return tuple(exps)


# ---------------------------------------------------------------- polynomials


class Poly:
    """Sparse polynomial in nvars variables over Q(zeta_N)[eps, 1/eps]."""

    __slots__ = ("nvars", "N", "_t")

    def __init__(self, nvars: int, N: int = 1, t: dict | None = None):
        self.nvars = nvars
        self.N = N
        self._t = t if t is not None else {}

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars)

    @classmethod
    def const(cls, c, nvars: int) -> "Poly":
        s = LaurentScalar.of(c)
        return cls(nvars, s.N, {0: dict(s.terms_raw)} if s.terms_raw else {})

    @classmethod
    def var(cls, i: int, nvars: int, coeff=1) -> "Poly":
        if not 0 <= i < nvars:
            raise ValueError(f"variable {i} out of range for nvars={nvars}")
        s = LaurentScalar.of(coeff)
        return cls(nvars, s.N, {1 << (_BITS * i): dict(s.terms_raw)} if s.terms_raw else {})

    @classmethod
    def monomial(cls, exps: Sequence[int], coeff=1, nvars: int | None = None) -> "Poly":
        n = len(exps) if nvars is None else nvars
        if len(trim(exps)) > n:
            raise ValueError("monomial has more variables than nvars")
        s = LaurentScalar.of(coeff)
        return cls(n, s.N, {pack(exps): dict(s.terms_raw)} if s.terms_raw else {})

    @classmethod
    def from_terms(cls, nvars: int, terms) -> "Poly":
        """Build from {exponent tuple: scalar} or an iterable of pairs."""
        items = terms.items() if isinstance(terms, dict) else terms
        out = cls(nvars)
        for exps, c in items:
            out = out + cls.monomial(exps, c, nvars)
        return out

    # internals ---------------------------------------------------------
    def promote(self, L: int) -> "Poly":
        if L == self.N:
            return self
        N = self.N
        return Poly(self.nvars, L, {m: {e: embed(v, N, L) for e, v in c.items()} for m, c in self._t.items()})

    def _align(self, other: "Poly"):
        if other.nvars != self.nvars:
            raise SizeMismatch(f"nvars mismatch: {self.nvars} vs {other.nvars}")
        if other.N == self.N:
            return self.N, self._t, other._t
        L = _lcm(self.N, other.N)
        return L, self.promote(L)._t, other.promote(L)._t

    def _coerce(self, x) -> "Poly":
        if isinstance(x, Poly):
            return x
        if isinstance(x, LinearForm):
            return x.to_poly()
        return Poly.const(x, self.nvars)

    # public views -----------------------------------------------------
    @property
    def terms(self) -> dict:
        n = self.nvars
        return {trim(unpack(m, n)): LaurentScalar(self.N, dict(c)) for m, c in sorted(self._t.items())}

    def items(self):
        """Yield (exponent tuple of length nvars, LaurentScalar)."""
        n = self.nvars
        for m, c in self._t.items():
            yield unpack(m, n), LaurentScalar(self.N, c)

    def coefficient(self, exps: Sequence[int]) -> LaurentScalar:
        c = self._t.get(pack(exps))
        return LaurentScalar(self.N, dict(c) if c else {})

    def num_terms(self) -> int:
        return sum(len(c) for c in self._t.values())

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        N, a, b = self._align(other)
        F = field(N)
        out = dict(a)
        for m, c in b.items():
            w = out.get(m)
            if w is None:
                out[m] = c
            else:
                s = _ladd(F, w, c)
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Poly(self.nvars, N, out)

    __radd__ = __add__

    def __neg__(self):
        F = field(self.N)
        return Poly(self.nvars, self.N, {m: {e: F.neg(v) for e, v in c.items()} for m, c in self._t.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, s) -> "Poly":
        s = LaurentScalar.of(s)
        if not s.terms_raw:
            return Poly(self.nvars, _lcm(self.N, s.N))
        L = _lcm(self.N, s.N)
        F = field(L)
        p = self.promote(L)
        sv = s.promote(L).terms_raw
        out = {}
        for m, c in p._t.items():
            r = _lmul(F, c, sv)
            if r:
                out[m] = r
        return Poly(self.nvars, L, out)

    def __mul__(self, other):
        if isinstance(other, (Poly, LinearForm)):
            return self.mul(self._coerce(other))
        return self.scale(other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def mul(self, other: "Poly", cutoff: int | None = None) -> "Poly":
        """Product; with a cutoff, terms with eps exponent >= cutoff are dropped."""
        other = self._coerce(other)
        N, a, b = self._align(other)
        F = field(N)
        mulf, addf, iz = F.mul, F.add, F.is_zero
        out: dict = {}
        bl = list(b.items())
        for m1, c1 in a.items():
            for m2, c2 in bl:
                m = m1 + m2
                acc = out.get(m)
                if acc is None:
                    acc = out[m] = {}
                for e1, v1 in c1.items():
                    for e2, v2 in c2.items():
                        e = e1 + e2
                        if cutoff is not None and e >= cutoff:
                            continue
                        p = mulf(v1, v2)
                        w = acc.get(e)
                        acc[e] = p if w is None else addf(w, p)
        res = {}
        for m, c in out.items():
            c = {e: v for e, v in c.items() if not iz(v)}
            if c:
                res[m] = c
        return Poly(self.nvars, N, res)

    def pow(self, k: int, cutoff: int | None = None) -> "Poly":
        if k < 0:
            raise ValueError("negative power")
        if k == 0:
            return Poly.const(1, self.nvars)
        if cutoff is None:
            out = None
            base = self
            while k:
                if k & 1:
                    out = base if out is None else out.mul(base)
                k >>= 1
                if k:
                    base = base.mul(base)
            return out
        return truncated_product([self] * k, cutoff)

    def __pow__(self, k: int):
        return self.pow(k)

    def is_zero(self) -> bool:
        return not self._t

    def __bool__(self):
        return bool(self._t)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            if isinstance(other, (int, mpq, Fraction, LaurentScalar, CycloScalar, LinearForm)):
                other = self._coerce(other)
            else:
                return NotImplemented
        if other.nvars != self.nvars:
            return False
        return (self - other).is_zero()

    __hash__ = None

    # structure --------------------------------------------------------
    def degree(self):
        if not self._t:
            return ANY
        return max(mono_degree(m) for m in self._t)

    def degrees(self) -> set:
        return {mono_degree(m) for m in self._t}

    def is_homogeneous(self, d: int | None = None) -> bool:
        ds = self.degrees()
        if not ds:
            return True
        return len(ds) == 1 and (d is None or d in ds)

    def homogeneous_part(self, j: int) -> "Poly":
        return Poly(self.nvars, self.N, {m: c for m, c in self._t.items() if mono_degree(m) == j})

    def min_eps(self):
        es = [e for c in self._t.values() for e in c]
        return min(es) if es else None

    def max_eps(self):
        es = [e for c in self._t.values() for e in c]
        return max(es) if es else None

    def is_eps_free(self) -> bool:
        return all(e == 0 for c in self._t.values() for e in c)

    def limit(self) -> "Poly":
        out = {}
        n = self.nvars
        for m, c in self._t.items():
            lo = min(c)
            if lo < 0:
                raise DivergentLimit(trim(unpack(m, n)), lo)
            if 0 in c:
                out[m] = {0: c[0]}
        return Poly(n, self.N, out)

    def eps_coeff(self, k: int) -> "Poly":
        """The eps-free polynomial multiplying eps^k."""
        return Poly(self.nvars, self.N, {m: {0: c[k]} for m, c in self._t.items() if k in c})

    def truncate(self, cutoff: int) -> "Poly":
        out = {}
        for m, c in self._t.items():
            c2 = {e: v for e, v in c.items() if e < cutoff}
            if c2:
                out[m] = c2
        return Poly(self.nvars, self.N, out)

    def shift_eps(self, k: int) -> "Poly":
        return Poly(self.nvars, self.N, {m: {e + k: v for e, v in c.items()} for m, c in self._t.items()})

    def subst_eps_power(self, k: int) -> "Poly":
        if k < 1:
            raise ValueError("k must be positive")
        return Poly(self.nvars, self.N, {m: {e * k: v for e, v in c.items()} for m, c in self._t.items()})

    def with_nvars(self, n: int) -> "Poly":
        if n < self.nvars:
            for m in self._t:
                if m >> (_BITS * n):
                    raise ValueError("cannot drop a variable that occurs")
        return Poly(n, self.N, dict(self._t))

    def variables(self) -> set:
        out = set()
        for m in self._t:
            i = 0
            while m:
                if m & _MASK:
                    out.add(i)
                m >>= _BITS
                i += 1
        return out

    # calculus and substitution ---------------------------------------
    def partial(self, i: int) -> "Poly":
        F = field(self.N)
        sh = _BITS * i
        out = {}
        for m, c in self._t.items():
            k = (m >> sh) & _MASK
            if k:
                q = mpq(k)
                out[m - (1 << sh)] = {e: F.smul(q, v) for e, v in c.items()}
        return Poly(self.nvars, self.N, out)

    def substitute(self, images: Sequence["Poly"], nvars: int | None = None, cutoff: int | None = None) -> "Poly":
        """Replace x_i by images[i] (each a Poly in a common variable set)."""
        images = [img if isinstance(img, Poly) else (img.to_poly() if isinstance(img, LinearForm) else None) for img in images]
        if len(images) != self.nvars:
            raise SizeMismatch(f"substitution needs {self.nvars} images, got {len(images)}")
        if any(img is None for img in images):
            raise TypeError("images must be Poly or LinearForm")
        tn = nvars if nvars is not None else (images[0].nvars if images else self.nvars)
        powers: list[dict] = [{0: Poly.const(1, tn)} for _ in images]

        def pw(i, k):
            cache = powers[i]
            if k not in cache:
                j = max(x for x in cache if x < k)
                cur = cache[j]
                for t in range(j + 1, k + 1):
                    cur = cur.mul(images[i], cutoff)
                    cache[t] = cur
            return cache[k]

        out = Poly.zero(tn).promote(self.N)
        n = self.nvars
        for m, c in self._t.items():
            term = Poly(tn, self.N, {0: dict(c)})
            for i, k in enumerate(unpack(m, n)):
                if k:
                    term = term.mul(pw(i, k), cutoff)
            out = out + term
        return out

    def substitute_linear(self, forms: Sequence["LinearForm"]) -> "Poly":
        return substitute_linear(self, forms)

    def set_var(self, i: int, value) -> "Poly":
        """Substitute the scalar value for x_i (variable count unchanged)."""
        s = LaurentScalar.of(value)
        L = _lcm(self.N, s.N)
        F = field(L)
        p = self.promote(L)
        sv = s.promote(L).terms_raw
        sh = _BITS * i
        pows = {0: {0: F.one}}
        out = Poly(self.nvars, L)
        for m, c in p._t.items():
            k = (m >> sh) & _MASK
            if k not in pows:
                j = max(pows)
                cur = pows[j]
                for t in range(j + 1, k + 1):
                    cur = _lmul(F, cur, sv)
                    pows[t] = cur
            r = _lmul(F, c, pows[k])
            if r:
                out = out + Poly(self.nvars, L, {m - (k << sh): r})
        return out

    def scale_var(self, i: int, s) -> "Poly":
        """Substitute s*x_i for x_i."""
        s = LaurentScalar.of(s)
        L = _lcm(self.N, s.N)
        F = field(L)
        p = self.promote(L)
        sv = s.promote(L).terms_raw
        sh = _BITS * i
        pows = {0: {0: F.one}}
        out = {}
        for m, c in p._t.items():
            k = (m >> sh) & _MASK
            if k not in pows:
                j = max(pows)
                cur = pows[j]
                for t in range(j + 1, k + 1):
                    cur = _lmul(F, cur, sv)
                    pows[t] = cur
            r = _lmul(F, c, pows[k])
            if r:
                out[m] = r
        return Poly(self.nvars, L, out)

    def evaluate(self, point: Sequence) -> LaurentScalar:
        p = self
        for i, v in enumerate(point):
            p = p.set_var(i, v)
        return p.coefficient((0,) * self.nvars)

    def map_scalars(self, fn) -> "Poly":
        out = Poly.zero(self.nvars)
        for exps, c in self.items():
            out = out + Poly.monomial(exps, fn(c), self.nvars)
        return out

    def to_linear_form(self) -> "LinearForm":
        if not self.is_homogeneous(1):
            raise ValueError("not a linear form")
        return LinearForm([self.coefficient(tuple(1 if j == i else 0 for j in range(self.nvars))) for i in range(self.nvars)])

    # serialisation ----------------------------------------------------
    def to_json(self) -> dict:
        n = self.nvars
        rows = []
        for m in sorted(self._t, key=lambda m: unpack(m, n)[::-1]):
            rows.append([list(trim(unpack(m, n))), LaurentScalar(self.N, self._t[m]).to_json()])
        return {"nvars": n, "terms": rows}

    @classmethod
    def from_json(cls, obj) -> "Poly":
        n = int(obj["nvars"])
        out = cls.zero(n)
        for exps, s in obj["terms"]:
            exps = list(exps) + [0] * (n - len(exps))
            out = out + cls.monomial(exps, LaurentScalar.from_json(s), n)
        return out

    def __repr__(self):
        if not self._t:
            return "0"
        n = self.nvars
        parts = []
        for m in sorted(self._t, key=lambda m: unpack(m, n)[::-1], reverse=True):
            exps = unpack(m, n)
            mon = "*".join(f"x{i}" if k == 1 else f"x{i}^{k}" for i, k in enumerate(exps) if k)
            c = repr(LaurentScalar(self.N, self._t[m]))
            if not mon:
                parts.append(c)
            elif c == "1":
                parts.append(mon)
            elif c == "-1":
                parts.append("-" + mon)
            else:
                if " + " in c:
                    c = f"({c})"
                parts.append(f"{c}*{mon}")
        return " + ".join(parts)


class LinearForm:
    """Homogeneous linear form sum_i c_i x_i with Laurent coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable):
        self.coeffs = tuple(LaurentScalar.of(c) for c in coeffs)

    @property
    def nvars(self) -> int:
        return len(self.coeffs)

    @property
    def N(self) -> int:
        return scalar_lcm_order(*self.coeffs)

    @classmethod
    def basis(cls, i: int, nvars: int, coeff=1) -> "LinearForm":
        return cls([coeff if j == i else 0 for j in range(nvars)])

    @classmethod
    def zero(cls, nvars: int) -> "LinearForm":
        return cls([0] * nvars)

    def to_poly(self) -> Poly:
        n = self.nvars
        out = Poly.zero(n)
        for i, c in enumerate(self.coeffs):
            if c:
                out = out + Poly.var(i, n, c)
        return out

    def __add__(self, other):
        if not isinstance(other, LinearForm):
            return NotImplemented
        if other.nvars != self.nvars:
            raise SizeMismatch("nvars mismatch")
        return LinearForm([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        if not isinstance(other, LinearForm):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return LinearForm([-c for c in self.coeffs])

    def scale(self, s) -> "LinearForm":
        s = LaurentScalar.of(s)
        return LinearForm([c * s for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, (LinearForm, Poly)):
            return self.to_poly() * other
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, Poly):
            return other * self.to_poly()
        return self.scale(other)

    def is_zero(self) -> bool:
        return all(not c for c in self.coeffs)

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if not isinstance(other, LinearForm):
            return NotImplemented
        return self.nvars == other.nvars and all(a == b for a, b in zip(self.coeffs, other.coeffs))

    __hash__ = None

    def min_eps(self):
        es = [c.min_exp() for c in self.coeffs if c]
        return min(es) if es else None

    def lowest(self) -> tuple[int, list[CycloScalar]]:
        """(v, c) with self = eps^v * (c + O(eps)), c a nonzero eps-free vector."""
        v = self.min_eps()
        if v is None:
            raise ValueError("zero form has no lowest term")
        return v, [c.coeff(v) for c in self.coeffs]

    def eps_coeff(self, k: int) -> "LinearForm":
        return LinearForm([c.coeff(k) for c in self.coeffs])

    def shift_eps(self, k: int) -> "LinearForm":
        return LinearForm([c.shift(k) for c in self.coeffs])

    def subst_eps_power(self, k: int) -> "LinearForm":
        return LinearForm([c.subst_eps_power(k) for c in self.coeffs])

    def truncate(self, cutoff: int) -> "LinearForm":
        return LinearForm([c.truncate(cutoff) for c in self.coeffs])

    def is_eps_free(self) -> bool:
        return all(c.is_eps_free() for c in self.coeffs)

    def limit(self) -> "LinearForm":
        return LinearForm([c.limit() for c in self.coeffs])

    def evaluate(self, point: Sequence) -> LaurentScalar:
        acc = LaurentScalar.of(0)
        for c, v in zip(self.coeffs, point):
            if c:
                acc = acc + c * LaurentScalar.of(v)
        return acc

    def with_nvars(self, n: int) -> "LinearForm":
        if n >= self.nvars:
            return LinearForm(list(self.coeffs) + [0] * (n - self.nvars))
        if any(self.coeffs[n:]):
            raise ValueError("cannot drop a variable that occurs")
        return LinearForm(self.coeffs[:n])

    def to_json(self) -> dict:
        return {"nvars": self.nvars, "coeffs": [c.to_json() for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj) -> "LinearForm":
        return cls([LaurentScalar.from_json(c) for c in obj["coeffs"]])

    def __repr__(self):
        return repr(self.to_poly())


# ---------------------------------------------------------------- functions


def limit(p: Poly) -> Poly:
    return p.limit()


def equiv_mod_eps(p: Poly, q: Poly) -> bool:
    try:
        return p.limit() == q.limit()
    except DivergentLimit:
        return False


def substitute_linear(p: Poly, forms: Sequence[LinearForm]) -> Poly:
    if len(forms) != p.nvars:
        raise SizeMismatch(f"map has {len(forms)} forms for {p.nvars} variables")
    if not forms:
        return p
    n = forms[0].nvars
    return p.substitute([f.to_poly() if isinstance(f, LinearForm) else f for f in forms], nvars=n)


def substitute_eps_power(s, k: int):
    return s.subst_eps_power(k)


def truncated_product(factors: Sequence[Poly], cutoff: int) -> Poly:
    """Product of the factors modulo eps^cutoff.

    Intermediate products are truncated using the minimal eps exponents of the
    factors still to come, so poles in later factors are accounted for.
    """
    if not factors:
        raise ValueError("empty product")
    mins = [f.min_eps() for f in factors]
    if any(m is None for m in mins):
        return Poly.zero(factors[0].nvars)
    suffix = [0] * (len(factors) + 1)
    for i in range(len(factors) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + mins[i]
    acc = factors[0].truncate(cutoff - suffix[1])
    for i in range(1, len(factors)):
        acc = acc.mul(factors[i], cutoff - suffix[i + 1])
    return acc


def series_inverse(s: LaurentScalar, prec: int) -> LaurentScalar:
    """The power-series inverse of s, keeping exponents below prec."""
    v, c0 = s.leading()
    need = prec + v
    if need <= 0:
        return LaurentScalar(s.N, {})
    u = s.shift(-v)
    r = LaurentScalar.of(c0.inv())
    k = 1
    two = LaurentScalar.of(2)
    while k < need:
        k *= 2
        r = r.mul(two - u.mul(r, k), k)
    return r.truncate(need).shift(-v)


# ---------------------------------------------------------------- linear algebra


def common_order(rows) -> int:
    out = 1
    for row in rows:
        for x in row:
            out = _lcm(out, getattr(x, "N", 1))
    return out


def _to_raw(rows, N):
    return [[CycloScalar.of(x).promote(N)._v for x in row] for row in rows]


def row_reduce(rows: Sequence[Sequence], N: int | None = None):
    """Reduced row echelon form over Q(zeta_N).

    Returns (N, reduced rows as raw elements, pivot columns)."""
    if N is None:
        N = common_order(rows)
    F = field(N)
    M = _to_raw(rows, N)
    if not M:
        return N, M, []
    ncols = len(M[0])
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(M)) if not F.is_zero(M[i][col])), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = F.inv(M[r][col])
        M[r] = [F.mul(inv, x) for x in M[r]]
        for i in range(len(M)):
            if i != r and not F.is_zero(M[i][col]):
                f = M[i][col]
                M[i] = [F.sub(x, F.mul(f, y)) for x, y in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
        if r == len(M):
            break
    return N, M[:r], pivots


def rank(rows) -> int:
    return len(row_reduce(rows)[2])


def solve(A: Sequence[Sequence], b: Sequence):
    """One solution x of A x = b over Q(zeta), or None when inconsistent."""
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    N, R, piv = row_reduce(aug)
    F = field(N)
    ncols = len(A[0]) if A else 0
    if ncols in piv:
        return None
    x = [F.zero] * ncols
    for row, p in zip(R, piv):
        x[p] = row[ncols]
    return [CycloScalar(N, v) for v in x]


def nullspace(A: Sequence[Sequence]):
    if not A:
        return []
    N, R, piv = row_reduce(A)
    F = field(N)
    ncols = len(A[0])
    free = [c for c in range(ncols) if c not in piv]
    out = []
    for f in free:
        v = [F.zero] * ncols
        v[f] = F.one
        for row, p in zip(R, piv):
            v[p] = F.neg(row[f])
        out.append([CycloScalar(N, x) for x in v])
    return out


def mat_inverse(A: Sequence[Sequence]):
    n = len(A)
    aug = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(A)]
    N, R, piv = row_reduce(aug)
    if piv[:n] != list(range(n)) or len(piv) < n:
        raise ZeroDivisionError("singular matrix")
    return [[CycloScalar(N, x) for x in row[n:]] for row in R]


def proportional(u: Sequence, v: Sequence) -> bool:
    """Exact proportionality test of two vectors via 2x2 minors."""
    u = [CycloScalar.of(x) for x in u]
    v = [CycloScalar.of(x) for x in v]
    for i in range(len(u)):
        for j in range(i + 1, len(u)):
            if not (u[i] * v[j] - u[j] * v[i]).is_zero():
                return False
    return True


def binomial(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0
