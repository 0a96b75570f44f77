"""Waring, Kumar and generalized additive decompositions, and de-bordering."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import gmpy2

from .errors import (
    CongruenceViolation,
    DegreeTooLow,
    DivergentLimit,
    DuplicateNodes,
    FactorMatchFailure,
    NonRepresentableScale,
    NotHomogeneousLimit,
    RankViolation,
    SpanningSetFailure,
    UnsupportedRank,
)
from .polyring import (
    CycloScalar,
    LaurentScalar,
    LinearForm,
    Poly,
    binomial,
    mat_inverse,
    proportional,
    rank,
    row_reduce,
    series_inverse,
    solve,
    truncated_product,
)


def _as_lf(x, nvars=None) -> LinearForm:
    if isinstance(x, LinearForm):
        return x
    if isinstance(x, Poly):
        return x.to_linear_form()
    return LinearForm(x)


def _power(p: Poly, e: int, cutoff: int | None = None) -> Poly:
    if e == 0:
        return Poly.const(1, p.nvars)
    if cutoff is None:
        return p.pow(e)
    return truncated_product([p] * e, cutoff)


def _scaled_power(scale: LaurentScalar, p: Poly, e: int, cutoff: int | None) -> Poly:
    """scale * p^e, modulo eps^cutoff when a cutoff is given."""
    if cutoff is None:
        return _power(p, e).scale(scale)
    if scale.is_zero():
        return Poly.zero(p.nvars)
    inner = _power(p, e, cutoff - scale.min_exp())
    return inner.scale(scale).truncate(cutoff)


# ------------------------------------------------------------------ shapes


@dataclass
class WaringDecomposition:
    """sum_i scales[i] * forms[i]^d."""

    d: int
    forms: list
    scales: list

    def __post_init__(self):
        self.forms = [_as_lf(f) for f in self.forms]
        self.scales = [LaurentScalar.of(s) for s in self.scales]
        if len(self.forms) != len(self.scales):
            raise ValueError("forms and scales differ in length")

    @classmethod
    def of_powers(cls, d: int, forms) -> "WaringDecomposition":
        forms = list(forms)
        return cls(d, forms, [1] * len(forms))

    @property
    def nvars(self) -> int:
        return self.forms[0].nvars if self.forms else 0

    def __len__(self):
        return len(self.forms)

    def is_border(self) -> bool:
        return not all(f.is_eps_free() and s.is_eps_free() for f, s in zip(self.forms, self.scales))

    def expand(self, cutoff: int | None = None, nvars: int | None = None) -> Poly:
        n = self.nvars if nvars is None else nvars
        out = Poly.zero(n)
        for f, s in zip(self.forms, self.scales):
            out = out + _scaled_power(s, f.to_poly(), self.d, cutoff)
        return out

    def limit(self, nvars: int | None = None) -> Poly:
        return self.expand(cutoff=1, nvars=nvars).limit()

    def to_json(self) -> dict:
        return {
            "type": "WaringDecomposition",
            "d": self.d,
            "forms": [f.to_json() for f in self.forms],
            "scales": [s.to_json() for s in self.scales],
        }

    @classmethod
    def from_json(cls, obj) -> "WaringDecomposition":
        return cls(
            int(obj["d"]),
            [LinearForm.from_json(f) for f in obj["forms"]],
            [LaurentScalar.from_json(s) for s in obj["scales"]],
        )


@dataclass
class KumarExpr:
    """alpha * (prod_i (1 + forms[i]) - 1)."""

    alpha: LaurentScalar
    forms: list
    nvars: int

    def __post_init__(self):
        self.alpha = LaurentScalar.of(self.alpha)
        self.forms = [_as_lf(f) for f in self.forms]

    @property
    def m(self) -> int:
        return len(self.forms)

    def expand(self, cutoff: int | None = None) -> Poly:
        if not self.forms or self.alpha.is_zero():
            return Poly.zero(self.nvars)
        inner = None if cutoff is None else cutoff - self.alpha.min_exp()
        E = elementary_all(self.forms, self.m, inner)
        out = Poly.zero(self.nvars)
        for j in range(1, self.m + 1):
            out = out + E[j]
        out = out.scale(self.alpha)
        return out if cutoff is None else out.truncate(cutoff)

    def limit(self) -> Poly:
        return self.expand(cutoff=1).limit()

    def to_json(self) -> dict:
        return {
            "type": "KumarExpr",
            "nvars": self.nvars,
            "alpha": self.alpha.to_json(),
            "forms": [f.to_json() for f in self.forms],
        }

    @classmethod
    def from_json(cls, obj) -> "KumarExpr":
        return cls(
            LaurentScalar.from_json(obj["alpha"]),
            [LinearForm.from_json(f) for f in obj["forms"]],
            int(obj["nvars"]),
        )


@dataclass
class ProductForm:
    """scale * prod_i forms[i]."""

    scale: LaurentScalar
    forms: list
    nvars: int

    def expand(self) -> Poly:
        out = Poly.const(self.scale, self.nvars)
        for f in self.forms:
            out = out * f.to_poly()
        return out

    def to_json(self) -> dict:
        return {
            "type": "ProductForm",
            "nvars": self.nvars,
            "scale": LaurentScalar.of(self.scale).to_json(),
            "forms": [f.to_json() for f in self.forms],
        }

    @classmethod
    def from_json(cls, obj) -> "ProductForm":
        return cls(LaurentScalar.from_json(obj["scale"]), [LinearForm.from_json(f) for f in obj["forms"]], int(obj["nvars"]))


@dataclass
class GAD:
    """sum_k ell_k^(d - r_k + 1) * g_k."""

    d: int
    summands: list  # (LinearForm, Poly, r_k)

    def expand(self) -> Poly:
        out = None
        for ell, g, r in self.summands:
            term = ell.to_poly().pow(self.d - r + 1) * g
            out = term if out is None else out + term
        return out if out is not None else Poly.zero(0)

    def to_json(self) -> dict:
        return {
            "type": "GAD",
            "d": self.d,
            "summands": [{"ell": l.to_json(), "g": g.to_json(), "r": r} for l, g, r in self.summands],
        }

    @classmethod
    def from_json(cls, obj) -> "GAD":
        return cls(int(obj["d"]), [(LinearForm.from_json(s["ell"]), Poly.from_json(s["g"]), int(s["r"])) for s in obj["summands"]])


@dataclass
class SigmaLambdaSigma:
    """sum_i scale_i * (form_i + const_i)^e_i with affine forms."""

    nvars: int
    summands: list = dc_field(default_factory=list)  # (scale, LinearForm, const, exponent)

    def __len__(self):
        return len(self.summands)

    def max_exponent(self) -> int:
        return max((s[3] for s in self.summands), default=0)

    def expand(self, cutoff: int | None = None) -> Poly:
        out = Poly.zero(self.nvars)
        for scale, form, const, e in self.summands:
            aff = form.to_poly() + Poly.const(const, self.nvars)
            out = out + _scaled_power(LaurentScalar.of(scale), aff, e, cutoff)
        return out

    def limit(self) -> Poly:
        return self.expand(cutoff=1).limit()

    def to_json(self) -> dict:
        return {
            "type": "SigmaLambdaSigma",
            "nvars": self.nvars,
            "summands": [
                {"scale": LaurentScalar.of(s).to_json(), "form": f.to_json(), "const": LaurentScalar.of(c).to_json(), "e": e}
                for s, f, c, e in self.summands
            ],
        }

    @classmethod
    def from_json(cls, obj) -> "SigmaLambdaSigma":
        rows = [
            (LaurentScalar.from_json(r["scale"]), LinearForm.from_json(r["form"]), LaurentScalar.from_json(r["const"]), int(r["e"]))
            for r in obj["summands"]
        ]
        return cls(int(obj["nvars"]), rows)


@dataclass
class ExactRB:
    """prod(first) + prod(second); a missing product is None."""

    first: list | None
    second: list | None
    nvars: int

    def expand(self) -> Poly:
        out = Poly.zero(self.nvars)
        for prod in (self.first, self.second):
            if prod is not None:
                t = Poly.const(1, self.nvars)
                for f in prod:
                    t = t * f.to_poly()
                out = out + t
        return out

    def to_json(self) -> dict:
        def enc(prod):
            return None if prod is None else [f.to_json() for f in prod]

        return {"type": "ExactRB", "nvars": self.nvars, "first": enc(self.first), "second": enc(self.second)}

    @classmethod
    def from_json(cls, obj) -> "ExactRB":
        def dec(prod):
            return None if prod is None else [LinearForm.from_json(f) for f in prod]

        return cls(dec(obj["first"]), dec(obj["second"]), int(obj["nvars"]))


# ------------------------------------------------------------------ symmetric functions of forms


def elementary_all(forms: Sequence[LinearForm], kmax: int, cutoff: int | None = None) -> list[Poly]:
    """[e_0, ..., e_kmax] of the forms, each modulo eps^cutoff if given."""
    forms = [_as_lf(f) for f in forms]
    n = forms[0].nvars if forms else 0
    polys = [f.to_poly() for f in forms]
    E = [Poly.const(1, n)] + [Poly.zero(n) for _ in range(kmax)]
    if cutoff is not None:
        mins = [min(0, f.min_eps() if f.min_eps() is not None else 0) for f in forms]
        rest_min = [0] * (len(forms) + 1)
        for i in range(len(forms) - 1, -1, -1):
            rest_min[i] = min(rest_min[i + 1], mins[i])
    for i, p in enumerate(polys):
        for j in range(min(kmax, i + 1), 0, -1):
            if cutoff is None:
                E[j] = E[j] + E[j - 1].mul(p)
            else:
                c = cutoff - (kmax - j) * rest_min[i + 1]
                E[j] = (E[j] + E[j - 1].mul(p, c)).truncate(c)
    return E


def elementary_symmetric(forms: Sequence[LinearForm], k: int, cutoff: int | None = None) -> Poly:
    forms = list(forms)
    if not 0 <= k <= len(forms):
        raise ValueError("need 0 <= k <= m")
    return elementary_all(forms, k, cutoff)[k]


def power_sum(forms: Sequence[LinearForm], k: int) -> Poly:
    if k < 1:
        raise ValueError("k must be positive")
    forms = [_as_lf(f) for f in forms]
    out = Poly.zero(forms[0].nvars if forms else 0)
    for f in forms:
        out = out + f.to_poly().pow(k)
    return out


def newton_identity_check(forms: Sequence[LinearForm], k: int) -> bool:
    """k e_k == sum_{i=1..k} (-1)^(i-1) e_(k-i) p_i, checked exactly."""
    forms = [_as_lf(f) for f in forms]
    E = elementary_all(forms, k)
    rhs = Poly.zero(forms[0].nvars)
    for i in range(1, k + 1):
        t = E[k - i] * power_sum(forms, i)
        rhs = rhs + t if i % 2 == 1 else rhs - t
    return E[k].scale(k) == rhs


# ------------------------------------------------------------------ Kumar


def _rational_dth_root(q, d):
    num, den = abs(gmpy2.mpz(q.numerator)), gmpy2.mpz(q.denominator)
    rn, ok1 = gmpy2.iroot(num, d)
    rd, ok2 = gmpy2.iroot(den, d)
    if not (ok1 and ok2):
        return None
    return gmpy2.mpq(rn, rd)


def dth_root(c, d: int) -> LaurentScalar:
    """A d-th root of c = (root of unity) * (rational d-th power) * eps^(d k)."""
    c = LaurentScalar.of(c)
    if not c.is_monomial():
        raise NonRepresentableScale(f"scale {c} is not a single eps-monomial")
    e, g = c.leading()
    if e % d:
        raise NonRepresentableScale(f"eps exponent {e} of scale is not divisible by {d}")
    N = g.N
    for k in range(N):
        q = (g * CycloScalar.zeta(N, -k)).rational()
        if q is not None:
            break
    else:
        raise NonRepresentableScale(f"scale {g} is not a rational times a root of unity")
    U, u = N, k
    if q < 0:
        U = N if N % 2 == 0 else 2 * N
        u = k * (U // N) + U // 2
        q = -q
    r = _rational_dth_root(q, d)
    if r is None:
        raise NonRepresentableScale(f"{q} has no rational {d}-th root")
    rho = CycloScalar.zeta(d * U, u) * r if u % (d * U) else CycloScalar.of(r)
    return LaurentScalar.eps(e // d, rho)


def kumar_build(dec: WaringDecomposition, border: bool = True) -> KumarExpr:
    """Kumar expression with d*r forms whose limit is the represented polynomial."""
    d = dec.d
    n = dec.nvars
    if d < 1:
        raise ValueError("degree must be positive")
    if not dec.forms:
        return KumarExpr(LaurentScalar.of(-1), [], n)
    absorbed = []
    for f, s in zip(dec.forms, dec.scales):
        if s.is_zero() or f.is_zero():
            continue
        absorbed.append(f.scale(dth_root(s, d)))
    poles = [-f.min_eps() for f in absorbed if f.min_eps() < 0]
    v = max(poles, default=0)
    if v and not border:
        raise ValueError("decomposition has poles; use border=True")
    w = 2 * v + 1
    forms = []
    for f in absorbed:
        for j in range(d):
            forms.append(f.scale(LaurentScalar.eps(w, -CycloScalar.zeta(d, j))))
    return KumarExpr(LaurentScalar.eps(-w * d, -1), forms, n)


def kumar_product_build(forms: Sequence[LinearForm]) -> KumarExpr:
    forms = [_as_lf(f) for f in forms]
    if not forms:
        raise ValueError("need at least one form")
    if any(f.is_zero() for f in forms):
        raise ValueError("zero form supplied")
    d = len(forms)
    return KumarExpr(LaurentScalar.eps(d), [f.scale(LaurentScalar.eps(-1)) for f in forms], forms[0].nvars)


def classify_kumar(e: KumarExpr) -> str:
    if e.alpha.is_zero():
        raise ValueError("alpha is zero")
    a = e.alpha.min_exp()
    return "Plus" if a > 0 else ("Equal" if a == 0 else "Minus")


def _normalize_form(f: LinearForm):
    v = f.min_eps()
    return v, f.shift_eps(-v)


def _lowest_vector(f: LinearForm) -> LinearForm:
    v, c = f.lowest()
    return LinearForm(c)


def kumar_invert(e: KumarExpr, d: int):
    """Read off a Waring decomposition (Minus/Equal) or a product (Plus)."""
    n = e.nvars
    regime = classify_kumar(e)
    if not e.forms:
        return WaringDecomposition(d, [], [])
    amin = e.alpha.min_exp()
    E = elementary_all(e.forms, e.m, 1 - amin)
    f = Poly.zero(n)
    for j in range(1, e.m + 1):
        part = E[j].scale(e.alpha).truncate(1)
        lim = part.limit()
        if j != d and not lim.is_zero():
            raise NotHomogeneousLimit(j, lim)
        if j == d:
            f = lim
    if regime == "Plus":
        gamma = e.alpha.coeff(amin)
        pole = [fm for fm in e.forms if fm.min_eps() is not None and fm.min_eps() < 0]
        total = sum(-fm.min_eps() for fm in pole)
        if amin > total:
            return ProductForm(LaurentScalar.of(0), [], n)
        lead = [_lowest_vector(fm) for fm in pole]
        cand = ProductForm(LaurentScalar.of(gamma), lead, n)
        if amin == total and len(lead) == d and cand.expand() == f:
            return cand
        raise NotHomogeneousLimit(d, f - cand.expand())
    if any(fm.min_eps() is not None and fm.min_eps() < 0 for fm in e.forms):
        raise ValueError("forms with poles are outside the Minus/Equal regime")
    gamma = e.alpha.coeff(amin)
    base = LaurentScalar.eps(amin, gamma * gmpy2.mpq((-1) ** (d - 1), d))
    forms, scales = [], []
    for fm in e.forms:
        if fm.is_zero():
            continue
        v, nf = _normalize_form(fm)
        forms.append(nf)
        scales.append(base * LaurentScalar.eps(d * v))
    dec = WaringDecomposition(d, forms, scales)
    got = dec.limit(nvars=n) if forms else Poly.zero(n)
    if got != f:
        raise NotHomogeneousLimit(d, got - f)
    return dec


# ------------------------------------------------------------------ two products


def two_product_border_extract(a, b, M: int, alpha=1, beta=1, d: int | None = None) -> SigmaLambdaSigma:
    """Decompose lim eps^-M (alpha prod(1+eps a_i) - beta prod(1+eps b_i))."""
    a = [_as_lf(x) for x in a]
    b = [_as_lf(x) for x in b]
    if len(a) != len(b):
        raise ValueError("a and b must have equal length")
    if M < 1:
        raise ValueError("M must be at least 1")
    alpha, beta = LaurentScalar.of(alpha), LaurentScalar.of(beta)
    n = (a or b)[0].nvars
    m = len(a)
    d = m if d is None else d
    for f in a + b:
        if f.min_eps() is not None and f.min_eps() < 0:
            raise ValueError("forms must be power series in eps")
    for s in (alpha, beta):
        if s.min_exp() is not None and s.min_exp() < 0:
            raise ValueError("alpha and beta must be power series in eps")
    a0 = alpha.coeff(0)
    if a0.is_zero() or not (beta.coeff(0) - a0).is_zero():
        raise ValueError("need alpha ~ beta, both nonzero at eps = 0")
    diff0 = alpha - beta
    if diff0 and diff0.min_exp() < M:
        raise CongruenceViolation(0)
    f0 = diff0.coeff(M)
    Ea = elementary_all(a, min(M, m), M + 1)
    Eb = elementary_all(b, min(M, m), M + 1)
    for j in range(1, min(M, m) + 1):
        D = (Ea[j].scale(alpha) - Eb[j].scale(beta)).truncate(M + 1)
        need = M - j if j <= d else M - j + 1
        if not D.truncate(need).is_zero():
            raise CongruenceViolation(j)
    out = SigmaLambdaSigma(n)
    zero = LaurentScalar.of(0)
    for j in range(1, min(d, m) + 1):
        c = LaurentScalar.eps(j - M, a0 * gmpy2.mpq((-1) ** (j - 1), j))
        for f in a:
            if not f.is_zero():
                out.summands.append((c, f, zero, j))
        for f in b:
            if not f.is_zero():
                out.summands.append((-c, f, zero, j))
    if not f0.is_zero():
        out.summands.append((LaurentScalar.of(f0), LinearForm.zero(n), LaurentScalar.of(1), 0))
    return out


# ------------------------------------------------------------------ binary monomials


def monomial_power_decomposition(a: int, b: int) -> WaringDecomposition:
    """Exact decomposition of y0^a y1^b (two variables)."""
    if a < 0 or b < 0:
        raise ValueError("exponents must be nonnegative")
    n = a + b
    big, small = (0, 1) if a >= b else (1, 0)
    A, B = max(a, b), min(a, b)
    if B == 0:
        return WaringDecomposition(n, [LinearForm.basis(big, 2)], [1])
    N = A + 1
    forms, scales = [], []
    norm = gmpy2.mpq(1, (A + 1) * binomial(n, A))
    for k in range(N):
        z = CycloScalar.zeta(N, k)
        coeffs = [0, 0]
        coeffs[big] = z
        coeffs[small] = 1
        forms.append(LinearForm(coeffs))
        scales.append(z * norm)
    return WaringDecomposition(n, forms, scales)


def monomial_border_decomposition(a: int, b: int) -> WaringDecomposition:
    """Border decomposition of x0^a x1^b with a + 1 summands (a <= b)."""
    if a > b:
        raise ValueError("need a <= b")
    n = a + b
    if a == 0:
        return WaringDecomposition(n, [LinearForm.basis(1, 2)], [1])
    norm = gmpy2.mpq(1, math.factorial(a) * binomial(n, a))
    forms, scales = [], []
    for k in range(a + 1):
        forms.append(LinearForm([LaurentScalar.eps(1, k), 1]))
        scales.append(LaurentScalar.eps(-a, norm * (-1) ** (a - k) * binomial(a, k)))
    return WaringDecomposition(n, forms, scales)


# ------------------------------------------------------------------ GAD and de-bordering


def essential_variables(f: Poly) -> int:
    if not f.is_eps_free():
        raise ValueError("polynomial must be eps-free")
    rows = []
    keys = None
    parts = [f.partial(i) for i in range(f.nvars)]
    keys = sorted({e for p in parts for e, _ in p.items()})
    for p in parts:
        rows.append([CycloScalar.of(p.coefficient(k)) for k in keys])
    if not keys:
        return 0
    return rank(rows)


def _pivot_maps(c: Sequence[CycloScalar], n: int):
    """Substitutions turning the form c.x into a coordinate and back."""
    p = next(i for i, x in enumerate(c) if not CycloScalar.of(x).is_zero())
    cp = CycloScalar.of(c[p])
    inv = cp.inv()
    forward = []
    for i in range(n):
        if i != p:
            forward.append(Poly.var(i, n))
        else:
            img = Poly.var(p, n, inv)
            for j in range(n):
                if j != p and not CycloScalar.of(c[j]).is_zero():
                    img = img - Poly.var(j, n, CycloScalar.of(c[j]) * inv)
            forward.append(img)
    back = [Poly.var(i, n) for i in range(n)]
    back[p] = LinearForm(c).to_poly()
    return p, forward, back


def divide_by_power(h: Poly, ell: LinearForm):
    """(t, g) with h = ell^t * g and t maximal."""
    n = h.nvars
    p, fw, bk = _pivot_maps(ell.coeffs, n)
    hp = h.substitute(fw, nvars=n)
    t = min(e[p] for e, _ in hp.items())
    g = Poly.zero(n)
    for e, c in hp.items():
        e = list(e)
        e[p] -= t
        g = g + Poly.monomial(e, c, n)
    return t, g.substitute(bk, nvars=n)


def _summand_count(dec: WaringDecomposition) -> int:
    return sum(1 for f, s in zip(dec.forms, dec.scales) if not f.is_zero() and not s.is_zero())


def gad_from_border(dec: WaringDecomposition) -> GAD:
    d = dec.d
    items = [(s, f) for f, s in zip(dec.forms, dec.scales) if not f.is_zero() and not s.is_zero()]
    r = len(items)
    if d < r - 1:
        raise DegreeTooLow(f"degree {d} < r - 1 = {r - 1}")
    n = dec.nvars
    dec.limit()  # raises DivergentLimit when there is no limit
    classes: list[list] = []
    for s, f in items:
        lv = _lowest_vector(f)
        for cl in classes:
            if proportional(cl[0][0].coeffs, lv.coeffs):
                cl.append((lv, s, f))
                break
        else:
            classes.append([(lv, s, f)])
    summands = []
    for cl in classes:
        sub = WaringDecomposition(d, [f for _, _, f in cl], [s for _, s, _ in cl])
        part = sub.expand(cutoff=1)
        if part.min_eps() is not None and part.min_eps() < 0:
            raise DivergentLimit(msg="local decompositions cancel across classes")
        h = part.limit()
        if h.is_zero():
            continue
        ell = LinearForm([c.coeff(0) for c in cl[0][0].coeffs])
        t, g = divide_by_power(h, ell)
        summands.append((ell, g, d - t + 1))
    return GAD(d, summands)


def _forms_in_span(g: Poly, D: int) -> list[LinearForm]:
    """A basis of the span of the order-(D-1) partials of g."""
    n = g.nvars
    parts = [g]
    for _ in range(D - 1):
        parts = [q.partial(i) for q in parts for i in range(n)]
        parts = [q for q in parts if not q.is_zero()]
    rows = [[CycloScalar.of(q.coefficient(tuple(1 if j == i else 0 for j in range(n)))) for i in range(n)] for q in parts]
    if not rows:
        return []
    N, R, piv = row_reduce(rows)
    return [LinearForm([CycloScalar(N, x) for x in row]) for row in R]


def _poly_vector(p: Poly, keys) -> list:
    return [CycloScalar.of(p.coefficient(k)) for k in keys]


def deborder_waring(dec: WaringDecomposition) -> WaringDecomposition:
    """Exact decomposition of the limit with at most d * C(2r-2, r-1) summands."""
    d = dec.d
    r = _summand_count(dec)
    gad = gad_from_border(dec)
    n = dec.nvars
    forms, scales = [], []
    for L, g, rk in gad.summands:
        if rk == 1:
            forms.append(L)
            scales.append(g.coefficient((0,) * n))
            continue
        D = rk - 1
        W = _forms_in_span(g, D)
        t = len(W)
        target = binomial(t + D - 1, D)
        chosen, powers = [], []
        keys = sorted({e for e, _ in g.items()})
        basis_rows = []
        bound = max(r, 1)
        for a in itertools.product(range(-bound, bound + 1), repeat=t):
            if not any(a):
                continue
            M = LinearForm.zero(n)
            for ai, w in zip(a, W):
                if ai:
                    M = M + w.scale(ai)
            P = M.to_poly().pow(D)
            new_keys = sorted(set(keys) | {e for e, _ in P.items()})
            if new_keys != keys:
                keys = new_keys
            cand = powers + [P]
            rows = [_poly_vector(q, keys) for q in cand]
            if rank(rows) == len(cand):
                chosen.append(M)
                powers.append(P)
                if len(powers) == target:
                    break
        if len(powers) < target:
            raise SpanningSetFailure(f"only {len(powers)} of {target} independent powers found")
        keys = sorted(set(keys) | {e for q in powers for e, _ in q.items()})
        A = [[_poly_vector(q, keys)[i] for q in powers] for i in range(len(keys))]
        lam = solve(A, _poly_vector(g, keys))
        if lam is None:
            raise SpanningSetFailure("g is not in the span of the chosen powers")
        for coef, M in zip(lam, chosen):
            if coef.is_zero():
                continue
            if proportional(M.coeffs, L.coeffs):
                i = next(j for j, x in enumerate(L.coeffs) if x)
                ratio = CycloScalar.of(M.coeffs[i]) / CycloScalar.of(L.coeffs[i])
                forms.append(L)
                scales.append(coef * ratio ** D)
                continue
            mono = monomial_power_decomposition(d - D, D)
            for mf, ms in zip(mono.forms, mono.scales):
                c0, c1 = CycloScalar.of(mf.coeffs[0]), CycloScalar.of(mf.coeffs[1])
                forms.append(L.scale(c0) + M.scale(c1))
                scales.append(ms * coef)
    out = WaringDecomposition(d, forms, scales)
    bound = d * binomial(2 * r - 2, r - 1) if r else 0
    if len(out) > max(bound, 1) and r:
        raise SpanningSetFailure(f"{len(out)} summands exceed the bound {bound}")
    return out


# ------------------------------------------------------------------ interpolation


def _min_pole(*xs) -> int:
    v = 0
    for x in xs:
        m = x.min_eps() if isinstance(x, LinearForm) else LaurentScalar.of(x).min_exp()
        if m is not None and m < v:
            v = m
    return -v


def interpolate_decompositions(slices, var: int, d: int) -> SigmaLambdaSigma:
    """Combine decompositions of f(gamma_i, rest) into one of f."""
    slices = list(slices)
    if len(slices) < d + 1:
        raise ValueError(f"need {d + 1} slices")
    slices = slices[: d + 1]
    gam = [CycloScalar.of(g) for g, _ in slices]
    for i in range(len(gam)):
        for j in range(i):
            if (gam[i] - gam[j]).is_zero():
                raise DuplicateNodes(f"nodes {i} and {j} coincide")
    n = slices[0][1].nvars
    V = [[g ** j for j in range(d + 1)] for g in gam]
    Vinv = mat_inverse(V)
    xv = LinearForm.basis(var, n)
    out = SigmaLambdaSigma(n)
    for i, (_, sls) in enumerate(slices):
        for j in range(d + 1):
            w = Vinv[j][i]
            if w.is_zero():
                continue
            for scale, form, const, e in sls.summands:
                lam = LaurentScalar.of(scale) * w
                const = LaurentScalar.of(const)
                if lam.is_zero():
                    continue
                if j == 0:
                    out.summands.append((lam, form, const, e))
                    continue
                if e == 0 or (form.is_zero() and const.is_zero()):
                    if e == 0:
                        out.summands.append((lam, xv, LaurentScalar.of(0), j))
                    continue
                a, b = min(j, e), max(j, e)
                K = 1 + _min_pole(lam) + (a + b) * _min_pole(form, const)
                delta = LaurentScalar.eps(K)
                norm = gmpy2.mpq(1, math.factorial(a) * binomial(a + b, a))
                for k in range(a + 1):
                    sc = lam * LaurentScalar.eps(-K * a, norm * (-1) ** (a - k) * binomial(a, k))
                    if j <= e:
                        out.summands.append((sc, form + xv.scale(delta * k), const, a + b))
                    else:
                        out.summands.append((sc, xv + form.scale(delta * k), const * delta * k, a + b))
    return out


def homogenize_sls(sls: SigmaLambdaSigma, d: int) -> WaringDecomposition:
    """Degree-d part of a sum of affine powers as a Waring decomposition."""
    forms, scales = [], []
    for scale, form, const, e in sls.summands:
        if e < d or form.is_zero():
            continue
        forms.append(form)
        scales.append(LaurentScalar.of(scale) * binomial(e, d) * LaurentScalar.of(const) ** (e - d))
    return WaringDecomposition(d, forms, scales)


# ------------------------------------------------------------------ restricted binomials


def _generic_rank(forms: Sequence[LinearForm]) -> int:
    lo = min((f.min_eps() for f in forms if not f.is_zero()), default=0)
    hi = max((max((c.max_exp() or 0) for c in f.coeffs) for f in forms if not f.is_zero()), default=0)
    span = hi - lo
    k = min(len(forms), forms[0].nvars) if forms else 0
    best = 0
    for t in range(k * span + 2):
        pt = gmpy2.mpq(t + 2)
        rows = []
        for f in forms:
            rows.append([_laurent_eval(c.shift(-lo), pt) if c else CycloScalar.of(0) for c in f.coeffs])
        best = max(best, rank(rows))
    return best


def _laurent_eval(s: LaurentScalar, pt) -> CycloScalar:
    acc = CycloScalar.of(0)
    for e, c in s.terms.items():
        acc = acc + c * (CycloScalar.of(pt) ** e)
    return acc



def _product_limit(forms: Sequence[LinearForm], cutoff=1) -> Poly:
    return truncated_product([f.to_poly() for f in forms], cutoff)


def rb_deborder(lf, lfr, k: int):
    """De-border lim (prod lf + prod lfr) with rank(lfr) <= k."""
    lf = [_as_lf(f) for f in lf]
    lfr = [_as_lf(f) for f in lfr]
    if len(lf) != len(lfr) or not lf:
        raise ValueError("both products need the same positive number of factors")
    d = len(lf)
    n = lf[0].nvars
    if _generic_rank(lfr) > k:
        raise RankViolation(f"rank of the restricted product exceeds {k}")
    if any(f.is_zero() for f in lf) or any(f.is_zero() for f in lfr):
        first = None if any(f.is_zero() for f in lf) else lf
        second = None if any(f.is_zero() for f in lfr) else lfr
        keep = []
        for prod in (first, second):
            if prod is None:
                keep.append(None)
                continue
            p = sum(f.min_eps() for f in prod)
            if p < 0:
                raise DivergentLimit(msg="single product diverges")
            keep.append([_normalize_form(f)[1].eps_coeff(0) for f in prod] if p == 0 else None)
        return ExactRB(keep[0], keep[1], n)
    norm1 = [_normalize_form(f) for f in lf]
    norm2 = [_normalize_form(f) for f in lfr]
    p = sum(v for v, _ in norm1)
    q = sum(v for v, _ in norm2)
    t1 = [f for _, f in norm1]
    t2 = [f for _, f in norm2]
    if p >= 0 and q >= 0:
        first = [f.eps_coeff(0) for f in t1] if p == 0 else None
        second = [f.eps_coeff(0) for f in t2] if q == 0 else None
        return ExactRB(first, second, n)
    if p != q:
        raise DivergentLimit(msg="products have different pole orders")
    M = -p
    t2 = [t2[0].scale(-1)] + t2[1:]
    low1 = [f.eps_coeff(0) for f in t1]
    low2 = [f.eps_coeff(0) for f in t2]
    used = [False] * d
    matched = []
    for i in range(d):
        for j in range(d):
            if not used[j] and proportional(low1[i].coeffs, low2[j].coeffs):
                piv = next(t for t, x in enumerate(low1[i].coeffs) if x)
                c = CycloScalar.of(low2[j].coeffs[piv]) / CycloScalar.of(low1[i].coeffs[piv])
                used[j] = True
                matched.append((j, c))
                break
        else:
            raise FactorMatchFailure(f"no partner for factor {i}")
    cprod = CycloScalar.of(1)
    for _, c in matched:
        cprod = cprod * c
    if not (cprod - 1).is_zero():
        raise FactorMatchFailure("lowest-order products differ by a scalar")
    t2 = [t2[j].scale(LaurentScalar.of(c.inv())) for j, c in matched]
    # change of variables: first rows are independent lowest forms
    rows, idx = [], []
    for i, f in enumerate(low1):
        cand = rows + [[CycloScalar.of(x) for x in f.coeffs]]
        if rank(cand) == len(cand):
            rows = cand
            idx.append(i)
    r = len(rows)
    for u in range(n):
        if len(rows) == n:
            break
        cand = rows + [[CycloScalar.of(1 if j == u else 0) for j in range(n)]]
        if rank(cand) == len(cand):
            rows = cand
    B = rows
    A = mat_inverse(B)

    def pull(f: LinearForm) -> LinearForm:
        return LinearForm([sum((f.coeffs[i] * LaurentScalar.of(A[i][j]) for i in range(n)), LaurentScalar.of(0)) for j in range(n)])

    L1 = [pull(f) for f in t1]
    L2 = [pull(f) for f in t2]
    low = [f.eps_coeff(0) for f in L1]
    qv = 2
    while True:
        grid = [[gmpy2.mpq((j + 1) * qv ** t) for j in range(d + 1)] for t in range(r)]
        ok = all(
            not _eval_first(f, pt).is_zero()
            for pt in itertools.product(*grid)
            for f in low
        )
        if ok:
            break
        qv += 1

    def slice_at(pt) -> SigmaLambdaSigma:
        a_forms, b_forms = [], []
        alpha, beta = LaurentScalar.of(1), LaurentScalar.of(1)
        for src, dst_forms, which in ((L1, a_forms, 0), (L2, b_forms, 1)):
            prod = LaurentScalar.of(1)
            for f in src:
                ai = sum((f.coeffs[t] * pt[t] for t in range(r)), LaurentScalar.of(0))
                rest = LinearForm([0] * r + list(f.coeffs[r:])).shift_eps(-1)
                inv = series_inverse(ai, M)
                dst_forms.append(LinearForm([c.mul(inv, M) for c in rest.coeffs]))
                prod = prod * ai
            if which == 0:
                alpha = prod
            else:
                beta = prod
        return two_product_border_extract(a_forms, b_forms, M, alpha, beta, d)

    def rec(t, fixed):
        if t == r:
            return slice_at(fixed)
        slices = [(g, rec(t + 1, fixed + [g])) for g in grid[t]]
        return interpolate_decompositions(slices, t, d)

    sls = rec(0, [])
    out = SigmaLambdaSigma(n)
    for scale, form, const, e in sls.summands:
        nf = LinearForm([sum((form.coeffs[i] * LaurentScalar.of(B[i][j]) for i in range(n)), LaurentScalar.of(0)) for j in range(n)])
        out.summands.append((scale, nf, const, e))
    target = (_product_limit(lf) + _product_limit(lfr)).truncate(1).limit()
    if homogenize_sls(out, d).limit() != target:
        raise CongruenceViolation(0, "reassembled decomposition does not reach the limit")
    return out


def _eval_first(f: LinearForm, pt) -> CycloScalar:
    acc = CycloScalar.of(0)
    for t, g in enumerate(pt):
        acc = acc + CycloScalar.of(f.coeffs[t].coeff(0)) * g
    return acc


# ------------------------------------------------------------------ low rank normal forms


NF_TWO_POWERS = "l1^d+l2^d"
NF_POWER_TIMES = "l1^(d-1)*l2"
NF_THREE_POWERS = "l1^d+l2^d+l3^d"
NF_POWER_PLUS = "l1^d+l2^(d-1)*l3"
NF_TANGENT = "l1^(d-1)*l2+l1^(d-2)*l3^2"


def _quadratic_rank(q: Poly) -> int:
    n = q.nvars
    rows = [[CycloScalar.of(q.partial(i).partial(j).coefficient((0,) * n)) for j in range(n)] for i in range(n)]
    return rank(rows)


def classify_bwr_normal_form(g: GAD) -> str:
    rs = sorted(r for _, _, r in g.summands)
    if rs == [1, 1]:
        return NF_TWO_POWERS
    if rs == [2]:
        return NF_POWER_TIMES
    if rs == [1, 1, 1]:
        return NF_THREE_POWERS
    if rs == [1, 2]:
        return NF_POWER_PLUS
    if rs == [3]:
        ell, q, _ = g.summands[0]
        n = q.nvars
        p, fw, _ = _pivot_maps(ell.coeffs, n)
        restricted = q.substitute(fw, nvars=n).set_var(p, 0)
        if _quadratic_rank(restricted) <= 1:
            return NF_TANGENT
        raise UnsupportedRank("quadratic part is not of the form l1*l2 + l3^2")
    raise UnsupportedRank(f"partition {rs} is not covered")


# ------------------------------------------------------------------ random instances


def _rand_form(rng: random.Random, n: int) -> LinearForm:
    c = [rng.randint(-2, 2) for _ in range(n)]
    if not any(c):
        c[rng.randrange(n)] = 1
    return LinearForm(c)


def random_exact_decomposition(rng: random.Random, n: int, d: int, r: int) -> WaringDecomposition:
    """Eps-free decomposition whose scales are d-th powers up to roots of unity."""
    roots = [1, -1, CycloScalar.zeta(3), CycloScalar.zeta(4), 2 ** d]
    return WaringDecomposition(d, [_rand_form(rng, n) for _ in range(r)], [rng.choice(roots) for _ in range(r)])


def random_border_decomposition(rng: random.Random, n: int, d: int, r: int) -> WaringDecomposition:
    """A border decomposition with r summands and a finite limit.

    Blocks are drawn from: a perturbed power (1 summand), a tangent
    eps^-1 ((l + eps m)^d - l^d) / d (2 summands), and a second-order
    difference eps^-2 ((l + eps m)^d + (l - eps m)^d - 2 l^d) (3 summands).
    """
    eps = LaurentScalar.eps(1)
    forms, scales = [], []
    left = r
    while left:
        kind = rng.choice([k for k in (1, 2, 3) if k <= left and (k < 3 or d >= 2)])
        l, m = _rand_form(rng, n), _rand_form(rng, n)
        c = LaurentScalar.of(rng.choice([1, -1, 2]))
        if kind == 1:
            forms.append(l + m.scale(eps))
            scales.append(c)
        elif kind == 2:
            s = c * LaurentScalar.eps(-1, gmpy2.mpq(1, d))
            forms += [l + m.scale(eps), l]
            scales += [s, -s]
        else:
            s = c * LaurentScalar.eps(-2)
            forms += [l + m.scale(eps), l - m.scale(eps), l]
            scales += [s, s, s * -2]
        left -= kind
    return WaringDecomposition(d, forms, scales)
