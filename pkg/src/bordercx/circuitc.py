"""Arithmetic circuit IR and the compiler passes over it.

Gates are immutable nodes that point at their children, so a circuit is a
DAG given by its output gates and a formula is the special case where no
gate is reached twice.  Integer gate ids only exist in the JSON form, where
they are assigned by a post-order walk.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2

from .errors import (
    CongruenceViolation,
    DegreeMismatch,
    MalformedCircuit,
    NonHomogeneous,
    NonRepresentableScale,
    SizeMismatch,
)
from .polyring import LaurentScalar, LinearForm, Poly, equiv_mod_eps

INPUT, ADD, MUL2, MUL3, NEG = "input", "add", "mul2", "mul3", "negcube"
_ARITY = {ADD: 2, MUL2: 2, MUL3: 3, NEG: 1}
ONE = LaurentScalar.of(1)
ZERO = LaurentScalar.of(0)


def _s(x) -> LaurentScalar:
    return x if isinstance(x, LaurentScalar) else LaurentScalar.of(x)


class Gate:
    """One node of a circuit.  Equality is identity."""

    __slots__ = ("kind", "children", "scales", "form", "const")

    def __init__(self, kind, children=(), scales=None, form=None, const=0):
        if kind == INPUT:
            if form is None:
                raise MalformedCircuit("input gate needs a linear form")
            children = ()
        elif kind in _ARITY:
            if len(children) != _ARITY[kind]:
                raise MalformedCircuit(f"{kind} takes {_ARITY[kind]} children")
            if any(not isinstance(c, Gate) for c in children):
                raise MalformedCircuit("children must be gates")
        else:
            raise MalformedCircuit(f"unknown gate kind {kind!r}")
        self.kind = kind
        self.children = tuple(children)
        if scales is None:
            scales = (ONE,) * len(self.children)
        self.scales = tuple(_s(x) for x in scales)
        if len(self.scales) != len(self.children):
            raise MalformedCircuit("one scale per child")
        self.form = form
        self.const = _s(const)

    @property
    def is_product(self) -> bool:
        return self.kind in (MUL2, MUL3)

    def __repr__(self):
        if self.kind == INPUT:
            c = "" if self.const.is_zero() else f" + {self.const!r}"
            return f"In({self.form!r}{c})"
        return f"{self.kind}{self.children!r}"


# ---------------------------------------------------------------- constructors


def inp(form: LinearForm, const=0) -> Gate:
    return Gate(INPUT, form=form, const=const)


def var(i: int, nvars: int, coeff=1) -> Gate:
    return inp(LinearForm.basis(i, nvars, coeff))


def add(a: Gate, b: Gate, sa=1, sb=1) -> Gate:
    return Gate(ADD, (a, b), (sa, sb))


def mul2(a: Gate, b: Gate, sa=1, sb=1) -> Gate:
    return Gate(MUL2, (a, b), (sa, sb))


def mul3(a: Gate, b: Gate, c: Gate, sa=1, sb=1, sc=1) -> Gate:
    return Gate(MUL3, (a, b, c), (sa, sb, sc))


def negcube(a: Gate, s=1) -> Gate:
    return Gate(NEG, (a,), (s,))


def _opt_add(a: Optional[Gate], b: Optional[Gate]) -> Optional[Gate]:
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


def _opt_mul(*xs) -> Optional[Gate]:
    if any(x is None for x in xs):
        return None
    return mul2(*xs) if len(xs) == 2 else mul3(*xs)


def balanced_sum(items: list) -> Optional[Gate]:
    items = [x for x in items if x is not None]
    if not items:
        return None
    while len(items) > 1:
        items = [add(items[i], items[i + 1]) if i + 1 < len(items) else items[i] for i in range(0, len(items), 2)]
    return items[0]


# ---------------------------------------------------------------- traversal


def postorder(outputs: Sequence[Optional[Gate]]) -> list:
    seen: set = set()
    order: list = []
    for root in outputs:
        if root is None or id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            g, done = stack.pop()
            if done:
                order.append(g)
                continue
            if id(g) in seen:
                continue
            seen.add(id(g))
            stack.append((g, True))
            for c in reversed(g.children):
                if id(c) not in seen:
                    stack.append((c, False))
    return order


@dataclass
class Circuit:
    nvars: int
    outputs: tuple

    def __post_init__(self):
        self.outputs = tuple(self.outputs)

    @classmethod
    def single(cls, root: Optional[Gate], nvars: int) -> "Circuit":
        return cls(nvars, (root,))

    @property
    def root(self) -> Optional[Gate]:
        if len(self.outputs) != 1:
            raise MalformedCircuit("circuit has several outputs")
        return self.outputs[0]

    def gates(self) -> list:
        return postorder(self.outputs)

    def size(self) -> int:
        return len(self.gates())

    def depth(self) -> int:
        return max((depth(o) for o in self.outputs if o is not None), default=0)

    def mult_depth(self) -> int:
        return max((mult_depth(o) for o in self.outputs if o is not None), default=0)

    def is_formula(self) -> bool:
        indeg: dict = {}
        for g in self.gates():
            for c in g.children:
                indeg[id(c)] = indeg.get(id(c), 0) + 1
        roots = [id(o) for o in self.outputs if o is not None]
        if len(set(roots)) != len(roots) or any(indeg.get(r, 0) for r in roots):
            return False
        return all(v <= 1 for v in indeg.values())

    def has_unit_scales(self) -> bool:
        return all(s == 1 for g in self.gates() for s in g.scales)

    def is_ihl(self) -> bool:
        return all(g.const.is_zero() and not g.form.is_zero() for g in self.gates() if g.kind == INPUT)

    def is_arity3(self) -> bool:
        return all(g.kind in (INPUT, ADD, MUL3) for g in self.gates())

    def eval(self) -> list:
        memo: dict = {}
        return [evaluate(o, self.nvars, memo) for o in self.outputs]

    def to_json(self) -> dict:
        order = self.gates()
        idx = {id(g): i for i, g in enumerate(order)}
        rows = []
        for g in order:
            row = {"kind": g.kind, "children": [idx[id(c)] for c in g.children], "scales": [s.to_json() for s in g.scales]}
            if g.kind == INPUT:
                row["form"] = g.form.to_json()
                row["constant"] = g.const.to_json()
            rows.append(row)
        return {"nvars": self.nvars, "gates": rows, "outputs": [None if o is None else idx[id(o)] for o in self.outputs]}

    @classmethod
    def from_json(cls, obj) -> "Circuit":
        gates: list = []
        for i, row in enumerate(obj["gates"]):
            kind = row["kind"]
            ch = row.get("children", [])
            if any(not 0 <= c < i for c in ch):
                raise MalformedCircuit(f"gate {i} refers to a later gate")
            scales = [LaurentScalar.from_json(s) for s in row.get("scales", [1] * len(ch))]
            if kind == INPUT:
                gates.append(inp(LinearForm.from_json(row["form"]), LaurentScalar.from_json(row.get("constant", 0))))
            else:
                gates.append(Gate(kind, [gates[c] for c in ch], scales))
        outs = []
        for o in obj["outputs"]:
            if o is not None and not 0 <= o < len(gates):
                raise MalformedCircuit(f"output {o} out of range")
            outs.append(None if o is None else gates[o])
        return cls(int(obj["nvars"]), tuple(outs))


def depth(g: Gate, memo=None) -> int:
    memo = {} if memo is None else memo
    for h in postorder([g]):
        memo[id(h)] = 0 if not h.children else 1 + max(memo[id(c)] for c in h.children)
    return memo[id(g)]


def mult_depth(g: Gate) -> int:
    memo: dict = {}
    for h in postorder([g]):
        base = max((memo[id(c)] for c in h.children), default=0)
        memo[id(h)] = base + (1 if h.kind in (MUL2, MUL3, NEG) else 0)
    return memo[id(g)]


def formal_degree(g: Gate, memo=None) -> int:
    memo = {} if memo is None else memo
    for h in postorder([g]):
        if id(h) in memo:
            continue
        if h.kind == INPUT:
            memo[id(h)] = 0 if h.form.is_zero() else 1
        elif h.kind == ADD:
            memo[id(h)] = max(memo[id(c)] for c in h.children)
        elif h.kind == NEG:
            memo[id(h)] = 3 * memo[id(h.children[0])]
        else:
            memo[id(h)] = sum(memo[id(c)] for c in h.children)
    return memo[id(g)]


def tree_size(g: Optional[Gate], memo=None) -> int:
    """Size of g with shared subcircuits counted once per use."""
    if g is None:
        return 0
    memo = {} if memo is None else memo
    for h in postorder([g]):
        memo[id(h)] = 1 + sum(memo[id(c)] for c in h.children)
    return memo[id(g)]


def evaluate(g: Optional[Gate], nvars: int, memo=None) -> Poly:
    if g is None:
        return Poly.zero(nvars)
    memo = {} if memo is None else memo
    for h in postorder([g]):
        if id(h) in memo:
            continue
        if h.kind == INPUT:
            v = h.form.to_poly().with_nvars(nvars) if h.form.nvars != nvars else h.form.to_poly()
            if not h.const.is_zero():
                v = v + Poly.const(h.const, nvars)
        else:
            vals = [memo[id(c)].scale(s) if s != 1 else memo[id(c)] for c, s in zip(h.children, h.scales)]
            if h.kind == ADD:
                v = vals[0] + vals[1]
            elif h.kind == NEG:
                v = -(vals[0] ** 3)
            else:
                v = vals[0]
                for w in vals[1:]:
                    v = v * w
        memo[id(h)] = v
    return memo[id(g)]


def unfold(g: Optional[Gate]) -> Optional[Gate]:
    """Copy a DAG into a tree, duplicating every shared gate."""
    if g is None:
        return None

    def rec(h):
        if h.kind == INPUT:
            return inp(h.form, h.const)
        return Gate(h.kind, [rec(c) for c in h.children], h.scales)

    return rec(g)


# ---------------------------------------------------------------- scaling


def cube_root(lam: LaurentScalar) -> LaurentScalar:
    """A cube root of lam inside Q[eps, 1/eps], if there is an obvious one."""
    lam = _s(lam)
    if not lam.is_monomial():
        raise NonRepresentableScale(f"{lam!r} is not a monomial in eps")
    e, c = lam.leading()
    q = c.rational()
    if e % 3 or q is None:
        raise NonRepresentableScale(f"no cube root of {lam!r} in Q[eps, 1/eps]")
    sign = -1 if q < 0 else 1
    q = abs(gmpy2.mpq(q))
    num, ok1 = gmpy2.iroot(gmpy2.numer(q), 3)
    den, ok2 = gmpy2.iroot(gmpy2.denom(q), 3)
    if not (ok1 and ok2):
        raise NonRepresentableScale(f"{q} is not a rational cube")
    return LaurentScalar.eps(e // 3, gmpy2.mpq(sign * num, den))


def scale_formula(g: Optional[Gate], lam) -> Optional[Gate]:
    """lam * g with the scalar pushed down to the leaves (unit edge scales)."""
    lam = _s(lam)
    if g is None or lam.is_zero():
        return None
    if lam == 1:
        return g
    if g.kind == INPUT:
        return inp(g.form.scale(lam), g.const * lam)
    if g.kind == ADD:
        return Gate(ADD, [scale_formula(c, lam) for c in g.children], g.scales)
    if g.kind == NEG:
        return Gate(NEG, [scale_formula(g.children[0], cube_root(lam))], g.scales)
    return Gate(g.kind, [scale_formula(g.children[0], lam)] + list(g.children[1:]), g.scales)


def push_scales(g: Optional[Gate]) -> Optional[Gate]:
    """Equivalent tree with every edge scale moved into the leaves."""
    if g is None:
        return None
    if g.kind == INPUT:
        return inp(g.form, g.const)
    kids = [scale_formula(push_scales(c), s) for c, s in zip(g.children, g.scales)]
    return Gate(g.kind, kids)


def _fold_output(g: Optional[Gate], lam: LaurentScalar) -> Optional[Gate]:
    """A gate computing lam * g, reusing g's children (circuit mode)."""
    if g is None or lam.is_zero():
        return None
    if lam == 1:
        return g
    if g.kind == INPUT:
        return inp(g.form.scale(lam), g.const * lam)
    if g.kind == ADD:
        return Gate(ADD, g.children, [s * lam for s in g.scales])
    if g.kind == NEG:
        try:
            return Gate(NEG, g.children, [g.scales[0] * cube_root(lam)])
        except NonRepresentableScale:
            half = lam * LaurentScalar.of(Fraction(1, 2))
            return Gate(ADD, (g, g), (half, half))
    return Gate(g.kind, g.children, [g.scales[0] * lam] + list(g.scales[1:]))


# ---------------------------------------------------------------- IHL homogenization


class _Refs:
    """Scaled references (gate, lam).  Circuit mode keeps lam on edges, formula
    mode pushes it into the leaves straight away."""

    def __init__(self, formula: bool):
        self.formula = formula

    def ref(self, g, lam=ONE):
        if g is None or _s(lam).is_zero():
            return None
        if self.formula:
            return (scale_formula(g, lam), ONE)
        return (g, _s(lam))

    def scale(self, r, c):
        if r is None:
            return None
        return self.ref(r[0], r[1] * _s(c))

    def add(self, a, b):
        if a is None:
            return b
        if b is None:
            return a
        return (Gate(ADD, (a[0], b[0]), (a[1], b[1])), ONE)

    def mul(self, *rs):
        if any(r is None for r in rs):
            return None
        kind = MUL2 if len(rs) == 2 else MUL3
        return (Gate(kind, [r[0] for r in rs], [r[1] for r in rs]), ONE)

    def neg(self, r):
        if r is None:
            return None
        return (Gate(NEG, (r[0],), (r[1],)), ONE)

    def sum(self, rs):
        out = None
        for r in rs:
            out = self.add(out, r)
        return out


def _hat(root: Gate, R: _Refs):
    """Returns (root(0), ref to an IHL gate computing root - root(0))."""
    memo: dict = {}
    for g in postorder([root]):
        if g.kind == INPUT:
            memo[id(g)] = (g.const, R.ref(inp(g.form)) if not g.form.is_zero() else None)
            continue
        parts = [(memo[id(c)][0] * s, R.scale(memo[id(c)][1], s)) for c, s in zip(g.children, g.scales)]
        ks = [p[0] for p in parts]
        hs = [p[1] for p in parts]
        if g.kind == ADD:
            memo[id(g)] = (ks[0] + ks[1], R.add(hs[0], hs[1]))
        elif g.kind == NEG:
            k, h = ks[0], hs[0]
            terms = [R.scale(h, -3 * k * k), R.scale(R.mul(h, h), -3 * k) if not k.is_zero() else None, R.neg(h)]
            memo[id(g)] = (-(k * k * k), R.sum(terms))
        else:
            n = len(ks)
            terms = []
            for mask in range(1, 1 << n):
                inside = [i for i in range(n) if mask >> i & 1]
                coef = ONE
                for i in range(n):
                    if not mask >> i & 1:
                        coef = coef * ks[i]
                if coef.is_zero() or any(hs[i] is None for i in inside):
                    continue
                if len(inside) == 1:
                    terms.append(R.scale(hs[inside[0]], coef))
                else:
                    first = R.scale(hs[inside[0]], coef)
                    terms.append(R.mul(first, *[hs[i] for i in inside[1:]]))
            k = ONE
            for x in ks:
                k = k * x
            memo[id(g)] = (k, R.sum(terms))
    return memo[id(root)]


def ihl_homogenize(c: Circuit) -> Circuit:
    """IHL circuit (or formula) computing each output minus its constant term.

    Formulas are depth-reduced first and come back as formulas with unit edge
    scales; circuits keep the gate structure and absorb constants into edge
    scales.
    """
    formula = c.is_formula()
    R = _Refs(formula)
    outs = []
    for o in c.outputs:
        if o is None:
            outs.append(None)
            continue
        if formula:
            t = push_scales(o)
            if not _has_neg(t):
                t = _brent(t)
            _, h = _hat(t, R)
            outs.append(None if h is None else unfold(h[0]))
        else:
            _, h = _hat(o, R)
            outs.append(None if h is None else _fold_output(h[0], h[1]))
    return Circuit(c.nvars, tuple(outs))


def _has_neg(g: Gate) -> bool:
    return any(h.kind == NEG for h in postorder([g]))


# ---------------------------------------------------------------- Brent


def _rebuild_zero(path: list, i: int) -> Optional[Gate]:
    """path[0] with the subtree path[i] replaced by zero."""
    new = None
    for j in range(i - 1, -1, -1):
        node, old = path[j], path[j + 1]
        others = [c for c in node.children if c is not old]
        if node.kind == ADD:
            new = others[0] if new is None else add(new, others[0])
        elif node.is_product:
            if new is not None:
                new = Gate(node.kind, [new if c is old else c for c in node.children])
        else:
            raise MalformedCircuit("negcube gates are not allowed here")
    return new


def _rebuild_coeff(path: list, i: int, repl: Gate) -> Gate:
    """The formula A*repl where path[0] = A*path[i] + B, dropping B."""
    new = repl
    for j in range(i - 1, -1, -1):
        node, old = path[j], path[j + 1]
        if node.is_product:
            new = Gate(node.kind, [new if c is old else c for c in node.children])
    return new


def _brent(t: Gate, trace: list | None = None) -> Gate:
    sizes: dict = {}
    s = tree_size(t, sizes)
    if s <= 4:
        return t
    path = [t]
    cur = t
    while sizes[id(cur)] > 2 * s / 3:
        cur = max(cur.children, key=lambda c: sizes[id(c)])
        path.append(cur)
    v = cur
    for node in path[:-1]:
        if node.kind == NEG:
            raise MalformedCircuit("negcube gates are not allowed in Brent's reduction")
    pidx = next((i for i in range(len(path) - 2, -1, -1) if path[i].is_product), None)
    rest = _rebuild_zero(path, len(path) - 1)
    if pidx is None:
        parts = [v]
        top = _brent(v, trace)
    else:
        p, c1 = path[pidx], path[pidx + 1]
        others = sorted((c for c in p.children if c is not c1), key=lambda c: -sizes[id(c)])
        if p.kind == MUL2:
            coeff = _rebuild_coeff(path, pidx, others[0])
            parts = [v, coeff]
            top = mul2(_brent(v, trace), _brent(coeff, trace))
        else:
            x, y = others
            coeff = _rebuild_coeff(path, pidx, y)
            parts = [v, x, coeff]
            top = mul3(_brent(v, trace), _brent(x, trace), _brent(coeff, trace))
    out = top if rest is None else add(top, _brent(rest, trace))
    if trace is not None:
        trace.append((s, [tree_size(q) for q in parts + ([rest] if rest is not None else [])]))
    return out


def brent_depth_bound(s: int) -> float:
    """Depth bound for the output of brent_arity3 on a size-s formula.

    Each step adds 2 to the depth.  With ternary products the separator only
    has size >= (2s/3 - 1)/3, so the parts shrink to at most 7s/9 + 1.
    """
    if s <= 4:
        return 1
    return 2 * math.log(s / 4) / math.log(9 / 7) + 3


def brent_arity3(f: Circuit, trace: list | None = None) -> Circuit:
    """Depth reduction for formulas over {add, mul3} (mul2 is also accepted)."""
    if not f.is_formula():
        raise MalformedCircuit("Brent's reduction needs a formula")
    outs = [None if o is None else unfold(_brent(push_scales(o), trace)) for o in f.outputs]
    return Circuit(f.nvars, tuple(outs))


# ---------------------------------------------------------------- arity 3 basis


def derivative(g: Gate, i: int) -> Optional[Gate]:
    """Formula (with constant leaves) for d g / d x_i; unit scales assumed."""
    if g.kind == INPUT:
        c = g.form.coeffs[i]
        return None if c.is_zero() else inp(LinearForm.zero(g.form.nvars), c)
    if g.kind == ADD:
        return _opt_add(derivative(g.children[0], i), derivative(g.children[1], i))
    if g.kind == NEG:
        a = g.children[0]
        da = derivative(a, i)
        return None if da is None else scale_formula(mul3(unfold(a), unfold(a), da), -3)
    kids = g.children
    out = None
    for k in range(len(kids)):
        dk = derivative(kids[k], i)
        if dk is None:
            continue
        fac = [dk if j == k else unfold(kids[j]) for j in range(len(kids))]
        out = _opt_add(out, mul2(*fac) if len(fac) == 2 else mul3(*fac))
    return out


def _parity_convert(root: Gate) -> Optional[Gate]:
    """Arity-3 circuit for an odd-degree IHL formula over {add, mul2, mul3}.

    odd(u) computes the odd part of u.  even(u, z) computes z times the even
    part of u, where z is a gate of odd degree fed in from above.
    """
    odd_memo: dict = {}
    even_memo: dict = {}

    def odd(u):
        key = id(u)
        if key in odd_memo:
            return odd_memo[key]
        if u.kind == INPUT:
            r = inp(u.form)
        elif u.kind == ADD:
            r = _opt_add(odd(u.children[0]), odd(u.children[1]))
        elif u.kind == MUL2:
            a, b = u.children
            oa, ob = odd(a), odd(b)
            r = _opt_add(even(b, oa) if oa is not None else None, even(a, ob) if ob is not None else None)
        elif u.kind == MUL3:
            a, b, c = u.children
            oa, ob, oc = odd(a), odd(b), odd(c)
            terms = [_opt_mul(oa, ob, oc)]
            for x, y, oz in ((a, b, oc), (a, c, ob), (b, c, oa)):
                if oz is not None:
                    inner = even(x, oz)
                    terms.append(even(y, inner) if inner is not None else None)
            r = balanced_sum(terms)
        else:
            raise MalformedCircuit("negcube gates are not allowed here")
        odd_memo[key] = r
        return r

    def even(u, z):
        key = (id(u), id(z))
        if key in even_memo:
            return even_memo[key]
        if u.kind == INPUT:
            r = None
        elif u.kind == ADD:
            r = _opt_add(even(u.children[0], z), even(u.children[1], z))
        elif u.kind == MUL2:
            a, b = u.children
            ea = even(a, z)
            r = _opt_add(_opt_mul(z, odd(a), odd(b)), even(b, ea) if ea is not None else None)
        elif u.kind == MUL3:
            a, b, c = u.children
            oa, ob, oc = odd(a), odd(b), odd(c)
            terms = []
            ea = even(a, z)
            eab = even(b, ea) if ea is not None else None
            terms.append(even(c, eab) if eab is not None else None)
            for x, y, w in ((a, b, c), (a, c, b), (b, c, a)):
                prod = _opt_mul(z, odd(x), odd(y))
                terms.append(even(w, prod) if prod is not None else None)
            r = balanced_sum(terms)
        else:
            raise MalformedCircuit("negcube gates are not allowed here")
        even_memo[key] = r
        return r

    return odd(root)


def _check_homogeneous(g: Gate, nvars: int) -> tuple:
    val = evaluate(g, nvars)
    if not val.is_homogeneous():
        raise NonHomogeneous(f"formula computes a non-homogeneous polynomial of degrees {sorted(val.degrees())}")
    return val, (0 if val.is_zero() else val.degree())


def to_arity3(f: Circuit) -> Circuit:
    """Multi-output arity-3 circuit: f itself for odd degree, else its partials."""
    root = f.root
    if root is None:
        return Circuit(f.nvars, (None,))
    if not (f.is_formula() and f.is_ihl()):
        raise MalformedCircuit("to_arity3 expects an IHL formula")
    root = push_scales(root)
    _, d = _check_homogeneous(root, f.nvars)
    if d % 2 == 1:
        return Circuit(f.nvars, (_parity_convert(root),))
    outs = []
    for i in range(f.nvars):
        di = derivative(root, i)
        if di is None:
            outs.append(None)
            continue
        hat = ihl_homogenize(Circuit.single(di, f.nvars)).root
        outs.append(None if hat is None else _parity_convert(hat))
    return Circuit(f.nvars, tuple(outs))


# ---------------------------------------------------------------- random instances


def random_form(rng: random.Random, nvars: int, lo: int = -2, hi: int = 2) -> LinearForm:
    while True:
        cs = [rng.randint(lo, hi) for _ in range(nvars)]
        if any(cs):
            return LinearForm(cs)


def random_ihl_formula(rng: random.Random, nvars: int, depth: int, mul_prob: float = 0.5) -> Gate:
    """Random IHL formula over {add, mul2} of depth at most `depth`."""
    if depth == 0 or rng.random() < 0.2:
        return inp(random_form(rng, nvars))
    a = random_ihl_formula(rng, nvars, depth - 1, mul_prob)
    b = random_ihl_formula(rng, nvars, depth - 1, mul_prob)
    return mul2(a, b) if rng.random() < mul_prob else add(a, b)


def random_formula(rng: random.Random, nvars: int, size: int, constants: bool = True) -> Gate:
    """Random formula over {add, mul2} with about `size` gates."""
    if size <= 1:
        c = rng.randint(-3, 3) if constants else 0
        if constants and rng.random() < 0.3:
            return inp(LinearForm.zero(nvars), c or 1)
        return inp(random_form(rng, nvars), c)
    left = rng.randint(1, size - 1)
    a = random_formula(rng, nvars, left, constants)
    b = random_formula(rng, nvars, size - left, constants)
    return mul2(a, b) if rng.random() < 0.5 else add(a, b)


def random_homogeneous_formula(rng: random.Random, nvars: int, degree: int, budget: int = 6) -> Gate:
    """Random homogeneous IHL formula over {add, mul2}."""
    if degree == 1:
        if budget > 1 and rng.random() < 0.3:
            return add(inp(random_form(rng, nvars)), inp(random_form(rng, nvars)))
        return inp(random_form(rng, nvars))
    if budget > 2 and rng.random() < 0.3:
        return add(random_homogeneous_formula(rng, nvars, degree, budget // 2),
                   random_homogeneous_formula(rng, nvars, degree, budget // 2))
    k = rng.randint(1, degree - 1)
    return mul2(random_homogeneous_formula(rng, nvars, k, budget // 2),
                random_homogeneous_formula(rng, nvars, degree - k, budget // 2))


def _odd_split(rng: random.Random, d: int) -> tuple:
    while True:
        a = rng.randrange(1, d - 1, 2)
        b = rng.randrange(1, d - a, 2)
        c = d - a - b
        if c >= 1 and c % 2:
            return a, b, c


def random_arity3_formula(rng: random.Random, nvars: int, degree: int, max_gates: int = 8) -> Gate:
    """Random homogeneous IHL formula over {add, mul3} of odd degree."""
    if degree % 2 == 0:
        raise DegreeMismatch("arity-3 formulas compute odd degrees only")
    budget = [max_gates]

    def gen(d):
        if d == 1:
            if budget[0] > 0 and rng.random() < 0.25:
                budget[0] -= 1
                return add(inp(random_form(rng, nvars)), inp(random_form(rng, nvars)))
            return inp(random_form(rng, nvars))
        if budget[0] > d // 2 + 2 and rng.random() < 0.25:
            budget[0] -= 1
            return add(gen(d), gen(d))
        budget[0] -= 1
        a, b, c = _odd_split(rng, d)
        return mul3(gen(a), gen(b), gen(c))

    return gen(degree)


def random_arity3_circuit(rng: random.Random, nvars: int, degree: int, extra: int = 6) -> Gate:
    """Random homogeneous IHL circuit over {add, mul3} that reuses gates."""
    if degree % 2 == 0:
        raise DegreeMismatch("arity-3 circuits compute odd degrees only")
    pool: dict = {1: [inp(random_form(rng, nvars)) for _ in range(3)]}

    def pick(d):
        if d not in pool:
            build(d)
        return rng.choice(pool[d])

    def build(d):
        a, b, c = _odd_split(rng, d) if d >= 3 else (1, 1, 1)
        g = mul3(pick(a), pick(b), pick(c))
        pool.setdefault(d, []).append(g)
        return g

    for d in range(3, degree + 1, 2):
        build(d)
    for _ in range(extra):
        d = rng.randrange(1, degree + 1, 2)
        if rng.random() < 0.5 and len(pool.get(d, [])) >= 1:
            pool.setdefault(d, []).append(add(pick(d), pick(d), rng.choice([1, -1, 2]), 1))
        elif d >= 3:
            build(d)
    top = pick(degree)
    return add(top, pick(degree), 1, rng.choice([1, -1, 3])) if rng.random() < 0.5 else top


# ---------------------------------------------------------------- matrix programs


def _mat_identity(dim: int, nvars: int) -> list:
    return [[Poly.const(1 if i == j else 0, nvars) for j in range(dim)] for i in range(dim)]


def _mat_mul(A, B, cutoff=None) -> list:
    n = len(A)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = None
            for k in range(n):
                if A[i][k].is_zero() or B[k][j].is_zero():
                    continue
                t = A[i][k].mul(B[k][j], cutoff) if cutoff is not None else A[i][k] * B[k][j]
                acc = t if acc is None else acc + t
            row.append(acc if acc is not None else Poly.zero(A[0][0].nvars))
        out.append(row)
    return out


@dataclass
class MatrixProgram:
    """alpha * ((id + A_1) ... (id + A_r) - id), read at `position`.

    Each factor is a sparse dict {(i, j): LinearForm} with 0-based indices;
    position is a 1-based pair or "trace".
    """

    dim: int
    nvars: int
    factors: list
    alpha: LaurentScalar = ONE
    position: object = (1, 2)

    @property
    def r(self) -> int:
        return len(self.factors)

    def dense_factor(self, k: int) -> list:
        zero = LinearForm.zero(self.nvars)
        return [[self.factors[k].get((i, j), zero) for j in range(self.dim)] for i in range(self.dim)]

    def expand(self, cutoff: int | None = None) -> list:
        """The full matrix alpha * (prod - id), truncated below eps^cutoff if given."""
        M = _mat_identity(self.dim, self.nvars)
        inner = None if cutoff is None else cutoff - self.alpha.min_exp() if not self.alpha.is_zero() else None
        for fac in self.factors:
            F = _mat_identity(self.dim, self.nvars)
            for (i, j), form in fac.items():
                F[i][j] = F[i][j] + form.to_poly()
            M = _mat_mul(M, F, inner)
        for i in range(self.dim):
            M[i][i] = M[i][i] - Poly.const(1, self.nvars)
        out = [[e.scale(self.alpha) for e in row] for row in M]
        if cutoff is not None:
            out = [[e.truncate(cutoff) for e in row] for row in out]
        return out

    def value(self, cutoff: int | None = None) -> Poly:
        M = self.expand(cutoff)
        if self.position == "trace":
            out = M[0][0]
            for i in range(1, self.dim):
                out = out + M[i][i]
            return out
        i, j = self.position
        return M[i - 1][j - 1]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "nvars": self.nvars,
            "alpha": self.alpha.to_json(),
            "position": self.position if self.position == "trace" else list(self.position),
            "factors": [[[i, j, form.to_json()] for (i, j), form in sorted(f.items())] for f in self.factors],
        }

    @classmethod
    def from_json(cls, obj) -> "MatrixProgram":
        pos = obj["position"]
        facs = [{(int(i), int(j)): LinearForm.from_json(fm) for i, j, fm in f} for f in obj["factors"]]
        return cls(int(obj["dim"]), int(obj["nvars"]), facs, LaurentScalar.from_json(obj["alpha"]),
                   pos if pos == "trace" else tuple(pos))


def _boc(g: Gate, pos: tuple) -> tuple:
    """Factor lists (plus, minus) with products id +- g E_pos."""
    i, j = pos
    if g.kind == INPUT:
        if not g.const.is_zero() or g.form.is_zero():
            raise MalformedCircuit("Ben-Or and Cleve needs an IHL formula")
        return [{pos: g.form}], [{pos: -g.form}]
    if g.kind == ADD:
        pa, ma = _boc(g.children[0], pos)
        pb, mb = _boc(g.children[1], pos)
        return pa + pb, ma + mb
    if g.kind == MUL2:
        k = 3 - i - j
        pf, mf = _boc(g.children[0], (i, k))
        pg, mg = _boc(g.children[1], (k, j))
        return pf + pg + mf + mg, mf + pg + pf + mg
    raise MalformedCircuit(f"{g.kind} gates are not in the binary basis")


def _binary(g: Gate) -> Gate:
    """Rewrite mul3 as nested mul2 so the 3x3 construction applies."""
    if g.kind == INPUT:
        return g
    kids = [_binary(c) for c in g.children]
    if g.kind == MUL3:
        return mul2(mul2(kids[0], kids[1]), kids[2])
    return Gate(g.kind, kids)


def ben_or_cleve(f: Circuit, pos=(1, 2)) -> MatrixProgram:
    """Exact 3x3 program with f E_pos = (id + A_1)...(id + A_r) - id."""
    i, j = pos
    if i == j or not (1 <= i <= 3 and 1 <= j <= 3):
        raise MalformedCircuit("position must be off-diagonal in a 3x3 matrix")
    root = f.root
    if root is None:
        return MatrixProgram(3, f.nvars, [], ONE, (i, j))
    plus, _ = _boc(_binary(push_scales(root)), (i - 1, j - 1))
    return MatrixProgram(3, f.nvars, plus, ONE, (i, j))


def ben_or_cleve_minus(f: Circuit, pos=(1, 2)) -> MatrixProgram:
    """The companion program with product id - f E_pos."""
    root = f.root
    if root is None:
        return MatrixProgram(3, f.nvars, [], ONE, pos)
    _, minus = _boc(_binary(push_scales(root)), (pos[0] - 1, pos[1] - 1))
    return MatrixProgram(3, f.nvars, minus, ONE, pos)


def _top_summands(g: Gate) -> list:
    if g.kind == ADD:
        return _top_summands(g.children[0]) + _top_summands(g.children[1])
    return [g]


def ben_or_cleve_trace(f: Circuit) -> MatrixProgram:
    """Approximate program with alpha = eps^-2 whose (1,1) entry tends to f.

    Each top-level product g*h becomes the block
    (id + eps g E12)(id + eps h E21)(id - eps g E12)(id - eps h E21).
    """
    root = f.root
    if root is None:
        return MatrixProgram(3, f.nvars, [], LaurentScalar.eps(-2), (1, 1))
    eps = LaurentScalar.eps(1)
    factors: list = []
    for s in _top_summands(_binary(push_scales(root))):
        if s.kind != MUL2:
            raise MalformedCircuit("every top-level summand must be a product")
        g, h = s.children
        pg, mg = _boc(scale_formula(g, eps), (0, 1))
        ph, mh = _boc(scale_formula(h, eps), (1, 0))
        factors += pg + ph + mg + mh
    return MatrixProgram(3, f.nvars, factors, LaurentScalar.eps(-2), (1, 1))


def boc_block_check(g: Gate, h: Gate, nvars: int) -> bool:
    """The commutator block equals id + eps^2 g h (E11 - E22) mod eps^3."""
    prog = ben_or_cleve_trace(Circuit.single(mul2(g, h), nvars))
    M = MatrixProgram(3, nvars, prog.factors, ONE, (1, 1)).expand(cutoff=3)
    gh = evaluate(g, nvars) * evaluate(h, nvars)
    want = gh.shift_eps(2)
    zero = Poly.zero(nvars)
    expected = [[want, zero, zero], [zero, -want, zero], [zero, zero, zero]]
    return all(M[a][b] == expected[a][b] for a in range(3) for b in range(3))


# ---------------------------------------------------------------- parity-alternating polynomials


def nc_elementary(matrices: Sequence, d: int) -> list:
    """Sum over increasing index tuples of X_{I_1} ... X_{I_d} (matrices of Poly)."""
    if not matrices:
        return None
    dim = len(matrices[0])
    if any(len(M) != dim or any(len(row) != dim for row in M) for M in matrices):
        raise SizeMismatch("matrices must share one square shape")
    nvars = matrices[0][0][0].nvars
    zero = [[Poly.zero(nvars) for _ in range(dim)] for _ in range(dim)]
    if d < 0 or d > len(matrices):
        return zero
    E = [_mat_identity(dim, nvars)] + [zero] * d
    for X in matrices:
        for k in range(d, 0, -1):
            P = _mat_mul(E[k - 1], X)
            E[k] = [[E[k][a][b] + P[a][b] for b in range(dim)] for a in range(dim)]
    return E[d]


def alternating_matrices(forms: Sequence) -> list:
    """X_i = l_i E_odd for odd i and l_i E_even for even i (1-based)."""
    out = []
    for i, f in enumerate(forms):
        p = f.to_poly() if isinstance(f, LinearForm) else f
        z = Poly.zero(p.nvars)
        out.append([[z, p], [z, z]] if i % 2 == 0 else [[z, z], [p, z]])
    return out


def c_poly(n: int, d: int) -> Poly:
    """C_{n,d} via the 2x2 noncommutative elementary symmetric product."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    A = nc_elementary(alternating_matrices([Poly.var(i, n) for i in range(n)]), d)
    return A[0][0] + A[0][1]


def c_poly_enum(n: int, d: int) -> Poly:
    """C_{n,d} by listing increasing parity-alternating sequences."""
    out = Poly.zero(n)

    def rec(start, k, mono):
        nonlocal out
        if k == d:
            exps = [0] * n
            for i in mono:
                exps[i] += 1
            out = out + Poly.monomial(exps, 1, n)
            return
        for i in range(start, n):
            if i % 2 == k % 2:
                rec(i + 1, k + 1, mono + [i])

    rec(0, 0, [])
    return out


def c_eval(forms: Sequence[LinearForm], d: int, cutoff: int | None = None) -> Poly:
    """C_{r,d}(l_1, ..., l_r), optionally modulo eps^cutoff.

    T[k] sums products over alternating sequences of length k; the truncation
    leaves room for the most negative eps powers still to come.
    """
    r = len(forms)
    nvars = forms[0].nvars if forms else 0
    polys = [f.to_poly() for f in forms]
    mins = [p.min_eps() if not p.is_zero() else 0 for p in polys]
    suffix_min = [0] * (r + 1)
    for i in range(r - 1, -1, -1):
        suffix_min[i] = min(suffix_min[i + 1], mins[i])
    T = [Poly.const(1, nvars)] + [Poly.zero(nvars) for _ in range(d)]
    for i, p in enumerate(polys):
        if p.is_zero():
            continue
        for k in range(min(d, i + 1), 0, -1):
            if (k - 1) % 2 != i % 2 or T[k - 1].is_zero():
                continue
            if cutoff is None:
                T[k] = T[k] + T[k - 1] * p
            else:
                room = cutoff - (d - k) * suffix_min[i + 1]
                T[k] = T[k] + T[k - 1].mul(p, room)
    return T[d] if cutoff is None else T[d].truncate(cutoff)


# ---------------------------------------------------------------- continuant compilation
#
# A program is a list of forms l_1..l_r read as (id + l_1 E_odd)(id + l_2 E_even)...
# Coefficients are polynomials in a formal alpha: each form is {alpha power: LinearForm}.


def _pform_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, f in b.items():
        out[k] = out[k] + f if k in out else f
    return {k: f for k, f in out.items() if not f.is_zero()}


def _prog_concat(*progs) -> list:
    out: list = []
    for p in progs:
        if not p:
            continue
        if out and len(out) % 2 == 1:
            out = out[:-1] + [_pform_add(out[-1], p[0])] + p[1:]
        else:
            out = out + p
    return out


def _prog_alpha_scale(p: list, c) -> list:
    c = _s(c)
    return [{k: f.scale(c ** k) if k else f for k, f in form.items()} for form in p]


def _prog_alpha_set(p: list, value) -> list:
    value = _s(value)
    out = []
    for form in p:
        acc = None
        for k, f in form.items():
            t = f.scale(value ** k) if k else f
            acc = t if acc is None else acc + t
        out.append({0: acc} if acc is not None and not acc.is_zero() else {})
    return out


def _prog_eps_power(p: list, k: int) -> list:
    return [{a: f.subst_eps_power(k) for a, f in form.items()} for form in p]


def _alpha_degree_bound(p: list) -> int:
    """Max-plus bound on the alpha degree of any entry of the 2x2 product."""
    NEG_INF = float("-inf")
    M = [[0, NEG_INF], [NEG_INF, 0]]
    for idx, form in enumerate(p):
        if not form:
            continue
        a = max(form)
        i, j = (0, 1) if idx % 2 == 0 else (1, 0)
        new = [row[:] for row in M]
        for r in range(2):
            if M[r][i] != NEG_INF:
                new[r][j] = max(new[r][j], M[r][i] + a)
        M = new
    return int(max(max(row) for row in M))


def _cube_gadget(p: list, stats: dict | None = None) -> list:
    """From alpha g E_odd ~ prod - id, a program for -alpha g^3 E_odd."""
    A = max(_alpha_degree_bound(p), 1)
    k = A + 2
    if stats is not None:
        stats.setdefault("k", []).append(k)
    pk = _prog_eps_power(p, k)
    eps_inv = LaurentScalar.eps(-1)
    p1 = _prog_alpha_set(pk, eps_inv)
    p2 = _prog_alpha_set(pk, -eps_inv)
    p3 = _prog_alpha_scale(_prog_eps_power(p, 3), LaurentScalar.eps(2))
    return p1 + list(reversed(p3)) + p2


def _four_cubes(g: Gate) -> Gate:
    """Rewrite mul3 via xyz = (1/24)((x+y+z)^3 - (x+y-z)^3 - (x-y+z)^3 + (x-y-z)^3)."""
    if g.kind == INPUT:
        return g
    kids = [_four_cubes(c) for c in g.children]
    if g.kind == ADD:
        return Gate(ADD, kids, g.scales)
    if g.kind == NEG:
        return Gate(NEG, kids, g.scales)
    if g.kind != MUL3:
        raise MalformedCircuit("continuant compilation expects the arity-3 basis")
    x, y, z = [Gate(ADD, (c, c), (s, ZERO)) if s != 1 else c for c, s in zip(kids, g.scales)]
    c = LaurentScalar.of(Fraction(1, 24))
    cubes = []
    for sy, sz, sign in ((1, 1, -1), (1, -1, 1), (-1, 1, 1), (-1, -1, -1)):
        inner = add(add(x, y, 1, sy), z, 1, sz)
        cubes.append((negcube(inner), c * sign))
    s01 = add(cubes[0][0], cubes[1][0], cubes[0][1], cubes[1][1])
    s23 = add(cubes[2][0], cubes[3][0], cubes[2][1], cubes[3][1])
    return add(s01, s23)


def _program(g: Gate, memo: dict, stats: dict | None) -> list:
    key = id(g)
    if key in memo:
        return memo[key]
    if g.kind == INPUT:
        if not g.const.is_zero() or g.form.is_zero():
            raise MalformedCircuit("continuant compilation needs IHL inputs")
        out = [{1: g.form}]
    else:
        subs = [_prog_alpha_scale(_program(c, memo, stats), s) if s != 1 else _program(c, memo, stats)
                for c, s in zip(g.children, g.scales)]
        subs = [p for p, s in zip(subs, g.scales) if not s.is_zero()]
        if g.kind == ADD:
            out = _prog_concat(*subs)
        elif g.kind == NEG:
            out = _cube_gadget(subs[0], stats) if subs and subs[0] else []
        else:
            raise MalformedCircuit(f"unexpected {g.kind} gate after the four-cubes rewrite")
    memo[key] = out
    return out


def _collapse(p: list, nvars: int) -> list:
    forms = _prog_alpha_set(p, 1)
    return [f.get(0, LinearForm.zero(nvars)) for f in forms]


@dataclass
class ContinuantResult:
    d: int
    forms: list
    stats: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.forms)

    def evaluate(self, cutoff: int | None = 1) -> Poly:
        return c_eval(self.forms, self.d, cutoff)


def continuant_compile(f, d: int, nvars: int | None = None, check: bool = True) -> ContinuantResult:
    """Forms l_1..l_r over eps with C_{r,d}(l) = f + O(eps).

    For odd d, f is an arity-3 IHL formula (Gate or single-output Circuit).
    For even d, f is the list of outputs of to_arity3: one formula per
    partial derivative, None where the partial vanishes.
    """
    if isinstance(f, Circuit):
        nvars = f.nvars
        f = list(f.outputs) if d % 2 == 0 else f.root
    if nvars is None:
        raise ValueError("nvars is required for bare gates")
    stats: dict = {}
    if d % 2 == 1:
        if isinstance(f, (list, tuple)):
            raise DegreeMismatch("odd degree expects a single formula")
        root = unfold(f)
        target, deg = _check_homogeneous(root, nvars)
        if not target.is_zero() and deg != d:
            raise DegreeMismatch(f"formula has degree {deg}, expected {d}")
        prog = _program(_four_cubes(root), {}, stats)
        forms = _collapse(prog, nvars)
    else:
        if not isinstance(f, (list, tuple)) or len(f) != nvars:
            raise SizeMismatch("even degree expects one formula per variable")
        blocks: list = []
        target = Poly.zero(nvars)
        eps = LaurentScalar.eps(1)
        for i, g in enumerate(f):
            if g is None:
                continue
            root = unfold(g)
            part, deg = _check_homogeneous(root, nvars)
            if part.is_zero():
                continue
            if deg != d - 1:
                raise DegreeMismatch(f"partial {i} has degree {deg}, expected {d - 1}")
            target = target + Poly.var(i, nvars) * part
            p = _prog_alpha_scale(_program(_four_cubes(root), {}, stats), LaurentScalar.of(Fraction(1, d)))
            p3 = _prog_eps_power(p, 3)
            plus = list(reversed(_prog_alpha_set(p3, eps)))
            minus = list(reversed(_prog_alpha_set(p3, -eps)))
            xi = LinearForm.basis(i, nvars, eps)
            blocks += [{0: -xi}] + minus + [{0: xi}] + plus
        target = target.scale(LaurentScalar.of(Fraction(1, d)))
        half = d // 2
        forms = [fm.subst_eps_power(half).scale(LaurentScalar.eps(-1)) for fm in _collapse(blocks, nvars)]
    res = ContinuantResult(d, forms, stats)
    if check and not equiv_mod_eps(res.evaluate(), target):
        raise CongruenceViolation(d, "C_{r,d}(l) does not reduce to f modulo eps")
    return res


# ---------------------------------------------------------------- VSBR over the arity 3 basis


class _Analysis:
    """Degrees, heavy children, heavy-path reachability and linear parts."""

    def __init__(self, roots: Sequence[Gate], nvars: int):
        self.order = postorder(roots)
        self.pos = {id(g): i for i, g in enumerate(self.order)}
        self.deg: dict = {}
        self.heavy: dict = {}
        self.reach: dict = {}
        self.lin: dict = {}
        for g in self.order:
            k = id(g)
            if g.kind == INPUT:
                if not g.const.is_zero() or g.form.is_zero():
                    raise MalformedCircuit("VSBR needs an IHL circuit")
                self.deg[k] = 1
                self.lin[k] = g.form.with_nvars(nvars) if g.form.nvars != nvars else g.form
                self.reach[k] = 1 << self.pos[k]
            elif g.kind == ADD:
                a, b = g.children
                if self.deg[id(a)] != self.deg[id(b)]:
                    raise NonHomogeneous("addition of gates of different degrees")
                self.deg[k] = self.deg[id(a)]
                self.reach[k] = (1 << self.pos[k]) | self.reach[id(a)] | self.reach[id(b)]
                if self.deg[k] == 1:
                    self.lin[k] = self.lin[id(a)].scale(g.scales[0]) + self.lin[id(b)].scale(g.scales[1])
            elif g.kind == MUL3:
                ds = [self.deg[id(c)] for c in g.children]
                self.deg[k] = sum(ds)
                h = max(range(3), key=lambda i: (ds[i], -i))
                self.heavy[k] = h
                self.reach[k] = (1 << self.pos[k]) | self.reach[id(g.children[h])]
            else:
                raise MalformedCircuit("VSBR works over {add, mul3}")

    def below(self, v: Gate, u: Gate) -> bool:
        return bool(self.reach[id(u)] >> self.pos[id(v)] & 1)

    def frontier(self, m: int, top: Gate, v: Gate | None = None) -> list:
        out = []
        for w in self.order:
            if w.kind != MUL3 or self.deg[id(w)] <= m or not self.below(w, top):
                continue
            if any(self.deg[id(c)] > m for c in w.children):
                continue
            if v is not None and not self.below(v, w.children[self.heavy[id(w)]]):
                continue
            out.append(w)
        return out

    def split(self, w: Gate) -> tuple:
        """(heavy, other light, smallest light) children with their scales."""
        h = self.heavy[id(w)]
        light = sorted((i for i in range(3) if i != h), key=lambda i: (-self.deg[id(w.children[i])], i))
        idx = [h, light[0], light[1]]
        return [w.children[i] for i in idx], [w.scales[i] for i in idx]


def _ceil_frac(a: int, b: int) -> int:
    return -(-a // b)


def vsbr_arity3(c: Circuit, stats: dict | None = None) -> Circuit:
    """Depth reduction for homogeneous IHL circuits over {add, mul3}.

    U(u) computes gate u and S(u, v, t) computes [u:v] with z replaced by the
    original gate t; both are memoized, so the output has O(s^3) gates.
    """
    import sys

    roots = [o for o in c.outputs if o is not None]
    A = _Analysis(roots, c.nvars)
    R = _Refs(False)
    U_memo: dict = {}
    S_memo: dict = {}
    coef_memo: dict = {}
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20000))

    def coef(u, v):
        key = (id(u), id(v))
        if key in coef_memo:
            return coef_memo[key]
        if u is v:
            r = ONE
        elif u.kind != ADD or A.deg[id(u)] != A.deg[id(v)] or not A.below(v, u):
            r = ZERO
        else:
            r = u.scales[0] * coef(u.children[0], v) + u.scales[1] * coef(u.children[1], v)
        coef_memo[key] = r
        return r

    def expand(u):
        """Terms (scale, refs...) whose sum is u, via the frontier at 2/3 deg u."""
        du = A.deg[id(u)]
        m = _ceil_frac(2 * du, 3)
        terms = []
        for w in A.frontier(m, u):
            (w1, w2, w3), sc = A.split(w)
            sigma = sc[0] * sc[1] * sc[2]
            terms.append((sigma, S(u, w, w3), U(w2), U(w1)))
        return terms

    def U(u):
        key = id(u)
        if key in U_memo:
            return U_memo[key]
        if A.deg[key] == 1:
            form = A.lin[key]
            r = None if form.is_zero() else R.ref(inp(form))
        else:
            r = R.sum([R.scale(R.mul(a, b, cc), s) for s, a, b, cc in expand(u)])
        U_memo[key] = r
        return r

    def S(u, v, t):
        key = (id(u), id(v), id(t))
        if key in S_memo:
            return S_memo[key]
        if not A.below(v, u):
            r = None
        elif u is v:
            r = U(t)
        else:
            D = A.deg[id(u)] - A.deg[id(v)]
            if D == 0:
                r = R.scale(U(t), coef(u, v))
            else:
                m = min(A.deg[id(v)] + _ceil_frac(2 * D, 3), A.deg[id(u)] - 1)
                terms = []
                for w in A.frontier(m, u, v):
                    (w1, w2, w3), sc = A.split(w)
                    sigma = sc[0] * sc[1] * sc[2]
                    left = S(u, w, w3)
                    mid = S(w1, v, t)
                    if left is None or mid is None:
                        continue
                    if A.deg[id(w2)] == 1:
                        terms.append(R.scale(R.mul(left, mid, U(w2)), sigma))
                        continue
                    for s2, a, b, cc in expand(w2):
                        inner = R.mul(left, mid, a)
                        terms.append(R.scale(R.mul(inner, b, cc), sigma * s2))
                r = _balanced_refs(R, terms)
        S_memo[key] = r
        if stats is not None:
            stats["S"] = len(S_memo)
        return r

    try:
        outs = []
        for o in c.outputs:
            if o is None:
                outs.append(None)
                continue
            r = U(o)
            outs.append(None if r is None else _fold_output(r[0], r[1]))
    finally:
        sys.setrecursionlimit(limit)
    return Circuit(c.nvars, tuple(outs))


def _balanced_refs(R: _Refs, refs: list):
    refs = [r for r in refs if r is not None]
    if not refs:
        return None
    while len(refs) > 1:
        refs = [R.add(refs[i], refs[i + 1]) if i + 1 < len(refs) else refs[i] for i in range(0, len(refs), 2)]
    return refs[0]


def vsbr_mult_depth_bound(d: int) -> int:
    """Bound on the multiplicative depth of vsbr_arity3 on degree d.

    Every product level shrinks the degree handled below it to at most
    ceil(2/3 * current), and an expanded S term uses two stacked mul3 gates.
    """
    levels = 0
    x = d
    while x > 2:
        x = _ceil_frac(2 * x, 3)
        levels += 1
    return 2 * levels + 1


def bracket(c: Circuit, u: Gate, v: Gate) -> Poly:
    """[u:v] as a polynomial in x_1..x_n and an extra variable z (the last one)."""
    A = _Analysis([u], c.nvars)
    n = c.nvars + 1
    z = Poly.var(c.nvars, n)
    vals: dict = {}

    def val(g):
        return evaluate(g, c.nvars, vals).with_nvars(n)

    memo: dict = {}

    def rec(g):
        if id(g) in memo:
            return memo[id(g)]
        if g is v:
            r = z
        elif g.kind == INPUT:
            r = Poly.zero(n)
        elif g.kind == ADD:
            r = rec(g.children[0]).scale(g.scales[0]) + rec(g.children[1]).scale(g.scales[1])
        else:
            h = A.heavy[id(g)]
            r = rec(g.children[h]).scale(g.scales[h])
            for i in range(3):
                if i != h:
                    r = r * val(g.children[i]).scale(g.scales[i])
        memo[id(g)] = r
        return r

    return rec(u)
