import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bordercx.circuitc import (
    Circuit,
    ContinuantResult,
    MatrixProgram,
    add,
    alternating_matrices,
    ben_or_cleve,
    ben_or_cleve_minus,
    ben_or_cleve_trace,
    boc_block_check,
    bracket,
    brent_arity3,
    brent_depth_bound,
    c_eval,
    c_poly,
    c_poly_enum,
    continuant_compile,
    evaluate,
    formal_degree,
    ihl_homogenize,
    inp,
    mul2,
    mul3,
    nc_elementary,
    negcube,
    random_arity3_circuit,
    random_arity3_formula,
    random_formula,
    random_ihl_formula,
    to_arity3,
    tree_size,
    var,
    vsbr_arity3,
    vsbr_mult_depth_bound,
)
from bordercx.errors import CongruenceViolation, DegreeMismatch, MalformedCircuit, NonHomogeneous, SizeMismatch
from bordercx.polyring import LaurentScalar, LinearForm, Poly, equiv_mod_eps

N = 3
x, y, z = (var(i, N) for i in range(N))
X, Y, Z = (Poly.var(i, N) for i in range(N))


def const(c):
    return inp(LinearForm.zero(N), c)


# ---------------------------------------------------------------- basics


def test_eval_small():
    g = mul2(add(x, y), add(z, x, sb=2))
    assert Circuit.single(g, N).eval()[0] == (X + Y) * (Z + X.scale(2))


def test_negcube_eval():
    assert Circuit.single(negcube(x), N).eval()[0] == -(X ** 3)


def test_malformed_gate():
    with pytest.raises(MalformedCircuit):
        mul3(x, y, None)


def test_json_roundtrip_shares_gates():
    s = add(x, y)
    c = Circuit(N, (mul2(s, s), s, None))
    back = Circuit.from_json(c.to_json())
    assert back.size() == c.size()
    assert back.eval() == c.eval()


def test_json_rejects_forward_refs():
    obj = Circuit.single(add(x, y), N).to_json()
    obj["gates"][0], obj["gates"][-1] = obj["gates"][-1], obj["gates"][0]
    with pytest.raises(MalformedCircuit):
        Circuit.from_json(obj)


def test_formula_detection():
    s = add(x, y)
    assert Circuit.single(mul2(add(x, y), z), N).is_formula()
    assert not Circuit.single(mul2(s, s), N).is_formula()


# ---------------------------------------------------------------- homogenization


def test_ihl_drops_constant():
    assert ihl_homogenize(Circuit.single(const(7), N)).root is None
    xp1 = inp(LinearForm.basis(0, N), 1)
    assert ihl_homogenize(Circuit.single(xp1, N)).eval()[0] == X


def test_ihl_product_of_affine():
    f = mul2(inp(LinearForm.basis(0, N), 1), inp(LinearForm.basis(1, N), 2))
    out = ihl_homogenize(Circuit.single(f, N))
    assert out.is_ihl()
    assert out.eval()[0] == X * Y + X.scale(2) + Y


@pytest.mark.parametrize("seed", range(15))
def test_ihl_random_formula(seed):
    rng = random.Random(seed)
    g = random_formula(rng, N, 10)
    c = Circuit.single(g, N)
    want = c.eval()[0]
    want = want - Poly.const(want.coefficient((0,) * N), N)
    out = ihl_homogenize(c)
    assert out.is_ihl() and out.is_formula()
    assert (Poly.zero(N) if out.root is None else out.eval()[0]) == want


@pytest.mark.parametrize("seed", range(10))
def test_ihl_circuit_mode_size(seed):
    rng = random.Random(seed)
    g = random_formula(rng, N, 8)
    shared = add(mul2(g, g), g)
    c = Circuit.single(shared, N)
    out = ihl_homogenize(c)
    want = c.eval()[0]
    want = want - Poly.const(want.coefficient((0,) * N), N)
    assert (Poly.zero(N) if out.root is None else out.eval()[0]) == want
    assert out.size() <= 6 * c.size()


# ---------------------------------------------------------------- arity 3 and Brent


def test_to_arity3_odd():
    f = mul2(mul2(x, y), z)
    out = to_arity3(Circuit.single(f, N))
    assert out.is_arity3() and out.eval()[0] == X * Y * Z


def test_to_arity3_even_gives_partials():
    f = mul2(x, add(y, z))
    out = to_arity3(Circuit.single(f, N))
    assert out.eval() == [Y + Z, X, X]


def test_to_arity3_zero_partial_is_none():
    out = to_arity3(Circuit.single(mul2(x, y), N))
    assert out.outputs[2] is None


def test_to_arity3_rejects_non_homogeneous():
    with pytest.raises(NonHomogeneous):
        to_arity3(Circuit.single(add(var(0, N), mul2(var(0, N), y)), N))


@pytest.mark.parametrize("degree", [3, 5, 7])
def test_brent_depth(degree):
    rng = random.Random(degree)
    for _ in range(8):
        g = random_arity3_formula(rng, N, degree, max_gates=20)
        c = Circuit.single(g, N)
        out = brent_arity3(c)
        assert out.eval() == c.eval()
        assert out.is_arity3()
        assert out.depth() <= brent_depth_bound(tree_size(g))


def test_brent_rejects_circuit():
    s = add(x, y)
    with pytest.raises(MalformedCircuit):
        brent_arity3(Circuit.single(mul3(s, s, s), N))


# ---------------------------------------------------------------- Ben-Or and Cleve


def test_boc_counts():
    assert ben_or_cleve(Circuit.single(x, N)).r == 1
    assert ben_or_cleve(Circuit.single(add(x, y), N)).r == 2
    prog = ben_or_cleve(Circuit.single(mul2(x, y), N), pos=(1, 3))
    assert prog.r == 4
    assert prog.value() == X * Y


def test_boc_rejects_bad_position():
    with pytest.raises(MalformedCircuit):
        ben_or_cleve(Circuit.single(x, N), pos=(2, 2))


@pytest.mark.parametrize("seed", range(10))
def test_boc_exact(seed):
    rng = random.Random(seed)
    g = random_ihl_formula(rng, N, 3)
    c = Circuit.single(g, N)
    f = c.eval()[0]
    for prog, target in ((ben_or_cleve(c), f), (ben_or_cleve_minus(c), -f)):
        M = prog.expand()
        for i in range(3):
            for j in range(3):
                assert M[i][j] == (target if (i, j) == (0, 1) else Poly.zero(N))


def test_boc_json_roundtrip():
    prog = ben_or_cleve(Circuit.single(mul2(add(x, y), z), N))
    back = MatrixProgram.from_json(prog.to_json())
    assert back.value() == prog.value()


def test_trace_block():
    assert boc_block_check(add(x, y), z, N)
    prog = ben_or_cleve_trace(Circuit.single(mul2(x, y), N))
    assert prog.position == (1, 1)
    assert prog.value(cutoff=1).limit() == X * Y


# ---------------------------------------------------------------- parity alternating polynomials


def test_c_poly_small():
    assert c_poly(1, 1) == Poly.var(0, 1)
    assert c_poly(3, 2) == Poly.var(0, 3) * Poly.var(1, 3)
    x5 = [Poly.var(i, 5) for i in range(5)]
    assert c_poly(5, 3) == x5[0] * (x5[1] * x5[2] + x5[1] * x5[4] + x5[3] * x5[4]) + x5[2] * x5[3] * x5[4]


@pytest.mark.parametrize("n", range(1, 8))
def test_c_poly_matches_enum(n):
    for d in range(1, n + 1):
        assert c_poly(n, d) == c_poly_enum(n, d)


def test_nc_elementary_above_length_is_zero():
    mats = alternating_matrices([LinearForm.basis(i, N) for i in range(N)])
    E = nc_elementary(mats, 4)
    assert all(e.is_zero() for row in E for e in row)


def test_c_poly_parity_split():
    # row 0 holds sequences starting at an odd index; the column is the parity of d
    mats = alternating_matrices([LinearForm.basis(i, 5) for i in range(5)])
    for d in range(1, 6):
        E = nc_elementary(mats, d)
        assert (E[0][1] if d % 2 == 0 else E[0][0]).is_zero()
        assert (E[0][0] if d % 2 == 0 else E[0][1]) == c_poly(5, d)


def test_c_eval_matches_poly():
    forms = [LinearForm.basis(i, 4) for i in range(4)]
    assert c_eval(forms, 3) == c_poly(4, 3)


# ---------------------------------------------------------------- continuant compilation


def test_continuant_cube():
    res = continuant_compile(negcube(x), 3, N)
    assert equiv_mod_eps(res.evaluate(), -(X ** 3))


def test_continuant_xyz():
    res = continuant_compile(mul3(x, y, z), 3, N)
    assert isinstance(res, ContinuantResult)
    assert equiv_mod_eps(res.evaluate(), X * Y * Z)


def test_continuant_even():
    n = 4
    v = [var(i, n) for i in range(n)]
    f = add(mul2(v[0], v[1]), mul2(v[2], v[3]))
    parts = to_arity3(Circuit.single(f, n))
    res = continuant_compile(parts, 2)
    P = [Poly.var(i, n) for i in range(n)]
    assert equiv_mod_eps(res.evaluate(), P[0] * P[1] + P[2] * P[3])


@pytest.mark.parametrize("seed", range(6))
def test_continuant_random_odd(seed):
    rng = random.Random(seed)
    d = rng.choice([3, 5])
    g = random_arity3_formula(rng, N, d)
    res = continuant_compile(g, d, N)
    assert equiv_mod_eps(res.evaluate(), evaluate(g, N))


def test_continuant_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        continuant_compile(mul3(x, y, z), 5, N)
    with pytest.raises(SizeMismatch):
        continuant_compile([x], 2, N)


# ---------------------------------------------------------------- VSBR


@pytest.mark.parametrize("seed", range(12))
def test_vsbr_random(seed):
    rng = random.Random(seed)
    d = rng.choice([3, 5, 7, 9])
    c = Circuit.single(random_arity3_circuit(rng, N, d, extra=rng.randint(0, 6)), N)
    out = vsbr_arity3(c)
    assert out.eval() == c.eval()
    assert out.is_arity3() and out.is_ihl()
    assert out.mult_depth() <= vsbr_mult_depth_bound(d)


@pytest.mark.parametrize("length", [20, 40])
def test_vsbr_chain_is_shallow(length):
    g = x
    for k in range(length):
        g = mul3(g, y, z) if k % 2 else add(mul3(g, x, y), mul3(z, z, g))
    c = Circuit.single(g, N)
    out = vsbr_arity3(c)
    d = formal_degree(g)
    assert out.eval() == c.eval()
    assert out.mult_depth() <= vsbr_mult_depth_bound(d) < c.mult_depth()


def test_bracket_leaf_is_zero():
    c = Circuit.single(mul3(x, y, z), N)
    assert bracket(c, x, y).is_zero()


def test_bracket_recovers_gate():
    inner = mul3(x, y, z)
    u = mul3(inner, x, x, sa=2)
    c = Circuit.single(u, N)
    b = bracket(c, u, inner)
    Zv = Poly.var(N, N + 1)
    Xv = Poly.var(0, N + 1)
    assert b == (Zv * Xv * Xv).scale(2)


@given(st.integers(0, 10 ** 6))
def test_bracket_sum_identity(seed):
    # u equals the sum over the frontier of [u:w] with z -> w
    rng = random.Random(seed)
    u = random_arity3_formula(rng, N, 5)
    c = Circuit.single(u, N)
    b = bracket(c, u, u)
    assert b == Poly.var(N, N + 1)
