import random

import gmpy2
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bordercx.errors import (
    CongruenceViolation,
    DegreeTooLow,
    DivergentLimit,
    DuplicateNodes,
    FactorMatchFailure,
    NonRepresentableScale,
    RankViolation,
    UnsupportedRank,
)
from bordercx.polyring import CycloScalar, LaurentScalar, LinearForm, Poly, binomial
from bordercx.waring import (
    GAD,
    NF_POWER_PLUS,
    NF_POWER_TIMES,
    NF_TANGENT,
    NF_THREE_POWERS,
    NF_TWO_POWERS,
    ExactRB,
    KumarExpr,
    ProductForm,
    SigmaLambdaSigma,
    WaringDecomposition,
    classify_bwr_normal_form,
    classify_kumar,
    deborder_waring,
    elementary_symmetric,
    essential_variables,
    gad_from_border,
    homogenize_sls,
    interpolate_decompositions,
    kumar_build,
    kumar_invert,
    kumar_product_build,
    monomial_border_decomposition,
    monomial_power_decomposition,
    newton_identity_check,
    power_sum,
    rb_deborder,
    two_product_border_extract,
)

from conftest import forms

E = LaurentScalar.eps
q = gmpy2.mpq


def lf(*c):
    return LinearForm(c)


def var(i, n):
    return LinearForm.basis(i, n)


# ---------------------------------------------------------------- symmetric functions


def test_elementary_and_power_sums():
    x, y = var(0, 2), var(1, 2)
    X, Y = x.to_poly(), y.to_poly()
    assert elementary_symmetric([x, y], 1) == X + Y
    assert elementary_symmetric([x, y], 2) == X * Y
    assert elementary_symmetric([x, -x, y], 2) == -(X * X)
    assert elementary_symmetric([x, y], 0) == Poly.const(1, 2)
    assert power_sum([x, y], 2) == X * X + Y * Y
    assert power_sum([x, -x], 3).is_zero()
    z3 = CycloScalar.zeta(3)
    assert power_sum([x, x.scale(z3), x.scale(z3 ** 2)], 3) == (X ** 3).scale(3)


@given(st.lists(forms(n=3, lo=-1, hi=1), min_size=4, max_size=4), st.integers(1, 4))
def test_newton_identities_random(fs, k):
    assert newton_identity_check(fs, k)


# ---------------------------------------------------------------- Kumar


def test_kumar_single_power():
    d = 4
    dec = WaringDecomposition.of_powers(d, [var(0, 1)])
    k = kumar_build(dec, border=False)
    assert k.m == d
    assert k.expand() == Poly.var(0, 1) ** d


def test_kumar_sum_of_squares_roundtrip():
    dec = WaringDecomposition.of_powers(2, [var(0, 2), var(1, 2)])
    k = kumar_build(dec)
    assert k.m == 4
    assert k.limit() == dec.expand()
    inv = kumar_invert(k, 2)
    assert isinstance(inv, WaringDecomposition)
    assert len(inv) <= 4
    assert inv.limit() == dec.expand()


def test_kumar_empty():
    k = kumar_build(WaringDecomposition(3, [], []))
    assert k.m == 0
    assert k.expand().is_zero()


def test_kumar_nonrepresentable_scale():
    with pytest.raises(NonRepresentableScale):
        kumar_build(WaringDecomposition(3, [var(0, 1)], [2]))
    with pytest.raises(NonRepresentableScale):
        kumar_build(WaringDecomposition(3, [var(0, 1)], [E(-1)]))
    # -8 is a cube up to the root of unity -1
    k = kumar_build(WaringDecomposition(3, [var(0, 1)], [-8]))
    assert k.limit() == (Poly.var(0, 1) ** 3).scale(-8)


def test_kumar_product():
    n = 3
    x, y, z = var(0, n), var(1, n), var(2, n)
    assert kumar_product_build([x]).limit() == x.to_poly()
    assert kumar_product_build([x, y]).limit() == x.to_poly() * y.to_poly()
    assert kumar_product_build([x, x, x]).limit() == x.to_poly() ** 3
    pf = kumar_invert(kumar_product_build([x, y, z]), 3)
    assert isinstance(pf, ProductForm)
    assert pf.expand() == x.to_poly() * y.to_poly() * z.to_poly()
    with pytest.raises(ValueError):
        kumar_product_build([x, LinearForm.zero(n)])


def test_classify_kumar():
    f = [var(0, 1)]
    assert classify_kumar(KumarExpr(E(2), f, 1)) == "Plus"
    assert classify_kumar(KumarExpr(3, f, 1)) == "Equal"
    assert classify_kumar(KumarExpr(E(-1) + 1, f, 1)) == "Minus"
    with pytest.raises(ValueError):
        classify_kumar(KumarExpr(0, f, 1))


def test_kumar_equal_regime_exact():
    # forms zeta^j * ell have e_1 = e_2 = 0, so e_3 = p_3 / 3
    ell = lf(1, 2)
    z = CycloScalar.zeta(3)
    k = KumarExpr(1, [ell.scale(z ** j) for j in range(3)], 2)
    dec = kumar_invert(k, 3)
    assert not dec.is_border()
    assert dec.expand() == ell.to_poly() ** 3


def test_kumar_linear_approximation_is_exact():
    # forms eps * l_i with eps-free l_i and alpha = eps^-d
    z = CycloScalar.zeta(2)
    fs = [lf(1, 0).scale(E(1)), lf(1, 0).scale(E(1, z))]
    k = KumarExpr(E(-2, -1), fs, 2)
    dec = kumar_invert(k, 2)
    assert not dec.is_border()
    assert dec.expand() == Poly.var(0, 2) ** 2


def test_kumar_root_of_unity_filter():
    for d in (2, 3, 6):
        z = CycloScalar.zeta(d)
        ell = lf(E(1, 2) + 1, E(-1), CycloScalar.zeta(6))
        fs = [ell.scale(z ** j) for j in range(d)]
        for j in range(1, d):
            assert elementary_symmetric(fs, j).is_zero()
        assert elementary_symmetric(fs, d) == fs[-1].to_poly().pow(d).scale((-1) ** (d - 1))


def test_kumar_invert_not_homogeneous():
    from bordercx.errors import NotHomogeneousLimit

    k = KumarExpr(1, [var(0, 1)], 1)
    with pytest.raises(NotHomogeneousLimit):
        kumar_invert(k, 2)


def _random_exact(rng, n, d, r):
    fs, sc = [], []
    roots = [1, -1, CycloScalar.zeta(3), CycloScalar.zeta(4), 2 ** d]
    for _ in range(r):
        c = [rng.randint(-2, 2) for _ in range(n)]
        if not any(c):
            c[0] = 1
        fs.append(LinearForm(c))
        sc.append(rng.choice(roots))
    return WaringDecomposition(d, fs, sc)


def test_kumar_roundtrip_random():
    rng = random.Random(5)
    for _ in range(15):
        n, d, r = rng.randint(1, 4), rng.randint(1, 5), rng.randint(1, 4)
        dec = _random_exact(rng, n, d, r)
        k = kumar_build(dec)
        inv = kumar_invert(k, d)
        assert len(inv) <= d * r
        assert inv.limit(nvars=n) == dec.expand()


def test_kumar_border_input():
    x, y = var(0, 2), var(1, 2)
    dec = WaringDecomposition(3, [x + y.scale(E(3)), x], [E(-3), E(-3, -1)])
    k = kumar_build(dec)
    assert k.limit() == (x.to_poly() ** 2 * y.to_poly()).scale(3)
    assert kumar_invert(k, 3).limit() == k.limit()
    with pytest.raises(ValueError):
        kumar_build(WaringDecomposition(3, [x.scale(E(-1))], [1]), border=False)


# ---------------------------------------------------------------- two products


def test_two_product_equal_inputs():
    a = [var(0, 2), var(1, 2)]
    assert len(two_product_border_extract(a, a, 1, 1, 1, 2)) == 0 or two_product_border_extract(a, a, 1, 1, 1, 2).limit().is_zero()


def _two_product_target(a, b, M, alpha, beta):
    n = a[0].nvars
    one = Poly.const(1, n)
    pa = Poly.const(alpha, n)
    for f in a:
        pa = pa * (one + f.to_poly().scale(E(1)))
    pb = Poly.const(beta, n)
    for f in b:
        pb = pb * (one + f.to_poly().scale(E(1)))
    return (pa - pb).shift_eps(-M).limit()


def test_two_product_degree_parts():
    n = 3
    x, y, z = var(0, n), var(1, n), var(2, n)
    # e_1 agrees, so M = 1 gives the degree-1 part plus nothing else
    a = [x, y]
    b = [x + z.scale(E(1)), y - z.scale(E(1))]
    sls = two_product_border_extract(a, b, 1, 1, 1, 2)
    assert sls.limit() == _two_product_target(a, b, 1, 1, 1)
    a = [x, y]
    b = [y, x + z.scale(E(1))]
    with pytest.raises(CongruenceViolation):
        two_product_border_extract(a, b, 3, 1, 1, 2)
    sls = two_product_border_extract(a, b, 1, 1, 1, 2)
    assert sls.limit() == _two_product_target(a, b, 1, 1, 1)
    assert len(sls) <= 2 * 2 * 2


def test_two_product_scalar_part():
    a = [var(0, 2)]
    alpha = 1 + E(1)
    sls = two_product_border_extract(a, a, 1, alpha, 1, 1)
    assert len(sls) <= 2 * 1 * 1 + 1
    assert sls.limit() == _two_product_target(a, a, 1, alpha, 1)


def test_two_product_rejects_poles():
    with pytest.raises(ValueError):
        two_product_border_extract([var(0, 1).scale(E(-1))], [var(0, 1)], 1)


# ---------------------------------------------------------------- monomials


def test_monomial_power_decomposition():
    X, Y = Poly.var(0, 2), Poly.var(1, 2)
    m = monomial_power_decomposition(1, 1)
    assert len(m) == 2 and m.expand() == X * Y
    m = monomial_power_decomposition(0, 3)
    assert len(m) == 1 and m.expand() == Y ** 3
    m = monomial_power_decomposition(1, 2)
    assert len(m) == 3 and m.expand() == X * Y * Y
    for a in range(5):
        for b in range(5):
            if a + b:
                m = monomial_power_decomposition(a, b)
                assert len(m) == max(a, b) + 1 or min(a, b) == 0
                assert m.expand() == X ** a * Y ** b if a and b else True


def test_monomial_border_decomposition():
    X, Y = Poly.var(0, 2), Poly.var(1, 2)
    m = monomial_border_decomposition(0, 4)
    assert len(m) == 1 and not m.is_border()
    for a, b in ((1, 3), (2, 2), (2, 5), (3, 3)):
        m = monomial_border_decomposition(a, b)
        assert len(m) == a + 1
        assert m.limit() == X ** a * Y ** b


# ---------------------------------------------------------------- essential variables, GAD


def test_essential_variables():
    P = [Poly.var(i, 4) for i in range(4)]
    assert essential_variables(P[0] * P[1] * P[2]) == 3
    assert essential_variables((P[0] + P[1]) ** 3) == 1
    assert essential_variables(P[0] * P[1] * P[2] + P[3] ** 3) == 4


def wild_example(d):
    """f_d as a six-term border decomposition; variables x0, x1, y0, y1, y2."""
    n = 5
    x0, x1, y0, y1, y2 = (var(i, n) for i in range(n))
    c = E(-1, q(1, d))
    fs = [x0 + y0.scale(E(1)), x0, x1 + y1.scale(E(1)), x1, x0 + x1 + y2.scale(E(1)), x0 + x1]
    sc = [c, -c, c, -c, c * 2, c * -2]
    return WaringDecomposition(d, fs, sc)


def wild_target(d):
    X0, X1, Y0, Y1, Y2 = (Poly.var(i, 5) for i in range(5))
    return X0 ** (d - 1) * Y0 + X1 ** (d - 1) * Y1 + ((X0 + X1) ** (d - 1) * Y2).scale(2)


def test_gad_on_six_term_example():
    d = 5
    g = gad_from_border(wild_example(d))
    X0, X1, Y0, Y1, Y2 = (Poly.var(i, 5) for i in range(5))
    got = sorted(repr(ell.to_poly() ** (d - r + 1) * gg) for ell, gg, r in g.summands)
    want = sorted(repr(p) for p in (X0 ** 4 * Y0, X1 ** 4 * Y1, ((X0 + X1) ** 4 * Y2).scale(2)))
    assert got == want
    assert all(r == 2 for _, _, r in g.summands)
    assert g.expand() == wild_target(d)


def test_gad_wild_low_degree():
    n = 5
    x0, x1, y0, y1, y2 = (var(i, n) for i in range(n))
    c = E(-1, q(1, 9))
    fs = [x0 + y0.scale(E(1)), x1 + y1.scale(E(1)), x0 + x1 + y2.scale(E(1)), x0 + x1.scale(2), x0.scale(2) + x1]
    dec = WaringDecomposition(3, fs, [c * 3, c * 3, c * 6, -c, -c])
    assert dec.limit() == wild_target(3)
    with pytest.raises(DegreeTooLow):
        gad_from_border(dec)


def test_gad_rank_one():
    ell = lf(1, 2, 3)
    g = gad_from_border(WaringDecomposition.of_powers(4, [ell]))
    assert len(g.summands) == 1 and g.summands[0][2] == 1
    assert g.expand() == ell.to_poly() ** 4


def test_gad_divergent():
    with pytest.raises(DivergentLimit):
        gad_from_border(WaringDecomposition(2, [var(0, 1)], [E(-1)]))


# ---------------------------------------------------------------- de-bordering


def test_deborder_rank_one():
    ell = lf(1, -1)
    out = deborder_waring(WaringDecomposition.of_powers(3, [ell]))
    assert len(out) == 1 and out.expand() == ell.to_poly() ** 3


def test_deborder_power_times_form():
    for d in (2, 3, 5):
        m = monomial_border_decomposition(1, d - 1)
        out = deborder_waring(m)
        assert not out.is_border()
        assert len(out) <= 2 * d
        assert out.expand() == m.limit()


@pytest.mark.slow
def test_deborder_six_term_example():
    d = 5
    out = deborder_waring(wild_example(d))
    assert len(out) <= 5 * binomial(10, 5)
    assert out.expand() == wild_target(d)


# ---------------------------------------------------------------- interpolation


def test_interpolate_constant_in_var():
    n = 2
    s = SigmaLambdaSigma(n, [(LaurentScalar.of(1), var(1, n), LaurentScalar.of(0), 2)])
    out = interpolate_decompositions([(g, s) for g in (1, 2, 3)], 0, 2)
    assert out.limit() == Poly.var(1, n) ** 2


def test_interpolate_product_and_sum():
    n = 2
    X, Y = Poly.var(0, n), Poly.var(1, n)
    slices = []
    for g in (0, 1):
        slices.append((g, SigmaLambdaSigma(n, [(LaurentScalar.of(g), var(1, n), LaurentScalar.of(0), 1)])))
    assert interpolate_decompositions(slices, 0, 1).limit() == X * Y
    slices = []
    for g in (0, 1, 2):
        slices.append((g, SigmaLambdaSigma(n, [
            (LaurentScalar.of(1), var(1, n), LaurentScalar.of(0), 2),
            (LaurentScalar.of(g * g), LinearForm.zero(n), LaurentScalar.of(1), 0),
        ])))
    out = interpolate_decompositions(slices, 0, 2)
    assert out.limit() == X * X + Y * Y
    assert len(out) <= 2 * 3 ** 3


def test_interpolate_duplicate_nodes():
    s = SigmaLambdaSigma(1, [])
    with pytest.raises(DuplicateNodes):
        interpolate_decompositions([(1, s), (1, s)], 0, 1)


# ---------------------------------------------------------------- restricted binomials


def test_rb_exact_inputs():
    x, y = var(0, 2), var(1, 2)
    out = rb_deborder([x, y], [x, x], 1)
    assert isinstance(out, ExactRB)
    assert out.expand() == x.to_poly() * y.to_poly() + x.to_poly() ** 2


def test_rb_vanishing_products():
    x, y = var(0, 2), var(1, 2)
    out = rb_deborder([x.scale(E(1)), y], [x, x.scale(E(2))], 1)
    assert isinstance(out, ExactRB)
    assert out.expand().is_zero()


@pytest.mark.parametrize("d", [2, 3])
def test_rb_rank_one_power(d):
    x, y = var(0, 2), var(1, 2)
    shifted = x + y.scale(E(1))
    lf_ = [shifted.scale(E(-1))] + [shifted] * (d - 1)
    lfr = [x.scale(E(-1, -1))] + [x] * (d - 1)
    out = rb_deborder(lf_, lfr, 1)
    target = (x.to_poly() ** (d - 1) * y.to_poly()).scale(d)
    assert out.max_exponent() <= 2 * d
    assert out.limit() == target
    assert homogenize_sls(out, d).limit() == target
    assert len(out) <= (2 * d * d + 1) * (d + 1) ** 3


def test_rb_rank_two():
    n = 3
    x, y, z = var(0, n), var(1, n), var(2, n)
    a1 = (x + z.scale(E(1))).scale(E(-1))
    lf_ = [a1, y + z.scale(E(1))]
    lfr = [x.scale(E(-1, -1)), y]
    out = rb_deborder(lf_, lfr, 2)
    X, Y, Z = (p.to_poly() for p in (x, y, z))
    target = X * Z + Z * Y
    assert out.limit() == target
    assert homogenize_sls(out, 2).limit() == target


def test_rb_errors():
    x, y, z = var(0, 3), var(1, 3), var(2, 3)
    with pytest.raises(RankViolation):
        rb_deborder([x, y], [x, y], 1)
    with pytest.raises(FactorMatchFailure):
        rb_deborder([x.scale(E(-1)), y], [z.scale(E(-1, -1)), y], 2)


# ---------------------------------------------------------------- normal forms


def test_normal_forms():
    n = 3
    x, y, z = var(0, n), var(1, n), var(2, n)
    X, Y, Z = (p.to_poly() for p in (x, y, z))
    one = Poly.const(1, n)
    assert classify_bwr_normal_form(GAD(4, [(x, one, 1), (y, one, 1)])) == NF_TWO_POWERS
    assert classify_bwr_normal_form(GAD(4, [(x, Y, 2)])) == NF_POWER_TIMES
    assert classify_bwr_normal_form(GAD(4, [(x, one, 1), (y, one, 1), (z, one, 1)])) == NF_THREE_POWERS
    assert classify_bwr_normal_form(GAD(4, [(x, one, 1), (y, Z, 2)])) == NF_POWER_PLUS
    assert classify_bwr_normal_form(GAD(4, [(x, X * Y + Z * Z, 3)])) == NF_TANGENT
    with pytest.raises(UnsupportedRank):
        classify_bwr_normal_form(GAD(4, [(x, Y * Y + Z * Z, 3)]))
    with pytest.raises(UnsupportedRank):
        classify_bwr_normal_form(GAD(4, [(x, one, 1)] * 4))


def test_normal_form_from_border_limit():
    m = monomial_border_decomposition(1, 3)
    assert classify_bwr_normal_form(gad_from_border(m)) == NF_POWER_TIMES


def test_json_roundtrip_shapes():
    dec = wild_example(3)
    assert WaringDecomposition.from_json(dec.to_json()).to_json() == dec.to_json()
    k = kumar_build(WaringDecomposition.of_powers(2, [lf(1, 1)]))
    assert KumarExpr.from_json(k.to_json()).to_json() == k.to_json()
    g = gad_from_border(wild_example(5))
    assert GAD.from_json(g.to_json()).expand() == g.expand()
