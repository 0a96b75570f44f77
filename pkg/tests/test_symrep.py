import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bordercx.errors import NotInvariant, OutOfRange, SizeMismatch
from bordercx.polyring import CycloScalar, Poly
from bordercx.symrep import (
    Partition,
    SymrepContext,
    b_term,
    characterize_by_stabilizer,
    format_scan_subscript,
    format_scan_tsv,
    frequency,
    lr_coeff,
    mn_character,
    multi_lr_coeff,
    obstruction_scan,
    orbit_mult_P11,
    orbit_mult_powersum,
    p_polynomial,
    partitions,
    pieri_precedes,
    plethysm_coeff,
    reduced_obstruction_check,
    rectangle,
    stabilizer_generators,
    strip_columns,
    verify_stabilizer,
    z_factor,
)


def hook_dim(lam):
    lam = Partition(lam)
    lt = lam.transpose()
    prod = 1
    for i, row in enumerate(lam):
        for j in range(row):
            prod *= row - j + lt[j] - i - 1
    return math.factorial(lam.size) // prod


def weyl_dim(lam, n):
    lam = [Partition(lam).part(i) for i in range(n)]
    num = den = 1
    for i in range(n):
        for j in range(i + 1, n):
            num *= lam[i] - lam[j] + j - i
            den *= j - i
    return num // den


def test_partition_basics():
    assert Partition((4, 4, 3)).transpose() == (3, 3, 3, 2)
    assert frequency((3, 3, 2)) == (0, 1, 2)
    assert rectangle(2, 3) == (3, 3)
    assert Partition((5, 1)) + rectangle(3, 2) == (7, 3, 2)
    with pytest.raises(ValueError):
        Partition((1, 2))
    assert sum(1 for _ in partitions(8)) == 22


def test_pieri_precedes():
    assert pieri_precedes((2, 1), (3, 1))
    assert not pieri_precedes((1, 1), (3, 3))
    assert pieri_precedes((3, 2), (3, 2))


def test_mn_character_examples():
    assert mn_character((4,), (2, 1, 1)) == 1
    assert mn_character((1, 1, 1), (2, 1)) == -1
    assert mn_character((1, 1, 1, 1), (3, 1)) == 1
    assert mn_character((2, 1), (1, 1, 1)) == 2
    with pytest.raises(SizeMismatch):
        mn_character((2,), (1,))


@pytest.mark.parametrize("n", range(1, 7))
def test_character_orthogonality(n):
    parts = list(partitions(n))
    for a in parts:
        assert mn_character(a, [1] * n) == hook_dim(a)
        for b in parts:
            s = sum(mn_character(lam, a) * mn_character(lam, b) for lam in parts)
            assert s == (z_factor(a) if a == b else 0)


def test_plethysm_examples():
    assert plethysm_coeff((6,), 2, 3) == 1
    assert plethysm_coeff((5, 1), 2, 3) == 0
    assert plethysm_coeff((5, 5, 5, 3, 3), 7, 3) == 1
    assert plethysm_coeff((8, 8, 4, 4), 8, 3) == 2
    with pytest.raises(SizeMismatch):
        plethysm_coeff((5,), 2, 3)


@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_plethysm_routes_agree(outer, inner, data):
    parts = list(partitions(outer * inner))
    mu = data.draw(st.sampled_from(parts))
    assert plethysm_coeff(mu, outer, inner) == plethysm_coeff(mu, outer, inner, method="powersum")


def test_plethysm_outer_one():
    for delta in range(1, 7):
        for mu in partitions(delta):
            assert plethysm_coeff(mu, 1, delta) == (1 if mu == (delta,) else 0)


@pytest.mark.parametrize("n,d,delta", [(2, 3, 2), (3, 2, 3), (3, 3, 2), (2, 4, 3), (4, 2, 2)])
def test_plethysm_dimension_count(n, d, delta):
    ctx = SymrepContext()
    lhs = sum(ctx.plethysm(mu, d, delta) * weyl_dim(mu, n) for mu in partitions(d * delta, max_len=n))
    inner_dim = math.comb(n + delta - 1, delta)
    assert lhs == math.comb(inner_dim + d - 1, d)


@pytest.mark.parametrize("d,c", [(2, 2), (2, 4), (3, 2), (4, 2)])
def test_column_stripping(d, c):
    block = rectangle(d, c)
    ctx = SymrepContext()
    for i in range(0, 4):
        for nu in partitions(d * i, max_len=d):
            assert ctx.plethysm(nu + block, d, i + c) == ctx.plethysm(nu, d, i)


def test_lr_examples():
    assert lr_coeff((3, 1), (3, 1), ()) == 1
    assert lr_coeff((2, 1), (1,), (1, 1)) == 1
    assert lr_coeff((3, 2, 1), (2, 1), (2, 1)) == 2
    assert lr_coeff((2, 2), (2,), (1, 1)) == 0
    with pytest.raises(SizeMismatch):
        lr_coeff((2,), (1,), (2,))


@pytest.mark.parametrize("a,b", [((2, 1), (1,)), ((2,), (2, 1)), ((2, 1), (2, 1)), ((3,), (1, 1, 1))])
def test_lr_induction_dimension(a, b):
    n = Partition(a).size + Partition(b).size
    lhs = sum(lr_coeff(lam, a, b) * hook_dim(lam) for lam in partitions(n))
    assert lhs == math.comb(n, Partition(a).size) * hook_dim(a) * hook_dim(b)
    assert all(lr_coeff(lam, a, b) == lr_coeff(lam, b, a) for lam in partitions(n))


def test_multi_lr():
    for d in (3, 4, 5):
        kappa = (5 * d - 1, 1)
        assert multi_lr_coeff(kappa, [(2 * d,), (3 * d,)]) == 1
        assert multi_lr_coeff(kappa, [(5 * d,)]) == 0
    assert multi_lr_coeff((2, 1), [(1,), (1,), (1,)]) == 2


def test_orbit_mult_examples():
    assert orbit_mult_P11((8, 8, 4, 4), 3, 8) == 1
    assert orbit_mult_P11((10, 6, 4, 4), 3, 8) == 3
    assert orbit_mult_P11((3,), 3, 1) == 2
    with pytest.raises(OutOfRange):
        orbit_mult_P11((1, 1, 1, 1, 1, 1), 3, 2)


def test_orbit_can_exceed_ambient_plethysm():
    # the orbit ring counts more than the degree-D part of Sym(Sym^d)
    assert orbit_mult_P11((3,), 3, 1) == 2 > plethysm_coeff((3,), 1, 3) == 1


def test_orbit_mult_powersum_examples():
    assert orbit_mult_powersum((14, 1), 3, 5, 4) == 5
    for d in (2, 3, 4):
        for m in (1, 2, 3):
            assert orbit_mult_powersum((d,), d, 1, m) == 1
        assert orbit_mult_powersum((2 * d,), d, 2, 2) == 2


def test_rho_with_too_many_rows_contributes_zero():
    assert b_term((14, 1), (1, 1, 1, 1, 1), 3, 5) == 0


def test_strip_columns():
    lam = Partition((14, 1)) + rectangle(4, 30)
    assert strip_columns(lam, 3) == ((14, 1), 30)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_reduced_obstruction(d):
    assert reduced_obstruction_check(d) == (4, 5)


def test_reduced_obstruction_domain():
    with pytest.raises(OutOfRange):
        reduced_obstruction_check(2)


def test_scan_small():
    assert obstruction_scan(3, 7) == []
    rows = obstruction_scan(3, 8)
    assert {(tuple(l), a, b) for l, a, b in rows} == {((8, 8, 4, 4), 2, 1), ((10, 6, 4, 4), 4, 3)}
    assert format_scan_tsv(rows).splitlines()[0] == "(8,8,4,4)\t2\t1"
    assert format_scan_subscript(rows).startswith("(8,8,4,4)_{2>1}")


# ---------------------------------------------------------------- stabilizers


@pytest.mark.parametrize("d,r,s", [(3, 1, 1), (3, 2, 3), (4, 1, 2), (5, 3, 1)])
def test_generators_stabilize(d, r, s):
    for g in stabilizer_generators(d, r, s):
        assert verify_stabilizer(g, d, r, s)


def test_generic_diagonal_does_not_stabilize():
    d, r, s = 3, 1, 1
    n = 4
    g = [[CycloScalar.of(1 if i == j else 0) for j in range(n)] for i in range(n)]
    g[0][0] = CycloScalar.of(2)
    assert not verify_stabilizer(g, d, r, s)


def test_characterization():
    d, r, s = 3, 2, 2
    P = p_polynomial(d, r, s)
    assert characterize_by_stabilizer(P, d, r, s) == (1, 1)
    Px = p_polynomial(d, r, 0).with_nvars(d * r + s)
    assert characterize_by_stabilizer(Px.scale(2), d, r, s) == (2, 0)
    with pytest.raises(NotInvariant):
        characterize_by_stabilizer(Poly.var(0, d * r + s) ** d, d, r, s)
