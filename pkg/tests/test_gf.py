import numpy as np
import pytest

from genus2.errors import FieldError
from genus2.gf import (
    FieldCtx,
    Poly,
    QuotientRing,
    field_make,
    find_root_in_quotient_field,
    hensel_root,
    is_irreducible,
    poly_factor,
    poly_roots,
)
from genus2.rng import Rng


def test_field_make_prime():
    F = field_make(5, 1)
    assert F.q == 5 and F.modulus is None


def test_field_make_rejects_composite():
    with pytest.raises(FieldError):
        field_make(4, 1)


def test_field_make_extension_modulus_irreducible():
    # GF(9): the modulus must have no root in GF(3) (brute force over 3 elements)
    F = field_make(3, 2, seed=7)
    base = field_make(3, 1)
    m = Poly(base, F.modulus)
    assert all(int(m.eval(c)) != 0 for c in range(3))
    assert is_irreducible(m)


def test_field_make_deterministic():
    a = field_make(3, 4, seed=11)
    b = field_make(3, 4, seed=11)
    assert a.modulus == b.modulus


def test_field_axioms_random_sampling():
    # a * a^-1 == 1 for >= 10^3 random nonzero elements, plus ring identities
    for F in (field_make(7), field_make(3, 2, seed=1), field_make(2, 3, seed=2)):
        rng = Rng(99)
        n = 1100
        a = np.array([1 + rng.randint(F.q - 1) for _ in range(n)], dtype=F.dtype)
        b = np.array([rng.randint(F.q) for _ in range(n)], dtype=F.dtype)
        c = np.array([rng.randint(F.q) for _ in range(n)], dtype=F.dtype)
        assert np.all(F.mul(a, F.inv(a)) == 1)
        assert np.all(F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c)))
        assert np.all(F.mul(a, b) == F.mul(b, a))
        assert np.all(F.add(b, F.neg(b)) == 0)


def test_frobenius_is_automorphism_of_each_order():
    for p, k in ((3, 2), (2, 3), (5, 4), (3, 4)):
        F = field_make(p, k, seed=5)
        rng = Rng(4)
        a = np.array([rng.randint(F.q) for _ in range(64)], dtype=F.dtype)
        b = np.array([rng.randint(F.q) for _ in range(64)], dtype=F.dtype)
        fa, fb = F.frob(a, 1), F.frob(b, 1)
        assert np.all(F.frob(F.add(a, b), 1) == F.add(fa, fb))
        assert np.all(F.frob(F.mul(a, b), 1) == F.mul(fa, fb))
        # order exactly k
        cur = a.copy()
        for _ in range(k):
            cur = F.frob(cur, 1)
        assert np.all(cur == a)
        if k > 1:
            one_step = F.frob(a, 1)
            assert not np.all(one_step == a)


def test_matmul_prime_field_matches_python():
    F = field_make(7)
    rng = Rng(3)
    A = F.rand_matrix(5, 4, rng)
    B = F.rand_matrix(4, 6, rng)
    C = F.matmul(A, B)
    for i in range(5):
        for j in range(6):
            s = sum(int(A[i, m]) * int(B[m, j]) for m in range(4)) % 7
            assert int(C[i, j]) == s


def test_matmul_extension_field_matches_poly_arithmetic():
    F = field_make(3, 2, seed=7)
    base = field_make(3)
    m = Poly(base, F.modulus)
    rng = Rng(5)
    A = F.rand_matrix(3, 3, rng)
    B = F.rand_matrix(3, 3, rng)
    C = F.matmul(A, B)

    def as_poly(v):
        return Poly(base, [v % 3, v // 3])

    for i in range(3):
        for j in range(3):
            acc = Poly.zero(base)
            for t in range(3):
                acc = acc.add(as_poly(int(A[i, t])).mul(as_poly(int(B[t, j])))) % m
            want = sum(c * 3**e for e, c in enumerate((acc % m).coeffs))
            assert int(C[i, j]) == want


def test_poly_divmod_roundtrip():
    F = field_make(5)
    rng = Rng(8)
    for _ in range(50):
        a = Poly(F, [rng.randint(5) for _ in range(rng.randint(8) + 1)])
        b = Poly(F, [rng.randint(5) for _ in range(rng.randint(5) + 1)])
        if b.is_zero():
            continue
        q, r = a.divmod(b)
        assert q.mul(b).add(r) == a
        assert r.degree < b.degree


def test_factor_paper_quartic_is_irreducible():
    # x^4+x^3+x^2+1 over GF(3) stays in one piece
    F = field_make(3)
    f = Poly(F, [1, 0, 1, 1, 1])
    fac = poly_factor(f)
    assert fac == [(f, 1)]
    assert is_irreducible(f)


def test_factor_x_squared():
    F = field_make(5)
    f = Poly(F, [0, 0, 1])
    assert poly_factor(f) == [(Poly(F, [0, 1]), 2)]


def test_factor_x4_plus_1_gf5_vs_bruteforce_quadratics():
    # oracle: exhaustive scan of monic quadratic divisors mod 5
    F = field_make(5)
    f = Poly(F, [1, 0, 0, 0, 1])
    divisors = []
    for b in range(5):
        for c in range(5):
            g = Poly(F, [c, b, 1])
            if (f % g).is_zero():
                divisors.append(g)
    fac = poly_factor(f)
    assert sorted(h.coeffs for h, m in fac for _ in range(m)) == sorted(
        g.coeffs for g in divisors
    )
    prod = Poly.one(F)
    for h, m in fac:
        for _ in range(m):
            prod = prod.mul(h)
    assert prod == f


def test_factor_remultiplies_random():
    for p, k in ((2, 1), (3, 1), (5, 1), (3, 2)):
        F = field_make(p, k, seed=1)
        rng = Rng(p * 10 + k)
        for trial in range(25):
            cs = [rng.randint(F.q) for _ in range(rng.randint(9) + 2)]
            f = Poly(F, cs)
            if f.degree < 1:
                continue
            fac = poly_factor(f, seed=trial)
            prod = Poly.const(F, f.lc())
            for h, m in fac:
                assert is_irreducible(h)
                for _ in range(m):
                    prod = prod.mul(h)
            assert prod == f


def test_roots_x2_plus_1():
    base = field_make(3)
    f = Poly(base, [1, 0, 1])
    ext = field_make(3, 2, seed=7)
    rs = poly_roots(f, ext)
    assert len(rs) == 2
    for r in rs:
        assert int(f.eval(ext.asarray(r)) if False else Poly(ext, f.coeffs).eval(r)) == 0
        # r^2 = -1 in the extension
        assert int(ext.mul(r, r)) == int(ext.neg(1))
    assert poly_roots(f, base) == []


def test_roots_linear():
    F = field_make(7)
    assert poly_roots(Poly(F, [6, 1])) == [1]


def test_quotient_ring_inverse():
    F = field_make(3)
    m = Poly(F, [1, 0, 1]).mul(Poly(F, [1, 0, 1]))  # (x^2+1)^2
    K = QuotientRing(F, m)
    rng = Rng(2)
    for _ in range(30):
        a = K.rand(rng)
        if not K.is_unit(a):
            continue
        assert K.eq(K.mul(a, K.inv(a)), K.one())


def test_find_root_in_quotient_field():
    # x^2+1 has roots in GF(3)[x]/(x^2+x+2) since both define GF(9)
    F = field_make(3)
    g = Poly(F, [1, 0, 1])
    m = Poly(F, [2, 1, 1])
    r = find_root_in_quotient_field(g, m, seed=0)
    assert r is not None
    K = QuotientRing(F, m)
    assert K.is_zero(K.eval_poly(g, r))
    # and no roots where there are none: deg-2 irreducible over a deg-3 field
    m3 = Poly(F, [1, 2, 0, 1])
    assert is_irreducible(m3)
    assert find_root_in_quotient_field(g, m3, seed=0) is None


def test_hensel_root_in_local_quotient():
    # root of x^2+1 inside GF(3)[x]/((x^2+x+2)^2)
    F = field_make(3)
    g = Poly(F, [1, 0, 1])
    a = Poly(F, [2, 1, 1])
    r = hensel_root(g, a, 2, seed=0)
    assert r is not None
    K = QuotientRing(F, a.mul(a))
    assert K.is_zero(K.eval_poly(g, r))


def test_big_characteristic_rejected():
    with pytest.raises(FieldError):
        field_make(2305843009213693951 * 2 + 1, 1)  # even, not prime anyway
    with pytest.raises(FieldError):
        FieldCtx(2**61 + 20 + 9)  # > P_LIMIT (if prime) or composite
