import numpy as np
import pytest

from genus2 import forms as fo
from genus2 import linalg as la
from genus2 import pencil as pe
from genus2 import pfaffian as pf
from genus2.gf import Poly, field_make, is_irreducible
from genus2.rng import Rng

F3 = field_make(3)
F5 = field_make(5)
F9 = field_make(3, 2, seed=7)


def sloped_block(F, f):
    n = f.degree
    return fo.hyperbolic_pair(F, F.eye(n), la.companion(F, f))


def random_congruence(S, rng):
    P = la.rand_invertible(S.F, S.d, rng)
    return S.transform(P)


def test_pfaffian_1x1():
    w = 2
    f = pf.pfaffian((F5.asarray([[1]]), F5.asarray([[w]])), F=F5)
    assert f.coeffs == (1, w)  # x + w y


def test_pfaffian_companion():
    # Psi1 = I, Psi2 = C(a^c): det(xI + yC) is the homogenization of a^c
    # evaluated by expanding the determinant by hand for n <= 4
    for coeffs in ([1, 1], [2, 0, 1], [1, 2, 0, 1]):
        a = Poly(F3, coeffs)
        n = a.degree
        C = la.companion(F3, a)
        f = pf.pfaffian((F3.eye(n), C), F=F3)
        # oracle: cofactor expansion of det(x I + y C) over the polynomial ring
        import itertools

        acc = {}
        M = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                xs = 1 if i == j else 0
                M[i][j] = (xs, int(C[i, j]))
        total = [0] * (n + 1)
        for perm in itertools.permutations(range(n)):
            sign = 1
            for i in range(n):
                for j in range(i + 1, n):
                    if perm[i] > perm[j]:
                        sign = -sign
            # product of (x * xs + y * c): track monomials by y-degree
            prod = [1] + [0] * n
            for i in range(n):
                xs, c = M[i][perm[i]]
                new = [0] * (n + 1)
                for t in range(n):
                    if prod[t]:
                        new[t] = (new[t] + prod[t] * xs) % 3
                        new[t + 1] = (new[t + 1] + prod[t] * c) % 3
                prod = new
            for t in range(n + 1):
                total[t] = (total[t] + sign * prod[t]) % 3
        # total[t] is the coefficient of x^(n-t) y^t
        want = pf.BinaryForm(F3, n, tuple(total)).monicized()
        assert f == want


def test_pfaffian_flat_block_zero():
    rng = Rng(5)
    S = random_congruence(pe._canonical_flat_forms(F3, 2), rng)
    dec = pe.orth_decompose(S)
    f = pf.pfaffian(dec.blocks[0], F=F3)
    assert f.is_zero()


def test_act_identity_and_swap():
    f = pf.BinaryForm(F3, 1, (1, 0))  # x
    assert pf.act(f, pf.GammaL2.identity()) == f
    swap = pf.GammaL2(((0, 1), (1, 0)), 0)
    assert pf.act(f, swap).coeffs == (0, 1)  # y


def test_act_substitution_example():
    # f = x^2 + y^2 over GF(3), g = [[1,1],[0,1]]: f -> x^2 + 2xy + 2y^2
    f = pf.BinaryForm(F3, 2, (1, 0, 1))
    g = pf.GammaL2(((1, 1), (0, 1)), 0)
    assert pf.act(f, g).coeffs == (1, 2, 2)


def test_act_is_right_group_action():
    rng = Rng(9)
    for F in (F3, F9):
        for _ in range(25):
            n = 2 + rng.randint(3)
            f = pf.BinaryForm(F, n, tuple(rng.randint(F.q) for _ in range(n + 1)))
            gs = []
            for _k in range(2):
                while True:
                    g = ((rng.randint(F.q), rng.randint(F.q)),
                         (rng.randint(F.q), rng.randint(F.q)))
                    det = int(F.sub(F.mul(g[0][0], g[1][1]), F.mul(g[0][1], g[1][0])))
                    if det:
                        break
                gs.append(pf.GammaL2(g, rng.randint(F.k)))
            g1, g2 = gs
            lhs = pf.act(pf.act(f, g1), g2)
            rhs = pf.act(f, g1.compose(g2, F))
            assert lhs == rhs


def test_proj_equal():
    f = pf.BinaryForm(F5, 2, (1, 2, 3))
    assert pf.proj_equal(f, f) == 1
    g = pf.BinaryForm(F5, 2, (2, 4, 1))
    assert pf.proj_equal(g, f) == 2
    h = pf.BinaryForm(F5, 2, (1, 0, 0))
    k = pf.BinaryForm(F5, 2, (0, 1, 0))
    assert pf.proj_equal(h, k) is None


def test_pfaffian_match_identity():
    fs = [pf.BinaryForm(F3, 1, (1, 0)), pf.BinaryForm(F3, 2, (1, 0, 1))]
    sigma = pf.pfaffian_match(fs, fs, pf.GammaL2.identity())
    assert sigma == (0, 1)


def test_pfaffian_match_planted_shuffle():
    rng = Rng(12)
    fs = [pf.BinaryForm(F5, 1, (1, 2)), pf.BinaryForm(F5, 1, (1, 3)),
          pf.BinaryForm(F5, 2, (1, 1, 2))]
    g = pf.GammaL2(((2, 1), (1, 1)), 0)
    twisted = [pf.act(f, g) for f in fs]
    order = [2, 0, 1]
    shuffled = [twisted[i] for i in order]
    sigma = pf.pfaffian_match(fs, shuffled, g)
    assert sigma is not None
    for i in range(3):
        assert pf.proj_equal(pf.act(fs[i], g), shuffled[sigma[i]]) is not None


def test_lift_sloped_identity_and_planted():
    rng = Rng(13)
    a = Poly(F3, [1, 0, 1])
    S = sloped_block(F3, a)
    phi = pf.lift_sloped(S, S, pf.GammaL2.identity())
    assert fo.verify_witness(S, S, fo.Witness(phi, F3.eye(2), 0))
    # planted: B = congruence-transform of the alpha-twisted A
    for _ in range(5):
        alpha = pf.GammaL2(((1, 1), (2, 1)), 0)
        twisted = pf._twisted_system(S, alpha)
        B = random_congruence(twisted, rng)
        phi = pf.lift_sloped(S, B, alpha)
        w = fo.Witness(phi, alpha.matrix(F3), alpha.tau)
        assert fo.verify_witness(S, B, w)


def test_flat_lift_examples():
    for alpha in (pf.GammaL2.identity(),
                  pf.GammaL2(((2, 0), (0, 2)), 0),
                  pf.GammaL2(((0, 1), (1, 0)), 0)):
        phi = pf.flat_lift(alpha, 2, F3)
        S = pe._canonical_flat_forms(F3, 2)
        assert fo.verify_witness(S, S, fo.Witness(phi, alpha.matrix(F3), alpha.tau))


def test_small_field_test_self():
    a = Poly(F3, [1, 2, 0, 1])
    S = sloped_block(F3, a)
    w = pf.small_field_test(S, S)
    assert w is not None
    assert fo.verify_witness(S, S, w)


def test_small_field_test_planted_instances():
    rng = Rng(14)
    for F in (F3, F5):
        a_cands = [Poly(F, [1, 1]), Poly(F, [2, 0, 1]), Poly(F, [1, 2, 0, 1])]
        base = None
        for a in a_cands[:2]:
            blk = sloped_block(F, a)
            base = blk if base is None else base.central_sum(blk)
        base = base.central_sum(pe._canonical_flat_forms(F, 1))
        for trial in range(3):
            g = la.rand_invertible(F, base.d, rng)
            # random GL2 twist on the value side
            while True:
                h = F.rand_matrix(2, 2, rng)
                if la.is_invertible(F, h):
                    break
            SB = fo.SystemOfForms(F, np.stack(
                [base.recombine(h.T.copy()).forms[t] for t in range(2)])).transform(g)
            w = pf.small_field_test(base, SB)
            assert w is not None
            assert fo.verify_witness(base, SB, w)


def test_small_field_test_nonisometric_special_example():
    # L1 = diag(0, 1, C), L2 = diag(0, 0, C): same block dimensions but not
    # pseudo-isometric
    C = F3.zeros((2, 2))
    C[0, 1] = 1
    C[1, 0] = 2
    L1 = F3.zeros((4, 4))
    L1[1, 1] = 1
    L1[2:, 2:] = C
    L2 = F3.zeros((4, 4))
    L2[2:, 2:] = C
    S1 = fo.hyperbolic_pair(F3, F3.eye(4), L1)
    S2 = fo.hyperbolic_pair(F3, F3.eye(4), L2)
    d1 = pe.orth_decompose(S1)
    d2 = pe.orth_decompose(S2)
    assert d1.dimension_multiset() == d2.dimension_multiset()
    assert pf.small_field_test(S1, S2) is None
    assert pf.small_field_test(S2, S1) is None


def test_small_field_symmetry():
    rng = Rng(15)
    a = Poly(F3, [1, 1])
    b = Poly(F3, [2, 1])
    S1 = sloped_block(F3, a).central_sum(sloped_block(F3, b))
    S2 = random_congruence(S1, rng)
    w12 = pf.small_field_test(S1, S2)
    w21 = pf.small_field_test(S2, S1)
    assert (w12 is None) == (w21 is None)
    assert w12 is not None


def test_det_method_forward_invariance():
    # for constructed pseudo-isometries, twisted Pfaffian multisets match
    rng = Rng(16)
    trials = 0
    while trials < 20:
        a = Poly(F3, [rng.randint(3), rng.randint(3), 1])
        if not is_irreducible(a):
            continue
        trials += 1
        S = sloped_block(F3, a).central_sum(sloped_block(F3, Poly(F3, [1, 1])))
        alpha_g = None
        while alpha_g is None:
            h = ((rng.randint(3), rng.randint(3)), (rng.randint(3), rng.randint(3)))
            det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]) % 3
            if det:
                alpha_g = h
        alpha = pf.GammaL2(alpha_g, 0)
        twisted = pf._twisted_system(S, alpha)
        g = la.rand_invertible(F3, S.d, rng)
        SB = twisted.transform(g)
        # (g-ish, alpha) is a pseudo-isometry S -> SB; the matching must succeed
        decA = pe.orth_decompose(S)
        decB = pe.orth_decompose(SB)
        pfsA = [pf.pfaffian(b, F=F3) for b in decA.blocks if b.kind == "sloped"]
        pfsB = [pf.pfaffian(b, F=F3) for b in decB.blocks if b.kind == "sloped"]
        assert pf.pfaffian_match(pfsA, pfsB, alpha) is not None
