import itertools

import numpy as np
import pytest

from genus2 import forms as fo
from genus2 import groups as gr
from genus2 import linalg as la
from genus2 import pencil as pe
from genus2 import pfaffian as pf
from genus2.errors import UnsupportedStructureError
from genus2.gf import Poly, field_make
from genus2.rng import Rng

F3 = field_make(3)
F5 = field_make(5)


def heisenberg_group(F, m_poly):
    from tests.test_forms import heisenberg_forms

    return gr.group_from_forms(heisenberg_forms(F, m_poly))


def sloped_system(F, f):
    return fo.hyperbolic_pair(F, F.eye(f.degree), la.companion(F, f))


def random_group(F, d, e, rng, field_centroid=False):
    while True:
        M = F.zeros((e, d, d))
        for t in range(e):
            for i in range(d):
                for j in range(i + 1, d):
                    v = rng.randint(F.q)
                    M[t, i, j] = v
                    M[t, j, i] = F.neg(v)
        G = gr.group_from_forms(fo.SystemOfForms(F, M))
        if not field_centroid:
            return G
        # mirror the generator protocol: redraw local-ring centroids
        S_red = fo.nondegenerate_reduction(G.S)[0]
        if S_red.d == 0:
            continue
        try:
            if fo.centroid(S_red).is_field:
                return G
        except Exception:
            continue


def scrambled_twin(G, rng):
    """H isomorphic to G by a planted (g, h) twist of the presentation."""
    F = G.S.F
    g = la.rand_invertible(F, G.d, rng)
    while True:
        h = F.rand_matrix(G.e, G.e, rng)
        if la.is_invertible(F, h):
            break
    S2 = G.S.recombine(h.T.copy()).transform(g)
    return gr.group_from_forms(S2)


def test_group_arithmetic_axioms():
    rng = Rng(1)
    a = Poly(F3, [1, 0, 1])
    G = heisenberg_group(F3, a)
    els = [G.element([rng.randint(3) for _ in range(G.d)],
                     [rng.randint(3) for _ in range(G.e)]) for _ in range(12)]
    for x in els[:6]:
        assert G.mul(x, G.inv(x)) == G.identity()
        assert G.mul(G.identity(), x) == x
    for x, y, z in zip(els, els[4:], els[8:]):
        assert G.mul(G.mul(x, y), z) == G.mul(x, G.mul(y, z))
    # exponent p
    for x in els[:6]:
        acc = G.identity()
        for _ in range(3):
            acc = G.mul(acc, x)
        assert acc == G.identity()


def test_forms_group_roundtrip():
    rng = Rng(2)
    for _ in range(5):
        G = random_group(F3, 4, 2, rng)
        S2 = gr.forms_from_group(G)
        assert S2 == G.S


def test_heisenberg_quotient_strange_example():
    a1 = Poly(F3, [1, 0, 1, 1, 1])  # x^4+x^3+x^2+1
    L = np.zeros((2, 4), dtype=np.int64)
    L[0, 0] = 1
    L[1, 1] = 1  # span{1, x}
    G1 = gr.heisenberg_quotient(a1, 1, L)
    assert G1.order == 3**10
    assert G1.d == 8 and G1.e == 2
    assert fo.is_fully_nondegenerate(G1.S)


def test_heisenberg_quotient_c2_is_sloped_with_quartic_pfaffian():
    a = Poly(F3, [1, 0, 1])
    L = np.zeros((2, 4), dtype=np.int64)
    L[0, 2] = 1
    L[1, 3] = 1  # span{x^2, x^3}
    G = gr.heisenberg_quotient(a, 2, L)
    dec = pe.orth_decompose(G.S)
    assert all(b.kind == "sloped" for b in dec.blocks)
    pfs = [pf.pfaffian(b, F=F3) for b in dec.blocks]
    assert sum(f.n for f in pfs) == 4


def test_flat_group():
    for m in (1, 2):
        G = gr.flat_group(m, 3)
        assert G.order == 3 ** (2 * m + 3)
        dec = pe.orth_decompose(G.S)
        assert len(dec.blocks) == 1
        assert dec.blocks[0].kind == "flat" and dec.blocks[0].m == m


def test_verify_identity_and_corruption():
    rng = Rng(3)
    G = random_group(F3, 4, 2, rng)
    ident = gr.GroupMap(F3.eye(4), F3.zeros((4, 2)), F3.eye(2))
    assert gr.verify(G, G, ident)
    bad = gr.GroupMap(F3.eye(4), F3.zeros((4, 2)), F3.eye(2))
    bad.X = bad.X.copy()
    bad.X[0, 1] = 1
    # a random corruption should generically break the relations
    assert not gr.verify(G, G, bad) or la.mat_eq(
        la.matmul(F3, bad.X, G.S.forms[0], bad.X.T.copy()), G.S.forms[0])


def test_isoclinism_self_and_planted():
    rng = Rng(4)
    f = Poly(F3, [1, 2, 0, 1])
    G = gr.group_from_forms(sloped_system(F3, f))
    assert gr.isoclinism_test(G, G) is not None
    for _ in range(3):
        H = scrambled_twin(G, rng)
        gmap = gr.isoclinism_test(G, H)
        assert gmap is not None
        assert gr.verify(G, H, gmap)


def test_isoclinism_through_extension_field():
    # genus-1 groups over GF(9) presented over GF(3): the residue rewriting
    # and witness pullback are exercised end to end
    rng = Rng(5)
    a = Poly(F3, [1, 0, 1])
    G = heisenberg_group(F3, a)
    H = scrambled_twin(G, rng)
    gmap = gr.isoclinism_test(G, H)
    assert gmap is not None
    assert gr.verify(G, H, gmap)


def test_isomorphism_planted_protocol():
    # random skew pair, planted (g, h) twist, recover and verify
    rng = Rng(6)
    for p, d in ((3, 4), (5, 4), (3, 6)):
        F = field_make(p)
        G = random_group(F, d, 2, rng, field_centroid=True)
        H = scrambled_twin(G, rng)
        gmap = gr.isomorphism_test(G, H)
        assert gmap is not None
        assert gr.verify(G, H, gmap)


def test_isomorphism_identity():
    rng = Rng(7)
    G = random_group(F5, 4, 2, rng, field_centroid=True)
    gmap = gr.isomorphism_test(G, G)
    assert gmap is not None and gr.verify(G, G, gmap)


def _brute_force_pseudo_isometric(SA, SB):
    """Exhaustive search over GL(d, q) x GL(2, q); tiny d and q only."""
    F = SA.F
    d = SA.d
    mats = []
    for entries in itertools.product(range(F.q), repeat=d * d):
        M = np.array(entries, dtype=np.int64).reshape(d, d)
        if la.is_invertible(F, M):
            mats.append(M)
    h2 = []
    for entries in itertools.product(range(F.q), repeat=4):
        M = np.array(entries, dtype=np.int64).reshape(2, 2)
        if la.is_invertible(F, M):
            h2.append(M)
    for phi in mats:
        for hh in h2:
            w = fo.Witness(phi, hh, 0)
            if fo.verify_witness(SA, SB, w):
                return True
    return False


def test_bruteforce_agreement_tiny():
    # d <= 3 over GF(2): bimap-level test vs exhaustive GL x GL
    F2 = field_make(2)
    rng = Rng(8)
    for trial in range(6):
        d = 2 + rng.randint(2)
        A = F2.zeros((2, d, d))
        B = F2.zeros((2, d, d))
        for M in (A, B):
            for t in range(2):
                for i in range(d):
                    for j in range(i + 1, d):
                        v = rng.randint(2)
                        M[t, i, j] = v
                        M[t, j, i] = v
        SA = fo.SystemOfForms(F2, A)
        SB = fo.SystemOfForms(F2, B)
        got = gr.pseudo_isometry_test(SA, SB)
        want = _brute_force_pseudo_isometric(SA, SB)
        assert (got is not None) == want
        if got is not None:
            assert fo.verify_witness(SA, SB, got)


def test_central_automorphisms():
    G = heisenberg_group(F3, Poly(F3, [1, 1]))  # H_1(GF(3)): d=2, e=1
    autos = gr.central_automorphisms(G)
    assert len(autos) == G.d * G.e == 2
    for a in autos:
        assert gr.verify(G, G, a)


def test_pseudo_isometry_group_symplectic_sanity():
    # d = 2, e = 1 over GF(3): the full group GL(2, 3) of order 48
    S = fo.SystemOfForms(F3, np.array([[0, 1], [2, 0]], dtype=np.int64))
    gens = gr.pseudo_isometry_group(S)
    mats = [w.phi for w in gens]
    order = _closure_order(F3, mats, 2)
    assert order == 48


def _closure_order(F, mats, n):
    seen = {tuple(F.eye(n).reshape(-1).tolist())}
    frontier = [F.eye(n)]
    while frontier:
        nxt = []
        for A in frontier:
            for g in mats:
                B = F.matmul(A, g)
                k = tuple(B.reshape(-1).tolist())
                if k not in seen:
                    seen.add(k)
                    nxt.append(B)
        frontier = nxt
    return len(seen)


def test_pseudo_isometry_group_flat_full_gammal2_image():
    S = pe._canonical_flat_forms(F3, 1)
    gens = gr.pseudo_isometry_group(S)
    hats = [w.phi_hat for w in gens]
    order = _closure_order(F3, hats, 2)
    assert order == 48  # all of GL(2, 3)


def test_pseudo_isometry_group_exhaustive_order_gf2():
    # d = 4 sloped indecomposable over GF(2): generated order equals the
    # brute-force count of all pseudo-isometries
    F2 = field_make(2)
    a = Poly(F2, [1, 1, 1])  # irreducible quadratic
    S = fo.hyperbolic_pair(F2, F2.eye(2), la.companion(F2, a))
    gens = gr.pseudo_isometry_group(S)
    pairs = {}
    for w in gens:
        key = tuple(w.phi.reshape(-1).tolist()) + tuple(w.phi_hat.reshape(-1).tolist())
        pairs[key] = (w.phi, w.phi_hat)
    # closure on (phi, phi_hat) pairs
    ident = (F2.eye(4), F2.eye(2))
    seen = {tuple(ident[0].reshape(-1).tolist()) + tuple(ident[1].reshape(-1).tolist()): ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for (p1, h1) in frontier:
            for (p2, h2) in pairs.values():
                p3 = F2.matmul(p1, p2)
                h3 = F2.matmul(h1, h2)
                k = tuple(p3.reshape(-1).tolist()) + tuple(h3.reshape(-1).tolist())
                if k not in seen:
                    seen[k] = (p3, h3)
                    nxt.append((p3, h3))
        frontier = nxt
    # brute force count
    count = 0
    for entries in itertools.product(range(2), repeat=16):
        phi = np.array(entries, dtype=np.int64).reshape(4, 4)
        if not la.is_invertible(F2, phi):
            continue
        for entries2 in itertools.product(range(2), repeat=4):
            hh = np.array(entries2, dtype=np.int64).reshape(2, 2)
            if not la.is_invertible(F2, hh):
                continue
            if fo.verify_witness(S, S, fo.Witness(phi, hh, 0)):
                count += 1
    assert len(seen) == count


def test_isoclinism_rejects_local_ring_centroid():
    from tests.test_forms import heisenberg_forms

    S = heisenberg_forms(F3, Poly(F3, [0, 0, 1]))  # ring GF(3)[x]/(x^2)
    G = gr.group_from_forms(S)
    with pytest.raises(UnsupportedStructureError):
        gr.isoclinism_test(G, G)
