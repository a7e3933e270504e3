import itertools

import numpy as np
import pytest

from genus2 import adjten as at
from genus2 import forms as fo
from genus2 import linalg as la
from genus2 import pencil as pe
from genus2 import pfaffian as pf
from genus2.gf import Poly, field_make
from genus2.rng import Rng

F3 = field_make(3)
F5 = field_make(5)


def sloped(F, f):
    return fo.hyperbolic_pair(F, F.eye(f.degree), la.companion(F, f))


def rand_gl2(F, rng):
    while True:
        h = F.rand_matrix(2, 2, rng)
        if la.is_invertible(F, h):
            return h


def rand_alt_pair(F, d, rng):
    M = F.zeros((2, d, d))
    for t in range(2):
        for i in range(d):
            for j in range(i + 1, d):
                v = rng.randint(F.q)
                M[t, i, j] = v
                M[t, j, i] = F.neg(v)
    return fo.SystemOfForms(F, M)


def test_slope_hyperbolic_pair():
    a = Poly(F5, [2, 1, 1])
    S = sloped(F5, a)
    s = at.slope(S)
    n = a.degree
    C = la.companion(F5, a)
    assert la.mat_eq(s[:n, :n], C)
    assert la.mat_eq(s[n:, n:], C.T)
    assert not np.any(s[:n, n:]) and not np.any(s[n:, :n])


def test_slope_requires_invertible():
    S = fo.SystemOfForms(F3, F3.zeros((2, 2, 2)))
    with pytest.raises(Exception):
        at.slope(S)


def test_conjugate_adjoints_identity_and_planted():
    rng = Rng(3)
    m = Poly(F3, [1, 0, 1]).mul(Poly(F3, [1, 0, 1]))
    s1 = la.companion(F3, m)
    res = at.conjugate_adjoints(F3, s1, s1)
    assert res is not None
    for _ in range(5):
        Q = la.rand_invertible(F3, 4, rng)
        s2 = la.matmul(F3, Q, s1, la.inv(F3, Q))
        res = at.conjugate_adjoints(F3, s1, s2)
        assert res is not None
        P, tau, beta = res
        B = la.poly_eval_mat(F3, beta, s2)
        assert la.mat_eq(la.matmul(F3, P, F3.frob(s1, tau), la.inv(F3, P)), B)


def test_conjugate_adjoints_across_irreducibles():
    # (x^2+1)^2 and (x^2+x+2)^2 generate conjugate centralizers
    a = Poly(F3, [1, 0, 1])
    b = Poly(F3, [2, 1, 1])
    s1 = la.companion(F3, a.mul(a))
    s2 = la.companion(F3, b.mul(b))
    res = at.conjugate_adjoints(F3, s1, s2)
    assert res is not None
    # mismatched block structures are rejected
    s3 = la.companion(F3, a)
    assert at.conjugate_adjoints(F3, s3, s2) is None


def test_tensor_ring_invariants():
    for coeffs, c in (([1, 0, 1], 1), ([1, 0, 1], 2), ([1, 2, 0, 1], 1)):
        a = Poly(F3, coeffs)
        ac = Poly.one(F3)
        for _ in range(c):
            ac = ac.mul(a)
        S = fo.hyperbolic_pair(F3, F3.eye(ac.degree), la.companion(F3, ac))
        K = at.tensor_ring(S)
        assert K.deg == c * a.degree
        assert K.deg - K.kernel.dim == 2
        Sp = K.S
        n2 = Sp.d
        for i in range(n2):
            u = F3.zeros(n2)
            u[i] = 1
            assert not np.any(K.wedge(u, u))
        # wedge factorization identity on all basis pairs
        for i in range(n2):
            for j in range(n2):
                u = F3.zeros(n2)
                u[i] = 1
                v = F3.zeros(n2)
                v[j] = 1
                w = K.wedge(u, v)
                assert np.array_equal(K.apply_value_map(w), Sp.apply(u, v))


def test_tensor_ring_scalar_slope_flagged():
    # proportional forms: the induced value map has a kernel of codimension
    # 1 only; the ring detects the degenerate (genus-1-like) case
    S = fo.hyperbolic_pair(F3, F3.eye(2), F3.mul(2, F3.eye(2)))
    K = at.tensor_ring(S)
    assert K.deg == 1
    assert K.deg - K.kernel.dim <= 1


def test_acting_group_invariants():
    a = Poly(F3, [1, 0, 1])
    S = fo.hyperbolic_pair(F3, F3.eye(4), la.companion(F3, a.mul(a)))
    K = at.tensor_ring(S)
    ag = at.acting_group(K)
    # Q generators are unipotent on K
    for e in ag.q_elems():
        M = e["K"]
        N = F3.sub(M, F3.eye(K.deg))
        P = N
        for _ in range(K.deg):
            P = F3.matmul(P, N)
        assert not np.any(P)
    # all generators preserve the radical filtration
    for e in ag.all_elems():
        for i in range(1, len(K.filtration)):
            sub = K.filtration[i]
            if sub.dim == 0:
                continue
            img = la.Subspace(F3, K.deg, F3.matmul(sub.basis, e["K"]))
            assert sub.contains_space(img)
    # G1 acts faithfully (nontrivially) on K/J
    J = K.filtration[1]
    for e in ag.G1:
        action_changes = False
        for row in F3.eye(K.deg):
            diff = F3.sub(F3.matmul(row[None, :], e["K"])[0], row)
            if np.any(diff) and not J.contains(diff):
                action_changes = True
        assert action_changes


def test_transporter_in_algebra_micro_oracle():
    # R = GF(3)[t]/(t^3) via its regular representation
    t = F3.zeros((3, 3))
    t[0, 1] = 1
    t[1, 2] = 1
    basis = [F3.eye(3), t, F3.matmul(t, t)]
    X = [F3.add(F3.eye(3), t).reshape(-1)]
    Y = [F3.add(F3.eye(3), F3.mul(2, t)).reshape(-1)]
    r = at.transporter_in_algebra(F3, basis, X, Y)
    assert r is not None
    # exhaustive oracle over all 26 nonzero elements
    brute = []
    for c in itertools.product(range(3), repeat=3):
        M = at._lc(F3, basis, F3.asarray(c))
        if la.is_invertible(F3, M):
            prod = F3.matmul(F3.add(F3.eye(3), t), M)
            if la.Subspace(F3, 9, np.stack(Y)).contains(prod.reshape(-1)):
                brute.append(M)
    assert brute  # transporter exists, matching the library answer
    assert at.transporter_in_algebra(F3, basis, X, X) is not None
    # none case: X and Y in different unit orbits
    X2 = [t.reshape(-1)]
    Y2 = [F3.matmul(t, t).reshape(-1)]
    assert at.transporter_in_algebra(F3, basis, X2, Y2) is None
    # stabilize agrees with brute force order
    gens = at.transporter_in_algebra(F3, basis, X, X, mode="stabilize")
    order = _closure_order(F3, [g for g in gens], 3)
    brute_stab = [M for M in _all_units(F3, basis)
                  if la.Subspace(F3, 9, np.stack(X)) ==
                  la.Subspace(F3, 9, np.stack(
                      [F3.matmul(np.asarray(X[0]).reshape(3, 3), M).reshape(-1)]))]
    assert order == len(brute_stab)


def _all_units(F, basis):
    out = []
    for c in itertools.product(range(F.q), repeat=len(basis)):
        M = at._lc(F, basis, F.asarray(c))
        if la.is_invertible(F, M):
            out.append(M)
    return out


def _closure_order(F, gens, n):
    seen = {tuple(F.eye(n).reshape(-1).tolist())}
    frontier = [F.eye(n)]
    while frontier:
        nxt = []
        for A in frontier:
            for g in gens:
                B = F.matmul(A, g)
                k = tuple(B.reshape(-1).tolist())
                if k not in seen:
                    seen.add(k)
                    nxt.append(B)
        frontier = nxt
    return len(seen)


def test_unipotent_transport_micro_oracle():
    # exhaustive group of order 27 acting on F_3^3, subspace transport
    g1 = F3.eye(3)
    g1[0, 1] = 1
    g2 = F3.eye(3)
    g2[1, 2] = 1
    G = _unipotent_closure(F3, [g1, g2], 3)
    rng = Rng(5)
    for _ in range(40):
        X = la.Subspace(F3, 3, F3.rand_matrix(1 + rng.randint(2), 3, rng))
        Y = la.Subspace(F3, 3, F3.rand_matrix(X.dim, 3, rng))
        if X.dim != Y.dim:
            continue
        brute = any(la.Subspace(F3, 3, F3.matmul(X.basis, M)) == Y for M in G)
        got = at.unipotent_transport(F3, [g1, g2], X, Y)
        assert (got is not None) == brute
        if got is not None:
            assert la.Subspace(F3, 3, F3.matmul(X.basis, got)) == Y
    # planted words transport correctly
    for _ in range(10):
        X = la.Subspace(F3, 3, F3.rand_matrix(2, 3, rng))
        M = G[rng.randint(len(G))]
        Y = la.Subspace(F3, 3, F3.matmul(X.basis, M))
        got = at.unipotent_transport(F3, [g1, g2], X, Y)
        assert got is not None


def _unipotent_closure(F, gens, n):
    seen = {tuple(F.eye(n).reshape(-1).tolist()): F.eye(n)}
    frontier = [F.eye(n)]
    while frontier:
        nxt = []
        for A in frontier:
            for g in gens:
                B = F.matmul(A, g)
                k = tuple(B.reshape(-1).tolist())
                if k not in seen:
                    seen[k] = B
                    nxt.append(B)
        frontier = nxt
    return list(seen.values())


def test_staged_transport_vs_brute_force_small():
    # K of dimension 4 over GF(3) (order <= 3^4 structures): staged answers
    # agree with enumeration of the full generated group
    a = Poly(F3, [1, 0, 1])
    S = fo.hyperbolic_pair(F3, F3.eye(4), la.companion(F3, a.mul(a)))
    K = at.tensor_ring(S)
    ag = at.acting_group(K)
    gens = [e["K"] for e in ag.all_elems()]
    G = _unipotent_closure(F3, gens, K.deg)  # full closure (not only unipotent)
    rng = Rng(6)
    checked = 0
    for _ in range(25):
        X = la.Subspace(F3, K.deg, F3.rand_matrix(2, K.deg, rng))
        Y = la.Subspace(F3, K.deg, F3.rand_matrix(2, K.deg, rng))
        if X.dim != 2 or Y.dim != 2:
            continue
        brute = any(la.Subspace(F3, K.deg, F3.matmul(X.basis, M)) == Y for M in G)
        got = at.staged_transport(K, ag, X, Y, mode="transport")
        assert (got is not None) == brute
        if got is not None:
            assert la.Subspace(F3, K.deg, F3.matmul(X.basis, got["K"])) == Y
        checked += 1
    assert checked >= 10
    # stabilizer order agrees with brute force for the induced kernel
    U = K.kernel
    stab_brute = [M for M in G
                  if la.Subspace(F3, K.deg, F3.matmul(U.basis, M)) == U]
    gens_s = at.staged_transport(K, ag, U, U, mode="stabilize")
    order = _closure_order(F3, [g["K"] for g in gens_s], K.deg)
    assert order == len(stab_brute)


def test_adjoint_tensor_self_and_planted():
    rng = Rng(7)
    a = Poly(F3, [1, 2, 0, 1])
    S = sloped(F3, a)
    w = at.adjoint_tensor_test(S, S)
    assert w is not None and fo.verify_witness(S, S, w)
    for trial in range(4):
        g = la.rand_invertible(F3, S.d, rng)
        SB = S.recombine(rand_gl2(F3, rng).T.copy()).transform(g)
        w = at.adjoint_tensor_test(S, SB, seed=trial)
        assert w is not None and fo.verify_witness(S, SB, w)


def test_adjoint_tensor_planted_gf7_d8():
    rng = Rng(8)
    F7 = field_make(7)
    a = Poly(F7, [3, 1, 0, 0, 1])
    from genus2.gf import is_irreducible

    if not is_irreducible(a):
        a = Poly(F7, [1, 1, 0, 0, 1])
        assert is_irreducible(a)
    S = sloped(F7, a)
    assert S.d == 8
    g = la.rand_invertible(F7, 8, rng)
    SB = S.recombine(rand_gl2(F7, rng).T.copy()).transform(g)
    w = at.adjoint_tensor_test(S, SB)
    assert w is not None and fo.verify_witness(S, SB, w)


def test_adjoint_tensor_agrees_with_pfaffian():
    rng = Rng(9)
    agree = 0
    for trial in range(8):
        while True:
            SA = rand_alt_pair(F3, 4, rng)
            if fo.is_fully_nondegenerate(SA) and pe.find_nondeg_combination(SA):
                break
        while True:
            SB = rand_alt_pair(F3, 4, rng)
            if fo.is_fully_nondegenerate(SB) and pe.find_nondeg_combination(SB):
                break
        wa = at.adjoint_tensor_test(SA, SB, seed=trial)
        wp = pf.small_field_test(SA, SB)
        assert (wa is None) == (wp is None)
        if wa is not None:
            assert fo.verify_witness(SA, SB, wa)
        agree += 1
    assert agree == 8


def test_adjoint_tensor_paper_isomorphic_heisenberg_quotients():
    # pairs over (x^2+1)^2 and (x^2+x+2)^2: pseudo-isometric but not isometric
    a = Poly(F3, [1, 0, 1])
    b = Poly(F3, [2, 1, 1])
    S1 = fo.hyperbolic_pair(F3, F3.eye(4), la.companion(F3, a.mul(a)))
    S2 = fo.hyperbolic_pair(F3, F3.eye(4), la.companion(F3, b.mul(b)))
    w = at.adjoint_tensor_test(S1, S2)
    assert w is not None and fo.verify_witness(S1, S2, w)
    assert pf.small_field_test(S1, S2, alphas=[pf.GammaL2.identity()]) is None
