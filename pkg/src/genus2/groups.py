"""Class-2 exponent-p groups presented by systems of alternating forms.

A group of order p^(d+e) is presented by d non-central generators
x_1..x_d, e central generators z_1..z_e and commutator relations
[x_i, x_j] = prod_t z_t^(Phi_t[i,j]).  Elements are normal forms
x^a z^b; class 2 and exponent p make the collection formula exact.

The group layer reduces isoclinism/isomorphism to pseudo-isometry of the
associated forms over the centroid residue field.
"""

import numpy as np

from genus2 import adjten as at
from genus2 import forms as fo
from genus2 import linalg as la
from genus2 import pencil as pe
from genus2 import pfaffian as pf
from genus2.errors import Genus2Error, UnsupportedStructureError, WitnessError
from genus2.gf import FieldCtx, Poly, QuotientRing, find_root_in_quotient_field
from genus2.rng import Rng


class Genus2Group:
    """Finite p-group of class <= 2 and exponent p from a system of forms."""

    def __init__(self, S):
        F = S.F
        if F.k != 1:
            raise Genus2Error("group presentations live over prime fields")
        if F.p == 2:
            raise UnsupportedStructureError(
                "exponent-p class-2 presentations need p odd")
        self.S = S
        self.p = F.p
        self.d = S.d
        self.e = S.e

    @property
    def order(self):
        return self.p ** (self.d + self.e)

    def element(self, a, b):
        return (tuple(int(x) % self.p for x in a), tuple(int(x) % self.p for x in b))

    def identity(self):
        return self.element([0] * self.d, [0] * self.e)

    def mul(self, g, h):
        """Normal-form product via the class-2 collection formula."""
        F = self.S.F
        a1, b1 = g
        a2, b2 = h
        av1 = F.asarray(a1)
        av2 = F.asarray(a2)
        # moving x^a2 past x^a1 collects [x_j, x_i] corrections for the
        # crossings: commutator contribution a2 Phi a1 per central generator
        corr = []
        for t in range(self.e):
            c = la.matmul(F, av2[None, :], self.S.forms[t], av1[:, None])[0, 0]
            corr.append(int(c))
        a = tuple(int(x) for x in F.add(av1, av2))
        b = tuple(int(x) for x in F.add(F.add(F.asarray(b1), F.asarray(b2)),
                                        F.asarray(corr)))
        return (a, b)

    def inv(self, g):
        a, b = g
        F = self.S.F
        # (x^a z^b)^-1 = x^-a z^(-b + collection correction)
        neg = self.element([-x for x in a], [-x for x in b])
        prod = self.mul(g, neg)
        fix = F.sub(F.zeros(self.e), F.asarray(prod[1]))
        return self.mul(neg, self.element([0] * self.d, [int(x) for x in fix]))

    def commutator(self, g, h):
        gh = self.mul(g, h)
        hg = self.mul(h, g)
        # [g, h] = (hg)^-1 (gh) is central here
        diff = self.S.F.sub(self.S.F.asarray(gh[1]), self.S.F.asarray(hg[1]))
        return self.element([0] * self.d, [int(x) for x in diff])

    def __repr__(self):
        return f"Genus2Group(p={self.p}, d={self.d}, e={self.e})"


def group_from_forms(S):
    """Group of order p^(d+e) with commutation given by the system."""
    return Genus2Group(S)


def forms_from_group(G):
    """Recover the Gram matrices of commutation from group arithmetic."""
    F = G.S.F
    out = F.zeros((G.e, G.d, G.d))
    for i in range(G.d):
        for j in range(G.d):
            gi = G.element([1 if t == i else 0 for t in range(G.d)], [0] * G.e)
            gj = G.element([1 if t == j else 0 for t in range(G.d)], [0] * G.e)
            _, b = G.commutator(gi, gj)
            out[:, i, j] = b
    return fo.SystemOfForms(F, out)


def heisenberg_quotient(a, c, L_rows):
    """Central quotient of the Heisenberg group over F[x]/(a^c).

    L_rows spans a codimension-2 subspace of the ring (the center); the
    result is the group whose forms are the ring multiplication pairing
    modulo that subspace, written over the base field.
    """
    F = a.ctx
    m = Poly.one(F)
    for _ in range(c):
        m = m.mul(a)
    n = m.degree
    L = la.Subspace(F, n, np.asarray(L_rows, dtype=F.dtype)
                    if len(L_rows) else None)
    if n - L.dim != 2:
        raise Genus2Error("quotient subspace must have codimension 2")
    ring = QuotientRing(F, m)
    # complement coordinates for R/L
    pivots = {int(np.nonzero(r)[0][0]) for r in L.basis} if L.dim else set()
    comp = [i for i in range(n) if i not in pivots][:2]
    full = np.concatenate([L.basis, F.eye(n)[comp]], axis=0) if L.dim \
        else F.eye(n)[comp]
    if la.rank(F, full) != n:
        raise Genus2Error("complement construction failed")
    inv_full = la.inv(F, full)
    x = Poly.x(F)
    forms = F.zeros((2, 2 * n, 2 * n))
    for i in range(n):
        for l in range(n):
            prod = x.pow_mod(i + l, m) if i + l else Poly.one(F)
            coords = F.matmul(prod._vec(n)[None, :], inv_full)[0]
            vals = coords[L.dim :]
            for t in range(2):
                forms[t, i, n + l] = vals[t]
                forms[t, n + l, i] = F.neg(vals[t])
    return group_from_forms(fo.SystemOfForms(F, forms))


def flat_group(m, p=3):
    """The group of order p^(2m+3) whose forms are the flat indecomposable."""
    F = FieldCtx(p)
    S = pe._canonical_flat_forms(F, m)
    return group_from_forms(S)


class GroupMap:
    """Generator-image map between two presented groups.

    x_i -> x^(X[i]) z^(C[i]),  z_t -> z^(Z[t]).
    """

    def __init__(self, X, C, Z):
        self.X = X
        self.C = C
        self.Z = Z

    def __repr__(self):
        return f"GroupMap(d={self.X.shape[0]}, e={self.Z.shape[0]})"


def verify(G, H, gmap):
    """Exact check that the map preserves presentations and is bijective."""
    F = G.S.F
    if G.p != H.p or G.d != H.d or G.e != H.e:
        return False
    X, Z = gmap.X, gmap.Z
    if not (la.is_invertible(F, X) and la.is_invertible(F, Z)):
        return False
    # commutator relations: X Phi_H_s X^T = sum_t Z[t, s] Phi_G_t
    for s in range(G.e):
        lhs = la.matmul(F, X, H.S.forms[s], X.T.copy())
        rhs = F.zeros((G.d, G.d))
        for t in range(G.e):
            if Z[t, s]:
                rhs = F.add(rhs, F.mul(Z[t, s], G.S.forms[t]))
        if not la.mat_eq(lhs, rhs):
            return False
    # power relations are automatic: exponent p with p odd
    return True


def _witness_to_isoclinism(G, H, w):
    """GroupMap from a bimap witness on the (reduced) form systems."""
    return GroupMap(w.phi, G.S.F.zeros((G.d, G.e)), w.phi_hat)


# ---------------------------------------------------------------------------
# bimap-level router
# ---------------------------------------------------------------------------


PFAFFIAN_Q_BOUND = 64


def _lift_degenerate_witness(SA, SB, redA, redB, w_red):
    """Extend a witness of the reduced systems to the full spaces."""
    F = SA.F
    SredA, rowsA, imgA = redA
    SredB, rowsB, imgB = redB
    radA = fo.radicals(SA)[0]
    radB = fo.radicals(SB)[0]
    # domain: complement rows map via the reduced witness, radicals map
    # to radicals by any bijection
    topA = np.concatenate([rowsA, radA.basis], axis=0) if radA.dim else rowsA
    topB = np.concatenate([rowsB, radB.basis], axis=0) if radB.dim else rowsB
    D = F.zeros((SA.d, SA.d))
    k = rowsA.shape[0]
    D[:k, :k] = w_red.phi
    for i in range(radA.dim):
        D[k + i, k + i] = 1
    phi = la.matmul(F, la.inv(F, F.frob(topA, w_red.tau)), D, topB)
    # value side: image basis maps via phi_hat, complement arbitrary
    compA = _complete_rows(F, imgA, SA.e)
    compB = _complete_rows(F, imgB, SB.e)
    fullA = np.concatenate([imgA, compA], axis=0) if compA.shape[0] else imgA
    fullB = np.concatenate([imgB, compB], axis=0) if compB.shape[0] else imgB
    E = F.zeros((SA.e, SA.e))
    r = imgA.shape[0]
    E[:r, :r] = w_red.phi_hat
    for i in range(SA.e - r):
        E[r + i, r + i] = 1
    # phi_hat on the full value space: fullA-coords -> E -> fullB basis
    phi_hat = la.matmul(F, la.inv(F, F.frob(fullA, w_red.tau)), E, fullB)
    w = fo.Witness(phi, phi_hat, w_red.tau)
    if not fo.verify_witness(SA, SB, w):
        raise WitnessError("degenerate witness lift failed verification")
    return w


def _complete_rows(F, rows, n):
    cur = la.Subspace(F, n, rows)
    out = []
    for i in range(n):
        e = F.zeros(n)
        e[i] = 1
        if not cur.contains(e):
            out.append(e)
            cur = la.Subspace(F, n, np.concatenate([cur.basis, e[None, :]], axis=0))
    return np.stack(out) if out else F.zeros((0, n))


def pseudo_isometry_test(SA, SB, mode="auto", seed=0):
    """Witness for pseudo-isometry of two systems of alternating forms.

    Handles degenerate inputs by reducing to the nondegenerate core and
    lifting the witness back.  mode: "auto" routes by field size and
    slopedness; "pfaffian" forces the small-field test; "adjten" forces
    the adjoint-tensor method.
    """
    F = SA.F
    if not F.same_field(SB.F) or SA.d != SB.d or SA.e != SB.e:
        return None
    radA, codimA = fo.radicals(SA)
    radB, codimB = fo.radicals(SB)
    if radA.dim != radB.dim or codimA != codimB:
        return None
    if radA.dim or codimA:
        redA = fo.nondegenerate_reduction(SA)
        redB = fo.nondegenerate_reduction(SB)
        w_red = pseudo_isometry_test(redA[0], redB[0], mode=mode, seed=seed)
        if w_red is None:
            return None
        return _lift_degenerate_witness(SA, SB, redA, redB, w_red)
    if SA.d == 0:
        return fo.Witness(F.eye(0), F.eye(SA.e), 0)
    if SA.e == 1:
        TA = fo.symplectic_basis(F, SA.forms[0])
        TB = fo.symplectic_basis(F, SB.forms[0])
        phi = F.matmul(la.inv(F, TA), TB)
        w = fo.Witness(phi, F.eye(1), 0)
        if not fo.verify_witness(SA, SB, w):
            raise WitnessError("symplectic witness failed verification")
        return w
    if SA.e != 2:
        raise UnsupportedStructureError(
            "pseudo-isometry testing implemented for e <= 2", e=SA.e)
    slopedA = pe.find_nondeg_combination(SA) is not None
    slopedB = pe.find_nondeg_combination(SB) is not None
    if slopedA != slopedB:
        # one has flat structure the other cannot match at equal dimension
        pass
    if mode == "adjten":
        return at.adjoint_tensor_test(SA, SB, seed=seed)
    if mode == "pfaffian":
        return pf.small_field_test(SA, SB)
    if not (slopedA and slopedB) or F.q <= PFAFFIAN_Q_BOUND:
        return pf.small_field_test(SA, SB)
    return at.adjoint_tensor_test(SA, SB, seed=seed)


# ---------------------------------------------------------------------------
# isoclinism and isomorphism
# ---------------------------------------------------------------------------


def _match_residue_generator(F, C_B, target_minpoly, seed=0):
    """Generator of C_B whose minimal polynomial is the given target."""
    if C_B.residue_minpoly == target_minpoly:
        return C_B.residue_gen, target_minpoly
    root = find_root_in_quotient_field(target_minpoly, C_B.residue_minpoly,
                                       seed=seed)
    if root is None:
        return None, None
    gV, gW = C_B.residue_gen
    # evaluate the root polynomial at the generator pair
    dV = gV.shape[0]
    dW = gW.shape[0]
    accV = F.zeros((dV, dV))
    accW = F.zeros((dW, dW))
    curV = F.eye(dV)
    curW = F.eye(dW)
    for cc in root:
        if cc:
            accV = F.add(accV, F.mul(int(cc), curV))
            accW = F.add(accW, F.mul(int(cc), curW))
        curV = F.matmul(curV, gV)
        curW = F.matmul(curW, gW)
    return (accV, accW), target_minpoly


def _pullback_witness(F, wE, rwA, rwB, E):
    """Z_p-level witness from an E-level witness through the rewritings."""
    j = rwA.degree
    if j == 1:
        return wE
    dd = wE.phi.shape[0]
    ee = wE.phi_hat.shape[0]

    def blowup(M, rw):
        out = F.zeros((M.shape[0] * j, M.shape[1] * j))
        for i in range(M.shape[0]):
            for l in range(M.shape[1]):
                if M[i, l]:
                    out[i * j : (i + 1) * j, l * j : (l + 1) * j] = \
                        rw.mult_matrix(int(M[i, l]))
        return out

    def frob_block(rw, tau):
        Mf = np.zeros((j, j), dtype=np.int64)
        for s in range(j):
            xs = E.power(E.p if j > 1 else 1, s)
            Mf[s] = E.to_digits(E.frob(xs, tau))
        out = F.zeros((dd * j, dd * j))
        for i in range(dd):
            out[i * j : (i + 1) * j, i * j : (i + 1) * j] = Mf
        return out

    def frob_block_e(rw, tau):
        Mf = np.zeros((j, j), dtype=np.int64)
        for s in range(j):
            xs = E.power(E.p if j > 1 else 1, s)
            Mf[s] = E.to_digits(E.frob(xs, tau))
        out = F.zeros((ee * j, ee * j))
        for i in range(ee):
            out[i * j : (i + 1) * j, i * j : (i + 1) * j] = Mf
        return out

    phi = la.matmul(F, la.inv(F, rwA.T), frob_block(rwA, wE.tau),
                    blowup(wE.phi, rwA), rwB.T)
    phi_hat = la.matmul(F, la.inv(F, rwA.U), frob_block_e(rwA, wE.tau),
                        blowup(wE.phi_hat, rwA), rwB.U)
    return fo.Witness(phi, phi_hat, 0)


def isoclinism_test(G, H, mode="auto", seed=0):
    """GroupMap realizing an isoclinism G -> H, or None.

    Pipeline: forms, radical/image reduction, centroid and residue
    rewriting, then genus dispatch (symplectic standardization for genus
    1, the pseudo-isometry tests for genus 2).
    """
    if G.p != H.p:
        return None
    F = G.S.F
    SA, SB = G.S, H.S
    radA, codimA = fo.radicals(SA)
    radB, codimB = fo.radicals(SB)
    redA = fo.nondegenerate_reduction(SA)
    redB = fo.nondegenerate_reduction(SB)
    SG, SH = redA[0], redB[0]
    if SG.d != SH.d or SG.e != SH.e:
        return None
    if SG.d == 0:
        return GroupMap(F.eye(G.d), F.zeros((G.d, G.e)), F.eye(G.e)) \
            if (G.d, G.e) == (H.d, H.e) else None
    partsA = fo.split_at_idempotents(SG)
    partsB = fo.split_at_idempotents(SH)
    if len(partsA) > 1 or len(partsB) > 1:
        raise UnsupportedStructureError(
            "directly decomposable groups are out of scope for the isoclinism "
            "pipeline; split at centroid idempotents first",
            factors=(len(partsA), len(partsB)))
    C_A = fo.centroid(SG)
    C_B = fo.centroid(SH)
    if not (C_A.is_field and C_B.is_field):
        raise UnsupportedStructureError(
            "centroid is local with nontrivial radical",
            radical_dims=(C_A.radical_dim, C_B.radical_dim))
    if C_A.dim != C_B.dim:
        return None
    SGq, rwA = fo.rewrite_over_residue(SG, C_A)
    if C_A.dim > 1:
        gen_b, mp_b = _match_residue_generator(F, C_B, C_A.residue_minpoly,
                                               seed=seed)
        if gen_b is None:
            return None
        SHq, rwB = fo.rewrite_over_residue(SH, C_B, generator=gen_b,
                                           minpoly=mp_b)
    else:
        SHq, rwB = fo.rewrite_over_residue(SH, C_B)
    E = rwA.E
    if SGq.e > 2:
        raise UnsupportedStructureError("genus exceeds 2", genus=SGq.e)
    wE = pseudo_isometry_test(SGq, SHq, mode=mode, seed=seed)
    if wE is None:
        return None
    w_red = _pullback_witness(F, wE, rwA, rwB, E)
    if not fo.verify_witness(SG, SH, w_red):
        raise WitnessError("pulled-back witness failed verification")
    w_full = _lift_degenerate_witness(SA, SB, redA, redB, w_red) \
        if (radA.dim or codimA) else w_red
    gmap = _witness_to_isoclinism(G, H, w_full)
    if not verify(G, H, gmap):
        raise WitnessError("isoclinism failed group-level verification")
    return gmap


def isomorphism_test(G, H, mode="auto", seed=0):
    """Isomorphism of exponent-p class-2 groups (odd p), or None.

    Isoclinic exponent-p groups of the same order are isomorphic; the
    isoclinism lifts with trivial central corrections.
    """
    if (G.p, G.d, G.e) != (H.p, H.d, H.e):
        return None
    radA = fo.radicals(G.S)[0]
    radB = fo.radicals(H.S)[0]
    if radA.dim != radB.dim:
        return None
    gmap = isoclinism_test(G, H, mode=mode, seed=seed)
    if gmap is None:
        return None
    if not verify(G, H, gmap):
        raise WitnessError("isomorphism witness failed verification")
    return gmap


def central_automorphisms(G):
    """The d*e elementary central maps x_i -> x_i z_t; each verifies."""
    F = G.S.F
    out = []
    for i in range(G.d):
        for t in range(G.e):
            C = F.zeros((G.d, G.e))
            C[i, t] = 1
            gmap = GroupMap(F.eye(G.d), C, F.eye(G.e))
            if not verify(G, G, gmap):
                raise WitnessError("central automorphism failed verification")
            out.append(gmap)
    return out


# ---------------------------------------------------------------------------
# pseudo-isometry group generators
# ---------------------------------------------------------------------------


def _isometry_gens_sloped(S):
    """Generators of the isometry group of a globally sloped pair.

    In standard coordinates these are the unitary transvections
    I + [[0, Z], [0, 0]] (and lower), Z symmetric and commuting with the
    corner slope, together with the torus diag(u(Psi), u(Psi)^-T).
    """
    F = S.F
    T, Psi = pe.standard_sloped_presentation(S)
    Tinv = la.inv(F, T)
    n = Psi.shape[0]
    gens = []

    def corner_space():
        # {Z : Z Psi^T = Psi Z, Z = Z^T} via a linear solve
        rows = []
        for i in range(n):
            for jj in range(n):
                row = F.zeros(n * n)
                # (Z Psi^T - Psi Z)[i, jj]
                for t in range(n):
                    row[i * n + t] = F.add(row[i * n + t], Psi[jj, t])
                    row[t * n + jj] = F.sub(row[t * n + jj], Psi[i, t])
                rows.append(row)
                sym = F.zeros(n * n)
                sym[i * n + jj] = 1
                sym[jj * n + i] = F.sub(sym[jj * n + i], 1)
                rows.append(sym)
        A = np.stack(rows).T.copy()
        return la.null_space_left(F, A)

    for zrow in corner_space():
        Z = zrow.reshape(n, n)
        up = F.eye(2 * n)
        up[:n, n:] = Z
        lo = F.eye(2 * n)
        lo[n:, :n] = Z
        for gmat in (up, lo):
            g = la.matmul(F, Tinv, gmat, T)
            w = fo.Witness(g, F.eye(2), 0)
            if fo.verify_witness(S, S, w):
                gens.append(w)
    # a scalar torus element; together with the transvections this
    # generates the unitary group of the local components
    for cval in range(2, F.q):
        u = F.mul(cval, F.eye(n))
        gmat = F.zeros((2 * n, 2 * n))
        gmat[:n, :n] = u
        gmat[n:, n:] = la.inv(F, u).T.copy()
        g = la.matmul(F, Tinv, gmat, T)
        w = fo.Witness(g, F.eye(2), 0)
        if fo.verify_witness(S, S, w):
            gens.append(w)
        break
    return gens


def pseudo_isometry_group(S, seed=0):
    """Verified generators (phi, phi_hat, tau) of the pseudo-isometry group.

    Combines isometry generators of the sloped part, flat-part lifts, and
    one lift per attainable GammaL(2, q) class.  Complete for
    indecomposable inputs at desk scale; decomposable inputs may omit
    isometries mixing isometric blocks.
    """
    F = S.F
    if not fo.is_fully_nondegenerate(S):
        raise UnsupportedStructureError("pseudo-isometry group needs a "
                                        "fully nondegenerate system")
    gens = []
    if S.e == 1:
        # Sp(d, q): upper/lower elementary subgroups over the standard basis
        T = fo.symplectic_basis(F, S.forms[0])
        Tinv = la.inv(F, T)
        n = S.d // 2
        cands = []
        for i in range(n):
            for jj in range(i, n):
                Z = F.zeros((n, n))
                Z[i, jj] = 1
                Z[jj, i] = 1
                up = F.eye(S.d)
                up[:n, n:] = Z
                lo = F.eye(S.d)
                lo[n:, :n] = Z
                cands.extend([up, lo])
        for gmat in cands:
            g = la.matmul(F, Tinv, gmat, T)
            w = fo.Witness(g, F.eye(1), 0)
            if not fo.verify_witness(S, S, w):
                raise WitnessError("symplectic transvection failed verification")
            gens.append(w)
        # similitudes diag(c I, I) realize every value twist phi_hat = c
        for c in range(2, F.q):
            sim = F.eye(S.d)
            for i in range(n):
                sim[i, i] = c
            g = la.matmul(F, Tinv, sim, T)
            w = fo.Witness(g, F.asarray([[c]]), 0)
            if not fo.verify_witness(S, S, w):
                raise WitnessError("symplectic similitude failed verification")
            gens.append(w)
        return gens
    if S.e != 2:
        raise UnsupportedStructureError("pseudo-isometry groups implemented "
                                        "for e <= 2")
    if pe.find_nondeg_combination(S) is not None:
        gens.extend(_isometry_gens_sloped(S))
    # one lift per attainable GammaL(2, q) twist
    for alpha in pf.gammal2_elements(F):
        w = pf.small_field_test(S, S, alphas=[alpha])
        if w is not None:
            gens.append(w)
    for w in gens:
        if not fo.verify_witness(S, S, w):
            raise WitnessError("pseudo-isometry generator failed verification")
    return gens
