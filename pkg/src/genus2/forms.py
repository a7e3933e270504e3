"""Systems of alternating forms and their basic ring invariants.

A system of forms is the tuple of Gram matrices (Phi_1, ..., Phi_e) of a
bilinear map V x V -> W relative to chosen bases, with u . v computed as
(u Phi_t v^T)_t.  Everything here treats the alternating case: zero
diagonal is enforced explicitly so characteristic 2 behaves correctly.
"""

import numpy as np

from genus2 import linalg as la
from genus2.errors import (
    DimensionError,
    FieldError,
    Genus2Error,
    NotAlternatingError,
    UnsupportedStructureError,
)
from genus2.gf import FieldCtx, Poly, poly_factor
from genus2.rng import Rng


class SystemOfForms:
    """e alternating d x d Gram matrices over a common field context."""

    def __init__(self, F, forms, check=True):
        forms = np.asarray(forms, dtype=F.dtype)
        if forms.ndim == 2:
            forms = forms[None, :, :]
        if forms.ndim != 3 or forms.shape[1] != forms.shape[2]:
            raise DimensionError("forms must be a stack of square matrices")
        self.F = F
        self.forms = forms
        self.e = forms.shape[0]
        self.d = forms.shape[1]
        if self.e < 1:
            raise DimensionError("need at least one form")
        if check:
            self._check_alternating()

    def _check_alternating(self):
        for t in range(self.e):
            M = self.forms[t]
            if np.any(np.diagonal(M)):
                raise NotAlternatingError(f"form {t} has a nonzero diagonal entry")
            if not la.mat_eq(M, self.F.neg(M.T)):
                raise NotAlternatingError(f"form {t} is not skew-symmetric")

    def apply(self, u, v):
        """The value u . v as a length-e vector."""
        F = self.F
        out = F.zeros(self.e)
        for t in range(self.e):
            out[t] = F.matmul(F.matmul(u[None, :], self.forms[t]), v[:, None])[0, 0]
        return out

    def transform(self, P):
        """Congruence by P: Gram matrices of the same bimap after u -> u P^-1.

        Returns the system with matrices P Phi_t P^T.
        """
        F = self.F
        return SystemOfForms(F, np.stack(
            [la.matmul(F, P, self.forms[t], P.T.copy()) for t in range(self.e)]
        ), check=False)

    def recombine(self, H):
        """W-side change: new_t = sum_s H[t, s] * old_s.  H is e' x e."""
        F = self.F
        H = F.asarray(H)
        out = []
        for t in range(H.shape[0]):
            acc = F.zeros((self.d, self.d))
            for s in range(self.e):
                if H[t, s]:
                    acc = F.add(acc, F.mul(H[t, s], self.forms[s]))
            out.append(acc)
        return SystemOfForms(F, np.stack(out), check=False)

    def twist(self, tau):
        """Entrywise Frobenius^tau on every Gram matrix."""
        if tau % self.F.k == 0:
            return self
        return SystemOfForms(self.F, self.F.frob(self.forms, tau), check=False)

    def restrict(self, rows):
        """System on the subspace spanned by the given basis rows."""
        return self.transform(self.F.asarray(rows))

    def combo(self, coeffs):
        """A single linear combination sum_t coeffs[t] * Phi_t."""
        F = self.F
        acc = F.zeros((self.d, self.d))
        for t in range(self.e):
            if coeffs[t]:
                acc = F.add(acc, F.mul(coeffs[t], self.forms[t]))
        return acc

    def central_sum(self, other):
        """Orthogonal sum sharing the value space (same e)."""
        F = self.F
        if other.e != self.e:
            raise DimensionError("central sum needs matching codomain dimension")
        d = self.d + other.d
        out = F.zeros((self.e, d, d))
        out[:, : self.d, : self.d] = self.forms
        out[:, self.d :, self.d :] = other.forms
        return SystemOfForms(F, out, check=False)

    def direct_sum(self, other):
        """Bimap direct sum: domains and value spaces both stack."""
        F = self.F
        d = self.d + other.d
        e = self.e + other.e
        out = F.zeros((e, d, d))
        out[: self.e, : self.d, : self.d] = self.forms
        out[self.e :, self.d :, self.d :] = other.forms
        return SystemOfForms(F, out, check=False)

    def __eq__(self, other):
        return (isinstance(other, SystemOfForms) and self.F == other.F
                and la.mat_eq(self.forms, other.forms))

    def __repr__(self):
        return f"SystemOfForms(d={self.d}, e={self.e}, {self.F!r})"


def hyperbolic_pair(F, psi1, psi2):
    """The alternating pair [[0, Psi_i], [-Psi_i^T, 0]] from corner blocks."""
    psi1, psi2 = F.asarray(psi1), F.asarray(psi2)
    r, c = psi1.shape
    d = r + c
    out = F.zeros((2, d, d))
    for t, psi in enumerate((psi1, psi2)):
        out[t, :r, r:] = psi
        out[t, r:, :r] = F.neg(psi.T)
    return SystemOfForms(F, out, check=False)


def radicals(S):
    """(radical subspace, image codimension) of an alternating system.

    For alternating systems the left and right radicals coincide; the
    radical is {v : v . V = 0}.
    """
    F = S.F
    stacked = np.concatenate([S.forms[t] for t in range(S.e)], axis=1)
    rad = la.Subspace(F, S.d, la.null_space_left(F, stacked))
    vals = S.forms.reshape(S.e, S.d * S.d).T.copy()
    image_dim = la.rank(F, vals)
    return rad, S.e - image_dim


def is_fully_nondegenerate(S):
    rad, codim = radicals(S)
    return rad.dim == 0 and codim == 0


def nondegenerate_reduction(S):
    """Quotient the domain radical and cut W down to the value span.

    Returns (S_reduced, complement_rows, image_basis): complement_rows is
    the chosen basis of a complement of the radical (rows of the original
    space), image_basis an e'' x e matrix whose rows span the set of value
    vectors; the reduced system is written relative to both.
    """
    F = S.F
    rad, _ = radicals(S)
    if rad.dim:
        pivots = {int(np.nonzero(row)[0][0]) for row in rad.basis}
        comp = [i for i in range(S.d) if i not in pivots]
        rows = F.zeros((len(comp), S.d))
        for r, i in enumerate(comp):
            rows[r, i] = 1
        S = S.restrict(rows)
    else:
        rows = F.eye(S.d)
    vals = S.forms.reshape(S.e, -1)  # columns are the value vectors
    image_dim = la.rank(F, vals)
    if image_dim < S.e:
        B, _ = la.rref(F, vals.T.copy())
        B = B[:image_dim]  # rows span the value-vector space in F^e
        coords = la.solve_right(F, B.T.copy(), vals)
        S = SystemOfForms(F, coords.reshape(image_dim, S.d, S.d), check=False)
    else:
        B = F.eye(S.e)
    return S, rows, B


class CentroidData:
    """Centroid of a fully nondegenerate system: commutative algebra data."""

    def __init__(self, F, pairs, radical_coeffs, is_field, residue_gen=None,
                 residue_minpoly=None):
        self.F = F
        self.pairs = pairs            # list of (sigma_V, sigma_W)
        self.radical_coeffs = radical_coeffs  # rows of coefficients rel. pairs
        self.is_field = is_field
        self.is_local = is_field or radical_coeffs.shape[0] > 0
        self.residue_gen = residue_gen        # (gV, gW) generating C when field
        self.residue_minpoly = residue_minpoly

    @property
    def dim(self):
        return len(self.pairs)

    @property
    def radical_dim(self):
        return self.radical_coeffs.shape[0]


def _scan_combos(S, limit=None):
    """Deterministic scan order of projective points (lam, mu) for e = 2."""
    F = S.F
    pts = [(1, 0), (0, 1)]
    count = 2
    for c in range(1, F.q):
        if limit is not None and count >= limit:
            break
        pts.append((1, c))
        count += 1
    return pts


def find_invertible_combo(S):
    """(lam, mu) with lam*Phi_1 + mu*Phi_2 invertible, or None (e = 2).

    Scans min(q + 1, d + 2) projective points; by degree counting a regular
    pencil over a field with q > d always yields a point, and if the scan
    of all q + 1 points fails none exists.
    """
    if S.e != 2:
        raise DimensionError("combo scan requires e = 2")
    limit = min(S.F.q + 1, S.d + 2)
    for lam, mu in _scan_combos(S, limit=limit):
        M = S.combo((lam, mu))
        if la.is_invertible(S.F, M):
            return lam, mu
    if S.F.q + 1 > limit:
        for lam, mu in _scan_combos(S):
            M = S.combo((lam, mu))
            if la.is_invertible(S.F, M):
                return lam, mu
    return None


def _complementary_point(F, lam, mu):
    if mu == 0:
        return 0, 1
    return 1, 0


def _centroid_pairs_fast(S):
    """Centroid basis for e = 2 via the slope; needs an invertible combo."""
    F = S.F
    pt = find_invertible_combo(S)
    if pt is None:
        return None
    lam, mu = pt
    lam2, mu2 = _complementary_point(F, lam, mu)
    H = F.asarray([[lam, mu], [lam2, mu2]])
    St = S.recombine(H)
    M1 = St.forms[0]
    s = la.matmul(F, St.forms[1], la.inv(F, M1))
    mp = la.min_poly(F, s)
    Hs = H.T.copy()
    Hinv = la.inv(F, Hs)
    pairs = [(F.eye(S.d), F.eye(2))]
    if mp.degree == 2:
        # s^2 = alpha*I + beta*s  =>  s acts on W~ as [[0, alpha], [1, beta]]
        beta = int(F.neg(mp.coeffs[1]))
        alpha = int(F.neg(mp.coeffs[0]))
        sW_t = F.asarray([[0, alpha], [1, beta]])
        sW = la.matmul(F, Hs, sW_t, Hinv)
        pairs.append((s, sW))
    return pairs


def _centroid_pairs_general(S):
    """Centroid basis by the defining linear system (d^2 + e^2 unknowns)."""
    F = S.F
    d, e = S.d, S.e
    nV, nW = d * d, e * e
    rows = []
    for t in range(e):
        Phi = S.forms[t]
        # (1) sigma_V Phi_t - sum_s sigmaW[s,t] Phi_s = 0
        for i in range(d):
            for j in range(d):
                row = F.zeros(nV + nW)
                row[i * d : (i + 1) * d] = Phi[:, j]
                for s in range(e):
                    row[nV + s * e + t] = F.sub(row[nV + s * e + t], S.forms[s][i, j])
                rows.append(row)
        # (2) Phi_t sigma_V^T - sum_s sigmaW[s,t] Phi_s = 0
        for i in range(d):
            for j in range(d):
                row = F.zeros(nV + nW)
                row[j * d : (j + 1) * d] = Phi[i, :]
                for s in range(e):
                    row[nV + s * e + t] = F.sub(row[nV + s * e + t], S.forms[s][i, j])
                rows.append(row)
    A = np.stack(rows).T.copy()  # columns are equations
    sols = la.null_space_left(F, A)
    pairs = []
    for sol in sols:
        pairs.append((sol[:nV].reshape(d, d).copy(), sol[nV:].reshape(e, e).copy()))
    return pairs


def _check_centroid_pair(S, sV, sW):
    F = S.F
    for t in range(S.e):
        lhs = F.matmul(sV, S.forms[t])
        rhs = S.combo(sW[:, t])
        if not la.mat_eq(lhs, rhs):
            return False
        if not la.mat_eq(F.matmul(S.forms[t], sV.T.copy()), rhs):
            return False
    return True


class _CommAlg:
    """Scratch commutative algebra on a basis of (sigma_V, sigma_W) pairs."""

    def __init__(self, F, pairs):
        self.F = F
        self.pairs = pairs
        self.m = len(pairs)
        d = pairs[0][0].shape[0]
        self.flatV = np.stack([p[0].reshape(-1) for p in pairs])
        # structure constants: pairs[i][0] @ pairs[j][0] in terms of flatV
        self.struct = {}

    def coords_of(self, M):
        return la.solve_left(self.F, self.flatV, self.F.asarray(M).reshape(-1))

    def mult_coords(self, x, y):
        """Coordinates of (x*y) for coordinate vectors x, y."""
        F = self.F
        d = self.pairs[0][0].shape[0]
        X = F.zeros((d, d))
        for c, p in zip(x, self.pairs):
            if c:
                X = F.add(X, F.mul(c, p[0]))
        Y = F.zeros((d, d))
        for c, p in zip(y, self.pairs):
            if c:
                Y = F.add(Y, F.mul(c, p[0]))
        return self.coords_of(F.matmul(X, Y))

    def reg_matrix(self, x):
        """Matrix of multiplication by x on the algebra (rows = images)."""
        F = self.F
        cols = []
        for j in range(self.m):
            ej = F.zeros(self.m)
            ej[j] = 1
            cols.append(self.mult_coords(ej, x))
        return np.stack(cols)

    def trace_form(self):
        F = self.F
        regs = []
        for i in range(self.m):
            ei = F.zeros(self.m)
            ei[i] = 1
            regs.append(self.reg_matrix(ei))
        G = F.zeros((self.m, self.m))
        for i in range(self.m):
            for j in range(i, self.m):
                prod = F.matmul(regs[i], regs[j])
                tr = 0
                for t in range(self.m):
                    tr = int(F.add(tr, prod[t, t]))
                G[i, j] = tr
                G[j, i] = tr
        return G, regs


def centroid(S):
    """The centroid of a fully nondegenerate system, with ring structure.

    Returns CentroidData: a basis of (sigma_V, sigma_W) pairs, the radical
    (as coefficient rows over that basis), locality/field flags and, for
    field centroids, a generator with its minimal polynomial.
    """
    F = S.F
    rad, codim = radicals(S)
    if rad.dim or codim:
        raise Genus2Error("centroid requires a fully nondegenerate system")
    pairs = None
    if S.e == 2:
        pairs = _centroid_pairs_fast(S)
    if pairs is None:
        pairs = _centroid_pairs_general(S)
    for sV, sW in pairs:
        if not _check_centroid_pair(S, sV, sW):
            raise Genus2Error("centroid basis element fails the defining identity")
        # commutativity follows for fully nondegenerate systems
    alg = _CommAlg(F, pairs)
    G, _ = alg.trace_form()
    radical_coeffs = la.null_space_left(F, G)
    is_field = False
    residue_gen = None
    residue_minpoly = None
    if radical_coeffs.shape[0] == 0:
        if len(pairs) == 1:
            is_field = True
            residue_gen = pairs[0]
            residue_minpoly = None
        else:
            # search for a primitive element with irreducible minimal polynomial
            rng = Rng(17).spawn("centroid-primitive")
            for _ in range(64):
                coeffs = [rng.randint(F.q) for _ in range(len(pairs))]
                x = F.asarray(coeffs)
                R = alg.reg_matrix(x)
                mp = la.min_poly(F, R)
                if mp.degree == len(pairs):
                    from genus2.gf import is_irreducible

                    if is_irreducible(mp):
                        is_field = True
                        gV = F.zeros((S.d, S.d))
                        gW = F.zeros((S.e, S.e))
                        for c, p in zip(coeffs, pairs):
                            if c:
                                gV = F.add(gV, F.mul(c, p[0]))
                                gW = F.add(gW, F.mul(c, p[1]))
                        residue_gen = (gV, gW)
                        residue_minpoly = mp
                    break
    return CentroidData(F, pairs, radical_coeffs, is_field,
                        residue_gen=residue_gen, residue_minpoly=residue_minpoly)


class RewriteData:
    """Bookkeeping for a residue-field rewriting of a system."""

    def __init__(self, E, T, U, degree):
        self.E = E          # the residue FieldCtx
        self.T = T          # d x d change of basis over the base field
        self.U = U          # e x e change of basis on the value side
        self.degree = degree

    def mult_matrix(self, z):
        """j x j base-field matrix of multiplication by the residue element z.

        Row s is the digit vector of x^s * z; relative to the orbit bases
        used in the rewriting this is exactly how z acts on each block.
        """
        E = self.E
        j = self.degree
        x_elt = E.p if j > 1 else 1  # encoding of the class of x
        M = np.zeros((j, j), dtype=np.int64)
        for s in range(j):
            M[s] = E.to_digits(E.mul(E.power(x_elt, s), z))
        return M


def _orbit_basis(F, gM, dim, degree):
    """Greedy basis of F^dim as a free module over F[gM] of rank dim/degree."""
    seen = la.Subspace(F, dim)
    rows = []
    for i in range(dim):
        v = F.zeros(dim)
        v[i] = 1
        if seen.contains(v):
            continue
        orbit = [v]
        cur = v
        for _ in range(degree - 1):
            cur = F.matmul(cur[None, :], gM)[0]
            orbit.append(cur)
        block = np.stack(orbit)
        cand = np.concatenate([seen.basis, block], axis=0)
        if la.rank(F, cand) != seen.dim + degree:
            raise Genus2Error("module basis extension failed: not free")
        rows.extend(orbit)
        seen = la.Subspace(F, dim, np.stack(rows))
        if seen.dim == dim:
            break
    return np.stack(rows)


def rewrite_over_residue(S, C, generator=None, minpoly=None):
    """Express the bimap bilinearly over the centroid residue field.

    Returns (S_new, RewriteData).  Requires a field centroid; the
    pseudo-isometry class over the base field is preserved.  A particular
    centroid generator (with its minimal polynomial) may be supplied to
    force a specific modulus, e.g. to match another system's residue field.
    """
    F = S.F
    if not C.is_field:
        raise UnsupportedStructureError(
            "centroid is a local ring with nontrivial radical; residue rewriting "
            "is only supported over field centroids",
            radical_dim=C.radical_dim,
        )
    j = C.dim
    if j == 1:
        return S, RewriteData(F, F.eye(S.d), F.eye(S.e), 1)
    if F.k != 1:
        raise UnsupportedStructureError(
            "residue rewriting is implemented over prime base fields only")
    gV, gW = generator if generator is not None else C.residue_gen
    mp = minpoly if minpoly is not None else C.residue_minpoly
    E = FieldCtx(F.p, j, tuple(mp._vec(j + 1)))
    T = _orbit_basis(F, gV, S.d, j)
    U = _orbit_basis(F, gW, S.e, j)
    dd, ee = S.d // j, S.e // j
    Uinv = la.inv(F, U)
    new_forms = E.zeros((ee, dd, dd)) if not E.big else np.zeros((ee, dd, dd), dtype=object)
    for i in range(dd):
        for l in range(dd):
            w = S.apply(T[i * j], T[l * j])
            coords = F.matmul(w[None, :], Uinv)[0]
            for t in range(ee):
                digits = coords[t * j : (t + 1) * j]
                new_forms[t, i, l] = int(E.from_digits(digits))
    S_new = SystemOfForms(E, new_forms)
    return S_new, RewriteData(E, T, U, j)


class StarAlgebra:
    """The adjoint ring of a system, with its exchange involution."""

    def __init__(self, F, pairs):
        self.F = F
        self.pairs = pairs

    @property
    def dim(self):
        return len(self.pairs)

    @staticmethod
    def star(pair):
        L, R = pair
        return (R.T.copy(), L.T.copy())

    def flat(self):
        return np.stack([np.concatenate([L.reshape(-1), R.reshape(-1)])
                         for L, R in self.pairs])

    def contains(self, pair):
        L, R = pair
        v = np.concatenate([L.reshape(-1), R.reshape(-1)])
        return la.Subspace(self.F, v.shape[0], self.flat()).contains(v)


def adjoint(S):
    """The adjoint ring: all (L, R) with L Phi_t = Phi_t R for every t."""
    F = S.F
    d = S.d
    pairs = None
    if S.e == 2:
        pt = find_invertible_combo(S)
        if pt is not None:
            lam, mu = pt
            lam2, mu2 = _complementary_point(F, lam, mu)
            St = S.recombine(F.asarray([[lam, mu], [lam2, mu2]]))
            M1inv = la.inv(F, St.forms[0])
            s = F.matmul(St.forms[1], M1inv)
            Ls = la.centralizer_basis(F, s)
            pairs = []
            for L in Ls:
                R = la.matmul(F, M1inv, L, St.forms[0])
                pairs.append((L, R))
    if pairs is None and S.e == 1 and la.is_invertible(F, S.forms[0]):
        Minv = la.inv(F, S.forms[0])
        pairs = []
        for i in range(d):
            for jj in range(d):
                L = F.zeros((d, d))
                L[i, jj] = 1
                pairs.append((L, la.matmul(F, Minv, L, S.forms[0])))
    if pairs is None:
        # general linear solve: unknowns (L, R), equations L Phi_t = Phi_t R
        rows = []
        for t in range(S.e):
            Phi = S.forms[t]
            for i in range(d):
                for jj in range(d):
                    row = F.zeros(2 * d * d)
                    row[i * d : (i + 1) * d] = Phi[:, jj]
                    row[d * d + jj : d * d + d * d : d] = F.neg(Phi[i, :])
                    rows.append(row)
        A = np.stack(rows).T.copy()
        sols = la.null_space_left(F, A)
        pairs = [(sol[: d * d].reshape(d, d).copy(),
                  sol[d * d :].reshape(d, d).copy()) for sol in sols]
    for L, R in pairs:
        for t in range(S.e):
            if not la.mat_eq(F.matmul(L, S.forms[t]), F.matmul(S.forms[t], R)):
                raise Genus2Error("adjoint pair fails the defining identity")
    return StarAlgebra(F, pairs)


def split_at_idempotents(S, C=None):
    """Split a fully nondegenerate system at centroid idempotents.

    Returns a list of (component system, row basis into the original
    space) pairs; a single entry means the centroid is local.  Components
    are image-reduced, so their value dimension may shrink.
    """
    F = S.F
    C = C or centroid(S)
    if C.dim == 1:
        return [(S, F.eye(S.d))]
    alg = _CommAlg(F, C.pairs)
    idem = _find_splitting_idempotent(F, alg)
    if idem is None:
        return [(S, F.eye(S.d))]
    out = []
    one = alg.coords_of(F.eye(S.d))
    for ecoeffs in (idem, F.sub(one, idem)):
        eV = F.zeros((S.d, S.d))
        for c, p in zip(ecoeffs, C.pairs):
            if c:
                eV = F.add(eV, F.mul(c, p[0]))
        r = la.rank(F, eV)
        rowsV, _ = la.rref(F, eV.copy())
        rowsV = rowsV[:r]
        comp = S.restrict(rowsV)
        comp_reduced, _, _ = nondegenerate_reduction(comp)
        for sub, sub_rows in split_at_idempotents(comp_reduced):
            out.append((sub, F.matmul(sub_rows, rowsV)))
    return out


def _find_splitting_idempotent(F, alg):
    """A nontrivial idempotent of the commutative algebra, or None.

    Seeks an element whose minimal polynomial has two coprime primary
    parts; the CRT idempotent of F[x]/(min poly) is then exact in the
    algebra, no radical lifting required.
    """
    m = alg.m
    rng = Rng(31).spawn("idempotents")
    candidates = []
    for i in range(m):
        e = F.zeros(m)
        e[i] = 1
        candidates.append(e)
    for _ in range(128):
        candidates.append(F.asarray([rng.randint(F.q) for _ in range(m)]))
    one = alg.coords_of(F.eye(alg.pairs[0][0].shape[0]))
    for x in candidates:
        R = alg.reg_matrix(x)
        mp = la.min_poly(F, R)
        facs = poly_factor(mp)
        if len(facs) < 2:
            continue
        a, mult = facs[0]
        prim = Poly.one(F)
        for _ in range(mult):
            prim = prim.mul(a)
        rest = mp // prim
        u = rest.mul(_poly_inverse_mod(rest, prim)) % mp
        ecoords = _eval_poly_coords(F, alg, u, x)
        e2 = alg.mult_coords(ecoords, ecoords)
        if not la.mat_eq(e2, ecoords):
            raise Genus2Error("CRT idempotent construction failed")
        if np.any(ecoords) and not la.mat_eq(ecoords, one):
            return ecoords
    return None


def _poly_inverse_mod(f, m):
    r0, r1 = m, f % m
    s0, s1 = Poly.zero(f.ctx), Poly.one(f.ctx)
    while not r1.is_zero():
        q, r = r0.divmod(r1)
        r0, r1 = r1, r
        s0, s1 = s1, s0.sub(q.mul(s1))
    if r0.degree != 0:
        raise Genus2Error("element not invertible modulo the given polynomial")
    return s0.scale(f.ctx.inv(r0.coeffs[0])) % m


def _eval_poly_coords(F, alg, f, x):
    acc = F.zeros(alg.m)
    one = alg.coords_of(F.eye(alg.pairs[0][0].shape[0]))
    for c in reversed(f.coeffs):
        acc = alg.mult_coords(acc, x)
        acc = F.add(acc, F.mul(c, one))
    return acc


def genus(S):
    """The genus: max over central factors of the residue-field value rank."""
    F = S.F
    rad, codim = radicals(S)
    if rad.dim or codim:
        raise Genus2Error("genus requires a fully nondegenerate system")
    best = 0
    for comp, _rows in split_at_idempotents(S):
        C = centroid(comp)
        if not C.is_field:
            raise UnsupportedStructureError(
                "component centroid is local with nontrivial radical",
                radical_dim=C.radical_dim,
            )
        S2, _ = rewrite_over_residue(comp, C)
        best = max(best, S2.e)
    return best


class Witness:
    """A pseudo-isometry witness from system A to system B.

    The map sends u to frob^tau(u) @ phi, and on the value side w to
    frob^tau(w) @ phi_hat.  The defining identity, checked exactly by
    verify_witness, is
        phi @ PhiB_t @ phi^T = sum_s phi_hat[s, t] * frob^tau(PhiA_s).
    """

    def __init__(self, phi, phi_hat, tau=0):
        self.phi = phi
        self.phi_hat = phi_hat
        self.tau = int(tau)

    def __repr__(self):
        return f"Witness(d={self.phi.shape[0]}, e={self.phi_hat.shape[0]}, tau={self.tau})"


def verify_witness(SA, SB, w):
    """Exact check of the pseudo-isometry identity on Gram matrices."""
    F = SA.F
    if not F.same_field(SB.F):
        return False
    if SA.d != SB.d or SA.e != SB.e:
        return False
    if w.phi.shape != (SA.d, SA.d) or w.phi_hat.shape != (SA.e, SA.e):
        return False
    if not (la.is_invertible(F, w.phi) and la.is_invertible(F, w.phi_hat)):
        return False
    twisted = F.frob(SA.forms, w.tau)
    for t in range(SB.e):
        lhs = la.matmul(F, w.phi, SB.forms[t], w.phi.T.copy())
        rhs = F.zeros((SA.d, SA.d))
        for s in range(SA.e):
            if w.phi_hat[s, t]:
                rhs = F.add(rhs, F.mul(w.phi_hat[s, t], twisted[s]))
        if not la.mat_eq(lhs, rhs):
            return False
    return True


def symplectic_basis(F, Phi):
    """T with T Phi T^T the standard symplectic form [[0, I], [-I, 0]].

    Phi must be alternating and invertible.
    """
    d = Phi.shape[0]
    if d % 2:
        raise Genus2Error("odd-dimensional alternating form is degenerate")
    amb = F.eye(d)
    es, fs = [], []
    cur = Phi
    while amb.shape[0]:
        u = amb[0]
        G = la.matmul(F, amb, Phi, amb.T.copy())
        nz = np.nonzero(G[0])[0]
        if len(nz) == 0:
            raise Genus2Error("form is degenerate on the working subspace")
        j = int(nz[0])
        v = F.mul(F.inv(G[0, j]), amb[j])
        es.append(u)
        fs.append(v)
        pair = np.stack([u, v])
        rest = la.null_space_left(
            F, F.matmul(Phi, pair.T.copy()))
        # intersect with the current ambient space
        amb_sub = la.Subspace(F, d, amb)
        rest_sub = la.Subspace(F, d, rest)
        amb = amb_sub.intersect(rest_sub).basis
    T = np.stack(es + fs)
    m = d // 2
    want = F.zeros((d, d))
    want[:m, m:] = F.eye(m)
    want[m:, :m] = F.neg(F.eye(m))
    got = la.matmul(F, T, Phi, T.T.copy())
    if not la.mat_eq(got, want):
        raise Genus2Error("symplectic standardization failed")
    return T
