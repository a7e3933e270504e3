"""Canonical decomposition of pairs of alternating forms.

A fully nondegenerate pair splits orthogonally into "sloped" blocks
(even-dimensional, hyperbolic corners (I, C(a(x)^c))) and "flat" blocks
(odd-dimensional, hyperbolic corners ([I_m|0], [0|I_m])).  The block
multiset is a congruence invariant; the basis change realizing it is
returned and verified on every call.

Also provides the Kronecker decomposition of arbitrary matrix pairs up to
two-sided equivalence {P1, P2} -> {X P1 Y, X P2 Y}.
"""

from dataclasses import dataclass, field

import numpy as np

from genus2 import forms as fo
from genus2 import linalg as la
from genus2.errors import DimensionError, Genus2Error, UnsupportedStructureError
from genus2.gf import Poly


def find_nondeg_combination(S):
    """(lam, mu) with lam*Phi1 + mu*Phi2 invertible, scanning PG(1, q)."""
    return fo.find_invertible_combo(S)


@dataclass
class PencilBlock:
    kind: str                  # "sloped" | "flat"
    a: Poly = None             # sloped: irreducible polynomial
    c: int = 0                 # sloped: exponent
    m: int = 0                 # flat: size (dimension 2m + 1)
    combo: tuple = (1, 0, 0, 1)  # 2x2 recombination giving the canonical corners
    start: int = 0             # row offset inside the decomposition basis
    corner1: np.ndarray = None  # corners of the *original* pair in block basis
    corner2: np.ndarray = None
    e_rows: int = 0            # E-side size (rows of the corners)

    @property
    def dimension(self):
        if self.kind == "sloped":
            return 2 * self.c * self.a.degree
        return 2 * self.m + 1

    def sort_key(self):
        if self.kind == "sloped":
            return (0, self.a.degree, self.a.coeffs, -self.c)
        return (1, -self.m)

    def invariant(self):
        if self.kind == "sloped":
            return ("sloped", self.a.coeffs, self.c)
        return ("flat", self.m)

    def __repr__(self):
        if self.kind == "sloped":
            return f"Sloped(a={self.a!r}, c={self.c})"
        return f"Flat(m={self.m})"


@dataclass
class PencilDecomposition:
    S: fo.SystemOfForms
    T: np.ndarray              # d x d basis change; rows are the new basis
    blocks: list

    def block_rows(self, i):
        b = self.blocks[i]
        return self.T[b.start : b.start + b.dimension]

    def invariant_multiset(self):
        return sorted(b.invariant() for b in self.blocks)

    def dimension_multiset(self):
        return sorted(b.dimension for b in self.blocks)


def _B(F, Phi, u, v):
    return int(F.matmul(F.matmul(u[None, :], Phi), v[:, None])[0, 0])


def _gram(F, Phi, rows_u, rows_v):
    return la.matmul(F, rows_u, Phi, rows_v.T.copy())


def _min_flat_chain(F, P1, P2, max_m):
    """Smallest-degree chain c_0..c_m with c0 P2 = 0, c_j P1 = c_{j+1} P2,
    c_m P1 = 0; or None.  Chains certify singular (polynomial) pencils."""
    n = P1.shape[0]
    for m in range(0, max_m + 1):
        # unknowns: stacked (c_0, ..., c_m); conditions as columns
        cols = []
        width = (m + 1) * n
        # c_0 P2 = 0
        blockA = F.zeros((width, n))
        blockA[0:n] = P2
        cols.append(blockA)
        for j in range(m):
            blk = F.zeros((width, n))
            blk[j * n : (j + 1) * n] = P1
            blk[(j + 1) * n : (j + 2) * n] = F.neg(P2)
            cols.append(blk)
        blk = F.zeros((width, n))
        blk[m * n :] = P1
        cols.append(blk)
        A = np.concatenate(cols, axis=1)
        ker = la.null_space_left(F, A)
        if ker.shape[0] == 0:
            continue
        sol = ker[0]
        chain = np.stack([sol[j * n : (j + 1) * n] for j in range(m + 1)])
        if la.rank(F, chain) != m + 1:
            raise Genus2Error("minimal chain vectors are dependent")
        return chain
    return None


def _solve_flat_duals(F, P1, P2, chain):
    """Rows u_0..u_{m-1} with B1(u_i, c_j) = [i==j], B2(u_i, c_j) = [j==i+1].

    The duals are additionally aligned so that the functional B2(., u_i)
    agrees with B1(., u_{i+1}) modulo the chain functionals; this is what
    makes the flat block split off (its joint perp is then a complement).
    """
    m = chain.shape[0] - 1
    n = P1.shape[0]
    # chain must be isotropic for both forms
    for P in (P1, P2):
        if np.any(_gram(F, P, chain, chain)):
            raise Genus2Error("flat chain span is not bi-isotropic")
    if m == 0:
        return F.zeros((0, n))
    # joint solve: unknowns (u_0, ..., u_{m-1}, lambda), equations as columns
    chain_funcs = np.concatenate(
        [F.matmul(P1, chain.T.copy()), F.matmul(P2, chain.T.copy())], axis=1)
    nlam = 2 * (m + 1) * (m - 1)
    width = m * n + nlam
    A_rows = []
    rhs_list = []
    # (a) pairing conditions with the chain
    for i in range(m):
        for t, P in enumerate((P1, P2)):
            Pc = F.matmul(P, chain.T.copy())
            for j in range(m + 1):
                row = F.zeros(width)
                row[i * n : (i + 1) * n] = Pc[:, j]
                A_rows.append(row)
                rhs_list.append(1 if (t == 0 and i == j) else
                                (1 if (t == 1 and j == i + 1) else 0))
    for i in range(m - 1):
        # column vector equation: P2 u_i^T - P1 u_{i+1}^T - chain_funcs @ lam_i = 0
        for r in range(n):
            row = F.zeros(width)
            row[i * n : (i + 1) * n] = P2[r, :]
            row[(i + 1) * n : (i + 2) * n] = F.neg(P1[r, :])
            base = m * n + i * 2 * (m + 1)
            row[base : base + 2 * (m + 1)] = F.neg(chain_funcs[r, :])
            A_rows.append(row)
            rhs_list.append(0)
    A = np.stack(A_rows)
    sol = la.solve_left(F, A.T.copy(), F.asarray(rhs_list))
    if sol is None:
        raise Genus2Error("flat dual solve failed")
    U = sol[: m * n].reshape(m, n).copy()
    # correct self-pairings: u_i += sum_t c[i,t] chain_t
    a = _gram(F, P1, U, U)
    b = _gram(F, P2, U, U)
    if np.any(a) or np.any(b):
        rows = []
        rhs = []
        nc = m * (m + 1)
        for i in range(m):
            for j in range(i + 1, m):
                rowa = F.zeros(nc)
                rowa[j * (m + 1) + i] = 1            # +c[j,i]
                rowa[i * (m + 1) + j] = F.neg(1)     # -c[i,j]
                rows.append(rowa)
                rhs.append(int(F.neg(a[i, j])))
                rowb = F.zeros(nc)
                rowb[j * (m + 1) + i + 1] = 1        # +c[j,i+1]
                rowb[i * (m + 1) + j + 1] = F.neg(1)  # -c[i,j+1]
                rows.append(rowb)
                rhs.append(int(F.neg(b[i, j])))
        if rows:
            Amat = np.stack(rows)  # one row per condition, columns = unknowns
            sol = la.solve_left(F, Amat.T.copy(), F.asarray(rhs))
            if sol is None:
                raise Genus2Error("flat isotropy correction unsolvable")
            C = sol.reshape(m, m + 1)
            U = F.add(U, F.matmul(C, chain))
    return U


def _canonical_flat_forms(F, m):
    """Gram matrices of the canonical flat block of dimension 2m + 1."""
    psi1 = F.zeros((m, m + 1))
    psi2 = F.zeros((m, m + 1))
    for i in range(m):
        psi1[i, i] = 1
        psi2[i, i + 1] = 1
    return fo.hyperbolic_pair(F, psi1, psi2)


def _perp_rows(F, forms_list, block_rows, n):
    """Basis of {z : z Phi block^T = 0 for all forms}."""
    mats = [F.matmul(P, block_rows.T.copy()) for P in forms_list]
    A = np.concatenate(mats, axis=1)
    return la.null_space_left(F, A)


def _max_order_vector(F, sigma, a, c):
    """A row vector of maximal order a(x)^c for sigma (from its Jordan data)."""
    J, P, blocks = la.generalized_jordan(F, sigma)
    off = 0
    for (ai, ci) in blocks:
        if ai == a and ci == c:
            return P[off].copy()
        off += ai.degree * ci
    raise Genus2Error("no vector of the requested order")


def _sigma_chain(F, v, sigma, length):
    rows = [v]
    cur = v
    for _ in range(length - 1):
        cur = F.matmul(cur[None, :], sigma)[0]
        rows.append(cur)
    return np.stack(rows)


def _peel_sloped_component(F, P1, P2, sigma, a, cexp):
    """Hyperbolic cyclic pairs of one primary component (P1 invertible).

    Returns a list of (E_rows, F_rows, a, c) in component coordinates.
    """
    n = P1.shape[0]
    amb = F.eye(n)
    out = []
    cur_P1, cur_P2 = P1, P2
    while amb.shape[0] > 0:
        cur_sigma = la.matmul(F, cur_P2, la.inv(F, cur_P1))
        mp = la.min_poly(F, cur_sigma)
        c = _exact_log(mp, a)
        if c == 0:
            raise Genus2Error("component lost its primary structure")
        N = a.degree * c
        u = _max_order_vector(F, cur_sigma, a, c)
        E = _sigma_chain(F, u, cur_sigma, N)
        if np.any(_gram(F, cur_P1, E, E)) or np.any(_gram(F, cur_P2, E, E)):
            raise Genus2Error("cyclic module is not bi-isotropic")
        # dual vector: B1(u sigma^i, v) = [i == N-1]
        A = F.matmul(cur_P1, E.T.copy())  # columns: functionals of the E-chain
        rhs = F.zeros(N)
        rhs[N - 1] = 1
        v = la.solve_left(F, A, rhs)
        if v is None:
            raise Genus2Error("sloped dual solve failed")
        Fr = _sigma_chain(F, v, cur_sigma, N)
        if np.any(_gram(F, cur_P1, Fr, Fr)) or np.any(_gram(F, cur_P2, Fr, Fr)):
            raise Genus2Error("dual cyclic module is not bi-isotropic")
        blk = np.concatenate([E, Fr], axis=0)
        G = _gram(F, cur_P1, blk, blk)
        if not la.is_invertible(F, G):
            raise Genus2Error("hyperbolic block is degenerate")
        out.append((F.matmul(E, amb), F.matmul(Fr, amb), a, c))
        rest = _perp_rows(F, [cur_P1, cur_P2], blk, amb.shape[0])
        if rest.shape[0] != amb.shape[0] - 2 * N:
            raise Genus2Error("perp dimension mismatch in sloped peel")
        if rest.shape[0] == 0:
            break
        amb = F.matmul(rest, amb)
        cur_P1 = la.matmul(F, rest, cur_P1, rest.T.copy())
        cur_P2 = la.matmul(F, rest, cur_P2, rest.T.copy())
    return out


def _exact_log(mp, a):
    """c with mp == a^c (mp a power of irreducible a)."""
    c = 0
    cur = mp
    while cur.degree > 0:
        q, r = cur.divmod(a)
        if not r.is_zero():
            raise Genus2Error("minimal polynomial is not a power of the expected irreducible")
        cur = q
        c += 1
    return c


def _point_component(F, P1, P2):
    """Split off one projective-point primary component of a regular pencil.

    Used in the rare configuration where every combination over F_q is
    singular (then q < d).  Returns (component_rows, rest_rows).
    """
    n = P1.shape[0]
    points = [(1, 0), (0, 1)] + [(1, c) for c in range(1, F.q)]
    for lam, mu in points:
        A = F.add(F.mul(lam, P1), F.mul(mu, P2))
        lam2, mu2 = (0, 1) if mu == 0 else (1, 0)
        B = F.add(F.mul(lam2, P1), F.mul(mu2, P2))
        N = la.Subspace(F, n, la.null_space_left(F, A))
        if N.dim == 0:
            continue
        while True:
            NB = F.matmul(N.basis, B)
            target = la.Subspace(F, n, NB)
            rows = _preimage_rows(F, A, target)
            N2 = la.Subspace(F, n, rows)
            if N2.dim == N.dim:
                break
            N = N2
        if 0 < N.dim < n:
            comp = N.basis
            rest = _perp_rows(F, [P1, P2], comp, n)
            if rest.shape[0] != n - N.dim:
                raise Genus2Error("point component perp has wrong dimension")
            both = np.concatenate([comp, rest], axis=0)
            if not la.is_invertible(F, both):
                raise Genus2Error("point component split is not direct")
            return comp, rest
    raise Genus2Error("no proper point component found in the rare configuration")


def _preimage_rows(F, A, target):
    """Basis of {v : v @ A lies in the row space of target}."""
    n = A.shape[0]
    if target.dim == 0:
        return la.null_space_left(F, A)
    # unknowns (v, c): v A - c T = 0
    big = np.concatenate([A, F.neg(target.basis)], axis=0)
    ker = la.null_space_left(F, big)
    if ker.shape[0] == 0:
        return F.zeros((0, n))
    return ker[:, :n]


def _decompose_records(S):
    """Fully refined orthogonal decomposition as block records.

    Each record: dict(kind, E, Fr, a, c, m, combo) with E/Fr row bases in
    the original coordinates.
    """
    F = S.F
    if S.e != 2:
        raise DimensionError("pencil decomposition requires e = 2")
    rad, codim = fo.radicals(S)
    if rad.dim or codim:
        raise Genus2Error("pencil decomposition requires a fully nondegenerate pair")

    records = []

    def process(amb):
        k = amb.shape[0]
        if k == 0:
            return
        sub = S.restrict(amb)
        P1, P2 = sub.forms[0], sub.forms[1]
        pt = fo.find_invertible_combo(sub)
        if pt is None:
            chain = _min_flat_chain(F, P1, P2, (k - 1) // 2)
            if chain is not None:
                m = chain.shape[0] - 1
                if m == 0:
                    raise Genus2Error("common radical vector found mid-decomposition")
                U = _solve_flat_duals(F, P1, P2, chain)
                blk = np.concatenate([U, chain], axis=0)
                want = _canonical_flat_forms(F, m)
                for t, P in enumerate((P1, P2)):
                    if not la.mat_eq(_gram(F, P, blk, blk), want.forms[t]):
                        raise Genus2Error("flat block Gram is not canonical")
                records.append(dict(kind="flat", E=F.matmul(U, amb),
                                    Fr=F.matmul(chain, amb), m=m,
                                    combo=(1, 0, 0, 1)))
                rest = _perp_rows(F, [P1, P2], blk, k)
                if rest.shape[0] != k - (2 * m + 1):
                    raise Genus2Error("flat perp dimension mismatch")
                process(F.matmul(rest, amb))
                return
            comp, rest = _point_component(F, P1, P2)
            process(F.matmul(comp, amb))
            process(F.matmul(rest, amb))
            return
        lam, mu = pt
        lam2, mu2 = fo._complementary_point(F, lam, mu)
        H = F.asarray([[lam, mu], [lam2, mu2]])
        subH = sub.recombine(H)
        M1, M2 = subH.forms[0], subH.forms[1]
        sigma = la.matmul(F, M2, la.inv(F, M1))
        mp = la.min_poly(F, sigma)
        from genus2.gf import poly_factor

        facs = poly_factor(mp)
        if len(facs) > 1:
            for a, c in facs:
                aM = la.poly_eval_mat(F, a, sigma)
                power = aM
                for _ in range(c - 1):
                    power = F.matmul(power, aM)
                comp = la.null_space_left(F, power)
                process(F.matmul(comp, amb))
            return
        a, c = facs[0]
        for E, Fr, ai, ci in _peel_sloped_component(F, M1, M2, sigma, a, c):
            records.append(dict(kind="sloped", E=F.matmul(E, amb),
                                Fr=F.matmul(Fr, amb), a=ai, c=ci,
                                combo=(lam, mu, lam2, mu2)))

    process(F.eye(S.d))
    total = sum((2 * r["m"] + 1) if r["kind"] == "flat"
                else 2 * r["a"].degree * r["c"] for r in records)
    if total != S.d:
        raise Genus2Error("block dimensions do not account for the space")
    return records


def isotropic_split(S):
    """V = E (+) F with both summands totally isotropic for both forms."""
    F = S.F
    records = _decompose_records(S)
    e_rows = [r["E"] for r in records if r["E"].shape[0]]
    f_rows = [r["Fr"] for r in records]
    E = la.Subspace(F, S.d, np.concatenate(e_rows, axis=0) if e_rows else None)
    Fs = la.Subspace(F, S.d, np.concatenate(f_rows, axis=0))
    for t in range(2):
        for sub in (E, Fs):
            if sub.dim and np.any(_gram(F, S.forms[t], sub.basis, sub.basis)):
                raise Genus2Error("isotropic split failed verification")
    if E.dim + Fs.dim != S.d:
        raise Genus2Error("isotropic split is not a direct decomposition")
    return E, Fs


def orth_decompose(S):
    """Fully refined orthogonal decomposition with canonical sloped/flat blocks."""
    F = S.F
    records = _decompose_records(S)

    blocks = []
    row_stack = []
    for r in records:
        if r["kind"] == "flat":
            rows = np.concatenate([r["E"], r["Fr"]], axis=0)
            blk = PencilBlock(kind="flat", m=r["m"], combo=r["combo"])
        else:
            lam, mu, lam2, mu2 = r["combo"]
            H = F.asarray([[lam, mu], [lam2, mu2]])
            SH = S.recombine(H)
            G1 = _gram(F, SH.forms[0], r["E"], r["Fr"])
            Fr_fixed = F.matmul(la.inv(F, G1).T.copy(), r["Fr"])
            rows = np.concatenate([r["E"], Fr_fixed], axis=0)
            blk = PencilBlock(kind="sloped", a=r["a"], c=r["c"], combo=r["combo"])
        blocks.append((blk, rows))

    def tiebreak(item):
        rows = item[1]
        nz = np.nonzero(rows[0])[0]
        return int(nz[0]) if len(nz) else 0

    blocks.sort(key=lambda item: (item[0].sort_key(), tiebreak(item)))
    off = 0
    final_blocks = []
    for blk, rows in blocks:
        blk.start = off
        blk.e_rows = rows.shape[0] // 2 if blk.kind == "sloped" else blk.m
        off += rows.shape[0]
        row_stack.append(rows)
        final_blocks.append(blk)
    T = np.concatenate(row_stack, axis=0)
    if not la.is_invertible(F, T):
        raise Genus2Error("decomposition basis is singular")
    dec = PencilDecomposition(S=S, T=T, blocks=final_blocks)
    _verify_decomposition(dec)
    return dec


def _canonical_block_forms(F, blk):
    if blk.kind == "flat":
        return _canonical_flat_forms(F, blk.m)
    n = blk.a.degree * blk.c
    ac = Poly.one(F)
    for _ in range(blk.c):
        ac = ac.mul(blk.a)
    return fo.hyperbolic_pair(F, F.eye(n), la.companion(F, ac))


def _verify_decomposition(dec):
    F = dec.S.F
    T = dec.T
    transformed = [la.matmul(F, T, dec.S.forms[t], T.T.copy()) for t in range(2)]
    # off-diagonal blocks vanish for the original forms
    for t in range(2):
        M = transformed[t].copy()
        for blk in dec.blocks:
            s, dim = blk.start, blk.dimension
            M[s : s + dim, s : s + dim] = 0
        if np.any(M):
            raise Genus2Error("blocks are not orthogonal")
    # each diagonal block is canonical after its recombination
    for blk in dec.blocks:
        s, dim = blk.start, blk.dimension
        lam, mu, lam2, mu2 = blk.combo
        want = _canonical_block_forms(F, blk)
        got1 = F.add(F.mul(lam, transformed[0][s : s + dim, s : s + dim]),
                     F.mul(mu, transformed[1][s : s + dim, s : s + dim]))
        got2 = F.add(F.mul(lam2, transformed[0][s : s + dim, s : s + dim]),
                     F.mul(mu2, transformed[1][s : s + dim, s : s + dim]))
        if not (la.mat_eq(got1, want.forms[0]) and la.mat_eq(got2, want.forms[1])):
            raise Genus2Error("block is not in canonical form")
        er = blk.e_rows
        blk.corner1 = transformed[0][s : s + er, s + er : s + dim].copy()
        blk.corner2 = transformed[1][s : s + er, s + er : s + dim].copy()


def standard_sloped_presentation(S):
    """(T, Psi) with T Phi_1 T^T = hyp(I), T Phi_2 T^T = hyp(Psi), Psi in
    generalized Jordan form.  Requires Phi_1 invertible; works even when
    the two forms are proportional (degenerate value span)."""
    F = S.F
    if not la.is_invertible(F, S.forms[0]):
        raise Genus2Error("standard sloped presentation requires invertible Phi_1")
    T0 = hyperbolize_sloped(S)
    H = S.transform(T0)
    n = S.d // 2
    P1 = H.forms[0][:n, n:].copy()
    P2 = H.forms[1][:n, n:].copy()
    # F-side fix makes corner 1 the identity; then Jordanize corner 2
    Ffix = la.inv(F, P1).T.copy()
    Psi0 = la.matmul(F, P2, la.inv(F, P1))
    J, P, _blocks = la.generalized_jordan(F, Psi0)
    A = P
    B = la.inv(F, P).T.copy()
    T = F.zeros((S.d, S.d))
    T[:n] = F.matmul(A, T0[:n])
    T[n:] = la.matmul(F, B, Ffix, T0[n:])
    got1 = la.matmul(F, T, S.forms[0], T.T.copy())
    got2 = la.matmul(F, T, S.forms[1], T.T.copy())
    want = fo.hyperbolic_pair(F, F.eye(n), J)
    if not (la.mat_eq(got1, want.forms[0]) and la.mat_eq(got2, want.forms[1])):
        raise Genus2Error("standard sloped presentation failed verification")
    return T, J


# ---------------------------------------------------------------------------
# Kronecker decomposition of matrix pairs up to equivalence
# ---------------------------------------------------------------------------


def _min_column_chain(F, P1, P2, max_eps):
    """Columns c_0..c_eps with P2 c_0 = 0, P1 c_j = P2 c_{j+1}, P1 c_eps = 0."""
    n, m = P1.shape
    for eps in range(0, max_eps + 1):
        width = (eps + 1) * m
        cols = []
        blk = F.zeros((n, width))
        blk[:, :m] = P2
        cols.append(blk)
        for j in range(eps):
            b = F.zeros((n, width))
            b[:, j * m : (j + 1) * m] = P1
            b[:, (j + 1) * m : (j + 2) * m] = F.neg(P2)
            cols.append(b)
        b = F.zeros((n, width))
        b[:, eps * m :] = P1
        cols.append(b)
        A = np.concatenate(cols, axis=0)  # conditions stacked as rows
        ker = la.null_space_right(F, A)
        if ker.shape[0]:
            sol = ker[0]
            chain = np.stack([sol[j * m : (j + 1) * m] for j in range(eps + 1)])
            if la.rank(F, chain) != eps + 1:
                raise Genus2Error("column chain vectors are dependent")
            return chain  # rows of this matrix are the chain columns
    return None


def kronecker_decompose(F, psi1, psi2):
    """Canonical form of a matrix pair up to {X psi_i Y}.

    Returns (X, Y, blocks): blocks are ("sloped", a, c) for square
    (I, C(a^c)) pieces and ("flat", eps) / ("flat_t", eps) for the
    eps x (eps+1) singular pieces and their transposes.  X psi_i Y is
    block diagonal with the canonical matrices in block order.
    """
    psi1 = F.asarray(psi1)
    psi2 = F.asarray(psi2)
    n, m = psi1.shape
    if psi2.shape != (n, m):
        raise DimensionError("pair shapes differ")
    if n == 0 and m == 0:
        return F.zeros((0, 0)), F.zeros((0, 0)), []
    # right (column) chains
    chain = _min_column_chain(F, psi1, psi2, m - 1) if m else None
    if chain is not None:
        eps = chain.shape[0] - 1
        C = chain.T.copy()  # m x (eps+1): chain columns
        if eps == 0:
            # common null column: no row part, complement the column
            R = F.zeros((0, n))
            rest_rows = F.eye(n)
            piv = int(np.nonzero(C[:, 0])[0][0])
            rest_cols = F.zeros((m, m - 1))
            for t, i in enumerate(j for j in range(m) if j != piv):
                rest_cols[i, t] = 1
        else:
            # dual rows: r_i psi1 c_j = [i==j], r_i psi2 c_j = [j==i+1]
            A = np.concatenate([F.matmul(psi1, C), F.matmul(psi2, C)], axis=1)
            rows = []
            for i in range(eps):
                rhs = F.zeros(2 * (eps + 1))
                rhs[i] = 1
                rhs[(eps + 1) + i + 1] = 1
                r = la.solve_left(F, A, rhs)
                if r is None:
                    raise Genus2Error("kronecker dual row solve failed")
                rows.append(r)
            R = np.stack(rows)
            rest_rows = la.null_space_left(F, A)
            rest_cols = la.null_space_right(
                F, np.concatenate([F.matmul(R, psi1), F.matmul(R, psi2)], axis=0)
            ).T.copy()
        if rest_rows.shape[0] != n - eps:
            raise Genus2Error("kronecker rest rows have wrong dimension")
        if rest_cols.shape[1] != m - (eps + 1):
            raise Genus2Error("kronecker rest columns have wrong dimension")
        sub1 = la.matmul(F, rest_rows, psi1, rest_cols)
        sub2 = la.matmul(F, rest_rows, psi2, rest_cols)
        Xs, Ys, blocks = kronecker_decompose(F, sub1, sub2)
        rows_full = np.concatenate([R, F.matmul(Xs, rest_rows)], axis=0)
        cols_full = np.concatenate([C, F.matmul(rest_cols, Ys)], axis=1)
        blocks = [("flat", eps)] + blocks
        _check_kron(F, psi1, psi2, rows_full, cols_full, blocks)
        return rows_full, cols_full, blocks
    # left chains: transpose, recurse, transpose back
    chain_t = _min_column_chain(F, psi1.T.copy(), psi2.T.copy(), n - 1) if n else None
    if chain_t is not None:
        Xt, Yt, blk_t = kronecker_decompose(F, psi1.T.copy(), psi2.T.copy())
        blocks = [("flat_t", b[1]) if b[0] == "flat" else b for b in blk_t]
        X, Y = Yt.T.copy(), Xt.T.copy()
        _check_kron(F, psi1, psi2, X, Y, blocks)
        return X, Y, blocks
    # regular part
    if n != m:
        raise Genus2Error("regular kronecker part must be square")
    if not la.is_invertible(F, psi1):
        raise UnsupportedStructureError(
            "regular pencil with singular first matrix (eigenvalue at infinity); "
            "recombine the pair before decomposing")
    T = la.matmul(F, la.inv(F, psi1), psi2)
    J, P, jb = la.generalized_jordan(F, T)
    X = la.matmul(F, P, la.inv(F, psi1))
    Y = la.inv(F, P)
    blocks = [("sloped", a, c) for a, c in jb]
    _check_kron(F, psi1, psi2, X, Y, blocks)
    return X, Y, blocks


def _canonical_kron_matrices(F, blocks):
    rows = sum((b[1] if b[0] == "flat" else (b[1] + 1) if b[0] == "flat_t"
                else b[1].degree * b[2] if b[0] == "sloped" else 0) for b in blocks)
    cols = sum((b[1] + 1 if b[0] == "flat" else b[1] if b[0] == "flat_t"
                else b[1].degree * b[2] if b[0] == "sloped" else 0) for b in blocks)
    M1 = F.zeros((rows, cols))
    M2 = F.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        if b[0] == "flat":
            eps = b[1]
            for i in range(eps):
                M1[r + i, c + i] = 1
                M2[r + i, c + i + 1] = 1
            r += eps
            c += eps + 1
        elif b[0] == "flat_t":
            eps = b[1]
            for i in range(eps):
                M1[r + i, c + i] = 1
                M2[r + i + 1, c + i] = 1
            r += eps + 1
            c += eps
        else:
            a, cc = b[1], b[2]
            nn = a.degree * cc
            ac = Poly.one(F)
            for _ in range(cc):
                ac = ac.mul(a)
            M1[r : r + nn, c : c + nn] = F.eye(nn)
            M2[r : r + nn, c : c + nn] = la.companion(F, ac)
            r += nn
            c += nn
    return M1, M2


def _check_kron(F, psi1, psi2, X, Y, blocks):
    w1, w2 = _canonical_kron_matrices(F, blocks)
    g1 = la.matmul(F, X, psi1, Y)
    g2 = la.matmul(F, X, psi2, Y)
    if not (la.mat_eq(g1, w1) and la.mat_eq(g2, w2)):
        raise Genus2Error("kronecker decomposition failed verification")


def standardize_flat(F, psi1, psi2):
    """(X, Y) with X psi1 Y = [I|0], X psi2 Y = [0|I] for a flat
    indecomposable pair of shape n x (n+1)."""
    psi1, psi2 = F.asarray(psi1), F.asarray(psi2)
    n, m = psi1.shape
    if m != n + 1:
        raise Genus2Error("flat standardization expects an n x (n+1) pair")
    if n == 0:
        return F.zeros((0, 0)), F.eye(1)
    # phase 1: gaussian reduction of psi1 to [I | 0]
    R, Trow, piv = la.rref(F, psi1, want_transform=True)
    if len(piv) != n:
        raise Genus2Error("flat pair has a degenerate first matrix")
    perm = piv + [c for c in range(m) if c not in piv]
    Y = F.zeros((m, m))
    for t, c in enumerate(perm):
        Y[c, t] = 1
    X = Trow
    cur1 = la.matmul(F, X, psi1, Y)  # [I | b]
    fix = F.eye(m)
    fix[:n, n:] = F.neg(cur1[:, n:])
    Y = F.matmul(Y, fix)
    # phase 1.5: pole placement.  Column operations with the last column
    # change U by rank-one v c; for an indecomposable pair (U, v) is a
    # controllable pair, so c can force char poly x^n (Ackermann).
    cur2 = la.matmul(F, X, psi2, Y)
    U = cur2[:, :n].copy()
    v = cur2[:, n].copy()
    K_rows = []
    w = v
    for _ in range(n):
        K_rows.append(w)
        w = F.matmul(U, w[:, None])[:, 0]
    K = np.stack(K_rows, axis=1)  # columns v, Uv, ...
    if not la.is_invertible(F, K):
        raise Genus2Error("pair is not flat-indecomposable (uncontrollable)")
    Un = F.eye(n)
    for _ in range(n):
        Un = F.matmul(Un, U)
    last = la.inv(F, K)[n - 1]
    c = F.neg(F.matmul(last[None, :], Un)[0])
    fix = F.eye(m)
    fix[n, :n] = c
    Y = F.matmul(Y, fix)
    # phase 2: similarity to the nilpotent companion
    cur2 = la.matmul(F, X, psi2, Y)
    U = cur2[:, :n].copy()
    J, B, jb = la.generalized_jordan(F, U)
    if len(jb) != 1:
        raise Genus2Error("pair is not flat-indecomposable")
    X = F.matmul(B, X)
    ext = F.eye(m)
    ext[:n, :n] = la.inv(F, B)
    Y = F.matmul(Y, ext)
    # phase 3: cyclic-algebra element sending the last column to e_n
    cur2 = la.matmul(F, X, psi2, Y)
    C = cur2[:, :n].copy()
    v = cur2[:, n].copy()
    powers = [F.eye(n)]
    for _ in range(n - 1):
        powers.append(F.matmul(powers[-1], C))
    A = np.stack([F.matmul(P, v[:, None])[:, 0] for P in powers]).T.copy()
    target = F.zeros(n)
    target[n - 1] = 1
    g = la.solve_right(F, A, target)
    if g is None:
        raise Genus2Error("flat pair: final column is not cyclic")
    Tmat = F.zeros((n, n))
    for coef, P in zip(g, powers):
        if coef:
            Tmat = F.add(Tmat, F.mul(coef, P))
    if not la.is_invertible(F, Tmat):
        raise Genus2Error("cyclic-algebra element is singular")
    X = F.matmul(Tmat, X)
    ext = F.eye(m)
    ext[:n, :n] = la.inv(F, Tmat)
    Y = F.matmul(Y, ext)
    # phase 4: clear the bottom row via a column operation
    cur2 = la.matmul(F, X, psi2, Y)
    b = cur2[n - 1, :n].copy()
    fix = F.eye(m)
    fix[n, :n] = F.neg(b)
    Y = F.matmul(Y, fix)
    got1 = la.matmul(F, X, psi1, Y)
    got2 = la.matmul(F, X, psi2, Y)
    want1 = F.zeros((n, m))
    want2 = F.zeros((n, m))
    for i in range(n):
        want1[i, i] = 1
        want2[i, i + 1] = 1
    if not (la.mat_eq(got1, want1) and la.mat_eq(got2, want2)):
        raise Genus2Error("flat standardization failed verification")
    return X, Y


def sloped_corner_equivalence(F, A_pair, B_pair):
    """X, Y with X B_t Y = A_t (t = 1, 2) for square corner pairs, or None.

    Both pairs are recombined at a common invertible projective point and
    reduced to (I, J) with J in generalized Jordan form; equivalence holds
    iff the forms agree.
    """
    A1, A2 = A_pair
    B1, B2 = B_pair
    n = A1.shape[0]
    if B1.shape[0] != n:
        return None
    if n == 0:
        return F.zeros((0, 0)), F.zeros((0, 0))
    pt = None
    cands = [(1, 0), (0, 1)] + [(1, c) for c in range(1, F.q)]
    for lam, mu in cands[: min(F.q + 1, 2 * n + 2)]:
        MA = F.add(F.mul(lam, A1), F.mul(mu, A2))
        MB = F.add(F.mul(lam, B1), F.mul(mu, B2))
        if la.is_invertible(F, MA) and la.is_invertible(F, MB):
            pt = (lam, mu)
            break
    if pt is None:
        for lam, mu in cands:
            MA = F.add(F.mul(lam, A1), F.mul(mu, A2))
            MB = F.add(F.mul(lam, B1), F.mul(mu, B2))
            if la.is_invertible(F, MA) and la.is_invertible(F, MB):
                pt = (lam, mu)
                break
    if pt is None:
        return None
    lam, mu = pt
    lam2, mu2 = fo._complementary_point(F, lam, mu)

    def reduce(P1o, P2o):
        Pa = F.add(F.mul(lam, P1o), F.mul(mu, P2o))
        Pb = F.add(F.mul(lam2, P1o), F.mul(mu2, P2o))
        T = la.matmul(F, la.inv(F, Pa), Pb)
        J, P, _ = la.generalized_jordan(F, T)
        return J, la.matmul(F, P, la.inv(F, Pa)), la.inv(F, P)

    JA, XA, YA = reduce(A1, A2)
    JB, XB, YB = reduce(B1, B2)
    if not la.mat_eq(JA, JB):
        return None
    X = la.matmul(F, la.inv(F, XA), XB)
    Y = la.matmul(F, YB, la.inv(F, YA))
    for Bt, At in ((B1, A1), (B2, A2)):
        if not la.mat_eq(la.matmul(F, X, Bt, Y), At):
            raise Genus2Error("corner equivalence failed verification")
    return X, Y


def hyperbolize_sloped(S):
    """T with T Phi_t T^T in hyperbolic shape (zero diagonal half-blocks).

    Works for any pair admitting an invertible combination, including
    pairs with 1-dimensional value span (proportional forms).
    """
    F = S.F
    pt = fo.find_invertible_combo(S)
    if pt is None:
        raise Genus2Error("pair is not sloped: no invertible combination")
    lam, mu = pt
    lam2, mu2 = fo._complementary_point(F, lam, mu)
    SH = S.recombine(F.asarray([[lam, mu], [lam2, mu2]]))
    M1, M2 = SH.forms[0], SH.forms[1]
    sigma = la.matmul(F, M2, la.inv(F, M1))
    from genus2.gf import poly_factor

    mp = la.min_poly(F, sigma)
    e_rows, f_rows = [], []
    for a, c in poly_factor(mp):
        aM = la.poly_eval_mat(F, a, sigma)
        power = aM
        for _ in range(c - 1):
            power = F.matmul(power, aM)
        comp = la.null_space_left(F, power)
        P1c = la.matmul(F, comp, M1, comp.T.copy())
        P2c = la.matmul(F, comp, M2, comp.T.copy())
        sig_c = la.matmul(F, P2c, la.inv(F, P1c))
        for E, Fr, _a, _c in _peel_sloped_component(F, P1c, P2c, sig_c, a, c):
            e_rows.append(F.matmul(E, comp))
            f_rows.append(F.matmul(Fr, comp))
    T = np.concatenate(e_rows + f_rows, axis=0)
    n = S.d // 2
    for t in range(2):
        G = la.matmul(F, T, S.forms[t], T.T.copy())
        if np.any(G[:n, :n]) or np.any(G[n:, n:]):
            raise Genus2Error("hyperbolization failed")
    return T
