"""Dense exact linear algebra over a FieldCtx.

Matrices are numpy arrays of encoded field elements; vectors are rows and
matrices act on the right (u -> u @ M), matching the form convention
u . v = u @ Phi @ v^T used throughout the package.
"""

import numpy as np

from genus2.errors import DimensionError, Genus2Error
from genus2.gf import Poly
from genus2.rng import Rng


def matmul(F, *mats):
    out = mats[0]
    for M in mats[1:]:
        out = F.matmul(out, M)
    return out


def mat_eq(A, B):
    return A.shape == B.shape and np.array_equal(np.asarray(A), np.asarray(B))


def rref(F, A, want_transform=False):
    """Reduced row echelon form.  Returns (R, pivots) or (R, T, pivots).

    T @ A == R with T invertible; pivots is the list of pivot columns.
    """
    A = F.asarray(A).copy()
    rows, cols = A.shape
    T = F.eye(rows) if want_transform else None
    pivots = []
    pr = 0
    for c in range(cols):
        if pr == rows:
            break
        col = A[pr:, c]
        nz = np.nonzero(col)[0]
        if len(nz) == 0:
            continue
        i = pr + int(nz[0])
        if i != pr:
            A[[pr, i]] = A[[i, pr]]
            if T is not None:
                T[[pr, i]] = T[[i, pr]]
        piv = A[pr, c]
        if piv != 1:
            s = F.inv(piv)
            A[pr] = F.mul(A[pr], s)
            if T is not None:
                T[pr] = F.mul(T[pr], s)
        other = np.nonzero(A[:, c])[0]
        other = other[other != pr]
        if len(other):
            factors = A[other, c]
            A[other] = F.sub(A[other], F.mul(factors[:, None], A[pr][None, :]))
            if T is not None:
                T[other] = F.sub(T[other], F.mul(factors[:, None], T[pr][None, :]))
        pivots.append(c)
        pr += 1
    if want_transform:
        return A, T, pivots
    return A, pivots


def rank(F, A):
    if A.size == 0:
        return 0
    _, pivots = rref(F, A)
    return len(pivots)


def inv(F, A):
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise DimensionError("inverse of a non-square matrix")
    R, T, pivots = rref(F, A, want_transform=True)
    if len(pivots) != n:
        raise Genus2Error("matrix is singular")
    return T


def is_invertible(F, A):
    return A.shape[0] == A.shape[1] and rank(F, A) == A.shape[0]


def det(F, A):
    """Determinant by fraction-free-in-a-field elimination."""
    A = F.asarray(A).copy()
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise DimensionError("determinant of a non-square matrix")
    d = 1
    sign = 1
    for c in range(n):
        nz = np.nonzero(A[c:, c])[0]
        if len(nz) == 0:
            return 0
        i = c + int(nz[0])
        if i != c:
            A[[c, i]] = A[[i, c]]
            sign = -sign
        piv = A[c, c]
        d = int(F.mul(d, piv))
        rows = np.nonzero(A[c + 1 :, c])[0] + c + 1
        if len(rows):
            factors = F.mul(A[rows, c], F.inv(piv))
            A[rows, c:] = F.sub(A[rows, c:], F.mul(factors[:, None], A[c, c:][None, :]))
    if sign < 0:
        d = int(F.neg(d))
    return d


def solve_right(F, A, B):
    """X with A @ X = B, or None.  B may be a matrix or a vector."""
    vec = B.ndim == 1
    Bm = B[:, None] if vec else B
    if A.shape[0] != Bm.shape[0]:
        raise DimensionError("solve_right shape mismatch")
    aug = np.concatenate([F.asarray(A), F.asarray(Bm)], axis=1)
    R, pivots = rref(F, aug)
    n = A.shape[1]
    for r in range(len(pivots), R.shape[0]):
        if np.any(R[r, n:]):
            return None
    if any(c >= n for c in pivots):
        return None
    X = F.zeros((n, Bm.shape[1]))
    for r, c in enumerate(pivots):
        X[c] = R[r, n:]
    return X[:, 0] if vec else X


def solve_left(F, A, B):
    """X with X @ A = B, or None."""
    X = solve_right(F, A.T.copy(), (B.T if B.ndim == 2 else B).copy())
    if X is None:
        return None
    return X.T if X.ndim == 2 else X


def null_space_left(F, A):
    """Basis (rows, RREF) of {x : x @ A = 0}."""
    At = F.asarray(A).T.copy()
    R, pivots = rref(F, At)
    n = A.shape[0]
    free = [c for c in range(n) if c not in pivots]
    if not free:
        return F.zeros((0, n))
    basis = F.zeros((len(free), n))
    for bi, fc in enumerate(free):
        basis[bi, fc] = 1
        for r, pc in enumerate(pivots):
            basis[bi, pc] = F.neg(R[r, fc])
    R2, _ = rref(F, basis)
    return R2


def null_space_right(F, A):
    """Basis (rows) of {x : A @ x^T = 0}."""
    return null_space_left(F, A.T.copy())


class Subspace:
    """Subspace of F^n held via a canonical RREF row basis."""

    def __init__(self, F, n, basis=None):
        self.F = F
        self.n = n
        if basis is None or len(basis) == 0:
            self.basis = F.zeros((0, n))
        else:
            R, _ = rref(F, F.asarray(basis))
            keep = [i for i in range(R.shape[0]) if np.any(R[i])]
            self.basis = R[keep]

    @property
    def dim(self):
        return self.basis.shape[0]

    def contains(self, v):
        if self.dim == 0:
            return not np.any(v)
        aug = np.concatenate([self.basis, self.F.asarray(v)[None, :]], axis=0)
        return rank(self.F, aug) == self.dim

    def contains_space(self, other):
        if other.dim == 0:
            return True
        aug = np.concatenate([self.basis, other.basis], axis=0)
        return rank(self.F, aug) == self.dim

    def __eq__(self, other):
        return (isinstance(other, Subspace) and self.n == other.n
                and mat_eq(self.basis, other.basis))

    def sum_(self, other):
        return Subspace(self.F, self.n, np.concatenate([self.basis, other.basis], axis=0))

    def intersect(self, other):
        if self.dim == 0 or other.dim == 0:
            return Subspace(self.F, self.n)
        stacked = np.concatenate([self.basis, other.basis], axis=0)
        ker = null_space_left(self.F, stacked)
        if ker.shape[0] == 0:
            return Subspace(self.F, self.n)
        combo = self.F.matmul(ker[:, : self.dim], self.basis)
        return Subspace(self.F, self.n, combo)

    def coords(self, v):
        """Coordinates of v relative to the RREF basis, or None."""
        return solve_left(self.F, self.basis, self.F.asarray(v))

    def image(self, M):
        if self.dim == 0:
            return Subspace(self.F, M.shape[1])
        return Subspace(self.F, M.shape[1], self.F.matmul(self.basis, M))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, n={self.n})"


def companion(F, f):
    """Companion matrix of monic f, acting on rows as multiplication by x."""
    f = f.monic()
    n = f.degree
    C = F.zeros((n, n))
    for i in range(n - 1):
        C[i, i + 1] = 1
    C[n - 1] = F.neg(np.array(f._vec(n), dtype=F.dtype))
    return C


def poly_eval_mat(F, f, M):
    """f(M) by Horner."""
    n = M.shape[0]
    acc = F.zeros((n, n))
    for c in reversed(f.coeffs):
        acc = F.matmul(acc, M)
        idx = np.arange(n)
        acc[idx, idx] = F.add(acc[idx, idx], c)
    return acc


def char_poly(F, M):
    """Characteristic polynomial det(xI - M) via Hessenberg reduction."""
    n = M.shape[0]
    if n == 0:
        return Poly.one(F)
    H = F.asarray(M).copy()
    # similarity reduction to upper Hessenberg
    for c in range(n - 2):
        nz = np.nonzero(H[c + 1 :, c])[0]
        if len(nz) == 0:
            continue
        i = c + 1 + int(nz[0])
        if i != c + 1:
            H[[c + 1, i]] = H[[i, c + 1]]
            H[:, [c + 1, i]] = H[:, [i, c + 1]]
        piv = H[c + 1, c]
        rows = np.nonzero(H[c + 2 :, c])[0] + c + 2
        if len(rows):
            factors = F.mul(H[rows, c], F.inv(piv))
            H[rows] = F.sub(H[rows], F.mul(factors[:, None], H[c + 1][None, :]))
            # column fix-up to keep similarity
            H[:, c + 1] = F.add(H[:, c + 1], F.matmul(H[:, rows], factors[:, None])[:, 0])
    # recurrence on leading principal minors of xI - H
    polys = [Poly.one(F)]
    for m in range(1, n + 1):
        x_minus = Poly(F, [int(F.neg(H[m - 1, m - 1])), 1])
        pm = polys[m - 1].mul(x_minus)
        beta = 1
        for i in range(m - 1, 0, -1):
            beta = int(F.mul(beta, H[i, i - 1]))
            if beta == 0:
                break
            coef = int(F.mul(beta, H[i - 1, m - 1]))
            if coef:
                pm = pm.sub(polys[i - 1].scale(coef))
        polys.append(pm)
    return polys[n]


def min_poly(F, M):
    """Minimal polynomial via Krylov chains, lcm over basis vectors."""
    n = M.shape[0]
    if n == 0:
        return Poly.one(F)
    result = Poly.one(F)
    # accumulating an invariant subspace basis avoids repeating work
    seen = Subspace(F, n)
    for start in range(n):
        v = F.zeros(n)
        v[start] = 1
        if seen.contains(v):
            continue
        chain = [v]
        cur = v
        while True:
            cur = F.matmul(cur[None, :], M)[0]
            K = np.stack(chain + [cur])
            if rank(F, K) < len(chain) + 1:
                break
            chain.append(cur)
        K = np.stack(chain)
        coeffs = solve_left(F, K, cur)
        local = Poly(F, [int(F.neg(c)) for c in coeffs] + [1])
        g = result.gcd(local)
        result = result.mul(local) // g
        seen = seen.sum_(Subspace(F, n, K))
        if seen.dim == n:
            break
    return result.monic()


def _jordan_block_generators(F, M, a, cmax):
    """Generators of the a(x)-primary Jordan blocks of M, by exponent.

    Returns a list of (exponent, generator_row) with exponents descending.
    """
    aM = poly_eval_mat(F, a, M)
    powers = [F.eye(M.shape[0])]
    for _ in range(cmax):
        powers.append(F.matmul(powers[-1], aM))
    nulls = [Subspace(F, M.shape[0])]
    for j in range(1, cmax + 1):
        nulls.append(Subspace(F, M.shape[0], null_space_left(F, powers[j])))
    gens = []
    for c in range(cmax, 0, -1):
        # new generators at exponent c: N_c modulo (N_{c-1} + N_{c+1} * a(M))
        obstruction = nulls[c - 1].basis
        if c < cmax:
            lifted = F.matmul(nulls[c + 1].basis, aM)
            obstruction = np.concatenate([obstruction, lifted], axis=0)
        for e, _gen in gens:
            # chains already chosen, pushed down into N_c
            push = F.matmul(_gen[None, :], powers[e - c])[0] if e > c else _gen
            span_rows = [push]
            cur = push
            for _ in range(M.shape[0]):
                cur = F.matmul(cur[None, :], M)[0]
                span_rows.append(cur)
            obstruction = np.concatenate([obstruction, np.stack(span_rows)], axis=0)
        obs = Subspace(F, M.shape[0], obstruction)
        cand = nulls[c]
        for row in cand.basis:
            if not obs.contains(row):
                gens.append((c, row.copy()))
                chain_rows = [row]
                cur = row
                for _ in range(c * a.degree - 1):
                    cur = F.matmul(cur[None, :], M)[0]
                    chain_rows.append(cur)
                obstruction = np.concatenate([obs.basis, np.stack(chain_rows)], axis=0)
                obs = Subspace(F, M.shape[0], obstruction)
    return gens


def generalized_jordan(F, M, factored_char=None):
    """Generalized Jordan form: (J, P, blocks) with P @ M @ P^-1 == J.

    J is block diagonal with companion matrices C(a^c); blocks is the list
    of (a: Poly, c: int) in the canonical order (deg a, coeffs of a, c
    descending).  The block multiset is a similarity invariant.
    """
    from genus2.gf import poly_factor

    n = M.shape[0]
    cp = char_poly(F, M)
    factors = factored_char or poly_factor(cp)
    entries = []  # (a, c, generator)
    for a, mult in factors:
        gens = _jordan_block_generators(F, M, a, mult)
        for c, g in gens:
            entries.append((a, c, g))
    entries.sort(key=lambda t: (t[0].degree, t[0].coeffs, -t[1]))
    rows = []
    blocks = []
    for a, c, g in entries:
        cur = g
        rows.append(cur)
        for _ in range(a.degree * c - 1):
            cur = F.matmul(cur[None, :], M)[0]
            rows.append(cur)
        blocks.append((a, c))
    P = np.stack(rows) if rows else F.zeros((0, n))
    if P.shape[0] != n or not is_invertible(F, P):
        raise Genus2Error("jordan basis assembly failed")
    J = F.zeros((n, n))
    off = 0
    for a, c in blocks:
        m = a.degree * c
        ac = Poly.one(F)
        for _ in range(c):
            ac = ac.mul(a)
        J[off : off + m, off : off + m] = companion(F, ac)
        off += m
    if not mat_eq(F.matmul(P, M), F.matmul(J, P)):
        raise Genus2Error("jordan form verification failed")
    return J, P, blocks


def _centralizer_basis_canonical(F, J, blocks):
    """Basis of the centralizer of a generalized Jordan form.

    A module hom from block i (cyclic, generator e_bi, order a^c1) to
    block j is fixed by the image w of the generator, which ranges over
    the submodule of block j killed by a^c1; extending equivariantly
    gives the matrix rows e_{bi+s} -> w J^s.
    """
    n = J.shape[0]
    offsets = []
    off = 0
    for a, c in blocks:
        offsets.append(off)
        off += a.degree * c
    aJ_cache = {}
    out = []
    for i, (a1, c1) in enumerate(blocks):
        li = a1.degree * c1
        for j, (a2, c2) in enumerate(blocks):
            if a1 != a2:
                continue
            na = a1.degree
            if a1 not in aJ_cache:
                aJ_cache[a1] = poly_eval_mat(F, a1, J)
            aJ = aJ_cache[a1]
            w = F.zeros(n)
            w[offsets[j]] = 1
            for _ in range(max(c2 - c1, 0)):
                w = F.matmul(w[None, :], aJ)[0]
            for _t in range(na * min(c1, c2)):
                X = F.zeros((n, n))
                r = w
                X[offsets[i]] = r
                for s in range(1, li):
                    r = F.matmul(r[None, :], J)[0]
                    X[offsets[i] + s] = r
                out.append(X)
                w = F.matmul(w[None, :], J)[0]
    return out


def centralizer_basis(F, M):
    """Basis of {X : X M = M X} as a list of matrices.

    Built structurally from the generalized Jordan form (no d^2 x d^2
    solve), then conjugated back.
    """
    n = M.shape[0]
    if n == 0:
        return []
    J, P, blocks = generalized_jordan(F, M)
    Pinv = inv(F, P)
    raw = _centralizer_basis_canonical(F, J, blocks)
    out = []
    for X in raw:
        Y = matmul(F, Pinv, X, P)
        if not mat_eq(F.matmul(Y, M), F.matmul(M, Y)):
            raise Genus2Error("centralizer element fails commutation")
        out.append(Y)
    # independence sanity: dimension must match the flattened rank
    flat = np.stack([X.reshape(-1) for X in out]) if out else F.zeros((0, n * n))
    if out and rank(F, flat) != len(out):
        raise Genus2Error("centralizer basis is linearly dependent")
    return out


def invertible_in_span(F, mats, seed=0, tries=32):
    """An invertible element of span(mats), or None when none exists.

    Seeded random search first, exhaustive scan when the span is small
    enough to certify emptiness, then a greedy rank climb.
    """
    if len(mats) == 0:
        raise ValueError("empty spanning set")
    for M in mats:
        if is_invertible(F, M):
            return M
    rng = Rng(seed).spawn("inv-span")
    q = F.q
    m = len(mats)
    stack = np.stack([F.asarray(M) for M in mats])
    for _ in range(tries):
        coeffs = np.array([rng.randint(q) for _ in range(m)], dtype=F.dtype)
        cand = F.zeros(mats[0].shape)
        for c, M in zip(coeffs, stack):
            if c:
                cand = F.add(cand, F.mul(c, M))
        if is_invertible(F, cand):
            return cand
    if q**m <= 200_000:
        # exhaustive scan certifies none
        idx = [0] * m
        while True:
            cand = F.zeros(mats[0].shape)
            for c, M in zip(idx, stack):
                if c:
                    cand = F.add(cand, F.mul(c, M))
            if np.any(cand) and is_invertible(F, cand):
                return cand
            j = 0
            while j < m:
                idx[j] += 1
                if idx[j] < q:
                    break
                idx[j] = 0
                j += 1
            if j == m:
                return None
    # greedy rank climb (covers large spans on the Las Vegas path)
    best = stack[0]
    best_rank = rank(F, best)
    improved = True
    while improved and best_rank < mats[0].shape[0]:
        improved = False
        for M in stack:
            for c in range(1, min(q, 32)):
                cand = F.add(best, F.mul(c, M))
                r = rank(F, cand)
                if r > best_rank:
                    best, best_rank, improved = cand, r, True
                    break
            if improved:
                break
    if best_rank == mats[0].shape[0]:
        return best
    return None


def rand_invertible(F, n, rng):
    while True:
        M = F.rand_matrix(n, n, rng)
        if is_invertible(F, M):
            return M


def frobenius_mat(F, M, i=1):
    """Entrywise Frobenius power of a matrix."""
    return F.frob(F.asarray(M), i)
