"""Generalized Pfaffians and the small-field pseudo-isometry test.

The Pfaffian of a sloped pair written with a totally isotropic splitting
is det(x Psi1 + y Psi2) of the corner blocks: a binary form defined up to
a scalar.  Pseudo-isometry of sloped systems is equivalent to a block
matching of Pfaffians under one semilinear substitution of GL(2, q), and
the matching is constructive: every matched pair of blocks lifts.
"""

from dataclasses import dataclass

import numpy as np

from genus2 import forms as fo
from genus2 import linalg as la
from genus2 import pencil as pe
from genus2.errors import DimensionError, Genus2Error, WitnessError
from genus2.gf import Poly


@dataclass(frozen=True)
class BinaryForm:
    """Homogeneous binary form; coeffs ordered x^n, x^(n-1) y, ..., y^n."""

    F: object
    n: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.n + 1:
            raise DimensionError("binary form needs n + 1 coefficients")

    def is_zero(self):
        return not any(self.coeffs)

    def monicized(self):
        for c in self.coeffs:
            if c:
                s = self.F.inv(c)
                return BinaryForm(self.F, self.n,
                                  tuple(int(self.F.mul(s, x)) for x in self.coeffs))
        return self

    def __repr__(self):
        return f"BinaryForm({list(self.coeffs)})"


@dataclass(frozen=True)
class GammaL2:
    """Element of GammaL(2, q): invertible 2x2 matrix plus Frobenius power."""

    g: tuple   # ((a, b), (c, d)) row-major
    tau: int = 0

    def matrix(self, F):
        return F.asarray([[self.g[0][0], self.g[0][1]], [self.g[1][0], self.g[1][1]]])

    def compose(self, other, F):
        """self then other, matching the right action on binary forms."""
        gs = F.frob(self.matrix(F), other.tau)
        prod = F.matmul(gs, other.matrix(F))
        return GammaL2(((int(prod[0, 0]), int(prod[0, 1])),
                        (int(prod[1, 0]), int(prod[1, 1]))),
                       (self.tau + other.tau) % F.k)

    @staticmethod
    def identity():
        return GammaL2(((1, 0), (0, 1)), 0)


def _binary_power(F, a, b, k):
    """Coefficients of (a x + b y)^k, ordered by descending x-degree."""
    out = np.zeros(1, dtype=F.dtype)
    out[0] = 1
    for _ in range(k):
        nxt = np.zeros(len(out) + 1, dtype=F.dtype)
        nxt[:-1] = F.mul(a, out)
        nxt[1:] = F.add(nxt[1:], F.mul(b, out))
        out = nxt
    return out


def act(f, alpha):
    """Right action: coefficientwise Frobenius twist, then substitution
    (x, y) -> (a x + b y, c x + d y)."""
    F = f.F
    (a, b), (c, d) = alpha.g
    coeffs = F.frob(np.array(f.coeffs, dtype=F.dtype), alpha.tau)
    n = f.n
    acc = np.zeros(n + 1, dtype=F.dtype)
    for i in range(n + 1):
        if not coeffs[i]:
            continue
        # term coeffs[i] * x^(n-i) y^i  ->  (ax+by)^(n-i) (cx+dy)^i
        p1 = _binary_power(F, a, b, n - i)
        p2 = _binary_power(F, c, d, i)
        conv = np.zeros(n + 1, dtype=F.dtype)
        for s in range(len(p1)):
            if p1[s]:
                conv[s : s + len(p2)] = F.add(conv[s : s + len(p2)], F.mul(p1[s], p2))
        acc = F.add(acc, F.mul(coeffs[i], conv))
    return BinaryForm(F, n, tuple(int(x) for x in acc))


def proj_equal(f, g):
    """Scalar c with f == c * g, or None."""
    if f.n != g.n:
        return None
    F = f.F
    if f.is_zero() or g.is_zero():
        return 1 if (f.is_zero() and g.is_zero()) else None
    c = None
    for x, y in zip(f.coeffs, g.coeffs):
        if (x == 0) != (y == 0):
            return None
        if y:
            ratio = int(F.mul(x, F.inv(y)))
            if c is None:
                c = ratio
            elif c != ratio:
                return None
    return c


def _det_binary(F, psi1, psi2):
    """det(x psi1 + y psi2) as a BinaryForm of degree n (square corners)."""
    n = psi1.shape[0]
    if n == 0:
        return BinaryForm(F, 0, (1,))
    if la.is_invertible(F, psi1):
        T = F.neg(la.matmul(F, la.inv(F, psi1), psi2))
        cp = la.char_poly(F, T)  # det(zI - T); det(xI + yT') with T' = psi1^-1 psi2
        d1 = la.det(F, psi1)
        # det(x psi1 + y psi2) = det(psi1) * det(xI + y T') = det(psi1) * y^n cp(x/y)
        coeffs = [0] * (n + 1)
        for i, c in enumerate(cp._vec(n + 1)):
            # cp = det(zI - T) with T = -psi1^-1 psi2: det(xI + y psi1^-1 psi2);
            # homogeneous coefficient of x^i y^(n-i)
            coeffs[n - i] = int(F.mul(d1, c))
        return BinaryForm(F, n, tuple(coeffs))
    if la.is_invertible(F, psi2):
        sw = _det_binary(F, psi2, psi1)
        return BinaryForm(F, n, tuple(reversed(sw.coeffs)))
    # both singular: fraction-free Bareiss over F[x] with y = 1, then homogenize
    M = [[Poly(F, [int(psi2[i, j]), int(psi1[i, j])]) for j in range(n)]
         for i in range(n)]
    sign = 1
    prev = Poly.one(F)
    for k in range(n - 1):
        if M[k][k].is_zero():
            for i in range(k + 1, n):
                if not M[i][k].is_zero():
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return BinaryForm(F, n, tuple([0] * (n + 1)))
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = M[i][j].mul(M[k][k]).sub(M[i][k].mul(M[k][j]))
                quo, rem = num.divmod(prev)
                if not rem.is_zero():
                    raise Genus2Error("Bareiss exact division failed")
                M[i][j] = quo
        prev = M[k][k]
    detp = M[n - 1][n - 1]
    if sign < 0:
        detp = detp.neg()
    coeffs = [0] * (n + 1)
    for t, c in enumerate(detp._vec(n + 1)):
        coeffs[n - t] = int(c)  # x^t y^(n-t)
    return BinaryForm(F, n, tuple(coeffs))


def pfaffian(block_or_corners, F=None):
    """Pfaffian det(x Psi1 + y Psi2) of a block, monicized.

    Accepts a PencilBlock (using the corners of the original pair) or a
    (Psi1, Psi2) tuple together with the field.  Flat blocks carry no
    Pfaffian data and yield the zero form.
    """
    if isinstance(block_or_corners, pe.PencilBlock):
        blk = block_or_corners
        if blk.corner1 is None:
            raise Genus2Error("block is missing corner data (no isotropic splitting)")
        if blk.kind == "flat":
            return BinaryForm(F or _field_of(blk), blk.m, tuple([0] * (blk.m + 1)))
        F = F or _field_of(blk)
        return _det_binary(F, blk.corner1, blk.corner2).monicized()
    psi1, psi2 = block_or_corners
    if F is None:
        raise ValueError("field context required with raw corners")
    if psi1.shape[0] != psi1.shape[1]:
        return BinaryForm(F, psi1.shape[0], tuple([0] * (psi1.shape[0] + 1)))
    return _det_binary(F, psi1, psi2).monicized()


def _field_of(blk):
    raise ValueError("field context required")


def pfaffian_match(blocksA, blocksB, alpha, F=None):
    """Permutation sigma with Pf(A_i)^alpha == Pf(B_{sigma(i)}) mod scalars.

    Both lists must be sloped.  Returns a tuple sigma or None.
    """
    if len(blocksA) != len(blocksB):
        return None
    if not blocksA:
        return ()
    F = F or _block_field(blocksA[0])
    pfA = [act(_block_pf(b, F), alpha) for b in blocksA]
    pfB = [_block_pf(b, F) for b in blocksB]
    n = len(pfA)
    adj = [[j for j in range(n) if proj_equal(pfA[i], pfB[j]) is not None]
           for i in range(n)]
    match_of_b = [-1] * n

    def try_kuhn(i, visited):
        for j in adj[i]:
            if not visited[j]:
                visited[j] = True
                if match_of_b[j] == -1 or try_kuhn(match_of_b[j], visited):
                    match_of_b[j] = i
                    return True
        return False

    for i in range(n):
        if not try_kuhn(i, [False] * n):
            return None
    sigma = [0] * n
    for j, i in enumerate(match_of_b):
        sigma[i] = j
    return tuple(sigma)


def _block_pf(b, F):
    if isinstance(b, BinaryForm):
        return b
    return pfaffian(b, F=F)


def _block_field(b):
    if isinstance(b, BinaryForm):
        return b.F
    raise ValueError("pass explicit field with PencilBlock lists")


def _twisted_system(S, alpha):
    """The system whose Grams are sum_s g[s,t] frob^tau(Phi_s)."""
    F = S.F
    tw = S.twist(alpha.tau)
    g = alpha.matrix(F)
    return tw.recombine(g.T.copy())


def isometry_between_sloped_pairs(S1, S2):
    """phi with phi S2 phi^T = S1 for hyperbolic-presented sloped blocks.

    Both systems must be written with the totally isotropic splitting at
    the block half (corners in the upper right); works even when the two
    Gram matrices are proportional (2-dimensional blocks).
    """
    F = S1.F
    if S1.d != S2.d:
        return None
    n = S1.d // 2

    def hyp_shape(S):
        for t in range(2):
            G = S.forms[t]
            if np.any(G[:n, :n]) or np.any(G[n:, n:]):
                return False
        return True

    T1 = F.eye(S1.d) if hyp_shape(S1) else pe.hyperbolize_sloped(S1)
    T2 = F.eye(S2.d) if hyp_shape(S2) else pe.hyperbolize_sloped(S2)
    H1 = S1.transform(T1)
    H2 = S2.transform(T2)
    A_pair = (H1.forms[0][:n, n:].copy(), H1.forms[1][:n, n:].copy())
    B_pair = (H2.forms[0][:n, n:].copy(), H2.forms[1][:n, n:].copy())
    res = pe.sloped_corner_equivalence(F, A_pair, B_pair)
    if res is None:
        return None
    X, Y = res
    psi = F.zeros((S1.d, S1.d))
    psi[:n, :n] = X
    psi[n:, n:] = Y.T.copy()
    phi = la.matmul(F, la.inv(F, T1), psi, T2)
    for t in range(2):
        if not la.mat_eq(la.matmul(F, phi, S2.forms[t], phi.T.copy()), S1.forms[t]):
            raise Genus2Error("sloped isometry failed verification")
    return phi


def lift_sloped(SA_block, SB_block, alpha):
    """phi with (phi, alpha) a pseudo-isometry between indecomposable
    sloped blocks whose Pfaffians match under alpha."""
    twisted = _twisted_system(SA_block, alpha)
    phi = isometry_between_sloped_pairs(twisted, SB_block)
    if phi is None:
        raise Genus2Error("lift_sloped called on non-matching blocks")
    w = fo.Witness(phi, alpha.matrix(SA_block.F), alpha.tau)
    if not fo.verify_witness(SA_block, SB_block, w):
        raise WitnessError("sloped block lift failed the pseudo-isometry check")
    return phi


def flat_lift(alpha, m, F):
    """(phi, alpha) pseudo-isometry of the canonical flat block of size m."""
    S = pe._canonical_flat_forms(F, m)
    twisted = _twisted_system(S, alpha)
    p1 = twisted.forms[0][:m, m:]
    p2 = twisted.forms[1][:m, m:]
    X, Y = pe.standardize_flat(F, p1, p2)
    phi = F.zeros((2 * m + 1, 2 * m + 1))
    blkX = la.inv(F, X)
    blkY = la.inv(F, Y.T.copy())
    phi[:m, :m] = blkX
    phi[m:, m:] = blkY
    w = fo.Witness(phi, alpha.matrix(F), alpha.tau)
    if not fo.verify_witness(S, S, w):
        raise WitnessError("flat lift failed the pseudo-isometry check")
    return phi


def gl2_elements(F):
    """All invertible 2x2 matrices over F, identity first."""
    yield ((1, 0), (0, 1))
    q = F.q
    for a in range(q):
        for b in range(q):
            for c in range(q):
                for d in range(q):
                    if (a, b, c, d) == (1, 0, 0, 1):
                        continue
                    det = int(F.sub(F.mul(a, d), F.mul(b, c)))
                    if det:
                        yield ((a, b), (c, d))


def gammal2_elements(F):
    for tau in range(F.k):
        for g in gl2_elements(F):
            yield GammaL2(g, tau)


def _blocks_of(dec, F):
    sloped, flat = [], []
    for blk in dec.blocks:
        rows = dec.T[blk.start : blk.start + blk.dimension]
        system = fo.hyperbolic_pair(F, blk.corner1, blk.corner2)
        if blk.kind == "sloped":
            sloped.append((blk, rows, system, pfaffian(blk, F=F)))
        else:
            flat.append((blk, rows, system))
    return sloped, flat


def small_field_test(SA, SB, alphas=None):
    """Pseudo-isometry witness by exhausting GammaL(2, q), or None.

    Both systems must be fully nondegenerate pairs (e = 2).  The witness
    satisfies verify_witness(SA, SB, w) exactly.
    """
    F = SA.F
    if not F.same_field(SB.F):
        return None
    if SA.d != SB.d:
        return None
    decA = pe.orth_decompose(SA)
    decB = pe.orth_decompose(SB)
    slopedA, flatA = _blocks_of(decA, F)
    slopedB, flatB = _blocks_of(decB, F)
    if sorted(b[0].m for b in flatA) != sorted(b[0].m for b in flatB):
        return None
    if len(slopedA) != len(slopedB):
        return None
    flatA = sorted(flatA, key=lambda t: -t[0].m)
    flatB = sorted(flatB, key=lambda t: -t[0].m)
    it = alphas if alphas is not None else gammal2_elements(F)
    for alpha in it:
        w = _attempt_alpha(F, SA, SB, slopedA, slopedB, flatA, flatB, alpha)
        if w is not None:
            return w
    return None


def _attempt_alpha(F, SA, SB, slopedA, slopedB, flatA, flatB, alpha):
    pfsA = [t[3] for t in slopedA]
    pfsB = [t[3] for t in slopedB]
    sigma = pfaffian_match(pfsA, pfsB, alpha)
    if sigma is None:
        return None
    pieces = []  # (rowsA, rowsB, phi_block)
    try:
        for i, (blkA, rowsA, sysA, _pf) in enumerate(slopedA):
            blkB, rowsB, sysB, _ = slopedB[sigma[i]]
            if blkA.dimension != blkB.dimension:
                return None
            twisted = _twisted_system(sysA, alpha)
            phi_blk = isometry_between_sloped_pairs(twisted, sysB)
            if phi_blk is None:
                return None
            pieces.append((rowsA, rowsB, phi_blk))
        for (blkA, rowsA, sysA), (blkB, rowsB, sysB) in zip(flatA, flatB):
            phi_blk = flat_lift(alpha, blkA.m, F)
            pieces.append((rowsA, rowsB, phi_blk))
    except Genus2Error:
        return None
    d = SA.d
    TA = np.concatenate([p[0] for p in pieces], axis=0)
    TB = np.concatenate([p[1] for p in pieces], axis=0)
    D = F.zeros((d, d))
    off = 0
    for rowsA, rowsB, phi_blk in pieces:
        k = rowsA.shape[0]
        D[off : off + k, off : off + k] = phi_blk
        off += k
    FT_A = F.frob(TA, alpha.tau)
    phi = la.matmul(F, la.inv(F, FT_A), D, TB)
    w = fo.Witness(phi, alpha.matrix(F), alpha.tau)
    if not fo.verify_witness(SA, SB, w):
        raise WitnessError("assembled small-field witness failed verification")
    return w
