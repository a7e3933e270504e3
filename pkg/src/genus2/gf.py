"""Finite fields GF(p^k) and univariate polynomial arithmetic over them.

Field elements are encoded as integers in [0, p^k): the element with
coefficient vector (c_0, ..., c_{k-1}) relative to the power basis of the
modulus is stored as sum(c_i * p^i).  Prime-field elements are therefore
plain residues.  All array operations are vectorized over numpy int64
(with an object-dtype fallback for very large p).
"""

import numpy as np

from genus2.errors import FieldError
from genus2.rng import Rng

# Largest admitted characteristic.  Bigger primes are rejected so that all
# products fit double-width machine arithmetic on every code path.
P_LIMIT = 2**61

# int64 elementwise products a*b are exact below this characteristic.
_INT64_SAFE_P = 3_037_000_000


def is_prime(n):
    """Deterministic Miller-Rabin, valid for all n < 3.3e24."""
    if n < 2:
        return False
    for sp in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % sp == 0:
            return n == sp
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _matmul_mod(A, B, p):
    """Exact A @ B mod p choosing the fastest safe arithmetic path."""
    inner = A.shape[1] if A.ndim == 2 else len(A)
    bound = (p - 1) * (p - 1) * max(inner, 1)
    if bound < 2**53:
        C = np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64)
        return np.asarray(C % p, dtype=np.int64)
    if bound < 2**63:
        return (np.asarray(A, dtype=np.int64) @ np.asarray(B, dtype=np.int64)) % p
    Ao = np.asarray(A, dtype=object)
    Bo = np.asarray(B, dtype=object)
    return np.dot(Ao, Bo) % p


class FieldCtx:
    """Immutable context for GF(p^k).

    For k > 1 the modulus is a monic irreducible of degree k over GF(p),
    stored low-degree-first as a tuple of ints of length k+1.
    """

    def __init__(self, p, k=1, modulus=None):
        if not is_prime(p):
            raise FieldError(f"{p} is not prime")
        if p > P_LIMIT:
            raise FieldError(f"characteristic {p} exceeds the supported limit 2^61")
        if k < 1:
            raise FieldError("extension degree must be >= 1")
        self.p = int(p)
        self.k = int(k)
        self.q = self.p**self.k
        self.big = (p - 1) * (p - 1) >= 2**63 or self.q >= 2**62
        self.dtype = object if self.big else np.int64
        if k == 1:
            if modulus is not None:
                raise FieldError("prime field takes no modulus")
            self.modulus = None
        else:
            if modulus is None:
                raise FieldError("extension field requires a modulus")
            modulus = tuple(int(c) % p for c in modulus)
            if len(modulus) != k + 1 or modulus[-1] != 1:
                raise FieldError("modulus must be monic of degree k")
            self.modulus = modulus
        self._pow_p = tuple(self.p**i for i in range(self.k))
        self._red = self._reduction_table()

    def _reduction_table(self):
        # row i = coefficient vector of x^(k+i) mod modulus, i = 0..k-2
        if self.k == 1:
            return None
        k, p = self.k, self.p
        rows = []
        cur = [(-c) % p for c in self.modulus[:k]]  # x^k
        rows.append(list(cur))
        for _ in range(k - 2):
            lead = cur[-1]
            cur = [0] + cur[:-1]
            top = rows[0]
            cur = [(cur[j] + lead * top[j]) % p for j in range(k)]
            rows.append(list(cur))
        return np.array(rows, dtype=np.int64) if rows else None

    # -- representation helpers -------------------------------------------

    def asarray(self, x):
        return np.asarray(x, dtype=self.dtype)

    def zeros(self, shape):
        return np.zeros(shape, dtype=self.dtype)

    def eye(self, n):
        return np.eye(n, dtype=self.dtype) if not self.big else (
            np.eye(n, dtype=np.int64).astype(object))

    def to_digits(self, a):
        """Coefficient digits of encoded values, shape a.shape + (k,)."""
        a = self.asarray(a)
        out = np.zeros(a.shape + (self.k,), dtype=self.dtype)
        for i in range(self.k):
            out[..., i] = (a // self._pow_p[i]) % self.p
        return out

    def from_digits(self, d):
        d = np.asarray(d, dtype=self.dtype)
        acc = self.zeros(d.shape[:-1])
        for i in range(self.k):
            acc = acc + d[..., i] * self._pow_p[i]
        return acc

    # -- scalar / elementwise arithmetic -----------------------------------

    def add(self, a, b):
        if self.k == 1:
            return (self.asarray(a) + self.asarray(b)) % self.p
        return self.from_digits((self.to_digits(a) + self.to_digits(b)) % self.p)

    def sub(self, a, b):
        if self.k == 1:
            return (self.asarray(a) - self.asarray(b)) % self.p
        return self.from_digits((self.to_digits(a) - self.to_digits(b)) % self.p)

    def neg(self, a):
        if self.k == 1:
            return (-self.asarray(a)) % self.p
        return self.from_digits((-self.to_digits(a)) % self.p)

    def mul(self, a, b):
        if self.k == 1:
            if self.big:
                return (np.asarray(a, dtype=object) * np.asarray(b, dtype=object)) % self.p
            return (self.asarray(a) * self.asarray(b)) % self.p
        da, db = self.to_digits(a), self.to_digits(b)
        shape = np.broadcast_shapes(da.shape[:-1], db.shape[:-1])
        k = self.k
        acc = np.zeros(shape + (2 * k - 1,), dtype=self.dtype)
        for s in range(k):
            for t in range(k):
                acc[..., s + t] = (acc[..., s + t] + da[..., s] * db[..., t]) % self.p
        return self._reduce_digit_acc(acc)

    def _reduce_digit_acc(self, acc):
        k = self.k
        low = acc[..., :k]
        if acc.shape[-1] > k:
            hi = acc[..., k:]
            low = (low + np.tensordot(hi, self._red[: hi.shape[-1]], axes=([-1], [0]))) % self.p
        else:
            low = low % self.p
        return self.from_digits(low)

    def power(self, a, e):
        """Elementwise a**e for integer e >= 0 (vectorized square-and-multiply)."""
        e = int(e)
        if e < 0:
            return self.power(self.inv(a), -e)
        a = self.asarray(a)
        result = self.zeros(a.shape) + 1
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inv(self, a):
        a_arr = self.asarray(a)
        if np.any(a_arr == 0):
            raise ZeroDivisionError("inversion of zero field element")
        if self.k == 1 and a_arr.ndim == 0:
            return pow(int(a_arr), self.p - 2, self.p)
        return self.power(a_arr, self.q - 2)

    def frob(self, a, i=1):
        """Frobenius power x -> x^(p^i)."""
        i = i % self.k
        if i == 0:
            return self.asarray(a).copy()
        return self.power(a, self.p**i)

    # -- matrix product -----------------------------------------------------

    def matmul(self, A, B):
        A, B = self.asarray(A), self.asarray(B)
        if self.k == 1:
            return _matmul_mod(A, B, self.p)
        da, db = self.to_digits(A), self.to_digits(B)
        k = self.k
        out_shape = (A.shape[0], B.shape[1])
        acc = np.zeros(out_shape + (2 * k - 1,), dtype=self.dtype)
        for s in range(k):
            for t in range(k):
                acc[..., s + t] = (acc[..., s + t] + _matmul_mod(da[..., s], db[..., t], self.p)) % self.p
        return self._reduce_digit_acc(acc)

    # -- misc ---------------------------------------------------------------

    def elements(self):
        """Iterate all q field elements.  Only sensible for small q."""
        return range(self.q)

    def rand_elt(self, rng):
        return rng.randint(self.q)

    def rand_matrix(self, rows, cols, rng):
        vals = rng.randints(self.q, rows * cols)
        return np.array(vals, dtype=self.dtype).reshape(rows, cols)

    def same_field(self, other):
        return (self.p, self.k, self.modulus) == (other.p, other.k, other.modulus)

    def __eq__(self, other):
        return isinstance(other, FieldCtx) and self.same_field(other)

    def __hash__(self):
        return hash((self.p, self.k, self.modulus))

    def __repr__(self):
        if self.k == 1:
            return f"GF({self.p})"
        return f"GF({self.p}^{self.k}; mod={list(self.modulus)})"


def field_make(p, k=1, seed=0, p_limit=P_LIMIT):
    """Construct GF(p^k), finding an irreducible modulus by seeded search."""
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if p > p_limit:
        raise FieldError(f"characteristic {p} exceeds the configured limit {p_limit}")
    if k == 1:
        return FieldCtx(p, 1)
    base = FieldCtx(p, 1)
    rng = Rng(seed).spawn(f"modulus-{p}-{k}")
    while True:
        coeffs = [rng.randint(p) for _ in range(k)] + [1]
        f = Poly(base, coeffs)
        if is_irreducible(f):
            return FieldCtx(p, k, tuple(coeffs))


class Poly:
    """Dense univariate polynomial over a FieldCtx, low degree first."""

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx, coeffs):
        self.ctx = ctx
        cs = [int(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, ctx):
        return cls(ctx, [])

    @classmethod
    def one(cls, ctx):
        return cls(ctx, [1])

    @classmethod
    def x(cls, ctx):
        return cls(ctx, [0, 1])

    @classmethod
    def const(cls, ctx, c):
        return cls(ctx, [c])

    # -- basics --------------------------------------------------------------

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    def lc(self):
        return self.coeffs[-1] if self.coeffs else 0

    def __eq__(self, other):
        return (isinstance(other, Poly) and self.ctx == other.ctx
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.ctx.p, self.ctx.k, self.ctx.modulus, self.coeffs))

    def __repr__(self):
        if self.is_zero():
            return "Poly(0)"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if i == 0:
                terms.append(f"{c}")
            elif i == 1:
                terms.append(f"{c}*x" if c != 1 else "x")
            else:
                terms.append(f"{c}*x^{i}" if c != 1 else f"x^{i}")
        return "Poly(" + " + ".join(terms) + ")"

    def _vec(self, length=None):
        n = length if length is not None else len(self.coeffs)
        v = np.zeros(n, dtype=self.ctx.dtype)
        m = min(n, len(self.coeffs))
        if m:
            v[:m] = self.coeffs[:m]
        return v

    # -- ring operations ------------------------------------------------------

    def add(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.ctx, self.ctx.add(self._vec(n), other._vec(n)))

    def sub(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.ctx, self.ctx.sub(self._vec(n), other._vec(n)))

    def neg(self):
        return Poly(self.ctx, self.ctx.neg(self._vec()))

    def scale(self, c):
        if c == 0 or self.is_zero():
            return Poly.zero(self.ctx)
        return Poly(self.ctx, self.ctx.mul(self._vec(), c))

    def mul(self, other):
        if self.is_zero() or other.is_zero():
            return Poly.zero(self.ctx)
        F = self.ctx
        a, b = self._vec(), other._vec()
        out = np.zeros(len(a) + len(b) - 1, dtype=F.dtype)
        for i, ai in enumerate(self.coeffs):
            if ai:
                out[i : i + len(b)] = F.add(out[i : i + len(b)], F.mul(ai, b))
        return Poly(F, out)

    def divmod(self, other):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        F = self.ctx
        r = list(self._vec())
        d = other.degree
        if self.degree < d:
            return Poly.zero(F), Poly(F, r)
        inv_lc = F.inv(other.lc())
        quot = [0] * (self.degree - d + 1)
        bv = other._vec()
        for i in range(self.degree - d, -1, -1):
            c = int(F.mul(r[i + d], inv_lc))
            quot[i] = c
            if c:
                seg = np.array(r[i : i + d + 1], dtype=F.dtype)
                r[i : i + d + 1] = list(F.sub(seg, F.mul(c, bv)))
        return Poly(F, quot), Poly(F, r[:d])

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def monic(self):
        if self.is_zero() or self.lc() == 1:
            return self
        return self.scale(self.ctx.inv(self.lc()))

    def gcd(self, other):
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        return a.monic() if not a.is_zero() else a

    def derivative(self):
        F = self.ctx
        if self.degree < 1:
            return Poly.zero(F)
        cs = [int(F.mul(self.coeffs[i], i % F.p)) for i in range(1, len(self.coeffs))]
        return Poly(F, cs)

    def pow_mod(self, e, m):
        """self**e mod m by square and multiply."""
        result = Poly.one(self.ctx)
        base = self % m
        e = int(e)
        while e:
            if e & 1:
                result = result.mul(base) % m
            base = base.mul(base) % m
            e >>= 1
        return result

    def compose_mod(self, g, m):
        """self(g) mod m by Horner."""
        F = self.ctx
        acc = Poly.zero(F)
        for c in reversed(self.coeffs):
            acc = acc.mul(g).add(Poly.const(F, c)) % m
        return acc

    def eval(self, x):
        """Evaluate at encoded field element(s); vectorized Horner."""
        F = self.ctx
        x = F.asarray(x)
        acc = F.zeros(x.shape)
        for c in reversed(self.coeffs):
            acc = F.add(F.mul(acc, x), c)
        return acc

    def shift_twist(self, i):
        """Apply Frobenius^i to every coefficient."""
        if self.is_zero():
            return self
        return Poly(self.ctx, self.ctx.frob(self._vec(), i))


def _pth_root(f):
    """For f with zero derivative, the g with g^p = f."""
    F = f.ctx
    p = F.p
    cs = []
    for i in range(0, f.degree + 1, p):
        c = f.coeffs[i] if i < len(f.coeffs) else 0
        cs.append(int(F.frob(c, F.k - 1)))
    return Poly(F, cs)


def is_irreducible(f):
    """Rabin irreducibility test over GF(q)."""
    n = f.degree
    if n <= 0:
        return False
    if n == 1:
        return True
    F = f.ctx
    q = F.q
    x = Poly.x(F)
    xq = x.pow_mod(q**n, f)
    if xq != x % f:
        return False
    primes = set()
    m = n
    d = 2
    while d * d <= m:
        while m % d == 0:
            primes.add(d)
            m //= d
        d += 1
    if m > 1:
        primes.add(m)
    for r in primes:
        h = x.pow_mod(q ** (n // r), f).sub(x)
        if f.gcd(h).degree != 0:
            return False
    return True


def _edf(g, d, rng):
    """Equal-degree factorization: g squarefree, all factors of degree d."""
    F = g.ctx
    q = F.q
    if g.degree == d:
        return [g.monic()]
    while True:
        a = Poly(F, [rng.randint(q) for _ in range(g.degree)])
        if a.degree < 1:
            continue
        if F.p == 2:
            # trace map over GF(2^(k*d))
            b = Poly.zero(F)
            t = a % g
            for _ in range(F.k * d):
                b = b.add(t)
                t = t.mul(t) % g
        else:
            b = a.pow_mod((q**d - 1) // 2, g).sub(Poly.one(F))
        w = g.gcd(b)
        if 0 < w.degree < g.degree:
            return _edf(w, d, rng) + _edf(g // w, d, rng)


def _distinct_factors(s, rng):
    """Irreducible factors of a squarefree monic s, via distinct-degree split."""
    F = s.ctx
    q = F.q
    out = []
    x = Poly.x(F)
    h = x % s
    d = 0
    while s.degree > 0:
        d += 1
        if 2 * d > s.degree:
            out.append(s.monic())
            break
        h = h.pow_mod(q, s)
        g = s.gcd(h.sub(x))
        if g.degree > 0:
            out.extend(_edf(g, d, rng))
            s = s // g
            h = h % s
    return out


def poly_factor(f, seed=0):
    """Factor f into monic irreducibles with multiplicities.

    Cantor-Zassenhaus (distinct-degree then seeded equal-degree splitting);
    the output is sorted and always satisfies lc * prod(h^m) == f.
    """
    if f.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    F = f.ctx
    rng = Rng(seed).spawn("poly-factor")
    result = {}
    g = f.monic()
    outer_mult = 1
    while g.degree > 0:
        gd = g.derivative()
        if gd.is_zero():
            g = _pth_root(g)
            outer_mult *= F.p
            continue
        s = g // g.gcd(gd)
        for h in _distinct_factors(s, rng):
            m = 0
            while True:
                quo, rem = g.divmod(h)
                if not rem.is_zero():
                    break
                g = quo
                m += 1
            result[h] = result.get(h, 0) + m * outer_mult
    out = sorted(result.items(), key=lambda it: (it[0].degree, it[0].coeffs))
    # exact reconstruction check: the product must reproduce f up to lc
    prod = Poly.const(F, f.lc())
    for h, m in out:
        for _ in range(m):
            prod = prod.mul(h)
    if prod != f:
        raise AssertionError("factorization self-check failed")
    return out


def poly_roots(f, ext=None):
    """All roots of f in ext (default: its own coefficient field).

    f must live over the prime field or over ext itself.
    """
    if f.is_zero():
        raise ValueError("zero polynomial has every element as a root")
    F = f.ctx
    ext = ext or F
    if ext.p != F.p or (F.k != 1 and not F.same_field(ext)):
        raise FieldError("incompatible fields for root finding")
    g = Poly(ext, f.coeffs) if F.k == 1 else f  # constants embed verbatim
    if ext.q <= 4096:
        pts = np.arange(ext.q, dtype=ext.dtype) if not ext.big else \
            np.array(list(range(ext.q)), dtype=object)
        vals = g.eval(pts)
        return [int(x) for x in pts[vals == 0]]
    roots = []
    for h, _ in poly_factor(g):
        if h.degree == 1:
            roots.append(int(ext.neg(h.coeffs[0])))
    return sorted(roots)


class QuotientRing:
    """F[x]/(m): elements are coefficient vectors of length deg m.

    Supports the arithmetic needed for root finding in residue fields and
    Hensel lifting in local quotients.
    """

    def __init__(self, F, m):
        if m.degree < 1 or m.lc() != 1:
            raise ValueError("modulus must be monic of positive degree")
        self.F = F
        self.m = m
        self.n = m.degree
        # reduction rows: x^(n+i) mod m for i = 0..n-2
        rows = []
        x = Poly.x(F)
        cur = x.pow_mod(self.n, m)
        for _ in range(self.n - 1):
            rows.append(cur._vec(self.n))
            cur = cur.mul(x) % m
        self.red = np.array(rows, dtype=F.dtype) if rows else None

    def zero(self):
        return np.zeros(self.n, dtype=self.F.dtype)

    def one(self):
        v = self.zero()
        v[0] = 1
        return v

    def from_poly(self, f):
        return (f % self.m)._vec(self.n)

    def to_poly(self, v):
        return Poly(self.F, [int(c) for c in v])

    def add(self, a, b):
        return self.F.add(a, b)

    def sub(self, a, b):
        return self.F.sub(a, b)

    def mul(self, a, b):
        F = self.F
        if self.n == 1:
            return F.mul(a, b)
        out = np.zeros(2 * self.n - 1, dtype=F.dtype)
        for i in range(self.n):
            if a[i]:
                out[i : i + self.n] = F.add(out[i : i + self.n], F.mul(a[i], b))
        low = out[: self.n]
        for i, h in enumerate(out[self.n :]):
            if h:
                low = F.add(low, F.mul(h, self.red[i]))
        return low

    def eq(self, a, b):
        return np.array_equal(self.F.asarray(a), self.F.asarray(b))

    def is_zero(self, a):
        return not np.any(self.F.asarray(a))

    def pow(self, a, e):
        result = self.one()
        base = a
        e = int(e)
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def inv(self, a):
        """Inverse of a unit via extended Euclid in F[x]."""
        fa = self.to_poly(a)
        r0, r1 = self.m, fa
        s0, s1 = Poly.zero(self.F), Poly.one(self.F)
        while not r1.is_zero():
            q, r = r0.divmod(r1)
            r0, r1 = r1, r
            s0, s1 = s1, s0.sub(q.mul(s1))
        if r0.degree != 0:
            raise ZeroDivisionError("element is not a unit in the quotient ring")
        c = self.F.inv(r0.coeffs[0])
        return self.from_poly(s0.scale(c))

    def is_unit(self, a):
        return self.to_poly(a).gcd(self.m).degree == 0

    def eval_poly(self, f, a):
        """Image of the polynomial f at the element a (Horner)."""
        acc = self.zero()
        for c in reversed(f.coeffs):
            acc = self.mul(acc, a)
            acc[0] = int(self.F.add(acc[0], c))
        return acc

    def rand(self, rng):
        return np.array([rng.randint(self.F.q) for _ in range(self.n)], dtype=self.F.dtype)


def find_root_in_quotient_field(g, m, seed=0):
    """A root of g in the field F[x]/(m), m irreducible; None if no root.

    Equal-degree-splitting style root finding; g has coefficients in F.
    """
    R = QuotientRing(g.ctx, m)
    Q = g.ctx.q**m.degree

    # polynomial arithmetic over R (dense coefficient lists over R)
    def pnorm(h):
        while h and R.is_zero(h[-1]):
            h.pop()
        return h

    def pmod(h, d):
        h = [c.copy() for c in h]
        while len(h) >= len(d):
            lead = h[-1]
            lcinv = R.inv(d[-1])
            c = R.mul(lead, lcinv)
            off = len(h) - len(d)
            for i in range(len(d)):
                h[off + i] = R.sub(h[off + i], R.mul(c, d[i]))
            pnorm(h)
            if not h:
                break
        return h

    def pmul(a, b):
        out = [R.zero() for _ in range(len(a) + len(b) - 1)]
        for i, ai in enumerate(a):
            if R.is_zero(ai):
                continue
            for j, bj in enumerate(b):
                out[i + j] = R.add(out[i + j], R.mul(ai, bj))
        return pnorm(out)

    def pgcd(a, b):
        a, b = [c.copy() for c in a], [c.copy() for c in b]
        while b:
            a, b = b, pmod(a, b)
        if a:
            lcinv = R.inv(a[-1])
            a = [R.mul(c, lcinv) for c in a]
        return a

    def ppow_mod(base, e, d):
        result = [R.one()]
        base = pmod(base, d)
        while e:
            if e & 1:
                result = pmod(pmul(result, base), d)
            base = pmod(pmul(base, base), d)
            e >>= 1
        return result

    h = [R.from_poly(Poly.const(g.ctx, c)) for c in g.coeffs]
    pnorm(h)
    # restrict to the part of g that splits into linear factors over R:
    # gcd(x^Q - x, g) where Q = |R|
    xq = ppow_mod([R.zero(), R.one()], Q, h)
    xq_minus_x = [(xq[i].copy() if i < len(xq) else R.zero()) for i in range(max(len(xq), 2))]
    xq_minus_x[1] = R.sub(xq_minus_x[1], R.one())
    lin = pgcd(pnorm(xq_minus_x), h)
    if len(lin) <= 1:
        return None
    rng = Rng(seed).spawn("quotient-root")
    work = lin
    while len(work) > 2:
        a = [R.rand(rng), R.one()]  # x + random shift
        if g.ctx.p == 2:
            t = pmod(a, work)
            b = []
            for _ in range(g.ctx.k * m.degree):
                b = pnorm([R.add(b[i] if i < len(b) else R.zero(),
                                 t[i] if i < len(t) else R.zero())
                           for i in range(max(len(b), len(t)))])
                t = pmod(pmul(t, t), work)
        else:
            b = ppow_mod(a, (Q - 1) // 2, work)
            if b:
                b[0] = R.sub(b[0], R.one())
            else:
                b = [R.sub(R.zero(), R.one())]
            b = pnorm(b)
        w = pgcd(b, work)
        if 1 < len(w) < len(work):
            work = w  # proper divisor, still splits into linear factors
    # work = x - root (monic linear)
    root = R.sub(R.zero(), work[0])
    return root


def hensel_root(g, a, c, seed=0):
    """A root of g in F[x]/(a^c), where g has a simple root mod a.

    Finds a root in the residue field F[x]/(a) and Newton-lifts it.
    Returns the coefficient vector in the quotient F[x]/(a^c), or None.
    """
    r0 = find_root_in_quotient_field(g, a, seed=seed)
    if r0 is None:
        return None
    ac = Poly.one(g.ctx)
    for _ in range(c):
        ac = ac.mul(a)
    K = QuotientRing(g.ctx, ac)
    r = np.zeros(K.n, dtype=g.ctx.dtype)
    r[: len(r0)] = r0
    gd = g.derivative()
    for _ in range(max(1, c.bit_length() + 1)):
        val = K.eval_poly(g, r)
        if K.is_zero(val):
            return r
        dval = K.eval_poly(gd, r)
        r = K.sub(r, K.mul(val, K.inv(dval)))
    return r if K.is_zero(K.eval_poly(g, r)) else None
