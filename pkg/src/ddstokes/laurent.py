"""Exact Laurent-polynomial arithmetic over Q in the variable q.

k[q^{±1}] is a principal ideal domain whose units are the monomials c·q^m;
module computations (membership, spans, invariant factors) reduce to
Euclidean arithmetic in Q[q] after multiplying by a suitable unit.  This is
the coefficient ring for circle-model frames, Stokes matrices and Betti
intersection numbers.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


class LaurentPoly:
    """Element of Q[q^{±1}] with finite support, exact arithmetic."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Optional[Dict[int, Fraction]] = None):
        c: Dict[int, Fraction] = {}
        if coeffs:
            for k, v in coeffs.items():
                v = Fraction(v)
                if v != 0:
                    c[int(k)] = v
        self.c = c

    # -- constructors ---------------------------------------------------

    @classmethod
    def const(cls, v) -> "LaurentPoly":
        return cls({0: Fraction(v)})

    @classmethod
    def q_power(cls, m: int, v=1) -> "LaurentPoly":
        return cls({m: Fraction(v)})

    @classmethod
    def zero(cls) -> "LaurentPoly":
        return cls()

    @classmethod
    def one(cls) -> "LaurentPoly":
        return cls.const(1)

    # -- basic structure -------------------------------------------------

    def is_zero(self) -> bool:
        return not self.c

    def is_one(self) -> bool:
        return self.c == {0: Fraction(1)}

    def is_unit(self) -> bool:
        """Units of k[q^{±1}] are the nonzero monomials c·q^m."""
        return len(self.c) == 1

    def min_deg(self) -> int:
        if not self.c:
            raise ValueError("zero polynomial has no degree")
        return min(self.c)

    def max_deg(self) -> int:
        if not self.c:
            raise ValueError("zero polynomial has no degree")
        return max(self.c)

    def coeff(self, m: int) -> Fraction:
        return self.c.get(m, Fraction(0))

    def support(self) -> List[int]:
        return sorted(self.c)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        c = dict(self.c)
        for k, v in other.c.items():
            w = c.get(k, Fraction(0)) + v
            if w == 0:
                c.pop(k, None)
            else:
                c[k] = w
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = c
        return out

    __radd__ = __add__

    def __neg__(self):
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = {k: -v for k, v in self.c.items()}
        return out

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        c: Dict[int, Fraction] = {}
        for k1, v1 in self.c.items():
            for k2, v2 in other.c.items():
                k = k1 + k2
                w = c.get(k, Fraction(0)) + v1 * v2
                if w == 0:
                    c.pop(k, None)
                else:
                    c[k] = w
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = c
        return out

    __rmul__ = __mul__

    def shift(self, m: int) -> "LaurentPoly":
        """Multiply by q^m."""
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = {k + m: v for k, v in self.c.items()}
        return out

    def unit_inv(self) -> "LaurentPoly":
        if not self.is_unit():
            raise ValueError(f"not a unit of k[q^(+-1)]: {self}")
        ((m, v),) = self.c.items()
        return LaurentPoly({-m: 1 / v})

    def __pow__(self, n: int) -> "LaurentPoly":
        if n < 0:
            return self.unit_inv() ** (-n)
        out = LaurentPoly.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def subs_qinv(self) -> "LaurentPoly":
        """The involution q -> q^{-1} (the ι-twist on coefficients)."""
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = {-k: v for k, v in self.c.items()}
        return out

    def __eq__(self, other) -> bool:
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.c == other.c

    def __hash__(self):
        return hash(tuple(sorted(self.c.items())))

    # -- evaluation -------------------------------------------------------

    def eval(self, q0: Fraction) -> Fraction:
        q0 = Fraction(q0)
        return sum((v * q0 ** k for k, v in self.c.items()), Fraction(0))

    def eval_complex(self, q0: complex) -> complex:
        return sum(complex(v) * q0 ** k for k, v in self.c.items()) if self.c else 0j

    # -- Euclidean layer (Q[q] after unit normalization) -------------------

    def monic_poly(self) -> "LaurentPoly":
        """Normalize by a unit so min degree is 0 and the top coefficient 1."""
        if self.is_zero():
            return self
        p = self.shift(-self.min_deg())
        lead = p.c[p.max_deg()]
        out = LaurentPoly.__new__(LaurentPoly)
        out.c = {k: v / lead for k, v in p.c.items()}
        return out

    def divmod_poly(self, other: "LaurentPoly") -> Tuple["LaurentPoly", "LaurentPoly"]:
        """Division with remainder in Q[q]; both operands must lie in Q[q]."""
        if other.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        rem = dict(self.c)
        quo: Dict[int, Fraction] = {}
        dB = other.max_deg()
        lead = other.c[dB]
        while rem and max(rem) >= dB:
            dA = max(rem)
            f = rem[dA] / lead
            quo[dA - dB] = f
            for k, v in other.c.items():
                kk = k + dA - dB
                w = rem.get(kk, Fraction(0)) - f * v
                if w == 0:
                    rem.pop(kk, None)
                else:
                    rem[kk] = w
        return LaurentPoly(quo), LaurentPoly(rem)

    def gcd(self, other: "LaurentPoly") -> "LaurentPoly":
        """gcd in k[q^{±1}], returned monic with min degree 0."""
        a, b = self, other
        if a.is_zero():
            return b.monic_poly()
        if b.is_zero():
            return a.monic_poly()
        a = a.monic_poly()
        b = b.monic_poly()
        while not b.is_zero():
            _, r = a.divmod_poly(b)
            a, b = b, (r.monic_poly() if not r.is_zero() else r)
        return a.monic_poly()

    def divides(self, other: "LaurentPoly") -> bool:
        if self.is_zero():
            return other.is_zero()
        if other.is_zero():
            return True
        _, r = other.shift(-other.min_deg()).divmod_poly(self.shift(-self.min_deg()))
        return r.is_zero()

    def exact_div(self, other: "LaurentPoly") -> "LaurentPoly":
        if other.is_unit():
            return self * other.unit_inv()
        if self.is_zero():
            return self
        sh = self.min_deg() - other.min_deg()
        qq, r = self.shift(-self.min_deg()).divmod_poly(other.shift(-other.min_deg()))
        if not r.is_zero():
            raise ValueError(f"{other} does not divide {self}")
        return qq.shift(sh)

    # -- io ---------------------------------------------------------------

    def __repr__(self):
        if not self.c:
            return "0"
        terms = []
        for k in sorted(self.c):
            v = self.c[k]
            if k == 0:
                terms.append(f"{v}")
            elif k == 1:
                terms.append(f"{v}*q")
            else:
                terms.append(f"{v}*q^{k}")
        return " + ".join(terms)

    def to_json(self):
        return {str(k): str(v) for k, v in sorted(self.c.items())}

    @classmethod
    def from_json(cls, d) -> "LaurentPoly":
        return cls({int(k): Fraction(v) for k, v in d.items()})


def _coerce(x):
    if isinstance(x, LaurentPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return LaurentPoly.const(x)
    return NotImplemented


LP = LaurentPoly

# ---------------------------------------------------------------------------
# Fraction field k(q)
# ---------------------------------------------------------------------------


class QFrac:
    """Element of the rational-function field k(q) = Frac(k[q^{±1}])."""

    __slots__ = ("num", "den")

    def __init__(self, num: LaurentPoly, den: Optional[LaurentPoly] = None):
        if den is None:
            den = LP.one()
        if den.is_zero():
            raise ZeroDivisionError("zero denominator in k(q)")
        if num.is_zero():
            den = LP.one()
        else:
            g = num.gcd(den)
            if not g.is_one():
                num = num.exact_div(g)
                den = den.exact_div(g)
            # normalize: denominator monic in Q[q] with min degree 0
            m = den.min_deg()
            lead = den.c[den.max_deg()]
            unit = LaurentPoly({m: lead})
            den = den * unit.unit_inv()
            num = num * unit.unit_inv()
        self.num = num
        self.den = den

    @classmethod
    def of(cls, x) -> "QFrac":
        if isinstance(x, QFrac):
            return x
        if isinstance(x, LaurentPoly):
            return cls(x)
        if isinstance(x, (int, Fraction)):
            return cls(LP.const(x))
        raise TypeError(f"cannot coerce {x!r} to k(q)")

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_laurent(self) -> bool:
        return self.den.is_unit()

    def as_laurent(self) -> LaurentPoly:
        if not self.is_laurent():
            raise ValueError(f"not in k[q^(+-1)]: {self}")
        return self.num * self.den.unit_inv()

    def __add__(self, other):
        other = QFrac.of(other)
        return QFrac(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return QFrac(-self.num, self.den)

    def __sub__(self, other):
        return self + (-QFrac.of(other))

    def __rsub__(self, other):
        return QFrac.of(other) + (-self)

    def __mul__(self, other):
        other = QFrac.of(other)
        return QFrac(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inv(self) -> "QFrac":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in k(q)")
        return QFrac(self.den, self.num)

    def __truediv__(self, other):
        return self * QFrac.of(other).inv()

    def __rtruediv__(self, other):
        return QFrac.of(other) * self.inv()

    def __eq__(self, other):
        other = QFrac.of(other)
        return (self.num * other.den - other.num * self.den).is_zero()

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        if self.den.is_one():
            return repr(self.num)
        return f"({self.num})/({self.den})"


# ---------------------------------------------------------------------------
# Matrix helpers over k[q^{±1}] and k(q)
# ---------------------------------------------------------------------------

LMat = List[List[LaurentPoly]]


def lmat(rows: Sequence[Sequence]) -> LMat:
    return [[x if isinstance(x, LaurentPoly) else LP.const(x) for x in row] for row in rows]


def lmat_zero(n: int, m: int) -> LMat:
    return [[LP.zero() for _ in range(m)] for _ in range(n)]


def lmat_eye(n: int) -> LMat:
    out = lmat_zero(n, n)
    for i in range(n):
        out[i][i] = LP.one()
    return out


def lmat_mul(a: LMat, b: LMat) -> LMat:
    n, k, m = len(a), len(b), len(b[0]) if b else 0
    out = lmat_zero(n, m)
    for i in range(n):
        for j in range(m):
            s = LP.zero()
            for t in range(k):
                if a[i][t].c and b[t][j].c:
                    s = s + a[i][t] * b[t][j]
            out[i][j] = s
    return out


def lmat_add(a: LMat, b: LMat) -> LMat:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def lmat_sub(a: LMat, b: LMat) -> LMat:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def lmat_scale(a: LMat, s) -> LMat:
    return [[x * s for x in row] for row in a]


def lmat_eq(a: LMat, b: LMat) -> bool:
    return all(x == y for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def lmat_is_zero(a: LMat) -> bool:
    return all(x.is_zero() for row in a for x in row)


def lmat_subs_qinv(a: LMat) -> LMat:
    return [[x.subs_qinv() for x in row] for row in a]


def lmat_eval(a: LMat, q0: Fraction) -> List[List[Fraction]]:
    return [[x.eval(q0) for x in row] for row in a]


def _frac_rank(m: List[List[Fraction]]) -> int:
    m = [row[:] for row in m]
    rows, cols = len(m), len(m[0]) if m else 0
    rank = 0
    r = 0
    for c in range(cols):
        piv = None
        for i in range(r, rows):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
        rank += 1
        if r == rows:
            break
    return rank


_RNG = random.Random(987654321)


def lmat_rank_kq(a: LMat, trials: int = 2) -> int:
    """Rank over k(q): maximum rank at generic rational evaluations of q."""
    if not a or not a[0]:
        return 0
    best = 0
    for _ in range(trials):
        q0 = Fraction(_RNG.randint(10 ** 4, 10 ** 5), _RNG.randint(10 ** 3, 10 ** 4))
        best = max(best, _frac_rank(lmat_eval(a, q0)))
    return best


def qmat_of(a: LMat) -> List[List[QFrac]]:
    return [[QFrac(x) for x in row] for row in a]


def qmat_solve(a: List[List[QFrac]], b: List[List[QFrac]]) -> Optional[List[List[QFrac]]]:
    """Solve a·x = b over k(q) for square invertible a; None if singular."""
    n = len(a)
    m = len(b[0]) if b else 0
    aug = [[a[i][j] for j in range(n)] + [b[i][j] for j in range(m)] for i in range(n)]
    r = 0
    piv_cols = []
    for c in range(n):
        piv = None
        for i in range(r, n):
            if not aug[i][c].is_zero():
                piv = i
                break
        if piv is None:
            return None
        aug[r], aug[piv] = aug[piv], aug[r]
        pv = aug[r][c].inv()
        aug[r] = [x * pv for x in aug[r]]
        for i in range(n):
            if i != r and not aug[i][c].is_zero():
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        piv_cols.append(c)
        r += 1
    return [[aug[i][n + j] for j in range(m)] for i in range(n)]


def qmat_inv(a: List[List[QFrac]]) -> Optional[List[List[QFrac]]]:
    n = len(a)
    eye = [[QFrac.of(1 if i == j else 0) for j in range(n)] for i in range(n)]
    return qmat_solve(a, eye)


def qmat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0]) if b else 0
    return [
        [sum((a[i][t] * b[t][j] for t in range(k)), QFrac.of(0)) for j in range(m)]
        for i in range(n)
    ]


def qmat_nullspace(a: List[List[QFrac]]) -> List[List[QFrac]]:
    """Basis of the right nullspace over k(q); each basis vector is a column."""
    if not a:
        return []
    rows, cols = len(a), len(a[0])
    m = [row[:] for row in a]
    piv_of_col = {}
    r = 0
    for c in range(cols):
        piv = None
        for i in range(r, rows):
            if not m[i][c].is_zero():
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c].inv()
        m[r] = [x * pv for x in m[r]]
        for i in range(rows):
            if i != r and not m[i][c].is_zero():
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        piv_of_col[c] = r
        r += 1
        if r == rows:
            break
    free_cols = [c for c in range(cols) if c not in piv_of_col]
    basis = []
    for fc in free_cols:
        v = [QFrac.of(0)] * cols
        v[fc] = QFrac.of(1)
        for c, pr in piv_of_col.items():
            v[c] = -m[pr][fc]
        basis.append(v)
    return basis


def lmat_to_laurent(a: List[List[QFrac]]) -> Optional[LMat]:
    """Convert a k(q)-matrix back to k[q^{±1}] if every entry is polynomial."""
    out = []
    for row in a:
        orow = []
        for x in row:
            if not x.is_laurent():
                return None
            orow.append(x.as_laurent())
        out.append(orow)
    return out


def lmat_det(a: LMat) -> LaurentPoly:
    n = len(a)
    if n == 0:
        return LP.one()
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    det = LP.zero()
    for j in range(n):
        if a[0][j].is_zero():
            continue
        minor = [[a[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = a[0][j] * lmat_det(minor)
        det = det + (term if j % 2 == 0 else -term)
    return det


def invariant_factors(a: LMat) -> List[LaurentPoly]:
    """Invariant factors of the k[q^{±1}]-module map given by a (gcd-of-minors).

    Returned monic with minimum degree 0; a surjective/injective saturation
    test reduces to all factors being 1 (units).
    """
    if not a or not a[0]:
        return []
    rank = lmat_rank_kq(a)
    from itertools import combinations

    rows, cols = len(a), len(a[0])
    dets_prev = LP.one()
    out = []
    for k in range(1, rank + 1):
        g = LP.zero()
        for rr in combinations(range(rows), k):
            for cc in combinations(range(cols), k):
                sub = [[a[i][j] for j in cc] for i in rr]
                d = lmat_det(sub)
                if not d.is_zero():
                    g = g.gcd(d)
                if g.is_one():
                    break
            if g.is_one():
                break
        out.append(g.exact_div(dets_prev).monic_poly())
        dets_prev = g
    return out


def lmat_spans_full(a: LMat) -> bool:
    """True iff the columns of a generate the full free module k[q^{±1}]^rows."""
    if not a or len(a[0]) < len(a):
        return False
    if lmat_rank_kq(a) < len(a):
        return False
    return all(f.is_one() for f in invariant_factors(a))


def lmat_membership(frame: LMat, vecs: LMat) -> bool:
    """True iff every column of vecs lies in the k[q^{±1}]-span of frame's columns.

    frame must have full column rank over k(q).
    """
    fr = qmat_of(frame)
    n, m = len(frame), len(frame[0])
    if m == n:
        sol = qmat_solve(fr, qmat_of(vecs))
        if sol is None:
            return False
        return lmat_to_laurent(sol) is not None
    # overdetermined: solve least-structure via nullspace of [frame | -vec]
    for j in range(len(vecs[0])):
        col = [[vecs[i][j]] for i in range(n)]
        aug = [[fr[i][k] for k in range(m)] + [QFrac.of(-1) * QFrac(col[i][0])] for i in range(n)]
        ns = qmat_nullspace(aug)
        ok = False
        for v in ns:
            if not v[m].is_zero():
                scale = v[m].inv()
                cand = [v[t] * scale for t in range(m)]
                if all(x.is_laurent() for x in cand):
                    ok = True
                    break
        if not ok:
            return False
    return True


def lmat_span_equal(a: LMat, b: LMat) -> bool:
    return lmat_membership(a, b) and lmat_membership(b, a)


# ---------------------------------------------------------------------------
# Euclidean structure of k[q^{+-1}] and Smith normal form
# ---------------------------------------------------------------------------


def lp_size(x: LaurentPoly) -> int:
    """Euclidean size: exponent span of the normalized polynomial."""
    if x.is_zero():
        return -1
    return x.max_deg() - x.min_deg()


def lp_xgcd(a: LaurentPoly, b: LaurentPoly) -> Tuple[LaurentPoly, LaurentPoly, LaurentPoly]:
    """(g, s, t) with s*a + t*b = g, g the normalized gcd (monic, min-deg 0)."""
    if a.is_zero() and b.is_zero():
        return LaurentPoly.zero(), LaurentPoly.zero(), LaurentPoly.zero()
    if a.is_zero():
        # normalize b to monic with min-deg 0
        g = b.shift(-b.min_deg())
        lc = g.coeff(g.max_deg())
        g = g * LaurentPoly.const(Fraction(1) / lc)
        return g, LaurentPoly.zero(), g.exact_div(b)
    if b.is_zero():
        g, s, t = lp_xgcd(b, a)
        return g, t, s
    # normalize to ordinary polynomials with nonzero constant term
    ua, ub = a.min_deg(), b.min_deg()
    a0, b0 = a.shift(-ua), b.shift(-ub)
    # extended Euclid in Q[q]
    r0, r1 = a0, b0
    s0, s1 = LaurentPoly.one(), LaurentPoly.zero()
    t0, t1 = LaurentPoly.zero(), LaurentPoly.one()
    while not r1.is_zero():
        quo, rem = r0.divmod_poly(r1)
        r0, r1 = r1, rem
        s0, s1 = s1, s0 - quo * s1
        t0, t1 = t1, t0 - quo * t1
    # r0 = s0*a0 + t0*b0; normalize r0 monic with min-deg 0
    shift = -r0.min_deg()
    lc = r0.shift(shift).coeff(r0.shift(shift).max_deg())
    unit = LaurentPoly.q_power(shift, Fraction(1) / lc)
    g = r0 * unit
    s = s0 * unit * LaurentPoly.q_power(-ua)
    t = t0 * unit * LaurentPoly.q_power(-ub)
    return g, s, t


def _unimodular_rowpair(mat, u_acc, i, j, s, t, x, y):
    """rows (i,j) <- (s*ri + t*rj, x*ri + y*rj), applied to mat and u_acc."""
    for target in (mat, u_acc):
        ri = list(target[i])
        rj = list(target[j])
        target[i] = [s * p + t * q_ for p, q_ in zip(ri, rj)]
        target[j] = [x * p + y * q_ for p, q_ in zip(ri, rj)]


def smith_form(a: LMat) -> Tuple[LMat, LMat, LMat]:
    """U, D, V with U*A*V = D diagonal over k[q^{+-1}], U and V unimodular.

    Diagonal entries are normalized (monic polynomials with nonzero constant
    term) and satisfy the divisibility chain d_1 | d_2 | ...
    """
    n = len(a)
    m = len(a[0]) if n else 0
    D = [[x for x in row] for row in a]
    U = [[LaurentPoly.one() if i == j else LaurentPoly.zero() for j in range(n)] for i in range(n)]
    V = [[LaurentPoly.one() if i == j else LaurentPoly.zero() for j in range(m)] for i in range(m)]
    # work on V via columns: keep Vt = V transposed as row ops
    Vt = V  # V is applied on the right; store as matrix and do column ops directly

    def col_pair(i, j, s, t, x, y):
        for target in (D, Vt):
            rows = range(len(target))
            ci = [target[r][i] for r in rows]
            cj = [target[r][j] for r in rows]
            for r in rows:
                target[r][i] = s * ci[r] + t * cj[r]
                target[r][j] = x * ci[r] + y * cj[r]

    tpos = 0
    while tpos < min(n, m):
        # find nonzero entry of minimal size in the remaining block
        best = None
        for i in range(tpos, n):
            for j in range(tpos, m):
                if not D[i][j].is_zero():
                    sz = lp_size(D[i][j])
                    if best is None or sz < best[0]:
                        best = (sz, i, j)
        if best is None:
            break
        _, bi, bj = best
        if bi != tpos:
            _unimodular_rowpair(D, U, tpos, bi, LaurentPoly.zero(), LaurentPoly.one(),
                                LaurentPoly.one(), LaurentPoly.zero())
        if bj != tpos:
            col_pair(tpos, bj, LaurentPoly.zero(), LaurentPoly.one(),
                     LaurentPoly.one(), LaurentPoly.zero())
        while True:
            # clear column tpos
            dirty = False
            for i in range(tpos + 1, n):
                if D[i][tpos].is_zero():
                    continue
                p, e = D[tpos][tpos], D[i][tpos]
                if p.divides(e):
                    quo = e.exact_div(p)
                    _unimodular_rowpair(D, U, tpos, i,
                                        LaurentPoly.one(), LaurentPoly.zero(),
                                        -quo, LaurentPoly.one())
                else:
                    g, s, t = lp_xgcd(p, e)
                    _unimodular_rowpair(D, U, tpos, i, s, t,
                                        -e.exact_div(g), p.exact_div(g))
                    dirty = True
            for j in range(tpos + 1, m):
                if D[tpos][j].is_zero():
                    continue
                p, e = D[tpos][tpos], D[tpos][j]
                if p.divides(e):
                    quo = e.exact_div(p)
                    col_pair(tpos, j, LaurentPoly.one(), LaurentPoly.zero(),
                             -quo, LaurentPoly.one())
                else:
                    g, s, t = lp_xgcd(p, e)
                    col_pair(tpos, j, s, t, -e.exact_div(g), p.exact_div(g))
                    dirty = True
            col_ok = all(D[i][tpos].is_zero() for i in range(tpos + 1, n))
            row_ok = all(D[tpos][j].is_zero() for j in range(tpos + 1, m))
            if col_ok and row_ok and not dirty:
                break
        # divisibility: pivot must divide the rest of the block
        p = D[tpos][tpos]
        offender = None
        for i in range(tpos + 1, n):
            for j in range(tpos + 1, m):
                if not D[i][j].is_zero() and not p.divides(D[i][j]):
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            _unimodular_rowpair(D, U, tpos, offender,
                                LaurentPoly.one(), LaurentPoly.one(),
                                LaurentPoly.zero(), LaurentPoly.one())
            continue
        # normalize pivot
        shift = -p.min_deg()
        lc = p.shift(shift).coeff(p.shift(shift).max_deg())
        unit = LaurentPoly.q_power(shift, Fraction(1) / lc)
        for j in range(len(D[tpos])):
            D[tpos][j] = D[tpos][j] * unit
        for j in range(len(U[tpos])):
            U[tpos][j] = U[tpos][j] * unit
        tpos += 1
    return U, D, Vt


def lmat_kernel(a: LMat) -> LMat:
    """Basis (columns) of the saturated kernel lattice over k[q^{+-1}]."""
    n = len(a)
    m = len(a[0]) if n else 0
    if n == 0:
        return lmat_eye(m)
    U, D, V = smith_form(a)
    zero_cols = []
    for j in range(m):
        d = D[j][j] if j < min(n, m) else None
        if d is None or d.is_zero():
            zero_cols.append(j)
    if not zero_cols:
        return [[ ] for _ in range(m)]
    return [[V[i][j] for j in zero_cols] for i in range(m)]


def lmat_saturate(a: LMat) -> LMat:
    """Basis of the saturation of the column span (intersection with k(q)-span)."""
    n = len(a)
    U, D, V = smith_form(a)
    r = 0
    for j in range(min(n, len(a[0]) if n else 0)):
        if not D[j][j].is_zero():
            r += 1
    uinv = lmat_inverse_unimodular(U)
    return [[uinv[i][j] for j in range(r)] for i in range(n)]


def lmat_inverse_unimodular(u: LMat) -> LMat:
    """Inverse of a unimodular Laurent matrix (exact, via k(q) solve)."""
    n = len(u)
    inv = qmat_inv(qmat_of(u))
    if inv is None:
        raise ValueError("matrix not invertible")
    out = lmat_to_laurent(inv)
    if out is None:
        raise ValueError("matrix not unimodular over k[q^{+-1}]")
    return out


def frac_nullspace(rows: List[List[Fraction]]) -> List[List[Fraction]]:
    """Nullspace basis of a rational matrix (vectors as lists)."""
    if not rows:
        return []
    n, m = len(rows), len(rows[0])
    a = [[Fraction(x) for x in row] for row in rows]
    piv_of_col = {}
    r = 0
    for c in range(m):
        piv = None
        for i in range(r, n):
            if a[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        a[r] = [x / pv for x in a[r]]
        for i in range(n):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv_of_col[c] = r
        r += 1
        if r == n:
            break
    free = [c for c in range(m) if c not in piv_of_col]
    basis = []
    for fc in free:
        v = [Fraction(0)] * m
        v[fc] = Fraction(1)
        for c, ri in piv_of_col.items():
            v[c] = -a[ri][fc]
        basis.append(v)
    return basis


def lp_solve(a: LMat, b: LMat) -> Optional[LMat]:
    """A Laurent solution X of a X = b, or None when none exists.

    Via the Smith form u a v = d: with y = v^{-1} x the system becomes
    d y = u b, so y_i = (u b)_i / d_i must divide exactly; remaining free
    coordinates are set to zero.  Decides integral solvability completely.
    """
    n = len(a)
    m = len(a[0]) if a else 0
    p = len(b[0]) if b and b[0] else 0
    if m == 0:
        if any(not b[i][j].is_zero() for i in range(n) for j in range(p)):
            return None
        return [[] for _ in range(0)]
    u, d, v = smith_form(a)
    ub = lmat_mul(u, b)
    y = [[LaurentPoly.zero() for _ in range(p)] for _ in range(m)]
    for i in range(n):
        di = d[i][i] if i < m else LaurentPoly.zero()
        for j in range(p):
            if di.is_zero():
                if not ub[i][j].is_zero():
                    return None
            else:
                if not di.divides(ub[i][j]):
                    return None
                y[i][j] = ub[i][j].exact_div(di)
    return lmat_mul(v, y)
