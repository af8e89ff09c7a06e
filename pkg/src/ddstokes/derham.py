"""First de Rham cohomology lattices of the pair (f,g) over the (lam,mu) base.

H^1 is computed from a finite two-term complex of sections with bounded poles
on P^1: functions V -> forms W, where the map is the twisted differential
nabla(h) = dh + h * lam^{-1} (df - mu dg/g).  The cokernel over the fraction
field Q(i)(lam,mu) gives a basis together with a complete rewrite system; the
operators nabla_a (vector field a = lam^2 d_lam + lam*mu d_mu) and the shift S
(mu -> mu - lam twist) become matrices; the duality pairing is evaluated by
local pole-peeling at the poles of f followed by residue extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .geometry import PairGeometry, RationalFunction, Z, W, ConstantF

LAM = sympy.Symbol("lam")
MU = sympy.Symbol("mu")


class PoleOutsideD(ValueError):
    """A form has a pole outside the allowed divisor."""


class IndexMismatch(ValueError):
    """Pairing requires lattice indices with a+c = b+d = -1."""


def _cancel(x):
    return sympy.cancel(sympy.together(x))


def _is_zero(x) -> bool:
    return _cancel(x) == 0


# ---------------------------------------------------------------------------
# Places: the finite/infinite support of the divisors in play
# ---------------------------------------------------------------------------


@dataclass
class Place:
    kind: str          # "P", "E0", "Einf"
    poly: Optional[sympy.Poly]   # monic irreducible in z; None for infinity
    mult: int          # pole order m_p (P) or order n_e (E0>0, Einf<0)

    @property
    def is_inf(self) -> bool:
        return self.poly is None

    @property
    def deg(self) -> int:
        return 1 if self.is_inf else self.poly.degree()


def places_of(geom: PairGeometry) -> List[Place]:
    f, g = geom.f, geom.g
    out: List[Place] = []
    p_polys: List[sympy.Poly] = []

    def monic(p: sympy.Poly) -> sympy.Poly:
        return sympy.Poly(p.as_expr() / p.LC(), p.gen, domain="QQ_I")

    _, fden_factors = f.den.factor_list()
    for fac, m in fden_factors:
        fac = monic(fac)
        out.append(Place("P", fac, int(m)))
        p_polys.append(fac)
    gap = f.num.degree() - f.den.degree()
    inf_in_P = gap > 0
    if inf_in_P:
        out.append(Place("P", None, gap))

    def in_P(fac) -> bool:
        return any(fac.as_expr().equals(q.as_expr()) for q in p_polys)

    _, gnum_factors = g.num.factor_list()
    for fac, m in gnum_factors:
        fac = monic(fac)
        if not in_P(fac):
            out.append(Place("E0", fac, int(m)))
    _, gden_factors = g.den.factor_list()
    for fac, m in gden_factors:
        fac = monic(fac)
        if not in_P(fac):
            out.append(Place("Einf", fac, -int(m)))
    ggap = g.num.degree() - g.den.degree()
    if not inf_in_P:
        if ggap < 0:
            out.append(Place("E0", None, -ggap))
        elif ggap > 0:
            out.append(Place("Einf", None, ggap))
    return out


def _mult_in_divisor(pl: Place, n: int, a: int, b: int, role: str) -> int:
    """Multiplicity of the place in D_V (role 'V') or D_W (role 'W')."""
    if pl.kind == "P":
        return n * pl.mult if role == "V" else (n + 1) * pl.mult + 1
    if pl.kind == "E0":
        return a if role == "V" else a + 1
    return b if role == "V" else b + 1


# ---------------------------------------------------------------------------
# Form classes and the cohomology basis
# ---------------------------------------------------------------------------


@dataclass
class FormClass:
    """The class of h * lam^{-1} dz * e, h a rational function in z."""

    h: sympy.Expr
    label: str = ""

    @classmethod
    def e(cls, n: int) -> "FormClass":
        """The monomial class e_n = [lam^{-1} z^n dz]."""
        return cls(h=Z ** n, label=f"e_{n}")

    def __repr__(self):
        return self.label or f"[{self.h} * dz/lam]"


@dataclass
class ParamMatrix:
    """Matrix over Q(i)(lam,mu), optionally carrying the sigma-twist."""

    entries: List[List[sympy.Expr]]
    twist: str = "none"              # "none" or "sigma"
    dom_lattice: Tuple[int, int] = (0, 0)
    cod_lattice: Tuple[int, int] = (0, 0)

    @property
    def shape(self):
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def subs_sigma(self) -> "ParamMatrix":
        return ParamMatrix(
            [[_cancel(x.subs(MU, MU - LAM)) for x in row] for row in self.entries],
            twist=self.twist, dom_lattice=self.dom_lattice, cod_lattice=self.cod_lattice,
        )

    def mul(self, other: "ParamMatrix") -> "ParamMatrix":
        """self o other, substituting mu -> mu-lam into self when other twists."""
        left = self.subs_sigma() if other.twist == "sigma" else self
        a, b = left.entries, other.entries
        n, k, m = len(a), len(b), len(b[0])
        ent = [[_cancel(sum(a[i][t] * b[t][j] for t in range(k))) for j in range(m)] for i in range(n)]
        twist = "sigma" if (self.twist == "sigma") != (other.twist == "sigma") else "none"
        return ParamMatrix(ent, twist=twist, dom_lattice=other.dom_lattice, cod_lattice=self.cod_lattice)

    def eq(self, other: "ParamMatrix") -> bool:
        if self.shape != other.shape:
            return False
        return all(
            _is_zero(x - y) for ra, rb in zip(self.entries, other.entries) for x, y in zip(ra, rb)
        )

    def det(self) -> sympy.Expr:
        return _cancel(sympy.Matrix(self.entries).det())

    def to_sympy(self) -> sympy.Matrix:
        return sympy.Matrix(self.entries)

    def to_json(self):
        return {
            "twist": self.twist,
            "entries": [[str(x) for x in row] for row in self.entries],
        }


@dataclass
class CohomBasis:
    geom: PairGeometry
    a: int
    b: int
    n: int
    places: List[Place]
    MW: sympy.Expr                 # finite-part denominator of the W window
    w_exps: List[int]              # allowed j for basis elements z^j / MW
    basis_js: List[int]            # non-pivot columns (ascending)
    rewrites: Dict[int, List[sympy.Expr]]   # pivot j -> coeffs over basis_js
    image_cols: List[List[sympy.Expr]]      # nabla images in W coordinates
    mw_is_monomial_pow: Optional[int] = None  # s when MW == z^s (for e_n labels)

    @property
    def rank(self) -> int:
        return len(self.basis_js)

    @property
    def basis(self) -> List[FormClass]:
        out = []
        for j in self.basis_js:
            h = _cancel(Z ** j / self.MW)
            if self.mw_is_monomial_pow is not None:
                out.append(FormClass(h=h, label=f"e_{j - self.mw_is_monomial_pow}"))
            else:
                out.append(FormClass(h=h, label=f"w^{j}"))
        return out

    def basis_labels(self) -> List[str]:
        return [fc.label for fc in self.basis]

    def e_index_of_column(self, j: int) -> Optional[int]:
        if self.mw_is_monomial_pow is None:
            return None
        return j - self.mw_is_monomial_pow


def _window_data(geom: PairGeometry, places: List[Place], n: int, a: int, b: int):
    """Monomial-type bases of V (functions) and W (forms) for the window."""
    MV = sympy.Integer(1)
    MW = sympy.Integer(1)
    degMV = degMW = 0
    infV = infW = 0
    for pl in places:
        mv = _mult_in_divisor(pl, n, a, b, "V")
        mw = _mult_in_divisor(pl, n, a, b, "W")
        if pl.is_inf:
            infV, infW = mv, mw
        else:
            MV *= pl.poly.as_expr() ** mv
            MW *= pl.poly.as_expr() ** mw
            degMV += pl.deg * mv
            degMW += pl.deg * mw
    v_hi = degMV + infV          # j ranges over 0..v_hi for z^j / MV
    w_hi = degMW + infW - 2      # j ranges over 0..w_hi for z^j / MW (forms)
    v_exps = list(range(0, v_hi + 1))
    w_exps = list(range(0, w_hi + 1))
    return MV, v_exps, MW, w_exps


def _nabla_image_columns(geom: PairGeometry, MV, v_exps, MW, w_exps):
    """Columns of nabla: V basis -> W coordinates, entries linear in lam, mu."""
    f, g = geom.f, geom.g
    C = f.deriv().expr - MU * g.dlog().expr
    cols = []
    for j in v_exps:
        h = Z ** j / MV
        R = LAM * sympy.diff(h, Z) + h * C
        poly_expr = _cancel(R * MW)
        p = sympy.Poly(poly_expr, Z)
        if p.degree() > (w_exps[-1] if w_exps else -1):
            raise RuntimeError("window bookkeeping error: image leaves W")
        vec = [sympy.expand(poly_expr.coeff(Z, k)) if not p.is_zero else sympy.Integer(0) for k in w_exps]
        vec = [sympy.expand(p.as_expr().coeff(Z, k)) for k in w_exps]
        cols.append(vec)
    return cols


def _rref(rows: List[List[sympy.Expr]], col_order: List[int]):
    """RREF over Q(i)(lam,mu) scanning columns in the given order."""
    rows = [[_cancel(x) for x in r] for r in rows]
    nrows = len(rows)
    pivots: List[Tuple[int, int]] = []   # (row, col)
    r = 0
    for c in col_order:
        piv = None
        for i in range(r, nrows):
            if not _is_zero(rows[i][c]):
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][c]
        rows[r] = [_cancel(x / pv) for x in rows[r]]
        for i in range(nrows):
            if i != r and not _is_zero(rows[i][c]):
                fct = rows[i][c]
                rows[i] = [_cancel(x - fct * y) for x, y in zip(rows[i], rows[r])]
        pivots.append((r, c))
        r += 1
        if r == nrows:
            break
    return rows[:r], pivots


def expected_rank(geom: PairGeometry) -> int:
    return len(geom.E) + len(geom.crit)


def build_basis(geom: PairGeometry, a: int = 0, b: int = 0, n: Optional[int] = None) -> CohomBasis:
    """Cohomology basis with rewrite system for the lattice (a,b).

    The truncation n is auto-selected as the smallest value past the degree
    vanishing threshold whose cokernel rank matches the sheet count.
    """
    if geom.f.is_constant():
        raise ConstantF("f must be nonconstant")
    places = places_of(geom)
    want = expected_rank(geom)
    n_candidates = range(n, n + 1) if n is not None else range(0, 12)
    last_err = None
    for ncur in n_candidates:
        MV, v_exps, MW, w_exps = _window_data(geom, places, ncur, a, b)
        if not w_exps:
            continue
        dimV = len(v_exps)
        dimW = len(w_exps)
        if dimW - dimV != want and n is None:
            continue
        cols = _nabla_image_columns(geom, MV, v_exps, MW, w_exps)
        rows = [list(col) for col in cols]      # one row per V basis element
        col_order = list(range(len(w_exps) - 1, -1, -1))   # highest exponent first
        red, pivots = _rref(rows, col_order)
        if len(pivots) != dimV and n is None:
            continue
        piv_cols = {c for _, c in pivots}
        basis_js = sorted(c for c in range(dimW) if c not in piv_cols)
        rewrites: Dict[int, List[sympy.Expr]] = {}
        for r_i, c in pivots:
            rewrites[c] = [_cancel(-red[r_i][j]) for j in basis_js]
        mono = _monomial_power(MW)
        return CohomBasis(
            geom=geom, a=a, b=b, n=ncur, places=places, MW=MW, w_exps=w_exps,
            basis_js=basis_js, rewrites=rewrites, image_cols=cols,
            mw_is_monomial_pow=mono,
        )
    raise RuntimeError(f"no window produced the expected rank {want} (last: {last_err})")


def _monomial_power(MW: sympy.Expr) -> Optional[int]:
    """s when MW == z**s (s may be negative), else None."""
    num, den = sympy.fraction(sympy.cancel(MW))
    s = 0
    for part, sign in ((num, 1), (den, -1)):
        p = sympy.Poly(part, Z)
        monoms = [m for m, c in zip(p.monoms(), p.coeffs()) if c != 0]
        if len(monoms) != 1 or p.LC() != 1:
            return None
        s += sign * monoms[0][0]
    return s


# ---------------------------------------------------------------------------
# Reduction of arbitrary forms into the basis
# ---------------------------------------------------------------------------


def reduce_form(basis: CohomBasis, form: FormClass) -> List[sympy.Expr]:
    """Coefficient vector of [form] in the basis, peeling poles at P as needed."""
    geom = basis.geom
    h = sympy.cancel(sympy.together(form.h))
    for n_extra in range(0, 40):
        ncur = basis.n + n_extra
        MV, v_exps, MW, w_exps = _window_data(geom, basis.places, ncur, basis.a, basis.b)
        expr = _cancel(h * MW)
        if not expr.is_polynomial(Z):
            continue
        p = sympy.Poly(expr, Z) if expr != 0 else None
        degp = p.degree() if p is not None else -1
        if degp > w_exps[-1]:
            continue
        target = [sympy.expand(expr.coeff(Z, k)) if expr != 0 else sympy.Integer(0) for k in w_exps]
        cols = _nabla_image_columns(geom, MV, v_exps, MW, w_exps)
        # embed the window-n basis classes into the enlarged window
        MW0 = basis.MW
        emb = []
        for j in basis.basis_js:
            e_expr = _cancel((Z ** j / MW0) * MW)
            if not e_expr.is_polynomial(Z):
                raise RuntimeError("window embedding failed")
            emb.append([sympy.expand(e_expr.coeff(Z, k)) for k in w_exps])
        # solve [emb | cols] x = target
        ncols = len(emb) + len(cols)
        rows = []
        for k in range(len(w_exps)):
            row = [emb[i][k] for i in range(len(emb))] + [cols[i][k] for i in range(len(cols))]
            row.append(target[k])
            rows.append(row)
        sol = _solve_unique(rows, ncols, len(emb))
        if sol is None:
            continue
        return sol
    raise PoleOutsideD(f"cannot reduce {form}: poles outside D or window overflow")


def _solve_unique(aug_rows, ncols, nwanted):
    """Solve an overdetermined consistent system; return first nwanted unknowns."""
    red, pivots = _rref(aug_rows, list(range(ncols)))
    # inconsistency: pivot in the augmented column
    for row in red:
        if all(_is_zero(x) for x in row[:ncols]) and not _is_zero(row[ncols]):
            return None
    piv_cols = {c for _, c in pivots}
    if not set(range(nwanted)).issubset(piv_cols):
        return None
    sol = [sympy.Integer(0)] * ncols
    for r_i, c in pivots:
        sol[c] = red[r_i][ncols]
    return [_cancel(x) for x in sol[:nwanted]]


# ---------------------------------------------------------------------------
# Operator matrices
# ---------------------------------------------------------------------------


def nabla_a_matrix(basis: CohomBasis) -> ParamMatrix:
    """Matrix of nabla_a on the basis: [h dz/lam] -> [-(lam + f) h dz/lam]."""
    f = basis.geom.f
    cols = []
    for j in basis.basis_js:
        h = Z ** j / basis.MW
        img = FormClass(h=_cancel(-(LAM + f.expr) * h))
        cols.append(reduce_form(basis, img))
    ent = [[cols[c][r] for c in range(len(cols))] for r in range(basis.rank)]
    return ParamMatrix(ent, twist="none", dom_lattice=(basis.a, basis.b), cod_lattice=(basis.a, basis.b))


def shift_matrix(basis: CohomBasis, target: Optional[CohomBasis] = None) -> Tuple[ParamMatrix, CohomBasis]:
    """Matrix of the shift S: lattice (a,b) -> (a-1,b+1), with sigma twist.

    S multiplies the representative by g; coefficients are read in the target
    basis.  Composition with other matrices applies mu -> mu-lam to the later
    factor, per the twist bookkeeping.
    """
    g = basis.geom.g
    if target is None:
        target = build_basis(basis.geom, basis.a - 1, basis.b + 1)
    cols = []
    for j in basis.basis_js:
        h = Z ** j / basis.MW
        img = FormClass(h=_cancel(g.expr * h))
        cols.append(reduce_form(target, img))
    ent = [[cols[c][r] for c in range(len(cols))] for r in range(target.rank)]
    return (
        ParamMatrix(ent, twist="sigma", dom_lattice=(basis.a, basis.b), cod_lattice=(target.a, target.b)),
        target,
    )


def vector_field_a(expr: sympy.Expr) -> sympy.Expr:
    """The vector field a = lam^2 d_lam + lam*mu d_mu applied to a scalar."""
    return _cancel(LAM ** 2 * sympy.diff(expr, LAM) + LAM * MU * sympy.diff(expr, MU))


def integrability_check(basis: CohomBasis) -> bool:
    """S . A^sigma == A' . S + a(S): the shift intertwines the nabla_a operators.

    A, A' are the nabla_a matrices on the source and target lattices; A^sigma
    substitutes mu -> mu - lam; the extra term a(S) is the vector field a
    applied entrywise to S (S is semilinear over the twisted base).
    """
    A = nabla_a_matrix(basis)
    S, target = shift_matrix(basis)
    Ap = nabla_a_matrix(target)
    Sm = sympy.Matrix(S.entries)
    lhs = Sm * sympy.Matrix(A.subs_sigma().entries)
    rhs = sympy.Matrix(Ap.entries) * Sm + Sm.applyfunc(vector_field_a)
    diff = lhs - rhs
    return all(_is_zero(x) for x in diff)


# ---------------------------------------------------------------------------
# Rank-jump loci and lattice limits
# ---------------------------------------------------------------------------


def rank_jump_loci(geom: PairGeometry, a: int, b: int) -> List[dict]:
    """Lines where H^1_{a-1,b} -> H^1_{a,b} (resp. b-step) fails to be iso."""
    out = []
    for pl in places_of(geom):
        if pl.kind == "E0":
            out.append({
                "step": "a", "line": sympy.Eq(a * LAM + pl.mult * MU, 0),
                "n_e": pl.mult, "mult": pl.deg,
            })
        elif pl.kind == "Einf":
            out.append({
                "step": "b", "line": sympy.Eq(b * LAM + pl.mult * MU, 0),
                "n_e": pl.mult, "mult": pl.deg,
            })
    return out


def lattice_limits_report(geom: PairGeometry, window: Sequence[int]) -> dict:
    """Stabilization of the lattice family over a finite index window."""
    lo, hi = min(window), max(window)
    steps = []
    ranks = {}
    for a in range(lo, hi + 1):
        basis = build_basis(geom, a, 0)
        ranks[a] = basis.rank
    for a in range(lo + 1, hi + 1):
        loci = [d for d in rank_jump_loci(geom, a, 0) if d["step"] == "a"]
        steps.append({
            "inclusion": f"H({a-1},0) in H({a},0)",
            "iso_away_from": [str(d["line"]) for d in loci],
        })
    return {
        "ranks": ranks,
        "rank_constant": len(set(ranks.values())) == 1,
        "steps": steps,
    }


# ---------------------------------------------------------------------------
# Residue pairing
# ---------------------------------------------------------------------------


class _LSeries:
    """Laurent series with sympy-expression coefficients on a finite window."""

    def __init__(self, coeffs: Dict[int, sympy.Expr]):
        self.c = {k: v for k, v in coeffs.items() if not _is_zero(v)}

    def ord(self) -> Optional[int]:
        return min(self.c) if self.c else None

    def coeff(self, k: int) -> sympy.Expr:
        return self.c.get(k, sympy.Integer(0))

    def sub_scaled(self, other: "_LSeries", scale: sympy.Expr) -> "_LSeries":
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = _cancel(out.get(k, sympy.Integer(0)) - scale * v)
        return _LSeries(out)


def _expand_at_zero(expr: sympy.Expr, var, lo: int, hi: int) -> _LSeries:
    """Laurent expansion of a rational expr at var=0 for exponents lo..hi."""
    num, den = sympy.fraction(sympy.cancel(sympy.together(expr)))
    pnum = sympy.Poly(num, var)
    pden = sympy.Poly(den, var)
    # den = var^v * unit
    v = 0
    dcs = pnum  # placeholder
    den_coeffs = list(reversed(pden.all_coeffs()))
    while den_coeffs and _is_zero(den_coeffs[0]):
        den_coeffs = den_coeffs[1:]
        v += 1
    num_coeffs = list(reversed(pnum.all_coeffs()))
    need = hi - lo + 1 + max(0, -lo) + v + 2
    # inverse of unit series
    inv0 = _cancel(1 / den_coeffs[0])
    inv = [inv0] + [sympy.Integer(0)] * (need - 1)
    for k in range(1, need):
        s = sympy.Integer(0)
        for j in range(1, k + 1):
            if j < len(den_coeffs):
                s += den_coeffs[j] * inv[k - j]
        inv[k] = _cancel(-inv0 * s)
    out: Dict[int, sympy.Expr] = {}
    for i, nc in enumerate(num_coeffs):
        if _is_zero(nc):
            continue
        for k in range(need):
            e = i - v + k
            if lo <= e <= hi:
                out[e] = _cancel(out.get(e, sympy.Integer(0)) + nc * inv[k])
    return _LSeries(out)


def _peel_at_place(hB: sympy.Expr, C: sympy.Expr, var, m_p: int, n_A: int, depth_hint: int):
    """Local sections s with  hB*dz/lam - iota*nabla(s)  of order >= n_A*m_p at 0.

    iota*nabla(t^j) = lam^{-1} (lam j t^{j-1} - t^j C) dz.  Returns the Laurent
    polynomial s (dict exponent -> coeff).
    """
    threshold = n_A * m_p
    lo_probe = -(depth_hint + 2 * m_p + threshold + 6)
    hi = threshold + 1
    r = _expand_at_zero(hB, var, lo_probe, hi)
    Cs = _expand_at_zero(C, var, lo_probe - 2, hi + 2 * m_p + 4)
    cC = Cs.coeff(-m_p - 1)
    if _is_zero(cC):
        raise RuntimeError("connection leading coefficient vanished at a pole of f")
    s: Dict[int, sympy.Expr] = {}
    guard = 0
    max_steps = (depth_hint + 3 * m_p + abs(threshold) + 12)
    while True:
        o = r.ord()
        if o is None or o >= threshold:
            break
        guard += 1
        if guard > max_steps:
            raise RuntimeError("pole peeling did not terminate (indexing bug)")
        k = -o
        j = m_p + 1 - k
        a = _cancel(-r.coeff(o) / cC)   # correction coefficient for t^j
        if _is_zero(a):
            r = _LSeries({kk: vv for kk, vv in r.c.items() if kk != o})
            continue
        s[j] = _cancel(s.get(j, sympy.Integer(0)) + a)
        # subtract a * (lam j t^{j-1} - t^j C)
        corr: Dict[int, sympy.Expr] = {}
        if j != 0:
            corr[j - 1] = LAM * j
        for kk, vv in Cs.c.items():
            e = j + kk
            corr[e] = _cancel(corr.get(e, sympy.Integer(0)) - vv)
        r = r.sub_scaled(_LSeries(corr), a)
    return s


def _chart_data_for_place(geom: PairGeometry, pl: Place):
    """Local chart data: (variable, hA-transform, hB-transform, C, m_p, shift).

    Finite rational place at z0: t = z - z0.  Infinite place: w = 1/z with
    dz = -dw/w^2.
    """
    f, g = geom.f, geom.g
    if pl.is_inf:
        fw = f.infinity_chart()
        gw = g.infinity_chart()
        C = fw.deriv().expr - MU * gw.dlog().expr

        def xform(h):
            return _cancel(-h.subs(Z, 1 / W) / W ** 2)

        return W, xform, C, pl.mult
    if pl.poly.degree() != 1:
        raise NotImplementedError(
            "residue pairing implemented for rational pole points of f "
            f"(got irreducible factor {pl.poly.as_expr()})"
        )
    z0 = -pl.poly.all_coeffs()[-1]
    t = sympy.Symbol("t_local")
    C = f.deriv().expr - MU * g.dlog().expr
    Cl = _cancel(C.subs(Z, t + z0))

    def xform(h):
        return _cancel(h.subs(Z, t + z0))

    return t, xform, Cl, pl.mult


def pairing_matrix(basisA: CohomBasis, basisB: CohomBasis) -> ParamMatrix:
    """Gram matrix <b^A_i, iota* b^B_j>_dR via pole-peeling residues at P."""
    if basisA.a + basisB.a != -1 or basisA.b + basisB.b != -1:
        raise IndexMismatch(
            f"lattice indices ({basisA.a},{basisA.b}) + ({basisB.a},{basisB.b}) != (-1,-1)"
        )
    geom = basisA.geom
    rA, rB = basisA.rank, basisB.rank
    ent = [[sympy.Integer(0) for _ in range(rB)] for _ in range(rA)]
    for pl in basisA.places:
        if pl.kind != "P":
            continue
        var, xform, C, m_p = _chart_data_for_place(geom, pl)
        hAs = [xform(_cancel(Z ** j / basisA.MW)) for j in basisA.basis_js]
        hBs = [xform(_cancel(Z ** j / basisB.MW)) for j in basisB.basis_js]
        for jdx, hB in enumerate(hBs):
            depth_hint = (basisB.n + 1) * m_p + 1 + max(0, basisA.a + 1) + max(0, basisA.b + 1)
            s = _peel_at_place(hB, C, var, m_p, basisA.n, depth_hint)
            if not s:
                continue
            smin = min(s)
            for idx, hA in enumerate(hAs):
                hser = _expand_at_zero(hA, var, -( (basisA.n + 1) * m_p + 3 + max(0, -smin) ), -1 - smin + 1)
                res = sympy.Integer(0)
                for je, ce in s.items():
                    res += hser.coeff(-1 - je) * ce
                ent[idx][jdx] = _cancel(ent[idx][jdx] + res / LAM)
    return ParamMatrix(ent, twist="none",
                       dom_lattice=(basisA.a, basisA.b), cod_lattice=(basisB.a, basisB.b))


def pairing_of_classes(gram: ParamMatrix, basisA: CohomBasis, basisB: CohomBasis,
                       formA: FormClass, formB: FormClass) -> sympy.Expr:
    """<[formA], iota*[formB]>_dR extended bilinearly from the basis Gram.

    The second argument is an iota-pullback class, so its reduction coefficients
    pick up the substitution lam -> -lam.
    """
    ca = reduce_form(basisA, formA)
    cb = [_cancel(x.subs(LAM, -LAM)) for x in reduce_form(basisB, formB)]
    out = sympy.Integer(0)
    for i, ai in enumerate(ca):
        for j, bj in enumerate(cb):
            out += ai * gram.entries[i][j] * bj
    return _cancel(out)


def e_pairing_table(basisA: CohomBasis, basisB: CohomBasis,
                    ks: Sequence[int], ls: Sequence[int]) -> ParamMatrix:
    """Table <e_k, iota* e_l>_dR for monomial classes over the given index ranges."""
    gram = pairing_matrix(basisA, basisB)
    ent = [[pairing_of_classes(gram, basisA, basisB, FormClass.e(k), FormClass.e(l))
            for l in ls] for k in ks]
    return ParamMatrix(ent, twist="none",
                       dom_lattice=(basisA.a, basisA.b), cod_lattice=(basisB.a, basisB.b))


def perfectness_check(gram: ParamMatrix) -> bool:
    """det(Gram) * lam^rank must be a nonzero constant."""
    r = len(gram.entries)
    d = _cancel(gram.det() * LAM ** r)
    return d.is_number and d != 0
