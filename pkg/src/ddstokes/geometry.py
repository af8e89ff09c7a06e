"""Exact geometry of a pair (f,g) of rational functions on the projective line.

Computes the pole divisor P of f, the zero/pole locus E of g away from P,
critical points of f, the spectral sheets nu_p(mu) (branches of the zero locus
of df - mu*dg/g through each point of E and Crit(f)), the goodness condition
separating sheets, and genericity of directions phi.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import sympy
from sympy import I as sI

from .exact import CC, ComplexRational

Z = sympy.Symbol("z")
W = sympy.Symbol("w")


class ConstantF(ValueError):
    """f is constant; the de Rham theory requires a nonconstant f."""


class ZeroG(ValueError):
    """g is identically zero."""


class RamifiedCovering(RuntimeError):
    """Series Newton failed to separate a sheet; (A1)/(nowhere) violated."""


@dataclass
class Config:
    """Numeric policy knobs, overridable per call."""

    precision_bits: int = 128
    trunc: int = 12
    generic_tol: float = 1e-12

    @property
    def dps(self) -> int:
        return max(30, int(self.precision_bits * 0.30103) + 5)


DEFAULT_CONFIG = Config()


# ---------------------------------------------------------------------------
# Rational functions over Q(i)
# ---------------------------------------------------------------------------


def _poly_from_coeffs(coeffs: Sequence[ComplexRational], var) -> sympy.Poly:
    expr = sympy.Integer(0)
    for k, c in enumerate(coeffs):
        expr += c.to_sympy() * var ** k
    return sympy.Poly(expr, var, domain="QQ_I")


class RationalFunction:
    """A reduced fraction of polynomials in z with Gaussian-rational coefficients."""

    def __init__(self, num, den=1, var=Z):
        self.var = var
        expr = sympy.cancel(sympy.sympify(num) / sympy.sympify(den))
        n, d = sympy.fraction(sympy.together(expr))
        dpoly = sympy.Poly(d, var, domain="QQ_I")
        npoly = sympy.Poly(n, var, domain="QQ_I")
        # normalize: denominator monic
        lead = dpoly.LC()
        self.num = sympy.Poly(npoly.as_expr() / lead, var, domain="QQ_I")
        self.den = sympy.Poly(dpoly.as_expr() / lead, var, domain="QQ_I")
        if self.den.is_zero:
            raise ZeroDivisionError("zero denominator")
        self.expr = self.num.as_expr() / self.den.as_expr()

    @classmethod
    def from_coeff_lists(cls, num: Sequence[ComplexRational], den: Sequence[ComplexRational]) -> "RationalFunction":
        return cls(_poly_from_coeffs(num, Z).as_expr(), _poly_from_coeffs(den, Z).as_expr())

    @classmethod
    def from_json(cls, d: dict) -> "RationalFunction":
        num = [CC.from_pair(c) for c in d["num"]]
        den = [CC.from_pair(c) for c in d.get("den", [["1", "0"]])]
        return cls.from_coeff_lists(num, den)

    def to_json(self) -> dict:
        def coeffs(p: sympy.Poly):
            out = []
            for k in range(p.degree() + 1 if p.degree() >= 0 else 1):
                out.append(CC.from_sympy(p.as_expr().coeff(self.var, k)).to_json())
            return out

        return {"num": coeffs(self.num), "den": coeffs(self.den)}

    # -- calculus ---------------------------------------------------------

    def deriv(self) -> "RationalFunction":
        n, d = self.num, self.den
        return RationalFunction(
            (n.diff(self.var) * d - n * d.diff(self.var)).as_expr(),
            (d * d).as_expr(),
            var=self.var,
        )

    def dlog(self) -> "RationalFunction":
        """g'/g as a rational function."""
        n, d = self.num, self.den
        return RationalFunction(
            (n.diff(self.var) * d - n * d.diff(self.var)).as_expr(),
            (n * d).as_expr(),
            var=self.var,
        )

    def is_constant(self) -> bool:
        return self.num.degree() <= 0 and self.den.degree() <= 0

    def is_zero(self) -> bool:
        return self.num.is_zero

    def infinity_chart(self) -> "RationalFunction":
        """The same function written in the coordinate w = 1/z at infinity."""
        return RationalFunction(sympy.cancel(self.expr.subs(self.var, 1 / W)), 1, var=W)

    # -- evaluation -------------------------------------------------------

    def eval_sympy(self, x):
        return sympy.cancel(self.expr.subs(self.var, x))

    def eval_complex(self, x: complex) -> complex:
        cn, cd = getattr(self, "_ccoeffs", (None, None))
        if cn is None:
            cn = [complex(c) for c in self.num.all_coeffs()]
            cd = [complex(c) for c in self.den.all_coeffs()]
            self._ccoeffs = (cn, cd)
        n = 0j
        for c in cn:
            n = n * x + c
        d = 0j
        for c in cd:
            d = d * x + c
        return n / d

    def __repr__(self):
        return f"RationalFunction({self.expr})"


def _poly_eval_complex(p: sympy.Poly, x: complex) -> complex:
    out = 0j
    for c in p.all_coeffs():
        out = out * x + complex(c)
    return out


# ---------------------------------------------------------------------------
# Points of P^1
# ---------------------------------------------------------------------------


class PointP1:
    """A point of the projective line: exact finite coordinate or infinity.

    Finite coordinates are sympy expressions (rationals, Gaussian rationals,
    radicals or ComplexRootOf); approximate points produced by numeric root
    finding carry an error radius and compare within it.
    """

    __slots__ = ("is_inf", "zval", "approx", "radius")

    def __init__(self, zval=None, is_inf=False, approx=None, radius=0.0):
        self.is_inf = is_inf
        self.zval = None if is_inf else (sympy.sympify(zval) if zval is not None else None)
        if is_inf:
            self.approx = None
        elif approx is not None:
            self.approx = complex(approx)
        else:
            self.approx = complex(sympy.N(self.zval, 30))
        self.radius = radius

    @classmethod
    def infinity(cls) -> "PointP1":
        return cls(is_inf=True)

    @classmethod
    def finite(cls, zval) -> "PointP1":
        return cls(zval=zval)

    def is_exact(self) -> bool:
        return self.is_inf or self.zval is not None

    def __eq__(self, other):
        if not isinstance(other, PointP1):
            return NotImplemented
        if self.is_inf or other.is_inf:
            return self.is_inf and other.is_inf
        if self.zval is not None and other.zval is not None:
            if self.zval == other.zval:
                return True
            diff = sympy.simplify(self.zval - other.zval)
            if diff == 0:
                return True
            if diff.is_number:
                return abs(complex(sympy.N(diff, 30))) < 1e-25
            return bool(diff.equals(0))
        tol = max(self.radius, other.radius, 1e-25)
        return abs(self.approx - other.approx) <= 2 * tol

    def __hash__(self):
        # coarse hash; fine for the small point sets that arise here
        return hash(self.is_inf)

    def __repr__(self):
        return "oo" if self.is_inf else f"P1({self.zval if self.zval is not None else self.approx})"

    def to_json(self):
        if self.is_inf:
            return {"inf": True}
        if self.zval is not None:
            return {"z": str(self.zval)}
        return {"z_approx": [self.approx.real, self.approx.imag], "radius": self.radius}


def _roots_of_poly(p: sympy.Poly, config: Config) -> List[Tuple[PointP1, int]]:
    """All roots with multiplicity, exact when solvable, else high-precision."""
    if p.degree() <= 0:
        return []
    rd = sympy.roots(p)
    total = sum(rd.values())
    out = [(PointP1.finite(r), int(m)) for r, m in rd.items()]
    if total == p.degree():
        return out
    # fall back to certified-precision numeric roots for the unsolved part
    rem = p
    for r, m in rd.items():
        rem = rem.quo(sympy.Poly((p.gen - r) ** m, p.gen))
    mpmath.mp.dps = config.dps
    coeffs = [complex(c) for c in rem.all_coeffs()]
    numroots = mpmath.polyroots([mpmath.mpc(c) for c in coeffs], maxsteps=200, extraprec=120)
    eps = 10.0 ** (-config.dps + 8)
    for r in numroots:
        out.append((PointP1(approx=complex(r), radius=eps), 1))
    return out


# ---------------------------------------------------------------------------
# Pair geometry
# ---------------------------------------------------------------------------


@dataclass
class PairGeometry:
    f: RationalFunction
    g: RationalFunction
    P: List[Tuple[PointP1, int]]          # pole divisor of f with orders m_p
    E0: List[Tuple[PointP1, int]]         # zeros of g off P with n_e > 0
    Einf: List[Tuple[PointP1, int]]       # poles of g off P with n_e < 0
    crit: List[PointP1]                   # critical points of f on U
    config: Config = field(default_factory=Config)

    @property
    def E(self) -> List[Tuple[PointP1, int]]:
        return self.E0 + self.Einf

    @property
    def D(self) -> List[PointP1]:
        return [p for p, _ in self.P] + [e for e, _ in self.E]

    def n_e(self, e: PointP1) -> int:
        for pt, n in self.E:
            if pt == e:
                return n
        raise KeyError(f"{e} not in E")

    def pole_order(self, p: PointP1) -> int:
        for pt, m in self.P:
            if pt == p:
                return m
        raise KeyError(f"{p} not a pole of f")

    def has_inf_pole(self) -> bool:
        return any(p.is_inf for p, _ in self.P)

    def to_json(self) -> dict:
        return {
            "f": self.f.to_json(),
            "g": self.g.to_json(),
            "P": [[p.to_json(), m] for p, m in self.P],
            "E0": [[p.to_json(), n] for p, n in self.E0],
            "Einf": [[p.to_json(), n] for p, n in self.Einf],
            "crit": [p.to_json() for p in self.crit],
        }


def _contains(points: List[PointP1], pt: PointP1) -> bool:
    return any(p == pt for p in points)


def analyze_pair(f: RationalFunction, g: RationalFunction, config: Config = DEFAULT_CONFIG) -> PairGeometry:
    if f.is_constant():
        raise ConstantF("f must be nonconstant")
    if g.is_zero():
        raise ZeroG("g must not be identically zero")

    # pole divisor of f
    P: List[Tuple[PointP1, int]] = []
    for pt, m in _roots_of_poly(f.den, config):
        P.append((pt, m))
    deg_gap = f.num.degree() - f.den.degree()
    if deg_gap > 0:
        P.append((PointP1.infinity(), deg_gap))
    P_pts = [p for p, _ in P]

    # zeros and poles of g
    E0: List[Tuple[PointP1, int]] = []
    Einf: List[Tuple[PointP1, int]] = []
    for pt, m in _roots_of_poly(g.num, config):
        if not _contains(P_pts, pt):
            E0.append((pt, m))
    for pt, m in _roots_of_poly(g.den, config):
        if not _contains(P_pts, pt):
            Einf.append((pt, -m))
    g_gap = g.num.degree() - g.den.degree()
    inf_pt = PointP1.infinity()
    if not _contains(P_pts, inf_pt):
        if g_gap < 0:
            E0.append((inf_pt, -g_gap))
        elif g_gap > 0:
            Einf.append((inf_pt, -g_gap))

    # critical points of f on U = P^1 \ (P u E)
    E_pts = [e for e, _ in E0 + Einf]
    crit: List[PointP1] = []
    fp = f.deriv()
    for pt, _m in _roots_of_poly(fp.num, config):
        if not _contains(P_pts, pt):
            crit.append(pt)
    if not _contains(P_pts, inf_pt) and not _contains(E_pts, inf_pt):
        f_inf = f.infinity_chart()
        fpw = f_inf.deriv()
        if sympy.cancel(fpw.eval_sympy(0)) == 0:
            crit.append(inf_pt)
    return PairGeometry(f=f, g=g, P=P, E0=E0, Einf=Einf, crit=crit, config=config)


def check_A1(geom: PairGeometry) -> Tuple[bool, List[PointP1]]:
    """Nondegeneracy (f'' != 0 in a local coordinate) at every critical point."""
    bad: List[PointP1] = []
    fpp = geom.f.deriv().deriv()
    fw = None
    for c in geom.crit:
        if c.is_inf:
            if fw is None:
                fw = geom.f.infinity_chart().deriv().deriv()
            val = fw.eval_sympy(0)
        elif c.zval is not None:
            val = fpp.eval_sympy(c.zval)
        else:
            val = fpp.eval_complex(c.approx)
        if _is_zero_number(val, geom.config):
            bad.append(c)
    return (not bad, bad)


def check_disjoint(geom: PairGeometry) -> bool:
    """Condition that E and Crit(f) do not intersect."""
    E_pts = [e for e, _ in geom.E]
    return not any(_contains(E_pts, c) for c in geom.crit)


def _is_zero_number(val, config: Config) -> bool:
    if isinstance(val, complex):
        return abs(val) < 10.0 ** (-config.dps // 2)
    v = sympy.simplify(val)
    if v == 0:
        return True
    if v.is_number:
        return abs(complex(sympy.N(v, 30))) < 1e-25
    return False


# ---------------------------------------------------------------------------
# Spectral sheets
# ---------------------------------------------------------------------------


@dataclass
class SpectralSheet:
    """Branch nu_p(mu) of {df - mu dg/g = 0} through p, with induced germs.

    nu, f_p, g_p are truncated series in mu (coefficient index = power).
    g_p = mu^{n_p} * h with h(0) != 0; ``chart`` records whether nu is written
    in z or in w = 1/z.  Exact sheets carry sympy coefficients; numeric ones
    carry complex coefficients at working precision.
    """

    p: PointP1
    nu: List[object]
    f_p: List[object]
    g_p_val: int                       # n_p = mu-adic valuation of g_p
    g_p_unit: List[object]             # h with g_p = mu^{n_p} h, h(0) != 0
    trunc: int
    chart: str = "z"                   # "z" or "w"
    kind: str = "crit"                 # "crit", "E0" or "Einf"
    exact: bool = True
    # ascending complex coefficients of (A0, A1) with A0 + mu A1 = 0 the
    # (deflated) sheet equation in this chart; used to refine nu beyond the
    # convergence disk of the truncated series
    eqn: Optional[Tuple[List[complex], List[complex]]] = None
    _nu_cache: Dict[complex, complex] = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_p(self) -> int:
        return self.g_p_val

    def f_p0(self):
        return self.f_p[0]

    def f_p0_complex(self) -> complex:
        return complex(self.f_p[0]) if not isinstance(self.f_p[0], complex) else self.f_p[0]

    def _nu_series_at(self, mu: complex) -> complex:
        out = 0j
        for c in reversed(self.nu):
            out = out * mu + (complex(c) if not isinstance(c, complex) else c)
        return out

    def _nu_newton(self, z: complex, mu: complex) -> Optional[complex]:
        """Newton-polish a root of A0(z) + mu A1(z); None if it stalls."""
        A0, A1 = self.eqn
        dA0 = [k * c for k, c in enumerate(A0)][1:]
        dA1 = [k * c for k, c in enumerate(A1)][1:]

        def horner(cs, x):
            out = 0j
            for c in reversed(cs):
                out = out * x + c
            return out

        for _ in range(60):
            dP = horner(dA0, z) + mu * horner(dA1, z)
            if dP == 0:
                return None
            step = (horner(A0, z) + mu * horner(A1, z)) / dP
            z = z - step
            if abs(step) <= 1e-13 * max(1.0, abs(z)):
                return z
        return None

    def nu_eval(self, mu: complex) -> complex:
        """nu_p(mu) in this sheet's chart.

        The truncated series is only used as a seed; when the sheet equation
        is available the value is continued in mu by a predictor-corrector
        homotopy from a small parameter value (where the series converges)
        and Newton-polished, so the result is reliable for any mu reachable
        without sheet collision.
        """
        mu = complex(mu)
        if self.eqn is None:
            return self._nu_series_at(mu)
        cached = self._nu_cache.get(mu)
        if cached is not None:
            return cached
        # start inside the series' trust region
        t0 = min(1.0, 0.05 / max(abs(mu), 1e-30))
        z = self._nu_newton(self._nu_series_at(t0 * mu), t0 * mu)
        if z is None:
            z = self._nu_series_at(t0 * mu)
        t, dt = t0, min(0.25, 1.0 - t0)
        while t < 1.0:
            t_next = min(1.0, t + dt)
            z_try = self._nu_newton(z, t_next * mu)
            if z_try is None or abs(z_try - z) > 0.2 * max(1.0, abs(z)):
                dt *= 0.5
                if dt < 1e-7:
                    raise RamifiedCovering(
                        f"sheet at {self.p}: nu continuation stalled at mu={t * mu}"
                    )
                continue
            z, t = z_try, t_next
            dt = min(2.0 * dt, 1.0)
        self._nu_cache[mu] = z
        return z

    def g_p_series(self) -> List[object]:
        """g_p as a plain series in mu (valuation shifted back in)."""
        n = self.g_p_val
        if n >= 0:
            return [0] * n + list(self.g_p_unit)
        raise ValueError("g_p has a pole in mu; use (g_p_val, g_p_unit)")


def _ser_trim(s: List, order: int) -> List:
    return list(s[:order])


def _ser_mul(a: List, b: List, order: int) -> List:
    out = [0] * order
    for i, ai in enumerate(a[:order]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: order - i]):
            if bj == 0:
                continue
            out[i + j] = out[i + j] + ai * bj
    return out


def _ser_poly_at(coeffs: List, s: List, order: int) -> List:
    """Evaluate a polynomial (ascending coeffs) at a truncated series."""
    out = [0] * order
    for c in reversed(coeffs):
        out = _ser_mul(out, s, order)
        out[0] = out[0] + c
    return out


def _ser_simplify_sympy(s: List) -> List:
    return [sympy.cancel(sympy.expand(x)) for x in s]


def _poly_ascending(p: sympy.Poly) -> List:
    cs = list(reversed(p.all_coeffs()))
    return [sympy.nsimplify(c, rational=True) if sympy.sympify(c).is_Rational else sympy.sympify(c) for c in cs]


def _sheet_equation(f: RationalFunction, g: RationalFunction):
    """A(z,mu) = A0(z) + mu*A1(z) with zero locus containing the sheets.

    A0 = (fn' fd - fn fd') gn gd,  A1 = -fd^2 (gn' gd - gn gd').
    """
    var = f.var
    fn, fd = f.num, f.den
    gn, gd = g.num, g.den
    A0 = (fn.diff(var) * fd - fn * fd.diff(var)) * gn * gd
    A1 = -(fd * fd) * (gn.diff(var) * gd - gn * gd.diff(var))
    return A0, A1


def _newton_sheet(A0c: List, A1c: List, p0, order: int, exact: bool, config: Config):
    """Series-Newton solve of A0(z) + mu A1(z) = 0 with z(0) = p0."""
    dA0c = [k * A0c[k] for k in range(1, len(A0c))]
    dA1c = [k * A1c[k] for k in range(1, len(A1c))]
    nu = [p0] + [0] * (order - 1)
    known = 1
    while known < order:
        known = min(2 * known, order)
        a0 = _ser_poly_at(A0c, nu, known)
        a1 = _ser_poly_at(A1c, nu, known)
        val = [x for x in a0]
        for j in range(1, known):
            val[j] = val[j] + a1[j - 1]
        d0 = _ser_poly_at(dA0c, nu, known)
        d1 = _ser_poly_at(dA1c, nu, known)
        der = [x for x in d0]
        for j in range(1, known):
            der[j] = der[j] + d1[j - 1]
        inv = _ser_inv(der, known, exact)
        if inv is None:
            raise RamifiedCovering(f"derivative vanishes at base point {p0}")
        corr = _ser_mul(val, inv, known)
        nu = [nu[i] - corr[i] if i < known else nu[i] for i in range(order)]
        if exact:
            nu = _ser_simplify_sympy(nu)
    return nu


def _ser_inv(a: List, order: int, exact: bool):
    a0 = a[0]
    if exact:
        if sympy.simplify(a0) == 0:
            return None
        inv0 = sympy.cancel(1 / a0)
    else:
        if abs(a0) == 0:
            return None
        inv0 = 1.0 / a0
    out = [inv0] + [0] * (order - 1)
    for k in range(1, order):
        s = 0
        for j in range(1, k + 1):
            if j < len(a) and a[j] != 0:
                s = s + a[j] * out[k - j]
        out[k] = -inv0 * s
        if exact:
            out[k] = sympy.cancel(sympy.expand(out[k]))
    return out


def _ser_rational_at(rf: RationalFunction, s: List, order: int, exact: bool) -> List:
    n = _ser_poly_at(_coeffs_of(rf.num, exact), s, order)
    d = _ser_poly_at(_coeffs_of(rf.den, exact), s, order)
    val = d[0]
    shift = 0
    # allow a zero of the denominator along the sheet (g with pole at e)
    while (sympy.simplify(val) == 0 if exact else abs(val) < 1e-30) and shift < order:
        d = d[1:] + [0]
        shift += 1
        val = d[0]
    inv = _ser_inv(d, order, exact)
    if inv is None:
        raise RamifiedCovering("series division failed")
    out = _ser_mul(n, inv, order)
    if exact:
        out = _ser_simplify_sympy(out)
    if shift:
        # result = mu^{-shift} * out; only callers tracking valuation use this
        return out, -shift
    return out, 0


def _coeffs_of(p: sympy.Poly, exact: bool) -> List:
    cs = list(reversed(p.all_coeffs()))
    if exact:
        return [sympy.sympify(c) for c in cs]
    return [complex(c) for c in cs]


def _series_valuation(s: List, exact: bool) -> int:
    for k, c in enumerate(s):
        if exact:
            if sympy.simplify(c) != 0:
                return k
        else:
            if abs(c) > 1e-20:
                return k
    return len(s)


def spectral_sheets(geom: PairGeometry, order: Optional[int] = None) -> List[SpectralSheet]:
    """One sheet per point of E u Crit(f), by series-Newton iteration."""
    order = order or geom.config.trunc
    sheets: List[SpectralSheet] = []
    points: List[Tuple[PointP1, str, int]] = []
    for e, n in geom.E0:
        points.append((e, "E0", n))
    for e, n in geom.Einf:
        points.append((e, "Einf", n))
    for c in geom.crit:
        points.append((c, "crit", 0))

    charts = {}

    def chart_data(chart: str):
        if chart not in charts:
            if chart == "z":
                fc, gc = geom.f, geom.g
            else:
                fc, gc = geom.f.infinity_chart(), geom.g.infinity_chart()
            charts[chart] = (fc, gc, _sheet_equation(fc, gc))
        return charts[chart]

    for pt, kind, n_e in points:
        chart = "w" if pt.is_inf else "z"
        fc, gc, (A0, A1) = chart_data(chart)
        var = fc.var
        exact = pt.is_inf or pt.zval is not None
        if exact:
            p0 = sympy.Integer(0) if pt.is_inf else pt.zval
        else:
            p0 = pt.approx
        if exact and not pt.is_inf and not _is_gaussian_rational(p0):
            # radical/RootOf base points: fall back to working-precision numerics
            exact = False
            p0 = pt.approx
        # remove the spurious factor (z-p)^{|n_e|-1} shared by A0 and A1
        spur = abs(n_e) - 1 if kind in ("E0", "Einf") else 0
        A0p, A1p = A0, A1
        if spur > 0:
            if exact:
                A0p = sympy.Poly(sympy.cancel(A0.as_expr() / (var - p0) ** spur), var)
                A1p = sympy.Poly(sympy.cancel(A1.as_expr() / (var - p0) ** spur), var)
            else:
                A0p, A1p = _numeric_deflate(A0, p0, spur), _numeric_deflate(A1, p0, spur)
        A0c = _coeffs_of(A0p, exact)
        A1c = _coeffs_of(A1p, exact)
        if not exact:
            p0 = complex(p0)
        nu = _newton_sheet(A0c, A1c, p0, order, exact, geom.config)
        f_p, fshift = _ser_rational_at(fc, nu, order, exact)
        if fshift != 0:
            raise RamifiedCovering(f"f has a pole along the sheet at {pt}")
        g_p, gshift = _ser_rational_at(gc, nu, order, exact)
        val = _series_valuation(g_p, exact) + gshift
        unit = g_p[_series_valuation(g_p, exact):]
        if kind in ("E0", "Einf") and val != n_e:
            raise RamifiedCovering(
                f"sheet at {pt}: mu-valuation of g_p is {val}, expected n_e={n_e}"
            )
        eqn = (
            [complex(sympy.N(c, 20)) for c in A0c],
            [complex(sympy.N(c, 20)) for c in A1c],
        ) if exact else (list(A0c), list(A1c))
        sheets.append(
            SpectralSheet(
                p=pt, nu=nu, f_p=f_p, g_p_val=val, g_p_unit=list(unit),
                trunc=order, chart=chart, kind=kind, exact=exact, eqn=eqn,
            )
        )
    return sheets


def _is_gaussian_rational(expr) -> bool:
    expr = sympy.sympify(expr)
    if expr.is_Rational:
        return True
    re, im = expr.as_real_imag()
    return bool(re.is_rational and im.is_rational)


def _numeric_deflate(p: sympy.Poly, root: complex, times: int) -> sympy.Poly:
    """Synthetic division of p by (z - root)^times in complex floats."""
    cs = [complex(c) for c in p.all_coeffs()]
    root = complex(root)
    for _ in range(times):
        quo = []
        acc = 0j
        for c in cs:
            acc = acc * root + c
            quo.append(acc)
        cs = quo[:-1]  # quo[-1] is the (numerically tiny) remainder
    poly_expr = 0
    n = len(cs)
    for k, c in enumerate(cs):
        poly_expr += (sympy.Float(c.real, 30) + sympy.Float(c.imag, 30) * sI) * p.gen ** (n - 1 - k)
    return sympy.Poly(poly_expr, p.gen)


def check_good_pair(sheets: List[SpectralSheet]) -> Tuple[bool, List[Tuple[PointP1, PointP1]]]:
    """Distinct sheet germs must differ in f_p(0) or in n_p."""
    bad = []
    for i in range(len(sheets)):
        for j in range(i + 1, len(sheets)):
            a, b = sheets[i], sheets[j]
            if _same_germ(a, b):
                continue
            if a.n_p != b.n_p:
                continue
            if not _num_eq(a.f_p[0], b.f_p[0]):
                continue
            bad.append((a.p, b.p))
    return (not bad, bad)


def _num_eq(x, y, tol: float = 1e-20) -> bool:
    if isinstance(x, complex) or isinstance(y, complex):
        return abs(complex(x) - complex(y)) < max(tol, 1e-12)
    d = sympy.simplify(x - y)
    if d == 0:
        return True
    if d.is_number:
        return abs(complex(sympy.N(d, 30))) < 1e-25
    return False


def _same_germ(a: SpectralSheet, b: SpectralSheet) -> bool:
    if a.n_p != b.n_p:
        return False
    m = min(a.trunc, b.trunc)
    return all(_num_eq(x, y) for x, y in zip(a.f_p[:m], b.f_p[:m])) and all(
        _num_eq(x, y) for x, y in zip(a.g_p_unit[:m], b.g_p_unit[:m])
    )


def is_generic_phi(sheets: List[SpectralSheet], phi: float, tol: Optional[float] = None) -> bool:
    """No two distinct critical values aligned along the direction phi."""
    tol = tol if tol is not None else DEFAULT_CONFIG.generic_tol
    import cmath

    rot = cmath.exp(-1j * phi)
    vals = [s.f_p0_complex() for s in sheets]
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            d = vals[i] - vals[j]
            if abs(d) < tol:
                continue
            if abs((rot * d).imag) < tol * max(1.0, abs(d)):
                return False
    return True


def pair_from_json(doc) -> Tuple[RationalFunction, RationalFunction]:
    if isinstance(doc, str):
        doc = json.loads(doc)
    return RationalFunction.from_json(doc["f"]), RationalFunction.from_json(doc["g"])
