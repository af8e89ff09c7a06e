"""Period integrals, intersection pairings, and growth classification.

The period of a cycle against a form class [h dz/lambda] is

    integral  e^{-f(z)/lambda} g(z)^{mu/lambda} h(z) lambda^{-1} dz

along the cycle's path, with the branch of g^{mu/lambda} = e^{(mu/lambda) log g}
carried by the path's log g tracking.  Along level segments the weight is
known in closed form from the path parametrization F = F0 + e^{i phi} s^2,
so quadrature reduces to smooth Gaussian-type integrals in s handled by
composite Gauss-Legendre panels; the overall scale e^{-F0/lambda} is kept
as a separate log offset so that tiny lambda stays representable.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from .geometry import PairGeometry, SpectralSheet, Z
from .laurent import LaurentPoly
from .exact import CC
from .qstokes import Direction, ExpFactor, FactorSection
from .paths import (PathFamily, PhaseData, Segment, SectorViolation,
                    build_paths, e_plus_family, local_saddle_frame,
                    saddle_family)


class DivergentTail(RuntimeError):
    """A path end does not decay fast enough for the requested weight."""


class BranchJump(RuntimeError):
    """log g continuation along the path is inconsistent."""


class NonTransversal(RuntimeError):
    """Polyline intersection could not be resolved transversally."""


class DegenerateSaddle(RuntimeError):
    """Second derivative of the phase vanishes at the saddle."""


class NotGoodPair(ValueError):
    """The spectral germs do not separate into good exponential factors."""


TWO_PI_I = 2j * math.pi


# ---------------------------------------------------------------------------
# Cycles
# ---------------------------------------------------------------------------


@dataclass
class BettiCycle:
    """A path family weighted by a Laurent-polynomial coefficient in q."""

    path: PathFamily
    coefficient: LaurentPoly = field(default_factory=LaurentPoly.one)
    label: str = ""

    def q_scaled(self, k: int) -> "BettiCycle":
        return BettiCycle(self.path, self.coefficient * LaurentPoly.q_power(k),
                          label=self.label)


def form_fun(h) -> Callable[[complex], complex]:
    """Numeric evaluator of a form's rational coefficient h(z)."""
    if callable(h):
        return h
    expr = getattr(h, "h", h)          # accept FormClass-like objects
    return sympy.lambdify(Z, sympy.sympify(expr), modules=["cmath"])


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


_GL_CACHE: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _interp_z(seg: Segment, s: float) -> complex:
    sv = seg.s_vals
    lo, hi = (0, len(sv) - 1) if sv[0] <= sv[-1] else (len(sv) - 1, 0)
    asc = sv[0] <= sv[-1]
    arr = sv if asc else list(reversed(sv))
    zs = seg.z_vals if asc else list(reversed(seg.z_vals))
    i = np.searchsorted(arr, s)
    i = min(max(i, 1), len(arr) - 1)
    s0, s1 = arr[i - 1], arr[i]
    if s1 == s0:
        return zs[i]
    t = (s - s0) / (s1 - s0)
    return zs[i - 1] * (1 - t) + zs[i] * t


def _level_segment_integral(ph: PhaseData, seg: Segment, h_fun, lam: complex,
                            F_ref: complex, tol: float) -> complex:
    """Scaled integral over one level segment in its path orientation.

    Returns the segment's contribution to  e^{F_ref/lam} * integral, i.e. the
    mantissa relative to the reference exponent.
    """
    rot = cmath.exp(1j * seg.phi)
    reversed_order = seg.s_vals[0] > seg.s_vals[-1]
    s_lo = min(seg.s_vals[0], seg.s_vals[-1])
    s_hi = max(seg.s_vals[0], seg.s_vals[-1])
    if s_hi <= s_lo:
        return 0j
    # decay rate of |e^{-e^{i phi}s^2/lam}|
    rate = (rot / lam).real
    if rate <= 0:
        raise DivergentTail("Re(e^{i phi}/lambda) <= 0 along a level segment")
    base = cmath.exp((F_ref - seg.F0) / lam)   # branch-copy factor, e.g. q^{n_e}
    # panel breakpoints: uniform in the Gaussian exponent rate*s^2
    width = math.sqrt(1.0 / rate)
    cut = math.sqrt(80.0 / rate)               # beyond this the weight is < e^-80
    s_hi_eff = min(s_hi, max(cut, s_lo + width))
    panels = [s_lo]
    while panels[-1] < s_hi_eff:
        panels.append(min(panels[-1] + 0.75 * width, s_hi_eff))
    total = 0j
    nu_guess = None
    for a, b in zip(panels, panels[1:]):
        prev = None
        for order in (16, 24, 32):
            x, w = _gl_nodes(order)
            acc = 0j
            for xi, wi in zip(x, w):
                s = 0.5 * (a + b) + 0.5 * (b - a) * xi
                z0 = _interp_z(seg, s)
                sol = _newton_level(ph, z0, seg.F0 + rot * s * s)
                if sol is None:
                    raise BranchJump(f"quadrature node did not converge at s={s}")
                z = sol
                d = ph.dF(z)
                if s > 1e-9:
                    dzds = 2.0 * rot * s / d
                else:
                    dzds = _saddle_dzds(ph, z, seg.phi)
                val = cmath.exp(-rot * s * s / lam) * h_fun(z) * dzds / lam
                acc += wi * val
            acc *= 0.5 * (b - a)
            if prev is not None and abs(acc - prev) <= tol * max(1e-30, abs(acc)):
                break
            prev = acc
        total += acc
    if reversed_order:
        total = -total
    return base * total


def _newton_level(ph: PhaseData, z: complex, target: complex,
                  max_iter: int = 30, tol: float = 1e-13) -> Optional[complex]:
    """Solve f(z) - mu log g = target for the branch through the start point.

    Works with the multi-valued F directly: the imaginary ambiguity is fixed
    by starting close to the solution, so plain Newton on the principal
    branch relative to the start point converges to the right sheet.
    """
    logg = cmath.log(ph.g(z))
    # align the branch with the target rather than the principal value:
    # adjust by the multiple of 2 pi i mu that brings F closest to target
    val = ph.F(z, logg) - target
    if ph.mu != 0:
        k = round((val / (TWO_PI_I * ph.mu)).real)
        logg += TWO_PI_I * k
    for _ in range(max_iter):
        val = ph.F(z, logg) - target
        if abs(val) < tol * max(1.0, abs(target)):
            return z
        d = ph.dF(z)
        if d == 0:
            return None
        z_new = z - val / d
        logg = ph.logg_step(z, logg, z_new)
        z = z_new
    if abs(ph.F(z, logg) - target) < 1e-8 * max(1.0, abs(target)):
        return z
    return None


def _saddle_dzds(ph: PhaseData, z: complex, phi: float) -> complex:
    h = 1e-5 * max(1.0, abs(z))
    Fpp = (ph.dF(z + h) - ph.dF(z - h)) / (2.0 * h)
    w = cmath.sqrt(2.0 / Fpp) * cmath.exp(0.5j * phi)
    if w.real < 0 or (w.real == 0 and w.imag < 0):
        w = -w
    return w


def _circle_segment_integral(ph: PhaseData, seg: Segment, h_fun, lam: complex,
                             F_ref: complex, tol: float) -> complex:
    """Scaled integral over a circle segment: composite Simpson in the angle.

    The stored samples are uniform in theta, so Simpson on the integrand
    w(theta) h(z) dz/dtheta gives fourth-order accuracy; with the default
    sampling density that is far below the quadrature tolerance.
    """
    zs, lgs, ts = seg.z_vals, seg.logg_vals, seg.s_vals
    vals = []
    for z, lg in zip(zs, lgs):
        expo = (F_ref - ph.F(z, lg)) / lam
        if expo.real > 50.0:
            raise DivergentTail("circle weight exceeds the reference scale")
        dzdt = 1j * (z - seg.center)
        vals.append(cmath.exp(expo) * h_fun(z) * dzdt / lam)
    n = len(vals) - 1
    if n <= 0:
        return 0j
    h = (ts[-1] - ts[0]) / n
    if n % 2 == 1:               # odd interval count: trapezoid on the last one
        tail = 0.5 * (vals[-2] + vals[-1]) * h
        vals = vals[:-1]
        n -= 1
    else:
        tail = 0j
    acc = vals[0] + vals[-1]
    for i in range(1, n):
        acc += (4.0 if i % 2 == 1 else 2.0) * vals[i]
    return acc * h / 3.0 + tail


def period_integral_scaled(cycle: BettiCycle, form, lam: complex, mu: complex,
                           geom: Optional[PairGeometry] = None,
                           tol: float = 1e-10) -> Tuple[complex, complex]:
    """(mantissa, log_offset): the period equals mantissa * e^{log_offset}.

    The reference exponent is -F0/lambda at the path anchor.  The cycle's
    Laurent coefficient acts through q = e^{2 pi i mu / lambda}.
    """
    fam = cycle.path
    if abs(complex(mu) - complex(fam.mu)) > 1e-12 * max(1.0, abs(mu)):
        raise ValueError("cycle paths were traced at a different mu")
    ph = PhaseData(geom or _geom_of(fam), mu)
    h_fun = form_fun(form)
    F_ref = fam.F0
    total = 0j
    for seg in fam.segments:
        if seg.kind == "level":
            total += _level_segment_integral(ph, seg, h_fun, lam, F_ref, tol)
        else:
            total += _circle_segment_integral(ph, seg, h_fun, lam, F_ref, tol)
    if not cycle.coefficient.is_one():
        q = cmath.exp(TWO_PI_I * mu / lam)
        total *= cycle.coefficient.eval_complex(q)
    return total, -F_ref / lam


def _geom_of(fam: PathFamily) -> PairGeometry:
    raise ValueError("pass geom explicitly to period_integral")


def period_integral(cycle: BettiCycle, form, lam: complex, mu: complex,
                    geom: PairGeometry, tol: float = 1e-10) -> complex:
    m, off = period_integral_scaled(cycle, form, lam, mu, geom=geom, tol=tol)
    return m * cmath.exp(off)


# ---------------------------------------------------------------------------
# Saddle leading term and local asymptotics
# ---------------------------------------------------------------------------


def saddle_leading_term_scaled(geom: PairGeometry, sheet: SpectralSheet,
                               form, lam: complex, mu: complex,
                               phi: float = 0.0) -> Tuple[complex, complex]:
    """Leading saddle-point value h(nu) sqrt(2 pi lam / F'') e^{-F0/lam}/lam.

    Returned as (mantissa, log_offset) with the e^{-F0/lam} factor in the
    offset; the square root branch is aligned with the path direction
    e^{i phi / 2}.
    """
    ph = PhaseData(geom, mu)
    frame = local_saddle_frame(ph, sheet, phi)
    Fpp = frame["Fpp"]
    if abs(Fpp) < 1e-12:
        raise DegenerateSaddle("phase second derivative vanishes")
    h_fun = form_fun(form)
    dzds0 = cmath.sqrt(2.0 / Fpp) * cmath.exp(0.5j * phi)
    if dzds0.real < 0 or (dzds0.real == 0 and dzds0.imag < 0):
        dzds0 = -dzds0
    gauss = cmath.sqrt(math.pi * lam * cmath.exp(-1j * phi))
    if (gauss / cmath.sqrt(lam * cmath.exp(-1j * phi))).real < 0:
        gauss = -gauss
    mant = h_fun(frame["nu"]) * dzds0 * gauss / lam
    return mant, -frame["F0"] / lam


# ---------------------------------------------------------------------------
# Intersection pairing
# ---------------------------------------------------------------------------


def _decimate(zs: List[complex], lgs: List[complex], target: int) -> Tuple[List[complex], List[complex]]:
    n = len(zs)
    if n <= target:
        return zs, lgs
    step = max(1, n // target)
    idx = list(range(0, n, step))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return [zs[i] for i in idx], [lgs[i] for i in idx]


def _seg_intersect(a1: complex, a2: complex, b1: complex, b2: complex):
    """Intersection parameters (t, u) in [0,1]^2 of two segments, or None."""
    d1 = a2 - a1
    d2 = b2 - b1
    den = d1.real * d2.imag - d1.imag * d2.real
    if den == 0:
        return None
    w = b1 - a1
    t = (w.real * d2.imag - w.imag * d2.real) / den
    u = (w.real * d1.imag - w.imag * d1.real) / den
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return t, u, den
    return None


def intersection_pairing(cycA: BettiCycle, cycB: BettiCycle, mu: complex,
                         lam_over: Optional[complex] = None,
                         points: int = 600, branch_tol: float = 1e-6,
                         geom: Optional[PairGeometry] = None) -> LaurentPoly:
    """Signed q-weighted count of crossings between the two cycle paths.

    Each transversal crossing contributes sign(det) * q^k where
    2 pi i k = (log g)_A - (log g)_B at the crossing point; the branch
    integers must resolve within branch_tol or the configuration is
    rejected as non-transversal.  When geom is given, the log g values at a
    crossing are continued exactly from the nearest stored sample instead
    of linearly interpolated.
    """
    za, la = cycA.path.polyline()
    zb, lb = cycB.path.polyline()
    za, la = _decimate(za, la, points)
    zb, lb = _decimate(zb, lb, points)
    boxes_b = []
    for j in range(len(zb) - 1):
        x0, x1 = sorted((zb[j].real, zb[j + 1].real))
        y0, y1 = sorted((zb[j].imag, zb[j + 1].imag))
        boxes_b.append((x0, x1, y0, y1))
    total = LaurentPoly.zero()
    for i in range(len(za) - 1):
        ax0, ax1 = sorted((za[i].real, za[i + 1].real))
        ay0, ay1 = sorted((za[i].imag, za[i + 1].imag))
        for j in range(len(zb) - 1):
            bx0, bx1, by0, by1 = boxes_b[j]
            if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
                continue
            hit = _seg_intersect(za[i], za[i + 1], zb[j], zb[j + 1])
            if hit is None:
                continue
            t, u, den = hit
            if geom is not None:
                zx = za[i] * (1 - t) + za[i + 1] * t
                gx = geom.g.eval_complex(zx)
                lga = la[i] + cmath.log(gx / geom.g.eval_complex(za[i]))
                lgb = lb[j] + cmath.log(gx / geom.g.eval_complex(zb[j]))
            else:
                lga = la[i] * (1 - t) + la[i + 1] * t
                lgb = lb[j] * (1 - u) + lb[j + 1] * u
            kc = (lga - lgb) / TWO_PI_I
            k = round(kc.real)
            if abs(kc - k) > branch_tol * max(1.0, abs(kc)) + 1e-4:
                raise NonTransversal(f"branch integer did not resolve: {kc}")
            sign = 1 if den > 0 else -1
            total = total + LaurentPoly.q_power(k) * LaurentPoly.const(Fraction(sign))
    return total * cycA.coefficient * cycB.coefficient.subs_qinv()


def _nudged_family(fam: PathFamily, delta: complex,
                   geom: Optional[PairGeometry] = None) -> PathFamily:
    def shift_logg(z: complex, lg: complex) -> complex:
        if geom is None:
            return lg
        # keep the stored branch consistent with the translated point
        return lg + cmath.log(geom.g.eval_complex(z + delta) / geom.g.eval_complex(z))

    segs = [Segment(s.kind, list(s.s_vals), [z + delta for z in s.z_vals],
                    [shift_logg(z, lg) for z, lg in zip(s.z_vals, s.logg_vals)],
                    phi=s.phi, F0=s.F0,
                    center=s.center + delta, radius=s.radius)
            for s in fam.segments]
    return PathFamily(fam.kind, fam.sheet_index, fam.phi, fam.mu, fam.F0,
                      fam.anchor + delta, fam.anchor_logg, segs)


def intersection_matrix(geom: PairGeometry, sheets: Sequence[SpectralSheet],
                        phi: float, mu: complex, height: float = 40.0,
                        points: int = 600,
                        nudge: float = 1e-7) -> List[List[LaurentPoly]]:
    """Matrix of pairings between phi-sections and their antipodal duals.

    Row i is the section of sheet i at phi (thimble or plus path); column j
    is sheet j's representative at phi+pi (descending thimble or loop).  The
    dual polylines are shifted by an infinitesimal generic translation so
    the crossing at a shared saddle vertex is detected transversally.
    """
    from .paths import build_dual_paths, e_loop_family, reversed_family
    ph = PhaseData(geom, mu)
    primal: List[PathFamily] = []
    for idx, sheet in enumerate(sheets):
        if sheet.kind == "crit":
            primal.append(saddle_family(ph, sheets, idx, phi, height=height))
        elif (cmath.exp(-1j * phi) * sheet.n_p * mu).real > 0:
            primal.append(e_plus_family(ph, sheets, idx, phi, height=height))
        else:
            # non-decay side: the section continues as the clockwise loop
            primal.append(reversed_family(
                e_loop_family(ph, sheets, idx, phi, height=height)))
    dual = build_dual_paths(geom, sheets, phi, mu, height=height)
    scale = max(1.0, max(abs(f.anchor) for f in primal))
    delta = nudge * scale * cmath.exp(0.123j)
    mat = []
    for fa in primal:
        row = []
        for fb in dual:
            fb2 = _nudged_family(fb, delta, geom=geom)
            for pts in (points, 4 * points, 16 * points):
                try:
                    val = intersection_pairing(BettiCycle(fa), BettiCycle(fb2),
                                               mu, points=pts, geom=geom)
                    break
                except NonTransversal:
                    if pts == 16 * points:
                        raise
            row.append(val)
        mat.append(row)
    return mat


# ---------------------------------------------------------------------------
# Exponential factors from spectral sheets
# ---------------------------------------------------------------------------


def exponential_factor(sheets: Sequence[SpectralSheet]) -> List[ExpFactor]:
    """The good exponential factor of each sheet, with exact coefficients.

    h(v) is determined by n log v + h(v)/v = log g_p(v) - f_p(v)/v, i.e.
    h(v) = v log(g_p(v)/v^{n_p}) - f_p(v) as a truncated series; coefficients
    are kept up to the first one that is not Gaussian-rational (only h(0) and
    n enter the dominance order, and h(0) = -f_p(0) is always exact).
    """
    out = []
    for idx, s in enumerate(sheets):
        if not s.exact:
            raise NotGoodPair("sheet germ is not exact; factors unavailable")
        n = s.n_p
        order = min(s.trunc, 6)
        unit = [sympy.nsimplify(sympy.sympify(c)) for c in s.g_p_unit[:order]]
        f_p = [sympy.sympify(c) for c in s.f_p[:order]]
        u0 = unit[0] if unit else sympy.Integer(1)
        # log(unit) = log u0 + log(1 + sum_{k>=1} (unit_k/u0) v^k)
        tail = [sympy.cancel(c / u0) for c in unit[1:]]
        log_series = _log1p_series(tail, order)           # no constant term
        log_u0 = sympy.log(u0)
        # h = v*(log u0 + log_series) - f_p
        h_coeffs: List[sympy.Expr] = []
        h_coeffs.append(sympy.simplify(-f_p[0]) if f_p else sympy.Integer(0))
        for k in range(1, order):
            c = log_series[k - 1] if k - 1 < len(log_series) else sympy.Integer(0)
            if k == 1:
                c = c + log_u0
            fc = f_p[k] if k < len(f_p) else sympy.Integer(0)
            h_coeffs.append(sympy.simplify(c - fc))
        cc: List[CC] = []
        for c in h_coeffs:
            try:
                cc.append(CC.from_sympy(sympy.nsimplify(c)))
            except (ValueError, TypeError):
                break
        out.append(ExpFactor(n=n, h=tuple(cc), label=f"Phi[{s.p}]"))
    return out


def _log1p_series(tail: List[sympy.Expr], order: int) -> List[sympy.Expr]:
    """Coefficients of log(1 + sum tail_k v^{k+1}) starting at v^1."""
    x = [sympy.Integer(0)] + list(tail)       # series of the argument minus 1
    out = [sympy.Integer(0)] * order
    power = list(x)
    sign = 1
    for m in range(1, order):
        for k in range(1, order):
            if k < len(power):
                out[k - 1] = out[k - 1] + sympy.Rational(sign, m) * power[k]
        power = _ser_mul_sym(power, x, order)
        sign = -sign
    return [sympy.simplify(c) for c in out]


def _ser_mul_sym(a: List[sympy.Expr], b: List[sympy.Expr], order: int) -> List[sympy.Expr]:
    out = [sympy.Integer(0)] * order
    for i, ai in enumerate(a[:order]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: order - i]):
            if bj == 0:
                continue
            out[i + j] = out[i + j] + ai * bj
    return out


# ---------------------------------------------------------------------------
# Growth classification (numeric order oracle)
# ---------------------------------------------------------------------------


def section_exponent(sec: FactorSection, u: complex, v: complex) -> complex:
    """phi(u, v) = u^{-1}(n log v + h(v)/v + 2 pi i m), principal log."""
    f = sec.factor
    n = f.n
    hv = 0j
    for k, c in enumerate(f.h):
        hv += complex(c.to_complex()) * v ** k
    main = n * cmath.log(v) + (hv / v if f.h else 0.0) + TWO_PI_I * sec.m
    return main / u


@dataclass
class AsymptoticFit:
    samples: List[Tuple[float, float]]
    slope: float
    classification: str                # "moderate" | "rapid_decay" | "growing"


def numeric_order_oracle(sec_a: FactorSection, sec_b: FactorSection,
                         d: Direction, kappas: Sequence[float] = (1.0, 2.0, 4.0),
                         rho_hi: float = 1e-2, rho_lo: float = 1e-10,
                         npts: int = 9) -> str:
    """Sampled verdict on e^{phi_a - phi_b}: which section dominates at d.

    Evaluates X(rho) = Re(phi_a - phi_b) on bi-radius grids u = rho e^{i th_u},
    v = rho^kappa e^{i th_v} and reports "strictly_less" when X diverges to
    -infinity (relative to log rho) for every kappa, "strictly_greater" for
    +infinity, and "inconclusive" otherwise.
    """
    eu = cmath.exp(1j * d.theta_u.value())
    ev = cmath.exp(1j * d.theta_v.value())
    # evaluate the difference exponent with exact coefficient subtraction;
    # subtracting two float exponents would cancel catastrophically whenever
    # the leading 1/(uv) terms agree
    ha, hb = sec_a.factor.h, sec_b.factor.h
    hd = tuple(
        (ha[k] if k < len(ha) else CC(0, 0)) - (hb[k] if k < len(hb) else CC(0, 0))
        for k in range(max(len(ha), len(hb)))
    )
    delta = FactorSection(ExpFactor(n=sec_a.factor.n - sec_b.factor.n, h=hd),
                          m=sec_a.m - sec_b.m)
    verdicts = set()
    for kappa in kappas:
        xs = []
        for i in range(npts):
            rho = rho_hi * (rho_lo / rho_hi) ** (i / (npts - 1))
            u = rho * eu
            v = rho ** kappa * ev
            x = section_exponent(delta, u, v).real
            xs.append((rho, x))
        # compare against C log(1/rho): normalized magnitude must diverge
        norm = [x / math.log(1.0 / rho) for rho, x in xs]
        if norm[-1] < -10.0 and norm[-1] < 2.0 * norm[0] - 1e-9:
            verdicts.add("strictly_less")
        elif norm[-1] > 10.0 and norm[-1] > 2.0 * norm[0] + 1e-9:
            verdicts.add("strictly_greater")
        else:
            verdicts.add("inconclusive")
    if verdicts == {"strictly_less"}:
        return "strictly_less"
    if verdicts == {"strictly_greater"}:
        return "strictly_greater"
    return "inconclusive"


def membership_test(period_fn: Callable[[complex, complex], complex],
                    sec: FactorSection, d: Direction,
                    kappas: Sequence[float] = (0.5, 1.0, 2.0),
                    rho_hi: float = 0.5, rho_lo: float = 1e-3,
                    npts: int = 7) -> AsymptoticFit:
    """Classify e^{-phi} * period on shrinking bi-radius grids toward d.

    period_fn(lam, mu) evaluates the period pairing; it may return either a
    complex value or a scaled pair (mantissa, log_offset) for magnitudes
    outside double range.  The grid sets (lam, mu) = (u v, v).  The fitted
    quantity is log |e^{-phi} P| against log rho: a bounded slope means the
    twisted period has moderate growth (the cycle lies in the <= phi
    filtration step), a slope diverging to -infinity means rapid decay
    (strictly below phi).
    """
    eu = cmath.exp(1j * d.theta_u.value())
    ev = cmath.exp(1j * d.theta_v.value())
    samples: List[Tuple[float, float]] = []
    slopes = []
    for kappa in kappas:
        pts = []
        for i in range(npts):
            rho = rho_hi * (rho_lo / rho_hi) ** (i / (npts - 1))
            u = rho * eu
            v = rho ** kappa * ev
            lam, mu = u * v, v
            val = period_fn(lam, mu)
            phi = section_exponent(sec, u, v)
            if isinstance(val, tuple):
                mant, off = val
                lv = (math.log(abs(mant)) + off.real) if mant != 0 else -1e9
            else:
                lv = cmath.log(val).real if val != 0 else -1e9
            logmag = lv - phi.real
            pts.append((math.log(rho), logmag))
            samples.append((rho, logmag))
        (x0, y0), (x1, y1) = pts[0], pts[-1]
        slopes.append((y1 - y0) / (x1 - x0))
    slope = max(slopes)
    if all(abs(s) < 25.0 for s in slopes):
        cls = "moderate"
    elif all(s > 25.0 for s in slopes):
        cls = "rapid_decay"           # log|.| ~ +C log rho -> 0 fast as rho -> 0
    else:
        cls = "growing" if any(s < -25.0 for s in slopes) else "moderate"
    return AsymptoticFit(samples=samples, slope=slope, classification=cls)


# ---------------------------------------------------------------------------
# Verification helpers
# ---------------------------------------------------------------------------


def torsion_relation_check(geom: PairGeometry, sheets: Sequence[SpectralSheet],
                           form, lam: complex, mu: complex, phi: float = 0.0,
                           height: Optional[float] = None) -> dict:
    """(1 - q^{n_e}) * period(plus path) == period(loop path) per e in E0.

    Returns per-point relative residuals; an empty report when E0 is empty.
    """
    out = {"points": [], "max_residual": 0.0}
    height = height or default_height(lam, phi)
    for idx, s in enumerate(sheets):
        if s.kind != "E0":
            continue
        fams = build_paths(geom, sheets, phi, mu, height=height,
                           kinds=["E_plus", "E_minus"])
        fam_p = next(f for f in fams if f.kind == "E_plus" and f.sheet_index == idx)
        fam_m = next(f for f in fams if f.kind == "E_minus" and f.sheet_index == idx)
        q = cmath.exp(TWO_PI_I * mu / lam)
        p_plus = period_integral(BettiCycle(fam_p), form, lam, mu, geom)
        p_minus = period_integral(BettiCycle(fam_m), form, lam, mu, geom)
        lhs = (1.0 - q ** s.n_p) * p_plus
        res = abs(lhs - p_minus) / max(abs(p_minus), 1e-300)
        out["points"].append({"e": str(s.p), "n_e": s.n_p, "residual": res})
        out["max_residual"] = max(out["max_residual"], res)
    return out


def default_height(lam: complex, phi: float, tail: float = 46.0) -> float:
    """Phase height needed so the weight decays below e^{-tail}."""
    c = (cmath.exp(1j * phi) / lam).real
    if c <= 0:
        raise DivergentTail("Re(e^{i phi}/lambda) <= 0: no decay along phi")
    return tail / c


def coords_from_periods(gram_rows: Sequence[Sequence[complex]],
                        periods: Sequence[complex],
                        norm: complex = TWO_PI_I) -> List[complex]:
    """Coordinates x of a cycle from its periods against a dual basis.

    Solves sum_k x_k G[k][j] = periods[j] / norm, where G is the de Rham
    pairing matrix of the two bases.
    """
    G = np.array(gram_rows, dtype=complex)
    P = np.array(periods, dtype=complex) / norm
    x = np.linalg.solve(G.T, P)
    return [complex(v) for v in x]


def verify_dd_relations(coords_fn: Callable[[complex, complex], Sequence[complex]],
                        shift_mat: Callable[[complex, complex], Sequence[Sequence[complex]]],
                        nabla_mat: Callable[[complex, complex], Sequence[Sequence[complex]]],
                        lam: complex, mu: complex, h: float = 1e-6) -> dict:
    """Residuals of the shift and connection equations for a coordinate vector.

    Checks s(lam, mu - lam) = S(lam, mu) . s(lam, mu) and
    (lam^2 d_lam + lam mu d_mu) s = N(lam, mu) . s with a central finite
    difference for the vector-field derivative.
    """
    s0 = np.array(coords_fn(lam, mu), dtype=complex)
    s_sh = np.array(coords_fn(lam, mu - lam), dtype=complex)
    S = np.array(shift_mat(lam, mu), dtype=complex)
    res_shift = np.linalg.norm(s_sh - S @ s0) / max(np.linalg.norm(s_sh), 1e-300)
    N = np.array(nabla_mat(lam, mu), dtype=complex)
    dl = h * abs(lam)
    dm = h * max(abs(mu), 1.0)
    ds_dlam = (np.array(coords_fn(lam + dl, mu), dtype=complex)
               - np.array(coords_fn(lam - dl, mu), dtype=complex)) / (2 * dl)
    ds_dmu = (np.array(coords_fn(lam, mu + dm), dtype=complex)
              - np.array(coords_fn(lam, mu - dm), dtype=complex)) / (2 * dm)
    a_s = lam * lam * ds_dlam + lam * mu * ds_dmu
    res_conn = np.linalg.norm(a_s - N @ s0) / max(np.linalg.norm(a_s), 1e-300)
    return {"shift_residual": float(res_shift), "connection_residual": float(res_conn)}
