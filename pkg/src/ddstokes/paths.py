"""Steepest-descent path families in the z-plane.

For a pair (f, g) and a spectral parameter mu, the phase is
F_mu(z) = f(z) - mu log g(z).  Integration paths are level curves of
Im(e^{-i phi} F_mu) along which Re(e^{-i phi} F_mu) increases; they are
traced by predictor-corrector continuation of the defining equation
F_mu(z(s)) = F_0 + e^{i phi} s^2 (saddle parametrization), with the branch
of log g continued step by step along the way.

Three families are built per pair:
  * one saddle family per critical point of f (two ascending branches),
  * one family through the spectral point of each zero/pole e of g whose
    ends descend into e (the "plus" path; the inner end spirals into e),
  * a loop family passing around e at a standoff radius with both ends at
    poles of f (the "minus" path), assembled from the plus-path branches
    and a circle around e.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .geometry import PairGeometry, PointP1, SpectralSheet, is_generic_phi


class HitSingularArc(RuntimeError):
    """The traced level curve ran into a zero of df - mu dlog g."""


class StepBudget(RuntimeError):
    """Continuation exceeded the step budget."""


class NonGenericPhi(ValueError):
    """Two phase values are aligned along the requested direction."""


class SectorViolation(ValueError):
    """mu is outside the sector where the requested family exists."""


TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Numeric phase data
# ---------------------------------------------------------------------------


class PhaseData:
    """Callable bundle for F_mu = f - mu log g and its derivative."""

    def __init__(self, geom: PairGeometry, mu: complex):
        self.geom = geom
        self.mu = complex(mu)
        self._f = geom.f
        self._g = geom.g
        self._fp = geom.f.deriv()
        self._gl = geom.g.dlog()

    def f(self, z: complex) -> complex:
        return self._f.eval_complex(z)

    def g(self, z: complex) -> complex:
        return self._g.eval_complex(z)

    def F(self, z: complex, logg: complex) -> complex:
        """Phase with an explicitly tracked branch of log g."""
        return self._f.eval_complex(z) - self.mu * logg

    def dF(self, z: complex) -> complex:
        return self._fp.eval_complex(z) - self.mu * self._gl.eval_complex(z)

    def logg_step(self, z_old: complex, logg_old: complex, z_new: complex) -> complex:
        """Continue log g across one (short) step."""
        ratio = self._g.eval_complex(z_new) / self._g.eval_complex(z_old)
        return logg_old + cmath.log(ratio)


def singular_points(geom: PairGeometry, sheets: Sequence[SpectralSheet],
                    mu: complex) -> List[complex]:
    """Finite zeros of alpha_mu plus the finite points of P and E."""
    pts = []
    for s in sheets:
        if not s.p.is_inf:
            pts.append(s.nu_eval(mu))
    for p, _m in geom.P + geom.E0 + geom.Einf:
        if not p.is_inf:
            if p.zval is not None:
                pts.append(complex(p.zval.as_real_imag()[0]) + 1j * complex(p.zval.as_real_imag()[1])
                           if hasattr(p.zval, "as_real_imag") else complex(p.zval))
            else:
                pts.append(complex(p.approx))
    return pts


# ---------------------------------------------------------------------------
# Path containers
# ---------------------------------------------------------------------------


@dataclass
class Segment:
    """One traced piece of a path: points with parameters and log g values."""

    kind: str                      # "level" | "circle"
    s_vals: List[float]
    z_vals: List[complex]
    logg_vals: List[complex]
    phi: float = 0.0
    F0: complex = 0j               # parametrization anchor: F = F0 + e^{i phi} s^2
    center: complex = 0j           # circle segments
    radius: float = 0.0

    def end(self) -> Tuple[complex, complex]:
        return self.z_vals[-1], self.logg_vals[-1]


@dataclass
class PathFamily:
    """An oriented integration path for one sheet at one (phi, mu)."""

    kind: str                      # "saddle" | "E_plus" | "E_minus"
    sheet_index: int
    phi: float
    mu: complex
    F0: complex                    # phase value at the anchor point
    anchor: complex                # saddle / spectral point nu_p(mu)
    anchor_logg: complex           # branch of log g at the anchor
    segments: List[Segment] = field(default_factory=list)
    # orientation: the path runs through `segments` in order; "level"
    # segments with negative s_vals are traversed toward the anchor.

    def polyline(self) -> Tuple[List[complex], List[complex]]:
        """Concatenated (z, log g) samples in path order."""
        zs: List[complex] = []
        ls: List[complex] = []
        for seg in self.segments:
            z, l = seg.z_vals, seg.logg_vals
            if seg.kind == "level" and seg.s_vals[0] > seg.s_vals[-1]:
                pass  # stored in path order already
            zs.extend(z)
            ls.extend(l)
        return zs, ls


# ---------------------------------------------------------------------------
# Level-curve continuation
# ---------------------------------------------------------------------------


def _newton_to_target(ph: PhaseData, z: complex, logg: complex, target: complex,
                      max_iter: int = 16, tol: float = 1e-13) -> Optional[Tuple[complex, complex]]:
    """Solve F(z) = target by Newton, continuing log g from the start point."""
    scale = max(1.0, abs(target))
    for _ in range(max_iter):
        val = ph.F(z, logg) - target
        if abs(val) < tol * scale:
            return z, logg
        d = ph.dF(z)
        if d == 0:
            return None
        z_new = z - val / d
        try:
            logg = ph.logg_step(z, logg, z_new)
        except (ValueError, ZeroDivisionError, OverflowError):
            return None
        z = z_new
    val = ph.F(z, logg) - target
    if abs(val) < 1e-9 * scale:
        return z, logg
    return None


def trace_phi_arc(ph: PhaseData, z0: complex, logg0: complex, phi: float,
                  direction: int = 1, height: float = 40.0,
                  traps: Sequence[complex] = (), trap_radius: float = 1e-10,
                  max_steps: int = 20000, target_dz: float = 0.04) -> Segment:
    """Trace the ascending level arc from a regular point z0.

    Follows F(z(s)) = F(z0) + e^{i phi} s with s >= 0 (direction=+1 ascends;
    direction=-1 traces the descending arc, with s <= 0), stopping once
    |s| >= height, a trap point is approached, or the step budget runs out.
    """
    if ph.dF(z0) == 0:
        raise HitSingularArc("starting point is a zero of alpha_mu")
    rot = cmath.exp(1j * phi)
    F0 = ph.F(z0, logg0)
    s = 0.0
    z, logg = z0, logg0
    s_vals, z_vals, logg_vals = [0.0], [z0], [logg0]
    for _ in range(max_steps):
        if abs(s) >= height:
            return Segment("level", s_vals, z_vals, logg_vals, phi=phi, F0=F0)
        d = ph.dF(z)
        if abs(d) < 1e-14:
            raise HitSingularArc(f"alpha_mu vanishes near z={z}")
        scale = _local_scale(z, traps)
        ds = min(target_dz * scale * abs(d), height / 8.0)
        ds = max(ds, 1e-12)
        step_ok = False
        for _halve in range(40):
            s_try = s + direction * ds
            z_pred = z + rot * (s_try - s) / d
            if not _safe_ratio(ph, z, z_pred):
                ds *= 0.5
                continue
            sol = _newton_to_target(ph, z_pred, ph.logg_step(z, logg, z_pred),
                                    F0 + rot * s_try)
            if sol is not None and abs(sol[0] - z) < 4.0 * ds / max(abs(d), 1e-14) + 1e-9:
                z_new, logg_new = sol
                step_ok = True
                break
            ds *= 0.5
            if ds < 1e-14:
                break
        if not step_ok:
            raise HitSingularArc(f"continuation stalled near z={z}")
        s = s + direction * ds
        z, logg = z_new, logg_new
        s_vals.append(s)
        z_vals.append(z)
        logg_vals.append(logg)
        for t in traps:
            if abs(z - t) < trap_radius:
                return Segment("level", s_vals, z_vals, logg_vals, phi=phi, F0=F0)
    raise StepBudget(f"level arc exceeded {max_steps} steps")


def _safe_ratio(ph: PhaseData, z_old: complex, z_new: complex) -> bool:
    try:
        r = ph.g(z_new) / ph.g(z_old)
    except (ZeroDivisionError, OverflowError):
        return False
    return r != 0 and abs(r) < 1e12 and abs(r) > 1e-12


def _local_scale(z: complex, traps: Sequence[complex]) -> float:
    best = 1.0
    for t in traps:
        best = min(best, abs(z - t))
    return max(best, 1e-8)


def trace_saddle_branch(ph: PhaseData, nu: complex, logg_nu: complex, phi: float,
                        sign: int, height: float,
                        traps: Sequence[complex] = (), stop_radius: float = 0.0,
                        stop_center: complex = 0j,
                        stops: Sequence[Tuple[complex, float]] = (),
                        scale_points: Optional[Sequence[complex]] = (),
                        max_steps: int = 20000, target_dz: float = 0.04) -> Segment:
    """One ascending branch through a saddle: F(z(s)) = F0 + e^{i phi} s^2.

    sign selects the branch (z - nu ~ +-e^{i phi/2} sqrt(2/F'') s).  When
    stop_radius > 0 the trace also stops on entering that disk around
    stop_center (used for the inner end near a zero/pole of g).
    """
    F0 = ph.F(nu, logg_nu)
    rot = cmath.exp(1j * phi)
    Fpp = _second_deriv(ph, nu)
    if abs(Fpp) < 1e-13:
        raise HitSingularArc("degenerate saddle")
    w1 = cmath.sqrt(2.0 / Fpp) * cmath.exp(0.5j * phi)
    if w1.real < 0 or (w1.real == 0 and w1.imag < 0):
        w1 = -w1      # root convention: arg in (-pi/2, pi/2]
    s_max = math.sqrt(height)
    if scale_points is not None and not scale_points:
        scale_points = list(traps) + ([stop_center] if stop_radius > 0 else [])
    # series start: step off the saddle to where Newton is stable
    # a designated stop center is a valid endpoint, not a trap (it still
    # contributes to the local step scale through scale_points)
    live_traps = [t for t in traps
                  if all(abs(t - c0) > 1e-9 for c0, _ in stops)
                  and (stop_radius <= 0 or abs(t - stop_center) > 1e-9)]
    s = min(1e-3 * max(abs(nu), 1.0) / max(abs(w1), 1e-12), 0.1 * s_max)
    z_pred = nu + sign * w1 * s
    sol = _newton_to_target(ph, z_pred, ph.logg_step(nu, logg_nu, z_pred), F0 + rot * s * s)
    if sol is None:
        raise HitSingularArc("saddle branch failed to start")
    z, logg = sol
    s_vals, z_vals, logg_vals = [0.0, s], [nu, z], [logg_nu, logg]
    for _ in range(max_steps):
        if s >= s_max:
            return Segment("level", s_vals, z_vals, logg_vals, phi=phi, F0=F0)
        d = ph.dF(z)
        if abs(d) < 1e-14:
            raise HitSingularArc(f"alpha_mu vanishes near z={z}")
        scale = _local_scale(z, scale_points or traps)
        # near the saddle the step must stay well inside the branch's own
        # arc, or the corrector can converge onto the opposite branch
        scale = min(scale, max(abs(z - nu), 1e-9))
        # |dz| ~ |2 s ds / dF|
        ds = min(target_dz * scale * abs(d) / max(2.0 * s, 1e-9), 0.25 * s_max)
        ds = max(ds, 1e-13)
        step_ok = False
        for _halve in range(48):
            s_try = min(s + ds, s_max)
            dz_pred = rot * (s_try * s_try - s * s) / d
            if abs(dz_pred) > 4.0 * target_dz * scale:
                ds *= 0.5
                continue
            z_pred = z + dz_pred
            if not _safe_ratio(ph, z, z_pred):
                ds *= 0.5
                continue
            sol = _newton_to_target(ph, z_pred, ph.logg_step(z, logg, z_pred),
                                    F0 + rot * s_try * s_try)
            if sol is not None and abs(sol[0] - z) <= 3.0 * abs(dz_pred) + 1e-12 * scale:
                z_new, logg_new = sol
                step_ok = True
                break
            ds *= 0.5
            if ds < 1e-15:
                break
        if not step_ok:
            raise HitSingularArc(f"saddle branch stalled near z={z}")
        s = min(s + ds, s_max)
        z, logg = z_new, logg_new
        s_vals.append(s)
        z_vals.append(z)
        logg_vals.append(logg)
        if stop_radius > 0 and abs(z - stop_center) <= stop_radius:
            return Segment("level", s_vals, z_vals, logg_vals, phi=phi, F0=F0)
        for c0, r0 in stops:
            if abs(z - c0) <= r0:
                return Segment("level", s_vals, z_vals, logg_vals, phi=phi, F0=F0)
        for t in live_traps:
            if abs(z - t) < 1e-10:
                raise HitSingularArc(f"branch ran into singular point {t}")
    raise StepBudget(f"saddle branch exceeded {max_steps} steps")


def _second_deriv(ph: PhaseData, z: complex, h: Optional[float] = None) -> complex:
    h = h or 1e-5 * max(1.0, abs(z))
    return (ph.dF(z + h) - ph.dF(z - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# Local models
# ---------------------------------------------------------------------------


def local_saddle_frame(ph: PhaseData, sheet: SpectralSheet, phi: float = 0.0) -> Dict:
    """Local data at the sheet point: position, phase value, second derivative.

    The square-root branch for the local coordinate w with F = F0 + w^2 *
    (F''/2) is fixed so that dw/dz at the center has argument in
    (-pi/2, pi/2]; the path parametrization uses w = e^{i phi/2} t.
    """
    if sheet.p.is_inf:
        raise NotImplementedError("local frame at infinity not supported")
    nu = sheet.nu_eval(ph.mu)
    g_nu = ph.g(nu)
    logg_nu = cmath.log(g_nu)
    F0 = ph.F(nu, logg_nu)
    Fpp = _second_deriv(ph, nu)
    wprime = cmath.sqrt(Fpp / 2.0)
    if wprime.real < 0 or (wprime.real == 0 and wprime.imag < 0):
        wprime = -wprime
    out = {"kind": sheet.kind, "nu": nu, "F0": F0, "Fpp": Fpp,
           "wprime": wprime, "logg_nu": logg_nu}
    if sheet.kind in ("E0", "Einf"):
        out["n_e"] = sheet.n_p
    return out


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def _reversed_segment(seg: Segment) -> Segment:
    return Segment(seg.kind, list(reversed(seg.s_vals)), list(reversed(seg.z_vals)),
                   list(reversed(seg.logg_vals)), phi=seg.phi, F0=seg.F0,
                   center=seg.center, radius=seg.radius)


def _shift_branch(seg: Segment, delta: complex, mu: complex) -> Segment:
    """Move a segment to the log g branch shifted by delta."""
    return Segment(seg.kind, list(seg.s_vals), list(seg.z_vals),
                   [l + delta for l in seg.logg_vals], phi=seg.phi,
                   F0=seg.F0 - mu * delta, center=seg.center, radius=seg.radius)


def _e_stops(sheets: Sequence[SpectralSheet]) -> List[Tuple[complex, float]]:
    """Termination disks at finite zeros/poles of g: a thimble end may
    converge into one, and the offset z - e is not resolvable much below
    1e-8 in double precision when e != 0."""
    out = []
    for s in sheets:
        if s.kind in ("E0", "Einf") and not s.p.is_inf:
            e = _e_center(s)
            out.append((e, 1e-130 if abs(e) < 1e-9 else 1e-8 * max(1.0, abs(e))))
    return out


def saddle_family(ph: PhaseData, sheets: Sequence[SpectralSheet], idx: int,
                  phi: float, height: float = 40.0) -> PathFamily:
    """The steepest-descent double path through a nondegenerate saddle.

    Oriented from the (-)-branch end through the saddle to the (+)-branch
    end; both branches ascend, so the weight e^{-F/lambda} decays toward
    both ends when Re(e^{-i phi} lambda) > 0.
    """
    sheet = sheets[idx]
    nu = sheet.nu_eval(ph.mu)
    logg_nu = cmath.log(ph.g(nu))
    traps = [p for p in singular_points(ph.geom, sheets, ph.mu) if abs(p - nu) > 1e-9]
    stops = _e_stops(sheets)
    minus = trace_saddle_branch(ph, nu, logg_nu, phi, -1, height, traps=traps,
                                stops=stops)
    plus = trace_saddle_branch(ph, nu, logg_nu, phi, +1, height, traps=traps,
                               stops=stops)
    fam = PathFamily("saddle", idx, phi, ph.mu, F0=ph.F(nu, logg_nu),
                     anchor=nu, anchor_logg=logg_nu,
                     segments=[_reversed_segment(minus), plus])
    return fam


def _e_center(sheet: SpectralSheet) -> complex:
    if sheet.p.is_inf:
        raise NotImplementedError("E-path at infinity not supported")
    if sheet.p.zval is not None:
        import sympy
        return complex(sympy.N(sheet.p.zval, 17))
    return complex(sheet.p.approx)


def e_plus_family(ph: PhaseData, sheets: Sequence[SpectralSheet], idx: int,
                  phi: float, height: float = 40.0) -> PathFamily:
    """Path through nu_e(mu) with the inner end running into e.

    Requires the decay condition Re(e^{-i phi} n_e mu) > 0, so that
    g^{mu/lambda} -> 0 along the inner end.
    """
    sheet = sheets[idx]
    n_e = sheet.n_p
    if n_e == 0 or (cmath.exp(-1j * phi) * n_e * ph.mu).real <= 0:
        raise SectorViolation("inner end of the plus path does not decay")
    e = _e_center(sheet)
    nu = sheet.nu_eval(ph.mu)
    logg_nu = cmath.log(ph.g(nu))
    traps = [p for p in singular_points(ph.geom, sheets, ph.mu)
             if abs(p - nu) > 1e-9 and abs(p - e) > 1e-9]
    # deep enough that the truncated tail is far below quadrature tolerance
    # for any weight g^{mu/lambda} the caller's height budget allows; for
    # e != 0 the offset z - e cancels in double precision, which caps the
    # resolvable depth (paths there are still fine for crossing counts)
    if abs(e) < 1e-9:
        inner_stop = 1e-130 * max(abs(nu - e), 1e-6)
    else:
        inner_stop = 1e-7 * max(1.0, abs(e))
    # decide which branch runs into e by a probe step
    # the outer branch may legitimately terminate at another zero/pole of g
    other_stops = [(c0, r0) for c0, r0 in _e_stops(sheets) if abs(c0 - e) > 1e-9]
    segs = {}
    for sign in (+1, -1):
        segs[sign] = trace_saddle_branch(ph, nu, logg_nu, phi, sign, height,
                                         traps=traps, stop_radius=inner_stop,
                                         stop_center=e, stops=other_stops)
    d_plus = abs(segs[+1].z_vals[-1] - e)
    d_minus = abs(segs[-1].z_vals[-1] - e)
    inner_sign = +1 if d_plus < d_minus else -1
    inner, outer = segs[inner_sign], segs[-inner_sign]
    fam = PathFamily("E_plus", idx, phi, ph.mu, F0=ph.F(nu, logg_nu),
                     anchor=nu, anchor_logg=logg_nu,
                     segments=[_reversed_segment(inner), outer])
    return fam


def e_minus_family(ph: PhaseData, sheets: Sequence[SpectralSheet], idx: int,
                   phi: float, height: float = 40.0,
                   standoff: float = 0.1) -> PathFamily:
    """Loop family: in from a pole, around e counterclockwise, back out.

    Built from the plus-path branches truncated at the standoff radius
    standoff * |nu_e(mu) - e|, joined by a full circle around e.  After the
    circle the branch of log g has shifted by 2 pi i n_e, so the outgoing
    copy of the path carries the shifted branch.
    """
    sheet = sheets[idx]
    n_e = sheet.n_p
    if n_e == 0 or (cmath.exp(-1j * phi) * n_e * ph.mu).real <= 0:
        raise SectorViolation("loop path requires the same sector as the plus path")
    e = _e_center(sheet)
    nu = sheet.nu_eval(ph.mu)
    logg_nu = cmath.log(ph.g(nu))
    traps = [p for p in singular_points(ph.geom, sheets, ph.mu)
             if abs(p - nu) > 1e-9 and abs(p - e) > 1e-9]
    r = standoff * abs(nu - e)
    segs = {}
    for sign in (+1, -1):
        segs[sign] = trace_saddle_branch(ph, nu, logg_nu, phi, sign, height,
                                         traps=traps, stop_radius=r, stop_center=e)
    d_plus = abs(segs[+1].z_vals[-1] - e)
    d_minus = abs(segs[-1].z_vals[-1] - e)
    inner_sign = +1 if d_plus < d_minus else -1
    inner, outer = segs[inner_sign], segs[-inner_sign]
    if abs(inner.z_vals[-1] - e) > 1.5 * r:
        raise SectorViolation("inner branch did not reach the standoff circle")
    # circle around e, counterclockwise, starting at the inner branch's end;
    # use the endpoint's actual radius so the contour is continuous there
    z_on, logg_on = inner.end()
    r = abs(z_on - e)
    theta0 = cmath.phase(z_on - e)
    npts = 720
    thetas = [theta0 + TWO_PI * k / npts for k in range(npts + 1)]
    zs = [e + r * cmath.exp(1j * t) for t in thetas]
    loggs = [logg_on]
    for a, b in zip(zs, zs[1:]):
        loggs.append(ph.logg_step(a, loggs[-1], b))
    circle = Segment("circle", [t - theta0 for t in thetas], zs, loggs,
                     phi=phi, center=e, radius=r)
    delta = loggs[-1] - logg_on        # = 2 pi i n_e
    # path order: pole -> nu -> standoff -> circle (clockwise) -> standoff
    # -> nu -> pole, i.e. the reverse of the counterclockwise sweep; this
    # orientation makes the loop period equal (1 - q^{n_e}) times the plus
    # path's period.
    segments = [
        _reversed_segment(_shift_branch(outer, delta, ph.mu)),
        _shift_branch(inner, delta, ph.mu),
        _reversed_segment(circle),
        _reversed_segment(inner),
        outer,
    ]
    fam = PathFamily("E_minus", idx, phi, ph.mu, F0=ph.F(nu, logg_nu),
                     anchor=nu, anchor_logg=logg_nu, segments=segments)
    return fam


def _carry_branch(ph: PhaseData, z0: complex, logg0: complex, z1: complex,
                  nsteps: int = 256) -> complex:
    """Continue log g from z0 to z1 along the straight segment."""
    lg, z = logg0, z0
    for k in range(1, nsteps + 1):
        zn = z0 + (z1 - z0) * k / nsteps
        lg = ph.logg_step(z, lg, zn)
        z = zn
    return lg


def saddle_dual_family(ph: PhaseData, sheets: Sequence[SpectralSheet], idx: int,
                       phi: float, height: float = 40.0) -> PathFamily:
    """Descending thimble through the saddle: the ascending family at phi+pi.

    Oriented so that its tangent at the saddle is +i times the tangent of
    the ascending family at phi; the two then cross once, positively, at
    the saddle.
    """
    sheet = sheets[idx]
    nu = sheet.nu_eval(ph.mu)
    logg_nu = cmath.log(ph.g(nu))
    traps = [p for p in singular_points(ph.geom, sheets, ph.mu) if abs(p - nu) > 1e-9]
    phi_d = phi + math.pi
    stops = _e_stops(sheets)
    minus = trace_saddle_branch(ph, nu, logg_nu, phi_d, -1, height, traps=traps,
                                stops=stops)
    plus = trace_saddle_branch(ph, nu, logg_nu, phi_d, +1, height, traps=traps,
                               stops=stops)
    Fpp = _second_deriv(ph, nu)
    w = cmath.sqrt(2.0 / Fpp) * cmath.exp(0.5j * phi)
    if w.real < 0 or (w.real == 0 and w.imag < 0):
        w = -w
    wd = cmath.sqrt(2.0 / Fpp) * cmath.exp(0.5j * phi_d)
    if wd.real < 0 or (wd.real == 0 and wd.imag < 0):
        wd = -wd
    if ((1j * w) / wd).real > 0:
        segments = [_reversed_segment(minus), plus]
    else:
        segments = [_reversed_segment(plus), minus]
    return PathFamily("saddle_dual", idx, phi_d, ph.mu, F0=ph.F(nu, logg_nu),
                      anchor=nu, anchor_logg=logg_nu, segments=segments)


def e_loop_family(ph: PhaseData, sheets: Sequence[SpectralSheet], idx: int,
                  phi: float, height: float = 40.0,
                  start_offset: float = 0.35) -> PathFamily:
    """Loop around e built from arcs ascending at phi, on the non-decay side.

    The loop runs in along a level arc to a circle around e, once around the
    circle counterclockwise, and back out on the shifted branch.  The branch
    of log g is anchored at nu_e(mu) and carried to the circle along the
    straight radial segment, matching the plus path's normalization at the
    same base point.
    """
    sheet = sheets[idx]
    n_e = sheet.n_p
    if n_e == 0 or (cmath.exp(-1j * phi) * n_e * ph.mu).real >= 0:
        raise SectorViolation("loop at phi requires the non-decay side of mu")
    e = _e_center(sheet)
    nu = sheet.nu_eval(ph.mu)
    logg_nu = cmath.log(ph.g(nu))
    sing = [p for p in singular_points(ph.geom, sheets, ph.mu) if abs(p - e) > 1e-9]
    # keep nu_e outside the circle so the plus path's inner branch meets the
    # circle exactly once
    r = min(0.35 * min(abs(p - e) for p in sing), 0.6 * abs(nu - e))
    # carry the branch from nu to the circle along the descending leaf at
    # phi - pi (the inner branch of the paired plus path), so the loop's
    # normalization agrees with the plus path at their crossing
    phi_p = phi - math.pi
    probes = {}
    for sign in (+1, -1):
        probes[sign] = trace_saddle_branch(ph, nu, logg_nu, phi_p, sign, height,
                                           traps=sing, stop_radius=r,
                                           stop_center=e)
    inner = probes[+1] if abs(probes[+1].z_vals[-1] - e) < abs(probes[-1].z_vals[-1] - e) \
        else probes[-1]
    zX, logg_X = inner.z_vals[-1], inner.logg_vals[-1]
    # project the entry point onto the circle and record its angle
    theta_X = cmath.phase(zX - e)
    zXc = e + r * cmath.exp(1j * theta_X)
    logg_Xc = _carry_branch(ph, zX, logg_X, zXc, nsteps=16)
    # start the counterclockwise sweep just behind the leaf's entry angle,
    # so the branch cut is not crossed before the plus path is met; retreat
    # further clockwise (carrying the branch along the circle) if no
    # outgoing level arc exists at the cut point
    arc = None
    for k in range(12):
        theta0 = theta_X - start_offset - 0.45 * k
        P = e + r * cmath.exp(1j * theta0)
        steps = [e + r * cmath.exp(1j * (theta_X + (theta0 - theta_X) * j / 64))
                 for j in range(65)]
        lg = logg_Xc
        for a, b in zip(steps, steps[1:]):
            lg = ph.logg_step(a, lg, b)
        logg_P = lg
        try:
            arc = trace_phi_arc(ph, P, logg_P, phi, direction=1, height=height,
                                traps=sing + [e])
            break
        except (HitSingularArc, StepBudget):
            continue
    if arc is None:
        raise HitSingularArc("no outgoing level arc from the standoff circle")
    npts = 720
    thetas = [theta0 + TWO_PI * k / npts for k in range(npts + 1)]
    zs = [e + r * cmath.exp(1j * t) for t in thetas]
    loggs = [logg_P]
    for a, b in zip(zs, zs[1:]):
        loggs.append(ph.logg_step(a, loggs[-1], b))
    circle = Segment("circle", [t - theta0 for t in thetas], zs, loggs,
                     phi=phi, center=e, radius=r)
    delta = loggs[-1] - logg_P          # = 2 pi i n_e
    segments = [
        _reversed_segment(arc),
        circle,
        _shift_branch(arc, delta, ph.mu),
    ]
    return PathFamily("E_loop", idx, phi, ph.mu, F0=ph.F(nu, logg_nu),
                      anchor=nu, anchor_logg=logg_nu, segments=segments)


def build_dual_paths(geom: PairGeometry, sheets: Sequence[SpectralSheet],
                     phi: float, mu: complex,
                     height: float = 40.0) -> List[PathFamily]:
    """Antipodal-direction representatives pairing against build_paths(phi).

    Saddle sheets get the descending thimble; E sheets get the loop at
    phi+pi (the moderate-growth continuation of the plus section across the
    antipodal direction).
    """
    if not is_generic_phi(sheets, phi):
        raise NonGenericPhi(f"phi={phi} aligns two phase values")
    ph = PhaseData(geom, mu)
    out: List[PathFamily] = []
    for idx, sheet in enumerate(sheets):
        if sheet.kind == "crit":
            out.append(saddle_dual_family(ph, sheets, idx, phi, height=height))
        elif (cmath.exp(-1j * phi) * sheet.n_p * mu).real > 0:
            out.append(e_loop_family(ph, sheets, idx, phi + math.pi, height=height))
        else:
            out.append(e_plus_family(ph, sheets, idx, phi + math.pi, height=height))
    return out


def reversed_family(fam: PathFamily) -> PathFamily:
    """The same path traversed backwards."""
    segs = [_reversed_segment(s) for s in reversed(fam.segments)]
    return PathFamily(fam.kind, fam.sheet_index, fam.phi, fam.mu, fam.F0,
                      fam.anchor, fam.anchor_logg, segs)


def build_paths(geom: PairGeometry, sheets: Sequence[SpectralSheet], phi: float,
                mu: complex, height: float = 40.0,
                kinds: Optional[Sequence[str]] = None) -> List[PathFamily]:
    """All applicable path families at one (phi, mu)."""
    if not is_generic_phi(sheets, phi):
        raise NonGenericPhi(f"phi={phi} aligns two phase values")
    ph = PhaseData(geom, mu)
    out: List[PathFamily] = []
    for idx, sheet in enumerate(sheets):
        if sheet.kind == "crit":
            if kinds is None or "saddle" in kinds:
                out.append(saddle_family(ph, sheets, idx, phi, height=height))
        else:
            if kinds is None or "E_plus" in kinds:
                out.append(e_plus_family(ph, sheets, idx, phi, height=height))
            if kinds is not None and "E_minus" in kinds:
                out.append(e_minus_family(ph, sheets, idx, phi, height=height))
    return out


def check_monotone(fam: PathFamily, ph: PhaseData, tol: float = 1e-8) -> bool:
    """Level invariant: Im(e^{-i phi}F) constant and Re increasing with |s|."""
    rot = cmath.exp(-1j * fam.phi)
    for seg in fam.segments:
        if seg.kind != "level":
            continue
        vals = [rot * ph.F(z, l) for z, l in zip(seg.z_vals, seg.logg_vals)]
        scale = max(1.0, max(abs(v) for v in vals))
        im0 = (rot * seg.F0).imag
        if any(abs(v.imag - im0) > tol * scale for v in vals):
            return False
        res = [v.real for v in vals]
        ss = [abs(s) for s in seg.s_vals]
        for (s1, r1), (s2, r2) in zip(zip(ss, res), zip(ss[1:], res[1:])):
            if s2 > s1 and r2 < r1 - tol * scale:
                return False
            if s2 < s1 and r2 > r1 + tol * scale:
                return False
    return True
