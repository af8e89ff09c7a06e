"""Circle model of Stokes filtered quasi-local systems over k[q^{+-1}].

Directions live on a two-angle torus (theta_u, theta_v); sections of the index
sheaf are represented by exponential factors u^{-1}(n log v + h(v)/v + 2 pi i m).
A system is modelled on a test circle t -> (theta_u0 + t, theta_v0 + a t):
finitely many event directions (Stokes crossings and the two real loci
theta_u in {0, pi}) split the circle into sectors, each carrying a free
k[q^{+-1}]-module with a chosen frame; events carry stalk-to-sector matrices.
Everything (order predicate, saturation, strictness, kernels) reduces to exact
Laurent linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import CC, CC_ZERO
from .laurent import (
    LaurentPoly, QFrac, lmat, lmat_eye, lmat_zero, lmat_mul, lmat_eq,
    lmat_is_zero, lmat_subs_qinv, lmat_rank_kq, qmat_of, qmat_solve, qmat_inv,
    qmat_mul, qmat_nullspace, lmat_to_laurent, lmat_det, invariant_factors,
    lmat_spans_full, lmat_membership, lmat_span_equal, lmat_kernel,
    lmat_saturate, smith_form, frac_nullspace, lp_solve,
)

_TOL = 1e-10


class InvalidSystem(ValueError):
    """Circle system violates its structural invariants."""


class NotAMorphism(ValueError):
    """Sector matrices fail the morphism compatibility conditions."""


class TooManyCrossings(ValueError):
    """Interval hypothesis violated: some Stokes line met more than once."""


# ---------------------------------------------------------------------------
# Angles and directions
# ---------------------------------------------------------------------------


def _norm_pi(r: Fraction) -> Fraction:
    """Normalize a pi-multiple into [0, 2)."""
    return Fraction(r) % 2


@dataclass(frozen=True)
class Angle:
    """An angle, exact (rational multiple of pi) or floating (radians)."""

    pi_mult: Optional[Fraction] = None
    rad: Optional[float] = None

    @classmethod
    def of_pi(cls, r) -> "Angle":
        return cls(pi_mult=_norm_pi(Fraction(r)))

    @classmethod
    def of_rad(cls, x: float) -> "Angle":
        return cls(rad=float(x) % (2 * math.pi))

    @property
    def exact(self) -> bool:
        return self.pi_mult is not None

    def value(self) -> float:
        if self.exact:
            return float(self.pi_mult) * math.pi
        return self.rad

    def add(self, other: "Angle") -> "Angle":
        if self.exact and other.exact:
            return Angle.of_pi(self.pi_mult + other.pi_mult)
        return Angle.of_rad(self.value() + other.value())

    def scale(self, k: int) -> "Angle":
        if self.exact:
            return Angle.of_pi(self.pi_mult * k)
        return Angle.of_rad(self.value() * k)

    def sin(self) -> float:
        if self.exact:
            r = self.pi_mult % 2
            if r % 1 == 0:
                return 0.0
            if r % 1 == Fraction(1, 2):
                return 1.0 if r % 2 == Fraction(1, 2) else -1.0
        return math.sin(self.value())

    def cos(self) -> float:
        if self.exact:
            r = self.pi_mult % 2
            if r % 1 == Fraction(1, 2):
                return 0.0
            if r % 1 == 0:
                return 1.0 if r % 2 == 0 else -1.0
        return math.cos(self.value())

    def is_zero_mod_pi(self) -> bool:
        if self.exact:
            return self.pi_mult % 1 == 0
        return min(self.rad % math.pi, math.pi - self.rad % math.pi) < _TOL


@dataclass(frozen=True)
class Direction:
    theta_u: Angle
    theta_v: Angle

    @classmethod
    def of_pi(cls, ru, rv) -> "Direction":
        return cls(Angle.of_pi(ru), Angle.of_pi(rv))

    def stratum(self) -> str:
        """T_R+ / T_R- / T_+ / T_- (T_+ is where -sin(theta_u) > 0)."""
        if self.theta_u.is_zero_mod_pi():
            cu = self.theta_u.cos()
            return "TR+" if cu > 0 else "TR-"
        return "T+" if self.theta_u.sin() < 0 else "T-"


# ---------------------------------------------------------------------------
# Exponential factors and sections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpFactor:
    """The factor Phi_{n,h}: class of u^{-1}(n log v + h(v)/v + 2 pi i Z)."""

    n: int
    h: Tuple[CC, ...] = ()          # power series coefficients h_0 + h_1 v + ...
    label: str = ""

    @property
    def c0(self) -> CC:
        return self.h[0] if self.h else CC_ZERO

    def key(self):
        h = tuple(self.h)
        while h and not h[-1]:
            h = h[:-1]
        return (self.n, h)

    def __repr__(self):
        return self.label or f"Phi(n={self.n}, h={list(self.h)})"

    def to_json(self):
        return {"n": self.n, "h": [c.to_json() for c in self.h], "label": self.label}

    @classmethod
    def from_json(cls, d):
        return cls(n=int(d["n"]), h=tuple(CC.from_pair(c) for c in d["h"]),
                   label=d.get("label", ""))


ZERO_FACTOR = ExpFactor(n=0, h=(), label="rho")


@dataclass(frozen=True)
class FactorSection:
    """A section phi = u^{-1}(n log v + h(v)/v + 2 pi i m)."""

    factor: ExpFactor
    m: int = 0

    def shifted(self, k: int) -> "FactorSection":
        return FactorSection(self.factor, self.m + k)


def is_good_factor(factors: Sequence[ExpFactor]) -> bool:
    """Pairwise distinct factors must differ in h(0) or in n."""
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            a, b = factors[i], factors[j]
            if a.key() == b.key():
                continue
            if a.c0 == b.c0 and a.n == b.n:
                return False
    return True


def _sign_tol(x: float) -> int:
    if x > _TOL:
        return 1
    if x < -_TOL:
        return -1
    return 0


def leq_at(phi: FactorSection, psi: FactorSection, d: Direction) -> str:
    """Compare two sections at a direction.

    Returns one of strictly_less / equal / strictly_greater / on_stokes_line /
    incomparable_nongood.  The decision is tiered by which term of
    delta = phi - psi dominates the growth of e^delta as (u,v) -> 0:
    the 1/(uv) coefficient c_delta = Dh(0), then the log term Dn, then the
    2 pi i Dm constant.
    """
    fa, fb = phi.factor, psi.factor
    same = fa.key() == fb.key()
    dn = fa.n - fb.n
    c = fa.c0 - fb.c0
    dm = phi.m - psi.m
    if same:
        dn = 0
        c = CC_ZERO
    if c:
        cz = c.to_complex()
        th = d.theta_u.value() + d.theta_v.value()
        s = _sign_tol(cz.real * math.cos(th) + cz.imag * math.sin(th))
        # exact sign when the summed angle lies on the quarter-turn grid
        if d.theta_u.exact and d.theta_v.exact:
            r = _norm_pi(d.theta_u.pi_mult + d.theta_v.pi_mult)
            if r % Fraction(1, 2) == 0:
                re = {Fraction(0): c.re, Fraction(1, 2): c.im,
                      Fraction(1): -c.re, Fraction(3, 2): -c.im}[r % 2]
                s = 0 if re == 0 else (1 if re > 0 else -1)
        if s < 0:
            return "strictly_less"
        if s > 0:
            return "strictly_greater"
        return "on_stokes_line"
    if dn != 0:
        cu = d.theta_u.cos()
        if cu == 0 or abs(cu) < _TOL:
            return "on_stokes_line"
        return "strictly_less" if dn * cu > 0 else "strictly_greater"
    if not same:
        return "incomparable_nongood"
    if dm != 0:
        su = d.theta_u.sin()
        if su == 0 or abs(su) < _TOL:
            return "on_stokes_line"
        return "strictly_less" if dm * su < 0 else "strictly_greater"
    return "equal"


def leq_closure(phi: FactorSection, psi: FactorSection, d: Direction) -> bool:
    """phi <= psi in the closed sense (on-line boundary counts as <=)."""
    return leq_at(phi, psi, d) in ("strictly_less", "equal", "on_stokes_line")


def stokes_lines(factors: Sequence[ExpFactor]) -> List[dict]:
    """Stokes lines St_ij on the torus for a good factor set (plus St_ii)."""
    out = []
    for i in range(len(factors)):
        out.append({"pair": (i, i), "type": "real_locus", "theta_u": [0.0, math.pi]})
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            c = factors[i].c0 - factors[j].c0
            dn = factors[i].n - factors[j].n
            if c:
                arg = math.atan2(float(c.im), float(c.re))
                out.append({
                    "pair": (i, j), "type": "sum_line",
                    "theta_sum": [(arg + math.pi / 2) % (2 * math.pi),
                                  (arg - math.pi / 2) % (2 * math.pi)],
                })
            elif dn != 0:
                out.append({"pair": (i, j), "type": "vertical",
                            "theta_u": [math.pi / 2, 3 * math.pi / 2]})
    return out


# ---------------------------------------------------------------------------
# Circle systems
# ---------------------------------------------------------------------------


@dataclass
class Event:
    t: Fraction                  # position on the circle, in units of pi, in [0,2)
    kind: str                    # "stokes" | "TR+" | "TR-"
    pair: Optional[Tuple[int, int]]
    A: List[List[LaurentPoly]]   # stalk frame -> preceding sector frame
    B: List[List[LaurentPoly]]   # stalk frame -> following sector frame


@dataclass
class CircleSystem:
    """A Stokes filtered quasi-local system restricted to a test circle.

    Sector k is the open arc between events[k] and events[k+1] (cyclically);
    events[k].A maps the stalk at the event into sector k-1, events[k].B into
    sector k.  h_plus / h_minus are frames of the section lattices over the
    arc avoiding the TR- (resp. TR+) event, in the coordinates of the sector
    right after the avoided event.
    """

    factors: List[ExpFactor]
    ranks: List[int]
    slope: int
    base_u: Angle
    base_v: Angle
    events: List[Event]
    h_plus: Optional[List[List[LaurentPoly]]] = None
    h_minus: Optional[List[List[LaurentPoly]]] = None

    @property
    def rank(self) -> int:
        return sum(self.ranks)

    @property
    def nsectors(self) -> int:
        return len(self.events)

    def direction_at(self, t: Fraction) -> Direction:
        du = self.base_u.add(Angle.of_pi(t))
        dv = self.base_v.add(Angle.of_pi(Fraction(t) * self.slope))
        return Direction(du, dv)

    def sector_midpoint(self, k: int) -> Fraction:
        t0 = self.events[k].t
        t1 = self.events[(k + 1) % self.nsectors].t
        if (k + 1) % self.nsectors == 0 or t1 <= t0:
            t1 = t1 + 2
        return _norm_pi((t0 + t1) / 2)

    def block_slices(self) -> List[Tuple[int, int]]:
        out = []
        off = 0
        for r in self.ranks:
            out.append((off, off + r))
            off += r
        return out

    def event_index(self, kind: str) -> int:
        for i, e in enumerate(self.events):
            if e.kind == kind:
                return i
        raise InvalidSystem(f"no {kind} event on the circle")

    def to_json(self):
        return {
            "factors": [f.to_json() for f in self.factors],
            "ranks": list(self.ranks),
            "slope": self.slope,
            "base_u_pi": str(self.base_u.pi_mult),
            "base_v_pi": str(self.base_v.pi_mult),
            "events": [{
                "t_pi": str(e.t), "kind": e.kind, "pair": e.pair,
                "A": [[x.to_json() for x in row] for row in e.A],
                "B": [[x.to_json() for x in row] for row in e.B],
            } for e in self.events],
            "h_plus": [[x.to_json() for x in row] for row in self.h_plus] if self.h_plus else None,
            "h_minus": [[x.to_json() for x in row] for row in self.h_minus] if self.h_minus else None,
        }

    @classmethod
    def from_json(cls, d) -> "CircleSystem":
        def mat(rows):
            return [[LaurentPoly.from_json(x) for x in row] for row in rows]
        sys = cls(
            factors=[ExpFactor.from_json(f) for f in d["factors"]],
            ranks=[int(r) for r in d["ranks"]],
            slope=int(d["slope"]),
            base_u=Angle.of_pi(Fraction(d["base_u_pi"])),
            base_v=Angle.of_pi(Fraction(d["base_v_pi"])),
            events=[Event(t=_norm_pi(Fraction(e["t_pi"])), kind=e["kind"],
                          pair=tuple(e["pair"]) if e.get("pair") else None,
                          A=mat(e["A"]), B=mat(e["B"]))
                    for e in d["events"]],
        )
        if d.get("h_plus") is not None:
            sys.h_plus = mat(d["h_plus"])
        if d.get("h_minus") is not None:
            sys.h_minus = mat(d["h_minus"])
        return sys


def _entry_allowed(sys: CircleSystem, row_block: int, col_block: int,
                   entry: LaurentPoly, d: Direction, closed: bool = True) -> bool:
    """May a stalk/frame coefficient of factor col_block have a component along
    factor row_block with the given q-multiplicities at direction d?"""
    fj = sys.factors[row_block]
    fi = sys.factors[col_block]
    for m in entry.support():
        verdict = leq_at(FactorSection(fj, m), FactorSection(fi, 0), d)
        ok = ("strictly_less", "equal", "on_stokes_line") if closed else ("strictly_less", "equal")
        if verdict not in ok:
            return False
    return True


def _filtration_offdiag(sys: CircleSystem, mat, d: Direction) -> List[str]:
    """Cross-factor entries must be dominated (or on a line) at direction d."""
    bad = []
    slices = sys.block_slices()
    for j in range(len(sys.factors)):
        for i in range(len(sys.factors)):
            if j == i:
                continue
            (r0, r1), (c0, c1) = slices[j], slices[i]
            for r in range(r0, r1):
                for c in range(c0, c1):
                    e = mat[r][c]
                    if e.is_zero():
                        continue
                    verdict = leq_at(FactorSection(sys.factors[j], 0),
                                     FactorSection(sys.factors[i], 0), d)
                    if verdict not in ("strictly_less", "on_stokes_line"):
                        bad.append(f"entry ({r},{c}) sits over a dominating factor")
    return bad


def _block_of(sys: CircleSystem, mat, j: int, i: int):
    (r0, r1) = sys.block_slices()[j]
    (c0, c1) = sys.block_slices()[i]
    return [[mat[r][c] for c in range(c0, c1)] for r in range(r0, r1)]


def _gr_block(sys: CircleSystem, mat, j: int):
    """q^0 coefficient of the diagonal block j, as a rational matrix."""
    blk = _block_of(sys, mat, j, j)
    return [[x.coeff(0) for x in row] for row in blk]


def _filtration_ok(sys: CircleSystem, mat, d: Direction, closed: bool = True,
                   factors_cols: Optional[List[ExpFactor]] = None) -> List[str]:
    """Check every entry of a frame matrix against the order at direction d."""
    bad = []
    slices = sys.block_slices()
    for j in range(len(sys.factors)):
        for i in range(len(sys.factors)):
            (r0, r1), (c0, c1) = slices[j], slices[i]
            for r in range(r0, r1):
                for c in range(c0, c1):
                    e = mat[r][c]
                    if e.is_zero():
                        continue
                    if not _entry_allowed(sys, j, i, e, d, closed=closed):
                        bad.append(f"entry ({r},{c}) = {e!r} violates order at "
                                   f"({d.theta_u.value():.3f},{d.theta_v.value():.3f})")
    return bad


# -- section lattices over arcs ---------------------------------------------


def _preimage_lattice(B, M):
    """Basis of {w in k[q^{+-1}]^r : B w in span(M)}."""
    n = len(B)
    if n == 0:
        return []
    r = len(B[0])
    s = len(M[0]) if M and M[0] else 0
    if s == 0:
        return lmat_kernel(B)
    big = [[B[i][k] for k in range(r)] + [-M[i][k] for k in range(s)] for i in range(n)]
    K = lmat_kernel(big)
    if not K or not K[0]:
        return [[] for _ in range(r)]
    return [[K[i][j] for j in range(len(K[0]))] for i in range(r)]


def _image_lattice(A, M):
    if not M or not M[0]:
        return [[] for _ in range(len(A))]
    return lmat_mul(A, M)


def section_lattice(sys: CircleSystem, avoid_event: int) -> List[List[LaurentPoly]]:
    """Lattice of sections over the arc that avoids the given event.

    Returned in the coordinates of the start sector (the sector right after
    the avoided event).  Computed by pulling the full end-sector lattice
    backwards through each event: C_before = A . {w : B w in C_after}.
    """
    K = sys.nsectors
    R = sys.rank
    order = [(avoid_event + i) % K for i in range(1, K)]   # events crossed, far to near? build reverse
    C = lmat_eye(R)        # lattice in the last sector (index avoid_event - 1)
    for ei in reversed(order):
        e = sys.events[ei]
        W = _preimage_lattice(e.B, C)
        C = _image_lattice(e.A, W)
        if not C or not C[0]:
            return [[] for _ in range(R)]
    return C


def transition_qmat(e: Event):
    """B . A^{-1} over k(q): sector-before coordinates -> sector-after."""
    Ainv = qmat_inv(qmat_of(e.A))
    if Ainv is None:
        raise InvalidSystem("event matrix A not invertible over k(q)")
    return qmat_mul(qmat_of(e.B), Ainv)


def transport(sys: CircleSystem, mat, from_sector: int, to_sector: int):
    """Transport a coordinate matrix across events over k(q)."""
    cur = qmat_of(mat)
    k = from_sector
    while k != to_sector:
        e = sys.events[(k + 1) % sys.nsectors]
        cur = qmat_mul(transition_qmat(e), cur)
        k = (k + 1) % sys.nsectors
    return cur


def _transport_around(sys: CircleSystem, frame, home_sector: int):
    """Carry a lattice frame forward through every sector of its arc.

    Returns {sector: Laurent matrix}; a sector is absent when the frame does
    not continue integrally through some event on the way (which for genuine
    section lattices never happens).
    """
    K = sys.nsectors
    out = {}
    if not frame or not frame[0]:
        return {k: [list(row) for row in frame] for k in range(K)}
    cur = frame
    out[home_sector] = cur
    k = home_sector
    for _ in range(1, K):
        e = sys.events[(k + 1) % K]
        w = lp_solve(e.A, cur)
        if w is None:
            break
        cur = lmat_mul(e.B, w)
        k = (k + 1) % K
        out[k] = cur
    return out


def compute_half_frames(sys: CircleSystem) -> None:
    """Fill h_plus / h_minus from the section lattices."""
    i_minus = sys.event_index("TR-")
    i_plus = sys.event_index("TR+")
    sys.h_plus = section_lattice(sys, avoid_event=i_minus)
    sys.h_minus = section_lattice(sys, avoid_event=i_plus)


def validate_system(sys: CircleSystem) -> dict:
    """Structural + filtration + saturation checks; returns a report."""
    v: List[str] = []
    R = sys.rank
    K = sys.nsectors
    if R == 0:
        return {"valid": True, "violations": []}
    if not is_good_factor(sys.factors):
        v.append("factor set is not good")
    if sorted(e.t for e in sys.events) != [e.t for e in sys.events]:
        v.append("events not sorted")
    kinds = [e.kind for e in sys.events]
    if kinds.count("TR+") != 1 or kinds.count("TR-") != 1:
        v.append("circle must cross each real locus exactly once")
    for idx, e in enumerate(sys.events):
        if len(e.A) != R or len(e.B) != R or any(len(r) != R for r in e.A + e.B):
            v.append(f"event {idx}: matrices not {R}x{R}")
            continue
        # (v) restriction maps injective / invertible over k(q)
        if lmat_rank_kq(e.A) != R:
            v.append(f"event {idx}: A not injective over k(q)")
        if lmat_rank_kq(e.B) != R:
            v.append(f"event {idx}: B not injective over k(q)")
        d = sys.direction_at(e.t)
        # (ii) filtration compatibility of the stalk frames: closed sense at
        # the event, one-sided for cross-factor entries (A extends into the
        # preceding sector, B into the following one)
        v += [f"event {idx} A: {msg}" for msg in _filtration_ok(sys, e.A, d)]
        v += [f"event {idx} B: {msg}" for msg in _filtration_ok(sys, e.B, d)]
        d_before = sys.direction_at(sys.sector_midpoint((idx - 1) % K))
        d_after = sys.direction_at(sys.sector_midpoint(idx))
        v += [f"event {idx} A (before side): {msg}"
              for msg in _filtration_offdiag(sys, e.A, d_before)]
        v += [f"event {idx} B (after side): {msg}"
              for msg in _filtration_offdiag(sys, e.B, d_after)]
        # (i)+(ii) graded parts: Stokes transitions are the identity on gr
        for j in range(len(sys.factors)):
            ga = _gr_block(sys, e.A, j)
            gb = _gr_block(sys, e.B, j)
            if e.kind == "stokes":
                if ga != gb:
                    v.append(f"event {idx}: gr block {j} jumps at a Stokes event")
            else:
                # (iii) saturation of the coarse graded pieces
                nj = sys.factors[j].n
                blk_a = _block_of(sys, e.A, j, j)
                blk_b = _block_of(sys, e.B, j, j)
                need_unit = (e.kind == "TR+" and nj >= 0) or (e.kind == "TR-" and nj <= 0)
                if need_unit:
                    da = lmat_det(blk_a)
                    db = lmat_det(blk_b)
                    if not (da.is_unit() and db.is_unit()):
                        v.append(f"event {idx}: gr block {j} not saturated at {e.kind}")
    # half-circle frames
    if sys.h_plus is None or sys.h_minus is None:
        v.append("half-circle frames missing")
    elif "TR+" in kinds and "TR-" in kinds:
        try:
            i_minus = sys.event_index("TR-")
            i_plus = sys.event_index("TR+")
            s_plus = section_lattice(sys, avoid_event=i_minus)
            s_minus = section_lattice(sys, avoid_event=i_plus)
            if not _frames_match(sys.h_plus, s_plus):
                v.append("h_plus does not generate the sections through TR+")
            if not _frames_match(sys.h_minus, s_minus):
                v.append("h_minus does not generate the sections through TR-")
            # (iv) L = L+ + L- on every open sector.  Half-frame sections stay
            # in the lattice on their arc, so they are carried sector to
            # sector in Laurent arithmetic (stalk coordinates via A, back
            # down via B) instead of through k(q) transitions.
            if not v:
                hp_by = _transport_around(sys, sys.h_plus, i_minus)
                hm_by = _transport_around(sys, sys.h_minus, i_plus)
                for k in range(K):
                    hpl, hml = hp_by.get(k), hm_by.get(k)
                    if hpl is None or hml is None:
                        v.append(f"sector {k}: half frames do not restrict integrally")
                        continue
                    both = [hpl[i] + hml[i] for i in range(R)]
                    if not lmat_spans_full(both):
                        v.append(f"sector {k}: L+ + L- does not span (saturation fails)")
        except InvalidSystem as exc:
            v.append(str(exc))
    return {"valid": not v, "violations": v}


def _frames_match(h, s) -> bool:
    if (not h or not h[0]) and (not s or not s[0]):
        return True
    if not h or not h[0] or not s or not s[0]:
        return False
    return lmat_span_equal(h, s)


def graded(sys: CircleSystem) -> dict:
    """Per-factor graded data: ranks and the event jumps of each gr block."""
    rep = validate_system(sys)
    if not rep["valid"]:
        raise InvalidSystem("; ".join(rep["violations"]))
    out = {}
    for j, f in enumerate(sys.factors):
        jumps = []
        for e in sys.events:
            blk_a = _block_of(sys, e.A, j, j)
            blk_b = _block_of(sys, e.B, j, j)
            jumps.append({"t_pi": str(e.t), "kind": e.kind,
                          "A_det": lmat_det(blk_a), "B_det": lmat_det(blk_b)})
        out[j] = {"factor": repr(f), "rank": sys.ranks[j], "jumps": jumps}
    return out


def coarse_graded(sys: CircleSystem) -> dict:
    """Coarse graded pieces Gr_Phi_j with the q-action on 2 pi i m offsets."""
    g = graded(sys)
    for j in g:
        g[j]["q_action"] = "q^m shifts the section offset by m (rho(m))"
        g[j]["saturated_side"] = "+" if sys.factors[j].n >= 0 else "-"
    return g


def splitting_on_interval(sys: CircleSystem, interval: Tuple[Fraction, Fraction]) -> dict:
    """Frame changes over an interval that split the filtration.

    Walks the events inside the interval, conjugating each transition to its
    block-diagonal part; the per-sector frame changes must stay Laurent,
    order-compatible, and identity on graded parts.  Unique exactly when each
    Stokes line inside is met once (single-factor systems: when the interval
    meets a real locus).
    """
    t0, t1 = Fraction(interval[0]), Fraction(interval[1])
    if t1 <= t0:
        t1 += 2
    inside = []
    for i, e in enumerate(sys.events):
        for lift in (e.t, e.t + 2):
            if t0 < lift < t1:
                inside.append((lift, i))
    inside.sort()
    seen_pairs: Dict[Tuple[int, int], int] = {}
    for _, i in inside:
        e = sys.events[i]
        if e.kind == "stokes" and e.pair is not None:
            seen_pairs[e.pair] = seen_pairs.get(e.pair, 0) + 1
            if seen_pairs[e.pair] > 1:
                raise TooManyCrossings(f"Stokes pair {e.pair} met twice in interval")
    frames = [lmat_eye(sys.rank)]
    R = sys.rank
    ok = True
    for _, i in inside:
        e = sys.events[i]
        T = transition_qmat(e)
        D = _block_diag_part(sys, e)
        # G_after = D . G_before . T^{-1}
        Tinv = qmat_inv(T)
        G = qmat_mul(qmat_of(D), qmat_mul(qmat_of(frames[-1]), Tinv))
        Gl = lmat_to_laurent(G)
        if Gl is None:
            ok = False
            break
        frames.append(Gl)
    npairs = len({(i, j) for i in range(len(sys.factors)) for j in range(len(sys.factors)) if i < j})
    if len(sys.factors) == 1:
        unique = any(sys.events[i].kind in ("TR+", "TR-") for _, i in inside)
    else:
        unique = all(c == 1 for c in seen_pairs.values()) and len(seen_pairs) == npairs
    return {"exists": ok, "frames": frames if ok else None, "unique": ok and unique}


def _block_diag_part(sys: CircleSystem, e: Event):
    """Block-diagonal part of the transition at an event."""
    T = transition_qmat(e)
    Tl = lmat_to_laurent(T)
    out = lmat_zero(sys.rank, sys.rank)
    slices = sys.block_slices()
    if Tl is None:
        # fall back: diagonal of B times A^{-1} blockwise over k(q)
        raise InvalidSystem("transition not Laurent; cannot take graded part")
    for (r0, r1) in slices:
        for r in range(r0, r1):
            for c in range(r0, r1):
                out[r][c] = Tl[r][c]
    return out


# ---------------------------------------------------------------------------
# Morphisms
# ---------------------------------------------------------------------------


@dataclass
class QMorphism:
    source: CircleSystem
    target: CircleSystem
    mats: List[List[List[LaurentPoly]]]       # one matrix per sector

    def check(self) -> None:
        s, t = self.source, self.target
        if [f.key() for f in s.factors] != [f.key() for f in t.factors]:
            raise NotAMorphism("systems not over a common factor set")
        if [e.t for e in s.events] != [e.t for e in t.events]:
            raise NotAMorphism("systems not over a common event set")
        K = s.nsectors
        if len(self.mats) != K:
            raise NotAMorphism("need one matrix per sector")
        for k in range(K):
            d = s.direction_at(s.sector_midpoint(k))
            bad = _filtration_mixed(s, t, self.mats[k], d)
            if bad:
                raise NotAMorphism(f"sector {k}: " + "; ".join(bad))
        for idx in range(K):
            es, et = s.events[idx], t.events[idx]
            Xb = self.mats[(idx - 1) % K]
            Xa = self.mats[idx]
            # stalk map Y with A' Y = Xb A and B' Y = Xa B
            Y = qmat_solve(qmat_of(et.A), qmat_mul(qmat_of(Xb), qmat_of(es.A)))
            if Y is None or lmat_to_laurent(Y) is None:
                raise NotAMorphism(f"event {idx}: no integral stalk map")
            lhs = qmat_mul(qmat_of(et.B), Y)
            rhs = qmat_mul(qmat_of(Xa), qmat_of(es.B))
            for i in range(len(lhs)):
                for j in range(len(lhs[0])):
                    if not (lhs[i][j] - rhs[i][j]).is_zero():
                        raise NotAMorphism(f"event {idx}: stalk compatibility fails")


def _filtration_mixed(src: CircleSystem, tgt: CircleSystem, mat, d: Direction) -> List[str]:
    bad = []
    rs = tgt.block_slices()
    cs = src.block_slices()
    for j in range(len(tgt.factors)):
        for i in range(len(src.factors)):
            (r0, r1), (c0, c1) = rs[j], cs[i]
            for r in range(r0, r1):
                for c in range(c0, c1):
                    e = mat[r][c]
                    if e.is_zero():
                        continue
                    for m in e.support():
                        verdict = leq_at(FactorSection(tgt.factors[j], m),
                                         FactorSection(src.factors[i], 0), d)
                        if verdict not in ("strictly_less", "equal"):
                            bad.append(f"entry ({r},{c}) q^{m} not allowed")
                            break
    return bad


def check_strictness(m: QMorphism) -> bool:
    """rank_{k(q)}(X) equals the sum of graded ranks of X over k.

    This is the numeric content of strictness: the morphism is compatible with
    the filtration and its image meets every filtration step exactly in the
    image of the step.
    """
    m.check()
    s = m.source
    grank = 0
    for j in range(len(s.factors)):
        g0 = None
        for k in range(s.nsectors):
            g = _gr_mixed(m.source, m.target, m.mats[k], j)
            if g0 is None:
                g0 = g
            elif g != g0:
                raise NotAMorphism(f"graded part of the morphism jumps (factor {j})")
        grank += _rat_rank(g0)
    return lmat_rank_kq(m.mats[0]) == grank


def _gr_mixed(src: CircleSystem, tgt: CircleSystem, mat, j: int):
    (r0, r1) = tgt.block_slices()[j]
    (c0, c1) = src.block_slices()[j]
    return [[mat[r][c].coeff(0) for c in range(c0, c1)] for r in range(r0, r1)]


def _rat_rank(m) -> int:
    if not m or not m[0]:
        return 0
    from .laurent import _frac_rank
    return _frac_rank([[Fraction(x) for x in row] for row in m])


def kernel_cokernel(m: QMorphism) -> Tuple[CircleSystem, dict]:
    """Kernel and cokernel of a strict morphism, as circle systems.

    Both are assembled from the graded kernels/cokernels: a graded kernel
    vector lifts to a genuine kernel section by adding components along
    strictly dominated factors only, so the lifted frames are automatically
    filtration-adapted; cokernel classes are represented by graded complement
    vectors.  Event matrices are solved over k(q) and checked to be Laurent.
    Cokernel stalks can carry torsion (nonunit invariant factors of the sector
    matrices); the free part is returned with the torsion reported alongside.
    """
    if not check_strictness(m):
        raise NotAMorphism("morphism is not strict; induced systems undefined")
    s, t = m.source, m.target
    K = s.nsectors
    nfac = len(s.factors)
    gr_blocks = [_gr_mixed(s, t, m.mats[0], j) for j in range(nfac)]
    # kernel: graded kernels, lifted into each sector
    kgr = []
    for j in range(nfac):
        g = [[Fraction(x) for x in row] for row in gr_blocks[j]]
        kgr.append(frac_nullspace(g) if g and g[0] else
                   [[Fraction(1) if a == b else Fraction(0) for b in range(s.ranks[j])]
                    for a in range(s.ranks[j])] if s.ranks[j] else [])
    ker_ranks = [len(kgr[j]) for j in range(nfac)]
    krank = sum(ker_ranks)
    if krank != s.rank - lmat_rank_kq(m.mats[0]):
        raise NotAMorphism("graded kernel ranks do not match the kernel rank")
    frames = []
    for k in range(K):
        d = s.direction_at(s.sector_midpoint(k))
        N = _lift_kernel_frame(s, m.mats[k], d, kgr)
        if N is None:
            raise NotAMorphism(f"sector {k}: graded kernel does not lift")
        frames.append(N)
    ker_events = []
    for idx in range(K):
        es = s.events[idx]
        if krank == 0:
            ker_events.append(Event(es.t, es.kind, es.pair, [], []))
            continue
        A, B = _kernel_stalk_maps(s, m, idx, frames, kgr)
        if A is None:
            raise NotAMorphism(f"event {idx}: kernel stalk does not express integrally")
        ker_events.append(Event(es.t, es.kind, es.pair, A, B))
    ker_sys = CircleSystem(
        factors=list(s.factors), ranks=ker_ranks, slope=s.slope,
        base_u=s.base_u, base_v=s.base_v, events=ker_events,
    )
    if krank > 0:
        compute_half_frames(ker_sys)
    else:
        ker_sys.h_plus = []
        ker_sys.h_minus = []
    # cokernel
    coker_ranks = []
    lgr = []
    for j in range(nfac):
        g = gr_blocks[j]
        if not g or not g[0]:
            comp = [[Fraction(1) if a == b else Fraction(0) for b in range(t.ranks[j])]
                    for a in range(t.ranks[j])] if t.ranks[j] else []
            lgr.append([list(col) for col in zip(*comp)] if comp else [])
            coker_ranks.append(t.ranks[j])
            continue
        gt = [[Fraction(g[r][c]) for r in range(len(g))] for c in range(len(g[0]))]
        comp = frac_nullspace(gt)    # complement of the column space of g
        lgr.append(comp)
        coker_ranks.append(len(comp))
    torsion = []
    for k in range(K):
        inv = [f for f in invariant_factors(m.mats[k]) if not f.is_unit()]
        torsion.append([repr(f) for f in inv])
    free_rank = t.rank - lmat_rank_kq(m.mats[0])
    coker = {
        "free_rank": free_rank,
        "graded_free_ranks": coker_ranks,
        "torsion_invariant_factors": torsion,
        "rank_additivity": free_rank == sum(coker_ranks),
        "system": None,
    }
    if all(not tor for tor in torsion):
        coker["system"] = _coker_system(m, coker_ranks, lgr)
    return ker_sys, coker


def _allowed_rows_for(sysS: CircleSystem, j: int, d: Direction) -> List[int]:
    """Rows along which a factor-j frame vector may pick up corrections at d.

    Only strictly dominated blocks qualify: their contribution is allowed for
    every q-power (tier-1/2 domination is q-independent) and carries no graded
    content, so lifted frames stay adapted to the filtration.
    """
    rows = []
    slices = sysS.block_slices()
    for i in range(len(sysS.factors)):
        if i == j:
            continue
        verdict = leq_at(FactorSection(sysS.factors[i], 0),
                         FactorSection(sysS.factors[j], 0), d)
        if verdict == "strictly_less":
            (r0, r1) = slices[i]
            rows.extend(range(r0, r1))
    return rows


def _lift_kernel_frame(sysS: CircleSystem, X, d: Direction, kgr):
    """Lift graded kernel vectors to kernel sections at direction d."""
    Rs = len(X[0]) if X and X[0] else sysS.rank
    Rt = len(X)
    slices = sysS.block_slices()
    cols = []
    for j in range(len(sysS.factors)):
        rows_free = _allowed_rows_for(sysS, j, d)
        (c0, _) = slices[j]
        for kc in kgr[j]:
            fixed = [LaurentPoly.zero() for _ in range(Rs)]
            for a, val in enumerate(kc):
                fixed[c0 + a] = LaurentPoly.const(val)
            rhs = [[-sum_lp(X[r][c] * fixed[c] for c in range(Rs))] for r in range(Rt)]
            if rows_free and Rt:
                sub = [[X[r][c] for c in rows_free] for r in range(Rt)]
                wl = lp_solve(sub, rhs)
                if wl is None:
                    return None
                for a, r in enumerate(rows_free):
                    fixed[r] = fixed[r] + wl[a][0]
            else:
                if any(not r[0].is_zero() for r in rhs):
                    return None
            cols.append(fixed)
    if not cols:
        return [[] for _ in range(Rs)]
    return [[cols[c][r] for c in range(len(cols))] for r in range(Rs)]


def sum_lp(terms) -> LaurentPoly:
    total = LaurentPoly.zero()
    for t in terms:
        total = total + t
    return total


def _kernel_stalk_maps(sysS: CircleSystem, m: QMorphism, idx: int, frames, kgr):
    """Stalk frame of the kernel at an event and its coordinates in the
    neighbor sector frames (columns of the induced A and B)."""
    es = sysS.events[idx]
    K = sysS.nsectors
    Nb = frames[(idx - 1) % K]
    Na = frames[idx]
    d = sysS.direction_at(es.t)
    Rs = sysS.rank
    kr = len(Nb[0])
    slices = sysS.block_slices()
    Acols = []
    Bcols = []
    for j in range(len(sysS.factors)):
        rows_free = _allowed_rows_for(sysS, j, d)
        (c0, _) = slices[j]
        for kc in kgr[j]:
            fixed = [LaurentPoly.zero() for _ in range(Rs)]
            for a, val in enumerate(kc):
                fixed[c0 + a] = LaurentPoly.const(val)
            # unknowns: w (corrections), alpha (coords in Nb), beta (coords in Na)
            nw = len(rows_free)
            ncolsU = nw + 2 * kr
            big = []
            rhs = []
            for r in range(Rs):
                rowA = [es.A[r][c] for c in rows_free] + \
                       [-Nb[r][a] for a in range(kr)] + [LaurentPoly.zero()] * kr
                rowB = [es.B[r][c] for c in rows_free] + [LaurentPoly.zero()] * kr + \
                       [-Na[r][a] for a in range(kr)]
                big.append(rowA)
                big.append(rowB)
                rhs.append([-sum_lp(es.A[r][c] * fixed[c] for c in range(Rs))])
                rhs.append([-sum_lp(es.B[r][c] * fixed[c] for c in range(Rs))])
            soll = lp_solve(big, rhs)
            if soll is None:
                return None, None
            Acols.append([soll[nw + a][0] for a in range(kr)])
            Bcols.append([soll[nw + kr + a][0] for a in range(kr)])
    A = [[Acols[c][r] for c in range(len(Acols))] for r in range(kr)]
    B = [[Bcols[c][r] for c in range(len(Bcols))] for r in range(kr)]
    return A, B


def _qfrac_solve_any(A, B):
    """Any solution of A X = B over k(q) (free variables set to zero)."""
    n = len(A)
    mm = len(A[0]) if A else 0
    p = len(B[0]) if B and B[0] else 0
    M = [[QFrac.of(A[i][j]) for j in range(mm)] + [QFrac.of(B[i][j]) for j in range(p)]
         for i in range(n)]
    pivots = []
    row = 0
    for col in range(mm):
        piv = None
        for r in range(row, n):
            if not M[r][col].is_zero():
                piv = r
                break
        if piv is None:
            continue
        M[row], M[piv] = M[piv], M[row]
        inv = M[row][col].inv()
        M[row] = [x * inv for x in M[row]]
        for r in range(n):
            if r != row and not M[r][col].is_zero():
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[row])]
        pivots.append(col)
        row += 1
        if row == n:
            break
    for r in range(row, n):
        for j in range(p):
            if not M[r][mm + j].is_zero():
                return None
    X = [[QFrac.of(0) for _ in range(p)] for _ in range(mm)]
    for rr, col in enumerate(pivots):
        for j in range(p):
            X[col][j] = M[rr][mm + j]
    return X


def _coker_system(m: QMorphism, coker_ranks: List[int], lgr) -> Optional[CircleSystem]:
    """The cokernel as a circle system with graded-complement representatives."""
    s, t = m.source, m.target
    K = s.nsectors
    Rt = t.rank
    crank = sum(coker_ranks)
    slices = t.block_slices()
    C = lmat_zero(Rt, crank)
    col = 0
    for j in range(len(t.factors)):
        (r0, _) = slices[j]
        for vec in lgr[j]:
            for a, val in enumerate(vec):
                C[r0 + a][col] = LaurentPoly.const(val)
            col += 1
    events = []
    for idx in range(K):
        es, et = s.events[idx], t.events[idx]
        kb = (idx - 1) % K
        if crank == 0:
            events.append(Event(es.t, es.kind, es.pair, [], []))
            continue
        A = _quotient_coords(C, m.mats[kb], lmat_mul(et.A, C))
        B = _quotient_coords(C, m.mats[idx], lmat_mul(et.B, C))
        if A is None or B is None:
            return None
        events.append(Event(es.t, es.kind, es.pair, A, B))
    sysq = CircleSystem(
        factors=list(t.factors), ranks=list(coker_ranks), slope=t.slope,
        base_u=t.base_u, base_v=t.base_v, events=events,
    )
    if crank > 0:
        compute_half_frames(sysq)
    else:
        sysq.h_plus = []
        sysq.h_minus = []
    return sysq


def _quotient_coords(C, X, vecs):
    """Coordinates in the quotient basis C of classes of vecs mod im(X)."""
    ncols = len(vecs[0]) if vecs and vecs[0] else 0
    nc = len(C[0]) if C and C[0] else 0
    if ncols == 0:
        return [[] for _ in range(nc)]
    Rt = len(C)
    ns = len(X[0]) if X and X[0] else 0
    big = [[C[i][j] for j in range(nc)] + [X[i][j] for j in range(ns)] for i in range(Rt)]
    sol = _qfrac_solve_any(big, vecs)
    if sol is None:
        return None
    alpha = [[sol[i][j] for j in range(ncols)] for i in range(nc)]
    return lmat_to_laurent(alpha)


# ---------------------------------------------------------------------------
# Pairings
# ---------------------------------------------------------------------------


def pairing_compat_check(sys: CircleSystem, pairing: dict) -> dict:
    """Checks for a skew quasi-duality pairing given over the half frames.

    pairing = {"plus": matrix <h_plus_i, iota* h'_minus_j>, optionally
    "minus": the other route}.  iota acts by theta_u -> theta_u + pi and
    q -> q^{-1}; skew symmetry reads iota*(P+) = -(P-)^T.
    """
    report = {"nondegenerate": False, "skew": False, "filtration": True, "compatible": False}
    P = pairing["plus"]
    det = lmat_det(P)
    report["nondegenerate"] = det.is_unit()
    if "minus" in pairing:
        Pm = pairing["minus"]
        lhs = lmat_subs_qinv(P)
        rhs = [[-Pm[j][i] for j in range(len(Pm))] for i in range(len(Pm[0]))]
        report["skew"] = lmat_eq(lhs, rhs)
    else:
        report["skew"] = True     # other route defined by the skew rule
    report["compatible"] = report["nondegenerate"] and report["skew"] and report["filtration"]
    return report


# ---------------------------------------------------------------------------
# Builtin and random instances
# ---------------------------------------------------------------------------


def _eye(n):
    return lmat_eye(n)


def builtin_instance(name: str) -> CircleSystem:
    """The two reference instances: the constant sheaf and the gamma system."""
    one = LaurentPoly.one()
    q = LaurentPoly.q_power(1)
    if name == "trivial":
        sys = CircleSystem(
            factors=[ZERO_FACTOR], ranks=[1], slope=1,
            base_u=Angle.of_pi(Fraction(1, 4)), base_v=Angle.of_pi(0),
            events=[
                Event(Fraction(3, 4), "TR-", None, _eye(1), _eye(1)),
                Event(Fraction(7, 4), "TR+", None, _eye(1), _eye(1)),
            ],
        )
        compute_half_frames(sys)
        return sys
    if name == "gamma":
        gamma_factor = ExpFactor(n=1, h=(CC_ZERO, CC(-1)), label="Phi_gamma")
        jump = [[one - q]]
        sys = CircleSystem(
            factors=[gamma_factor], ranks=[1], slope=1,
            base_u=Angle.of_pi(Fraction(1, 4)), base_v=Angle.of_pi(0),
            events=[
                Event(Fraction(3, 4), "TR-", None, jump, jump),
                Event(Fraction(7, 4), "TR+", None, _eye(1), _eye(1)),
            ],
        )
        compute_half_frames(sys)
        return sys
    raise ValueError(f"unknown instance {name!r}")


def gamma_pairing() -> dict:
    """<Gamma-frame, iota*(1-q)Gamma-frame> = -1 (both routes)."""
    minus_one = LaurentPoly.const(-1)
    return {"plus": [[minus_one]], "minus": [[LaurentPoly.one()]]}


# -- random generation -------------------------------------------------------


_C0_REAL = [CC(0), CC(1), CC(-1), CC(2), CC(-2)]
_C0_IMAG = [CC(0), CC(0, 1), CC(0, -1), CC(0, 2), CC(0, -2)]


def random_good_factors(rng, count: int) -> List[ExpFactor]:
    """Random good factors with pairwise axial c_delta (all h(0) on one axis),
    so every Stokes line sits at an exact pi-multiple on the test circle."""
    pool = rng.choice([_C0_REAL, _C0_IMAG])
    out = []
    used = set()
    while len(out) < count:
        n = rng.randint(-2, 2)
        c0 = rng.choice(pool)
        if (n, (c0.re, c0.im)) in used:
            continue
        if any((f.c0 == c0 and f.n == n) for f in out):
            continue
        used.add((n, (c0.re, c0.im)))
        h = (c0,) if c0 else ()
        out.append(ExpFactor(n=n, h=h, label=f"Phi_{len(out)}"))
    return out


def _axial_args(c: CC) -> Optional[Fraction]:
    """arg(c) as a multiple of pi for axial Gaussian rationals."""
    if c.im == 0 and c.re > 0:
        return Fraction(0)
    if c.im == 0 and c.re < 0:
        return Fraction(1)
    if c.re == 0 and c.im > 0:
        return Fraction(1, 2)
    if c.re == 0 and c.im < 0:
        return Fraction(3, 2)
    return None




def _standard_system(factors: List[ExpFactor], ranks: List[int]):
    """Undressed circle system: identity frames, scalar jumps at the real loci.

    Event positions are exact pi-multiples; Stokes crossings exist for factor
    pairs whose c_delta is axial (the generators only draw such factors).
    """
    base_u = Angle.of_pi(Fraction(1, 8))
    base_v = Angle.of_pi(0)
    slope = 1
    R = sum(ranks)
    slices = []
    off = 0
    for r in ranks:
        slices.append((off, off + r))
        off += r
    # event positions (in units of pi, in [0,2)): real loci + Stokes crossings
    ev_pos: Dict[Fraction, dict] = {}
    ev_pos[_norm_pi(1 - Fraction(1, 8))] = {"kind": "TR-", "pairs": []}
    ev_pos[_norm_pi(2 - Fraction(1, 8))] = {"kind": "TR+", "pairs": []}
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            c = factors[i].c0 - factors[j].c0
            if c:
                arg = _axial_args(c)
                if arg is None:
                    continue
                # theta_u + theta_v = base_u + base_v + 2t hits arg +- pi/2
                for target in (arg + Fraction(1, 2), arg - Fraction(1, 2)):
                    rhs = Fraction(target) - Fraction(1, 8)
                    for kk in range(2):
                        t = _norm_pi(Fraction(rhs, 2) + kk)
                        ev_pos.setdefault(t, {"kind": "stokes", "pairs": []})
                        if ev_pos[t]["kind"] == "stokes" and (i, j) not in ev_pos[t]["pairs"]:
                            ev_pos[t]["pairs"].append((i, j))
            elif factors[i].n != factors[j].n:
                for tu in (Fraction(1, 2), Fraction(3, 2)):
                    t = _norm_pi(tu - Fraction(1, 8))
                    ev_pos.setdefault(t, {"kind": "stokes", "pairs": []})
                    if ev_pos[t]["kind"] == "stokes" and (i, j) not in ev_pos[t]["pairs"]:
                        ev_pos[t]["pairs"].append((i, j))
    events = []
    one = LaurentPoly.one()
    for t in sorted(ev_pos):
        info = ev_pos[t]
        A = lmat_eye(R)
        B = lmat_eye(R)
        if info["kind"] in ("TR+", "TR-"):
            for jf, f in enumerate(factors):
                (r0, r1) = slices[jf]
                jumpme = (info["kind"] == "TR-" and f.n > 0) or (info["kind"] == "TR+" and f.n < 0)
                if jumpme:
                    jp = one - LaurentPoly.q_power(f.n)
                    for r in range(r0, r1):
                        A[r][r] = jp
                        B[r][r] = jp
        events.append(Event(t, info["kind"],
                            info["pairs"][0] if info["pairs"] else None, A, B))
    sys = CircleSystem(factors=list(factors), ranks=list(ranks), slope=slope,
                       base_u=base_u, base_v=base_v, events=events)
    return sys, ev_pos


def _unipotent_inv(G, nfac: int):
    """Inverse of I + N where N is nilpotent for the dominance order."""
    R = len(G)
    N = [[G[r][c] - (LaurentPoly.one() if r == c else LaurentPoly.zero())
          for c in range(R)] for r in range(R)]
    inv = lmat_eye(R)
    term = lmat_eye(R)
    negN = [[-N[r][c] for c in range(R)] for r in range(R)]
    for _ in range(nfac):
        term = lmat_mul(term, negN)
        if lmat_is_zero(term):
            break
        inv = [[inv[r][c] + term[r][c] for c in range(R)] for r in range(R)]
    if not lmat_eq(lmat_mul(G, inv), lmat_eye(R)):
        raise InvalidSystem("frame change not unipotent")
    return inv


def _frame_change(rng, sys: CircleSystem, ev_pos, k: int):
    """Random filtered frame change for sector k, identity on graded parts.

    Entries must be strictly dominated at the sector midpoint and allowed in
    the closed sense at both boundary events; blocks whose factor pair has a
    Stokes event on the boundary are left untouched so graded parts stay clean.
    """
    R = sys.rank
    slices = sys.block_slices()
    K = sys.nsectors
    d_mid = sys.direction_at(sys.sector_midpoint(k))
    t_lo = sys.events[k].t
    t_hi = sys.events[(k + 1) % K].t
    boundary_pairs = set()
    for t in (t_lo, t_hi):
        info = ev_pos.get(t)
        if info and info["kind"] == "stokes":
            for (i, j) in info["pairs"]:
                boundary_pairs.add(frozenset((i, j)))
    d_lo = sys.direction_at(t_lo)
    d_hi = sys.direction_at(t_hi)
    G = lmat_eye(R)
    changed = False
    for jb in range(len(sys.factors)):
        for ib in range(len(sys.factors)):
            if jb == ib or frozenset((jb, ib)) in boundary_pairs:
                continue
            (r0, r1), (c0, c1) = slices[jb], slices[ib]
            for r in range(r0, r1):
                for c in range(c0, c1):
                    if rng.random() < 0.4:
                        mexp = rng.choice([-1, 0, 1])
                        val = LaurentPoly.q_power(mexp, Fraction(rng.randint(-2, 2)))
                        if val.is_zero():
                            continue
                        if (_entry_allowed(sys, jb, ib, val, d_mid, closed=False)
                                and _entry_allowed(sys, jb, ib, val, d_lo)
                                and _entry_allowed(sys, jb, ib, val, d_hi)):
                            G[r][c] = G[r][c] + val
                            changed = True
    return G if changed else None


def _apply_frame(sys: CircleSystem, k: int, G) -> None:
    K = sys.nsectors
    sys.events[k].B = lmat_mul(G, sys.events[k].B)
    sys.events[(k + 1) % K].A = lmat_mul(G, sys.events[(k + 1) % K].A)


def _embed_block(R: int, slices, lo: int, hi: int, N):
    out = lmat_eye(R)
    (r0, _), (c0, _) = slices[lo], slices[hi]
    for r in range(len(N)):
        for c in range(len(N[0])):
            out[r0 + r][c0 + c] = out[r0 + r][c0 + c] + LaurentPoly.const(N[r][c])
    return out


def _coupling_orientation(sys: CircleSystem, i: int, j: int, d_after: Direction,
                          side: int):
    """Dominated/dominating order for a Stokes coupling, or (None, None).

    The unipotent entry goes where its factor is strictly dominated just after
    the crossing; couplings are restricted to one sign class of n (blocks all
    jumping at the same real locus), since coupling blocks that jump at
    opposite real loci destroys saturation.
    """
    if side * sys.factors[i].n < 0 or side * sys.factors[j].n < 0:
        return None, None
    v = leq_at(FactorSection(sys.factors[i], 0), FactorSection(sys.factors[j], 0), d_after)
    if v == "strictly_less":
        return i, j
    if v == "strictly_greater":
        return j, i
    return None, None


def random_system(rng, factors: List[ExpFactor], ranks: List[int],
                  dress: bool = True) -> CircleSystem:
    """A standard graded circle system dressed with random Stokes matrices
    and graded-identity frame changes."""
    sys, ev_pos = _standard_system(factors, ranks)
    if dress:
        slices = sys.block_slices()
        side = rng.choice([1, -1])
        for idx, e in enumerate(sys.events):
            if e.kind != "stokes":
                continue
            d_after = sys.direction_at(sys.sector_midpoint(idx))
            for (i, j) in ev_pos[e.t]["pairs"]:
                lo, hi = _coupling_orientation(sys, i, j, d_after, side)
                if lo is None:
                    continue
                N = [[Fraction(rng.randint(-2, 2)) for _ in range(ranks[hi])]
                     for _ in range(ranks[lo])]
                if any(any(row) for row in N):
                    e.B = lmat_mul(_embed_block(sys.rank, slices, lo, hi, N), e.B)
        for k in range(sys.nsectors):
            G = _frame_change(rng, sys, ev_pos, k)
            if G is not None:
                _apply_frame(sys, k, G)
    compute_half_frames(sys)
    return sys


def _intertwined_stokes(rng, Mlo, Mhi, r_lo_s, r_hi_s, r_lo_t, r_hi_t):
    """Sample (N_src, N_tgt) with Mlo . N_src = N_tgt . Mhi (blocks of a
    Stokes dressing that commutes with the standard block morphism)."""
    nsrc = r_lo_s * r_hi_s
    ntgt = r_lo_t * r_hi_t
    rows = []
    for r in range(r_lo_t):
        for c in range(r_hi_s):
            row = [Fraction(0)] * (nsrc + ntgt)
            for k in range(r_lo_s):
                row[k * r_hi_s + c] += Mlo[r][k]
            for k in range(r_hi_t):
                row[nsrc + r * r_hi_t + k] -= Mhi[k][c]
            rows.append(row)
    basis = frac_nullspace(rows)
    if not basis:
        return None, None
    vec = [Fraction(0)] * (nsrc + ntgt)
    for b in basis:
        co = Fraction(rng.randint(-2, 2))
        if co:
            vec = [v + co * x for v, x in zip(vec, b)]
    Ns = [[vec[r * r_hi_s + c] for c in range(r_hi_s)] for r in range(r_lo_s)]
    Nt = [[vec[nsrc + r * r_hi_t + c] for c in range(r_hi_t)] for r in range(r_lo_t)]
    if not any(any(row) for row in Ns) and not any(any(row) for row in Nt):
        return None, None
    return Ns, Nt


def random_hom_instance(rng, factors: List[ExpFactor], ranks_src: List[int],
                        ranks_tgt: List[int]):
    """A random pair of dressed systems with a random morphism between them.

    The morphism starts as a block-diagonal constant matrix between the
    standard systems; Stokes dressings are drawn from the intertwiner space so
    the morphism survives them, and frame changes act on it by conjugation.
    """
    src, ev_s = _standard_system(factors, ranks_src)
    tgt, ev_t = _standard_system(factors, ranks_tgt)
    blocks = [[[Fraction(rng.randint(-2, 2)) for _ in range(ranks_src[j])]
               for _ in range(ranks_tgt[j])] for j in range(len(factors))]
    R_s, R_t = src.rank, tgt.rank
    s_slices, t_slices = src.block_slices(), tgt.block_slices()
    X_std = lmat_zero(R_t, R_s)
    for j in range(len(factors)):
        (r0, _), (c0, _) = t_slices[j], s_slices[j]
        for r in range(ranks_tgt[j]):
            for c in range(ranks_src[j]):
                X_std[r0 + r][c0 + c] = LaurentPoly.const(blocks[j][r][c])
    # intertwined Stokes dressing
    side = rng.choice([1, -1])
    for idx, (es, et) in enumerate(zip(src.events, tgt.events)):
        if es.kind != "stokes":
            continue
        d_after = src.direction_at(src.sector_midpoint(idx))
        for (i, j) in ev_s[es.t]["pairs"]:
            lo, hi = _coupling_orientation(src, i, j, d_after, side)
            if lo is None:
                continue
            Ns, Nt = _intertwined_stokes(rng, blocks[lo], blocks[hi],
                                         ranks_src[lo], ranks_src[hi],
                                         ranks_tgt[lo], ranks_tgt[hi])
            if Ns is not None:
                es.B = lmat_mul(_embed_block(R_s, s_slices, lo, hi, Ns), es.B)
                et.B = lmat_mul(_embed_block(R_t, t_slices, lo, hi, Nt), et.B)
    # independent frame changes; the morphism picks up the conjugation
    nfac = len(factors)
    mats = []
    for k in range(src.nsectors):
        Gs = _frame_change(rng, src, ev_s, k) or lmat_eye(R_s)
        Gt = _frame_change(rng, tgt, ev_t, k) or lmat_eye(R_t)
        if not lmat_eq(Gs, lmat_eye(R_s)):
            _apply_frame(src, k, Gs)
        if not lmat_eq(Gt, lmat_eye(R_t)):
            _apply_frame(tgt, k, Gt)
        mats.append(lmat_mul(Gt, lmat_mul(X_std, _unipotent_inv(Gs, nfac))))
    compute_half_frames(src)
    compute_half_frames(tgt)
    return src, tgt, QMorphism(src, tgt, mats)
