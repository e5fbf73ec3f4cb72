"""Point parametrization on quadratic twists and bounded-height enumeration.

Every rational point with y != 0 on E_d : d y^2 z = F~(x, z) decomposes
uniquely as (d0, d1, y, z, x) with d = d0 d1, d0 y^2 = F~(x, d1 z^2) and
gcd(x y, d1 z) = 1.  The enumeration loops over (y, z, d1) and walks x along
the theta(y^2) residue classes of F mod y^2; an independent brute-force scan
over reduced x-coordinates provides the oracle for report equality.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .arith import factorize, roots_mod, sieve_squarefree, squarefree_part
from .curve import CurveModel, f_tilde
from .errors import DomainError, ResourceBudgetError
from .heights import (HeightGap, ProjPoint, _height_context, canonical_height,
                      is_torsion, naive_height_x)


@dataclass(frozen=True, order=True)
class TwistPoint:
    """The unique (d0, d1, y, z, x) coordinates of a twist point."""

    d0: int
    d1: int
    y: int
    z: int
    x: int

    @property
    def d(self) -> int:
        return self.d0 * self.d1

    def validate(self, curve: CurveModel) -> None:
        if self.d0 < 1 or self.d1 < 1 or self.z < 1 or self.y == 0:
            raise DomainError("d0, d1, z must be positive and y nonzero")
        if math.gcd(abs(self.x * self.y), self.d1 * self.z) != 1:
            raise DomainError("gcd(x y, d1 z) = 1 violated")
        if self.d0 * self.y**2 != f_tilde(curve, self.x, self.d1 * self.z**2):
            raise DomainError("d0 y^2 = F~(x, d1 z^2) violated")
        if math.gcd(self.d0, self.d1) != 1 or not (
            factorize(self.d0).is_squarefree() and factorize(self.d1).is_squarefree()
        ):
            raise DomainError("d = d0 d1 must be squarefree")

    def mirror(self) -> "TwistPoint":
        return TwistPoint(self.d0, self.d1, -self.y, self.z, self.x)


def decompose(curve: CurveModel, d: int, point: Tuple[int, int, int]) -> TwistPoint:
    """Invert the parametrization: primitive (x0, y, z0) with y >= 1 and
    d y^2 z0 = F~(x0, z0) maps to its unique TwistPoint."""
    x0, y, z0 = point
    if y < 1 or z0 < 1:
        raise DomainError("decompose expects y >= 1 and z0 >= 1")
    if math.gcd(math.gcd(abs(x0), y), z0) != 1:
        raise DomainError("(x0, y, z0) must be primitive")
    if d * y * y * z0 != f_tilde(curve, x0, z0):
        raise DomainError("point is not on the twist")
    G = math.gcd(abs(x0), z0)
    if G == 0:
        raise DomainError("x0 = z0 = 0")
    z = z0 // (G * G)
    if z < 1 or z * G * G != z0 or G % z != 0:
        raise DomainError("no ratiopt decomposition (input not primitive?)")
    d1 = G // z
    x = x0 // G
    if d % d1 != 0:
        raise DomainError("d1 does not divide d")
    tp = TwistPoint(d0=d // d1, d1=d1, y=y, z=z, x=x)
    tp.validate(curve)
    return tp


def recompose(curve: CurveModel, tp: TwistPoint) -> Tuple[int, int, int, int]:
    """(d, x0, y, z0) of a TwistPoint; exact inverse of decompose."""
    tp.validate(curve)
    return (tp.d, tp.d1 * tp.x * tp.z, tp.y, tp.d1**2 * tp.z**3)


def twist_point_to_proj(tp: TwistPoint) -> ProjPoint:
    x0 = tp.d1 * tp.x * tp.z
    z0 = tp.d1**2 * tp.z**3
    g = math.gcd(math.gcd(abs(x0), abs(tp.y)), z0)
    return ProjPoint(x0 // g, tp.y // g, z0 // g)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class CountReport:
    """Everything a counting run produces; equality is field-by-field exact."""

    curve_A: int
    curve_B: int
    X: int
    alpha: float
    gap: HeightGap
    per_d: Dict[int, List[TwistPoint]]
    heights: Dict[int, List[float]]
    torsion_extra: Dict[int, int]
    N_star: int
    N_dagger: int
    N: int
    eta: Dict[int, float]
    elapsed: float = field(default=0.0, compare=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, CountReport) and (
            (self.curve_A, self.curve_B, self.X, self.alpha) ==
            (other.curve_A, other.curve_B, other.X, other.alpha)
            and self.per_d == other.per_d
            and self.heights == other.heights
            and self.torsion_extra == other.torsion_extra
            and (self.N_star, self.N_dagger, self.N) == (other.N_star, other.N_dagger, other.N)
            and self.eta == other.eta
        )

    def restrict(self, X_new: int) -> "CountReport":
        """The same run truncated to d <= X_new (X_new <= X)."""
        if X_new > self.X:
            raise DomainError("can only restrict to a smaller X")
        per_d = {d: v for d, v in self.per_d.items() if d <= X_new}
        heights = {d: self.heights[d] for d in per_d}
        torsion = {d: v for d, v in self.torsion_extra.items() if d <= X_new}
        return _finalize_report(self.curve_A, self.curve_B, X_new, self.alpha,
                                self.gap, per_d, heights, torsion, self.elapsed)

    def to_text(self) -> str:
        lines = [
            f"# curve A={self.curve_A} B={self.curve_B}",
            f"# X={self.X} alpha={self.alpha!r} h1={self.gap.h1!r} h2={self.gap.h2!r} "
            f"gap_source={self.gap.source}",
            f"# N={self.N} N_star={self.N_star} N_dagger={self.N_dagger}",
            "# d d0 d1 y z x hhat",
        ]
        for d in sorted(self.per_d):
            for tp, h in zip(self.per_d[d], self.heights[d]):
                lines.append(f"{d} {tp.d0} {tp.d1} {tp.y} {tp.z} {tp.x} {h!r}")
        for d in sorted(self.torsion_extra):
            lines.append(f"# torsion {d} {self.torsion_extra[d]}")
        for d in sorted(self.eta):
            lines.append(f"# eta {d} {self.eta[d]!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "CountReport":
        header: Dict[str, str] = {}
        per_d: Dict[int, List[TwistPoint]] = {}
        heights: Dict[int, List[float]] = {}
        torsion: Dict[int, int] = {}
        A = B = X = None
        alpha = h1 = h2 = None
        source = ""
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "curve":
                    A = int(parts[1].split("=")[1])
                    B = int(parts[2].split("=")[1])
                elif parts and parts[0].startswith("X="):
                    kv = dict(p.split("=", 1) for p in parts)
                    X = int(kv["X"])
                    alpha = float(kv["alpha"])
                    h1 = float(kv["h1"])
                    h2 = float(kv["h2"])
                    source = kv["gap_source"]
                elif parts and parts[0] == "torsion":
                    torsion[int(parts[1])] = int(parts[2])
                continue
            vals = line.split()
            d = int(vals[0])
            tp = TwistPoint(*map(int, vals[1:6]))
            per_d.setdefault(d, []).append(tp)
            heights.setdefault(d, []).append(float(vals[6]))
        gap = HeightGap(h1=h1, h2=h2, source=source)
        return _finalize_report(A, B, X, alpha, gap, per_d, heights, torsion, 0.0)


def _finalize_report(A, B, X, alpha, gap, per_d, heights, torsion, elapsed) -> CountReport:
    for d in per_d:
        order = sorted(range(len(per_d[d])), key=lambda i: per_d[d][i])
        per_d[d] = [per_d[d][i] for i in order]
        heights[d] = [heights[d][i] for i in order]
    n_star = sum(len(v) for v in per_d.values())
    n_dag = n_star + sum(torsion.values())
    eta = {d: math.exp(min(hs)) for d, hs in heights.items() if hs}
    return CountReport(curve_A=A, curve_B=B, X=X, alpha=alpha, gap=gap,
                       per_d=dict(sorted(per_d.items())),
                       heights={d: heights[d] for d in sorted(heights)},
                       torsion_extra=dict(sorted(torsion.items())),
                       N_star=n_star, N_dagger=n_dag, N=len(per_d), eta=eta,
                       elapsed=elapsed)


def eta(curve: CurveModel, d: int, points: Sequence[TwistPoint],
        tol: float = 1e-9) -> float:
    """exp(min hhat) over the nontorsion points found for d; +inf when none
    lie below the search bound (never asserted as rank 0)."""
    best = math.inf
    for tp in points:
        P = twist_point_to_proj(tp)
        if is_torsion(curve, d, P):
            continue
        best = min(best, canonical_height(curve, d, P, tol))
    return math.exp(best) if best < math.inf else math.inf


# ---------------------------------------------------------------------------
# the shared height filter (both counting routes must agree bit for bit)
# ---------------------------------------------------------------------------


def _passes_height(curve, d, P, alpha) -> Tuple[bool, float]:
    bound = (0.125 + alpha) * math.log(d)
    h = canonical_height(curve, d, P, tol=1e-9)
    if h <= bound - 1e-7:
        return True, h
    if h > bound + 1e-7:
        return False, h
    h = canonical_height(curve, d, P, tol=1e-12)
    return h <= bound + 1e-12, h


def _torsion_screen_cap(curve) -> float:
    """Rigorous cap on exp(h_x) of torsion points (from the explicit gap)."""
    ctx = _height_context(curve.A, curve.B)
    return math.exp(-2.0 * ctx.h1) + 1.0


def small_torsion_points(curve: CurveModel, X: int) -> Dict[int, int]:
    """d -> number of torsion points of order > 2 with d <= X (both signs).

    Torsion forces h_x <= -2 h1 (rigorous gap), so the reduced x-pair lives in
    a fixed box; for each coprime (xr, zr) with F~ > 0 exactly one squarefree
    d carries the corresponding point.
    """
    cap = int(_torsion_screen_cap(curve)) + 1
    out: Dict[int, int] = {}
    seen = set()
    for zr in range(1, cap + 1):
        for xr in range(-cap, cap + 1):
            if math.gcd(abs(xr), zr) != 1:
                continue
            w = f_tilde(curve, xr, zr)
            if w <= 0:
                continue
            d = squarefree_part(w * zr)
            if d > X:
                continue
            nu2 = Fraction(w, d * zr**3)
            num = math.isqrt(nu2.numerator)
            den = math.isqrt(nu2.denominator)
            if num * num != nu2.numerator or den * den != nu2.denominator:
                continue
            P = ProjPoint.from_affine(Fraction(xr, zr), Fraction(num, den))
            key = (d, P.x, abs(P.y), P.z)
            if key in seen:
                continue
            seen.add(key)
            if P.y != 0 and is_torsion(curve, d, P):
                out[d] = out.get(d, 0) + 2  # both signs of y
    return out


# ---------------------------------------------------------------------------
# enumeration over the (y, z, d1, x) ranges
# ---------------------------------------------------------------------------


def _expand_counts(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(group index, offset within group) for ragged expansion."""
    total = int(counts.sum())
    idx = np.repeat(np.arange(counts.size), counts)
    starts = np.cumsum(counts) - counts
    offs = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    return idx, offs


def enumerate_small_points(curve: CurveModel, X: int, alpha: float, gap: HeightGap,
                           budget_seconds: Optional[float] = None) -> CountReport:
    """All twist points with d <= X squarefree and exp hhat <= d^(1/8 + alpha).

    The naive-height box derived from the gap is only a superset filter; the
    canonical height decides membership exactly (ties at the boundary are
    included).  Both signs of y are reported.
    """
    if X < 2 or alpha <= 0:
        raise DomainError("X >= 2 and alpha > 0 required")
    t_start = time.time()
    C1 = gap.C1
    D1 = math.sqrt(curve.C0) * C1 * C1
    beta = 0.25 + 2 * alpha
    Mx = int(C1 * X**beta) + 1
    Y = int(D1 * X ** (4 * alpha)) + 1
    if curve.C0 * (Mx + 2) ** 3 >= 2**62:
        raise ResourceBudgetError("x-range would overflow int64 arithmetic")
    sf = sieve_squarefree(max(X, Mx))
    # unique t = d1 z^2 decomposition with d1 squarefree
    t_all = np.arange(Mx + 1, dtype=np.int64)
    z_of_t = np.ones(Mx + 1, dtype=np.int64)
    for zz in range(2, int(math.isqrt(Mx)) + 1):
        step = zz * zz
        z_of_t[step::step] = zz  # last write wins: largest square divisor
    d1_of_t = np.zeros(Mx + 1, dtype=np.int64)
    nz = t_all >= 1
    d1_of_t[nz] = t_all[nz] // (z_of_t[nz] * z_of_t[nz])
    valid_t = np.zeros(Mx + 1, dtype=bool)
    valid_t[1:] = sf[d1_of_t[1:]]
    # d1 of a valid t is squarefree by construction of the largest-square split
    per_d: Dict[int, List[TwistPoint]] = {}
    heights: Dict[int, List[float]] = {}
    tor_cap = _torsion_screen_cap(curve)
    Af, Bf = curve.A, curve.B
    eps = 1.0 + 1e-12
    for y in range(1, Y + 1):
        if budget_seconds is not None and time.time() - t_start > budget_seconds:
            report = _finalize_report(curve.A, curve.B, X, alpha, gap, per_d, heights,
                                      {}, time.time() - t_start)
            raise ResourceBudgetError(
                f"enumeration budget exhausted at y={y} of {Y}", partial=report)
        y2 = y * y
        roots = roots_mod(curve, factorize(y2)) if y > 1 else [0]
        if not roots:
            continue
        zcap = Y // y
        mask = valid_t & (z_of_t <= zcap)
        tv = t_all[mask]
        if tv.size == 0:
            continue
        if y > 1:
            tv = tv[np.gcd(tv, y) == 1]
            if tv.size == 0:
                continue
        d1v = d1_of_t[tv]
        zv = z_of_t[tv]
        # superset x-cap: F~(x, t) <= y^2 X / d1 within the global box
        lim = (y2 * X) / d1v.astype(np.float64) \
            + abs(Af) * float(Mx) * (tv.astype(np.float64) ** 2) \
            + abs(Bf) * (tv.astype(np.float64) ** 3)
        xmax = np.minimum(float(Mx), np.cbrt(np.maximum(lim, 0.0)) + 2.0)
        for rho in roots:
            c = (rho * tv) % y2
            kmin = np.ceil((-xmax - c) / y2).astype(np.int64)
            kmax = np.floor((xmax - c) / y2).astype(np.int64)
            counts = np.maximum(kmax - kmin + 1, 0)
            total = int(counts.sum())
            if total == 0:
                continue
            gi, offs = _expand_counts(counts)
            xs = c[gi] + (kmin[gi] + offs) * y2
            te = tv[gi]
            d1e = d1v[gi]
            ze = zv[gi]
            Fv = xs * xs * xs + Af * xs * te * te + Bf * te * te * te
            ok = Fv >= y2
            xs, te, d1e, ze, Fv = xs[ok], te[ok], d1e[ok], ze[ok], Fv[ok]
            if xs.size == 0:
                continue
            d0 = Fv // y2
            ok = (Fv % y2 == 0) & (d0 * d1e <= X) & sf[np.minimum(d0, X)] \
                & (np.gcd(d0, d1e) == 1) & (np.gcd(xs, d1e * ze) == 1)
            xs, te, d1e, ze, d0 = xs[ok], te[ok], d1e[ok], ze[ok], d0[ok]
            if xs.size == 0:
                continue
            dd = (d0 * d1e).astype(np.float64)
            box = C1 * dd**beta * eps
            ok = (np.abs(xs) <= box) & (te <= box) & (y * ze <= D1 * dd ** (4 * alpha) * eps)
            xs, te, d1e, ze, d0 = xs[ok], te[ok], d1e[ok], ze[ok], d0[ok]
            for x_, d1_, z_, d0_ in zip(xs.tolist(), d1e.tolist(), ze.tolist(), d0.tolist()):
                tp = TwistPoint(d0=d0_, d1=d1_, y=y, z=z_, x=x_)
                d = d0_ * d1_
                P = twist_point_to_proj(tp)
                if max(abs(P.x), P.z) <= tor_cap and is_torsion(curve, d, P):
                    continue
                keep, h = _passes_height(curve, d, P, alpha)
                if keep:
                    per_d.setdefault(d, []).extend([tp, tp.mirror()])
                    heights.setdefault(d, []).extend([h, h])
    torsion = {d: n for d, n in small_torsion_points(curve, X).items()}
    return _finalize_report(curve.A, curve.B, X, alpha, gap, per_d, heights,
                            torsion, time.time() - t_start)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

_SQ_MOD = {m: np.zeros(m, dtype=bool) for m in (64, 63, 65, 11)}
for _m, _tab in _SQ_MOD.items():
    for _r in range(_m):
        _tab[_r * _r % _m] = True


def _square_candidates(F: np.ndarray, mult: int) -> np.ndarray:
    """Quadratic-residue prescreen for F * mult being a perfect square; the
    product is formed modulo small table sizes only (no overflow)."""
    mask = F > 0
    for m, tab in _SQ_MOD.items():
        mask &= tab[(F % m) * (mult % m) % m]
    return mask


def brute_force_count(curve: CurveModel, X: int, alpha: float, gap: HeightGap) -> CountReport:
    """Independent oracle: scan reduced x-coordinate pairs directly (no
    ratiopt parametrization) and test that y is rational."""
    if X > 10**4:
        raise ResourceBudgetError("brute_force_count is cost-guarded to X <= 10^4")
    if X < 2 or alpha <= 0:
        raise DomainError("X >= 2 and alpha > 0 required")
    t_start = time.time()
    C1 = gap.C1
    beta = 0.25 + 2 * alpha
    sf = sieve_squarefree(X)
    tor_cap = _torsion_screen_cap(curve)
    per_d: Dict[int, List[TwistPoint]] = {}
    heights: Dict[int, List[float]] = {}
    for d in range(1, X + 1):
        if not sf[d]:
            continue
        H = int(C1 * d**beta) + 1
        for zr in range(1, H + 1):
            xs = np.arange(-H, H + 1, dtype=np.int64)
            xs = xs[np.gcd(xs, zr) == 1]
            Fv = xs * xs * xs + curve.A * xs * zr * zr + curve.B * zr**3
            cand = xs[_square_candidates(Fv, d * zr**3)]
            for xr in cand.tolist():
                wv = f_tilde(curve, xr, zr) * d * zr**3
                s = math.isqrt(wv)
                if s * s != wv:
                    continue
                nu = Fraction(s, d * zr**3)
                if nu == 0:
                    continue  # 2-torsion
                P = ProjPoint.from_affine(Fraction(xr, zr), nu)
                if max(abs(P.x), P.z) <= tor_cap and is_torsion(curve, d, P):
                    continue
                keep, h = _passes_height(curve, d, P, alpha)
                if not keep:
                    continue
                x0, y0, z0 = P.x, abs(P.y), P.z
                tp = decompose(curve, d, (x0, y0, z0))
                per_d.setdefault(d, []).extend([tp, tp.mirror()])
                heights.setdefault(d, []).extend([h, h])
    torsion = small_torsion_points(curve, X)
    return _finalize_report(curve.A, curve.B, X, alpha, gap, per_d, heights,
                            torsion, time.time() - t_start)


# ---------------------------------------------------------------------------
# the extremal family d = z F~(x, z)
# ---------------------------------------------------------------------------


def extremal_family(curve: CurveModel, X: int) -> List[Tuple[int, ProjPoint]]:
    """All squarefree d = z F~(x, z) <= X with x, z >= 1, with the witness
    point (z x : 1 : z^2); one entry per d (first witness wins)."""
    if X < 2:
        raise DomainError("X >= 2 required")
    found: Dict[int, ProjPoint] = {}
    for z in range(1, X + 1):
        if z * 1 > X and z > curve.C0 * 2:  # no d = z F~ <= X possible once minimal F~ z > X
            break
        xcap = int(np.cbrt(X / z + abs(curve.A) * (X / z) ** (1 / 3) * z * z
                           + abs(curve.B) * z**3)) + 2
        any_hit = False
        for x in range(1, xcap + 1):
            if math.gcd(x, z) != 1:
                continue
            w = f_tilde(curve, x, z)
            if w < 1:
                continue
            d = z * w
            if d > X:
                continue
            any_hit = True
            if d not in found and factorize(d).is_squarefree():
                found[d] = ProjPoint(z * x, 1, z * z)
        if not any_hit and z * z * z > X + abs(curve.A) * X + abs(curve.B):
            break
    out = sorted(found.items())
    for d, P in out:
        assert P.on_twist(curve, d)
    return out
