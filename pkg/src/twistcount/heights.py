"""Naive and canonical heights on quadratic twists d y^2 = F(x).

The canonical height is the limit (1/2) lim 4^{-n} h(x(2^n P)).  Evaluating
the limit with fully reduced big rationals is exponential in the target
precision (the iterates have ~4^n digits), so the limit is evaluated as a
telescoped series instead: the archimedean part of each increment is a float
computed from the normalized orbit, while the non-archimedean part (the gcd
extracted at each duplication step) is tracked exactly modulo powers of the
finitely many primes dividing the resultant of the duplication polynomials.
A literal big-integer iteration is also provided as an independent oracle for
moderate tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import gmpy2

from .arith import factorize
from .curve import CurveModel, f_tilde
from .errors import DomainError, ResourceBudgetError, TorsionPointError

MAZUR_TORSION_BOUND = 12


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjPoint:
    """Primitive projective point (x : y : z) on d y^2 z = F~(x, z)."""

    x: int
    y: int
    z: int

    def __post_init__(self):
        if (self.x, self.y, self.z) == (0, 0, 0):
            raise DomainError("(0:0:0) is not a point")
        if math.gcd(math.gcd(abs(self.x), abs(self.y)), abs(self.z)) != 1:
            raise DomainError("coordinates must be coprime")

    @property
    def is_infinity(self) -> bool:
        return self.z == 0

    def on_twist(self, curve: CurveModel, d: int) -> bool:
        return d * self.y**2 * self.z == f_tilde(curve, self.x, self.z)

    def negate(self) -> "ProjPoint":
        return ProjPoint(self.x, -self.y, self.z)

    def affine(self) -> Tuple[Fraction, Fraction]:
        if self.is_infinity:
            raise DomainError("point at infinity has no affine coordinates")
        return Fraction(self.x, self.z), Fraction(self.y, self.z)

    @staticmethod
    def from_affine(xi: Fraction, nu: Fraction) -> "ProjPoint":
        xi, nu = Fraction(xi), Fraction(nu)
        z = math.lcm(xi.denominator, nu.denominator)
        x = int(xi * z)
        y = int(nu * z)
        g = math.gcd(math.gcd(abs(x), abs(y)), z)
        return ProjPoint(x // g, y // g, z // g)


INFINITY = ProjPoint(0, 1, 0)


def validate_on_twist(curve: CurveModel, d: int, P: ProjPoint) -> None:
    if not P.on_twist(curve, d):
        raise DomainError(f"point {P} is not on the twist d={d} of ({curve.A}, {curve.B})")


def naive_height_x(P: ProjPoint) -> float:
    """h_x = log max(|x|, |z|) of the reduced x-coordinate pair; 0 at infinity."""
    if P.is_infinity:
        return 0.0
    g = math.gcd(abs(P.x), abs(P.z))
    return _log_abs(max(abs(P.x), abs(P.z)) // g)


def _log_abs(n) -> float:
    n = abs(int(n))
    if n == 0:
        raise DomainError("log of zero")
    if n.bit_length() <= 900:
        return math.log(n)
    shift = n.bit_length() - 64
    return math.log(n >> shift) + shift * math.log(2.0)


# ---------------------------------------------------------------------------
# exact group law on the twist (affine (xi, nu) with d nu^2 = F(xi))
# ---------------------------------------------------------------------------

Affine = Optional[Tuple[Fraction, Fraction]]  # None is the point at infinity


def ec_add(curve: CurveModel, d: int, P: Affine, Q: Affine) -> Affine:
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if y1 == -y2:
            return None
        lam = Fraction(3 * x1 * x1 + curve.A, 1) / (2 * d * y1)
    else:
        lam = (y2 - y1) / (x2 - x1)
    x3 = d * lam * lam - x1 - x2
    y3 = lam * (x1 - x3) - y1
    return (x3, y3)


def ec_mul(curve: CurveModel, d: int, n: int, P: Affine) -> Affine:
    acc: Affine = None
    add = P
    while n:
        if n & 1:
            acc = ec_add(curve, d, acc, add)
        add = ec_add(curve, d, add, add)
        n >>= 1
    return acc


def is_torsion(curve: CurveModel, d: int, P: ProjPoint) -> bool:
    """Exact torsion test: nP = O for some n <= 12 (Mazur's bound)."""
    validate_on_twist(curve, d, P)
    if P.is_infinity or P.y == 0:
        return True
    pt = P.affine()
    acc: Affine = pt
    for _ in range(2, MAZUR_TORSION_BOUND + 1):
        acc = ec_add(curve, d, acc, pt)
        if acc is None:
            return True
    return False


# ---------------------------------------------------------------------------
# duplication machinery (per-curve, cached)
# ---------------------------------------------------------------------------


def _dup_forms(A: int, B: int):
    """Coefficient lists (degree 4, low to high in zeta for fixed xi-degree
    bookkeeping handled explicitly where used)."""
    # phi(xi, zeta) = xi^4 - 2A xi^2 zeta^2 - 8B xi zeta^3 + A^2 zeta^4
    # psi(xi, zeta) = 4 xi^3 zeta + 4A xi zeta^3 + 4B zeta^4
    phi = [A * A, -8 * B, -2 * A, 0, 1]  # coeff of xi^k zeta^(4-k), k = 0..4
    psi = [4 * B, 4 * A, 0, 4, 0]
    return phi, psi


def _sylvester_det(f: Sequence[int], g: Sequence[int]) -> int:
    """Determinant of the Sylvester matrix of two degree-4 coefficient lists
    (highest degree first ordering handled internally); exact integer."""
    fh = list(reversed(f))  # xi^4 ... zeta^4
    gh = list(reversed(g))
    n = 8
    M = [[Fraction(0)] * n for _ in range(n)]
    for i in range(4):
        for j, c in enumerate(fh):
            M[i][i + j] = Fraction(c)
    for i in range(4):
        for j, c in enumerate(gh):
            M[4 + i][i + j] = Fraction(c)
    det = Fraction(1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return 0
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = 1 / M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                factor = M[r][col] * inv
                for c in range(col, n):
                    M[r][c] -= factor * M[col][c]
    assert det.denominator == 1
    return int(det)


def _poly_xgcd(f: List[Fraction], g: List[Fraction]):
    """Extended gcd over Q[t]: returns (u, v) with u f + v g = 1 (f, g coprime)."""

    def norm(p):
        while len(p) > 1 and p[-1] == 0:
            p.pop()
        return p

    def is_zero(p):
        return len(p) == 1 and p[0] == 0

    def divmod_(a, b):
        a = a[:]
        q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
        while not is_zero(a) and len(a) >= len(b):
            c = a[-1] / b[-1]
            s = len(a) - len(b)
            q[s] = c
            for j in range(len(b)):
                a[s + j] -= c * b[j]
            a = norm(a)
        return norm(q), a

    r0, r1 = norm(f[:]), norm(g[:])
    s0, s1 = [Fraction(1)], [Fraction(0)]
    t0, t1 = [Fraction(0)], [Fraction(1)]

    def padd(a, b):
        out = [Fraction(0)] * max(len(a), len(b))
        for i, c in enumerate(a):
            out[i] += c
        for i, c in enumerate(b):
            out[i] += c
        return norm(out)

    def pmul(a, b):
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, c in enumerate(a):
            if c:
                for j, e in enumerate(b):
                    out[i + j] += c * e
        return norm(out)

    def pneg(a):
        return [-c for c in a]

    while not is_zero(r1):
        q, r = divmod_(r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, padd(s0, pneg(pmul(q, s1)))
        t0, t1 = t1, padd(t0, pneg(pmul(q, t1)))
    c = r0[-1]
    if len(r0) != 1:
        raise ArithmeticError("polynomials are not coprime")
    return [x / c for x in s0], [x / c for x in t0]


@dataclass
class _HeightContext:
    A: int
    B: int
    resultant: int
    bad: Tuple[Tuple[int, int], ...]  # (p, v_p(resultant))
    log_res: float
    log_c_hi: float
    log_c_lo: float
    h1: float  # rigorous lower bound for hhat - h_x/2
    h2: float  # rigorous upper bound


@lru_cache(maxsize=None)
def _height_context(A: int, B: int) -> _HeightContext:
    phi, psi = _dup_forms(A, B)
    res = abs(_sylvester_det(phi, psi))
    if res == 0:  # pragma: no cover
        raise ArithmeticError("duplication forms are degenerate")
    bad = tuple((p, e) for p, e in factorize(res).factors)
    c_hi = max(sum(abs(c) for c in phi), sum(abs(c) for c in psi))
    # Bezout identities give max(|phi|, |psi|) >= c_lo on the unit sup-sphere.
    f = [Fraction(c) for c in phi]           # phi(t, 1), low->high
    g = [Fraction(c) for c in psi]
    u, v = _poly_xgcd(f, g)
    s1 = sum(abs(c) for c in u) + sum(abs(c) for c in v)
    fr = [Fraction(c) for c in reversed(phi)]  # phi(1, t)
    gr = [Fraction(c) for c in reversed(psi)]
    ur, vr = _poly_xgcd(fr, gr)
    s2 = sum(abs(c) for c in ur) + sum(abs(c) for c in vr)
    c_lo = 1.0 / float(max(s1, s2))
    log_res = math.log(res)
    log_c_hi = math.log(c_hi)
    log_c_lo = math.log(c_lo)
    # h(2Q) - 4 h(Q) lies in [log c_lo - log res, log c_hi]; telescoping gives
    # hhat - h/2 = (1/2) sum 4^{-(k+1)} (h(2^{k+1}) - 4 h(2^k)) in the bounds / 6.
    h1 = min(0.0, (log_c_lo - log_res) / 6.0)
    h2 = max(0.0, log_c_hi / 6.0)
    return _HeightContext(A, B, res, bad, log_res, log_c_hi, log_c_lo, h1, h2)


def _reduced_x_pair(P: ProjPoint) -> Tuple[int, int]:
    g = math.gcd(abs(P.x), abs(P.z))
    return P.x // g, P.z // g


def _phi_psi_int(A, B, xi, ze):
    x2 = xi * xi
    z2 = ze * ze
    phi = x2 * x2 - 2 * A * x2 * z2 - 8 * B * xi * ze * z2 + A * A * z2 * z2
    psi = 4 * ze * (xi * x2 + A * xi * z2 + B * ze * z2)
    return phi, psi


def canonical_height(curve: CurveModel, d: int, P: ProjPoint, tol: float = 1e-9) -> float:
    """Canonical height on E_d to absolute accuracy ``tol``.

    The x-duplication orbit is the one of the untwisted curve (x-coordinates
    are preserved by the twist isomorphism), so the computation never sees d
    beyond the initial point validation and torsion screening.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    validate_on_twist(curve, d, P)
    if P.is_infinity or P.y == 0:
        raise TorsionPointError("canonical height of a 2-torsion point (it is 0)")
    ctx = _height_context(curve.A, curve.B)
    xi, ze = _reduced_x_pair(P)
    # cheap exact screening: torsion points have bounded naive height
    if _log_abs(max(abs(xi), abs(ze), 1)) <= -2 * ctx.h1 + 1.0 and is_torsion(curve, d, P):
        return 0.0
    m_span = max(ctx.log_c_hi, -ctx.log_c_lo) + ctx.log_res
    K = max(6, math.ceil(math.log(max(m_span, 1e-9) / (3 * tol * 0.5), 4.0)))
    K = min(K, 60)
    # exact residue tracking at bad primes
    track = []
    for p, vres in ctx.bad:
        Mp = vres * (K + 2) + 8
        mod = p**Mp
        track.append([p, vres, Mp, mod, xi % mod, ze % mod])
    fx, fz = float(xi), float(ze)
    scale = max(abs(fx), abs(fz))
    fx, fz = fx / scale, fz / scale
    rho0 = _log_abs(max(abs(xi), abs(ze)))
    S = 0.0
    w = 1.0
    for _ in range(K):
        w *= 0.25
        pf = fx * fx * fx * fx - 2 * curve.A * fx * fx * fz * fz \
            - 8 * curve.B * fx * fz * fz * fz + curve.A * curve.A * fz**4
        qf = 4 * fz * (fx**3 + curve.A * fx * fz * fz + curve.B * fz**3)
        m = math.log(max(abs(pf), abs(qf)))
        # non-archimedean corrections
        vals = []
        for rec in track:
            p, vres, Mp, mod, rx, rz = rec
            a, b = _phi_psi_int(curve.A, curve.B, rx, rz)
            a %= mod
            b %= mod
            v = 0
            while v < vres and a % p == 0 and b % p == 0:
                a //= p
                b //= p
                v += 1
            vals.append((v, a, b))
        g = 1
        for (v, _, _), rec in zip(vals, track):
            g *= rec[0] ** v
        logg = math.log(g) if g > 1 else 0.0
        for (v, a, b), rec in zip(vals, track):
            p, vres, Mp, mod, _, _ = rec
            Mp2 = Mp - v
            mod2 = p**Mp2
            other = g // (p**v)
            if other > 1:
                inv = pow(other % mod2, -1, mod2)
                a = a * inv % mod2
                b = b * inv % mod2
            else:
                a %= mod2
                b %= mod2
            rec[2], rec[3], rec[4], rec[5] = Mp2, mod2, a, b
        S += w * (m - logg)
        sc = max(abs(pf), abs(qf))
        fx, fz = pf / sc, qf / sc
    hhat = 0.5 * (rho0 + S)
    if hhat < 10 * tol and is_torsion(curve, d, P):
        return 0.0
    return hhat


def canonical_height_bigint(curve: CurveModel, d: int, P: ProjPoint, tol: float = 1e-4) -> float:
    """Literal limit evaluation (1/2) 4^{-n} h(x(2^n P)) with exact integers.

    Independent oracle for canonical_height; the iterate sizes grow like 4^n
    digits, so the tolerance is limited (a resource guard rejects requests
    that would need more than ~10^8-bit integers).
    """
    validate_on_twist(curve, d, P)
    if P.is_infinity or P.y == 0:
        raise TorsionPointError("canonical height of a 2-torsion point (it is 0)")
    ctx = _height_context(curve.A, curve.B)
    C = max(-ctx.h1, ctx.h2, 1e-12)
    n = max(1, math.ceil(math.log(C / tol, 4.0)))
    xi, ze = _reduced_x_pair(P)
    approx_bits = 4**n * (max(abs(xi), abs(ze)).bit_length() + 4)
    if approx_bits > 2 * 10**8:
        raise ResourceBudgetError(
            f"bigint height iteration would need ~{approx_bits} bits; lower the accuracy")
    x = gmpy2.mpz(xi)
    z = gmpy2.mpz(ze)
    A, B = gmpy2.mpz(curve.A), gmpy2.mpz(curve.B)
    bad_primes = [gmpy2.mpz(p) for p, _ in ctx.bad]
    for _ in range(n):
        x2 = x * x
        z2 = z * z
        phi = x2 * x2 - 2 * A * x2 * z2 - 8 * B * x * z * z2 + A * A * z2 * z2
        psi = 4 * z * (x * x2 + A * x * z2 + B * z * z2)
        for p in bad_primes:  # the gcd of the values divides the resultant
            while phi % p == 0 and psi % p == 0:
                phi //= p
                psi //= p
        x, z = phi, psi
    h = float(gmpy2.log(max(abs(x), abs(z))))
    return 0.5 * h / 4**n


# ---------------------------------------------------------------------------
# the Silverman gap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeightGap:
    """Bounds h1 <= hhat(P) - h_x(P)/2 <= h2, uniform over the twist family."""

    h1: float
    h2: float
    source: str  # "explicit-bound" | "empirical-calibration"

    def __post_init__(self):
        if not (self.h1 <= 0.0 <= self.h2):
            raise DomainError("a height gap must satisfy h1 <= 0 <= h2")

    @property
    def C1(self) -> float:
        """e^{-2 h1}: the search-box constant of the superset side."""
        return math.exp(-2.0 * self.h1)

    @property
    def C2(self) -> float:
        return math.exp(-2.0 * self.h2)

    def contains(self, delta: float, slack: float = 1e-9) -> bool:
        return self.h1 - slack <= delta <= self.h2 + slack

    def span(self) -> float:
        return self.h2 - self.h1


def explicit_gap(curve: CurveModel) -> HeightGap:
    """A-priori gap from the duplication-form inequalities (coefficient sums
    and the resultant), depending only on A and B."""
    ctx = _height_context(curve.A, curve.B)
    return HeightGap(h1=ctx.h1, h2=ctx.h2, source="explicit-bound")


def height_discrepancy(curve: CurveModel, d: int, P: ProjPoint, tol: float = 1e-9) -> float:
    """delta(P) = hhat(P) - h_x(P)/2."""
    return canonical_height(curve, d, P, tol) - 0.5 * naive_height_x(P)


def empirical_gap(curve: CurveModel, sample: Sequence[Tuple[int, ProjPoint]],
                  widen: float = 1.5) -> HeightGap:
    """Empirical min/max of the discrepancy over a sample, widened (the span
    is inflated by ``widen`` symmetric around its midpoint) and clamped to
    contain 0."""
    if not sample:
        raise DomainError("empirical_gap requires a nonempty sample")
    deltas = []
    for d, P in sample:
        if is_torsion(curve, d, P):
            raise DomainError("calibration sample must be torsion free")
        deltas.append(height_discrepancy(curve, d, P))
    lo, hi = min(deltas), max(deltas)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * widen + 1e-6
    return HeightGap(h1=min(mid - half, 0.0), h2=max(mid + half, 0.0),
                     source="empirical-calibration")


def calibrate_gap(curve: CurveModel, sample: Sequence[Tuple[int, ProjPoint]]) -> HeightGap:
    """The wider of the widened empirical gap and the explicit a-priori gap."""
    emp = empirical_gap(curve, sample)
    exp_ = explicit_gap(curve)
    return exp_ if exp_.span() >= emp.span() else emp
