"""The quartic surface (y2 z2)^2 t1 F~(x1,t1) = (y1 z1)^2 t2 F~(x2,t2).

Its lines come in two kinds: product lines through pairs of zeros of
t F~(x, t) (the four points x(E[2])), and graph lines induced by projective
automorphisms preserving x(E[2]).  Rationality of a graph class depends only
on whether the inducing automorphism is translation by a rational 2-torsion
point; a bounded-height census verifies that rational points satisfying the
"unrelated pair" side conditions never land on the line locus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .curve import CurveModel, f_tilde, translation_matrix
from .errors import DegenerateOrbitError, DomainError, ResourceBudgetError

ProjPair = Tuple[int, int]


@dataclass(frozen=True)
class QuarticSurface:
    curve: CurveModel
    y1: int
    y2: int
    z1: int
    z2: int

    def __post_init__(self):
        if min(self.y1, self.y2, self.z1, self.z2) < 1:
            raise DomainError("surface parameters must be positive")

    @property
    def c1(self) -> int:
        return (self.y1 * self.z1) ** 2

    @property
    def c2(self) -> int:
        return (self.y2 * self.z2) ** 2

    def eval(self, x1, x2, t1, t2):
        return self.c2 * t1 * f_tilde(self.curve, x1, t1) \
            - self.c1 * t2 * f_tilde(self.curve, x2, t2)


@dataclass(frozen=True)
class SurfaceLine:
    """A line class of the surface.

    product:  (x1:t1), (x2:t2) pinned to two members of x(E[2])
    graph:    (x2:t2) = x*(psi)(x1:t1) for psi in Isom(E;E[2])/<m_-1>;
              psi = tau_{Q_k} composed with m_zeta, zeta_power giving zeta^2.
    """

    kind: str  # "product" | "graph"
    root_pair: Optional[Tuple[int, int]] = None  # product: indices 1..4
    torsion_index: Optional[int] = None          # graph: k with psi ~ tau_{Q_k}
    zeta_square: complex = 1.0                   # graph: zeta^2 of the m_zeta part
    matrix: Optional[Tuple] = None               # graph: matrix of x*(psi)
    kappa: object = None                         # graph: G o M = kappa * G
    rational: bool = False

    def describe(self) -> str:
        if self.kind == "product":
            return f"product{self.root_pair}"
        tag = f"tau_Q{self.torsion_index}" if self.torsion_index else "m_zeta"
        if self.zeta_square != 1.0:
            tag += "*m_zeta"
        return f"graph[{tag}]"


# ---------------------------------------------------------------------------
# form composition: G(x, t) = t F~(x, t)
# ---------------------------------------------------------------------------


def _g_coeffs(curve: CurveModel):
    """Coefficients of G by x-degree: index k holds the x^k t^(4-k) coefficient."""
    return [curve.B, curve.A, 0, 1, 0]


def _linear_power(form, n):
    """(a x + b t)^n as a coefficient list by x-degree."""
    a, b = form
    out = [0] * (n + 1)
    for k in range(n + 1):
        out[k] = math.comb(n, k) * a**k * b ** (n - k)
    return out


def _form_mul(f, g):
    out = [0] * (len(f) + len(g) - 1)
    for i, c in enumerate(f):
        if c != 0:
            for j, e in enumerate(g):
                out[i + j] = out[i + j] + c * e
    return out


def compose_G(curve: CurveModel, M) -> List:
    """Coefficients of G(M(x,t)) where M = ((a,b),(c,d)) acts linearly."""
    L1 = (M[0][0], M[0][1])
    L2 = (M[1][0], M[1][1])
    term1 = _form_mul(_linear_power(L1, 3), _linear_power(L2, 1))
    term2 = _form_mul(_linear_power(L1, 1), _linear_power(L2, 3))
    term3 = _linear_power(L2, 4)
    out = []
    for k in range(5):
        out.append(term1[k] + curve.A * term2[k] + curve.B * term3[k])
    return out


def graph_kappa(curve: CurveModel, M):
    """kappa with G(M(x,t)) = kappa G(x,t); exact when M is rational."""
    comp = compose_G(curve, M)
    base = _g_coeffs(curve)
    kappa = None
    for k in range(5):
        if base[k] != 0:
            kappa = comp[k] / Fraction(base[k]) if _is_rat(comp[k]) else comp[k] / base[k]
            break
    scale = max(1.0, max(abs(complex(c)) for c in comp))
    for k in range(5):
        want = kappa * base[k]
        if _is_rat(comp[k]) and _is_rat(want):
            if Fraction(comp[k]) != Fraction(want):
                raise ArithmeticError("matrix does not preserve the zero set of G")
        elif abs(complex(comp[k]) - complex(want)) > 1e-8 * scale:
            raise ArithmeticError("matrix does not preserve the zero set of G")
    return kappa


def _is_rat(v) -> bool:
    return isinstance(v, (int, Fraction))


# ---------------------------------------------------------------------------
# lines
# ---------------------------------------------------------------------------


def _torsion_points_x(curve: CurveModel) -> List:
    """x(E[2]) as projective pairs: index 1 is infinity, 2..4 the ordered roots."""
    return [(1, 0)] + [(q, 1) for q in curve.roots()]


def graph_line(surface: QuarticSurface, torsion_index: int, zeta_square=1,
               matrix=None) -> SurfaceLine:
    curve = surface.curve
    if matrix is None:
        if torsion_index == 1:
            matrix = ((1, 0), (0, 1))
        else:
            q = curve.roots()[torsion_index - 2]
            matrix = translation_matrix(curve, q)
        if zeta_square != 1:
            matrix = ((matrix[0][0] * zeta_square, matrix[0][1] * zeta_square),
                      (matrix[1][0], matrix[1][1]))
    kappa = graph_kappa(curve, matrix)
    rational = _classify_graph(curve, torsion_index, zeta_square)
    return SurfaceLine(kind="graph", torsion_index=torsion_index,
                       zeta_square=zeta_square, matrix=matrix, kappa=kappa,
                       rational=rational)


def _classify_graph(curve: CurveModel, torsion_index: Optional[int], zeta_square) -> bool:
    if torsion_index is None or (isinstance(zeta_square, complex) and zeta_square != 1) \
            or (not isinstance(zeta_square, complex) and zeta_square != 1):
        return False
    if torsion_index == 1:
        return True
    return torsion_index - 2 < len(curve.rational_two_torsion_x)


def lines(surface: QuarticSurface) -> List[SurfaceLine]:
    """The 16 product lines and the 4 translation-graph lines, each verified
    to lie on the surface (exactly for rational data, to 1e-9 otherwise)."""
    curve = surface.curve
    pts = _torsion_points_x(curve)
    out = []
    nrat = len(curve.rational_two_torsion_x)
    for i in range(1, 5):
        for j in range(1, 5):
            rat = (i == 1 or i - 2 < nrat) and (j == 1 or j - 2 < nrat)
            line = SurfaceLine(kind="product", root_pair=(i, j), rational=rat)
            _verify_product_line(surface, pts[i - 1], pts[j - 1])
            out.append(line)
    for k in range(1, 5):
        line = graph_line(surface, k)
        _verify_graph_line(surface, line)
        out.append(line)
    return out


def _verify_product_line(surface: QuarticSurface, P, Q) -> None:
    """Points (l*P.x : m*Q.x : l*P.t : m*Q.t) satisfy the equation identically."""
    for (l, m) in ((1, 1), (2, -3), (5, 7)):
        v = surface.eval(l * P[0], m * Q[0], l * P[1], m * Q[1])
        if _is_rat(v):
            if v != 0:
                raise ArithmeticError("product line fails to lie on the surface")
        elif abs(complex(v)) > 1e-9 * (abs(l) + abs(m)) ** 4 * surface.c1 * surface.curve.C0:
            raise ArithmeticError("product line fails to lie on the surface")


def _verify_graph_line(surface: QuarticSurface, line: SurfaceLine) -> None:
    """With c^4 = (c2/c1)/kappa, the parametrized line lies on the surface:
    eval(u, c Mx(u,v), v, c Mt(u,v)) = c1 t F~ * (kappa c^4 - c2/c1) = 0."""
    kappa = complex(line.kappa)
    if kappa == 0:
        raise ArithmeticError("degenerate graph matrix")
    c4 = (surface.c2 / surface.c1) / kappa
    c = c4 ** 0.25
    M = line.matrix
    for (u, v) in ((1, 2), (3, -1)):
        x2 = c * (complex(M[0][0]) * u + complex(M[0][1]) * v)
        t2 = c * (complex(M[1][0]) * u + complex(M[1][1]) * v)
        val = surface.c2 * v * complex(f_tilde(surface.curve, u, v)) \
            - surface.c1 * t2 * (x2**3 + surface.curve.A * x2 * t2**2
                                 + surface.curve.B * t2**3)
        scale = abs(surface.c2) * 40 * (1 + abs(c)) ** 4 * surface.curve.C0
        if abs(val) > 1e-8 * scale:
            raise ArithmeticError(f"graph line {line.describe()} fails the surface equation")


def all_graph_lines(surface: QuarticSurface) -> List[SurfaceLine]:
    """Graph classes for the full quotient Isom(E;E[2])/<m_-1> (order 2 n_E):
    the 4 translation classes plus the m_zeta-composed ones on A=0/B=0 curves."""
    out = [graph_line(surface, k) for k in range(1, 5)]
    curve = surface.curve
    if curve.B == 0:
        for k in range(1, 5):
            out.append(graph_line(surface, None, zeta_square=-1,
                                  matrix=_zeta_matrix(curve, k, -1)))
    if curve.A == 0:
        z3 = complex(-0.5, math.sqrt(3) / 2)
        for zeta2 in (z3, z3**2):
            for k in range(1, 5):
                out.append(graph_line(surface, None, zeta_square=zeta2,
                                      matrix=_zeta_matrix(curve, k, zeta2)))
    return out


def _zeta_matrix(curve: CurveModel, k: int, zeta_square):
    if k == 1:
        base = ((1, 0), (0, 1))
    else:
        q = curve.roots()[k - 2]
        base = translation_matrix(curve, q)
    return ((base[0][0] * zeta_square, base[0][1]),
            (base[1][0] * zeta_square, base[1][1]))


def classify_rational(surface: QuarticSurface, line: SurfaceLine) -> bool:
    """Rationality per the translation-class criterion: product lines need
    both roots in x(E(Q)[2]); graph lines must be pure 2-torsion translations
    by a rational point."""
    curve = surface.curve
    if line.kind == "product":
        i, j = line.root_pair
        nrat = len(curve.rational_two_torsion_x)
        return (i == 1 or i - 2 < nrat) and (j == 1 or j - 2 < nrat)
    return _classify_graph(curve, line.torsion_index, line.zeta_square)


def integer_scaling_check(surface: QuarticSurface, line: SurfaceLine) -> bool:
    """Independent check: can the defining forms of the line relation be
    scaled to integer coefficients (with a real scaling existing at all)?

    Product lines need both pinned points rational.  Graph lines need the
    relation matrix rational up to scale and kappa > 0 (kappa < 0 admits no
    real scaled line on the surface at all).
    """
    curve = surface.curve
    pts = _torsion_points_x(curve)
    if line.kind == "product":
        i, j = line.root_pair
        return all(_is_rat(pts[k - 1][0]) and _is_rat(pts[k - 1][1]) for k in (i, j))
    M = line.matrix
    entries = [M[0][0], M[0][1], M[1][0], M[1][1]]
    ref = next((e for e in entries if complex(e) != 0), None)
    scaled = []
    for e in entries:
        q = complex(e) / complex(ref)
        if abs(q.imag) > 1e-9:
            return False
        fr = Fraction(q.real).limit_denominator(10**6)
        if abs(float(fr) - q.real) > 1e-9 * max(1.0, abs(q.real)):
            return False
        scaled.append(fr)
    kap = complex(line.kappa)
    if abs(kap.imag) > 1e-9 * abs(kap):
        return False
    return kap.real > 0


# ---------------------------------------------------------------------------
# 2-torsion orbits on P^1 and the equivalence test
# ---------------------------------------------------------------------------


def _reduce_pair(a: int, b: int) -> ProjPair:
    if a == 0 and b == 0:
        raise DomainError("(0:0) is not projective")
    g = math.gcd(abs(a), abs(b))
    a, b = a // g, b // g
    if b < 0 or (b == 0 and a < 0):
        a, b = -a, -b
    return a, b


def in_rational_two_torsion_x(curve: CurveModel, x: int, t: int) -> bool:
    p = _reduce_pair(x, t)
    if p == (1, 0):
        return True
    return p[1] == 1 and p[0] in curve.rational_two_torsion_x


def torsion_orbit(curve: CurveModel, x: int, t: int) -> set:
    """The rational members of Sigma((x:t)) = orbit under 2-torsion translation.

    Only rational roots produce rational orbit members; irrational members are
    covered symbolically by equivalent_mod_two_torsion's resultant test.
    """
    if in_rational_two_torsion_x(curve, x, t):
        raise DegenerateOrbitError(f"({x}:{t}) lies in x(E[2])")
    x, t = _reduce_pair(x, t)
    orbit = {(x, t)}
    for q in curve.rational_two_torsion_x:
        orbit.add(_reduce_pair(q * x + (2 * q * q + curve.A) * t, x - q * t))
    return orbit


def _sylvester_resultant(p: List[int], f: List[int]) -> int:
    """Resultant of two integer polynomials (coefficient lists low -> high)."""
    p = p[:]
    f = f[:]
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    while len(f) > 1 and f[-1] == 0:
        f.pop()
    dp, df = len(p) - 1, len(f) - 1
    if dp == 0:
        return p[0] ** df
    if df == 0:
        return f[0] ** dp
    n = dp + df
    M = [[Fraction(0)] * n for _ in range(n)]
    for i in range(df):
        for j, c in enumerate(reversed(p)):
            M[i][i + j] = Fraction(c)
    for i in range(dp):
        for j, c in enumerate(reversed(f)):
            M[df + i][i + j] = Fraction(c)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = 1 / M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                fct = M[r][col] * inv
                for cc in range(col, n):
                    M[r][cc] -= fct * M[col][cc]
    assert det.denominator == 1
    return int(det)


def equivalent_mod_two_torsion(curve: CurveModel, p1: ProjPair, p2: ProjPair) -> bool:
    """(x1:t1) ~ (x2:t2) iff p2 lies in the full Sigma-orbit of p1 (including
    translations by irrational 2-torsion, tested by a resultant condition)."""
    x1, t1 = _reduce_pair(*p1)
    x2, t2 = _reduce_pair(*p2)
    if (x1, t1) == (x2, t2):
        return True
    # p2 = image of p1 under the translation with root q iff P(q) = 0, where
    # P(q) = -2 t1 t2 q^2 - (x2 t1 + x1 t2) q + (x1 x2 - A t1 t2)
    P = [x1 * x2 - curve.A * t1 * t2, -(x2 * t1 + x1 * t2), -2 * t1 * t2]
    if all(c == 0 for c in P):
        return True
    F = [curve.B, curve.A, 0, 1]
    return _sylvester_resultant(P, F) == 0


# ---------------------------------------------------------------------------
# census
# ---------------------------------------------------------------------------


@dataclass
class CensusReport:
    surface: QuarticSurface
    H: int
    on_line_points: int
    off_line_points: int
    qlines_points: int
    total_points: int

    def to_text(self) -> str:
        s = self.surface
        return (f"# census A={s.curve.A} B={s.curve.B} y1={s.y1} y2={s.y2} "
                f"z1={s.z1} z2={s.z2} H={self.H}\n"
                f"on_line {self.on_line_points}\noff_line {self.off_line_points}\n"
                f"qlines {self.qlines_points}\ntotal {self.total_points}\n")


def _on_rational_line(surface: QuarticSurface, x1, x2, t1, t2) -> bool:
    curve = surface.curve
    e1 = in_rational_two_torsion_x(curve, x1, t1)
    e2 = in_rational_two_torsion_x(curve, x2, t2)
    if e1 and e2:
        return True
    # translation-graph lines with rational matrices
    if x2 * x1 - t2 * x1 == 0 and _reduce_pair(x1, t1) == _reduce_pair(x2, t2):
        return True
    if _reduce_pair(x1, t1) == _reduce_pair(x2, t2):
        return True
    for q in curve.rational_two_torsion_x:
        if x2 * (x1 - q * t1) == t2 * (q * x1 + (2 * q * q + curve.A) * t1):
            return True
    return False


def _on_nontranslation_graph(surface: QuarticSurface, x1, x2, t1, t2) -> bool:
    """Whether the point satisfies an m_zeta-composed graph relation (these
    carry no rational surface points; checked for honesty of the census)."""
    for line in all_graph_lines(surface)[4:]:
        M = line.matrix
        lhs = complex(x2) * (complex(M[1][0]) * x1 + complex(M[1][1]) * t1)
        rhs = complex(t2) * (complex(M[0][0]) * x1 + complex(M[0][1]) * t1)
        scale = max(1.0, abs(lhs), abs(rhs))
        if abs(lhs - rhs) <= 1e-9 * scale:
            return True
    return False


def census(surface: QuarticSurface, H: int) -> CensusReport:
    """Exhaustive scan of primitive (x1, x2, t1, t2), |x_i| <= H, 1 <= t_i <= H
    on the surface; value-indexed join instead of a blind O(H^4) scan."""
    if H > 10**3:
        raise ResourceBudgetError("census cost guard: H <= 1000")
    curve = surface.curve
    xs = np.arange(-H, H + 1, dtype=np.int64)
    guard = (surface.c1 + surface.c2) * curve.C0 * (H + 1) ** 4
    if guard >= 2**62:
        raise ResourceBudgetError("census values would overflow int64")
    right: Dict[int, List[Tuple[int, int]]] = {}
    for t2 in range(1, H + 1):
        vals = surface.c1 * t2 * (xs**3 + curve.A * xs * t2 * t2 + curve.B * t2**3)
        for x2, v in zip(xs.tolist(), vals.tolist()):
            right.setdefault(v, []).append((x2, t2))
    on_line = off_line = qlines = total = 0
    for t1 in range(1, H + 1):
        vals = surface.c2 * t1 * (xs**3 + curve.A * xs * t1 * t1 + curve.B * t1**3)
        for x1, v in zip(xs.tolist(), vals.tolist()):
            bucket = right.get(v)
            if not bucket:
                continue
            for x2, t2 in bucket:
                if math.gcd(math.gcd(abs(x1), abs(x2)), math.gcd(t1, t2)) != 1:
                    continue
                assert surface.eval(x1, x2, t1, t2) == 0
                total += 1
                if _on_rational_line(surface, x1, x2, t1, t2):
                    on_line += 1
                    continue
                off_line += 1
                e1 = in_rational_two_torsion_x(curve, x1, t1)
                e2 = in_rational_two_torsion_x(curve, x2, t2)
                if e1 or e2:
                    continue
                if equivalent_mod_two_torsion(curve, (x1, t1), (x2, t2)):
                    continue
                # side conditions hold; on the line locus only via exotic
                # m_zeta graphs, which carry no rational points
                if _on_nontranslation_graph(surface, x1, x2, t1, t2):
                    qlines += 1
    return CensusReport(surface=surface, H=H, on_line_points=on_line,
                        off_line_points=off_line, qlines_points=qlines,
                        total_points=total)
