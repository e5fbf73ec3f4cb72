"""The fixed cubic y^2 = x^3 + A x + B: discriminant, factorization type,
2-torsion data, and the projective symmetry group of x(E[2])."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, NotRationalTorsionError, SingularCurveError

Root = Union[int, complex]


def _integer_roots(A: int, B: int) -> List[int]:
    """All integer roots of x^3 + A x + B (rational roots of a monic integer
    cubic are integers dividing B)."""
    roots = []
    if B == 0:
        roots.append(0)
        if A < 0:
            s = math.isqrt(-A)
            if s * s == -A:
                roots.extend([s, -s])
        return sorted(set(roots))
    cands = set()
    d = 1
    while d * d <= abs(B):
        if B % d == 0:
            cands.update({d, -d, abs(B) // d, -abs(B) // d})
        d += 1
    return sorted(r for r in cands if r * r * r + A * r + B == 0)


@dataclass(frozen=True)
class CurveModel:
    """x^3 + A x + B with its arithmetic invariants.

    lam is the number of irreducible integer factors; T2 = #E(Q)[2] = 1 plus
    the number of rational roots.
    """

    A: int
    B: int
    discriminant: int
    lam: int
    rational_two_torsion_x: Tuple[int, ...]
    T2: int

    @property
    def C0(self) -> int:
        return 1 + abs(self.A) + abs(self.B)

    def f(self, x):
        return x * x * x + self.A * x + self.B

    def f_prime(self, x):
        return 3 * x * x + self.A

    def roots(self) -> List[Root]:
        """The three roots: rational ones first (ascending), then the rest
        ordered by (real part, imag part); irrational roots are complex floats."""
        rat = list(self.rational_two_torsion_x)
        rem = np.roots([1.0, 0.0, float(self.A), float(self.B)])
        others: List[complex] = []
        used = [False] * len(rem)
        for q in rat:
            i = int(np.argmin([abs(r - q) if not used[j] else math.inf for j, r in enumerate(rem)]))
            used[i] = True
        for j, r in enumerate(rem):
            if not used[j]:
                others.append(complex(r))
        others.sort(key=lambda c: (round(c.real, 9), round(c.imag, 9)))
        return rat + others

    @classmethod
    def cached(cls, A: int, B: int) -> "CurveModel":
        key = (A, B)
        if key not in _CURVE_CACHE:
            _CURVE_CACHE[key] = build_curve(A, B)
        return _CURVE_CACHE[key]


_CURVE_CACHE: Dict[Tuple[int, int], "CurveModel"] = {}


def build_curve(A: int, B: int) -> CurveModel:
    """Validate and classify the cubic; raises SingularCurveError when Delta = 0."""
    disc = -(4 * A**3 + 27 * B**2)
    if disc == 0:
        raise SingularCurveError(f"curve ({A}, {B}) is singular")
    rats = tuple(_integer_roots(A, B))
    lam = {0: 1, 1: 2, 3: 3}[len(rats)]
    return CurveModel(A=A, B=B, discriminant=disc, lam=lam,
                      rational_two_torsion_x=rats, T2=1 + len(rats))


def f_tilde(curve: CurveModel, x, z):
    """F~(x, z) = x^3 + A x z^2 + B z^3 (exact for int/Fraction inputs)."""
    return x * x * x + curve.A * x * z * z + curve.B * z * z * z


def _reduce_pair(a: int, b: int) -> Tuple[int, int]:
    """Coprime representative of a projective pair, sign-normalized."""
    if a == 0 and b == 0:
        raise DomainError("(0 : 0) is not a projective point")
    g = math.gcd(abs(a), abs(b))
    a, b = a // g, b // g
    if b < 0 or (b == 0 and a < 0):
        a, b = -a, -b
    return a, b


def translation_matrix(curve: CurveModel, q) -> Tuple:
    """Matrix of x(P) -> x(P + Q) for the 2-torsion point Q with x(Q) = q."""
    return ((q, 2 * q * q + curve.A), (1, -q))


def translate_x_by_torsion(curve: CurveModel, k: int, x: int, t: int) -> Tuple[int, int]:
    """x-coordinate of P + Q_k in reduced projective coordinates.

    k in {2, 3, 4} indexes the ordered roots; only rational roots are allowed.
    """
    if k not in (2, 3, 4):
        raise DomainError("k must be in {2, 3, 4}")
    if k - 2 >= len(curve.rational_two_torsion_x):
        raise NotRationalTorsionError(f"root q_{k} of ({curve.A}, {curve.B}) is not rational")
    q = curve.rational_two_torsion_x[k - 2]
    return _reduce_pair(q * x + (2 * q * q + curve.A) * t, x - q * t)


# ---------------------------------------------------------------------------
# Isom(P^1; x(E[2]))
# ---------------------------------------------------------------------------

Perm = Tuple[int, int, int, int]  # images of (1, 2, 3, 4)

_IDENT: Perm = (1, 2, 3, 4)


def _perm_compose(p: Perm, q: Perm) -> Perm:
    """(p o q)(i) = p(q(i))."""
    return tuple(p[q[i] - 1] for i in range(4))


@dataclass(frozen=True)
class IsomGroup:
    """The group of projective automorphisms permuting x(E[2]).

    ``matrices`` maps each permutation (images of indices 1..4, where index 1
    is the point at infinity and 2..4 follow the curve's root ordering) to a
    2x2 matrix; entries are exact Fractions when the map is defined over Q,
    complex floats otherwise.
    """

    permutations: Tuple[Perm, ...]
    matrices: Dict[Perm, Tuple[Tuple[object, object], Tuple[object, object]]]
    n_E: int

    @property
    def order(self) -> int:
        return len(self.permutations)

    def is_rational(self, perm: Perm) -> bool:
        m = self.matrices[perm]
        return all(isinstance(m[i][j], (int, Fraction)) for i in range(2) for j in range(2))


def _mat_mul(a, b):
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


def _mat_exactify(m):
    """Snap float entries to nearby small rationals when exact enough."""
    out = [[None, None], [None, None]]
    for i in range(2):
        for j in range(2):
            v = m[i][j]
            if isinstance(v, (int, Fraction)):
                out[i][j] = v
                continue
            if abs(v.imag) < 1e-12:
                fr = Fraction(v.real).limit_denominator(10**6)
                if abs(float(fr) - v.real) < 1e-9 * max(1.0, abs(v.real)):
                    out[i][j] = fr
                    continue
            out[i][j] = v
    return (tuple(out[0]), tuple(out[1]))


def _apply(m, pt):
    """Apply a matrix to a projective point ((a, b) pair, possibly complex)."""
    a, b = pt
    return (m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b)


def _proj_close(p, q, tol=1e-7) -> bool:
    a, b = complex(p[0]), complex(p[1])
    c, d = complex(q[0]), complex(q[1])
    return abs(a * d - b * c) <= tol * max(1.0, abs(a), abs(b), abs(c), abs(d)) ** 2


def _perm_of_matrix(m, points) -> Optional[Perm]:
    imgs = []
    for pt in points:
        im = _apply(m, pt)
        hit = [j + 1 for j, q in enumerate(points) if _proj_close(im, q)]
        if len(hit) != 1:
            return None
        imgs.append(hit[0])
    return tuple(imgs) if sorted(imgs) == [1, 2, 3, 4] else None


def isom_group(curve: CurveModel) -> IsomGroup:
    """Construct Isom(P^1; x(E[2])) with its matrices by the case analysis on
    (A, B): order 4 when AB != 0, 8 when B = 0, 12 when A = 0."""
    roots = curve.roots()
    points = [(1, 0)] + [(q, 1) for q in roots]
    n_E = 2 if curve.A * curve.B != 0 else (4 if curve.B == 0 else 6)

    gens = [(((1, 0), (0, 1)), _IDENT)]
    for k in range(2, 5):
        q = roots[k - 2]
        m = ((q, 2 * q * q + curve.A), (1, -q))
        perm = _perm_of_matrix(m, points)
        if perm is None:  # pragma: no cover
            raise ArithmeticError("failed to label a V4 generator")
        gens.append((m, perm))
    if curve.B == 0:
        gens.append((((0, -curve.A), (1, 0)), None))  # the 2-cycle (1k), q_k = 0
    if curve.A == 0:
        z3 = cmath.exp(2j * cmath.pi / 3)
        gens.append((((z3, 0), (0, 1)), None))  # a 3-cycle fixing infinity

    table: Dict[Perm, Tuple] = {}
    frontier = []
    for m, perm in gens:
        if perm is None:
            perm = _perm_of_matrix(m, points)
            if perm is None:  # pragma: no cover
                raise ArithmeticError("failed to label an extra generator")
        if perm not in table:
            table[perm] = _mat_exactify(m)
            frontier.append(perm)
    while frontier:
        p = frontier.pop()
        for q in list(table):
            for a, b in ((p, q), (q, p)):
                prod = _perm_compose(a, b)
                if prod not in table:
                    table[prod] = _mat_exactify(_mat_mul(table[a], table[b]))
                    frontier.append(prod)
    expected = 2 * n_E
    if len(table) != expected:  # pragma: no cover
        raise ArithmeticError(f"group closure has order {len(table)}, expected {expected}")
    perms = tuple(sorted(table))
    return IsomGroup(permutations=perms, matrices=table, n_E=n_E)
