"""Prime factorization, cubic congruence counting and multiplicative functions.

The central object is ``theta(n) = #{rho mod n : rho^3 + A rho + B = 0 mod n}``
for a fixed cubic.  It is multiplicative, stable at prime powers away from the
discriminant, and is evaluated here both pointwise (root finding mod p plus
Hensel lifting) and in batch (a sieve over all n <= X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple

import gmpy2
import numpy as np

from .errors import DomainError, ResourceBudgetError

# ---------------------------------------------------------------------------
# primality / factorization
# ---------------------------------------------------------------------------

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)

# SPRP witnesses making Miller-Rabin deterministic below 3.3 * 10^24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

FACTOR_LIMIT = 1 << 64


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 2^64 (witness set covers far more)."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    """Brent-cycle Pollard rho; deterministic parameter sweep."""
    if n % 2 == 0:
        return 2
    for c in range(1, 200):
        x = y = 2
        d = 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
    raise ArithmeticError(f"pollard rho failed on {n}")  # pragma: no cover


@dataclass(frozen=True)
class FactoredInt:
    """A positive integer with its prime factorization.

    ``factors`` is sorted by prime; the product of p^e recovers ``value``.
    """

    value: int
    factors: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        last = 0
        for p, e in self.factors:
            if p <= last or e < 1:
                raise DomainError("factors must be sorted with exponents >= 1")
            last = p
            prod *= p**e
        if prod != self.value or self.value < 1:
            raise DomainError("factorization does not match value")

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.factors)

    def mu(self) -> int:
        if not self.is_squarefree():
            return 0
        return -1 if len(self.factors) % 2 else 1


def factorize(n: int) -> FactoredInt:
    """Factor ``n`` by trial division, Miller-Rabin and Pollard rho.

    Deterministic and guaranteed to terminate for n < 2^64; larger inputs are
    rejected (desk scale never needs them).
    """
    if n < 1:
        raise DomainError("factorize requires n >= 1")
    if n >= FACTOR_LIMIT:
        raise ResourceBudgetError(f"factorization limited to inputs < 2^64, got {n}")
    value = n
    fac: Dict[int, int] = {}
    for p in _SMALL_PRIMES:
        while n % p == 0:
            fac[p] = fac.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            fac[m] = fac.get(m, 0) + 1
            continue
        # try a bit more trial division before rho: cheap and deterministic
        d = _pollard_rho(m)
        stack.extend([d, m // d])
    return FactoredInt(value, tuple(sorted(fac.items())))


def _as_factored(n) -> FactoredInt:
    return n if isinstance(n, FactoredInt) else factorize(int(n))


# ---------------------------------------------------------------------------
# sieves
# ---------------------------------------------------------------------------


def sieve_primes(limit: int) -> np.ndarray:
    """All primes <= limit as an int64 array."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    isp = np.ones(limit + 1, dtype=bool)
    isp[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if isp[p]:
            isp[p * p :: p] = False
    return np.flatnonzero(isp).astype(np.int64)


def sieve_squarefree(limit: int) -> np.ndarray:
    """Boolean array sf[n] == True iff n is squarefree (sf[0] = False)."""
    sf = np.ones(limit + 1, dtype=bool)
    sf[0] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sf[p]:  # p prime enough: composites p were already struck via smaller squares
            sf[p * p :: p * p] = False
    return sf


def sieve_mobius(limit: int) -> np.ndarray:
    """mu(n) for n = 0..limit as int8 (mu[0] = 0)."""
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    primes = sieve_primes(limit)
    for p in primes:
        mu[p::p] *= -1
    for p in primes[primes <= math.isqrt(limit)]:
        mu[p * p :: p * p] = 0
    return mu


def multiplicative_sieve(
    limit: int,
    primes: np.ndarray,
    factor_at: Callable[[int, int], float],
    stable: Callable[[int], bool] = lambda p: False,
    dtype=np.float64,
) -> np.ndarray:
    """Array f[n] of the multiplicative function with f(p^k) = factor_at(p, k).

    ``stable(p)`` marks primes whose local factor does not depend on k; those
    cost a single strided pass.  f[0] = 0, f[1] = 1.
    """
    out = np.ones(limit + 1, dtype=dtype)
    out[0] = 0
    for p in primes:
        p = int(p)
        if stable(p):
            out[p::p] *= factor_at(p, 1)
            continue
        k = 1
        pk = p
        while pk <= limit:
            idx = np.arange(pk, limit + 1, pk, dtype=np.int64)
            pk1 = pk * p
            if pk1 <= limit:
                idx = idx[idx % pk1 != 0]
            out[idx] *= factor_at(p, k)
            k += 1
            pk = pk1
    return out


# ---------------------------------------------------------------------------
# roots of the cubic modulo primes and prime powers
# ---------------------------------------------------------------------------


def _sqrt_mod_p(a: int, p: int) -> List[int]:
    """Square roots of a mod p (p odd prime), Tonelli-Shanks."""
    a %= p
    if a == 0:
        return [0]
    if pow(a, (p - 1) // 2, p) != 1:
        return []
    if p % 4 == 3:
        r = pow(a, (p + 1) // 4, p)
        return sorted({r, p - r})
    # Tonelli-Shanks
    q = p - 1
    s = 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        t2 = t
        i = 0
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t = t * c % p
        r = r * b % p
    return sorted({r, p - r})


def _poly_mulmod(f, g, modpoly, p):
    """Multiply polynomials f*g mod (modpoly, p); coefficient lists low->high."""
    res = [0] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                res[i + j] = (res[i + j] + a * b) % p
    # reduce modulo monic modpoly
    d = len(modpoly) - 1
    for i in range(len(res) - 1, d - 1, -1):
        c = res[i]
        if c:
            res[i] = 0
            for j in range(d):
                res[i - d + j] = (res[i - d + j] - c * modpoly[j]) % p
    while len(res) > 1 and res[-1] == 0:
        res.pop()
    return res


def _poly_gcd_mod(f, g, p):
    """Monic gcd of f, g in GF(p)[x]."""
    f = [c % p for c in f]
    g = [c % p for c in g]

    def norm(h):
        while len(h) > 1 and h[-1] == 0:
            h.pop()
        return h

    f, g = norm(f), norm(g)
    while len(g) > 1 or g[0] != 0:
        # f mod g
        f = f[:]
        dg = len(g) - 1
        inv = pow(g[-1], -1, p)
        while len(f) - 1 >= dg and (len(f) > 1 or f[0] != 0):
            c = f[-1] * inv % p
            shift = len(f) - 1 - dg
            for j in range(dg + 1):
                f[shift + j] = (f[shift + j] - c * g[j]) % p
            f = norm(f)
            if len(f) == 1 and f[0] == 0:
                break
        f, g = g, f
    # make monic
    if len(f) > 1 or f[0] != 0:
        inv = pow(f[-1], -1, p)
        f = [c * inv % p for c in f]
    return f


def _xp_mod(modpoly, p):
    """x^p mod (modpoly, p) by square and multiply."""
    result = [1]
    base = [0, 1]
    e = p
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, modpoly, p)
        base = _poly_mulmod(base, base, modpoly, p)
        e >>= 1
    return result


def roots_mod_p(A: int, B: int, p: int) -> List[int]:
    """Sorted roots of x^3 + A x + B mod p."""
    if p < 60:
        return [r for r in range(p) if (r * r * r + A * r + B) % p == 0]
    A %= p
    B %= p
    F = [B, A, 0, 1]
    # gcd(x^p - x, F) isolates the linear factors
    xp = _xp_mod(F, p)
    xp_minus_x = xp[:] + [0] * (2 - len(xp) + 1 if len(xp) < 2 else 0)
    while len(xp_minus_x) < 2:
        xp_minus_x.append(0)
    xp_minus_x[1] = (xp_minus_x[1] - 1) % p
    g = _poly_gcd_mod(xp_minus_x, F, p)
    deg = len(g) - 1
    if deg == 0:
        return []
    if deg == 1:
        return [(-g[0]) % p]
    if deg == 2:
        # x^2 + g1 x + g0
        disc = (g[1] * g[1] - 4 * g[0]) % p
        rs = _sqrt_mod_p(disc, p)
        inv2 = pow(2, -1, p)
        return sorted({(-g[1] + r) * inv2 % p for r in rs})
    # deg == 3: F splits; split off one root with deterministic a-sweep
    roots: List[int] = []
    stack = [g]
    a = 0
    while stack and a < 10000:
        h = stack.pop()
        dh = len(h) - 1
        if dh == 1:
            roots.append((-h[0]) % p)
            continue
        if dh == 2:
            disc = (h[1] * h[1] - 4 * h[0]) % p
            rs = _sqrt_mod_p(disc, p)
            inv2 = pow(2, -1, p)
            roots.extend((-h[1] + r) * inv2 % p for r in rs)
            continue
        # try to split h with gcd((x+a)^((p-1)/2) - 1, h)
        split = None
        while split is None and a < 10000:
            base = [a % p, 1]
            e = (p - 1) // 2
            acc = [1]
            b = base
            ee = e
            while ee:
                if ee & 1:
                    acc = _poly_mulmod(acc, b, h, p)
                b = _poly_mulmod(b, b, h, p)
                ee >>= 1
            acc = acc[:]
            acc[0] = (acc[0] - 1) % p
            cand = _poly_gcd_mod(acc, h, p)
            a += 1
            if 0 < len(cand) - 1 < dh:
                split = cand
        if split is None:  # pragma: no cover
            raise ArithmeticError("root splitting failed")
        # h / split
        quot = _poly_quotient_mod(h, split, p)
        stack.extend([split, quot])
    return sorted(set(roots))


def _poly_quotient_mod(f, g, p):
    """f // g in GF(p)[x] (g monic divides f)."""
    f = [c % p for c in f]
    dg = len(g) - 1
    q = [0] * (len(f) - dg)
    while len(f) - 1 >= dg:
        c = f[-1]
        shift = len(f) - 1 - dg
        q[shift] = c
        for j in range(dg + 1):
            f[shift + j] = (f[shift + j] - c * g[j]) % p
        while len(f) > 1 and f[-1] == 0:
            f.pop()
        if len(f) == 1 and f[0] == 0:
            break
    return q


def roots_mod_prime_power(A: int, B: int, p: int, e: int) -> List[int]:
    """Sorted roots of x^3 + A x + B mod p^e by level-by-level Hensel lifting.

    Simple roots (F'(r) nonzero mod p) jump levels by Newton steps; singular
    roots are lifted exhaustively one level at a time with early abort.
    """
    base = roots_mod_p(A, B, p)
    if e == 1 or not base:
        return base if e == 1 else []
    out: List[int] = []
    singular: List[int] = []
    for r in base:
        if (3 * r * r + A) % p != 0:
            # Newton lifting doubles precision each step
            pk = p
            rk = r
            while pk < p**e:
                pk2 = min(pk * pk, p**e)
                f = rk * rk * rk + A * rk + B
                fp = 3 * rk * rk + A
                rk = (rk - f * pow(fp, -1, pk2)) % pk2
                pk = pk2
            out.append(rk % p**e)
        else:
            singular.append(r)
    # exhaustive lifting for singular roots
    cur = singular
    pj = p
    for _ in range(1, e):
        if not cur:
            break
        nxt = []
        pj1 = pj * p
        for r in cur:
            for t in range(p):
                rr = r + t * pj
                if (rr * rr * rr + A * rr + B) % pj1 == 0:
                    nxt.append(rr)
        if len(nxt) > 100000:  # pragma: no cover
            raise ResourceBudgetError("singular Hensel lifting exploded")
        cur = nxt
        pj = pj1
    out.extend(cur)
    return sorted(out)


# ---------------------------------------------------------------------------
# theta: pointwise and batch
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _theta_pp_cached(A: int, B: int, disc: int, p: int, e: int) -> int:
    if disc % p != 0:
        return len(roots_mod_p(A, B, p))
    return len(roots_mod_prime_power(A, B, p, e))


def theta(curve, n) -> int:
    """#{rho mod n : F(rho) = 0 mod n} via CRT multiplicativity."""
    fn = _as_factored(n)
    t = 1
    for p, e in fn.factors:
        t *= _theta_pp_cached(curve.A, curve.B, curve.discriminant, p, e)
        if t == 0:
            return 0
    return t


def roots_mod(curve, q) -> List[int]:
    """All roots of F mod q (q = factored integer), combined by CRT."""
    fq = _as_factored(q)
    residues = [0]
    modulus = 1
    for p, e in fq.factors:
        pe = p**e
        rs = roots_mod_prime_power(curve.A, curve.B, p, e)
        if not rs:
            return []
        inv_m = pow(modulus, -1, pe) if modulus > 1 else 0
        new = []
        for r0 in residues:
            for r1 in rs:
                if modulus == 1:
                    new.append(r1)
                else:
                    t = (r1 - r0) * inv_m % pe
                    new.append(r0 + modulus * t)
        residues = new
        modulus *= pe
    return sorted(r % modulus for r in residues)


def _theta_primes_batch(curve, primes: np.ndarray) -> np.ndarray:
    """theta(p) for every prime in ``primes`` (vectorized Frobenius test).

    For p not dividing Delta the number of roots is 3 if x^p = x mod (F, p)
    (Frobenius trivial), else 1 if (Delta|p) = -1, else 0.  Small primes and
    primes dividing Delta are handled pointwise.
    """
    A, B, disc = curve.A, curve.B, curve.discriminant
    out = np.empty(primes.size, dtype=np.int64)
    small = (primes < 60) | (np.gcd(primes, abs(disc) if disc else 1) > 1)
    for i in np.flatnonzero(small):
        out[i] = _theta_pp_cached(A, B, disc, int(primes[i]), 1)
    ps = primes[~small]
    if ps.size:
        c0, c1, c2 = _xp_mod_vec(A, B, ps)
        split = (c0 == 0) & (c1 == 1) & (c2 == 0)
        leg = _legendre_vec(disc, ps)
        theta_big = np.where(split, 3, np.where(leg == -1, 1, 0))
        out[~small] = theta_big
    return out


def _xp_mod_vec(A: int, B: int, ps: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x^p mod (x^3 + A x + B, p) for an array of primes, as 3 coefficient arrays."""
    n = ps.size
    Am = np.mod(A, ps)
    Bm = np.mod(B, ps)
    c0 = np.zeros(n, dtype=np.int64)
    c1 = np.zeros(n, dtype=np.int64)
    c2 = np.zeros(n, dtype=np.int64)
    c0 += 1  # r = 1
    maxbits = int(ps.max()).bit_length()
    for bit in range(maxbits - 1, -1, -1):
        # r <- r^2
        s0 = c0 * c0 % ps
        s1 = 2 * c0 * c1 % ps
        s2 = (c1 * c1 + 2 * c0 * c2) % ps
        s3 = 2 * c1 * c2 % ps
        s4 = c2 * c2 % ps
        c2 = (s2 - Am * s4) % ps
        c1 = (s1 - Am * s3 - Bm * s4) % ps
        c0 = (s0 - Bm * s3) % ps
        mask = (ps >> bit) & 1 == 1
        if mask.any():
            # r <- r*x on masked entries
            n0 = (-Bm * c2) % ps
            n1 = (c0 - Am * c2) % ps
            n2 = c1
            c0 = np.where(mask, n0, c0)
            c1 = np.where(mask, n1, c1)
            c2 = np.where(mask, n2, c2)
    return c0, c1, c2


def _legendre_vec(a: int, ps: np.ndarray) -> np.ndarray:
    """Legendre symbol (a|p) via Euler's criterion, vectorized (odd p, p niet | a)."""
    base = np.mod(a, ps)
    e = (ps - 1) // 2
    r = np.ones(ps.size, dtype=np.int64)
    b = base.copy()
    emax = int(e.max())
    bit = 0
    while (1 << bit) <= emax:
        mask = (e >> bit) & 1 == 1
        if mask.any():
            r = np.where(mask, r * b % ps, r)
        b = b * b % ps
        bit += 1
    return np.where(r == 1, 1, np.where(r == ps - 1, -1, 0)).astype(np.int64)


def theta_prime_array(curve, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    """(primes <= limit, theta(p) for each) with per-curve caching."""
    cache = _theta_prime_cache.setdefault((curve.A, curve.B), {})
    best = max((L for L in cache if L >= limit), default=None)
    if best is not None:
        ps, th = cache[best]
        keep = ps <= limit
        return ps[keep], th[keep]
    ps = sieve_primes(limit)
    th = _theta_primes_batch(curve, ps)
    cache.clear()
    cache[limit] = (ps, th)
    return ps, th


_theta_prime_cache: Dict[Tuple[int, int], Dict[int, Tuple[np.ndarray, np.ndarray]]] = {}


def theta_sieve(curve, a: int, X: int, memory_budget: int = 2 * 10**8) -> np.ndarray:
    """Array t with t[n] = theta(n^a) for 1 <= n <= X (t[0] = 0).

    Sieve-based: theta(p) is computed for all p <= X in one vectorized batch
    and propagated multiplicatively; only primes dividing Delta need their
    prime-power values (Hensel), every other prime is k-stable.
    """
    if a < 1 or X < 1:
        raise DomainError("theta_sieve requires a >= 1 and X >= 1")
    if X > memory_budget // 8:
        raise ResourceBudgetError(f"theta_sieve would allocate more than {memory_budget} bytes")
    out = np.ones(X + 1, dtype=np.int64)
    out[0] = 0
    ps, th = theta_prime_array(curve, X)
    disc = abs(curve.discriminant)
    good = np.gcd(ps, disc if disc else 1) == 1
    for p, t in zip(ps[good].tolist(), th[good].tolist()):
        out[p::p] *= t
    for p in ps[~good].tolist():
        k = 1
        pk = p
        while pk <= X:
            idx = np.arange(pk, X + 1, pk, dtype=np.int64)
            pk1 = pk * p
            if pk1 <= X:
                idx = idx[idx % pk1 != 0]
            out[idx] *= _theta_pp_cached(curve.A, curve.B, curve.discriminant, p, a * k)
            k += 1
            pk = pk1
    return out


# ---------------------------------------------------------------------------
# phi_1, phi_2, sigma_x
# ---------------------------------------------------------------------------


def phi1(n) -> Fraction:
    """prod_{p | n} (1 + 1/p)^(-1), exact."""
    fn = _as_factored(n)
    r = Fraction(1)
    for p in fn.primes:
        r *= Fraction(p, p + 1)
    return r


def phi2(n) -> Fraction:
    """prod_{p | n} (1 + 1/(p+1))^(-1), exact."""
    fn = _as_factored(n)
    r = Fraction(1)
    for p in fn.primes:
        r *= Fraction(p + 1, p + 2)
    return r


def sigma(x: float, n) -> float:
    """sigma_x(n) = sum_{d | n} d^x as a float (meant for x < 0)."""
    fn = _as_factored(n)
    r = 1.0
    for p, e in fn.factors:
        r *= sum(float(p) ** (x * j) for j in range(e + 1))
    return r


# ---------------------------------------------------------------------------
# the arithmetic function w
# ---------------------------------------------------------------------------

W_PMAX_DEFAULT = 10**5


def w_tail_bound(curve, p_max: int) -> float:
    """Upper bound for the neglected tail of the infinite product in w.

    The omitted factors are 1 - theta(p^2)/(p(p+2)) with theta(p^2) <= 3 for
    p not dividing Delta, so |log tail| <= sum_{p > p_max} 3/p^2 < 3/p_max.
    """
    return 3.0 / p_max


@lru_cache(maxsize=None)
def _w_base_product(A: int, B: int, disc: int, p_max: int):
    """(primes, per-prime factors 1 - theta(p^2)/(p(p+2)), full product)."""
    from .curve import CurveModel  # local import to avoid a cycle

    curve = CurveModel.cached(A, B)
    ps, th = theta_prime_array(curve, p_max)
    th2 = th.astype(np.float64)
    bad = np.gcd(ps, abs(disc) if disc else 1) > 1
    for i in np.flatnonzero(bad):
        th2[i] = _theta_pp_cached(A, B, disc, int(ps[i]), 2)
    pf = ps.astype(np.float64)
    factors = 1.0 - th2 / (pf * (pf + 2.0))
    return ps, factors, float(np.prod(factors))


def w_closed_form(curve, n, p_max: int = W_PMAX_DEFAULT) -> float:
    """w(n) by the closed form: an Euler product over p not dividing n times
    explicit local factors at p | n, truncated at p_max (tail: w_tail_bound)."""
    fn = _as_factored(n)
    ps, factors, full = _w_base_product(curve.A, curve.B, curve.discriminant, p_max)
    val = full
    for p, k in fn.factors:
        i = np.searchsorted(ps, p)
        if i < ps.size and ps[i] == p:
            val /= factors[i]
        t2k = _theta_pp(curve, p, 2 * k)
        t2k2 = _theta_pp(curve, p, 2 * k + 2)
        val *= (t2k - t2k2 / p**2) * p / (p + 2)
    return val


def _theta_pp(curve, p: int, e: int) -> int:
    return _theta_pp_cached(curve.A, curve.B, curve.discriminant, p, e)


@lru_cache(maxsize=8)
def _w_series_base(A: int, B: int, disc: int, M: int):
    """термы mu(m) phi1(m) phi2(m) theta(m^2) / m^2 for m <= M (float array)."""
    from .curve import CurveModel

    curve = CurveModel.cached(A, B)
    arr = np.zeros(M + 1, dtype=np.float64)
    m = np.arange(M + 1, dtype=np.float64)
    arr[1:] = 1.0 / (m[1:] * m[1:])
    ps, th = theta_prime_array(curve, M)
    thf = th.astype(np.float64)
    bad = np.gcd(ps, abs(disc) if disc else 1) > 1
    for i in np.flatnonzero(bad):
        thf[i] = _theta_pp_cached(A, B, disc, int(ps[i]), 2)
    for p, t2 in zip(ps.tolist(), thf.tolist()):
        # local factor -phi1(p) phi2(p) theta(p^2) (the sign carries mu)
        arr[p::p] *= -(p / (p + 2.0)) * t2
    for p in ps[ps <= math.isqrt(M)].tolist():
        arr[p * p :: p * p] = 0.0
    return arr


def w_series(curve, n, M: int) -> float:
    """Partial sum over m <= M of mu(m) phi1(mn) phi2(mn) theta(m^2 n^2) / m^2.

    Independent oracle for w_closed_form (straight from the defining series).
    """
    if M < 1:
        raise DomainError("w_series requires M >= 1")
    fn = _as_factored(n)
    cn = float(phi1(fn) * phi2(fn)) * theta(curve, _as_factored(fn.value * fn.value))
    if cn == 0.0:
        return 0.0
    base = _w_series_base(curve.A, curve.B, curve.discriminant, M).copy()
    for p in fn.primes:
        base[p::p] = 0.0
    cum = np.cumsum(base)
    total = 0.0
    # split m = m1 m2 with m1 | rad(n), (m2, n) = 1
    divisors = [1]
    for p in fn.primes:
        divisors += [d * p for d in divisors]
    tn2 = theta(curve, _as_factored(fn.value * fn.value))
    for m1 in divisors:
        f1 = _as_factored(m1)
        mu1 = f1.mu()
        tm = 1
        ok = True
        for p in f1.primes:
            k = dict(fn.factors)[p]
            t_hi = _theta_pp(curve, p, 2 * k + 2)
            t_lo = _theta_pp(curve, p, 2 * k)
            if t_lo == 0:
                ok = False
                break
            tm = tm * t_hi  # numerator part; denominator handled via tn2 ratio below
        if not ok:
            continue
        # theta((m1 n)^2) = tn2 * prod_{p|m1} theta(p^{2k+2})/theta(p^{2k})
        ratio = 1.0
        for p in f1.primes:
            k = dict(fn.factors)[p]
            ratio *= _theta_pp(curve, p, 2 * k + 2) / _theta_pp(curve, p, 2 * k)
        head = mu1 * float(phi1(fn) * phi2(fn)) * tn2 * ratio / (m1 * m1)
        total += head * cum[M // m1]
    return total


# ---------------------------------------------------------------------------
# quadratic character (lambda = 2 curves)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadCharacter:
    """Kronecker symbol attached to the splitting field of the quadratic factor."""

    fundamental_discriminant: int

    @property
    def modulus(self) -> int:
        return abs(self.fundamental_discriminant)

    def __call__(self, n: int) -> int:
        return int(gmpy2.kronecker(self.fundamental_discriminant, int(n)))


def squarefree_part(n: int) -> int:
    """Largest squarefree divisor pattern: n / (largest square dividing n), signed."""
    if n == 0:
        raise DomainError("squarefree_part of 0")
    sgn = -1 if n < 0 else 1
    fn = factorize(abs(n))
    r = 1
    for p, e in fn.factors:
        if e % 2:
            r *= p
    return sgn * r


def fundamental_discriminant(n: int) -> int:
    """Fundamental discriminant of Q(sqrt(n))."""
    d = squarefree_part(n)
    return d if d % 4 == 1 else 4 * d


def quad_character(curve):
    """The character chi with theta(p) = 2 + chi(p) away from N*Delta; None if lambda != 2."""
    if curve.lam != 2:
        return None
    q = curve.rational_two_torsion_x[0]
    disc1 = -3 * q * q - 4 * curve.A  # discriminant of F/(x - q) = x^2 + q x + (q^2 + A)
    return QuadCharacter(fundamental_discriminant(disc1))


# ---------------------------------------------------------------------------
# interval root counts and the Heath-Brown pair count
# ---------------------------------------------------------------------------


def count_roots_interval(curve, q, z: int, t1, t2) -> int:
    """#{t1 < n <= t2 : F~(n, z) = 0 mod q} from the theta(q) residue classes."""
    fq = _as_factored(q)
    if math.gcd(fq.value, z) != 1:
        raise DomainError("count_roots_interval requires gcd(q, z) = 1")
    if not t1 < t2:
        raise DomainError("requires t1 < t2")
    Q = fq.value
    if Q == 1:
        return math.floor(t2) - math.floor(t1)
    total = 0
    for c in roots_mod(curve, fq):
        r = c * z % Q
        total += math.floor((t2 - r) / Q) - math.floor((t1 - r) / Q)
    return total


def hb_pair_count(m1: int, m2: int, q: int, X1: float, X2: float) -> int:
    """Exact count of primitive (x1, x2), |xi| <= Xi, with m1 x1 + m2 x2 = 0 mod q.

    Enumerates the solution lattice fiberwise: for each x1 the valid x2 run
    through an arithmetic progression mod q/gcd(m2, q).
    """
    if q < 1:
        raise DomainError("q >= 1 required")
    if math.gcd(math.gcd(m1, m2), q) != 1:
        raise DomainError("(m1, m2, q) must be coprime as a triple")
    a1, a2 = math.floor(X1), math.floor(X2)
    count = 0
    g2 = math.gcd(m2, q)
    for x1 in range(-a1, a1 + 1):
        rhs = (-m1 * x1) % q
        if rhs % g2 != 0:
            continue
        step = q // g2
        if step == 1:
            start = -a2
        else:
            x20 = rhs // g2 * pow(m2 // g2, -1, step) % step
            start = x20 - ((x20 + a2) // step) * step
        x2 = start
        while x2 <= a2:
            if math.gcd(abs(x1), abs(x2)) == 1:
                count += 1
            x2 += step
    return count


def submult_constant(curve, k_max: int = 12) -> int:
    """prod_{p | Delta} max_k theta(p^k): explicit constant for theta(ab) <= C theta(a) theta(b)."""
    C = 1
    for p, _ in factorize(abs(curve.discriminant)).factors:
        C *= max(_theta_pp(curve, p, k) for k in range(1, k_max + 1))
    return C
