"""Exact arithmetic in the ring of integers of an imaginary quadratic field.

Elements are stored in the fixed integral basis (1, w) with
w = (D + sqrt(D)) / 2, where D < 0 is the field discriminant.  Ideals are
stored as 2x2 upper triangular integer matrices in Hermite normal form with
respect to the same basis.  A few vectorised helpers working on numpy
coordinate arrays live at the bottom of the module; the counting code uses
them on millions of elements at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable

import numpy as np


class FieldMismatch(ValueError):
    pass


class OracleBoundError(ValueError):
    """Raised when a finite enumeration would exceed its configured size."""


def _is_squarefree(n: int) -> bool:
    n = abs(n)
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


def is_fundamental_discriminant(D: int) -> bool:
    if D >= 0:
        return False
    if D % 4 == 1:
        return _is_squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and _is_squarefree(m)
    return False


@dataclass(frozen=True)
class Field:
    """Imaginary quadratic field K = Q(sqrt(D)) given by its discriminant."""

    D: int

    def __post_init__(self):
        if not is_fundamental_discriminant(self.D):
            raise ValueError(f"{self.D} is not a negative fundamental discriminant")

    @property
    def omega_K(self) -> int:
        return {-4: 4, -3: 6}.get(self.D, 2)

    @property
    def n0(self) -> int:
        # norm of w; w satisfies w^2 = D w - n0
        return (self.D * self.D - self.D) // 4

    @cached_property
    def w(self) -> complex:
        return complex(self.D / 2, math.sqrt(-self.D) / 2)

    def __call__(self, x: int = 0, y: int = 0) -> "QuadInt":
        return QuadInt(int(x), int(y), self)

    @property
    def one(self) -> "QuadInt":
        return QuadInt(1, 0, self)

    @property
    def zero(self) -> "QuadInt":
        return QuadInt(0, 0, self)

    @property
    def gen(self) -> "QuadInt":
        return QuadInt(0, 1, self)

    def i(self) -> "QuadInt":
        """sqrt(-1), only available for D = -4."""
        if self.D != -4:
            raise ValueError("i is only an element of O_K for D_K = -4")
        return QuadInt(2, 1, self)

    def to_json(self) -> dict:
        return {"D_K": self.D}

    @classmethod
    def from_json(cls, data: dict) -> "Field":
        return cls(int(data["D_K"]))


@dataclass(frozen=True)
class QuadInt:
    """The element x + y*w of O_K."""

    x: int
    y: int
    field: Field

    def _check(self, other: "QuadInt") -> None:
        if self.field != other.field:
            raise FieldMismatch(f"D_K={self.field.D} vs D_K={other.field.D}")

    def _coerce(self, other) -> "QuadInt":
        if isinstance(other, QuadInt):
            self._check(other)
            return other
        if isinstance(other, int):
            return QuadInt(other, 0, self.field)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return QuadInt(self.x + other.x, self.y + other.y, self.field)

    __radd__ = __add__

    def __neg__(self):
        return QuadInt(-self.x, -self.y, self.field)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return QuadInt(self.x - other.x, self.y - other.y, self.field)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        D, n0 = self.field.D, self.field.n0
        x1, y1, x2, y2 = self.x, self.y, other.x, other.y
        return QuadInt(x1 * x2 - n0 * y1 * y2, x1 * y2 + x2 * y1 + D * y1 * y2, self.field)

    __rmul__ = __mul__

    def conj(self) -> "QuadInt":
        # conj(w) = D - w
        return QuadInt(self.x + self.field.D * self.y, -self.y, self.field)

    def norm(self) -> int:
        return self.x * self.x + self.field.D * self.x * self.y + self.field.n0 * self.y * self.y

    def trace(self) -> int:
        return 2 * self.x + self.field.D * self.y

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0

    def is_unit(self) -> bool:
        return self.norm() == 1

    def divides(self, other: "QuadInt") -> bool:
        return self.exact_div(other) is not None

    def exact_div(self, other: "QuadInt") -> "QuadInt | None":
        """other / self if it lies in O_K, else None."""
        self._check(other)
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in O_K")
        num = other * self.conj()
        if num.x % n or num.y % n:
            return None
        return QuadInt(num.x // n, num.y // n, self.field)

    def __complex__(self) -> complex:
        return self.x + self.y * self.field.w

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __repr__(self) -> str:
        return f"QuadInt({self.x}, {self.y}, D={self.field.D})"

    def __str__(self) -> str:
        if self.y == 0:
            return str(self.x)
        w = "w" if abs(self.y) == 1 else f"{abs(self.y)}*w"
        if self.x == 0:
            return w if self.y > 0 else "-" + w
        return f"{self.x}{'+' if self.y > 0 else '-'}{w}"

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y}

    @classmethod
    def from_json(cls, data: dict, field: Field) -> "QuadInt":
        return cls(int(data["x"]), int(data["y"]), field)


def roots_of_unity(K: Field) -> list[QuadInt]:
    """All units of O_K, i.e. the elements of norm 1."""
    return [QuadInt(int(x), int(y), K) for x, y in zip(*elements_up_to_norm(K, 1)) if (x, y) != (0, 0)]


# --------------------------------------------------------------------------
# ideals

def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def hnf2(vectors: Iterable[tuple[int, int]]) -> tuple[int, int, int]:
    """Hermite normal form (a, b, d) of the lattice spanned by integer 2-vectors.

    The rows (a, b) and (0, d) form a basis with a, d > 0 and 0 <= b < d.
    """
    a, b, d = 0, 0, 0
    for x, y in vectors:
        if x == 0:
            d = math.gcd(d, y)
            continue
        g, s, t = _xgcd(a, x)
        # (x/g)(a,b) - (a/g)(x,y) has vanishing first coordinate
        d = math.gcd(d, (x // g) * b - (a // g) * y)
        a, b = g, s * b + t * y
    if a < 0:
        a, b = -a, -b
    if a == 0 or d == 0:
        raise ValueError("vectors do not span a full rank lattice")
    return a, b % d, d


@dataclass(frozen=True)
class QuadIdeal:
    """Nonzero ideal of O_K with Z-basis a + b*w, d*w."""

    a: int
    b: int
    d: int
    field: Field

    def __post_init__(self):
        if self.a <= 0 or self.d <= 0 or not 0 <= self.b < self.d:
            raise ValueError("basis is not in Hermite normal form")
        for g in self.basis_elements():
            if not self.contains(g * self.field.gen):
                raise ValueError("lattice is not closed under multiplication by w")

    @classmethod
    def from_generators(cls, gens: Iterable[QuadInt]) -> "QuadIdeal":
        gens = list(gens)
        if not gens:
            raise ValueError("no generators")
        K = gens[0].field
        vecs = []
        for g in gens:
            if g.field != K:
                raise FieldMismatch("generators from different fields")
            gw = g * K.gen
            vecs += [(g.x, g.y), (gw.x, gw.y)]
        if all(v == (0, 0) for v in vecs):
            raise ValueError("the zero ideal is not supported")
        return cls(*hnf2(vecs), K)

    @classmethod
    def unit(cls, K: Field) -> "QuadIdeal":
        return cls(1, 0, 1, K)

    @property
    def basis(self) -> list[list[int]]:
        return [[self.a, self.b], [0, self.d]]

    def basis_elements(self) -> tuple[QuadInt, QuadInt]:
        return QuadInt(self.a, self.b, self.field), QuadInt(0, self.d, self.field)

    def norm(self) -> int:
        return self.a * self.d

    def contains(self, q: QuadInt | int) -> bool:
        if isinstance(q, int):
            q = QuadInt(q, 0, self.field)
        if q.x % self.a:
            return False
        return (q.y - (q.x // self.a) * self.b) % self.d == 0

    def __contains__(self, q) -> bool:
        return self.contains(q)

    def __mul__(self, other: "QuadIdeal") -> "QuadIdeal":
        if other.field != self.field:
            raise FieldMismatch("ideals from different fields")
        return QuadIdeal.from_generators([e * f for e in self.basis_elements() for f in other.basis_elements()])

    def __add__(self, other: "QuadIdeal") -> "QuadIdeal":
        return QuadIdeal.from_generators(list(self.basis_elements()) + list(other.basis_elements()))

    def divides(self, other: "QuadIdeal") -> bool:
        """self | other, i.e. other is contained in self."""
        return all(self.contains(g) for g in other.basis_elements())

    def is_unit_ideal(self) -> bool:
        return self.a == 1 and self.d == 1

    def reduce(self, q: QuadInt) -> tuple[int, int]:
        """Coordinates of the canonical representative of q modulo self."""
        k = q.x // self.a
        return q.x - k * self.a, (q.y - k * self.b) % self.d

    def to_json(self) -> list[int]:
        return [self.a, self.b, 0, self.d]

    @classmethod
    def from_json(cls, data: list[int], field: Field) -> "QuadIdeal":
        a, b, zero, d = (int(v) for v in data)
        if zero != 0:
            raise ValueError("ideal basis must be upper triangular")
        return cls(a, b, d, field)

    def __repr__(self) -> str:
        return f"QuadIdeal([[{self.a}, {self.b}], [0, {self.d}]], D={self.field.D})"


def ideal_norm(I: QuadIdeal) -> int:
    return I.norm()


def ideal_contains(I: QuadIdeal, q: QuadInt | int) -> bool:
    return I.contains(q)


def is_coprime_pair(u: QuadInt, v: QuadInt) -> bool:
    """True iff u and v generate the unit ideal of O_K."""
    if u.is_zero() and v.is_zero():
        raise ValueError("(0, 0) is not a valid pair")
    return QuadIdeal.from_generators([u, v]).is_unit_ideal()


def factor_integer(n: int) -> dict[int, int]:
    n = abs(n)
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def primes_above(p: int, K: Field) -> list[tuple[QuadIdeal, int]]:
    """Prime ideals over the rational prime p, with their norms.

    O_K = Z[w], so the primes correspond to the factors of x^2 - D x + n0 mod p.
    """
    roots = [r for r in range(p) if (r * r - K.D * r + K.n0) % p == 0]
    if not roots:
        return [(QuadIdeal.from_generators([K(p)]), p * p)]
    return [(QuadIdeal.from_generators([K(p), K(-r, 1)]), p) for r in roots]


def ideal_prime_divisors(I: QuadIdeal) -> list[tuple[QuadIdeal, int]]:
    out = []
    for p in factor_integer(I.norm()):
        out += [(P, n) for P, n in primes_above(p, I.field) if P.divides(I)]
    return out


def ideals_up_to_norm(K: Field, bound: int) -> list[QuadIdeal]:
    """Every nonzero ideal of norm <= bound, in HNF order."""
    out = []
    for a in range(1, bound + 1):
        for d in range(1, bound // a + 1):
            for b in range(d):
                try:
                    out.append(QuadIdeal(a, b, d, K))
                except ValueError:
                    pass
    return out


# --------------------------------------------------------------------------
# finite quotient rings O_K / a

class QuotientRing:
    """O_K / I with elements encoded as integers x*d + y, 0 <= x < a, 0 <= y < d."""

    def __init__(self, I: QuadIdeal):
        self.ideal = I
        self.K = I.field
        self.size = I.norm()
        idx = np.arange(self.size, dtype=np.int64)
        self.xs = idx // I.d
        self.ys = idx % I.d

    def encode(self, x, y):
        I = self.ideal
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        k = np.floor_divide(x, I.a)
        return (x - k * I.a) * I.d + np.mod(y - k * I.b, I.d)

    def element(self, i: int) -> QuadInt:
        return QuadInt(int(self.xs[i]), int(self.ys[i]), self.K)

    def mul(self, i, j):
        x, y = qmul(self.xs[i], self.ys[i], self.xs[j], self.ys[j], self.K)
        return self.encode(x, y)

    def add(self, i, j):
        return self.encode(self.xs[i] + self.xs[j], self.ys[i] + self.ys[j])

    def sub(self, i, j):
        return self.encode(self.xs[i] - self.xs[j], self.ys[i] - self.ys[j])

    def neg(self, i):
        return self.encode(-self.xs[i], -self.ys[i])

    def code(self, q: QuadInt) -> int:
        return int(self.encode(q.x, q.y))

    def unimodular_mask(self, i, j) -> np.ndarray:
        """Whether (r_i, r_j) generates the unit ideal of the quotient ring."""
        I = self.ideal
        x1, y1 = self.xs[i], self.ys[i]
        x2, y2 = self.xs[j], self.ys[j]
        w1 = qmul(x1, y1, 0, 1, self.K)
        w2 = qmul(x2, y2, 0, 1, self.K)
        n = np.shape(x1)
        vecs = [(x1, y1), w1, (x2, y2), w2,
                (np.full(n, I.a, np.int64), np.full(n, I.b, np.int64)),
                (np.zeros(n, np.int64), np.full(n, I.d, np.int64))]
        return lattice_index(vecs) == 1

    def units(self) -> np.ndarray:
        zero = np.zeros(self.size, dtype=np.int64)
        return np.flatnonzero(self.unimodular_mask(np.arange(self.size), zero))


def sl2_order_bruteforce(I: QuadIdeal) -> int:
    """|SL_2(O_K / I)| by testing every 4-tuple of the quotient ring."""
    R = QuotientRing(I)
    n = R.size
    if n > 32:
        raise OracleBoundError("brute-force SL2 enumeration is limited to N(I) <= 32")
    r = np.arange(n)
    prod = R.mul(r[:, None], r[None, :])
    # det[alpha, beta, gamma, delta] = alpha*delta - beta*gamma
    det = R.sub(prod[:, None, None, :], prod[None, :, :, None])
    return int(np.count_nonzero(det == R.code(R.K.one)))


def sl2_index_oracle(I: QuadIdeal, kind: str = "full_level", bound: int = 4096) -> int:
    """[Gamma_K : Gamma_K(I)] or [Gamma_K : Gamma_K,0(I)] by enumeration of O_K / I.

    full_level counts SL_2(O_K/I): every unimodular first column extends to
    exactly |O_K/I| matrices.  hecke counts the points of the projective line
    over O_K/I as orbits of the unit group on unimodular pairs.
    """
    if kind not in ("full_level", "hecke"):
        raise ValueError(f"unknown kind {kind!r}")
    n = I.norm()
    if n > bound:
        raise OracleBoundError(f"N(a) = {n} exceeds the oracle bound {bound}")
    R = QuotientRing(I)
    i, j = np.divmod(np.arange(n * n, dtype=np.int64), n)
    uni = R.unimodular_mask(i, j)
    if kind == "full_level":
        return n * int(np.count_nonzero(uni))
    units = R.units()
    unseen = uni.copy()
    orbits = 0
    for start in np.flatnonzero(uni):
        if not unseen[start]:
            continue
        orbits += 1
        a, c = divmod(int(start), n)
        ua = R.mul(units, np.full(len(units), a))
        uc = R.mul(units, np.full(len(units), c))
        unseen[ua * n + uc] = False
    return orbits


def index_closed_forms(I: QuadIdeal) -> dict:
    """Closed forms of the congruence indices: classical, and with the two products swapped."""
    N = Fraction(I.norm())
    primes = [Fraction(q) for _, q in ideal_prime_divisors(I)]
    prod_plus = math.prod((1 + 1 / q for q in primes), start=Fraction(1))
    prod_minus2 = math.prod((1 - 1 / (q * q) for q in primes), start=Fraction(1))
    return {
        "classical": {"full_level": N ** 3 * prod_minus2, "hecke": N * prod_plus},
        "swapped": {"full_level": N ** 3 * prod_plus, "hecke": N * prod_minus2},
    }


# --------------------------------------------------------------------------
# vectorised helpers on coordinate arrays

def qmul(x1, y1, x2, y2, K: Field):
    """Coordinatewise product of x1 + y1 w and x2 + y2 w."""
    return x1 * x2 - K.n0 * y1 * y2, x1 * y2 + x2 * y1 + K.D * y1 * y2


def qnorm(x, y, K: Field):
    return x * x + K.D * x * y + K.n0 * y * y


def qconj(x, y, K: Field):
    return x + K.D * y, -y


def qcomplex(x, y, K: Field):
    return x + y * K.w


def lattice_index(vectors) -> np.ndarray:
    """Index in Z^2 of the lattice spanned by each column family (0 if degenerate)."""
    g = None
    for k in range(len(vectors)):
        xk, yk = vectors[k]
        for l in range(k + 1, len(vectors)):
            xl, yl = vectors[l]
            m = np.abs(xk * yl - yk * xl)
            g = m if g is None else np.gcd(g, m)
    return g


def coprime_mask(ux, uy, vx, vy, K: Field) -> np.ndarray:
    """Vectorised is_coprime_pair: the ideal (u, v) is O_K iff the lattice
    spanned by u, u w, v, v w has index 1 in Z^2."""
    return lattice_index([(ux, uy), qmul(ux, uy, 0, 1, K), (vx, vy), qmul(vx, vy, 0, 1, K)]) == 1


def elements_up_to_norm(K: Field, bound: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of all elements of norm <= bound, sorted by (norm, x, y)."""
    D = K.D
    ymax = int(math.isqrt(4 * bound // -D)) + 1
    ys = np.arange(-ymax, ymax + 1, dtype=np.int64)
    r = int(math.isqrt(bound)) + 1
    # x + y*D/2 is the real part; it must lie in [-sqrt(bound), sqrt(bound)]
    off = np.arange(-r - 1, r + 2, dtype=np.int64)
    x = (-(ys * D) // 2)[:, None] + off[None, :]
    y = np.broadcast_to(ys[:, None], x.shape)
    x, y = x.ravel(), y.ravel()
    n = qnorm(x, y, K)
    keep = n <= bound
    x, y, n = x[keep], y[keep], n[keep]
    order = np.lexsort((y, x, n))
    return x[order], y[order]
