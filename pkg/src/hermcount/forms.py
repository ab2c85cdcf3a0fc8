"""Integral binary Hermitian forms f(u, v) = a|u|^2 + 2 Re(b u conj(v)) + c|v|^2.

SL_2(O_K) acts on the right by precomposition, f -> f o g, which on the
Hermitian matrix [[a, conj(b)], [b, c]] is H -> g^* H g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .ring import (Field, FieldMismatch, QuadIdeal, QuadInt, elements_up_to_norm, qconj, qmul,
                   qnorm)


@dataclass(frozen=True)
class HermitianForm:
    a: int
    b: QuadInt
    c: int

    @property
    def field(self) -> Field:
        return self.b.field

    @classmethod
    def make(cls, K: Field, a: int, b: tuple[int, int] | QuadInt, c: int) -> "HermitianForm":
        if not isinstance(b, QuadInt):
            b = QuadInt(int(b[0]), int(b[1]), K)
        return cls(int(a), b, int(c))

    @classmethod
    def f_delta(cls, K: Field, delta: int) -> "HermitianForm":
        """|u|^2 - delta |v|^2."""
        return cls(1, K.zero, -delta)

    def __call__(self, u: QuadInt, v: QuadInt) -> int:
        return eval_form(self, u, v)

    def __neg__(self) -> "HermitianForm":
        return HermitianForm(-self.a, -self.b, -self.c)

    def scale(self, k: int) -> "HermitianForm":
        return HermitianForm(k * self.a, k * self.b, k * self.c)

    @property
    def discriminant(self) -> int:
        return self.b.norm() - self.a * self.c

    def content(self) -> int:
        return math.gcd(self.a, self.c, self.b.x, self.b.y)

    def primitive_part(self) -> "HermitianForm":
        k = self.content()
        return HermitianForm(self.a // k, QuadInt(self.b.x // k, self.b.y // k, self.field), self.c // k)

    def compose(self, g: "UniMat") -> "HermitianForm":
        return compose_form(self, g)

    def values(self, ux, uy, vx, vy) -> np.ndarray:
        """Vectorised evaluation on coordinate arrays of u and v."""
        K = self.field
        cx, cy = qconj(vx, vy, K)
        px, py = qmul(ux, uy, cx, cy, K)
        tx, ty = qmul(px, py, self.b.x, self.b.y, K)
        return self.a * qnorm(ux, uy, K) + (2 * tx + K.D * ty) + self.c * qnorm(vx, vy, K)

    def to_json(self) -> dict:
        return {"D_K": self.field.D, "a": self.a, "b": self.b.to_json(), "c": self.c}

    @classmethod
    def from_json(cls, data: dict) -> "HermitianForm":
        K = Field(int(data["D_K"]))
        return cls(int(data["a"]), QuadInt.from_json(data["b"], K), int(data["c"]))

    def __str__(self) -> str:
        return f"({self.a}, {self.b}, {self.c}) over D_K={self.field.D}"


@dataclass(frozen=True)
class UniMat:
    """A matrix [[alpha, beta], [gamma, delta]] in SL_2(O_K)."""

    alpha: QuadInt
    beta: QuadInt
    gamma: QuadInt
    delta: QuadInt

    def __post_init__(self):
        det = self.alpha * self.delta - self.beta * self.gamma
        if (det.x, det.y) != (1, 0):
            raise ValueError(f"determinant is {det}, not 1")

    @property
    def field(self) -> Field:
        return self.alpha.field

    @classmethod
    def identity(cls, K: Field) -> "UniMat":
        return cls(K.one, K.zero, K.zero, K.one)

    @classmethod
    def from_ints(cls, K: Field, rows) -> "UniMat":
        """Build from [[x, y] coordinate pairs] or plain ints, row by row."""
        def el(e):
            return K(e, 0) if isinstance(e, int) else K(*e)
        (p, q), (r, s) = rows
        return cls(el(p), el(q), el(r), el(s))

    def entries(self) -> tuple[QuadInt, QuadInt, QuadInt, QuadInt]:
        return self.alpha, self.beta, self.gamma, self.delta

    def __matmul__(self, other: "UniMat") -> "UniMat":
        a, b, c, d = self.entries()
        e, f, g, h = other.entries()
        return UniMat(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def __neg__(self) -> "UniMat":
        return UniMat(-self.alpha, -self.beta, -self.gamma, -self.delta)

    def inverse(self) -> "UniMat":
        return UniMat(self.delta, -self.beta, -self.gamma, self.alpha)

    def act(self, u: QuadInt, v: QuadInt) -> tuple[QuadInt, QuadInt]:
        return self.alpha * u + self.beta * v, self.gamma * u + self.delta * v

    def is_identity(self) -> bool:
        return self == UniMat.identity(self.field)

    def height(self) -> int:
        return max(e.norm() for e in self.entries())

    def as_complex(self) -> np.ndarray:
        return np.array([[complex(self.alpha), complex(self.beta)],
                         [complex(self.gamma), complex(self.delta)]])

    def coords(self) -> tuple[int, ...]:
        return tuple(v for e in self.entries() for v in (e.x, e.y))

    def in_level(self, I: QuadIdeal) -> bool:
        return all(I.contains(e) for e in (self.alpha - 1, self.delta - 1, self.beta, self.gamma))

    def in_hecke(self, I: QuadIdeal) -> bool:
        return I.contains(self.gamma)

    def to_json(self) -> list:
        return [[e.to_json() for e in (self.alpha, self.beta)], [e.to_json() for e in (self.gamma, self.delta)]]

    @classmethod
    def from_json(cls, data, K: Field) -> "UniMat":
        (p, q), (r, s) = data
        return cls(*(QuadInt.from_json(e, K) for e in (p, q, r, s)))

    def __repr__(self) -> str:
        return f"UniMat([[{self.alpha}, {self.beta}], [{self.gamma}, {self.delta}]])"


def eval_form(f: HermitianForm, u: QuadInt, v: QuadInt) -> int:
    if u.field != f.field or v.field != f.field:
        raise FieldMismatch("form and arguments live over different fields")
    return f.a * u.norm() + (f.b * u * v.conj()).trace() + f.c * v.norm()


def discriminant(f: HermitianForm) -> int:
    return f.discriminant


def compose_form(f: HermitianForm, g: UniMat) -> HermitianForm:
    """The form f o g, i.e. (u, v) -> f(g (u, v))."""
    if g.field != f.field:
        raise FieldMismatch("form and matrix live over different fields")
    al, be, ga, de = g.entries()
    p = f.a * al + f.b.conj() * ga
    q = f.b * al + f.c * ga
    b_new = be.conj() * p + de.conj() * q
    return HermitianForm(eval_form(f, al, ga), b_new, eval_form(f, be, de))


def classify(f: HermitianForm) -> str:
    d = f.discriminant
    return "indefinite" if d > 0 else ("definite" if d < 0 else "degenerate")


def is_primitive(f: HermitianForm) -> bool:
    # gcd over a, c and the basis coordinates of b; for Q(i) this equals the
    # gcd of a, c, Re b, Im b because (x, y) -> (x - 2y, y) is unimodular
    return f.content() == 1


@dataclass(frozen=True)
class BoundaryCircle:
    """Zero set of f(z, 1) on the Riemann sphere.

    kind == "circle": center (basis coordinates, exact) and radius squared.
    kind == "line_with_infinity": the line Re(b z) = -c/2 together with infinity.
    """

    kind: str
    center: Optional[tuple[Fraction, Fraction]] = None
    radius2: Optional[Fraction] = None
    line_b: Optional[QuadInt] = None
    line_c: Optional[int] = None

    def center_complex(self, K: Field) -> complex:
        return float(self.center[0]) + float(self.center[1]) * K.w


def boundary_circle(f: HermitianForm) -> BoundaryCircle:
    if classify(f) != "indefinite":
        raise ValueError("boundary circles are only defined for indefinite forms")
    if f.a == 0:
        return BoundaryCircle("line_with_infinity", line_b=f.b, line_c=f.c)
    bc = f.b.conj()
    return BoundaryCircle("circle", center=(Fraction(-bc.x, f.a), Fraction(-bc.y, f.a)),
                          radius2=Fraction(f.discriminant, f.a * f.a))


# --------------------------------------------------------------------------
# bounded searches for g with f o g = target

def _first_columns(f: HermitianForm, value: int, ex: np.ndarray, ey: np.ndarray, chunk: int = 256):
    """All (alpha, gamma) from the element list with f(alpha, gamma) == value."""
    out_a, out_g = [], []
    for start in range(0, len(ex), chunk):
        gx, gy = ex[start:start + chunk, None], ey[start:start + chunk, None]
        vals = f.values(ex[None, :], ey[None, :], gx, gy)
        gi, ai = np.nonzero(vals == value)
        out_a.append(ai)
        out_g.append(gi + start)
    return np.concatenate(out_a), np.concatenate(out_g)


def _solve_second_column(f, target, ax, ay, gx, gy):
    """Second columns forced by det = 1 and the middle coefficient (target.a != 0).

    With P = a alpha + conj(b) gamma and Q = b alpha + c gamma:
        beta  = (alpha conj(b_t) - conj(Q)) / a_t
        delta = (gamma conj(b_t) + conj(P)) / a_t
    Returns coordinate arrays and a mask of the entries that are integral.
    """
    K = f.field
    bcx, bcy = f.b.conj().x, f.b.conj().y
    t = target.b.conj()
    p = qmul(bcx, bcy, gx, gy, K)
    px, py = f.a * ax + p[0], f.a * ay + p[1]
    q = qmul(f.b.x, f.b.y, ax, ay, K)
    qx, qy = q[0] + f.c * gx, q[1] + f.c * gy
    n1 = qmul(ax, ay, t.x, t.y, K)
    cqx, cqy = qconj(qx, qy, K)
    bx, by = n1[0] - cqx, n1[1] - cqy
    n2 = qmul(gx, gy, t.x, t.y, K)
    cpx, cpy = qconj(px, py, K)
    dx, dy = n2[0] + cpx, n2[1] + cpy
    at = target.a
    ok = (bx % at == 0) & (by % at == 0) & (dx % at == 0) & (dy % at == 0)
    return bx // at, by // at, dx // at, dy // at, ok


def transforms_between(f: HermitianForm, target: HermitianForm, height: int) -> list[UniMat]:
    """Every g in SL_2(O_K) with entry norms <= height and f o g == target."""
    K = f.field
    if target.field != K:
        raise FieldMismatch("forms over different fields")
    if target.a == 0 and target.c != 0:
        # f o g = t  <=>  f o (g S) = t o S with S = [[0, -1], [1, 0]]; S permutes columns
        S = UniMat(K.zero, -K.one, K.one, K.zero)
        return [g @ S.inverse() for g in transforms_between(f, compose_form(target, S), height)]
    ex, ey = elements_up_to_norm(K, height)
    ai, gi = _first_columns(f, target.a, ex, ey)
    ax, ay, gx, gy = ex[ai], ey[ai], ex[gi], ey[gi]
    found = []
    if target.a != 0:
        bx, by, dx, dy, ok = _solve_second_column(f, target, ax, ay, gx, gy)
        ok &= (qnorm(bx, by, K) <= height) & (qnorm(dx, dy, K) <= height)
        for k in np.flatnonzero(ok):
            cand = (K(ax[k], ay[k]), K(bx[k], by[k]), K(gx[k], gy[k]), K(dx[k], dy[k]))
            found.append(cand)
    else:
        bi, di = _first_columns(f, target.c, ex, ey)
        for k in range(len(ai)):
            al, ga = K(ax[k], ay[k]), K(gx[k], gy[k])
            bx, by, dx, dy = ex[bi], ey[bi], ex[di], ey[di]
            d1 = qmul(al.x, al.y, dx, dy, K)
            d2 = qmul(bx, by, ga.x, ga.y, K)
            det_ok = (d1[0] - d2[0] == 1) & (d1[1] - d2[1] == 0)
            for m in np.flatnonzero(det_ok):
                found.append((al, K(bx[m], by[m]), ga, K(dx[m], dy[m])))
    out = []
    for al, be, ga, de in found:
        try:
            g = UniMat(al, be, ga, de)
        except ValueError:
            continue
        if compose_form(f, g) == target:
            out.append(g)
    return out


@dataclass(frozen=True)
class ReciprocityResult:
    witness: Optional[UniMat]
    height_bound: int
    # absence of a witness only covers the searched height
    bounded_search: bool = True

    @property
    def found(self) -> bool:
        return self.witness is not None


def reciprocity_witness(f: HermitianForm, G_membership: Callable[[UniMat], bool] | None = None,
                        height_bound: int = 10) -> ReciprocityResult:
    """Search for g in G with f o g = -f among matrices of bounded height."""
    if classify(f) != "indefinite":
        raise ValueError("reciprocity is only considered for indefinite forms")
    for g in sorted(transforms_between(f, -f, height_bound), key=lambda g: (g.height(), g.coords())):
        if G_membership is None or G_membership(g):
            return ReciprocityResult(g, height_bound)
    return ReciprocityResult(None, height_bound)
