"""Upper half-space geometry around the plane C(f) of an indefinite form.

Points of H^3 are pairs (z, t) with t > 0.  The plane C(f) is carried to the
upper half-plane by a chart, and everything Fuchsian (feet of common
perpendiculars, point reduction, Dirichlet polygons) is done in those
intrinsic coordinates in double precision.  Group-theoretic conclusions are
re-checked exactly by the callers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .forms import HermitianForm, UniMat, classify, eval_form
from .ring import QuadInt, is_coprime_pair


class GeometryError(ValueError):
    """Degenerate geometric input, or a construction that failed to close."""


@dataclass(frozen=True)
class H3Point:
    z: complex
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("points of H^3 need t > 0")


def h3_distance(p: H3Point, q: H3Point) -> float:
    c = 1 + (abs(p.z - q.z) ** 2 + (p.t - q.t) ** 2) / (2 * p.t * q.t)
    return math.acosh(max(c, 1.0))


def mobius_h3(M, p: H3Point) -> H3Point:
    """Poincare extension of the homography of M (det 1) to H^3."""
    (a, b), (c, d) = M
    s = c * p.z + d
    den = abs(s) ** 2 + abs(c) ** 2 * p.t ** 2
    z = ((a * p.z + b) * s.conjugate() + a * c.conjugate() * p.t ** 2) / den
    return H3Point(complex(z), float(p.t / den))


def mobius(M, z):
    (a, b), (c, d) = M
    return (a * z + b) / (c * z + d)


# --------------------------------------------------------------------------
# the plane of a form, cusps and horoballs

@dataclass(frozen=True)
class CuspHoroball:
    """Image of the height-1 horoball at infinity under any g with g(1,0) = (u,v)."""

    cusp: Optional[complex]  # None for the point at infinity
    diameter: float  # Euclidean diameter, or height when cusp is None

    @classmethod
    def of_pair(cls, u: QuadInt, v: QuadInt) -> "CuspHoroball":
        if v.is_zero():
            return cls(None, 1.0 / u.norm())
        n = v.norm()
        return cls(complex(u) / complex(v), 1.0 / n)

    def signed_distance(self, p: H3Point) -> float:
        """Distance from p to the horosphere, negative inside the horoball."""
        if self.cusp is None:
            return math.log(self.diameter / p.t)
        return math.log((abs(p.z - self.cusp) ** 2 + p.t ** 2) / (p.t * self.diameter))


class PlaneChart:
    """Isometry from C(f) onto the upper half-plane.

    With a > 0, g0 = [[1/sqrt(a), -conj(b)/sqrt(a)], [0, sqrt(a)]] satisfies
    f o g0 = f_Delta, so g0^{-1} carries C(f) to the halfsphere of radius
    sqrt(Delta) about 0; the homography z -> -i (z - r) / (z + r) then sends
    that halfsphere onto the vertical half-plane over the real axis, whose
    points (x, 0, t) are read as x + i t.  Forms with a < 0 use -f, which has
    the same plane and the same automorphs.
    """

    def __init__(self, f: HermitianForm):
        if classify(f) != "indefinite":
            raise GeometryError("the plane C(f) needs an indefinite form")
        if f.a == 0:
            raise GeometryError("forms with a = 0 have a vertical plane; move f first")
        self.form = f
        self.sign = 1 if f.a > 0 else -1
        a = abs(f.a)
        bb = complex(f.b.conj()) * self.sign
        sa = math.sqrt(a)
        self.g0 = np.array([[1 / sa, -bb / sa], [0, sa]], dtype=complex)
        g0inv = np.array([[sa, bb / sa], [0, 1 / sa]], dtype=complex)
        r = math.sqrt(f.discriminant)
        self.radius = r
        h = np.array([[-1j, 1j * r], [1, r]], dtype=complex) / cmath.sqrt(-2j * r)
        self.phi = h @ g0inv
        self.phi_inv = np.linalg.inv(self.phi)

    @property
    def delta(self) -> int:
        return self.form.discriminant

    def intrinsic_matrix(self, g: UniMat, check: bool = True) -> np.ndarray:
        """Real 2x2 matrix of the action of an automorph g on the chart."""
        m = self.phi @ g.as_complex() @ self.phi_inv
        if check and np.max(np.abs(m.imag)) > 1e-7 * max(1.0, np.max(np.abs(m))):
            raise GeometryError("matrix does not preserve C(f) with its sides")
        return m.real.copy()

    def intrinsic_matrices(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised intrinsic_matrix for an (n, 8) array of entry coordinates."""
        w = self.form.field.w
        e = coords[:, 0::2] + coords[:, 1::2] * w
        g = e.reshape(-1, 2, 2)
        m = self.phi[None] @ g @ self.phi_inv[None]
        return m.real.copy()

    def cusp_data(self, u, v):
        """Image of the cusp u/v and the Euclidean diameter of its horoball."""
        (A, B), (C, E) = self.phi
        num = A * u + B * v
        den = C * u + E * v
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(den == 0, complex(np.inf, 0), num / np.where(den == 0, 1, den))
            return (q if np.ndim(q) else complex(q)), 1.0 / np.abs(den) ** 2

    def foot(self, u, v):
        """Intrinsic foot of the common perpendicular from the horoball of (u, v)
        to C(f), plus its signed length.  u, v are complex scalars or arrays."""
        (A, B), (C, E) = self.phi
        num = A * u + B * v
        den = C * u + E * v
        q = num / den
        im = (num * np.conj(den)).imag
        with np.errstate(divide="ignore"):
            length = np.log(2 * np.abs(im))
        return q.real + 1j * np.abs(q.imag), length

    def to_h3(self, w: complex) -> H3Point:
        return mobius_h3(self.phi_inv, H3Point(complex(w.real, 0.0), w.imag))

    def from_h3(self, p: H3Point) -> complex:
        q = mobius_h3(self.phi, p)
        if abs(q.z.imag) > 1e-8 * max(1.0, q.t):
            raise GeometryError("point is not on C(f)")
        return complex(q.z.real, q.t)

    def on_plane_residual(self, p: H3Point) -> float:
        """|f(z,1) + |a| t^2| scaled by a, zero exactly on C(f)."""
        f = self.form
        z = p.z
        val = f.a * abs(z) ** 2 + 2 * (complex(f.b) * z).real + f.c
        return abs(val + abs(f.a) * p.t ** 2) / abs(f.a)


def plane_coordinates(f: HermitianForm) -> PlaneChart:
    return PlaneChart(f)


@dataclass
class PlaneOfForm:
    form: HermitianForm
    center: complex
    radius: float

    @classmethod
    def of(cls, f: HermitianForm) -> "PlaneOfForm":
        if f.a == 0:
            raise GeometryError("vertical planes (a = 0) are not handled")
        if classify(f) != "indefinite":
            raise GeometryError("form is not indefinite")
        return cls(f, -complex(f.b.conj()) / f.a, math.sqrt(f.discriminant) / abs(f.a))

    def contains(self, p: H3Point, tol: float = 1e-9) -> bool:
        return abs(abs(p.z - self.center) ** 2 + p.t ** 2 - self.radius ** 2) < tol * max(1.0, self.radius ** 2)


def perp_length_pair(f: HermitianForm, u: QuadInt, v: QuadInt) -> float:
    """ln(|f(u,v)| / sqrt(Delta)), and -inf when f(u, v) = 0."""
    if not is_coprime_pair(u, v):
        raise ValueError("pair is not coprime")
    if classify(f) != "indefinite":
        raise ValueError("form is not indefinite")
    val = eval_form(f, u, v)
    if val == 0:
        return -math.inf
    return math.log(abs(val)) - 0.5 * math.log(f.discriminant)


def foot_of_perpendicular(plane: PlaneOfForm | PlaneChart, hb: CuspHoroball) -> tuple[H3Point, float]:
    """Foot on C(f) of the common perpendicular to a horoball, and its signed length.

    The length is measured geometrically, from the foot to the horosphere.
    """
    chart = plane if isinstance(plane, PlaneChart) else PlaneChart(plane.form)
    if hb.cusp is None:
        q, diam = chart.cusp_data(1.0, 0.0)
        diam = diam / hb.diameter
    else:
        q, diam = chart.cusp_data(hb.cusp, 1.0)
        diam = diam * hb.diameter
    if abs(q.imag) < 1e-12 * max(1.0, abs(q)):
        raise GeometryError("cusp lies on the boundary circle of C(f)")
    foot = chart.to_h3(complex(q.real, abs(q.imag)))
    return foot, hb.signed_distance(foot)


# --------------------------------------------------------------------------
# the hyperbolic plane

def h2_distance(z, w):
    c = 1 + np.abs(z - w) ** 2 / (2 * np.imag(z) * np.imag(w))
    return np.arccosh(np.maximum(c, 1.0))


def act_h2(M: np.ndarray, z):
    """Vectorised action of real matrices (..., 2, 2) on points z."""
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    return (a * z + b) / (c * z + d)


def reduce_point(p: complex, gens: Sequence[np.ndarray], base: complex, tol: float = 1e-9,
                 max_steps: int = 10_000) -> tuple[complex, list[int]]:
    """Greedy Dirichlet reduction of p towards base.

    Repeatedly applies the generator that brings p closest to base while the
    gain exceeds tol.  The word lists generator indices in order of
    application, so the composite is gens[w[-1]] @ ... @ gens[w[0]].
    """
    mats = np.asarray(gens)
    word: list[int] = []
    d = float(h2_distance(p, base))
    for _ in range(max_steps):
        imgs = act_h2(mats, p)
        ds = h2_distance(imgs, base)
        j = int(np.argmin(ds))
        if not ds[j] < d - tol:
            return p, word
        p, d = complex(imgs[j]), float(ds[j])
        word.append(j)
    raise GeometryError("reduction did not terminate")


def reduce_points(ps: np.ndarray, gens: np.ndarray, base: complex, tol: float = 1e-9,
                  max_steps: int = 10_000):
    """Vectorised reduce_point; yields (active indices, chosen generator) per step."""
    ps = np.array(ps, dtype=complex)
    d = h2_distance(ps, base)
    active = np.arange(len(ps))
    for _ in range(max_steps):
        if not len(active):
            return
        imgs = act_h2(gens[:, None], ps[None, active])
        ds = h2_distance(imgs, base)
        j = np.argmin(ds, axis=0)
        best = ds[j, np.arange(len(active))]
        move = best < d[active] - tol
        idx = active[move]
        jm = j[move]
        ps[idx] = imgs[jm, np.flatnonzero(move)]
        d[idx] = best[move]
        active = idx
        yield idx, jm, ps
    raise GeometryError("reduction did not terminate")


# Klein model centred at a base point of the upper half-plane

def to_klein(w, base: complex):
    w = np.asarray(w, dtype=complex)
    inf = ~np.isfinite(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (w - base) / (w - np.conj(base))
    z = np.where(inf, 1.0 + 0j, z)
    k = 2 * z / (1 + np.abs(z) ** 2)
    return k if k.ndim else complex(k)


def from_klein(k, base: complex):
    z = k / (1 + np.sqrt(np.maximum(0.0, 1 - np.abs(k) ** 2)))
    return (base - np.conj(base) * z) / (1 - z)


@dataclass
class DirichletPolygon:
    vertices: np.ndarray  # Klein coordinates (complex), counter-clockwise
    ideal: np.ndarray  # bool per vertex
    angles: np.ndarray  # interior angles, 0 at ideal vertices
    edge_labels: list  # element index of the bisector carrying edge i -> i+1
    area: float
    closed: bool
    base: complex

    def vertices_h2(self) -> np.ndarray:
        return from_klein(self.vertices, self.base)

    def to_json(self) -> dict:
        v = self.vertices_h2()
        return {
            "base": [self.base.real, self.base.imag],
            "vertices": [[float(z.real), float(z.imag)] if not i else [float(z.real), 0.0]
                         for z, i in zip(v, self.ideal)],
            "ideal": [bool(i) for i in self.ideal],
            "angles": [float(a) for a in self.angles],
            "area": float(self.area),
            "closed": bool(self.closed),
        }


def _clip(poly: list, labels: list, n: complex, h: float, lab: int, eps: float = 1e-14):
    """Clip a convex polygon by {x : <x, n> <= h}; labels[i] tags edge i -> i+1."""
    vals = [(p.real * n.real + p.imag * n.imag) - h for p in poly]
    if all(v <= eps for v in vals):
        return poly, labels
    out, out_labels = [], []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        vp, vq = vals[i], vals[(i + 1) % m]
        p_in, q_in = vp <= eps, vq <= eps
        if p_in:
            out.append(p)
            out_labels.append(labels[i])
        if p_in != q_in:
            x = p + (vp / (vp - vq)) * (q - p)
            out.append(x)
            # leaving: the new edge from x runs along the cutting line
            out_labels.append(lab if p_in else labels[i])
    return out, out_labels


def _klein_angle(v: complex, a: complex, b: complex) -> float:
    """Hyperbolic angle at v between the Klein chords towards a and b."""
    x = np.array([v.real, v.imag])
    s = 1 - x @ x
    t1 = np.array([(a - v).real, (a - v).imag])
    t2 = np.array([(b - v).real, (b - v).imag])

    def g(p, q):
        return (p @ q) / s + (x @ p) * (x @ q) / s ** 2

    c = g(t1, t2) / math.sqrt(g(t1, t1) * g(t2, t2))
    return math.acos(max(-1.0, min(1.0, c)))


def dirichlet_polygon(mats: np.ndarray, base: complex, ideal_tol: float = 1e-9,
                      merge_tol: float = 1e-6) -> DirichletPolygon:
    """Dirichlet polygon of base for the group elements given as real matrices.

    In the Klein model centred at base, the bisector of base and g(base) is the
    chord {x : <x, u> = tanh(d/2)}, u the direction of g(base) and d its
    distance, so the polygon is a Euclidean intersection of half-planes.
    """
    imgs = act_h2(mats, base)
    d = h2_distance(imgs, base)
    keep = np.flatnonzero(d > 1e-9)
    keep = keep[np.argsort(d[keep], kind="stable")]
    k = to_klein(imgs[keep], base)
    # counter-clockwise square
    poly = [complex(2, -2), complex(2, 2), complex(-2, 2), complex(-2, -2)]
    labels = [-1, -1, -1, -1]
    for idx, kk, dd in zip(keep, k, d[keep]):
        n = kk / abs(kk)
        poly, labels = _clip(poly, labels, n, math.tanh(dd / 2), int(idx))
    verts = np.array(poly)
    r = np.abs(verts)
    closed = bool(np.all(r <= 1 + 1e-7)) and -1 not in labels
    # merge clusters of vertices sitting at the same ideal point
    vs, labs = [], []
    for v, lab in zip(verts, labels):
        if vs and abs(v - vs[-1]) < merge_tol and abs(v) > 1 - 1e-6:
            labs[-1] = lab
            continue
        vs.append(v)
        labs.append(lab)
    while len(vs) > 1 and abs(vs[0] - vs[-1]) < merge_tol and abs(vs[0]) > 1 - 1e-6:
        vs.pop()
        labs.pop()
    vs = np.array(vs)
    ideal = np.abs(vs) > 1 - ideal_tol
    n = len(vs)
    angles = np.zeros(n)
    for i in range(n):
        if not ideal[i] and closed:
            angles[i] = _klein_angle(vs[i], vs[i - 1], vs[(i + 1) % n])
    area = (n - 2) * math.pi - float(angles.sum()) if closed else math.inf
    return DirichletPolygon(vs, ideal, angles, labs, area, closed, base)


def dirichlet_domain_area(gens: Sequence[np.ndarray], base: complex, radius: float = 8.0,
                          max_elements: int = 20000) -> tuple[float, DirichletPolygon]:
    """Area of the Dirichlet polygon of the group generated by gens (real matrices).

    The group is explored by products of generators, keeping elements that move
    base by at most radius.  An unclosed polygon raises GeometryError.
    """
    mats = group_ball(np.asarray(gens), base, radius, max_elements)
    poly = dirichlet_polygon(mats, base)
    if not poly.closed:
        raise GeometryError("Dirichlet polygon does not close; enlarge the generator set or radius")
    return poly.area, poly


def _point_key(z: complex) -> tuple[int, int]:
    return (round(z.real * 1e8), round(math.log(z.imag) * 1e8))


def group_ball(gens: np.ndarray, base: complex, radius: float, max_elements: int = 20000) -> np.ndarray:
    """Elements reachable by products of generators whose displacement stays <= radius."""
    ident = np.eye(2)
    seen = {_point_key(base): ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for m in frontier:
            prods = gens @ m
            imgs = act_h2(prods, base)
            ds = h2_distance(imgs, base)
            for p, z, dd in zip(prods, imgs, ds):
                if dd > radius:
                    continue
                key = _point_key(complex(z))
                if key not in seen:
                    seen[key] = p
                    nxt.append(p)
        if len(seen) > max_elements:
            raise GeometryError("group ball exceeds max_elements")
        frontier = nxt
    return np.array(list(seen.values()))
