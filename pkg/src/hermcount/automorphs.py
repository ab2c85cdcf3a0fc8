"""Automorph groups SU_f(O_K), their Dirichlet domains, and orbit canonicalisation.

A representation (u, v) is pushed to a canonical member of its SU_f-orbit by
taking the foot of its common perpendicular on C(f), reducing that foot
into the Dirichlet polygon of a base point with exact matrices applied
alongside, and finally taking the lexicographically least pair among the
images that land equally close to the base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .forms import HermitianForm, UniMat, classify, compose_form, transforms_between
from .hyperbolic import (DirichletPolygon, GeometryError, PlaneChart, act_h2, dirichlet_polygon,
                         from_klein, h2_distance, to_klein)
from .ring import Field, QuadIdeal, QuadInt, QuotientRing, is_coprime_pair, qmul


@dataclass
class AutomorphSet:
    form: HermitianForm
    gens: list[UniMat]
    search_height: int
    complete_hint: bool = False

    def __post_init__(self):
        for g in self.gens:
            if compose_form(self.form, g) != self.form:
                raise ValueError(f"{g} is not an automorph of {self.form}")

    def to_json(self) -> dict:
        return {"form": self.form.to_json(), "height": self.search_height,
                "gens": [g.to_json() for g in self.gens]}

    @classmethod
    def from_json(cls, data: dict) -> "AutomorphSet":
        f = HermitianForm.from_json(data["form"])
        return cls(f, [UniMat.from_json(g, f.field) for g in data["gens"]], int(data["height"]))


def find_automorphs(f: HermitianForm, height: int,
                    subgroup: Optional[Callable[[UniMat], bool]] = None,
                    word_length: int = 8) -> AutomorphSet:
    """All automorphs with entry norms <= height (closed under inverse, with -id).

    With a subgroup predicate, the result instead holds elements of SU_f
    intersected with the subgroup, found by filtering words of bounded length
    in the full set.
    """
    if classify(f) != "indefinite":
        raise ValueError("automorph search needs an indefinite form")
    gens = sorted(transforms_between(f, f, height), key=lambda g: (g.height(), g.coords()))
    full = AutomorphSet(f, gens, height)
    if subgroup is None:
        return full
    return AutomorphSet(f, subgroup_elements(full.gens, subgroup, word_length), height)


def subgroup_elements(gens: list[UniMat], member: Callable[[UniMat], bool], word_length: int,
                      max_elements: int = 20000) -> list[UniMat]:
    """Members of the subgroup among words of length <= word_length in gens."""
    K = gens[0].field
    ident = UniMat.identity(K)
    seen = {ident.coords(): ident}
    frontier = [ident]
    for _ in range(word_length):
        nxt = []
        for m in frontier:
            for g in gens:
                p = g @ m
                c = p.coords()
                if c not in seen:
                    seen[c] = p
                    nxt.append(p)
        if len(seen) > max_elements:
            break
        frontier = nxt
    out = [g for g in seen.values() if member(g)]
    return sorted(out, key=lambda g: (g.height(), g.coords()))


# --------------------------------------------------------------------------
# exact matrices as int64 coordinate rows (alpha.x, alpha.y, beta.x, ..., delta.y)

def matmul8(A: np.ndarray, B: np.ndarray, K: Field) -> np.ndarray:
    def el(M, k):
        return M[..., 2 * k], M[..., 2 * k + 1]

    def add(p, q):
        return p[0] + q[0], p[1] + q[1]

    def mul(p, q):
        return qmul(p[0], p[1], q[0], q[1], K)

    a, b, c, d = (el(A, k) for k in range(4))
    e, f, g, h = (el(B, k) for k in range(4))
    out = [add(mul(a, e), mul(b, g)), add(mul(a, f), mul(b, h)),
           add(mul(c, e), mul(d, g)), add(mul(c, f), mul(d, h))]
    return np.stack([x for pair in out for x in pair], axis=-1)


def apply8(G: np.ndarray, ux, uy, vx, vy, K: Field):
    """(u, v) -> g (u, v) for coordinate rows G (broadcasting over points)."""
    au = qmul(G[..., 0], G[..., 1], ux, uy, K)
    bv = qmul(G[..., 2], G[..., 3], vx, vy, K)
    cu = qmul(G[..., 4], G[..., 5], ux, uy, K)
    dv = qmul(G[..., 6], G[..., 7], vx, vy, K)
    return au[0] + bv[0], au[1] + bv[1], cu[0] + dv[0], cu[1] + dv[1]


def _to_unimat(row, K: Field) -> UniMat:
    r = [int(v) for v in row]
    return UniMat(K(r[0], r[1]), K(r[2], r[3]), K(r[4], r[5]), K(r[6], r[7]))


def _point_key(z: complex) -> tuple[int, int]:
    return (round(z.real * 1e8), round(math.log(z.imag) * 1e8))


def default_base(seed: int = 0) -> complex:
    """Generic base point near i (the apex of C(f) in chart coordinates)."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-0.25, 0.25, size=2)
    return complex(x * math.sqrt(2), math.exp(y * math.sqrt(3)))


@dataclass
class FuchsianData:
    """Dirichlet domain of the automorph group and everything needed to reduce into it."""

    form: HermitianForm
    chart: PlaneChart
    base: complex
    ball: np.ndarray  # (n, 8) exact coordinates, row 0 the identity, sorted by displacement
    mats: np.ndarray  # (n, 2, 2) chart matrices
    disp: np.ndarray  # displacement of the base point
    polygon: DirichletPolygon
    sides: np.ndarray  # ball indices of the side pairings
    radius: float
    generator_height: int

    @property
    def field(self) -> Field:
        return self.form.field

    @property
    def area(self) -> float:
        return self.polygon.area

    def element(self, i: int) -> UniMat:
        return _to_unimat(self.ball[i], self.field)

    def side_elements(self) -> list[UniMat]:
        return [self.element(i) for i in self.sides]

    def max_vertex_distance(self) -> float:
        v = self.polygon.vertices_h2()[~self.polygon.ideal]
        return float(h2_distance(v, self.base).max()) if len(v) else 0.0


def _ball(gens8: np.ndarray, chart: PlaneChart, base: complex, radius: float, max_elements: int):
    K = chart.form.field
    ident = np.array([1, 0, 0, 0, 0, 0, 1, 0], dtype=np.int64)
    rows = [ident]
    seen = {_point_key(base)}
    frontier = ident[None]
    while len(frontier):
        prods = matmul8(gens8[:, None, :], frontier[None, :, :], K).reshape(-1, 8)
        imgs = act_h2(chart.intrinsic_matrices(prods), base)
        ds = h2_distance(imgs, base)
        nxt = []
        for row, z, dd in zip(prods, imgs, ds):
            if dd > radius:
                continue
            key = _point_key(complex(z))
            if key not in seen:
                seen.add(key)
                nxt.append(row)
        rows += nxt
        if len(rows) > max_elements:
            raise GeometryError(f"group ball of radius {radius:.2f} exceeds {max_elements} elements")
        frontier = np.array(nxt, dtype=np.int64).reshape(-1, 8)
    ball = np.array(rows, dtype=np.int64)
    if np.abs(ball).max() > 2 ** 40:
        raise OverflowError("ball entries too large for int64 arithmetic")
    return ball


def build_fuchsian(aset: AutomorphSet, base: complex | None = None, seed: int = 0,
                   radius: float = 5.0, margin: float = 1.5, max_radius: float = 14.0,
                   max_elements: int = 60000) -> FuchsianData:
    """Dirichlet domain of the group generated by an automorph set.

    The ball of group elements is grown until it contains every element that
    moves the base point by at most twice the distance to the farthest finite
    vertex (plus a margin), and the polygon is stable.
    """
    f = aset.form
    K = f.field
    chart = PlaneChart(f)
    base = default_base(seed) if base is None else base
    gens8 = np.array([g.coords() for g in aset.gens], dtype=np.int64).reshape(-1, 8)
    if not len(gens8):
        raise GeometryError("empty generator set")
    prev = None
    while True:
        ball = _ball(gens8, chart, base, radius, max_elements)
        mats = chart.intrinsic_matrices(ball)
        disp = h2_distance(act_h2(mats, base), base)
        order = np.argsort(disp, kind="stable")
        ball, mats, disp = ball[order], mats[order], disp[order]
        poly = dirichlet_polygon(mats, base)
        if not poly.closed:
            if radius >= max_radius:
                raise GeometryError("Dirichlet polygon does not close; generators incomplete?")
            radius += 2.0
            continue
        v = poly.vertices_h2()[~poly.ideal]
        rmax = float(h2_distance(v, base).max()) if len(v) else 1.0
        sides = np.array(sorted(set(poly.edge_labels)), dtype=np.int64)
        sig = (len(poly.vertices), round(poly.area, 9))
        if radius >= 2 * rmax + margin and sig == prev:
            break
        prev = sig
        new_radius = max(radius, 2 * rmax + margin)
        if new_radius > max_radius:
            raise GeometryError(f"Dirichlet domain needs ball radius {new_radius:.2f} > {max_radius}")
        # side pairings generate the group once the polygon is right
        gens8 = ball[sides]
        radius = new_radius + (0.0 if sig == prev else 0.5)
    return FuchsianData(f, chart, base, ball, mats, disp, poly, sides, radius, aset.search_height)


def fuchsian_for_form(f: HermitianForm, height: int = 20, max_height: int = 3200,
                      **kw) -> tuple[AutomorphSet, FuchsianData]:
    """Search automorphs, doubling the height until the Dirichlet polygon closes."""
    while True:
        aset = find_automorphs(f, height)
        try:
            return aset, build_fuchsian(aset, **kw)
        except GeometryError:
            if 2 * height > max_height:
                raise
            height *= 2


# --------------------------------------------------------------------------
# finite images for congruence subgroups

class FiniteImage:
    """Image of the automorph group in SL_2(O_K / I), closed from the side pairings."""

    def __init__(self, fd: FuchsianData, ideal: QuadIdeal, max_size: int = 200000):
        self.ring = R = QuotientRing(ideal)
        self.ideal = ideal
        self.fd = fd
        gens = [self._reduce(fd.ball[i]) for i in fd.sides]
        ident = self._reduce(fd.ball[0])
        self.elements = [ident]
        self.index = {ident: 0}
        k = 0
        while k < len(self.elements):
            m = self.elements[k]
            for g in gens:
                p = self._mul(g, m)
                if p not in self.index:
                    self.index[p] = len(self.elements)
                    self.elements.append(p)
                    if len(self.elements) > max_size:
                        raise GeometryError("finite image too large")
            k += 1
        self.size = len(self.elements)
        self._tables: dict[int, np.ndarray] = {}
        self.inverse = np.array([self.index[self._inv(m)] for m in self.elements])

    def _reduce(self, row) -> tuple[int, int, int, int]:
        R = self.ring
        return tuple(int(R.encode(row[2 * k], row[2 * k + 1])) for k in range(4))

    def _mul(self, A, B):
        R = self.ring
        a, b, c, d = A
        e, f, g, h = B
        return (int(R.add(R.mul(a, e), R.mul(b, g))), int(R.add(R.mul(a, f), R.mul(b, h))),
                int(R.add(R.mul(c, e), R.mul(d, g))), int(R.add(R.mul(c, f), R.mul(d, h))))

    def _inv(self, A):
        R = self.ring
        a, b, c, d = A
        return (d, int(R.neg(b)), int(R.neg(c)), a)

    def left_table(self, ball_index: int) -> np.ndarray:
        """table[w] = index of (ball element) * (element w)."""
        t = self._tables.get(ball_index)
        if t is None:
            g = self._reduce(self.fd.ball[ball_index])
            t = np.array([self.index[self._mul(g, m)] for m in self.elements])
            self._tables[ball_index] = t
        return t

    def neg_table(self) -> np.ndarray:
        R = self.ring
        one = R.code(R.K.one)
        m1 = int(R.neg(one))
        neg = (m1, 0, 0, m1)
        return np.array([self.index[self._mul(neg, m)] for m in self.elements])

    def coset_labels(self, member: Callable[[tuple], bool]) -> np.ndarray:
        """label[k] = least index in the right coset H k, H = image members."""
        H = [i for i, m in enumerate(self.elements) if member(m)]
        labels = np.full(self.size, -1)
        for k in range(self.size):
            if labels[k] >= 0:
                continue
            coset = [self.index[self._mul(self.elements[h], self.elements[k])] for h in H]
            labels[coset] = min(coset)
        return labels

    def subgroup_index(self, kind: str) -> int:
        """[±SU_f : ±(SU_f ∩ G)] for G = Gamma_K(I) ("level") or Gamma_K,0(I) ("hecke")."""
        member = self.member_level if kind == "level" else self.member_hecke
        H = {i for i, m in enumerate(self.elements) if member(m)}
        neg = self.neg_table()
        H |= {int(neg[i]) for i in H}
        return self.size // len(H)

    def orbit_weights(self, kind: str, ru, rv) -> np.ndarray:
        """Number of (SU_f ∩ G)-orbits inside the SU_f-orbit of a non-null pair.

        For residues (ru, rv) of the pair this is #{g in image : g (ru, rv)
        passes the congruence filter} / #(image of SU_f ∩ G); the stabiliser
        of a non-null pair in SU_f is trivial, so every such coset is one orbit.
        """
        R = self.ring
        E = np.array(self.elements, dtype=np.int64)
        one = R.code(R.K.one)
        sub = sum(1 for m in self.elements if self.member(kind)(m))
        out = np.zeros(len(ru), dtype=np.int64)
        for k, (a, b) in enumerate(zip(ru, rv)):
            nu = R.add(R.mul(E[:, 0], a), R.mul(E[:, 1], b))
            nv = R.add(R.mul(E[:, 2], a), R.mul(E[:, 3], b))
            ok = nv == 0
            if kind == "level":
                ok &= nu == one
            hits = int(np.count_nonzero(ok))
            if hits % sub:
                raise AssertionError("filter set is not a union of cosets")
            out[k] = hits // sub
        return out

    def member(self, kind: str) -> Callable[[tuple], bool]:
        return self.member_level if kind == "level" else self.member_hecke

    def member_level(self, m) -> bool:
        R = self.ring
        one = R.code(R.K.one)
        return m == (one, 0, 0, one)

    def member_hecke(self, m) -> bool:
        return m[2] == 0


# --------------------------------------------------------------------------
# batch canonicalisation

@dataclass
class CanonicalBatch:
    ux: np.ndarray
    uy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ambiguous: np.ndarray  # near-ties at the numerical resolution
    word: Optional[np.ndarray] = None  # exact (n, 8) element W with W (u,v) = canonical
    image: Optional[np.ndarray] = None  # index of W in a FiniteImage
    steps: int = 0
    fixed: Optional[np.ndarray] = None  # reduced foot fixed by a nontrivial element


def _lexmin_rows(cands: np.ndarray, owner: np.ndarray, n: int) -> np.ndarray:
    """Index into cands of the lexicographically least row for each owner."""
    order = np.lexsort((cands[:, 3], cands[:, 2], cands[:, 1], cands[:, 0], owner))
    first = np.ones(len(order), dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    res = np.empty(n, dtype=np.int64)
    res[owner[order][first]] = order[first]
    return res


def canonicalize(fd: FuchsianData, ux, uy, vx, vy, track: str | None = None,
                 image: FiniteImage | None = None, tol: float = 1e-10, eps: float = 1e-8,
                 chunk: int = 100_000, max_steps: int = 2000) -> CanonicalBatch:
    """Canonical representatives of the SU_f-orbits of non-null coprime pairs."""
    ux, uy, vx, vy = (np.asarray(a, dtype=np.int64).ravel() for a in (ux, uy, vx, vy))
    n = len(ux)
    if n > chunk:
        parts = [canonicalize(fd, ux[s:s + chunk], uy[s:s + chunk], vx[s:s + chunk], vy[s:s + chunk],
                              track, image, tol, eps, chunk, max_steps) for s in range(0, n, chunk)]
        cat = (lambda name: None if getattr(parts[0], name) is None
               else np.concatenate([getattr(p, name) for p in parts]))
        return CanonicalBatch(cat("ux"), cat("uy"), cat("vx"), cat("vy"), cat("ambiguous"),
                              cat("word"), cat("image"), max(p.steps for p in parts), cat("fixed"))
    K = fd.field
    w_c = K.w
    chart, base = fd.chart, fd.base
    sides = fd.ball[fd.sides]
    side_mats = fd.mats[fd.sides]
    ux, uy, vx, vy = ux.copy(), uy.copy(), vx.copy(), vy.copy()

    def feet(idx):
        u = ux[idx] + uy[idx] * w_c
        v = vx[idx] + vy[idx] * w_c
        return chart.foot(u, v)[0]

    all_idx = np.arange(n)
    w = feet(all_idx)
    d = h2_distance(w, base)
    word = np.tile(fd.ball[0], (n, 1)) if track == "exact" else None
    img = np.zeros(n, dtype=np.int64) if image is not None else None
    active = all_idx
    steps = 0
    while len(active):
        steps += 1
        if steps > max_steps:
            raise GeometryError("reduction did not terminate")
        imgs = act_h2(side_mats[:, None], w[None, active])
        ds = h2_distance(imgs, base)
        j = np.argmin(ds, axis=0)
        best = ds[j, np.arange(len(active))]
        move = best < d[active] - tol
        idx, jm = active[move], j[move]
        if not len(idx):
            break
        ux[idx], uy[idx], vx[idx], vy[idx] = apply8(sides[jm], ux[idx], uy[idx], vx[idx], vy[idx], K)
        if word is not None:
            word[idx] = matmul8(sides[jm], word[idx], K)
        if img is not None:
            for s in np.unique(jm):
                sel = idx[jm == s]
                img[sel] = image.left_table(int(fd.sides[s]))[img[sel]]
        w[idx] = feet(idx)
        d[idx] = h2_distance(w[idx], base)
        active = idx

    # sweep: images equally close to the base point. Any such element maps a
    # boundary point of the polygon to another one, so it moves the base point
    # by at most twice the farthest finite vertex distance and lies in the ball.
    owners = [all_idx]
    elems = [np.zeros(n, dtype=np.int64)]
    dist = [d.copy()]
    mind = d.copy()
    ambiguous = np.zeros(n, dtype=bool)
    fixed = np.zeros(n, dtype=bool)
    need = 2 * d + eps
    for lo in range(1, len(fd.ball), 256):
        hi = min(lo + 256, len(fd.ball))
        sel = np.flatnonzero(need >= fd.disp[lo])
        if not len(sel):
            break
        imgs = act_h2(fd.mats[lo:hi][:, None], w[None, sel])
        ds = h2_distance(imgs, base)
        e_i, p_i = np.nonzero(ds <= d[sel] + 100 * eps * (1 + d[sel]))
        if len(p_i):
            same = h2_distance(imgs[e_i, p_i], w[sel[p_i]]) < 1e-7
            fixed[sel[p_i[same]]] = True
            owners.append(sel[p_i])
            elems.append(e_i + lo)
            dv = ds[e_i, p_i]
            dist.append(dv)
            np.minimum.at(mind, sel[p_i], dv)
    owner = np.concatenate(owners)
    elem = np.concatenate(elems)
    dist = np.concatenate(dist)
    thr = mind[owner] + eps * (1 + mind[owner])
    close = dist <= thr
    # a near-tie just outside the acceptance window is flagged
    ambiguous[owner[(~close) & (dist <= mind[owner] + 100 * eps * (1 + mind[owner]))]] = True
    owner, elem = owner[close], elem[close]
    G = fd.ball[elem]
    cu = apply8(G, ux[owner], uy[owner], vx[owner], vy[owner], K)
    cand = np.stack(cu, axis=1)
    cand = np.concatenate([cand, -cand])
    owner2 = np.concatenate([owner, owner])
    sign = np.concatenate([np.ones(len(owner), np.int64), -np.ones(len(owner), np.int64)])
    elem2 = np.concatenate([elem, elem])
    pick = _lexmin_rows(cand, owner2, n)
    out = cand[pick]
    if word is not None:
        g = fd.ball[elem2[pick]] * sign[pick][:, None]
        word = matmul8(g, word, K)
    if img is not None:
        neg = image.neg_table()
        for e in np.unique(elem2[pick]):
            sel = np.flatnonzero(elem2[pick] == e)
            img[sel] = image.left_table(int(e))[img[sel]]
        flip = sign[pick] < 0
        img[flip] = neg[img[flip]]
    return CanonicalBatch(out[:, 0], out[:, 1], out[:, 2], out[:, 3], ambiguous, word, img, steps, fixed)


def canonicalize_null(fd: FuchsianData, ux, uy, vx, vy, depth: float | None = None,
                      image: FiniteImage | None = None, tol: float = 1e-10, vtol: float = 1e-6):
    """Canonical representatives for pairs with f(u, v) = 0 (cusps of the group).

    A point far along the ray from the base point towards the cusp is reduced
    into the polygon; the reduced cusp then sits at an ideal vertex, and the
    least pair over ball images landing on ideal vertices is returned.
    Returns (rows, ok, image index) with ok False when no ideal vertex matched.
    """
    K = fd.field
    ux, uy, vx, vy = (np.asarray(a, dtype=np.int64).ravel().copy() for a in (ux, uy, vx, vy))
    n = len(ux)
    chart, base = fd.chart, fd.base
    if depth is None:
        depth = 2 * fd.max_vertex_distance() + 6.0
    ideal_k = fd.polygon.vertices[fd.polygon.ideal]

    def cusp_klein(a, b, c, e):
        u = a + b * K.w
        v = c + e * K.w
        q, _ = chart.cusp_data(u, v)
        return to_klein(q.real.astype(complex) + 0j, base) if np.ndim(q) else to_klein(complex(q.real), base)

    rows = np.zeros((n, 4), dtype=np.int64)
    ok = np.zeros(n, dtype=bool)
    img_out = np.zeros(n, dtype=np.int64)
    sides = fd.ball[fd.sides]
    side_mats = fd.mats[fd.sides]
    for k in range(n):
        p = (ux[k], uy[k], vx[k], vy[k])
        kz = complex(cusp_klein(*p))
        zeta = kz / abs(kz) * math.tanh(depth / 2)
        # Poincare disk point on the ray -> upper half-plane
        pt = complex((base - base.conjugate() * zeta) / (1 - zeta))
        img = 0
        dcur = float(h2_distance(pt, base))
        for _ in range(10000):
            ds = h2_distance(act_h2(side_mats, pt), base)
            j = int(np.argmin(ds))
            if not ds[j] < dcur - tol:
                break
            pt = complex(act_h2(side_mats[j], pt))
            dcur = float(ds[j])
            p = apply8(sides[j], *p, K)
            if image is not None:
                img = int(image.left_table(int(fd.sides[j]))[img])
        G = fd.ball
        cand = np.stack(apply8(G, p[0], p[1], p[2], p[3], K), axis=1)
        kc = cusp_klein(cand[:, 0], cand[:, 1], cand[:, 2], cand[:, 3])
        hit = np.zeros(len(G), dtype=bool)
        for v in ideal_k:
            hit |= np.abs(kc - v) < vtol
        if not hit.any():
            continue
        h = np.flatnonzero(hit)
        c2 = np.concatenate([cand[h], -cand[h]])
        owner = np.zeros(len(c2), dtype=np.int64)
        pick = int(_lexmin_rows(c2, owner, 1)[0])
        rows[k] = c2[pick]
        ok[k] = True
        if image is not None:
            e = int(h[pick % len(h)])
            img = int(image.left_table(e)[img])
            if pick >= len(h):
                img = int(image.neg_table()[img])
            img_out[k] = img
    return rows, ok, img_out


# --------------------------------------------------------------------------
# single-pair interface

def canonical_orbit_rep(pair: tuple[QuadInt, QuadInt], aset: AutomorphSet,
                        fdata: FuchsianData) -> tuple[tuple[QuadInt, QuadInt], UniMat]:
    """Canonical member of the orbit of pair and the exact W with W pair = canonical."""
    u, v = pair
    f = aset.form
    if not is_coprime_pair(u, v):
        raise ValueError("pair is not coprime")
    if f(u, v) == 0:
        raise ValueError("null pair: use the boundary-orbit path (canonicalize_null)")
    K = f.field
    res = canonicalize(fdata, [u.x], [u.y], [v.x], [v.y], track="exact")
    W = _to_unimat(res.word[0], K)
    canon = (K(int(res.ux[0]), int(res.uy[0])), K(int(res.vx[0]), int(res.vy[0])))
    if W.act(u, v) != canon or compose_form(f, W) != f:
        raise AssertionError("canonicalisation word failed exact verification")
    return canon, W


@dataclass(frozen=True)
class EquivalenceVerdict:
    tag: str  # "equivalent" | "inequivalent_modulo_generators" | "unknown"
    witness: Optional[UniMat] = None

    @property
    def equivalent(self) -> bool:
        return self.tag == "equivalent"


def are_equivalent(pair1, pair2, aset: AutomorphSet, fdata: FuchsianData,
                   search_length: int = 4) -> EquivalenceVerdict:
    """Decide whether some automorph carries pair1 to pair2, with an exact witness."""
    f = aset.form
    K = f.field
    if f(*pair1) != f(*pair2):
        return EquivalenceVerdict("inequivalent_modulo_generators")
    if pair1 == pair2:
        return EquivalenceVerdict("equivalent", UniMat.identity(K))
    if f(*pair1) == 0:
        return _word_search(pair1, pair2, fdata, search_length)
    rows = [[p[0].x, p[0].y, p[1].x, p[1].y] for p in (pair1, pair2)]
    res = canonicalize(fdata, *np.array(rows).T, track="exact")
    W1, W2 = _to_unimat(res.word[0], K), _to_unimat(res.word[1], K)
    same = tuple(np.array([res.ux, res.uy, res.vx, res.vy])[:, 0]) == tuple(np.array([res.ux, res.uy, res.vx, res.vy])[:, 1])
    if same:
        g = W2.inverse() @ W1
        if g.act(*pair1) == tuple(pair2) and compose_form(f, g) == f:
            return EquivalenceVerdict("equivalent", g)
    if res.ambiguous.any():
        return _word_search(pair1, pair2, fdata, search_length)
    return EquivalenceVerdict("inequivalent_modulo_generators")


def _word_search(pair1, pair2, fdata: FuchsianData, length: int) -> EquivalenceVerdict:
    """Exact search over ball elements and short products of side pairings."""
    f = fdata.form
    K = f.field
    cand = [fdata.element(i) for i in range(len(fdata.ball))]
    gens = fdata.side_elements()
    frontier = cand
    for _ in range(length):
        for g in frontier:
            for s in (g, -g):
                if s.act(*pair1) == tuple(pair2):
                    return EquivalenceVerdict("equivalent", s)
        frontier = [s @ g for g in frontier[:200] for s in gens]
    return EquivalenceVerdict("unknown")
