"""Orbit counting of proper representations and convergence reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .analytic import (GroupDescriptor, PredictionConstant, congruence_data, congruence_constant_swapped,
                       covolume_gaussian, full_group, predicted_constant)
from .automorphs import (FiniteImage, FuchsianData, apply8, canonicalize, canonicalize_null,
                         fuchsian_for_form)
from .forms import HermitianForm, UniMat, classify, compose_form
from .ring import QuadIdeal, QuadInt, coprime_mask, elements_up_to_norm, qnorm


def ideal_mask(I: QuadIdeal, x, y) -> np.ndarray:
    """Vectorised membership of x + y w in I."""
    x = np.asarray(x)
    y = np.asarray(y)
    q = x // I.a
    return (x % I.a == 0) & ((y - q * I.b) % I.d == 0)


@dataclass(frozen=True)
class CongruenceFilter:
    kind: str = "none"  # none | level | hecke
    ideal: Optional[QuadIdeal] = None

    def __post_init__(self):
        if self.kind not in ("none", "level", "hecke"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind != "none" and self.ideal is None:
            raise ValueError("congruence filter needs an ideal")

    def mask(self, ux, uy, vx, vy) -> np.ndarray:
        if self.kind == "none":
            return np.ones(np.shape(ux), dtype=bool)
        m = ideal_mask(self.ideal, vx, vy)
        if self.kind == "level":
            m &= ideal_mask(self.ideal, np.asarray(ux) - 1, uy)
        return m

    def accepts(self, u: QuadInt, v: QuadInt) -> bool:
        return bool(self.mask(u.x, u.y, v.x, v.y))

    @property
    def group_kind(self) -> str:
        return "full" if self.kind == "none" else self.kind


@dataclass
class CountRequest:
    form: HermitianForm
    s_grid: list[int]
    height_bound: Optional[int] = None
    group: str = "full"  # full | level | hecke
    ideal: Optional[QuadIdeal] = None
    include_null: bool = False
    generator_height: int = 20
    seed: int = 0
    tol: float = 1e-10
    height_factor: int = 4
    threads: int = 1
    stability_check: bool = True

    def __post_init__(self):
        self.s_grid = [int(s) for s in self.s_grid]
        if not self.s_grid or any(s <= 0 for s in self.s_grid):
            raise ValueError("s_grid must contain positive integers")
        if self.s_grid != sorted(set(self.s_grid)):
            raise ValueError("s_grid must be strictly increasing")
        minimum = self.height_factor * self.s_max
        if self.height_bound is None:
            self.height_bound = minimum
        if self.height_bound < minimum:
            raise ValueError(f"height_bound {self.height_bound} below heuristic minimum "
                             f"{self.height_factor}*s_max = {minimum}")
        if self.group != "full" and self.ideal is None:
            raise ValueError(f"group {self.group!r} needs an ideal")
        if classify(self.form) != "indefinite":
            raise ValueError("orbit counting needs an indefinite form")

    @property
    def s_max(self) -> int:
        return self.s_grid[-1]

    @property
    def filter(self) -> CongruenceFilter:
        return CongruenceFilter("none" if self.group == "full" else self.group, self.ideal)

    def to_json(self) -> dict:
        return {"form": self.form.to_json(), "s_grid": self.s_grid, "height_bound": self.height_bound,
                "group": self.group, "ideal": None if self.ideal is None else self.ideal.to_json(),
                "include_null": self.include_null, "generator_height": self.generator_height,
                "seed": self.seed, "tol": self.tol, "height_factor": self.height_factor}


# ---------------------------------------------------------------------------
# enumeration

def normalize_form(f: HermitianForm, search: int = 10) -> tuple[HermitianForm, UniMat]:
    """Some f o g with a > 0, g in SL_2(O_K); pair counts are unchanged under u -> g^-1 u."""
    K = f.field
    if f.a > 0:
        return f, UniMat.identity(K)
    ex, ey = elements_up_to_norm(K, search)
    elems = [K(int(x), int(y)) for x, y in zip(ex, ey)]
    for alpha in elems:
        for gamma in elems:
            if alpha.is_zero() and gamma.is_zero():
                continue
            if f(alpha, gamma) <= 0:
                continue
            for beta in elems:
                for delta in elems:
                    if alpha * delta - beta * gamma == K.one:
                        g = UniMat(alpha, beta, gamma, delta)
                        return compose_form(f, g), g
    raise ValueError("could not move the form to one with a > 0")


@dataclass
class PairArrays:
    ux: np.ndarray
    uy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def take(self, m) -> "PairArrays":
        return PairArrays(self.ux[m], self.uy[m], self.vx[m], self.vy[m], self.values[m])


def enumerate_pair_arrays(f: HermitianForm, s_max: int, height: int,
                          filt: CongruenceFilter = CongruenceFilter(), threads: int = 1) -> PairArrays:
    """Coprime pairs with max(N u, N v) <= height, |f| <= s_max and the filter.

    Ordered by (N v, v.x, v.y, N u, u.x, u.y).
    """
    K = f.field
    ex, ey = elements_up_to_norm(K, height)
    nv = len(ex)

    def block(lo_hi):
        lo, hi = lo_hi
        vx = np.repeat(ex[lo:hi], nv)
        vy = np.repeat(ey[lo:hi], nv)
        ux = np.tile(ex, hi - lo)
        uy = np.tile(ey, hi - lo)
        vals = f.values(ux, uy, vx, vy)
        keep = np.abs(vals) <= s_max
        ux, uy, vx, vy, vals = ux[keep], uy[keep], vx[keep], vy[keep], vals[keep]
        keep = filt.mask(ux, uy, vx, vy) & ~((ux == 0) & (uy == 0) & (vx == 0) & (vy == 0))
        ux, uy, vx, vy, vals = ux[keep], uy[keep], vx[keep], vy[keep], vals[keep]
        keep = coprime_mask(ux, uy, vx, vy, K)
        return ux[keep], uy[keep], vx[keep], vy[keep], vals[keep]

    step = max(1, 2_000_000 // max(nv, 1))
    ranges = [(lo, min(lo + step, nv)) for lo in range(0, nv, step)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex_:
            parts = list(ex_.map(block, ranges))
    else:
        parts = [block(r) for r in ranges]
    cat = [np.concatenate([p[k] for p in parts]) if parts else np.zeros(0, np.int64) for k in range(5)]
    return PairArrays(*cat)


def enumerate_pairs(req: CountRequest, filt: Optional[CongruenceFilter] = None
                    ) -> Iterator[tuple[tuple[QuadInt, QuadInt], int]]:
    """Stream of ((u, v), f(u, v)) in the deterministic enumeration order."""
    f = req.form
    if f.a == 0:
        raise ValueError("enumeration needs a != 0; normalise the form first")
    K = f.field
    pa = enumerate_pair_arrays(f, req.s_max, req.height_bound, filt or req.filter, req.threads)
    for k in range(len(pa)):
        yield (K(int(pa.ux[k]), int(pa.uy[k])), K(int(pa.vx[k]), int(pa.vy[k]))), int(pa.values[k])


# ---------------------------------------------------------------------------
# cusp-adapted enumeration
#
# Orbits whose canonical foot lies deep in a cusp of the Dirichlet polygon
# have minimal box height growing like s^2. In a frame A = [n | m] with n a
# primitive null vector, f o A has a' = 0 and such pairs have small N(v')
# while u' ranges over a strip cut down by the parabolic translations.

@dataclass(frozen=True)
class CuspFrame:
    A: UniMat
    form: HermitianForm  # f o A, with a = 0
    period: QuadInt  # generator t of {t : Re(b t) = 0}


def _null_pairs(f: HermitianForm, height: int) -> PairArrays:
    pa = enumerate_pair_arrays(f, 0, height)
    return pa.take(pa.values == 0)


def _complete(n1: QuadInt, n2: QuadInt, bound: int = 64) -> UniMat:
    """A unimodular matrix with first column (n1, n2)."""
    K = n1.field
    ex, ey = elements_up_to_norm(K, bound)
    for x, y in zip(ex, ey):
        m = K(int(x), int(y))
        if not n1.is_zero():
            # n1 m2 - m n2 = 1
            m2 = n1.exact_div(K.one + m * n2)
            if m2 is not None:
                return UniMat(n1, m, n2, m2)
        else:
            m1 = n2.exact_div(n1 * m - K.one)
            if m1 is not None:
                return UniMat(n1, m1, n2, m)
    raise ValueError("could not complete null vector to a unimodular frame")


def _period(b: QuadInt) -> QuadInt:
    K = b.field
    # Re(b t) = 0 on t = x + y w  <=>  x Re(b) + y Re(b w) = 0
    bw = complex(b) * K.w
    rb = complex(b).real
    # integer relation: x * 2Re(b) + y * 2Re(bw) = 0 with integer coefficients
    p, q = round(2 * rb), round(2 * bw.real)
    g = math.gcd(p, q)
    return K(q // g, -p // g)


def cusp_frames(fd: FuchsianData, search: int = 50, max_search: int = 3200) -> list[CuspFrame]:
    """One frame per ideal vertex of the Dirichlet polygon."""
    from .hyperbolic import to_klein
    f = fd.form
    K = f.field
    verts = fd.polygon.vertices[fd.polygon.ideal]
    if not len(verts):
        return []
    frames: list[Optional[CuspFrame]] = [None] * len(verts)
    h = search
    while any(fr is None for fr in frames):
        if h > max_search:
            raise ValueError("no null vector found for an ideal vertex")
        z = _null_pairs(f, h)
        hts = np.maximum(qnorm(z.ux, z.uy, K), qnorm(z.vx, z.vy, K))
        order = np.argsort(hts, kind="stable")
        u = z.ux[order] + z.uy[order] * K.w
        v = z.vx[order] + z.vy[order] * K.w
        q, _ = fd.chart.cusp_data(u, v)
        kq = to_klein(np.asarray(q.real, dtype=complex), fd.base)
        for j, vert in enumerate(verts):
            if frames[j] is not None:
                continue
            hit = np.flatnonzero(np.abs(kq - vert) < 1e-6)
            if len(hit):
                k = order[hit[0]]
                n1, n2 = K(int(z.ux[k]), int(z.uy[k])), K(int(z.vx[k]), int(z.vy[k]))
                A = _complete(n1, n2)
                g = compose_form(f, A)
                frames[j] = CuspFrame(A, g, _period(g.b))
        h *= 2
    return frames


def enumerate_cusp_pairs(frame: CuspFrame, s_max: int, v_bound: int) -> PairArrays:
    """Pairs A (u', v') with N(v') <= v_bound and u' over two translation periods of the strip."""
    g = frame.form
    K = g.field
    w = K.w
    bx, by = elements_up_to_norm(K, v_bound)
    b = complex(g.b)
    Pt = abs((b * complex(frame.period)).imag)
    out = [[], [], [], []]
    for vx, vy in zip(bx, by):
        if vx == 0 and vy == 0:
            continue
        vc = vx + vy * w
        nv = abs(vc) ** 2
        beta = b * vc.conjugate()
        rho = sorted(((-s_max - g.c * nv) / 2, (s_max - g.c * nv) / 2))
        period = Pt * nv
        sig = (-period - 1e-9, period + 1e-9)
        # (x, y) -> (rho, sigma) = (x Re beta + y Re(beta w), x Im beta + y Im(beta w))
        M = np.array([[beta.real, (beta * w).real], [beta.imag, (beta * w).imag]])
        Minv = np.linalg.inv(M)
        corners = np.array([Minv @ [r, t] for r in rho for t in sig])
        y = np.arange(math.floor(corners[:, 1].min()), math.ceil(corners[:, 1].max()) + 1)
        xlo = np.full(len(y), -np.inf)
        xhi = np.full(len(y), np.inf)
        for (lo, hi), c0, c1 in ((rho, M[0, 0], M[0, 1]), (sig, M[1, 0], M[1, 1])):
            if abs(c0) < 1e-12:
                ok = (lo <= c1 * y) & (c1 * y <= hi)
                xhi[~ok] = -np.inf
                continue
            a1, a2 = (lo - c1 * y) / c0, (hi - c1 * y) / c0
            xlo = np.maximum(xlo, np.minimum(a1, a2))
            xhi = np.minimum(xhi, np.maximum(a1, a2))
        lo_i = np.ceil(xlo - 1e-9)
        hi_i = np.floor(xhi + 1e-9)
        cnt = np.where(hi_i >= lo_i, hi_i - lo_i + 1, 0).astype(np.int64)
        if not cnt.sum():
            continue
        yy = np.repeat(y, cnt)
        start = np.repeat(lo_i.astype(np.int64), cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        out[0].append(start + offs)
        out[1].append(yy.astype(np.int64))
        out[2].append(np.full(len(yy), vx))
        out[3].append(np.full(len(yy), vy))
    if not out[0]:
        z = np.zeros(0, dtype=np.int64)
        return PairArrays(z, z, z, z, z)
    upx, upy, vpx, vpy = (np.concatenate(c) for c in out)
    A = np.array(frame.A.coords(), dtype=np.int64)
    ux, uy, vx, vy = apply8(A, upx, upy, vpx, vpy, K)
    vals = g.values(upx, upy, vpx, vpy)
    keep = (np.abs(vals) <= s_max) & coprime_mask(upx, upy, vpx, vpy, K)
    return PairArrays(ux, uy, vx, vy, vals).take(keep)


# ---------------------------------------------------------------------------
# reports

@dataclass
class ConvergenceReport:
    rows: list[tuple[int, int, float, float, float]]  # (s, psi, ratio, predicted, relative_gap)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    prediction: Optional[dict] = None

    CSV_HEADER = ("s", "psi", "ratio", "predicted", "gap")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for s, psi, ratio, pred, gap in self.rows:
            w.writerow([s, psi, repr(ratio), repr(pred), repr(gap)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"config": self.config,
                "rows": [dict(zip(self.CSV_HEADER, r)) for r in self.rows],
                "diagnostics": self.diagnostics, "prediction": self.prediction}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def psi(self, s: int) -> int:
        for row in self.rows:
            if row[0] == s:
                return row[1]
        raise KeyError(s)

    def gap(self, s: int) -> float:
        for row in self.rows:
            if row[0] == s:
                return row[4]
        raise KeyError(s)


def covolume_for(f: HermitianForm, fd: FuchsianData) -> tuple[float, str]:
    """Covolume of SU_f: closed form over Q(i), otherwise the numerical domain area."""
    if f.field.D == -4:
        return covolume_gaussian(f.primitive_part()), "closed_form"
    return fd.area, "dirichlet_area"


def prediction_for(f: HermitianForm, fd: FuchsianData, group: str = "full",
                   ideal: Optional[QuadIdeal] = None,
                   image: Optional[FiniteImage] = None) -> tuple[PredictionConstant, dict]:
    covol, source = covolume_for(f, fd)
    extra = {"covolume_source": source, "covolume_full": covol, "dirichlet_area": fd.area}
    if group == "full":
        G = full_group(f.field)
        return predicted_constant(f, covol, G), extra
    G = congruence_data(ideal, group)
    image = image or FiniteImage(fd, ideal)
    sub = image.subgroup_index(group)
    extra.update({"automorph_image_order": image.size, "automorph_subgroup_index": sub})
    pc = predicted_constant(f, covol * sub, G)
    extra["constant_with_swapped_index"] = congruence_constant_swapped(f, covol * sub, ideal, group).value
    return pc, extra


@dataclass
class _Counted:
    psi: np.ndarray
    null_orbits: int
    null_unmatched: int
    raw_pairs: int
    null_pairs: int
    ambiguous: int
    fixed_feet: int


def gather_pairs(f: HermitianForm, fd: FuchsianData, s_max: int, height: int, filt: CongruenceFilter,
                 frames: list[CuspFrame], cusp_bound: int, threads: int = 1) -> tuple[PairArrays, int]:
    """Box pairs plus cusp-frame pairs, deduplicated, in lexicographic coordinate order."""
    parts = [enumerate_pair_arrays(f, s_max, height, filt, threads)]
    for fr in frames:
        cp = enumerate_cusp_pairs(fr, s_max, cusp_bound)
        parts.append(cp.take(filt.mask(cp.ux, cp.uy, cp.vx, cp.vy)))
    n_cusp = sum(len(p) for p in parts[1:])
    rows = np.concatenate([np.stack([p.ux, p.uy, p.vx, p.vy, p.values], axis=1) for p in parts])
    rows = np.unique(rows, axis=0)
    return PairArrays(*(rows[:, k] for k in range(5))), n_cusp


def _count(f: HermitianForm, fd: FuchsianData, req: CountRequest, height: int, s_grid: list[int],
           image: Optional[FiniteImage], frames: list[CuspFrame]) -> _Counted:
    """Full-group orbits by canonicalisation; congruence counts weight each full orbit
    by the number of (SU_f ∩ G)-orbits it splits into inside the filtered set."""
    cusp_bound = max(1, height // req.height_factor)
    pa, _ = gather_pairs(f, fd, max(s_grid), height, CongruenceFilter(), frames, cusp_bound, req.threads)
    null = pa.values == 0
    live = pa.take(~null)
    if len(live):
        res = canonicalize(fd, live.ux, live.uy, live.vx, live.vy, tol=req.tol)
        keys = np.stack([res.ux, res.uy, res.vx, res.vy], axis=1)
        uniq, first = np.unique(keys, axis=0, return_index=True)
        vals = np.abs(live.values[first])
        if image is not None:
            R = image.ring
            ru = R.encode(uniq[:, 0], uniq[:, 1])
            rv = R.encode(uniq[:, 2], uniq[:, 3])
            res_pairs, inv = np.unique(np.stack([ru, rv], axis=1), axis=0, return_inverse=True)
            weights = image.orbit_weights(req.group, res_pairs[:, 0], res_pairs[:, 1])[inv.ravel()]
        else:
            weights = np.ones(len(uniq), dtype=np.int64)
        psi = np.array([int(weights[vals <= s].sum()) for s in s_grid])
        ambiguous = int(res.ambiguous.sum())
        fixed = int(np.count_nonzero(res.fixed[first]))
    else:
        psi = np.zeros(len(s_grid), dtype=np.int64)
        ambiguous = fixed = 0
    n_null = int(null.sum())
    null_orbits = unmatched = 0
    if req.include_null and n_null:
        z = pa.take(null)
        rows, ok, _ = canonicalize_null(fd, z.ux, z.uy, z.vx, z.vy, tol=req.tol)
        null_orbits = len(np.unique(rows[ok], axis=0))
        unmatched = int((~ok).sum())
    return _Counted(psi, null_orbits, unmatched, len(live), n_null, ambiguous, fixed)


def count_orbits(req: CountRequest, fd: Optional[FuchsianData] = None) -> ConvergenceReport:
    """psi(s) for every s in the grid, with diagnostics and the predicted constant."""
    f = req.form
    if req.group == "full":
        if f.a <= 0:
            f, _ = normalize_form(f)
    elif f.a == 0:
        raise ValueError("congruence counts need a != 0 (normalising would change the filter)")
    if fd is None:
        _, fd = fuchsian_for_form(f, req.generator_height, seed=req.seed)
    elif fd.form != f:
        raise ValueError("Fuchsian data belongs to another form")
    image = FiniteImage(fd, req.ideal) if req.group != "full" else None
    pc, extra = prediction_for(f, fd, req.group, req.ideal, image)
    frames = cusp_frames(fd)
    counted = _count(f, fd, req, req.height_bound, req.s_grid, image, frames)
    stable = None
    if req.stability_check:
        again = _count(f, fd, req, 2 * req.height_bound, req.s_grid[:1], image, frames)
        stable = bool(again.psi[0] == counted.psi[0])
    rows = []
    for s, psi in zip(req.s_grid, counted.psi):
        ratio = int(psi) / s ** 2
        rows.append((s, int(psi), ratio, pc.value, (ratio - pc.value) / pc.value))
    diag = {"null_pairs": counted.null_pairs, "null_orbit_count": counted.null_orbits if req.include_null else None,
            "null_unmatched": counted.null_unmatched, "unknown_verdicts": counted.ambiguous + counted.null_unmatched,
            "stability_flag": "clean" if stable else ("unstable" if stable is False else "not_checked"),
            "generator_height": fd.generator_height, "raw_pairs": counted.raw_pairs,
            "orbits_with_fixed_foot": counted.fixed_feet, "cusp_frames": len(frames),
            "cusp_bound": max(1, req.height_bound // req.height_factor), "domain_sides": int(len(fd.sides)),
            "domain_ideal_vertices": int(fd.polygon.ideal.sum()), "working_form": f.to_json(),
            "orbit_base_point": "(1,0)" if req.group != "full" else None}
    diag.update(extra)
    return ConvergenceReport(rows, diag, req.to_json(), pc.to_json())


def fit_and_compare(report: ConvergenceReport, constant: PredictionConstant | float) -> dict:
    """Ratio at the largest s, least-squares slope of psi against s^2 on the top half of the grid."""
    c = constant.value if isinstance(constant, PredictionConstant) else float(constant)
    if len(report.rows) < 3:
        raise ValueError("need at least three grid points")
    s = np.array([r[0] for r in report.rows], dtype=float)
    psi = np.array([r[1] for r in report.rows], dtype=float)
    top = slice(len(s) // 2, None)
    x = s[top] ** 2
    if np.ptp(x) == 0:
        raise ValueError("degenerate grid")
    slope, intercept = np.polyfit(x, psi[top], 1)
    ratio = psi[-1] / s[-1] ** 2
    return {"s_max": int(s[-1]), "ratio": float(ratio), "slope": float(slope), "intercept": float(intercept),
            "predicted": c, "ratio_gap": float((ratio - c) / c), "slope_gap": float((slope - c) / c),
            "gaps": [float((p / q ** 2 - c) / c) for q, p in zip(s, psi)]}
