import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermcount.automorphs import (AutomorphSet, FiniteImage, apply8, are_equivalent, canonical_orbit_rep,
                                  canonicalize, canonicalize_null, find_automorphs, fuchsian_for_form,
                                  matmul8, subgroup_elements)
from hermcount.counting import enumerate_pair_arrays
from hermcount.forms import HermitianForm, UniMat, compose_form
from hermcount.ring import Field, QuadIdeal, QuotientRing, elements_up_to_norm, qmul, qnorm

from helpers import components, connected_edges, word_ball

QI = Field(-4)
F2 = HermitianForm.f_delta(QI, 2)
G = UniMat.from_ints(QI, [[3, 4], [2, 3]])


def P(ux, uy=0, vx=0, vy=0):
    return QI(ux, uy), QI(vx, vy)


def test_known_automorph_found(f2_group):
    aset, _ = f2_group
    coords = {g.coords() for g in aset.gens}
    assert G.coords() in coords and (-UniMat.identity(QI)).coords() in coords
    assert compose_form(F2, G) == F2


@pytest.mark.parametrize("f", [F2, HermitianForm.make(QI, 2, (1, 1), -3), HermitianForm.make(Field(-3), 1, (1, 0), -2)])
def test_height_one_contains_plus_minus_identity(f):
    aset = find_automorphs(f, 1)
    coords = {g.coords() for g in aset.gens}
    one = UniMat.identity(f.field)
    assert one.coords() in coords and (-one).coords() in coords


def test_closed_under_inverse(f2_group):
    aset, _ = f2_group
    coords = {g.coords() for g in aset.gens}
    assert all(g.inverse().coords() in coords for g in aset.gens)
    assert all(compose_form(F2, g) == F2 for g in aset.gens)


def _brute_force_automorphs(f, height):
    K = f.field
    ex, ey = elements_up_to_norm(K, height)
    n = len(ex)
    idx = np.array(list(itertools.product(range(n), repeat=4)))
    a, b, c, d = (idx[:, k] for k in range(4))
    row = np.stack([ex[a], ey[a], ex[b], ey[b], ex[c], ey[c], ex[d], ey[d]], axis=1)
    ad = qmul(row[:, 0], row[:, 1], row[:, 6], row[:, 7], K)
    bc = qmul(row[:, 2], row[:, 3], row[:, 4], row[:, 5], K)
    det1 = (ad[0] - bc[0] == 1) & (ad[1] - bc[1] == 0)
    row = row[det1]
    # f o g = f  <=>  f(g e1) = a, f(g e2) = c and f(g(e1 + e2)) = f(e1 + e2), f(g(e1 + w e2)) = f(e1 + w e2)
    col = lambda r, k: (r[:, 4 * 0 + 2 * k], r[:, 4 * 0 + 2 * k + 1], r[:, 4 + 2 * k], r[:, 4 + 2 * k + 1])
    keep = np.ones(len(row), dtype=bool)
    for ux, uy, vx, vy in ((1, 0, 0, 0), (0, 0, 1, 0), (1, 0, 1, 0), (1, 0, 0, 1)):
        gu = apply8(row, ux, uy, vx, vy, K)
        keep &= f.values(*gu) == f.values(np.array(ux), np.array(uy), np.array(vx), np.array(vy))
    return {tuple(int(v) for v in r) for r in row[keep]}


@pytest.mark.parametrize("f", [F2, HermitianForm.make(QI, 1, QI.i(), -1)])
def test_pruned_search_matches_brute_force(f):
    pruned = {g.coords() for g in find_automorphs(f, 5).gens}
    assert pruned == _brute_force_automorphs(f, 5)


def test_subgroup_elements_membership(f2_group):
    aset, _ = f2_group
    I = QuadIdeal.from_generators([QI(3)])
    sub = subgroup_elements(aset.gens[:8], lambda g: g.in_level(I), 4)
    assert sub and all(g.in_level(I) and compose_form(F2, g) == F2 for g in sub)
    filtered = find_automorphs(F2, 5, subgroup=lambda g: g.in_hecke(I), word_length=3)
    assert all(g.in_hecke(I) for g in filtered.gens)


def test_automorph_set_rejects_non_automorphs():
    with pytest.raises(ValueError):
        AutomorphSet(F2, [UniMat.from_ints(QI, [[1, 1], [0, 1]])], 1)


def test_automorph_set_json(f2_group):
    aset, _ = f2_group
    back = AutomorphSet.from_json(aset.to_json())
    assert [g.coords() for g in back.gens] == [g.coords() for g in aset.gens]


def test_matmul8_matches_unimat():
    A = UniMat.from_ints(QI, [[3, 4], [2, 3]])
    B = UniMat(QI.one, QI.i(), QI.zero, QI.one)
    prod = matmul8(np.array(A.coords()), np.array(B.coords()), QI)
    assert tuple(int(v) for v in prod) == (A @ B).coords()


def test_canonical_examples(f2_group):
    aset, fd = f2_group
    c1, W1 = canonical_orbit_rep(P(3, 0, 2, 0), aset, fd)
    c2, W2 = canonical_orbit_rep(P(17, 0, 12, 0), aset, fd)
    assert c1 == c2
    assert W1.act(QI(3), QI(2)) == c1
    assert canonical_orbit_rep(c1, aset, fd)[0] == c1
    with pytest.raises(ValueError):
        canonical_orbit_rep(P(1, 1, 1, 0), aset, fd)
    with pytest.raises(ValueError):
        canonical_orbit_rep(P(2, 0, 0, 0), aset, fd)


def _random_words(fd, rng, n, length):
    sides = fd.ball[fd.sides]
    out = []
    for _ in range(n):
        w = fd.ball[0]
        for _ in range(length):
            w = matmul8(sides[rng.integers(len(sides))], w, fd.field)
        out.append(w)
    return np.array(out)


def test_canonical_orbit_invariance(f2_group):
    _, fd = f2_group
    pairs = enumerate_pair_arrays(F2, 30, 60)
    nonnull = pairs.values != 0
    ux, uy, vx, vy = (a[nonnull][:400] for a in (pairs.ux, pairs.uy, pairs.vx, pairs.vy))
    base = canonicalize(fd, ux, uy, vx, vy)
    rng = np.random.default_rng(2)
    words = _random_words(fd, rng, len(ux), 3)
    mx, my, nx, ny = apply8(words, ux, uy, vx, vy, QI)
    moved = canonicalize(fd, mx, my, nx, ny)
    for name in ("ux", "uy", "vx", "vy"):
        assert np.array_equal(getattr(base, name), getattr(moved, name))
    again = canonicalize(fd, base.ux, base.uy, base.vx, base.vy)
    assert np.array_equal(again.ux, base.ux) and np.array_equal(again.vy, base.vy)


def test_exact_word_tracking(f2_group):
    _, fd = f2_group
    pairs = enumerate_pair_arrays(F2, 10, 40)
    nn = pairs.values != 0
    ux, uy, vx, vy = (a[nn] for a in (pairs.ux, pairs.uy, pairs.vx, pairs.vy))
    res = canonicalize(fd, ux, uy, vx, vy, track="exact")
    got = apply8(res.word, ux, uy, vx, vy, QI)
    assert all(np.array_equal(g, e) for g, e in zip(got, (res.ux, res.uy, res.vx, res.vy)))


def test_image_tracking_matches_words(f2_group):
    _, fd = f2_group
    I = QuadIdeal.from_generators([QI(3)])
    img = FiniteImage(fd, I)
    pairs = enumerate_pair_arrays(F2, 6, 30)
    nn = pairs.values != 0
    ux, uy, vx, vy = (a[nn] for a in (pairs.ux, pairs.uy, pairs.vx, pairs.vy))
    res = canonicalize(fd, ux, uy, vx, vy, track="exact", image=img)
    for row, k in zip(res.word, res.image):
        assert img._reduce(row) == img.elements[k]


def test_finite_image_f2():
    # every automorph of |u|^2 - 2|v|^2 is the identity modulo (1 + i)
    aset, fd = fuchsian_for_form(F2, 20)
    img = FiniteImage(fd, QuadIdeal.from_generators([QI(1, 1)]))
    assert img.size == 1
    img3 = FiniteImage(fd, QuadIdeal.from_generators([QI(3)]))
    assert img3.size > 1 and img3.size % img3.subgroup_index("level") == 0


def test_equivalence_verdicts(f2_group):
    aset, fd = f2_group
    v = are_equivalent(P(3, 0, 2, 0), P(3, 0, 2, 0), aset, fd)
    assert v.equivalent and v.witness.is_identity()
    v = are_equivalent(P(3, 0, 2, 0), P(17, 0, 12, 0), aset, fd)
    assert v.equivalent
    assert v.witness.act(QI(3), QI(2)) == (QI(17), QI(12)) and compose_form(F2, v.witness) == F2
    assert are_equivalent(P(1), P(0, 0, 1, 0), aset, fd).tag == "inequivalent_modulo_generators"
    # same value, different orbits
    c = canonicalize(fd, [1, 3], [0, 0], [0, 2], [0, 0])
    assert c.ux[0] == c.ux[1]


def _moved(word, pair):
    out = apply8(word, pair[0].x, pair[0].y, pair[1].x, pair[1].y, QI)
    return QI(int(out[0]), int(out[1])), QI(int(out[2]), int(out[3]))


def test_symmetry_and_transitivity(f2_group):
    aset, fd = f2_group
    rng = np.random.default_rng(4)
    p = P(5, 0, 1, 0)
    w1, w2 = _random_words(fd, rng, 2, 2)
    q, r = _moved(w1, p), _moved(w2, p)
    verdicts = {(a, b): are_equivalent(x, y, aset, fd)
                for (a, x), (b, y) in itertools.permutations((("p", p), ("q", q), ("r", r)), 2)}
    pts = {"p": p, "q": q, "r": r}
    for (a, b), v in verdicts.items():
        assert v.equivalent
        assert v.witness.act(*pts[a]) == pts[b] and compose_form(F2, v.witness) == F2


def test_bfs_connected_pairs_are_equivalent(f2_group):
    _, fd = f2_group
    pairs = enumerate_pair_arrays(F2, 2, 100)
    nn = pairs.values != 0
    ux, uy, vx, vy = (a[nn] for a in (pairs.ux, pairs.uy, pairs.vx, pairs.vy))
    edges = connected_edges(ux, uy, vx, vy, word_ball(fd, 4), QI)
    assert edges
    c = canonicalize(fd, ux, uy, vx, vy)
    key = np.stack([c.ux, c.uy, c.vx, c.vy], axis=1)
    assert all((key[a] == key[b]).all() for a, b in edges)


def test_null_pairs_canonical(f2_group):
    _, fd = f2_group
    pairs = enumerate_pair_arrays(F2, 0, 200)
    rows, ok, _ = canonicalize_null(fd, pairs.ux, pairs.uy, pairs.vx, pairs.vy)
    assert ok.all()
    reps = {tuple(int(v) for v in r) for r in rows}
    assert len(reps) == 4
    for r in reps:
        assert F2(QI(r[0], r[1]), QI(r[2], r[3])) == 0
