"""Shared generators for property tests."""

from hypothesis import strategies as st

from hermcount.forms import UniMat
from hermcount.ring import Field, QuadInt, roots_of_unity

small = st.integers(-6, 6)


def elements(K: Field, lo=-6, hi=6):
    return st.builds(lambda x, y: K(x, y), st.integers(lo, hi), st.integers(lo, hi))


def nonzero_elements(K: Field, lo=-6, hi=6):
    return elements(K, lo, hi).filter(lambda q: not q.is_zero())


def elementary(K: Field, kind: int, t: QuadInt, unit: QuadInt) -> UniMat:
    if kind == 0:
        return UniMat(K.one, t, K.zero, K.one)
    if kind == 1:
        return UniMat(K.one, K.zero, t, K.one)
    return UniMat(unit, K.zero, K.zero, unit.exact_div(K.one))


def sl2_elements(K: Field, length: int = 4):
    """Random elements of SL_2(O_K) as products of elementary matrices."""
    units = roots_of_unity(K)
    step = st.tuples(st.integers(0, 2), elements(K, -3, 3), st.sampled_from(units))

    def build(steps):
        g = UniMat.identity(K)
        for kind, t, u in steps:
            g = g @ elementary(K, kind, t, u)
        return g

    return st.lists(step, min_size=1, max_size=length).map(build)


def word_ball(fd, length: int):
    """Distinct group elements given by words of length <= length in the side pairings."""
    import numpy as np
    from hermcount.automorphs import matmul8

    K = fd.field
    sides = fd.ball[fd.sides]
    frontier = fd.ball[:1]
    out = [frontier]
    for _ in range(length):
        frontier = np.unique(matmul8(sides[:, None, :], frontier[None, :, :], K).reshape(-1, 8), axis=0)
        out.append(frontier)
    return np.unique(np.concatenate(out), axis=0)


def _pair_key(a, b, c, d):
    return ((a + 2 ** 15) << 48) | ((b + 2 ** 15) << 32) | ((c + 2 ** 15) << 16) | (d + 2 ** 15)


def connected_edges(ux, uy, vx, vy, words, K):
    """Index pairs (k, j), k < j, such that some word carries pair k to pair j."""
    import numpy as np
    from hermcount.automorphs import apply8

    keys = _pair_key(ux, uy, vx, vy)
    order = np.argsort(keys)
    sk = keys[order]
    edges = []
    for k in range(len(ux)):
        a, b, c, d = apply8(words, ux[k], uy[k], vx[k], vy[k], K)
        ok = (np.abs(a) < 2 ** 15) & (np.abs(b) < 2 ** 15) & (np.abs(c) < 2 ** 15) & (np.abs(d) < 2 ** 15)
        kk = _pair_key(a[ok], b[ok], c[ok], d[ok])
        pos = np.minimum(np.searchsorted(sk, kk), len(sk) - 1)
        js = np.unique(order[pos[sk[pos] == kk]])
        edges += [(k, int(j)) for j in js[js > k]]
    return edges


def components(n: int, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(x) for x in range(n)]
