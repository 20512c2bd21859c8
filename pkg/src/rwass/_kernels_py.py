"""Pure numpy fallback for the compiled kernels.

Mirrors ``rwass._kernels`` function for function with identical argument
layouts and identical per-term arithmetic.  Totals here are fsum-rounded
(the compiled core accumulates sequentially), so the two backends agree
to rounding while each one keeps exact symmetry and exact monotonicity
under nested subsampling on its own.
"""

from __future__ import annotations

import math

import numpy as np

# Region points are keyed by their integer offset from the extremum,
# packed three 21-bit biased axes into one int64; missing axes sit at 0.
KEY_BIAS = 1 << 20
KEY_MASK = (1 << 21) - 1


def pack_keys(offsets: np.ndarray) -> np.ndarray:
    """Pack (n, 3) integer offsets into sortable int64 keys."""
    o = np.asarray(offsets, dtype=np.int64)
    return (
        ((o[:, 0] + KEY_BIAS) << 42)
        | ((o[:, 1] + KEY_BIAS) << 21)
        | (o[:, 2] + KEY_BIAS)
    )


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    """Inverse of pack_keys, returns (n, 3) offsets."""
    k = np.asarray(keys, dtype=np.int64)
    return np.stack(
        [(k >> 42) - KEY_BIAS, ((k >> 21) & KEY_MASK) - KEY_BIAS, (k & KEY_MASK) - KEY_BIAS],
        axis=1,
    )


def _pow_abs(diff, q):
    a = np.abs(diff)
    if q == 2.0:
        return a * a
    if q == 1.0:
        return a
    return a**q


def _background(keys, ext, dims, grid):
    """Source-grid values at extremum + offset; 0 outside the domain."""
    off = unpack_keys(keys)
    c0 = ext[0] + off[:, 0]
    c1 = ext[1] + off[:, 1]
    c2 = ext[2] + off[:, 2]
    ok = (
        (c0 >= 0) & (c0 < dims[0])
        & (c1 >= 0) & (c1 < dims[1])
        & (c2 >= 0) & (c2 < dims[2])
    )
    out = np.zeros(len(keys), dtype=np.float64)
    if ok.any():
        idx = (c0[ok] * dims[1] + c1[ok]) * dims[2] + c2[ok]
        out[ok] = grid[idx]
    return out


def _side_values(union, keys, vals, bg, ext, dims, grid):
    pos = np.searchsorted(keys, union)
    hit = np.zeros(len(union), dtype=bool)
    inb = pos < len(keys)
    hit[inb] = keys[pos[inb]] == union[inb]
    out = np.zeros(len(union), dtype=np.float64)
    out[hit] = vals[pos[hit]]
    if bg == 1 and (~hit).any():
        out[~hit] = _background(union[~hit], ext, dims, grid)
    return out


def ground_pow(ka, va, kb, vb, sa, sb, q, bg, exta, extb, dims_a, dims_b, ga, gb):
    """Powered region-aware ground cost |sa-sb|^q + sum over the aligned
    union of |F_a - F_b|^q, where F is the region value inside and the
    background outside (0 for the null background)."""
    union = np.union1d(ka, kb)
    fa = _side_values(union, ka, va, bg, exta, dims_a, ga)
    fb = _side_values(union, kb, vb, bg, extb, dims_b, gb)
    terms = _pow_abs(fa - fb, q)
    head = float(_pow_abs(np.float64(sa - sb), q))
    return math.fsum([head] + terms.tolist())


def proj_pow(vals, s, e, q):
    """Powered cost of collapsing one region to its diagonal surrogate:
    every region value and the saddle move to the midpoint of the span.
    Offsets are taken from the saddle end, so a single-point region costs
    exactly 2 (pers / 2)^q."""
    half = 0.5 * (e - s)
    head = float(_pow_abs(np.float64(half), q))
    terms = _pow_abs(np.asarray(vals, dtype=np.float64) - s - half, q)
    return math.fsum([head] + terms.tolist())


def cost_matrix(
    ka, va, pa, sa, exta, dims_a, ga,
    kb, vb, pb, sb, extb, dims_b, gb,
    q, bg,
):
    """Dense powered ground-cost matrix between two packed region lists.

    Packed layout per side: concatenated sorted keys, aligned values,
    CSR-style offsets p (len n+1), saddle values s (n,), extremum grid
    coordinates ext (n, 3), padded dims (3,), flat source grid."""
    na = len(pa) - 1
    nb = len(pb) - 1
    out = np.empty((na, nb), dtype=np.float64)
    for i in range(na):
        ki = ka[pa[i] : pa[i + 1]]
        vi = va[pa[i] : pa[i + 1]]
        for j in range(nb):
            out[i, j] = ground_pow(
                ki, vi,
                kb[pb[j] : pb[j + 1]], vb[pb[j] : pb[j + 1]],
                sa[i], sb[j], q, bg,
                exta[i], extb[j], dims_a, dims_b, ga, gb,
            )
    return out


def proj_vector(va, pa, sa, ea, q):
    """Powered diagonal-projection cost per packed region."""
    n = len(pa) - 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = proj_pow(va[pa[i] : pa[i + 1]], sa[i], ea[i], q)
    return out


def sweep(nbr, order, pos):
    """Union-find sweep over a fixed vertex order.

    ``nbr`` is the dense (n, k) neighbor table with -1 padding, ``order``
    the processing order, ``pos`` its inverse permutation.  Returns
    (seg_ext, ev_saddle, ev_loser, ev_survivor): the component leader
    (extremum vertex) every vertex joins at processing time, plus one
    event per death, in sweep order, with k-way merges emitted as k-1
    events sharing a saddle, losers ordered oldest first.
    """
    n = len(order)
    uf = list(range(n))
    ext = list(range(n))
    seg_ext = np.empty(n, dtype=np.int64)
    ev_s, ev_l, ev_w = [], [], []
    inserted = bytearray(n)
    pos_l = pos.tolist()
    nbr_l = nbr.tolist()

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for v in order.tolist():
        roots = []
        for u in nbr_l[v]:
            if u >= 0 and inserted[u]:
                r = find(u)
                if r not in roots:
                    roots.append(r)
        if not roots:
            ext[v] = v
            seg_ext[v] = v
        elif len(roots) == 1:
            uf[v] = roots[0]
            seg_ext[v] = ext[roots[0]]
        else:
            exts = [ext[r] for r in roots]
            surv = min(exts, key=lambda e: pos_l[e])
            for e in sorted(exts, key=lambda e: pos_l[e]):
                if e != surv:
                    ev_s.append(v)
                    ev_l.append(e)
                    ev_w.append(surv)
            base = roots[0]
            for r in roots[1:]:
                uf[r] = base
            uf[v] = base
            ext[base] = surv
            seg_ext[v] = surv
        inserted[v] = 1
    return (
        seg_ext,
        np.array(ev_s, dtype=np.int64),
        np.array(ev_l, dtype=np.int64),
        np.array(ev_w, dtype=np.int64),
    )
