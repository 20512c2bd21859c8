# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: merge-join ground costs and the union-find sweep.

Function-for-function mirror of ``rwass._kernels_py`` with the same
argument layouts and identical per-term arithmetic.  Totals accumulate
sequentially in ascending key order (the fallback uses fsum), so the
backends agree to rounding while each keeps exact symmetry and exact
monotonicity under nested subsampling on its own.
"""

from libc.math cimport fabs, pow

import numpy as np

cimport numpy as cnp

cnp.import_array()

KEY_BIAS = 1 << 20
KEY_MASK = (1 << 21) - 1

cdef long _KB = 1 << 20
cdef long _KM = (1 << 21) - 1


def pack_keys(offsets):
    """Pack (n, 3) integer offsets into sortable int64 keys."""
    o = np.asarray(offsets, dtype=np.int64)
    return (
        ((o[:, 0] + KEY_BIAS) << 42)
        | ((o[:, 1] + KEY_BIAS) << 21)
        | (o[:, 2] + KEY_BIAS)
    )


def unpack_keys(keys):
    """Inverse of pack_keys, returns (n, 3) offsets."""
    k = np.asarray(keys, dtype=np.int64)
    return np.stack(
        [(k >> 42) - KEY_BIAS, ((k >> 21) & KEY_MASK) - KEY_BIAS, (k & KEY_MASK) - KEY_BIAS],
        axis=1,
    )


cdef inline double _term(double diff, double q) noexcept nogil:
    cdef double a = fabs(diff)
    if q == 2.0:
        return a * a
    if q == 1.0:
        return a
    return pow(a, q)


cdef inline double _bg(long key, const long* ext, const long* dims,
                       const double* grid) noexcept nogil:
    cdef long c0 = ext[0] + ((key >> 42) - _KB)
    cdef long c1 = ext[1] + (((key >> 21) & _KM) - _KB)
    cdef long c2 = ext[2] + ((key & _KM) - _KB)
    if c0 < 0 or c0 >= dims[0] or c1 < 0 or c1 >= dims[1] or c2 < 0 or c2 >= dims[2]:
        return 0.0
    return grid[(c0 * dims[1] + c1) * dims[2] + c2]


cdef double _ground(const long* ka, const double* va, Py_ssize_t na,
                    const long* kb, const double* vb, Py_ssize_t nb,
                    double sa, double sb, double q, int bg,
                    const long* exta, const long* extb,
                    const long* da, const long* db,
                    const double* ga, const double* gb) noexcept nogil:
    cdef Py_ssize_t i = 0, j = 0
    cdef double total = _term(sa - sb, q)
    cdef double fa, fb
    while i < na or j < nb:
        if j >= nb or (i < na and ka[i] < kb[j]):
            fa = va[i]
            fb = _bg(ka[i], extb, db, gb) if bg == 1 else 0.0
            i += 1
        elif i >= na or kb[j] < ka[i]:
            fb = vb[j]
            fa = _bg(kb[j], exta, da, ga) if bg == 1 else 0.0
            j += 1
        else:
            fa = va[i]
            fb = vb[j]
            i += 1
            j += 1
        total += _term(fa - fb, q)
    return total


cdef inline const long* _lp(const long[::1] v) noexcept nogil:
    if v.shape[0] > 0:
        return &v[0]
    return NULL


cdef inline const double* _dp(const double[::1] v) noexcept nogil:
    if v.shape[0] > 0:
        return &v[0]
    return NULL


def ground_pow(ka, va, kb, vb, double sa, double sb, double q, int bg,
               exta, extb, dims_a, dims_b, ga, gb):
    """Powered region-aware ground cost |sa-sb|^q + sum over the aligned
    union of |F_a - F_b|^q, where F is the region value inside and the
    background outside (0 for the null background)."""
    cdef const long[::1] ka_ = np.ascontiguousarray(ka, dtype=np.int64)
    cdef const double[::1] va_ = np.ascontiguousarray(va, dtype=np.float64)
    cdef const long[::1] kb_ = np.ascontiguousarray(kb, dtype=np.int64)
    cdef const double[::1] vb_ = np.ascontiguousarray(vb, dtype=np.float64)
    cdef const long[::1] ea_ = np.ascontiguousarray(exta, dtype=np.int64)
    cdef const long[::1] eb_ = np.ascontiguousarray(extb, dtype=np.int64)
    cdef const long[::1] da_ = np.ascontiguousarray(dims_a, dtype=np.int64)
    cdef const long[::1] db_ = np.ascontiguousarray(dims_b, dtype=np.int64)
    cdef const double[::1] ga_ = np.ascontiguousarray(ga, dtype=np.float64)
    cdef const double[::1] gb_ = np.ascontiguousarray(gb, dtype=np.float64)
    return _ground(
        _lp(ka_), _dp(va_), ka_.shape[0],
        _lp(kb_), _dp(vb_), kb_.shape[0],
        sa, sb, q, bg,
        _lp(ea_), _lp(eb_), _lp(da_), _lp(db_), _dp(ga_), _dp(gb_),
    )


def proj_pow(vals, double s, double e, double q):
    """Powered cost of collapsing one region to its diagonal surrogate:
    every region value and the saddle move to the midpoint of the span.
    Offsets are taken from the saddle end, so a single-point region costs
    exactly 2 (pers / 2)^q."""
    cdef const double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double half = 0.5 * (e - s)
    cdef double total = _term(half, q)
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        total += _term((v[i] - s) - half, q)
    return total


def cost_matrix(ka, va, pa, sa, exta, dims_a, ga,
                kb, vb, pb, sb, extb, dims_b, gb,
                double q, int bg):
    """Dense powered ground-cost matrix between two packed region lists.

    Packed layout per side: concatenated sorted keys, aligned values,
    CSR-style offsets p (len n+1), saddle values s (n,), extremum grid
    coordinates ext (n, 3), padded dims (3,), flat source grid."""
    cdef const long[::1] ka_ = np.ascontiguousarray(ka, dtype=np.int64)
    cdef const double[::1] va_ = np.ascontiguousarray(va, dtype=np.float64)
    cdef const long[::1] pa_ = np.ascontiguousarray(pa, dtype=np.int64)
    cdef const double[::1] sa_ = np.ascontiguousarray(sa, dtype=np.float64)
    cdef const long[:, ::1] exta_ = np.ascontiguousarray(exta, dtype=np.int64)
    cdef const long[::1] da_ = np.ascontiguousarray(dims_a, dtype=np.int64)
    cdef const double[::1] ga_ = np.ascontiguousarray(ga, dtype=np.float64)
    cdef const long[::1] kb_ = np.ascontiguousarray(kb, dtype=np.int64)
    cdef const double[::1] vb_ = np.ascontiguousarray(vb, dtype=np.float64)
    cdef const long[::1] pb_ = np.ascontiguousarray(pb, dtype=np.int64)
    cdef const double[::1] sb_ = np.ascontiguousarray(sb, dtype=np.float64)
    cdef const long[:, ::1] extb_ = np.ascontiguousarray(extb, dtype=np.int64)
    cdef const long[::1] db_ = np.ascontiguousarray(dims_b, dtype=np.int64)
    cdef const double[::1] gb_ = np.ascontiguousarray(gb, dtype=np.float64)
    cdef Py_ssize_t na = pa_.shape[0] - 1
    cdef Py_ssize_t nb_n = pb_.shape[0] - 1
    out_arr = np.empty((na, nb_n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef const long* kap = _lp(ka_)
    cdef const double* vap = _dp(va_)
    cdef const long* kbp = _lp(kb_)
    cdef const double* vbp = _dp(vb_)
    cdef const long* dap = _lp(da_)
    cdef const long* dbp = _lp(db_)
    cdef const double* gap = _dp(ga_)
    cdef const double* gbp = _dp(gb_)
    cdef Py_ssize_t i, j, a0, a1, b0, b1
    with nogil:
        for i in range(na):
            a0 = pa_[i]
            a1 = pa_[i + 1]
            for j in range(nb_n):
                b0 = pb_[j]
                b1 = pb_[j + 1]
                out[i, j] = _ground(
                    kap + a0, vap + a0, a1 - a0,
                    kbp + b0, vbp + b0, b1 - b0,
                    sa_[i], sb_[j], q, bg,
                    &exta_[i, 0], &extb_[j, 0],
                    dap, dbp, gap, gbp,
                )
    return out_arr


def proj_vector(va, pa, sa, ea, double q):
    """Powered diagonal-projection cost per packed region."""
    cdef const double[::1] va_ = np.ascontiguousarray(va, dtype=np.float64)
    cdef const long[::1] pa_ = np.ascontiguousarray(pa, dtype=np.int64)
    cdef const double[::1] sa_ = np.ascontiguousarray(sa, dtype=np.float64)
    cdef const double[::1] ea_ = np.ascontiguousarray(ea, dtype=np.float64)
    cdef Py_ssize_t n = pa_.shape[0] - 1
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef double half, total
    with nogil:
        for i in range(n):
            half = 0.5 * (ea_[i] - sa_[i])
            total = _term(half, q)
            for t in range(pa_[i], pa_[i + 1]):
                total += _term((va_[t] - sa_[i]) - half, q)
            out[i] = total
    return out_arr


cdef inline long _find(long[::1] uf, long x) noexcept nogil:
    while uf[x] != x:
        uf[x] = uf[uf[x]]
        x = uf[x]
    return x


def sweep(nbr, order, pos):
    """Union-find sweep over a fixed vertex order.

    ``nbr`` is the dense (n, k) neighbor table with -1 padding, ``order``
    the processing order, ``pos`` its inverse permutation.  Returns
    (seg_ext, ev_saddle, ev_loser, ev_survivor): the component leader
    (extremum vertex) every vertex joins at processing time, plus one
    event per death, in sweep order, with k-way merges emitted as k-1
    events sharing a saddle, losers ordered oldest first.
    """
    cdef const long[:, ::1] nb = np.ascontiguousarray(nbr, dtype=np.int64)
    cdef const long[::1] order_ = np.ascontiguousarray(order, dtype=np.int64)
    cdef const long[::1] pos_ = np.ascontiguousarray(pos, dtype=np.int64)
    cdef Py_ssize_t n = order_.shape[0]
    cdef Py_ssize_t k = nb.shape[1]
    if k > 32:
        raise ValueError("neighbor table wider than 32 is unsupported")
    uf_arr = np.arange(n, dtype=np.int64)
    ext_arr = np.arange(n, dtype=np.int64)
    seg_arr = np.empty(n, dtype=np.int64)
    ins_arr = np.zeros(n, dtype=np.uint8)
    ev_s_arr = np.empty(n, dtype=np.int64)
    ev_l_arr = np.empty(n, dtype=np.int64)
    ev_w_arr = np.empty(n, dtype=np.int64)
    cdef long[::1] uf = uf_arr
    cdef long[::1] ext = ext_arr
    cdef long[::1] seg = seg_arr
    cdef unsigned char[::1] ins = ins_arr
    cdef long[::1] ev_s = ev_s_arr
    cdef long[::1] ev_l = ev_l_arr
    cdef long[::1] ev_w = ev_w_arr
    cdef long roots[32]
    cdef long exts[32]
    cdef Py_ssize_t t, c, x, y, nroots, m = 0
    cdef long v, u, r, surv, base, tmp
    cdef bint dup
    with nogil:
        for t in range(n):
            v = order_[t]
            nroots = 0
            for c in range(k):
                u = nb[v, c]
                if u >= 0 and ins[u]:
                    r = _find(uf, u)
                    dup = False
                    for x in range(nroots):
                        if roots[x] == r:
                            dup = True
                            break
                    if not dup:
                        roots[nroots] = r
                        nroots += 1
            if nroots == 0:
                ext[v] = v
                seg[v] = v
            elif nroots == 1:
                uf[v] = roots[0]
                seg[v] = ext[roots[0]]
            else:
                for x in range(nroots):
                    exts[x] = ext[roots[x]]
                # insertion sort by sweep position, oldest first
                for x in range(1, nroots):
                    tmp = exts[x]
                    y = x - 1
                    while y >= 0 and pos_[exts[y]] > pos_[tmp]:
                        exts[y + 1] = exts[y]
                        y -= 1
                    exts[y + 1] = tmp
                surv = exts[0]
                for x in range(1, nroots):
                    ev_s[m] = v
                    ev_l[m] = exts[x]
                    ev_w[m] = surv
                    m += 1
                base = roots[0]
                for x in range(1, nroots):
                    uf[roots[x]] = base
                uf[v] = base
                ext[base] = surv
                seg[v] = surv
            ins[v] = 1
    return (
        seg_arr,
        ev_s_arr[:m].copy(),
        ev_l_arr[:m].copy(),
        ev_w_arr[:m].copy(),
    )
