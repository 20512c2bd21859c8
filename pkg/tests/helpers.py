"""Shared fixture builders for the test suite.

Everything here is deterministic: builders take explicit seeds, and the
clustering helper breaks every tie by index, so repeated runs produce
identical fields, identical members and identical labels.
"""

import math

import numpy as np

import rwass


def random_grid(rng, max_extent=4):
    """Small random grid with 1 to 3 axes.

    Half the draws use a tiny integer value set so ties are common; the
    other half use continuous values.
    """
    ndim = int(rng.integers(1, 4))
    dims = tuple(int(rng.integers(1, max_extent + 1)) for _ in range(ndim))
    n = int(np.prod(dims))
    if rng.random() < 0.5:
        values = rng.integers(0, 4, size=n).astype(np.float64)
    else:
        values = rng.normal(size=n)
    return rwass.ScalarGrid(dims, values)


def small_member(rng, lo=5, hi=9, n_hills=3, simplify=0.05, eps1=0.0, lam=0.0):
    """Random few-pair member on a small 2D grid."""
    dims = (int(rng.integers(lo, hi)), int(rng.integers(lo, hi)))
    g = rwass.synth_hills(dims, seed=int(rng.integers(1 << 30)), n_hills=n_hills)
    return rwass.build_region_aware(g, "split", simplify, eps1, lam)


# -- two-feature field whose diagram is blind to a height swap ---------

DOME_STAR_DIMS = (32, 32)
DOME_CENTER = (8, 16)
STAR_CENTER = (24, 16)


def dome_star_field(h_dome, h_star):
    """A round dome plus a four-armed star ridge on a flat background.

    Both features peak exactly at their centers and die into the zero
    background, so swapping the two heights permutes the persistence
    pairs without changing the diagram as a multiset.
    """
    X, Y = np.meshgrid(
        np.arange(DOME_STAR_DIMS[0]), np.arange(DOME_STAR_DIMS[1]), indexing="ij"
    )
    r2 = (X - DOME_CENTER[0]) ** 2 + (Y - DOME_CENTER[1]) ** 2
    t = np.clip(1.0 - r2 / 36.0, 0.0, None)
    dome = h_dome * t * t
    dx = np.abs(X - STAR_CENTER[0])
    dy = np.abs(Y - STAR_CENTER[1])
    arm1 = np.clip(1.0 - dx / 1.8, 0.0, None) * np.clip(1.0 - dy / 6.0, 0.0, None)
    arm2 = np.clip(1.0 - dy / 1.8, 0.0, None) * np.clip(1.0 - dx / 6.0, 0.0, None)
    star = h_star * np.maximum(arm1, arm2)
    return rwass.ScalarGrid(DOME_STAR_DIMS, (dome + star).ravel())


def feature_of(member, grid, idx):
    """Name a pair by the landmark its extremum sits on."""
    coord = tuple(np.unravel_index(member.pairs[idx].extremum_vertex, grid.dims))
    if coord == DOME_CENTER:
        return "dome"
    if coord == STAR_CENTER:
        return "star"
    return f"other{coord}"


# -- two-class ensemble with identical diagrams -------------------------

TWO_CLASS_DIMS = (24, 24)
# (center, height, inverse squared width, rotation angle)
TWO_CLASS_HILLS = [
    ((5, 5), 1.0, 0.30, 0.55),
    ((5, 16), 0.7, 0.45, -0.80),
    ((16, 10), 0.5, 0.28, 1.10),
]


def skewed_hill_member(seed, reflected):
    """Ensemble member with three rotated, one-side-skewed hills.

    Members of one class differ only by a whole-grid jitter of the hill
    centers; ``reflected`` members are point reflections of the same
    construction.  Both operations preserve the persistence diagram
    exactly (hill supports never overlap and the reflection maps the
    vertex connectivity onto itself), but the reflected hills face the
    other way, so the fields around the extrema genuinely differ.
    """
    r = np.random.default_rng(seed)
    ox, oy = int(r.integers(-2, 3)), int(r.integers(-2, 3))
    X, Y = np.meshgrid(
        np.arange(TWO_CLASS_DIMS[0]), np.arange(TWO_CLASS_DIMS[1]), indexing="ij"
    )
    vals = np.zeros(TWO_CLASS_DIMS)
    for (cx, cy), h, inv_w2, theta in TWO_CLASS_HILLS:
        dx = X - cx - ox
        dy = Y - cy - oy
        ct, st = np.cos(theta), np.sin(theta)
        u = ct * dx + st * dy
        v = -st * dx + ct * dy
        su = np.where(u > 0, 1.5, 0.6)  # the skew kills central symmetry
        r2 = inv_w2 * (su * u * u + 0.5 * v * v)
        vals += np.where(dx * dx + dy * dy <= 25.0, h * np.exp(-r2), 0.0)
    if reflected:
        vals = vals[::-1, ::-1].copy()
    return rwass.ScalarGrid(TWO_CLASS_DIMS, vals.ravel())


# -- dense lattice-of-hills ensemble ------------------------------------


def lattice_member(seed, lam, width=(0.9, 1.4), dims=(64, 64), nx=10, ny=5):
    """Member with one jittered hill per lattice cell.

    Narrow widths keep every hill's merge saddle near the background, so
    all fifty pairs survive simplification on every seed.
    """
    r = np.random.default_rng(seed)
    hills = []
    for i in range(nx):
        for j in range(ny):
            cx = (i + 0.5) * dims[0] / nx + r.uniform(-1.2, 1.2)
            cy = (j + 0.5) * dims[1] / ny + r.uniform(-1.2, 1.2)
            hills.append(((cx, cy), r.uniform(0.4, 1.0), r.uniform(*width)))
    g = rwass.synth_hills(dims, hills=hills)
    return rwass.build_region_aware(g, "split", 0.001, 0.05, lam)


# -- order-preserving perturbations --------------------------------------


def order_preserving_pair(rng, lo=6, hi=11):
    """A field and a perturbed copy with the same vertex sweep order.

    The perturbation amplitude stays below half the smallest gap between
    consecutive sorted values, so every comparison between two vertices
    keeps its sign.
    """
    dims = (int(rng.integers(lo, hi)), int(rng.integers(lo, hi)))
    g = rwass.synth_hills(dims, seed=int(rng.integers(1 << 30)), n_hills=2)
    vals = g.values + np.arange(g.size) * 1e-9  # force distinct values
    g = rwass.ScalarGrid(dims, vals)
    gaps = np.diff(np.sort(g.values))
    amp = 0.45 * float(gaps.min())
    noise = rng.uniform(-amp, amp, size=g.size)
    h = rwass.ScalarGrid(dims, g.values + noise)
    return g, h


def value_norm(ga, gb, q):
    """Plain q-norm of the pointwise field difference."""
    return float(np.sum(np.abs(ga.values - gb.values) ** q) ** (1.0 / q))


# -- independent ground-metric recomputation -----------------------------


def region_value_map(pair):
    """Dict of extremum-relative offset -> region value for one pair."""
    lo, hi = pair.bbox
    shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    mask = np.asarray(pair.mask).reshape(shape)
    out = {}
    for k, coord in enumerate(np.argwhere(mask)):
        off = tuple(int(c + a - e) for c, a, e in zip(coord, lo, pair.extremum_coord))
        out[off] = float(pair.values[k])
    return out


def ground_distance_reference(a, b, q, background):
    """Dict-based recomputation of the region-aware ground metric."""

    def lookup(vm, pair, off):
        if off in vm:
            return vm[off]
        if background == "null":
            return 0.0
        coord = tuple(e + o for e, o in zip(pair.extremum_coord, off))
        if all(0 <= c < d for c, d in zip(coord, pair.grid.dims)):
            return float(pair.grid.shaped()[coord])
        return 0.0

    va, vb = region_value_map(a), region_value_map(b)
    terms = [abs(a.saddle_value - b.saddle_value) ** q]
    for off in sorted(set(va) | set(vb)):
        terms.append(abs(lookup(va, a, off) - lookup(vb, b, off)) ** q)
    return math.fsum(terms) ** (1.0 / q)


def projection_cost_reference(pair, q):
    """Recompute the deletion cost: region and saddle collapse onto the
    midpoint of the pair's span."""
    m = 0.5 * (pair.pair.extremum_value + pair.saddle_value)
    terms = [abs(pair.saddle_value - m) ** q]
    terms += [abs(float(v) - m) ** q for v in pair.values]
    return math.fsum(terms) ** (1.0 / q)


# -- deterministic clustering --------------------------------------------


def two_means(coords, iters=64):
    """2-means with farthest-pair initialization and Lloyd updates.

    All ties resolve to the lowest index, so degenerate inputs (for
    example all-identical points) collapse to a single cluster instead
    of depending on randomness.
    """
    pts = np.asarray(coords, dtype=np.float64)
    n = pts.shape[0]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    i, j = divmod(int(np.argmax(d2)), n)
    centers = np.stack([pts[i], pts[j]])
    labels = None
    for _ in range(iters):
        dist = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in (0, 1):
            sel = labels == c
            if sel.any():
                centers[c] = pts[sel].mean(axis=0)
    return labels
