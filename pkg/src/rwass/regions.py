"""Region-aware pairs: feature regions, subsampling, and ground metrics.

A persistence pair is enriched with the scalar field restricted to its
segmentation region.  Two regions are compared after aligning them at
their extrema: the point at integer offset o from one extremum coincides
with the point at offset o from the other.  Outside a region the chosen
background supplies values: identically zero, or the other feature's
source field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels_py as _packing
from ._backend import kernels
from .errors import ContractError, InvariantError
from .fields import ScalarGrid
from .topology import (
    BranchDecompositionTree,
    MergeTree,
    PersistencePair,
    Segmentation,
    build_bdt,
    compute_merge_tree,
    saddle_merge,
    simplify,
)

BACKGROUNDS = ("null", "data")
_BG_CODE = {"null": 0, "data": 1}


@dataclass
class GroundParams:
    """Knobs of the ground metrics; defaults follow the recommended
    operating point (q = 2, lam = 0.1, null background, w_l = 0.5,
    w_v = 0.2)."""

    q: float = 2.0
    lam: float = 0.1
    background: str = "null"
    w_l: float = 0.5
    w_v: float = 0.2

    def __post_init__(self):
        if self.q < 1:
            raise ContractError(f"q must be >= 1, got {self.q}")
        if not 0.0 <= self.lam <= 1.0:
            raise ContractError(f"lam must be in [0, 1], got {self.lam}")
        if self.background not in BACKGROUNDS:
            raise ContractError(f"background must be one of {BACKGROUNDS}")
        if self.w_l < 0 or self.w_v < 0:
            raise ContractError("metric weights must be nonnegative")


@dataclass
class RegionAwarePair:
    """One persistence pair plus its region content.

    ``mask`` is the membership bitset over the bounding box and ``values``
    the region's scalar values in bbox row-major order (which is also
    ascending packed-key order).  ``stride`` is 1 until subsampled.
    """

    pair: PersistencePair
    extremum_coord: tuple[int, ...]
    bbox: tuple[tuple[int, ...], tuple[int, ...]]  # (lo, hi) inclusive
    mask: np.ndarray
    values: np.ndarray
    saddle_value: float
    stride: int
    grid: ScalarGrid
    full_size: int
    keys: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.values.size == 0:
            raise InvariantError("empty region")
        if self.values.size != int(self.mask.sum()):
            raise InvariantError("values/mask size mismatch")
        ev = self.pair.extremum_value
        if not np.any(self.values == ev):
            raise InvariantError("extremum value missing from region values")
        if self.keys is None:
            self.keys = _packing.pack_keys(self._offsets())

    def _offsets(self) -> np.ndarray:
        lo = np.array(self.bbox[0], dtype=np.int64)
        idx = np.argwhere(self.mask).astype(np.int64) + lo
        ext = np.array(self.extremum_coord, dtype=np.int64)
        off = idx - ext
        out = np.zeros((len(off), 3), dtype=np.int64)
        out[:, : off.shape[1]] = off
        return out

    @property
    def size(self) -> int:
        return int(self.values.size)

    def padded_extremum(self) -> np.ndarray:
        out = np.zeros(3, dtype=np.int64)
        out[: len(self.extremum_coord)] = self.extremum_coord
        return out


def _padded_dims(grid: ScalarGrid) -> np.ndarray:
    out = np.ones(3, dtype=np.int64)
    out[: grid.ndim] = grid.dims
    return out


def make_region_aware(
    bdt: BranchDecompositionTree, seg: Segmentation, grid: ScalarGrid
) -> list[RegionAwarePair]:
    """One RegionAwarePair per BDT node, regions cut from the
    segmentation."""
    n_pairs = len(bdt.pairs)
    if seg.pair_of.min() < 0 or seg.pair_of.max() >= n_pairs:
        raise ContractError("segmentation refers to pairs outside the BDT")
    order = np.argsort(seg.pair_of, kind="stable")
    bounds = np.searchsorted(seg.pair_of[order], np.arange(n_pairs + 1))
    out = []
    for i, p in enumerate(bdt.pairs):
        verts = order[bounds[i] : bounds[i + 1]]
        verts = np.sort(verts)
        if verts.size == 0:
            raise ContractError(f"pair {i} has an empty region")
        if p.extremum_vertex not in verts:
            raise InvariantError("extremum outside its own region")
        if not p.is_global and p.saddle_vertex in verts:
            raise InvariantError("saddle inside its own region")
        coords = np.stack(np.unravel_index(verts, grid.dims), axis=1)
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        mask = np.zeros(tuple(hi - lo + 1), dtype=bool)
        mask[tuple((coords - lo).T)] = True
        out.append(
            RegionAwarePair(
                pair=p,
                extremum_coord=tuple(
                    int(c) for c in np.unravel_index(p.extremum_vertex, grid.dims)
                ),
                bbox=(tuple(int(c) for c in lo), tuple(int(c) for c in hi)),
                mask=mask,
                values=grid.values[verts],
                saddle_value=p.saddle_value,
                stride=1,
                grid=grid,
                full_size=int(verts.size),
            )
        )
    return out


def stride_for(lam: float, m: int) -> int:
    """Stride n = round(lam * m + 1) with half-up rounding; m is the
    largest extent of the full grid."""
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lam must be in [0, 1], got {lam}")
    return int(math.floor(lam * m + 1.0 + 0.5))


def subsample(pair: RegionAwarePair, lam: float) -> RegionAwarePair:
    """Keep region points whose per-axis offset from the extremum is a
    multiple of the stride; the extremum itself always stays."""
    m = max(pair.grid.dims)
    n = stride_for(lam, m)
    if n == 1:
        return replace(pair, stride=1)
    lo = np.array(pair.bbox[0], dtype=np.int64)
    ext = np.array(pair.extremum_coord, dtype=np.int64)
    axes = np.indices(pair.mask.shape)
    keep = np.ones(pair.mask.shape, dtype=bool)
    for ax in range(pair.mask.ndim):
        keep &= (axes[ax] + lo[ax] - ext[ax]) % n == 0
    new_mask = pair.mask & keep
    sel = keep[pair.mask]
    return replace(
        pair,
        mask=new_mask,
        values=pair.values[sel],
        stride=n,
        keys=pair.keys[sel],
    )


def _check_compatible(a: RegionAwarePair, b: RegionAwarePair):
    if a.grid.ndim != b.grid.ndim:
        raise ContractError("grid dimensionality mismatch")
    if a.stride != b.stride:
        raise ContractError(f"stride mismatch: {a.stride} vs {b.stride}")


def ground_pow_pair(a: RegionAwarePair, b: RegionAwarePair, params: GroundParams) -> float:
    """Powered region-aware ground cost (the q-th power of the metric)."""
    _check_compatible(a, b)
    return float(
        kernels.ground_pow(
            a.keys, a.values, b.keys, b.values,
            a.saddle_value, b.saddle_value,
            params.q, _BG_CODE[params.background],
            a.padded_extremum(), b.padded_extremum(),
            _padded_dims(a.grid), _padded_dims(b.grid),
            a.grid.values, b.grid.values,
        )
    )


def ground_distance(a: RegionAwarePair, b: RegionAwarePair, params: GroundParams) -> float:
    """Region-aware ground metric (|sa-sb|^q + C)^(1/q); see module
    docstring for the alignment and background rules."""
    return ground_pow_pair(a, b, params) ** (1.0 / params.q)


def projection_pow(a: RegionAwarePair, params: GroundParams) -> float:
    return float(
        kernels.proj_pow(a.values, a.saddle_value, a.pair.extremum_value, params.q)
    )


def projection_cost(a: RegionAwarePair, params: GroundParams) -> float:
    """Cost of deleting a feature: its region collapses onto the diagonal
    surrogate at m = (extremum + saddle) / 2."""
    return projection_pow(a, params) ** (1.0 / params.q)


def _classic_pow(a: RegionAwarePair, b: RegionAwarePair, q: float) -> list[float]:
    pa, pb = a.pair, b.pair
    return [abs(pa.birth - pb.birth) ** q, abs(pa.death - pb.death) ** q]


def _norm_coords(a: RegionAwarePair) -> list[float]:
    return [
        c / (e - 1) if e > 1 else 0.0
        for c, e in zip(a.extremum_coord, a.grid.dims)
    ]


def classical_pow_pair(a, b, q: float) -> float:
    return math.fsum(_classic_pow(a, b, q))


def lifting_pow_pair(a, b, params: GroundParams) -> float:
    """Classical cost plus w_l times the offset between extremum
    locations, coordinates normalized by the domain bounds."""
    q = params.q
    terms = _classic_pow(a, b, q)
    for ca, cb in zip(_norm_coords(a), _norm_coords(b)):
        terms.append(params.w_l * abs(ca - cb) ** q)
    return math.fsum(terms)


def volume_pow_pair(a, b, params: GroundParams) -> float:
    """Classical cost plus w_v times the difference of region volumes,
    normalized by the total vertex count."""
    q = params.q
    va = a.full_size / a.grid.size
    vb = b.full_size / b.grid.size
    return math.fsum(_classic_pow(a, b, q) + [params.w_v * abs(va - vb) ** q])


def classical_proj_pow(a: RegionAwarePair, q: float) -> float:
    half = abs(a.pair.death - a.pair.birth) / 2.0
    return 2.0 * half**q


def lifting_ground(a, b, params: GroundParams) -> float:
    return lifting_pow_pair(a, b, params) ** (1.0 / params.q)


def volume_ground(a, b, params: GroundParams) -> float:
    return volume_pow_pair(a, b, params) ** (1.0 / params.q)


METHODS = ("classic", "lifting", "volume", "region")


def pair_cost_matrix(
    A: list[RegionAwarePair], B: list[RegionAwarePair], params: GroundParams, method: str
) -> np.ndarray:
    """Powered ground costs for all (a, b); rows follow A."""
    if method not in METHODS:
        raise ContractError(f"method must be one of {METHODS}")
    if A and B:
        _check_compatible(A[0], B[0])
    if method == "region":
        ka, va, pa, sa, ea, exta, dims_a, ga = _pack_side(A)
        kb, vb, pb, sb, eb, extb, dims_b, gb = _pack_side(B)
        return kernels.cost_matrix(
            ka, va, pa, sa, exta, dims_a, ga,
            kb, vb, pb, sb, extb, dims_b, gb,
            params.q, _BG_CODE[params.background],
        )
    fn = {
        "classic": lambda a, b: classical_pow_pair(a, b, params.q),
        "lifting": lambda a, b: lifting_pow_pair(a, b, params),
        "volume": lambda a, b: volume_pow_pair(a, b, params),
    }[method]
    out = np.empty((len(A), len(B)), dtype=np.float64)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = fn(a, b)
    return out


def proj_cost_vector(
    A: list[RegionAwarePair], params: GroundParams, method: str
) -> np.ndarray:
    """Powered deletion costs; classical diagonal cost for the baseline
    methods (their extra terms vanish against a feature's own
    surrogate)."""
    if method == "region":
        return np.array([projection_pow(a, params) for a in A], dtype=np.float64)
    return np.array([classical_proj_pow(a, params.q) for a in A], dtype=np.float64)


def _pack_side(A: list[RegionAwarePair]):
    if A:
        grid = A[0].grid
        for a in A:
            if a.grid is not grid:
                raise ContractError("pairs of one side must share a source grid")
        dims = _padded_dims(grid)
        gvals = grid.values
    else:
        dims = np.ones(3, dtype=np.int64)
        gvals = np.zeros(1, dtype=np.float64)
    ka = (
        np.concatenate([a.keys for a in A])
        if A
        else np.empty(0, dtype=np.int64)
    )
    va = (
        np.concatenate([a.values for a in A])
        if A
        else np.empty(0, dtype=np.float64)
    )
    pa = np.zeros(len(A) + 1, dtype=np.int64)
    for i, a in enumerate(A):
        pa[i + 1] = pa[i] + a.size
    sa = np.array([a.saddle_value for a in A], dtype=np.float64)
    ea = np.array([a.pair.extremum_value for a in A], dtype=np.float64)
    ext = (
        np.stack([a.padded_extremum() for a in A])
        if A
        else np.empty((0, 3), dtype=np.int64)
    )
    return ka, va, pa, sa, ea, np.ascontiguousarray(ext), dims, gvals


@dataclass
class RegionAwareBDT:
    """Branch decomposition tree whose nodes carry regions; ``lam``
    records the subsampling level shared by all regions."""

    bdt: BranchDecompositionTree
    regions: list[RegionAwarePair]
    lam: float
    simplify_ratio: float = 0.0

    @property
    def pairs(self) -> list[PersistencePair]:
        return self.bdt.pairs

    @property
    def kind(self) -> str:
        return self.bdt.pairs[self.bdt.root].kind

    @property
    def eps1(self) -> float:
        return self.bdt.eps1

    @property
    def stride(self) -> int:
        return self.regions[0].stride if self.regions else 1


def build_region_aware(
    grid: ScalarGrid,
    variant: str = "split",
    simplify_ratio: float = 0.0,
    eps1: float = 0.0,
    lam: float = 0.0,
    order=None,
) -> RegionAwareBDT:
    """Full pipeline: sweep, persistence-simplify, branch-decompose,
    saddle-merge, cut regions, subsample."""
    tree, pairs, seg = compute_merge_tree(grid, variant, order)
    pairs, seg = simplify(pairs, seg, simplify_ratio)
    bdt = build_bdt(tree, pairs)
    bdt = saddle_merge(bdt, tree, eps1)
    regions = make_region_aware(bdt, seg, grid)
    if lam > 0.0:
        regions = [subsample(r, lam) for r in regions]
    return RegionAwareBDT(
        bdt=bdt, regions=regions, lam=lam, simplify_ratio=simplify_ratio
    )


def _rle(mask_flat: np.ndarray) -> list[int]:
    """Run lengths of a boolean array, starting with a False run."""
    out = []
    cur = False
    run = 0
    for b in mask_flat:
        if bool(b) == cur:
            run += 1
        else:
            out.append(run)
            cur = bool(b)
            run = 1
    out.append(run)
    return out


def export_regions_json(ra: RegionAwareBDT, path) -> None:
    """Region-aware BDT export; masks are run-length encoded over the
    bounding box, values resolve against the source field by index."""
    recs = []
    for i, r in enumerate(ra.regions):
        p = r.pair
        recs.append(
            {
                "id": i,
                "kind": p.kind,
                "birth": p.birth,
                "death": p.death,
                "extremum_vertex": p.extremum_vertex,
                "saddle_vertex": p.saddle_vertex,
                "parent_id": int(ra.bdt.parent[i]),
                "extremum_coord": list(r.extremum_coord),
                "bbox": [list(r.bbox[0]), list(r.bbox[1])],
                "stride": r.stride,
                "mask_rle": _rle(r.mask.reshape(-1)),
            }
        )
    with open(path, "w") as fh:
        json.dump({"eps1": ra.eps1, "lam": ra.lam, "regions": recs}, fh, indent=1)
        fh.write("\n")
