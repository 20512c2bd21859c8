"""Optimal matchings: diagram assignment and BDT dynamic programming.

Both solvers operate on q-th powers throughout and take the q-th root
once at the end.  Argument order is canonicalized by content before
solving, and totals are fsum-accumulated in a fixed edge order, so
distances are exactly symmetric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError, InvariantError
from .regions import (
    GroundParams,
    RegionAwareBDT,
    RegionAwarePair,
    build_region_aware,
    pair_cost_matrix,
    proj_cost_vector,
)

DIAGONAL = None  # edge endpoint for diagonal deletion/insertion


@dataclass
class Matching:
    """Edge list of one optimal matching.

    Edges are (source id, target id, ground cost); ``None`` marks the
    diagonal.  ``total`` is the distance, with total^q equal to the sum
    of powered edge costs up to accumulation rounding.
    """

    edges: list[tuple]
    total: float


def solve_assignment(cost: np.ndarray):
    """Exact minimum-cost perfect matching on a square cost matrix.

    Returns (perm, total) with row i assigned to column perm[i]; the
    total is re-accumulated by fsum in row order so it is reproducible.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ContractError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ContractError("cost matrix must be finite")
    if cost.size and cost.min() < 0:
        raise ContractError("cost matrix must be non-negative")
    if cost.shape[0] == 0:
        return np.empty(0, dtype=np.int64), 0.0
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    total = math.fsum(cost[i, perm[i]] for i in range(cost.shape[0]))
    return perm, total


def _validate_sides(A: list[RegionAwarePair], B: list[RegionAwarePair]):
    kinds = {a.pair.kind for a in A} | {b.pair.kind for b in B}
    if len(kinds) > 1:
        raise ContractError(f"mixed pair kinds: {sorted(kinds)}")
    strides = {a.stride for a in A} | {b.stride for b in B}
    if len(strides) > 1:
        raise ContractError(f"mixed strides: {sorted(strides)}")


def _side_key(A: list[RegionAwarePair], params: GroundParams):
    """Deterministic content key used to canonicalize argument order."""
    meta = tuple(
        (
            a.pair.birth,
            a.pair.death,
            a.saddle_value,
            a.extremum_coord,
            a.stride,
            a.full_size,
            a.keys.tobytes(),
            a.values.tobytes(),
        )
        for a in A
    )
    grid_blob = b""
    if params.background == "data" and A:
        grid_blob = A[0].grid.values.tobytes()
    return (len(A), meta, grid_blob)


def _diagram_solve(X, Y, params: GroundParams, method: str):
    """Augmented assignment over X rows / Y columns; returns powered
    total and edges in X-index order."""
    n, m = len(X), len(Y)
    if n == 0 and m == 0:
        return 0.0, []
    C = pair_cost_matrix(X, Y, params, method)
    px = proj_cost_vector(X, params, method)
    py = proj_cost_vector(Y, params, method)
    inv_q = 1.0 / params.q
    if n == 0:
        edges = [(DIAGONAL, j, py[j] ** inv_q) for j in range(m)]
        return math.fsum(py), edges
    if m == 0:
        edges = [(i, DIAGONAL, px[i] ** inv_q) for i in range(n)]
        return math.fsum(px), edges

    # Feasible all-delete total bounds the optimum, so any entry above it
    # can stand in for "forbidden".
    big = math.fsum(px.tolist() + py.tolist()) + 1.0
    size = n + m
    M = np.zeros((size, size), dtype=np.float64)
    M[:n, :m] = C
    M[:n, m:] = big
    M[np.arange(n), m + np.arange(n)] = px
    M[n:, :m] = big
    M[n + np.arange(m), np.arange(m)] = py
    perm, _ = solve_assignment(M)

    terms = []
    edges = []
    for i in range(n):
        j = int(perm[i])
        if j < m:
            terms.append(C[i, j])
            edges.append((i, j, C[i, j] ** inv_q))
        else:
            if j != m + i:
                raise InvariantError("solver crossed a forbidden entry")
            terms.append(px[i])
            edges.append((i, DIAGONAL, px[i] ** inv_q))
    for j in range(m):
        col = int(perm[n + j])
        if col < m:
            if col != j:
                raise InvariantError("solver crossed a forbidden entry")
            terms.append(py[j])
            edges.append((DIAGONAL, j, py[j] ** inv_q))
    return math.fsum(terms), edges


def _finish(total_pow: float, edges, swapped: bool, q: float) -> tuple[float, Matching]:
    if swapped:
        edges = [(j, i, c) for (i, j, c) in edges]
    edges.sort(key=lambda e: (e[0] is DIAGONAL, e[0] or 0, e[1] is DIAGONAL, e[1] or 0))
    dist = total_pow ** (1.0 / q)
    return dist, Matching(edges=edges, total=dist)


def wasserstein_diagrams(
    A: list[RegionAwarePair],
    B: list[RegionAwarePair],
    params: GroundParams,
    method: str = "region",
):
    """q-Wasserstein between two diagrams of region-aware pairs.

    Every pair may match any opposite pair or slide to its own diagonal
    surrogate; the global pairs take part like any other pair.
    """
    _validate_sides(A, B)
    swapped = _side_key(B, params) < _side_key(A, params)
    X, Y = (B, A) if swapped else (A, B)
    total_pow, edges = _diagram_solve(X, Y, params, method)
    return _finish(total_pow, edges, swapped, params.q)


def _postorder(children: list[list[int]], root: int) -> list[int]:
    out = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
        else:
            stack.append((node, True))
            for c in reversed(children[node]):
                stack.append((c, False))
    return out


def _forest_assign(ca, cb, T, del_x, del_y):
    """Local child-forest assignment at one internal-internal cell.

    Matching a child pair costs its subtree distance; leaving a child
    unmatched costs deleting its whole subtree.  Returns (terms, matched
    child id pairs); terms are in a fixed order so fsum is reproducible.
    """
    k, l = len(ca), len(cb)
    big = math.fsum([del_x[c] for c in ca] + [del_y[c] for c in cb]) + 1.0
    M = np.zeros((k + l, k + l), dtype=np.float64)
    M[:k, :l] = T[np.ix_(ca, cb)]
    M[:k, l:] = big
    M[np.arange(k), l + np.arange(k)] = del_x[ca]
    M[k:, :l] = big
    M[k + np.arange(l), np.arange(l)] = del_y[cb]
    rows, cols = linear_sum_assignment(M)
    perm = np.empty(k + l, dtype=np.int64)
    perm[rows] = cols
    terms = []
    mc = []
    for r in range(k):
        c = int(perm[r])
        if c < l:
            terms.append(T[ca[r], cb[c]])
            mc.append((ca[r], cb[c]))
        else:
            if c != l + r:
                raise InvariantError("forest solver crossed a forbidden entry")
            terms.append(del_x[ca[r]])
    for c in range(l):
        row = int(perm[k + c])
        if row < l:
            if row != c:
                raise InvariantError("forest solver crossed a forbidden entry")
            terms.append(del_y[cb[c]])
    return terms, mc


def _bdt_solve(X: RegionAwareBDT, Y: RegionAwareBDT, params: GroundParams, method: str):
    """DP over rooted partial isomorphisms; returns powered total and the
    realizing edges (X side first)."""
    ch_x = X.bdt.children()
    ch_y = Y.bdt.children()
    rx, ry = X.bdt.root, Y.bdt.root
    C = pair_cost_matrix(X.regions, Y.regions, params, method)
    px = proj_cost_vector(X.regions, params, method)
    py = proj_cost_vector(Y.regions, params, method)
    post_x = _postorder(ch_x, rx)
    post_y = _postorder(ch_y, ry)

    def subtree_sums(children, post, proj):
        out = np.empty(len(proj), dtype=np.float64)
        for i in post:
            out[i] = math.fsum([proj[i]] + [out[c] for c in children[i]])
        return out

    del_x = subtree_sums(ch_x, post_x, px)
    del_y = subtree_sums(ch_y, post_y, py)

    # Leaf-leaf cells are exactly the ground cost; one-sided forests force
    # deleting every child subtree; only internal-internal cells need the
    # local assignment, in postorder so child cells are final first.
    int_x = [i for i in post_x if ch_x[i]]
    int_y = [j for j in post_y if ch_y[j]]
    T = C.copy()
    for j in int_y:
        T[:, j] = C[:, j] + math.fsum([del_y[c] for c in ch_y[j]])
    for i in int_x:
        T[i, :] = C[i, :] + math.fsum([del_x[c] for c in ch_x[i]])
    for i in int_x:
        for j in int_y:
            terms, _ = _forest_assign(ch_x[i], ch_y[j], T, del_x, del_y)
            T[i, j] = math.fsum([C[i, j]] + terms)

    drop_all = math.fsum([del_x[rx], del_y[ry]])
    inv_q = 1.0 / params.q
    edges = []

    def delete_subtree(side_children, proj, node, left: bool):
        stack = [node]
        while stack:
            v = stack.pop()
            cost = proj[v] ** inv_q
            edges.append((v, DIAGONAL, cost) if left else (DIAGONAL, v, cost))
            stack.extend(side_children[v])

    if T[rx, ry] <= drop_all:
        total = float(T[rx, ry])
        stack = [(rx, ry)]
        while stack:
            i, j = stack.pop()
            edges.append((i, j, C[i, j] ** inv_q))
            if ch_x[i] and ch_y[j]:
                # same inputs as the forward pass, so the same optimum
                _, mc = _forest_assign(ch_x[i], ch_y[j], T, del_x, del_y)
            else:
                mc = []
            hit_x = {a for a, _ in mc}
            hit_y = {b for _, b in mc}
            for c in ch_x[i]:
                if c not in hit_x:
                    delete_subtree(ch_x, px, c, True)
            for c in ch_y[j]:
                if c not in hit_y:
                    delete_subtree(ch_y, py, c, False)
            stack.extend(mc)
    else:
        total = float(drop_all)
        delete_subtree(ch_x, px, rx, True)
        delete_subtree(ch_y, py, ry, False)
    return total, edges


def wasserstein_bdt(
    A: RegionAwareBDT,
    B: RegionAwareBDT,
    params: GroundParams,
    method: str = "region",
):
    """Structure-constrained Wasserstein between two BDTs.

    Tree-to-tree cost at a node pair is the node's ground cost plus an
    optimal assignment of the child forests (children may also delete
    their whole subtree); the top level additionally admits deleting both
    trees outright.  With eps1 = 1 this equals the diagram distance.
    """
    if A.eps1 != B.eps1:
        raise ContractError(
            f"eps1 preprocessing differs: {A.eps1} vs {B.eps1}"
        )
    _validate_sides(A.regions, B.regions)
    swapped = _side_key(B.regions, params) < _side_key(A.regions, params)
    X, Y = (B, A) if swapped else (A, B)
    if X.eps1 == 1.0:
        # fully collapsed saddles: the trees no longer constrain the
        # assignment, so the single large augmented problem applies
        total_pow, edges = _diagram_solve(X.regions, Y.regions, params, method)
    else:
        total_pow, edges = _bdt_solve(X, Y, params, method)
    return _finish(total_pow, edges, swapped, params.q)


def combine_kinds(d_min: float, d_max: float, q: float) -> float:
    """Single scalar from the two per-kind distances (q-norm)."""
    return math.fsum([d_min**q, d_max**q]) ** (1.0 / q)


def field_distance(
    grid_a,
    grid_b,
    params: GroundParams,
    method: str = "region",
    kind: str = "both",
    simplify_ratio: float = 0.0,
    eps1: float = 0.0,
) -> float:
    """Distance between two scalar fields in one call.

    ``kind`` selects the tree: "split" (maxima), "join" (minima), or
    "both", which combines the two per-kind distances into one scalar.
    """
    if kind not in ("split", "join", "both"):
        raise ContractError(f"kind must be 'split', 'join' or 'both', got {kind!r}")
    variants = ("join", "split") if kind == "both" else (kind,)
    dists = []
    for variant in variants:
        A = build_region_aware(grid_a, variant, simplify_ratio, eps1, params.lam)
        B = build_region_aware(grid_b, variant, simplify_ratio, eps1, params.lam)
        dists.append(wasserstein_bdt(A, B, params, method)[0])
    if kind == "both":
        return combine_kinds(dists[0], dists[1], params.q)
    return dists[0]


def export_matching_json(matching: Matching, path) -> None:
    recs = [
        {
            "source": "diagonal" if i is DIAGONAL else int(i),
            "target": "diagonal" if j is DIAGONAL else int(j),
            "cost": float(c),
        }
        for (i, j, c) in matching.edges
    ]
    with open(path, "w") as fh:
        json.dump({"total": matching.total, "edges": recs}, fh, indent=1)
        fh.write("\n")
