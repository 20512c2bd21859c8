"""Merge trees, persistence pairs, segmentation, and branch decompositions.

The sweep inserts vertices one at a time in the symbolic-perturbation
order (value, vertex id).  Components are tracked by union-find; the
elder rule kills the component whose extremum entered the sweep later.
Everything downstream (simplification, branch decomposition, saddle
merging) is derived from the recorded merge events.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels
from .errors import ContractError, InvariantError
from .fields import ScalarGrid, neighbor_matrix, sweep_order

GLOBAL_SADDLE = -1

NODE_EXTREMUM = 0
NODE_SADDLE = 1
NODE_ROOT = 2

_KIND_OF_VARIANT = {"join": "min", "split": "max"}


@dataclass(frozen=True)
class PersistencePair:
    """One persistence pair.  ``saddle_vertex`` is -1 for the global pair,
    whose death is cropped to the opposite global extremum."""

    extremum_vertex: int
    saddle_vertex: int
    birth: float
    death: float
    kind: str  # "min" (min-saddle) or "max" (saddle-max)

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def is_global(self) -> bool:
        return self.saddle_vertex < 0

    @property
    def extremum_value(self) -> float:
        return self.death if self.kind == "max" else self.birth

    @property
    def saddle_value(self) -> float:
        return self.birth if self.kind == "max" else self.death


@dataclass
class MergeTree:
    """Critical-point tree of one sweep.

    Nodes are extrema (leaves), merge saddles, and the final root (the
    opposite global extremum; it may coincide with the last saddle).
    ``node_pair`` gives the persistence pair whose branch owns each node,
    i.e. the pair of the surviving leader there.
    """

    variant: str  # "join" | "split"
    node_vertex: np.ndarray
    node_value: np.ndarray
    node_kind: np.ndarray
    parent: np.ndarray
    node_ext: np.ndarray  # owning branch's extremum vertex per node
    node_pair: np.ndarray
    root: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_vertex)

    def node_of_vertex(self) -> dict[int, int]:
        return {int(v): i for i, v in enumerate(self.node_vertex)}

    def value_range(self) -> float:
        return float(self.node_value.max() - self.node_value.min())


@dataclass
class Segmentation:
    """Vertex -> pair-index partition of the domain."""

    pair_of: np.ndarray

    def region(self, pair_idx: int) -> np.ndarray:
        return np.flatnonzero(self.pair_of == pair_idx)


@dataclass
class BranchDecompositionTree:
    """Persistence pairs arranged by branch nesting; root is the global
    pair.  ``eps1`` records the saddle-merge level applied."""

    pairs: list[PersistencePair]
    parent: np.ndarray
    root: int
    eps1: float = 0.0

    @property
    def n_nodes(self) -> int:
        return len(self.pairs)

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.pairs]
        for i, p in enumerate(self.parent):
            if p >= 0:
                out[p].append(i)
        return out


def compute_merge_tree(grid: ScalarGrid, variant: str = "split", order=None):
    """Sweep one variant and return (MergeTree, pairs, Segmentation).

    ``variant="join"`` sweeps ascending and yields min-saddle pairs;
    ``"split"`` sweeps descending and yields saddle-max pairs.  Each
    vertex is assigned to the pair of the component leader it joins; a
    saddle goes to the surviving component.  The last component becomes
    the global pair with death cropped to the opposite global extremum.
    """
    if variant not in _KIND_OF_VARIANT:
        raise ContractError(f"variant must be 'join' or 'split', got {variant!r}")
    kind = _KIND_OF_VARIANT[variant]
    if order is None:
        order = sweep_order(grid, kind)
    order = np.ascontiguousarray(order, dtype=np.int64)
    pos = np.empty(grid.size, dtype=np.int64)
    pos[order] = np.arange(grid.size, dtype=np.int64)
    nbr = neighbor_matrix(grid)

    seg_ext, ev_saddle, ev_loser, ev_surv = kernels.sweep(nbr, order, pos)

    vals = grid.values
    pairs: list[PersistencePair] = []
    pair_of_ext: dict[int, int] = {}
    for s, l in zip(ev_saddle.tolist(), ev_loser.tolist()):
        lo, hi = (vals[l], vals[s]) if kind == "min" else (vals[s], vals[l])
        pair_of_ext[l] = len(pairs)
        pairs.append(PersistencePair(l, s, float(lo), float(hi), kind))
    g_ext = int(seg_ext[order[-1]])
    g_last = int(order[-1])
    lo, hi = (vals[g_ext], vals[g_last]) if kind == "min" else (vals[g_last], vals[g_ext])
    pair_of_ext[g_ext] = len(pairs)
    pairs.append(PersistencePair(g_ext, GLOBAL_SADDLE, float(lo), float(hi), kind))

    # Build the critical-point tree from the event stream.  Leaves appear
    # in sweep order; each merge event hangs the loser's current top under
    # the saddle node, created once per saddle vertex.
    extrema = [v for v in order.tolist() if seg_ext[v] == v]
    node_vertex = list(extrema)
    node_kind = [NODE_EXTREMUM] * len(extrema)
    node_ext = list(extrema)
    parent = [-1] * len(extrema)
    top = {v: i for i, v in enumerate(extrema)}
    last_saddle_vertex = None
    for s, l, w in zip(ev_saddle.tolist(), ev_loser.tolist(), ev_surv.tolist()):
        if s != last_saddle_vertex:
            node_vertex.append(s)
            node_kind.append(NODE_SADDLE)
            node_ext.append(w)
            parent.append(-1)
            last_saddle_vertex = s
            s_node = len(node_vertex) - 1
            if top[w] != s_node:
                parent[top[w]] = s_node
            top[w] = s_node
        s_node = len(node_vertex) - 1
        parent[top[l]] = s_node
        del top[l]
    t = top[g_ext]
    if node_vertex[t] == g_last:
        root = t
    else:
        node_vertex.append(g_last)
        node_kind.append(NODE_ROOT)
        node_ext.append(g_ext)
        parent.append(-1)
        root = len(node_vertex) - 1
        parent[t] = root

    node_vertex = np.array(node_vertex, dtype=np.int64)
    node_pair = np.array([pair_of_ext[e] for e in node_ext], dtype=np.int64)
    tree = MergeTree(
        variant=variant,
        node_vertex=node_vertex,
        node_value=vals[node_vertex],
        node_kind=np.array(node_kind, dtype=np.int8),
        parent=np.array(parent, dtype=np.int64),
        node_ext=np.array(node_ext, dtype=np.int64),
        node_pair=node_pair,
        root=root,
    )

    ext_to_pair = np.full(grid.size, -1, dtype=np.int64)
    for e, i in pair_of_ext.items():
        ext_to_pair[e] = i
    seg = Segmentation(pair_of=ext_to_pair[seg_ext])
    return tree, pairs, seg


def simplify(pairs, seg: Segmentation, threshold_ratio: float):
    """Drop pairs with persistence < threshold_ratio x global range and
    fold their regions into the branch they died into."""
    if not 0.0 <= threshold_ratio <= 1.0:
        raise ContractError(f"threshold_ratio must be in [0, 1], got {threshold_ratio}")
    g = next(i for i, p in enumerate(pairs) if p.is_global)
    cutoff = threshold_ratio * pairs[g].persistence
    keep = [p.is_global or p.persistence >= cutoff for p in pairs]
    if all(keep):
        return list(pairs), Segmentation(seg.pair_of.copy())

    new_index = {}
    survivors = []
    for i, p in enumerate(pairs):
        if keep[i]:
            new_index[i] = len(survivors)
            survivors.append(p)

    # A removed pair's region folds into its parent branch: the pair that
    # owns its saddle, chased until a survivor.  Parents die strictly
    # later in the sweep, so the chase terminates at the global pair.
    remap = np.empty(len(pairs), dtype=np.int64)
    cache: dict[int, int] = {}

    def chase(i: int) -> int:
        trail = []
        while not keep[i] and i not in cache:
            trail.append(i)
            i = int(seg.pair_of[pairs[i].saddle_vertex])
        j = new_index[i] if keep[i] else cache[i]
        for k in trail:
            cache[k] = j
        return j

    for i in range(len(pairs)):
        remap[i] = chase(i)
    return survivors, Segmentation(remap[seg.pair_of])


def build_bdt(tree: MergeTree, pairs) -> BranchDecompositionTree:
    """Branch decomposition: pair b is a child of the pair whose branch
    its saddle lies on.  Works on persistence-simplified subsets, where
    removed branches contract into their parents."""
    by_ext = {p.extremum_vertex: i for i, p in enumerate(pairs)}
    node_of = tree.node_of_vertex()
    parent = np.full(len(pairs), -1, dtype=np.int64)
    root = -1
    for i, p in enumerate(pairs):
        if p.is_global:
            if root >= 0:
                raise ContractError("multiple global pairs")
            root = i
    if root < 0:
        raise ContractError("no global pair in input")
    for i, p in enumerate(pairs):
        if i == root:
            continue
        if p.saddle_vertex not in node_of:
            raise ContractError(
                f"saddle vertex {p.saddle_vertex} is not a merge-tree node"
            )
        # The saddle node's owner is this pair's parent branch; if that
        # pair was simplified away, keep walking rootward.  The walk can
        # only stop at an older pair, never back at i.
        a = node_of[p.saddle_vertex]
        while True:
            j = by_ext.get(int(tree.node_ext[a]))
            if j is not None and j != i:
                parent[i] = j
                break
            a = int(tree.parent[a])
            if a < 0:
                raise ContractError("branch chase fell off the root")
    return BranchDecompositionTree(pairs=list(pairs), parent=parent, root=root)


def saddle_merge(
    bdt: BranchDecompositionTree, tree: MergeTree, eps1: float
) -> BranchDecompositionTree:
    """Collapse near-equal adjacent saddles and lift their pairs.

    Adjacent surviving saddles whose values differ by at most
    eps1 x global range group together; every pair dying inside a group
    becomes a child of the branch that owns the group's rootmost node.
    eps1 = 0 is the identity, eps1 = 1 flattens the tree to a star.
    """
    if not 0.0 <= eps1 <= 1.0:
        raise ContractError(f"eps1 must be in [0, 1], got {eps1}")
    if eps1 == 0.0:
        return replace(bdt, parent=bdt.parent.copy(), eps1=0.0)
    thr = eps1 * tree.value_range()
    pairs = bdt.pairs
    node_of = tree.node_of_vertex()

    surviving_saddle = np.zeros(tree.n_nodes, dtype=bool)
    pairs_at_node: dict[int, list[int]] = {}
    for i, p in enumerate(pairs):
        if p.is_global:
            continue
        s_node = node_of[p.saddle_vertex]
        surviving_saddle[s_node] = True
        pairs_at_node.setdefault(s_node, []).append(i)

    # Nearest surviving-saddle ancestor-or-self per node; parents are
    # created after children so ids descend rootward.
    ns = np.full(tree.n_nodes, -1, dtype=np.int64)
    for a in range(tree.n_nodes - 1, -1, -1):
        if surviving_saddle[a]:
            ns[a] = a
        elif tree.parent[a] >= 0:
            ns[a] = ns[tree.parent[a]]

    uf = {int(a): int(a) for a in np.flatnonzero(surviving_saddle)}

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    up = {}
    for a in uf:
        anc = int(ns[tree.parent[a]]) if tree.parent[a] >= 0 else -1
        up[a] = anc
        if anc >= 0 and abs(tree.node_value[a] - tree.node_value[anc]) <= thr:
            uf[find(a)] = find(anc)

    groups: dict[int, list[int]] = {}
    for a in uf:
        groups.setdefault(find(a), []).append(a)

    by_ext = {p.extremum_vertex: i for i, p in enumerate(pairs)}
    parent = bdt.parent.copy()
    for members in groups.values():
        if len(members) < 2:
            continue
        rootmost = next(m for m in members if up[m] < 0 or find(up[m]) != find(m))
        owner = _surviving_owner(tree, by_ext, rootmost)
        for m in members:
            for i in pairs_at_node[m]:
                if i != owner:
                    parent[i] = owner
    return BranchDecompositionTree(
        pairs=list(pairs), parent=parent, root=bdt.root, eps1=eps1
    )


def _surviving_owner(tree: MergeTree, by_ext: dict[int, int], node: int) -> int:
    """Pair index of the first surviving branch on the rootward walk from
    ``node`` (inclusive)."""
    a = node
    while a >= 0:
        j = by_ext.get(int(tree.node_ext[a]))
        if j is not None:
            return j
        a = int(tree.parent[a])
    raise InvariantError("owner chase fell off the root")


def export_pairs_json(bdt: BranchDecompositionTree, path) -> None:
    """JSON export: one record per pair with its BDT parent."""
    recs = []
    for i, p in enumerate(bdt.pairs):
        recs.append(
            {
                "id": i,
                "kind": p.kind,
                "birth": p.birth,
                "death": p.death,
                "extremum_vertex": p.extremum_vertex,
                "saddle_vertex": p.saddle_vertex,
                "parent_id": int(bdt.parent[i]),
            }
        )
    with open(path, "w") as fh:
        json.dump({"eps1": bdt.eps1, "pairs": recs}, fh, indent=1)
        fh.write("\n")
