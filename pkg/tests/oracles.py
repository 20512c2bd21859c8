"""Independent reference implementations used to validate the fast paths.

Everything here is deliberately brute force: connectivity is recomputed
by BFS at every sweep step, matchings are enumerated exhaustively.  None
of it shares code with the library beyond numpy.
"""

from __future__ import annotations

import itertools
import math
from collections import deque


def oracle_neighbors(dims):
    """Adjacency lists for the Freudenthal triangulation, built from
    scratch with plain loops."""
    ndim = len(dims)
    pos = [off for off in itertools.product((0, 1), repeat=ndim) if any(off)]
    offsets = pos + [tuple(-c for c in off) for off in pos]
    strides = [1] * ndim
    for ax in range(ndim - 2, -1, -1):
        strides[ax] = strides[ax + 1] * dims[ax + 1]
    n = 1
    for e in dims:
        n *= e
    adj = [[] for _ in range(n)]
    for v in range(n):
        coords = []
        rem = v
        for ax in range(ndim):
            coords.append(rem // strides[ax])
            rem %= strides[ax]
        for off in offsets:
            ok = True
            w = 0
            for ax in range(ndim):
                c = coords[ax] + off[ax]
                if c < 0 or c >= dims[ax]:
                    ok = False
                    break
                w += c * strides[ax]
            if ok:
                adj[v].append(w)
    return adj


def level_set_sweep(dims, values, kind):
    """Persistence pairs and segmentation via per-step BFS connectivity.

    Vertices enter the sub- or superlevel set one at a time in the total
    order (value, id) ascending for ``kind="min"``, the exact reverse for
    ``kind="max"``.  After each insertion the inserted set's connectivity
    is rebuilt by BFS from the new vertex; component identity is carried
    by "creators" (vertices that opened a new component).  When k >= 2
    live creators land in one component, the sweep-earliest one survives
    and every other dies at the new vertex (elder rule).

    Returns (pairs, seg) where pairs is a list of
    ``(extremum_vertex, saddle_vertex, birth_value, death_value)`` with
    ``saddle_vertex = -1`` for the global pair, and seg maps every vertex
    to the extremum vertex of the pair that owns it.
    """
    n = len(values)
    adj = oracle_neighbors(dims)
    order = sorted(range(n), key=lambda v: (values[v], v))
    if kind == "max":
        order = order[::-1]
    pos = {v: i for i, v in enumerate(order)}

    inserted = [False] * n
    alive = set()  # live creators, one per current component
    pairs = []
    seg_ext = [-1] * n

    for v in order:
        inserted[v] = True
        # BFS over the inserted set from v gives v's whole component.
        region = {v}
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if inserted[w] and w not in region:
                    region.add(w)
                    queue.append(w)
        joined = [c for c in region if c in alive]
        if not joined:
            alive.add(v)
            seg_ext[v] = v
        else:
            survivor = min(joined, key=lambda c: pos[c])
            for c in joined:
                if c is not survivor and c != survivor:
                    alive.discard(c)
                    pairs.append((c, v, values[c], values[v]))
            seg_ext[v] = survivor

    (global_ext,) = alive
    last = order[-1]
    pairs.append((global_ext, -1, values[global_ext], values[last]))
    pair_of = {ext: (ext, sad, b, d) for ext, sad, b, d in pairs}
    seg = [pair_of[seg_ext[v]] for v in range(n)]
    return pairs, seg


def _matchings(na, nb):
    """Yield all injective partial matchings as lists m of length na with
    m[i] in range(nb) or None."""

    def rec(i, used):
        if i == na:
            yield []
            return
        for rest in rec(i + 1, used):
            yield [None] + rest
        for j in range(nb):
            if j not in used:
                for rest in rec(i + 1, used | {j}):
                    yield [j] + rest

    yield from rec(0, frozenset())


def classical_wasserstein(diagA, diagB, q):
    """Exhaustive q-Wasserstein between diagrams of (birth, death) pairs.

    Every pair may match any opposite pair or slide to its own diagonal;
    cost terms are |db|^q + |dd|^q for a match and 2 (pers/2)^q for a
    diagonal deletion.  Intended for diagrams of at most ~6 pairs.
    """

    def proj(p):
        half = abs(p[1] - p[0]) / 2.0
        return 2.0 * half**q

    best = math.inf
    for m in _matchings(len(diagA), len(diagB)):
        used = set(j for j in m if j is not None)
        terms = []
        for i, j in enumerate(m):
            if j is None:
                terms.append(proj(diagA[i]))
            else:
                a, b = diagA[i], diagB[j]
                terms.append(abs(a[0] - b[0]) ** q + abs(a[1] - b[1]) ** q)
        for j in range(len(diagB)):
            if j not in used:
                terms.append(proj(diagB[j]))
        best = min(best, math.fsum(terms))
    return best ** (1.0 / q)


def min_cost_assignment(cost):
    """Minimum-cost perfect matching by enumerating permutations (n <= 8)."""
    n = len(cost)
    best = math.inf
    best_perm = None
    for perm in itertools.permutations(range(n)):
        total = math.fsum(cost[i][perm[i]] for i in range(n))
        if total < best - 1e-15:
            best = total
            best_perm = perm
    return best, best_perm


def rooted_partial_isomorphism(
    children_a, children_b, root_a, root_b, pair_pow, del_a, del_b
):
    """Exhaustive tree edit / matching cost over rooted unordered trees.

    A node of one tree may map to a node of the other only if their
    parents map to each other (roots map to roots); unmatched nodes drop
    their whole subtree at per-node deletion cost.  The top level also
    admits the empty mapping, deleting both trees outright.

    ``pair_pow(a, b)`` is the powered match cost, ``del_a(a)``/``del_b(b)``
    the powered deletion cost of a single node.
    """

    def sub_del(children, del_one, node):
        return del_one(node) + math.fsum(
            sub_del(children, del_one, c) for c in children[node]
        )

    memo = {}

    def match(a, b):
        key = (a, b)
        if key in memo:
            return memo[key]
        ca, cb = children_a[a], children_b[b]
        best = math.inf
        for m in _matchings(len(ca), len(cb)):
            used = set(j for j in m if j is not None)
            terms = [pair_pow(a, b)]
            for i, j in enumerate(m):
                if j is None:
                    terms.append(sub_del(children_a, del_a, ca[i]))
                else:
                    terms.append(match(ca[i], cb[j]))
            for j in range(len(cb)):
                if j not in used:
                    terms.append(sub_del(children_b, del_b, cb[j]))
            best = min(best, math.fsum(terms))
        memo[key] = best
        return best

    drop_all = sub_del(children_a, del_a, root_a) + sub_del(children_b, del_b, root_b)
    return min(match(root_a, root_b), drop_all)
