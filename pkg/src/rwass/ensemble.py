"""Ensemble products built on pairwise distances.

Distance matrices (parallel over unordered index pairs), classical MDS,
partition agreement scores, consecutive-step feature tracking, and the
curves derived from a tracking graph.  All parallel paths aggregate by
index, so results are bitwise identical for any worker count.
"""

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .errors import ContractError
from .matching import wasserstein_bdt, wasserstein_diagrams
from .regions import METHODS, GroundParams

REPRESENTATIONS = ("diagram", "mergetree")


@dataclass
class DistanceMatrix:
    n: int
    entries: np.ndarray
    method: str
    representation: str
    params: GroundParams
    eps1: float = 0.0

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.shape != (self.n, self.n):
            raise ContractError(
                f"entries shape {self.entries.shape} does not match n = {self.n}"
            )
        if not np.array_equal(self.entries, self.entries.T):
            raise ContractError("distance matrix must be exactly symmetric")
        if np.any(np.diag(self.entries) != 0.0):
            raise ContractError("distance matrix diagonal must be zero")
        if np.any(self.entries < 0.0):
            raise ContractError("distances must be non-negative")


@dataclass
class Embedding:
    coords: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class TrackMember:
    step: int
    pair_index: int
    persistence: float
    coords: tuple


@dataclass
class Track:
    id: int
    members: list

    @property
    def start(self):
        return self.members[0].step

    @property
    def end(self):
        return self.members[-1].step

    @property
    def max_persistence(self):
        return max(m.persistence for m in self.members)


@dataclass
class TrackingGraph:
    n_steps: int
    tracks: list
    matchings: list


def _single_distance(a, b, method, representation, params):
    if representation == "mergetree":
        return wasserstein_bdt(a, b, params, method=method)
    return wasserstein_diagrams(a.regions, b.regions, params, method=method)


def _check_members(members):
    if not members:
        raise ContractError("need at least one member")
    first = members[0]
    for i, m in enumerate(members[1:], start=1):
        if m.regions and first.regions:
            if m.regions[0].grid.dims != first.regions[0].grid.dims:
                raise ContractError(f"member {i} has different grid dims")
        if m.kind != first.kind:
            raise ContractError(f"member {i} has a different sweep direction")
        if m.eps1 != first.eps1:
            raise ContractError(f"member {i} was merged with a different eps1")
        if m.lam != first.lam:
            raise ContractError(f"member {i} was subsampled with a different lam")
        if m.simplify_ratio != first.simplify_ratio:
            raise ContractError(f"member {i} was simplified with a different threshold")


# worker-side payload, set once per process via the pool initializer
_WORK = None


def _init_worker(payload):
    global _WORK
    _WORK = payload


def _matrix_entry(ij):
    i, j = ij
    members, method, representation, params = _WORK
    d, _ = _single_distance(members[i], members[j], method, representation, params)
    return i, j, d


def _step_entry(t):
    members, method, representation, params = _WORK
    d, m = _single_distance(members[t], members[t + 1], method, representation, params)
    return t, d, m


def _run_parallel(worker, jobs, payload, threads):
    if threads <= 1 or len(jobs) <= 1:
        _init_worker(payload)
        try:
            return [worker(j) for j in jobs]
        finally:
            _init_worker(None)
    ctx = get_context("fork")
    chunk = max(1, len(jobs) // (threads * 4))
    with ProcessPoolExecutor(
        max_workers=threads,
        mp_context=ctx,
        initializer=_init_worker,
        initargs=(payload,),
    ) as pool:
        return list(pool.map(worker, jobs, chunksize=chunk))


def distance_matrix(
    members, method="region", params=None, representation="mergetree", threads=1
):
    """All-pairs distances; entries are independent of evaluation order."""
    if method not in METHODS:
        raise ContractError(f"unknown method {method!r}")
    if representation not in REPRESENTATIONS:
        raise ContractError(f"unknown representation {representation!r}")
    _check_members(members)
    if params is None:
        params = GroundParams(lam=members[0].lam)
    n = len(members)
    jobs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    payload = (members, method, representation, params)
    out = np.zeros((n, n), dtype=np.float64)
    for i, j, d in _run_parallel(_matrix_entry, jobs, payload, threads):
        out[i, j] = d
        out[j, i] = d
    return DistanceMatrix(
        n=n,
        entries=out,
        method=method,
        representation=representation,
        params=params,
        eps1=members[0].eps1,
    )


def mds_embed(matrix, dim=2):
    """Classical (Torgerson) MDS of a distance matrix.

    Double-centers the squared distances, takes the top eigenpairs of the
    dense symmetric solve, and scales eigenvectors by the root eigenvalue.
    Negative eigenvalues clamp to zero.  Sign convention: in each output
    column the largest-magnitude coordinate is positive.
    """
    D = matrix.entries if isinstance(matrix, DistanceMatrix) else np.asarray(matrix)
    n = D.shape[0]
    if n < dim + 1:
        warnings.warn(f"embedding {n} members in {dim}D is degenerate; zero-padding")
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ (D * D) @ J
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    coords = np.zeros((n, dim), dtype=np.float64)
    for c in range(min(dim, n)):
        lam = max(evals[c], 0.0)
        col = evecs[:, c] * math.sqrt(lam)
        col = col - col.mean()
        if col.size and col[np.argmax(np.abs(col))] < 0.0:
            col = -col
        coords[:, c] = col
    return Embedding(coords=coords, eigenvalues=evals)


def _contingency(labels_a, labels_b):
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError("label vectors must be 1D and the same length")
    if a.size == 0:
        raise ContractError("label vectors must be non-empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def nmi(labels_a, labels_b):
    """Normalized mutual information, 2 I / (H_a + H_b), natural log.

    Two zero-entropy partitions agree trivially and score 1.  Every log
    argument is a ratio of exact integer products, so identical
    partitions score exactly 1 and independent ones exactly 0.
    """
    table = _contingency(labels_a, labels_b)
    n = int(table.sum())
    na = [int(c) for c in table.sum(axis=1)]
    nb = [int(c) for c in table.sum(axis=0)]
    info = math.fsum(
        int(nij) / n * math.log(int(nij) * n / (na[i] * nb[j]))
        for (i, j), nij in np.ndenumerate(table)
        if nij
    )
    ha = math.fsum(c / n * math.log(n / c) for c in na if c)
    hb = math.fsum(c / n * math.log(n / c) for c in nb if c)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    return 2.0 * info / (ha + hb)


def ari(labels_a, labels_b):
    """Adjusted Rand index against the chance-agreement baseline."""
    table = _contingency(labels_a, labels_b)
    n = int(table.sum())

    def comb2(x):
        return x * (x - 1) / 2.0

    index = float(comb2(table).sum())
    sum_a = float(comb2(table.sum(axis=1)).sum())
    sum_b = float(comb2(table.sum(axis=0)).sum())
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def track(sequence, method="region", params=None, representation="mergetree", threads=1):
    """Chain consecutive matchings into feature tracks.

    Matched edges extend a track; a diagonal match ends or starts one.
    Track ids follow creation order (step, then pair index), so identical
    inputs give identical ids regardless of the worker count.
    """
    if len(sequence) < 2:
        raise ContractError("tracking needs at least two time steps")
    _check_members(sequence)
    if params is None:
        params = GroundParams(lam=sequence[0].lam)
    jobs = list(range(len(sequence) - 1))
    payload = (sequence, method, representation, params)
    results = _run_parallel(_step_entry, jobs, payload, threads)
    matchings = [m for _, _, m in sorted(results, key=lambda r: r[0])]

    def member(step, idx):
        pair = sequence[step].pairs[idx]
        coords = sequence[step].regions[idx].extremum_coord
        return TrackMember(
            step=step, pair_index=idx, persistence=pair.persistence, coords=coords
        )

    tracks = []
    active = {}
    for idx in range(len(sequence[0].pairs)):
        tracks.append(Track(id=len(tracks), members=[member(0, idx)]))
        active[idx] = tracks[-1]
    for t, matching in enumerate(matchings):
        nxt = {}
        for src, dst, _ in sorted(
            matching.edges, key=lambda e: (e[0] is None, e[0] or 0, e[1] or 0)
        ):
            if src is not None and dst is not None:
                tr = active[src]
                tr.members.append(member(t + 1, dst))
                nxt[dst] = tr
            elif src is None:
                tracks.append(Track(id=len(tracks), members=[member(t + 1, dst)]))
                nxt[dst] = tracks[-1]
        active = nxt
    return TrackingGraph(n_steps=len(sequence), tracks=tracks, matchings=matchings)


def persistence_curves(graph, topk=None):
    """Rows (track_id, step, persistence, coords) for plotting.

    topk keeps only the tracks with the highest peak persistence.
    """
    tracks = graph.tracks
    if topk is not None:
        ranked = sorted(tracks, key=lambda tr: (-tr.max_persistence, tr.id))
        keep = {tr.id for tr in ranked[:topk]}
        tracks = [tr for tr in tracks if tr.id in keep]
    rows = []
    for tr in sorted(tracks, key=lambda tr: tr.id):
        for m in tr.members:
            rows.append((tr.id, m.step, m.persistence, m.coords))
    return rows


def consecutive_distance_curve(
    sequence, method="region", params=None, representation="mergetree", threads=1
):
    """One distance per consecutive pair of time steps."""
    if len(sequence) < 2:
        raise ContractError("need at least two time steps")
    _check_members(sequence)
    if params is None:
        params = GroundParams(lam=sequence[0].lam)
    jobs = list(range(len(sequence) - 1))
    payload = (sequence, method, representation, params)
    results = _run_parallel(_step_entry, jobs, payload, threads)
    return [d for _, d, _ in sorted(results, key=lambda r: r[0])]


def matrix_to_csv(matrix, path):
    """n x n CSV plus a '<path>.meta.json' sidecar echoing the params."""
    np.savetxt(path, matrix.entries, delimiter=",", fmt="%.17g")
    meta = {
        "method": matrix.method,
        "representation": matrix.representation,
        "q": matrix.params.q,
        "lambda": matrix.params.lam,
        "eps1": matrix.eps1,
        "background": matrix.params.background,
        "w_l": matrix.params.w_l,
        "w_v": matrix.params.w_v,
    }
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def curves_to_csv(rows, path):
    """Columns track_id, step, persistence, x, y, z (missing axes as 0)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["track_id", "step", "persistence", "x", "y", "z"])
        for tid, step, pers, coords in rows:
            xyz = tuple(coords) + (0,) * (3 - len(coords))
            w.writerow([tid, step, f"{pers:.17g}", *xyz])


def embedding_to_csv(embedding, path):
    """Columns member, u, v."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["member", "u", "v"])
        for i, (u, v) in enumerate(embedding.coords[:, :2]):
            w.writerow([i, f"{u:.17g}", f"{v:.17g}"])


_SVG_COLORS = (
    "#4363d8", "#e6194b", "#3cb44b", "#ffb000", "#911eb4",
    "#4699c9", "#f58231", "#808000", "#000075", "#9a6324",
)


def curves_to_svg(rows, path, width=640, height=360):
    """Self-contained SVG line chart of the persistence curves."""
    pad = 40
    by_track = {}
    for tid, step, pers, _ in rows:
        by_track.setdefault(tid, []).append((step, pers))
    steps = [s for pts in by_track.values() for s, _ in pts]
    pers = [p for pts in by_track.values() for _, p in pts]
    smin, smax = (min(steps), max(steps)) if steps else (0, 1)
    pmin, pmax = (min(pers), max(pers)) if pers else (0.0, 1.0)
    sspan = max(smax - smin, 1)
    pspan = max(pmax - pmin, 1e-12)

    def sx(s):
        return pad + (s - smin) / sspan * (width - 2 * pad)

    def sy(p):
        return height - pad - (p - pmin) / pspan * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        'stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for tid in sorted(by_track):
        pts = sorted(by_track[tid])
        coords = " ".join(f"{sx(s):.2f},{sy(p):.2f}" for s, p in pts)
        color = _SVG_COLORS[tid % len(_SVG_COLORS)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{coords}"/>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
