"""Command-line surface: reproducible pipelines over the library.

Exit codes: 0 ok, 2 input error, 3 contract violation, 4 internal
invariant failure.  Every file-producing run writes a JSON provenance
sidecar echoing the resolved configuration, so any output can be
regenerated from the sidecar alone.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .compress import compress_field, decompress, load_rwc, save_rwc
from .ensemble import (
    consecutive_distance_curve,
    curves_to_csv,
    curves_to_svg,
    distance_matrix,
    embedding_to_csv,
    load_matrix_csv,
    matrix_to_csv,
    mds_embed,
    nmi,
    ari,
    persistence_curves,
    track,
)
from .errors import ContractError, InputError, InvariantError
from .fields import ScalarGrid, add_noise, load_rsf, save_rsf, synth_hills
from .matching import export_matching_json, wasserstein_bdt, wasserstein_diagrams
from .regions import GroundParams, RegionAwareBDT, build_region_aware, make_region_aware, subsample
from .topology import build_bdt, compute_merge_tree, export_pairs_json, saddle_merge, simplify

def _default_threads():
    raw = os.environ.get("RWASS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_metric_flags(p):
    p.add_argument("--method", choices=("classic", "lifting", "volume", "region"), default="region")
    p.add_argument("--rep", choices=("diagram", "mergetree"), default="mergetree")
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--background", choices=("null", "data"), default="null")
    p.add_argument("--wl", type=float, default=0.5)
    p.add_argument("--wv", type=float, default=0.2)


def _add_topo_flags(p):
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--simplify", type=float, default=0.005)


def _add_run_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_default_threads())


def _params(args):
    return GroundParams(
        q=args.q,
        lam=args.lam,
        background=args.background,
        w_l=args.wl,
        w_v=args.wv,
    )


def _member(path, args):
    grid = load_rsf(path)
    return grid, build_region_aware(
        grid,
        variant="split",
        simplify_ratio=args.simplify,
        eps1=args.eps1,
        lam=args.lam,
    )


def _provenance(args, out_path, inputs, outputs):
    cfg = {
        k: v
        for k, v in sorted(vars(args).items())
        if k != "func" and not callable(v)
    }
    doc = {
        "tool": "rwass",
        "version": __version__,
        "config": cfg,
        "inputs": list(inputs),
        "outputs": list(outputs),
    }
    with open(f"{out_path}.provenance.json", "w") as fh:
        json.dump(doc, fh, indent=2, default=str)
        fh.write("\n")


def cmd_synth(args):
    dims = tuple(int(x) for x in args.dims.split(","))
    grid = synth_hills(dims, seed=args.seed, n_hills=args.hills)
    if args.noise > 0.0:
        grid = add_noise(grid, args.noise, seed=args.seed + 1)
    save_rsf(grid, args.out)
    _provenance(args, args.out, [], [args.out])
    return 0


def cmd_diagram(args):
    grid = load_rsf(args.field)
    tree, pairs, seg = compute_merge_tree(grid, "split")
    pairs, seg = simplify(pairs, seg, args.simplify)
    bdt = build_bdt(tree, pairs)
    bdt = saddle_merge(bdt, tree, args.eps1)
    prefix = args.out
    if prefix is None:
        prefix = args.field[:-4] if args.field.endswith(".rsf") else args.field
    diag_path = f"{prefix}.diagram.json"
    seg_path = f"{prefix}.segmentation.rsf"
    export_pairs_json(bdt, diag_path)
    seg_grid = ScalarGrid(
        dims=grid.dims,
        values=seg.pair_of.astype(np.float64),
        name="segmentation",
    )
    save_rsf(seg_grid, seg_path)
    _provenance(args, diag_path, [args.field], [diag_path, seg_path])
    return 0


def cmd_dist(args):
    grid_a, ma = _member(args.a, args)
    grid_b, mb = _member(args.b, args)
    if grid_a.dims != grid_b.dims:
        raise ContractError(f"grid dims differ: {grid_a.dims} vs {grid_b.dims}")
    method = args.method
    params = _params(args)
    if args.rep == "mergetree":
        d, matching = wasserstein_bdt(ma, mb, params, method=method)
    else:
        d, matching = wasserstein_diagrams(ma.regions, mb.regions, params, method=method)
    print(f"{d:.12g}")
    if args.matching:
        export_matching_json(matching, args.matching)
        _provenance(args, args.matching, [args.a, args.b], [args.matching])
    return 0


def cmd_matrix(args):
    members = [_member(p, args)[1] for p in args.fields]
    dm = distance_matrix(
        members,
        method=args.method,
        params=_params(args),
        representation=args.rep,
        threads=args.threads,
    )
    matrix_to_csv(dm, args.out)
    _provenance(args, args.out, args.fields, [args.out, f"{args.out}.meta.json"])
    return 0


def cmd_embed(args):
    M = load_matrix_csv(args.matrix)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"matrix in {args.matrix} is not square: {M.shape}")
    if not np.array_equal(M, M.T) or np.any(np.diag(M) != 0) or np.any(M < 0):
        raise InputError(f"{args.matrix} is not a distance matrix")
    emb = mds_embed(M)
    embedding_to_csv(emb, args.out)
    _provenance(args, args.out, [args.matrix], [args.out])
    return 0


def cmd_track(args):
    members = [_member(p, args)[1] for p in args.fields]
    graph = track(
        members,
        method=args.method,
        params=_params(args),
        representation=args.rep,
        threads=args.threads,
    )
    doc = {
        "n_steps": graph.n_steps,
        "tracks": [
            {
                "id": tr.id,
                "start": tr.start,
                "end": tr.end,
                "members": [
                    {
                        "step": m.step,
                        "pair_index": m.pair_index,
                        "persistence": m.persistence,
                        "coords": list(m.coords),
                    }
                    for m in tr.members
                ],
            }
            for tr in graph.tracks
        ],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    _provenance(args, args.out, args.fields, [args.out])
    return 0


def cmd_curves(args):
    members = [_member(p, args)[1] for p in args.fields]
    graph = track(
        members,
        method=args.method,
        params=_params(args),
        representation=args.rep,
        threads=args.threads,
    )
    rows = persistence_curves(graph, topk=args.topk)
    curves_to_csv(rows, args.out)
    outputs = [args.out]
    if args.svg:
        curves_to_svg(rows, args.svg)
        outputs.append(args.svg)
    _provenance(args, args.out, args.fields, outputs)
    return 0


def _read_labels(path):
    with open(path) as fh:
        toks = fh.read().split()
    if not toks:
        raise InputError(f"no labels in {path}")
    return toks


def cmd_scores(args):
    la = _read_labels(args.labels_a)
    lb = _read_labels(args.labels_b)
    if len(la) != len(lb):
        raise ContractError(f"label counts differ: {len(la)} vs {len(lb)}")
    v_nmi = nmi(la, lb)
    v_ari = ari(la, lb)
    print(f"nmi {v_nmi:.12g}")
    print(f"ari {v_ari:.12g}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"nmi": v_nmi, "ari": v_ari}, fh, indent=2)
            fh.write("\n")
        _provenance(args, args.out, [args.labels_a, args.labels_b], [args.out])
    return 0


def cmd_compress(args):
    grid = load_rsf(args.field)
    tree, pairs, seg = compute_merge_tree(grid, "split")
    pairs, seg = simplify(pairs, seg, args.simplify)
    cf = compress_field(
        grid,
        args.tau,
        codec=args.codec,
        membership=seg.pair_of.astype(np.uint32),
    )
    save_rwc(cf, args.out)
    outputs = [args.out]
    if args.decode:
        dec = decompress(cf)
        dec.name = grid.name
        save_rsf(dec, args.decode)
        outputs.append(args.decode)
    _provenance(args, args.out, [args.field], outputs)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="rwass",
        description="Region-aware Wasserstein distances between scalar-field topologies.",
    )
    p.add_argument("--version", action="version", version=f"rwass {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a synthetic hill field")
    ps.add_argument("--dims", required=True, help="comma-separated extents, e.g. 64,64")
    ps.add_argument("--hills", type=int, default=3)
    ps.add_argument("--noise", type=float, default=0.0)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_synth)

    pd = sub.add_parser("diagram", help="persistence diagram and segmentation")
    pd.add_argument("field")
    _add_topo_flags(pd)
    pd.add_argument("--out", default=None, help="output prefix")
    pd.set_defaults(func=cmd_diagram)

    px = sub.add_parser("dist", help="distance between two fields")
    px.add_argument("a")
    px.add_argument("b")
    _add_metric_flags(px)
    _add_topo_flags(px)
    px.add_argument("--matching", default=None, help="write the matching as JSON")
    px.set_defaults(func=cmd_dist)

    pm = sub.add_parser("matrix", help="all-pairs distance matrix")
    pm.add_argument("fields", nargs="+")
    _add_metric_flags(pm)
    _add_topo_flags(pm)
    _add_run_flags(pm)
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_matrix)

    pe = sub.add_parser("embed", help="classical MDS of a distance matrix")
    pe.add_argument("matrix")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_embed)

    pt = sub.add_parser("track", help="track features over a time series")
    pt.add_argument("fields", nargs="+")
    _add_metric_flags(pt)
    _add_topo_flags(pt)
    _add_run_flags(pt)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_track)

    pc = sub.add_parser("curves", help="temporal persistence curves")
    pc.add_argument("fields", nargs="+")
    _add_metric_flags(pc)
    _add_topo_flags(pc)
    _add_run_flags(pc)
    pc.add_argument("--topk", type=int, default=None)
    pc.add_argument("--svg", default=None, help="also render an SVG chart")
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=cmd_curves)

    pl = sub.add_parser("scores", help="NMI and ARI between two labelings")
    pl.add_argument("labels_a")
    pl.add_argument("labels_b")
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_scores)

    pz = sub.add_parser("compress", help="budgeted lossy field compression")
    pz.add_argument("field")
    pz.add_argument("--tau", type=float, required=True)
    pz.add_argument("--codec", choices=("quantizer", "bspline"), default="quantizer")
    _add_topo_flags(pz)
    pz.add_argument("--decode", default=None, help="also write the decompressed field")
    pz.add_argument("--out", required=True)
    pz.set_defaults(func=cmd_compress)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"rwass: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"rwass: internal invariant violated: {exc}", file=sys.stderr)
        return 4
    except ContractError as exc:
        print(f"rwass: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"rwass: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
