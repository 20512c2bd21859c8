"""Region-aware Wasserstein distances between scalar-field topologies.

The metric compares persistence diagrams or branch decomposition trees
whose pairs carry the data region that created them, so features with
identical birth/death but different geometry stay distinguishable.
"""

from ._backend import COMPILED, backend_name
from .compress import (
    CompressedField,
    CompressionBudget,
    bspline_dims,
    bspline_eval,
    bspline_fit,
    budget,
    compress_field,
    decompress,
    dequantize,
    load_rwc,
    neural_param_count,
    neural_width,
    quantize,
    replace_region_values,
    save_rwc,
    zfp_rate,
)
from .ensemble import (
    DistanceMatrix,
    Embedding,
    TrackingGraph,
    ari,
    consecutive_distance_curve,
    distance_matrix,
    mds_embed,
    nmi,
    persistence_curves,
    track,
)
from .errors import ContractError, InputError, InvariantError, RwassError
from .fields import (
    ScalarGrid,
    add_noise,
    load_csv,
    load_rsf,
    neighbors,
    save_rsf,
    synth_hills,
)
from .matching import (
    Matching,
    combine_kinds,
    field_distance,
    solve_assignment,
    wasserstein_bdt,
    wasserstein_diagrams,
)
from .regions import (
    GroundParams,
    RegionAwareBDT,
    RegionAwarePair,
    build_region_aware,
    ground_distance,
    make_region_aware,
    projection_cost,
    stride_for,
    subsample,
)
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

__version__ = "0.1.0"

__all__ = [
    "COMPILED",
    "BranchDecompositionTree",
    "CompressedField",
    "CompressionBudget",
    "ContractError",
    "DistanceMatrix",
    "Embedding",
    "GroundParams",
    "InputError",
    "InvariantError",
    "Matching",
    "MergeTree",
    "PersistencePair",
    "RegionAwareBDT",
    "RegionAwarePair",
    "RwassError",
    "ScalarGrid",
    "Segmentation",
    "TrackingGraph",
    "add_noise",
    "ari",
    "backend_name",
    "bspline_dims",
    "bspline_eval",
    "bspline_fit",
    "budget",
    "build_bdt",
    "build_region_aware",
    "combine_kinds",
    "compress_field",
    "compute_merge_tree",
    "consecutive_distance_curve",
    "decompress",
    "dequantize",
    "distance_matrix",
    "field_distance",
    "ground_distance",
    "load_csv",
    "load_rsf",
    "load_rwc",
    "make_region_aware",
    "mds_embed",
    "neighbors",
    "neural_param_count",
    "neural_width",
    "nmi",
    "persistence_curves",
    "projection_cost",
    "quantize",
    "replace_region_values",
    "save_rsf",
    "save_rwc",
    "simplify",
    "saddle_merge",
    "solve_assignment",
    "stride_for",
    "subsample",
    "synth_hills",
    "track",
    "wasserstein_bdt",
    "wasserstein_diagrams",
    "zfp_rate",
]
