"""Cluster matrices under a truncated-SVD error budget and compress each cluster into a shared basis."""

from ._kernels import BACKEND
from .bounds import (
    BlockSummary,
    BoundValue,
    plugin_estimate,
    residual_bound,
    slack,
    summarize,
    weyl_bound,
    weyl_tail_bound,
)
from .clustering import (
    Cluster,
    ErrorBudget,
    Partition,
    SortMode,
    assign_rank,
    cluster_approx,
    cluster_max_norm,
    cluster_random,
    cluster_residual,
    run_algorithm,
)
from .codec import FormatError, read_collection, read_store, write_collection, write_store
from .collection import Block, Collection
from .linalg import (
    LinalgError,
    SVDConvergenceError,
    Tolerances,
    exact_trunc_error,
    frobenius_sq,
    orthonormal_basis,
    project_residual,
    sym_eig_desc,
    thin_svd,
)
from .store import CompressedCluster, CompressedStore, compress, compression_ratio, memory_footprint, reconstruct_block
from .tracker import (
    GramTracker,
    ResidualTracker,
    gram_append,
    gram_sigma_tilde,
    gram_truncate,
    residual_append,
    residual_norm_of,
    residual_top_mu,
)

__version__ = "0.1.0"
