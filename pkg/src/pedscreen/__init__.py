"""Embedding-distance screening and analytics for molecular libraries."""

from .dataset import (
    Activity,
    EmbeddingMatrix,
    LibraryDataset,
    Mode,
    MoleculeRecord,
    Role,
    ValidationIssue,
    ValidationReport,
    validate_dataset,
)
from .distance import (
    DistanceKind,
    PooledRanking,
    best_pool,
    distance,
    pairwise_distances,
    pool_similarity_column,
    stable_order,
    top_k,
)
from .errors import (
    ComputeError,
    DataError,
    FormatError,
    PedScreenError,
    SmilesError,
    UsageError,
)
from .io import make_concat, read_emb1, read_metadata, unit_rows, write_emb1
from .reward import (
    PRESETS,
    CompositeSpec,
    SigmoidParams,
    StreamConfig,
    composite_score,
    reverse_sigmoid,
    score_batch,
    serve_stream,
)
from .scaffold import (
    ACYCLIC_KEY,
    canonical_key,
    murcko_scaffold,
    scaffold_key_or_sentinel,
    scaffold_of,
)
from .screening import EfResult, TargetReport, enrichment_factor, mean_sd, screen_target
from .smiles import Atom, Bond, BondOrder, MolGraph, parse_smiles, write_graph

__version__ = "0.1.0"
