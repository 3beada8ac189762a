"""Enrichment-factor computation and per-target screening reports.

A target report carries one EF value per reference ligand (mean +- sample SD
across references) plus the best-pooled EF obtained by ranking candidates on
their minimum distance (maximum similarity) over all references. References
are excluded from the ranked candidate pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Activity, EmbeddingMatrix, LibraryDataset, Mode, Role
from .distance import DistanceKind, best_pool, pool_similarity_column, stable_order
from .errors import ComputeError, DataError


@dataclass(frozen=True)
class EfResult:
    fraction: float
    n_top: int
    n_actives_top: int
    ef: float


@dataclass(frozen=True)
class TargetReport:
    target_name: str
    method_label: str
    per_reference_ef: tuple[float, ...]
    mean_ef: float
    sd_ef: Optional[float]  # absent with a single reference
    best_pooled_ef: float

    @property
    def n_references(self) -> int:
        return len(self.per_reference_ef)


def mean_sd(values: Sequence[float]) -> tuple[float, Optional[float]]:
    """Arithmetic mean and sample standard deviation (divisor n-1).

    SD is ``None`` for a single value.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ComputeError("EMPTY_INPUT", "mean_sd needs at least one value")
    n = len(vals)
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var)


def _active_flags(activity) -> np.ndarray:
    if isinstance(activity, np.ndarray) and activity.dtype == bool:
        return activity
    return np.fromiter((a is Activity.ACTIVE for a in activity), dtype=bool)


def enrichment_factor(order: Sequence[int], activity, fraction: float) -> EfResult:
    """EF at the given fraction of the ranked library.

    ``order`` ranks the candidates best-first; ``activity`` holds one
    ACTIVE/INACTIVE label (or bool) per candidate, indexed like the values
    that produced ``order``. The top slice holds ``max(1, ceil(fraction*N))``
    entries; EF is the ratio of the active concentration in that slice to the
    whole-library concentration.
    """
    if not (0.0 < fraction <= 1.0):
        raise ComputeError("BAD_FRACTION", f"fraction must be in (0, 1], got {fraction}")
    flags = _active_flags(activity)
    n_total = flags.size
    if n_total == 0:
        raise ComputeError("EMPTY_LIBRARY", "no candidates to rank")
    order = np.asarray(order, dtype=np.int64)
    if order.size != n_total:
        raise ComputeError(
            "BAD_RANKING", f"order has {order.size} entries for {n_total} candidates"
        )
    n_actives = int(flags.sum())
    if n_actives == 0:
        raise ComputeError("NO_ACTIVES", "library has no ACTIVE candidate")
    n_top = max(1, math.ceil(fraction * n_total))
    n_actives_top = int(flags[order[:n_top]].sum())
    # Single division keeps the float result equal to the exact rational.
    ef = (n_actives_top * n_total) / (n_top * n_actives)
    return EfResult(fraction=fraction, n_top=n_top, n_actives_top=n_actives_top, ef=ef)


def _similarity_matrix(ds: LibraryDataset, column: str,
                       cand_idx: list[int], ref_idx: list[int]) -> np.ndarray:
    """Candidates x references similarity values for an ingested column.

    Per-reference values live in columns named ``<column>@<reference-id>``;
    a bare ``<column>`` is accepted as an already-pooled single column.
    """
    ref_cols = [f"{column}@{ds.records[i].id}" for i in ref_idx]
    if any(ds.has_column(c) for c in ref_cols):
        missing = [c for c in ref_cols if not ds.has_column(c)]
        if missing:
            raise DataError(
                "MISSING_SIMILARITY_COLUMN", f"no values for reference column {missing[0]!r}"
            )
        mat = np.column_stack([ds.column_values(c)[cand_idx] for c in ref_cols])
    elif ds.has_column(column):
        mat = ds.column_values(column)[cand_idx][:, None]
    else:
        raise DataError("MISSING_SIMILARITY_COLUMN", f"dataset has no column {column!r}")
    if not np.isfinite(mat).all():
        raise ComputeError(
            "NON_FINITE_VALUE", f"column {column!r} has missing or non-finite candidate values"
        )
    return mat


def screen_target(ds: LibraryDataset, metric: Union[Mode, str], kind: DistanceKind,
                  fraction: float = 0.01, threads: int = 1) -> TargetReport:
    """Per-reference and best-pooled EF for one target.

    ``metric`` is either an embedding mode (ranked by ascending distance) or
    the name of an ingested similarity column (ranked descending, pooled by
    maximum).
    """
    ref_idx = ds.reference_indices()
    cand_idx = ds.candidate_indices()
    if not ref_idx:
        raise DataError("NO_REFERENCE", "screening needs at least one REFERENCE record")
    missing = [i for i in cand_idx if ds.records[i].activity is None]
    if missing:
        raise DataError(
            "MISSING_ACTIVITY", f"candidate {ds.records[missing[0]].id!r} has no activity label"
        )
    flags = np.fromiter(
        (ds.records[i].activity is Activity.ACTIVE for i in cand_idx), dtype=bool
    )

    if isinstance(metric, Mode):
        matrix = ds.embeddings.get(metric)
        if matrix is None:
            raise DataError("MISSING_EMBEDDING", f"dataset has no {metric.label} embedding")
        cands = matrix.data[cand_idx]
        refs = matrix.data[ref_idx]
        ranking = best_pool(cands, refs, kind, threads=threads)
        per_ref_values = ranking.per_reference
        descending = False
        pooled_order = ranking.order
        label = f"{metric.label}:{kind.value}"
    else:
        per_ref_values = _similarity_matrix(ds, metric, cand_idx, ref_idx)
        descending = True
        pooled = pool_similarity_column(per_ref_values)
        pooled_order = stable_order(pooled, descending=True)
        label = f"col:{metric}"

    per_reference_ef = []
    for j in range(per_ref_values.shape[1]):
        order_j = stable_order(per_ref_values[:, j], descending=descending)
        per_reference_ef.append(enrichment_factor(order_j, flags, fraction).ef)
    best_pooled_ef = enrichment_factor(pooled_order, flags, fraction).ef
    mean, sd = mean_sd(per_reference_ef)
    return TargetReport(
        target_name=ds.target_name,
        method_label=label,
        per_reference_ef=tuple(per_reference_ef),
        mean_ef=mean,
        sd_ef=sd,
        best_pooled_ef=best_pooled_ef,
    )


REPORT_HEADER = ("target", "method", "n_refs", "mean_ef", "sd_ef", "best_pooled_ef")


def report_rows(reports: Sequence[TargetReport]) -> list[list[str]]:
    """Serialize reports for the TSV writer; floats as shortest round-trip."""
    rows = []
    for r in reports:
        rows.append(
            [
                r.target_name,
                r.method_label,
                str(r.n_references),
                repr(r.mean_ef),
                "NA" if r.sd_ef is None else repr(r.sd_ef),
                repr(r.best_pooled_ef),
            ]
        )
    return rows


PER_REFERENCE_HEADER = ("target", "method", "reference_index", "ef")


def per_reference_rows(reports: Sequence[TargetReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        for j, ef in enumerate(r.per_reference_ef):
            rows.append([r.target_name, r.method_label, str(j), repr(ef)])
    return rows
