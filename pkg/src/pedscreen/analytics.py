"""Correlation, binning, effect-size and scaffold-diversity analytics.

These operations produce the plot-ready numbers behind the screening
analyses: Pearson correlation matrices between embedding distances and
ingested similarity columns, bin-uniform subsampling, binned mean/SD
exports, Cliff's delta effect sizes, equal-frequency scaffold-diversity
tables, scaffold-balanced subsets, and property compliance fractions.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .dataset import LibraryDataset, Mode
from .distance import DistanceKind, best_pool
from .errors import ComputeError, DataError

#: Default drug-likeness ranges (closed intervals) for compliance reports.
DRUGLIKE_RANGES: dict[str, tuple[float, float]] = {
    "mw": (200.0, 500.0),
    "tpsa": (20.0, 130.0),
    "logp": (-1.0, 6.0),
    "hbd": (0.0, 5.0),
    "hba": (0.0, 10.0),
    "qed": (0.4, 1.0),
    "sa": (1.0, 5.0),
}


def pearson(x, y) -> float:
    """Product-moment correlation with exact (compensated) float64 sums."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or xa.shape != ya.shape:
        raise ComputeError("LENGTH_MISMATCH", f"shapes {xa.shape} and {ya.shape} differ")
    if not (np.isfinite(xa).all() and np.isfinite(ya).all()):
        raise ComputeError("NON_FINITE_VALUE", "inputs must be finite")
    n = xa.size
    mx = math.fsum(xa.tolist()) / n if n else 0.0
    my = math.fsum(ya.tolist()) / n if n else 0.0
    dx = xa - mx
    dy = ya - my
    sxx = math.fsum((dx * dx).tolist())
    syy = math.fsum((dy * dy).tolist())
    if sxx == 0.0 or syy == 0.0:
        raise ComputeError("CONSTANT_COLUMN", "zero variance leaves r undefined")
    sxy = math.fsum((dx * dy).tolist())
    return sxy / math.sqrt(sxx * syy)


# --- correlation matrices ----------------------------------------------------


@dataclass(frozen=True)
class MetricSpec:
    """Names one analyzed quantity: an ingested column or an embedding distance."""

    name: str
    column: Optional[str] = None
    mode: Optional[Mode] = None
    kind: Optional[DistanceKind] = None
    reference_id: Optional[str] = None

    @classmethod
    def for_column(cls, column: str) -> "MetricSpec":
        return cls(name=f"col:{column}", column=column)

    @classmethod
    def for_ped(cls, mode: Mode, kind: DistanceKind, reference_id: str) -> "MetricSpec":
        return cls(
            name=f"ped:{mode.label}:{kind.value}:{reference_id}",
            mode=mode,
            kind=kind,
            reference_id=reference_id,
        )

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        """Parse ``col:<name>`` or ``ped:<mode>:<kind>:<reference-id>``."""
        parts = text.split(":")
        if parts[0] == "col" and len(parts) == 2 and parts[1]:
            return cls.for_column(parts[1])
        if parts[0] == "ped" and len(parts) == 4:
            try:
                mode = Mode.from_label(parts[1])
                kind = DistanceKind(parts[2])
            except (DataError, ValueError):
                raise DataError("UNRESOLVED_METRIC", f"bad metric spec {text!r}")
            return cls.for_ped(mode, kind, parts[3])
        raise DataError("UNRESOLVED_METRIC", f"bad metric spec {text!r}")


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    r: np.ndarray
    defined_mask: np.ndarray


def resolve_metric(ds: LibraryDataset, spec: MetricSpec) -> np.ndarray:
    """Metric values per dataset row; NaN marks rows without a value."""
    if spec.column is not None:
        if not ds.has_column(spec.column):
            raise DataError("UNRESOLVED_METRIC", f"dataset has no column {spec.column!r}")
        return ds.column_values(spec.column)
    matrix = ds.embeddings.get(spec.mode)
    if matrix is None:
        raise DataError("UNRESOLVED_METRIC", f"dataset has no {spec.mode.label} embedding")
    ref_row = next(
        (i for i, r in enumerate(ds.records) if r.id == spec.reference_id), None
    )
    if ref_row is None:
        raise DataError("UNRESOLVED_METRIC", f"no record with id {spec.reference_id!r}")
    out = np.full(len(ds), np.nan, dtype=np.float64)
    rows = matrix.data
    usable = np.arange(rows.shape[0])
    if spec.kind is DistanceKind.COSINE:
        v = rows.astype(np.float64)
        norms2 = np.einsum("ij,ij->i", v, v, optimize=False)
        usable = np.flatnonzero(norms2 > 0.0)  # zero-norm rows stay NaN
        if ref_row not in usable:
            raise DataError(
                "UNRESOLVED_METRIC", f"reference row {spec.reference_id!r} has zero norm"
            )
    if usable.size:
        ranking = best_pool(rows[usable], rows[ref_row][None, :], spec.kind)
        out[usable] = ranking.pooled
    return out


def correlation_from_vectors(labels: Sequence[str],
                             vectors: Sequence[np.ndarray]) -> CorrelationMatrix:
    """Pairwise Pearson over rows where both vectors are finite.

    Cells that are undefined (a constant column, or fewer than two shared
    rows) are masked instead of failing the whole matrix.
    """
    k = len(labels)
    r = np.full((k, k), np.nan, dtype=np.float64)
    mask = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(i, k):
            shared = np.isfinite(vectors[i]) & np.isfinite(vectors[j])
            if shared.sum() < 2:
                continue
            try:
                value = pearson(vectors[i][shared], vectors[j][shared])
            except ComputeError:
                continue
            r[i, j] = r[j, i] = value
            mask[i, j] = mask[j, i] = True
    return CorrelationMatrix(tuple(labels), r, mask)


def correlation_matrix(ds: LibraryDataset, metrics: Sequence[MetricSpec]) -> CorrelationMatrix:
    """Resolve every metric spec against the dataset and correlate pairwise."""
    if len(ds) < 2:
        raise DataError("TOO_FEW_ROWS", "correlation needs at least 2 rows")
    vectors = [resolve_metric(ds, spec) for spec in metrics]
    return correlation_from_vectors([m.name for m in metrics], vectors)


# --- binning ------------------------------------------------------------------


def _bin_edges(lo: float, hi: float, step: float) -> np.ndarray:
    if not (lo < hi) or step <= 0.0:
        raise ComputeError("BAD_BIN_SPEC", f"need lo < hi and step > 0, got {lo}:{hi}:{step}")
    n_bins = round((hi - lo) / step)
    if n_bins < 1 or abs(n_bins * step - (hi - lo)) > 1e-9:
        raise ComputeError("BAD_BIN_SPEC", f"step {step} does not divide [{lo}, {hi}]")
    return lo + step * np.arange(n_bins + 1)


def _bin_index(value: float, lo: float, hi: float, step: float, n_bins: int) -> Optional[int]:
    """Half-open bins [edge, edge+step), final bin closed at hi."""
    if not (lo <= value <= hi):
        return None
    if value == hi:
        return n_bins - 1
    return min(int((value - lo) // step), n_bins - 1)


def bin_uniform_sample(values, lo: float, hi: float, step: float,
                       per_bin: int, seed: int) -> list[int]:
    """Up to ``per_bin`` indices per bin, drawn without replacement.

    Bins with fewer members contribute all of them; values outside
    ``[lo, hi]`` are never sampled. Deterministic for a given seed.
    """
    if per_bin < 1:
        raise ComputeError("BAD_BIN_SPEC", "per_bin must be >= 1")
    edges = _bin_edges(lo, hi, step)
    n_bins = edges.size - 1
    members: list[list[int]] = [[] for _ in range(n_bins)]
    for i, v in enumerate(np.asarray(values, dtype=np.float64)):
        if not math.isfinite(v):
            continue
        b = _bin_index(float(v), lo, hi, step, n_bins)
        if b is not None:
            members[b].append(i)
    rng = random.Random(seed)
    chosen: list[int] = []
    for group in members:
        if len(group) <= per_bin:
            chosen.extend(group)
        else:
            chosen.extend(sorted(rng.sample(group, per_bin)))
    return chosen


@dataclass(frozen=True)
class BinnedStats:
    """Per-bin count and mean/SD of the paired variable."""

    edges: np.ndarray
    counts: tuple[int, ...]
    means: tuple[Optional[float], ...]
    sds: tuple[Optional[float], ...]


def binned_stats(xs, ys, lo: float, hi: float, step: float) -> BinnedStats:
    """Bin ``xs`` on a regular grid and summarize the paired ``ys`` per bin."""
    xa = np.asarray(xs, dtype=np.float64)
    ya = np.asarray(ys, dtype=np.float64)
    if xa.shape != ya.shape:
        raise ComputeError("LENGTH_MISMATCH", f"shapes {xa.shape} and {ya.shape} differ")
    edges = _bin_edges(lo, hi, step)
    n_bins = edges.size - 1
    buckets: list[list[float]] = [[] for _ in range(n_bins)]
    for xv, yv in zip(xa, ya):
        if not (math.isfinite(xv) and math.isfinite(yv)):
            continue
        b = _bin_index(float(xv), lo, hi, step, n_bins)
        if b is not None:
            buckets[b].append(float(yv))
    counts, means, sds = [], [], []
    for vals in buckets:
        counts.append(len(vals))
        if not vals:
            means.append(None)
            sds.append(None)
            continue
        mean = math.fsum(vals) / len(vals)
        means.append(mean)
        if len(vals) < 2:
            sds.append(None)
        else:
            sds.append(math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)))
    return BinnedStats(edges, tuple(counts), tuple(means), tuple(sds))


# --- effect size ---------------------------------------------------------------


def cliffs_delta(x, y) -> float:
    """Cliff's delta in [-1, 1]; ties contribute zero.

    Computed by sorted binary search in O((n+m) log m); integer pair counts
    make the result exactly equal to the O(n*m) definition.
    """
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if not xs or not ys:
        raise ComputeError("EMPTY_INPUT", "both samples must be non-empty")
    if not all(map(math.isfinite, xs)) or not all(map(math.isfinite, ys)):
        raise ComputeError("NON_FINITE_VALUE", "samples must be finite")
    ys_sorted = sorted(ys)
    greater = less = 0
    for v in xs:
        greater += bisect.bisect_left(ys_sorted, v)
        less += len(ys_sorted) - bisect.bisect_right(ys_sorted, v)
    return (greater - less) / (len(xs) * len(ys))


# --- scaffold diversity --------------------------------------------------------


@dataclass(frozen=True)
class QuantileDiversity:
    """Equal-frequency score bins with per-bin unique-scaffold ratios."""

    bin_count: int
    counts: tuple[int, ...]
    unique_counts: tuple[int, ...]
    ratios: tuple[Optional[float], ...]


def quantile_scaffold_diversity(scores, scaffold_keys: Sequence[str],
                                bins: int) -> QuantileDiversity:
    """Unique-scaffold ratio within each equal-frequency score bin.

    Rows are sorted by ascending score (ties by index); bin ``b`` covers
    sorted ranks ``[floor(b*N/bins), floor((b+1)*N/bins))``, so bin sizes
    differ by at most one.
    """
    sa = np.asarray(scores, dtype=np.float64)
    keys = list(scaffold_keys)
    if sa.ndim != 1 or sa.size != len(keys):
        raise ComputeError("LENGTH_MISMATCH", f"{sa.size} scores vs {len(keys)} scaffold keys")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    order = np.argsort(sa, kind="stable")
    n = sa.size
    counts, uniques, ratios = [], [], []
    for b in range(bins):
        start, stop = (b * n) // bins, ((b + 1) * n) // bins
        chunk = order[start:stop]
        counts.append(len(chunk))
        unique = len({keys[i] for i in chunk})
        uniques.append(unique)
        ratios.append(unique / len(chunk) if len(chunk) else None)
    return QuantileDiversity(bins, tuple(counts), tuple(uniques), tuple(ratios))


def scaffold_balanced_sample(ids: Sequence, scaffold_keys: Sequence[str],
                             target: int, seed: int) -> list:
    """Round-robin draw of up to ``target`` ids spread across scaffolds.

    Scaffold groups are visited in a seeded random order, taking one unseen
    member (seeded random within the group) per pass until the target is
    reached or every molecule is taken.
    """
    if len(ids) != len(scaffold_keys):
        raise ComputeError(
            "LENGTH_MISMATCH", f"{len(ids)} ids vs {len(scaffold_keys)} scaffold keys"
        )
    if target < 1:
        raise ValueError("target must be >= 1")
    groups: dict[str, list[int]] = {}
    for i, key in enumerate(scaffold_keys):
        groups.setdefault(key, []).append(i)
    rng = random.Random(seed)
    group_keys = list(groups)
    rng.shuffle(group_keys)
    for key in group_keys:
        rng.shuffle(groups[key])
    taken: list = []
    while len(taken) < target:
        progressed = False
        for key in group_keys:
            members = groups[key]
            if members:
                taken.append(ids[members.pop()])
                progressed = True
                if len(taken) == target:
                    break
        if not progressed:
            break
    return taken


# --- property tables -----------------------------------------------------------


def druglikeness_compliance(ds: LibraryDataset,
                            ranges: Optional[Mapping[str, tuple[float, float]]] = None
                            ) -> dict[str, float]:
    """Fraction of rows inside each closed property range.

    Rows missing a column (or carrying NaN) are excluded from that column's
    denominator; a column absent from every row is an error.
    """
    ranges = dict(DRUGLIKE_RANGES if ranges is None else ranges)
    out: dict[str, float] = {}
    for col, (lo, hi) in ranges.items():
        values = ds.column_values(col)
        finite = values[np.isfinite(values)]
        if finite.size == 0 and not ds.has_column(col):
            raise DataError("MISSING_COLUMN", f"dataset has no column {col!r}")
        if finite.size == 0:
            raise ComputeError("ALL_NON_FINITE", f"column {col!r} has no finite values")
        inside = int(((finite >= lo) & (finite <= hi)).sum())
        out[col] = inside / finite.size
    return out


def column_minmax(ds: LibraryDataset, columns: Sequence[str]) -> dict[str, tuple[float, float]]:
    """Exact min/max over the finite values of each column (NaN skipped)."""
    out: dict[str, tuple[float, float]] = {}
    for col in columns:
        if not ds.has_column(col):
            raise DataError("MISSING_COLUMN", f"dataset has no column {col!r}")
        values = ds.column_values(col)
        finite = values[np.isfinite(values)]
        if finite.size == 0:
            raise ComputeError("ALL_NON_FINITE", f"column {col!r} has no finite values")
        out[col] = (float(finite.min()), float(finite.max()))
    return out
