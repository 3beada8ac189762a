"""High-throughput embedding distances: pairwise, best-pooled, ranked.

Every reduction runs through ``np.einsum(optimize=False)``: its inner
sum-of-products kernel is shared between the scalar path, the blocked batch
path and any thread count, so results are bit-identical however the work is
scheduled. Inputs are float32 rows; all arithmetic promotes to float64.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import EmbeddingMatrix
from .errors import ComputeError, DataError

_BLOCK_ROWS = 4096

ArrayLike = Union[EmbeddingMatrix, np.ndarray, Sequence]


class DistanceKind(Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class PooledRanking:
    """Candidate ranking by pooled distance.

    ``order`` sorts ``pooled`` ascending with ties broken by ascending
    candidate index; ``per_reference[i, j]`` is the distance of candidate
    ``i`` to reference ``j`` when retained.
    """

    order: np.ndarray
    pooled: np.ndarray
    per_reference: Optional[np.ndarray] = None


def stable_order(values: np.ndarray, descending: bool = False) -> np.ndarray:
    """Sort permutation with deterministic tie-break by original index."""
    values = np.asarray(values, dtype=np.float64)
    key = -values if descending else values
    return np.argsort(key, kind="stable")


def _rows(m: ArrayLike) -> np.ndarray:
    if isinstance(m, EmbeddingMatrix):
        return m.data
    arr = np.asarray(m, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[None, :]
    return np.ascontiguousarray(arr)


def _vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float32).reshape(-1)
    return arr.astype(np.float64)


def distance(u, v, kind: DistanceKind) -> float:
    """Distance between two vectors.

    COSINE is ``1 - u.v/(|u||v|)`` in [0, 2] and requires both norms
    positive; EUCLIDEAN is the l2 norm of ``u - v``.
    """
    a, b = _vec(u), _vec(v)
    if a.shape != b.shape:
        raise ComputeError("DIM_MISMATCH", f"vector dims differ: {a.size} vs {b.size}")
    if kind is DistanceKind.EUCLIDEAN:
        w = a - b
        return float(np.sqrt(np.einsum("j,j->", w, w, optimize=False)))
    daa = np.einsum("j,j->", a, a, optimize=False)
    dbb = np.einsum("j,j->", b, b, optimize=False)
    if not (daa > 0.0) or not (dbb > 0.0):
        raise ComputeError("ZERO_NORM", "cosine distance needs positive-norm vectors")
    dab = np.einsum("j,j->", a, b, optimize=False)
    return float(1.0 - dab / np.sqrt(daa * dbb))


def _pair_block(cands64: np.ndarray, refs64: np.ndarray, kind: DistanceKind,
                cn2: Optional[np.ndarray], rn2: Optional[np.ndarray]) -> np.ndarray:
    if kind is DistanceKind.COSINE:
        dots = np.einsum("ij,kj->ik", cands64, refs64, optimize=False)
        return 1.0 - dots / np.sqrt(cn2[:, None] * rn2[None, :])
    out = np.empty((cands64.shape[0], refs64.shape[0]), dtype=np.float64)
    for j in range(refs64.shape[0]):
        diff = cands64 - refs64[j]
        out[:, j] = np.sqrt(np.einsum("ij,ij->i", diff, diff, optimize=False))
    return out


def pairwise_distances(cands: ArrayLike, refs: ArrayLike, kind: DistanceKind,
                       threads: int = 1) -> np.ndarray:
    """Full candidates x references float64 distance matrix."""
    c32, r32 = _rows(cands), _rows(refs)
    if c32.shape[1] != r32.shape[1]:
        raise ComputeError(
            "DIM_MISMATCH", f"candidate dim {c32.shape[1]} vs reference dim {r32.shape[1]}"
        )
    if r32.shape[0] < 1:
        raise DataError("NO_REFERENCES", "need at least one reference row")
    r64 = r32.astype(np.float64)
    cn2 = rn2 = None
    if kind is DistanceKind.COSINE:
        rn2 = np.einsum("ij,ij->i", r64, r64, optimize=False)
        bad = np.flatnonzero(~(rn2 > 0.0))
        if bad.size:
            raise ComputeError("ZERO_NORM", f"reference row {int(bad[0])} has no positive norm")

    n = c32.shape[0]
    out = np.empty((n, r32.shape[0]), dtype=np.float64)

    def run(start: int) -> None:
        stop = min(start + _BLOCK_ROWS, n)
        block = c32[start:stop].astype(np.float64)
        bn2 = None
        if kind is DistanceKind.COSINE:
            bn2 = np.einsum("ij,ij->i", block, block, optimize=False)
            bad_rows = np.flatnonzero(~(bn2 > 0.0))
            if bad_rows.size:
                raise ComputeError(
                    "ZERO_NORM", f"candidate row {start + int(bad_rows[0])} has no positive norm"
                )
        out[start:stop] = _pair_block(block, r64, kind, bn2, rn2)

    starts = range(0, n, _BLOCK_ROWS)
    if threads > 1 and n > _BLOCK_ROWS:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for future in [pool.submit(run, s) for s in starts]:
                future.result()
    else:
        for s in starts:
            run(s)
    return out


def best_pool(cands: ArrayLike, refs: ArrayLike, kind: DistanceKind,
              threads: int = 1, keep_per_reference: bool = True) -> PooledRanking:
    """Rank candidates by their minimum distance over all references.

    The pooled value and the resulting order are independent of reference
    ordering, blocking and thread count.
    """
    per_ref = pairwise_distances(cands, refs, kind, threads=threads)
    pooled = per_ref.min(axis=1)
    order = stable_order(pooled)
    return PooledRanking(
        order=order,
        pooled=pooled,
        per_reference=per_ref if keep_per_reference else None,
    )


def pool_similarity_column(values) -> np.ndarray:
    """Element-wise max across references for similarity-valued columns."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] < 1:
        raise DataError("NO_REFERENCES", "need at least one reference column")
    if not np.isfinite(arr).all():
        raise ComputeError("NON_FINITE_VALUE", "similarity values must be finite")
    return arr.max(axis=1)


def top_k(ranking: PooledRanking, k: int) -> list[tuple[int, float]]:
    """First min(k, n) entries of the stable order as (index, pooled) pairs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    head = ranking.order[: min(k, ranking.order.size)]
    return [(int(i), float(ranking.pooled[i])) for i in head]
