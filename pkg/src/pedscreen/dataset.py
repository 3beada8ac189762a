"""Core domain types: molecule records, embedding matrices, joined datasets.

A :class:`LibraryDataset` joins a metadata table with one or more embedding
matrices by row order (row ``i`` of every matrix describes ``records[i]``).
Datasets are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError

CONCAT_NORM_TOL = 1e-4


class Role(Enum):
    REFERENCE = "REFERENCE"
    CANDIDATE = "CANDIDATE"


class Activity(Enum):
    ACTIVE = "ACTIVE"
    INACTIVE = "INACTIVE"


class Mode(IntEnum):
    """Representation mode of an embedding matrix; values are the wire tags."""

    RAW = 0
    MODE_2D = 1
    MODE_3D = 2
    CONCAT = 3

    @property
    def label(self) -> str:
        return _MODE_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Mode":
        try:
            return _LABEL_MODES[label.lower()]
        except KeyError:
            raise DataError("UNKNOWN_MODE", f"unknown embedding mode {label!r}")


_MODE_LABELS = {Mode.RAW: "raw", Mode.MODE_2D: "2d", Mode.MODE_3D: "3d", Mode.CONCAT: "concat"}
_LABEL_MODES = {v: k for k, v in _MODE_LABELS.items()}


@dataclass(frozen=True)
class MoleculeRecord:
    """One library molecule: identity, role, optional label and columns.

    ``columns`` holds external float values ingested with the metadata table
    (similarities, properties, scores); names are free-form lowercase strings.
    """

    id: str
    role: Role
    smiles: Optional[str] = None
    activity: Optional[Activity] = None
    columns: Mapping[str, float] = field(default_factory=dict)
    scaffold_key: Optional[str] = None


class EmbeddingMatrix:
    """Dense row-major float32 matrix, one row per molecule, with a mode tag."""

    def __init__(self, mode: Mode, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError("BAD_SHAPE", f"embedding data must be 2-D, got ndim={arr.ndim}")
        if arr.shape[1] < 1:
            raise DataError("BAD_SHAPE", "embedding dimension must be positive")
        self.mode = Mode(mode)
        self.data = np.ascontiguousarray(arr)
        self.data.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data.view(np.uint32), other.data.view(np.uint32)))
        )

    def __repr__(self) -> str:
        return f"EmbeddingMatrix(mode={self.mode.label}, rows={self.rows}, dim={self.dim})"


@dataclass(frozen=True)
class LibraryDataset:
    """Joined view of a metadata table and its embedding matrices."""

    records: tuple[MoleculeRecord, ...]
    embeddings: Mapping[Mode, EmbeddingMatrix]
    target_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "embeddings", dict(self.embeddings))

    def __len__(self) -> int:
        return len(self.records)

    def reference_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.records) if r.role is Role.REFERENCE]

    def candidate_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.records) if r.role is Role.CANDIDATE]

    def column_values(self, name: str) -> np.ndarray:
        """Column as float64 with NaN where a record is missing the column."""
        out = np.full(len(self.records), np.nan, dtype=np.float64)
        for i, rec in enumerate(self.records):
            v = rec.columns.get(name)
            if v is not None:
                out[i] = v
        return out

    def has_column(self, name: str) -> bool:
        return any(name in r.columns for r in self.records)

    def subset(self, indices: Sequence[int]) -> "LibraryDataset":
        """New dataset restricted to the given row indices (kept in order)."""
        idx = list(indices)
        records = tuple(self.records[i] for i in idx)
        embeddings = {
            mode: EmbeddingMatrix(mode, m.data[idx]) for mode, m in self.embeddings.items()
        }
        return LibraryDataset(records=records, embeddings=embeddings, target_name=self.target_name)


# --- validation -------------------------------------------------------------

#: Issue codes that do not block correlation-only workflows.
SCREENING_ONLY_CODES = frozenset({"NO_REFERENCE", "MISSING_ACTIVITY"})


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    record_index: Optional[int] = None
    column: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def structural_issues(self) -> list[ValidationIssue]:
        """Issues that block every workflow, not just screening."""
        return [i for i in self.issues if i.code not in SCREENING_ONLY_CODES]


def validate_dataset(ds: LibraryDataset) -> ValidationReport:
    """Check every dataset invariant; problems become report entries.

    Never raises: a well-formed report with issues is the result for broken
    datasets. A dataset with an empty report is safe for all downstream
    operations (distance engine, screening, analytics).
    """
    issues: list[ValidationIssue] = []
    seen: set[str] = set()
    for i, rec in enumerate(ds.records):
        if not rec.id:
            issues.append(ValidationIssue("EMPTY_ID", f"record {i} has an empty id", i))
        elif rec.id in seen:
            issues.append(ValidationIssue("DUPLICATE_ID", f"duplicate id {rec.id!r}", i))
        else:
            seen.add(rec.id)
        if rec.role is Role.CANDIDATE and rec.activity is None:
            issues.append(
                ValidationIssue(
                    "MISSING_ACTIVITY", f"candidate {rec.id!r} has no activity label", i
                )
            )

    n = len(ds.records)
    for mode, matrix in ds.embeddings.items():
        if matrix.rows != n:
            issues.append(
                ValidationIssue(
                    "ROW_COUNT_MISMATCH",
                    f"{mode.label} matrix has {matrix.rows} rows, dataset has {n} records",
                )
            )
        elif mode is Mode.CONCAT and matrix.rows:
            v = matrix.data.astype(np.float64)
            norms = np.sqrt(np.einsum("ij,ij->i", v, v, optimize=False))
            bad = np.flatnonzero(np.abs(norms - math.sqrt(2.0)) > CONCAT_NORM_TOL)
            for row in bad:
                issues.append(
                    ValidationIssue(
                        "BAD_CONCAT_NORM",
                        f"concat row {row} has norm {norms[row]:.6g}, expected sqrt(2)",
                        int(row),
                    )
                )

    if not any(r.role is Role.REFERENCE for r in ds.records):
        issues.append(ValidationIssue("NO_REFERENCE", "dataset has no REFERENCE record"))

    return ValidationReport(tuple(issues))
