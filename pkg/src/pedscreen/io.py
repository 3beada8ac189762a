"""Readers and writers for the EMB1 embedding container and metadata tables.

EMB1 layout (all integers little-endian):

====== ====== ===========================================
offset size   field
====== ====== ===========================================
0      4      magic, ASCII ``EMB1``
4      2      version, u16, must be 1
6      2      mode tag, u16: 0=raw 1=2d 2=3d 3=concat
8      8      row count, u64
16     4      dimension, u32
20     4      reserved, must be zero
24     ...    payload: rows*dim float32 values, row-major
====== ====== ===========================================

The payload is stored bit-exactly: NaN and infinities round-trip verbatim.
Metadata is a UTF-8 tab-separated table with a mandatory header row; ``\\n``
line endings are expected, an optional trailing ``\\r`` is accepted.
"""

from __future__ import annotations

import math
import os
import struct
from typing import Iterable, Optional

import numpy as np

from .dataset import Activity, EmbeddingMatrix, Mode, MoleculeRecord, Role
from .errors import ComputeError, DataError, FormatError

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHHQI4s")
HEADER_SIZE = _HEADER.size  # 24 bytes


def write_emb1(matrix: EmbeddingMatrix, path: str | os.PathLike) -> None:
    """Serialize a matrix; the file parses back to an equal matrix."""
    header = _HEADER.pack(
        MAGIC, VERSION, int(matrix.mode), matrix.rows, matrix.dim, b"\x00" * 4
    )
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_emb1(path: str | os.PathLike) -> EmbeddingMatrix:
    """Parse an EMB1 file, validating the header byte-for-byte.

    Raises :class:`FormatError` with codes ``BAD_MAGIC``, ``BAD_VERSION``,
    ``BAD_MODE_TAG``, ``RESERVED_NONZERO`` or ``TRUNCATED_PAYLOAD``; messages
    name the offending byte offset.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise FormatError(
            "TRUNCATED_HEADER",
            f"file is {len(blob)} bytes, header needs {HEADER_SIZE} (at byte 0)",
        )
    magic, version, mode_tag, rows, dim, reserved = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError("BAD_MAGIC", f"expected {MAGIC!r}, found {magic!r} at byte 0")
    if version != VERSION:
        raise FormatError("BAD_VERSION", f"expected {VERSION}, found {version} at byte 4")
    try:
        mode = Mode(mode_tag)
    except ValueError:
        raise FormatError("BAD_MODE_TAG", f"unknown mode tag {mode_tag} at byte 6")
    if reserved != b"\x00" * 4:
        raise FormatError("RESERVED_NONZERO", f"reserved bytes {reserved!r} at byte 20")
    if dim == 0:
        raise FormatError("BAD_DIM", "dimension must be positive (at byte 16)")
    expected = rows * dim * 4
    actual = len(blob) - HEADER_SIZE
    if actual != expected:
        raise FormatError(
            "TRUNCATED_PAYLOAD",
            f"payload at byte {HEADER_SIZE}: expected {expected} bytes "
            f"({rows} rows x {dim} dims), found {actual}",
        )
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(rows, dim)
    return EmbeddingMatrix(mode, data.copy())


# --- metadata tables ---------------------------------------------------------

REQUIRED_COLUMNS = ("id", "role")
#: Columns read as strings/enums; everything else must parse as float64.
_NON_NUMERIC_COLUMNS = frozenset({"id", "role", "smiles", "activity", "scaffold_key"})


def read_tsv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    """Generic TSV reader: (header, rows). Rows must match the header width."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("EMPTY_INPUT", f"{path}: no header row")
    stripped = [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
    header = stripped[0].split("\t")
    rows = []
    for lineno, ln in enumerate(stripped[1:], start=2):
        fields = ln.split("\t")
        if len(fields) != len(header):
            raise FormatError(
                "RAGGED_ROW",
                f"{path}: line {lineno} has {len(fields)} fields, header has {len(header)}",
            )
        rows.append(fields)
    return header, rows


def write_tsv(path: str | os.PathLike, header: Iterable[str], rows: Iterable[Iterable[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def read_metadata(path: str | os.PathLike) -> list[MoleculeRecord]:
    """Load molecule records from a TSV table, one record per data row.

    ``id`` and ``role`` are required; ``smiles``, ``activity`` and
    ``scaffold_key`` are recognized optional strings. Any other column is
    numeric and lands in the record's column map; empty cells mean the value
    is absent for that row.
    """
    header, rows = read_tsv(path)
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise FormatError("MISSING_COLUMN", f"{path}: metadata needs a {col!r} column")
    col_index = {name: i for i, name in enumerate(header)}
    numeric_cols = [c for c in header if c not in _NON_NUMERIC_COLUMNS]

    records = []
    for rowno, fields in enumerate(rows):
        def cell(name: str) -> str:
            return fields[col_index[name]]

        role_text = cell("role")
        try:
            role = Role(role_text)
        except ValueError:
            raise FormatError(
                "BAD_ENUM", f"{path}: row {rowno} role {role_text!r} not in REFERENCE|CANDIDATE"
            )
        activity = None
        if "activity" in col_index and cell("activity"):
            try:
                activity = Activity(cell("activity"))
            except ValueError:
                raise FormatError(
                    "BAD_ENUM",
                    f"{path}: row {rowno} activity {cell('activity')!r} not in ACTIVE|INACTIVE",
                )
        columns = {}
        for name in numeric_cols:
            text = fields[col_index[name]]
            if not text:
                continue
            try:
                columns[name] = float(text)
            except ValueError:
                raise FormatError(
                    "BAD_NUMBER", f"{path}: row {rowno} column {name!r}: {text!r} is not a number"
                )
        records.append(
            MoleculeRecord(
                id=cell("id"),
                role=role,
                smiles=cell("smiles") or None if "smiles" in col_index else None,
                activity=activity,
                columns=columns,
                scaffold_key=(cell("scaffold_key") or None) if "scaffold_key" in col_index else None,
            )
        )
    return records


# --- representation assembly -------------------------------------------------

def _divide_by_norm(rows32: np.ndarray) -> np.ndarray:
    v = rows32.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", v, v, optimize=False))
    bad = np.flatnonzero(~(norms > 0.0))
    if bad.size:
        raise ComputeError("ZERO_NORM_ROW", f"row {int(bad[0])} has no positive norm")
    return (v / norms[:, None]).astype(np.float32)


def _row_cycle_representative(row32: np.ndarray) -> np.ndarray:
    # Rounding the float32 division can oscillate between two states whose
    # norms straddle 1; pick the byte-wise minimum of the cycle so repeated
    # normalization always lands on the same value.
    seen: dict[bytes, int] = {}
    states: list[np.ndarray] = []
    current = np.ascontiguousarray(row32)
    while True:
        key = current.tobytes()
        if key in seen:
            cycle = states[seen[key]:]
            return min(cycle, key=lambda r: r.tobytes())
        seen[key] = len(states)
        states.append(current)
        current = _divide_by_norm(current[None, :])[0]


def unit_rows(data: np.ndarray) -> np.ndarray:
    """Row-normalize float32 data to unit l2 norm, idempotently.

    Norms accumulate in float64 before the float32 division. The result is a
    fixed point of this function: re-normalizing reproduces it bit-for-bit,
    including the rare rows where plain division would oscillate.
    """
    out = _divide_by_norm(np.ascontiguousarray(data, dtype=np.float32))
    again = _divide_by_norm(out)
    unstable = np.flatnonzero(np.any(again.view(np.uint32) != out.view(np.uint32), axis=1))
    for i in unstable:
        out[i] = _row_cycle_representative(out[i])
    return out


def make_concat(e2d: EmbeddingMatrix, e3d: EmbeddingMatrix) -> EmbeddingMatrix:
    """Concatenate two matrices row-wise after unit-normalizing each half.

    Every output row has l2 norm sqrt(2); splitting a row at ``e2d.dim`` and
    re-normalizing the halves reproduces them exactly.
    """
    if e2d.rows != e3d.rows:
        raise DataError(
            "ROW_COUNT_MISMATCH", f"inputs have {e2d.rows} and {e3d.rows} rows"
        )
    for name, m in (("first", e2d), ("second", e3d)):
        v = m.data.astype(np.float64)
        norms2 = np.einsum("ij,ij->i", v, v, optimize=False)
        bad = np.flatnonzero(~(norms2 > 0.0))
        if bad.size:
            raise ComputeError(
                "ZERO_NORM_ROW", f"row {int(bad[0])} of the {name} input has no positive norm"
            )
    left = unit_rows(e2d.data)
    right = unit_rows(e3d.data)
    return EmbeddingMatrix(Mode.CONCAT, np.hstack([left, right]))
