"""Command-line interface wiring the pipeline end to end.

Subcommands: ``screen``, ``correlate``, ``reward``, ``genstats``,
``scaffold``, ``convert``. Every run is deterministic given its flags and
seed. stdout carries data only; diagnostics go to stderr. Exit codes: 0 on
success, 2 for usage or validation problems, 3 for I/O failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytics, screening
from .analytics import DRUGLIKE_RANGES, MetricSpec
from .dataset import LibraryDataset, Mode, validate_dataset
from .distance import DistanceKind
from .errors import PedScreenError, UsageError
from .io import read_emb1, read_metadata, read_tsv, write_emb1, write_tsv
from .reward import PRESETS, SigmoidParams, StreamConfig, serve_stream
from .scaffold import scaffold_key_or_sentinel
from .dataset import EmbeddingMatrix


def _fmt(x: Optional[float]) -> str:
    return "NA" if x is None else repr(float(x))


def _check_inputs_exist(*paths) -> None:
    # Fail fast: every input path resolves before any work begins.
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input path does not exist: {p}")


def _parse_fraction(value: str) -> float:
    try:
        fraction = float(value)
    except ValueError:
        raise UsageError("BAD_FRACTION", f"fraction {value!r} is not a number")
    if not (0.0 < fraction <= 1.0):
        raise UsageError("BAD_FRACTION", f"fraction must be in (0, 1], got {value}")
    return fraction


def _load_dataset(metadata: str, embedding_paths: Sequence[str], target: Optional[str]
                  ) -> tuple[LibraryDataset, list[Mode]]:
    records = read_metadata(metadata)
    embeddings = {}
    modes = []
    for path in embedding_paths:
        matrix = read_emb1(path)
        if matrix.mode in embeddings:
            raise UsageError(
                "DUPLICATE_MODE", f"two embedding files carry mode {matrix.mode.label!r}"
            )
        embeddings[matrix.mode] = matrix
        modes.append(matrix.mode)
    name = target if target else Path(metadata).stem
    ds = LibraryDataset(records=tuple(records), embeddings=embeddings, target_name=name)
    return ds, modes


# --- screen -------------------------------------------------------------------


def cmd_screen(args) -> int:
    _check_inputs_exist(args.metadata, *args.embeddings)
    fraction = _parse_fraction(args.fraction)
    ds, modes = _load_dataset(args.metadata, args.embeddings, args.target)
    report = validate_dataset(ds)
    if not report.ok:
        for issue in report.issues:
            print(f"ERROR {issue.code}: {issue.message}", file=sys.stderr)
        return 2
    kind = DistanceKind(args.distance)
    reports = []
    for mode in modes:
        reports.append(screening.screen_target(ds, mode, kind, fraction, threads=args.threads))
    for column in args.columns or []:
        reports.append(screening.screen_target(ds, column, kind, fraction))
    if not reports:
        raise UsageError("NO_METHOD", "need at least one embedding file or --columns entry")
    write_tsv(args.out, screening.REPORT_HEADER, screening.report_rows(reports))
    if args.per_ref_out:
        write_tsv(args.per_ref_out, screening.PER_REFERENCE_HEADER,
                  screening.per_reference_rows(reports))
    best = max(r.best_pooled_ef for r in reports)
    print(f"{ds.target_name}\tmethods={len(reports)}\tbest_pooled_ef={best!r}")
    return 0


# --- correlate -----------------------------------------------------------------


def _parse_bins(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError("BAD_BIN_SPEC", f"--bins must be lo:hi:step, got {text!r}")
    return lo, hi, step


def cmd_correlate(args) -> int:
    _check_inputs_exist(args.metadata, *args.embeddings)
    ds, _ = _load_dataset(args.metadata, args.embeddings, args.target)
    structural = validate_dataset(ds).structural_issues()
    if structural:
        for issue in structural:
            print(f"ERROR {issue.code}: {issue.message}", file=sys.stderr)
        return 2
    specs = [MetricSpec.parse(text) for text in args.metrics]
    if len(specs) < 2:
        raise UsageError("NO_METHOD", "--metrics needs at least two entries")
    lo, hi, step = _parse_bins(args.bins)
    bin_spec = specs[0] if args.bin_metric is None else MetricSpec.parse(args.bin_metric)

    # Resolve on the full dataset, then subsample rows of the vectors so that
    # reference rows stay available to the distance metrics.
    vectors = {spec.name: analytics.resolve_metric(ds, spec) for spec in specs}
    if bin_spec.name not in vectors:
        vectors[bin_spec.name] = analytics.resolve_metric(ds, bin_spec)
    n_rows = len(ds)

    prefix = args.out_prefix
    if args.sample_per_bin:
        picked = analytics.bin_uniform_sample(
            vectors[bin_spec.name], lo, hi, step, args.sample_per_bin, args.seed
        )
        write_tsv(f"{prefix}sample_ids.tsv", ("row", "id"),
                  [[str(i), ds.records[i].id] for i in picked])
        vectors = {name: vec[picked] for name, vec in vectors.items()}
        n_rows = len(picked)

    matrix = analytics.correlation_from_vectors(
        [spec.name for spec in specs], [vectors[spec.name] for spec in specs]
    )
    header = ["metric", *matrix.labels]
    rows = []
    for i, label in enumerate(matrix.labels):
        cells = [
            repr(float(matrix.r[i, j])) if matrix.defined_mask[i, j] else "NA"
            for j in range(len(matrix.labels))
        ]
        rows.append([label, *cells])
    write_tsv(f"{prefix}correlation.tsv", header, rows)

    bin_values = vectors[bin_spec.name]
    for spec in specs:
        if spec.name == bin_spec.name:
            continue
        stats = analytics.binned_stats(bin_values, vectors[spec.name], lo, hi, step)
        rows = []
        for b in range(len(stats.counts)):
            rows.append([
                repr(float(stats.edges[b])),
                repr(float(stats.edges[b + 1])),
                str(stats.counts[b]),
                _fmt(stats.means[b]),
                _fmt(stats.sds[b]),
            ])
        safe = spec.name.replace(":", "_").replace("/", "_")
        write_tsv(f"{prefix}binned_{safe}.tsv",
                  ("bin_lo", "bin_hi", "count", "mean", "sd"), rows)
    print(f"{ds.target_name}\tmetrics={len(specs)}\trows={n_rows}")
    return 0


# --- reward --------------------------------------------------------------------


def _sigmoid_params(args) -> SigmoidParams:
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(
                "BAD_PRESET",
                f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}",
            )
        return PRESETS[args.preset]
    if args.sig_low is None or args.sig_high is None:
        raise UsageError("BAD_PARAMS", "need --preset or both --sig-low and --sig-high")
    return SigmoidParams(args.sig_low, args.sig_high, args.sig_k)


def cmd_reward(args) -> int:
    _check_inputs_exist(args.refs, args.cands, args.alerts)
    params = _sigmoid_params(args)
    refs = read_emb1(args.refs)
    cands = read_emb1(args.cands) if args.cands else None
    alerts = None
    if args.alerts:
        if cands is None:
            raise UsageError("BAD_PARAMS", "--alerts needs --cands")
        with open(args.alerts, "r", encoding="utf-8") as fh:
            flags = [line.strip() for line in fh if line.strip()]
        if len(flags) != cands.rows:
            raise UsageError(
                "BAD_ALERTS", f"{len(flags)} alert lines for {cands.rows} candidate rows"
            )
        if any(f not in ("0", "1") for f in flags):
            raise UsageError("BAD_ALERTS", "alert lines must be 0 or 1")
        alerts = tuple(int(f) for f in flags)
    config = StreamConfig(
        kind=DistanceKind(args.distance), params=params,
        refs=refs, cands=cands, alerts=alerts,
    )
    serve_stream(sys.stdin, sys.stdout, config)
    return 0


# --- genstats ------------------------------------------------------------------


def _parse_ranges(text: str) -> dict[str, tuple[float, float]]:
    ranges = {}
    for part in text.split(","):
        try:
            name, bounds = part.split("=")
            lo, hi = (float(v) for v in bounds.split(":"))
        except ValueError:
            raise UsageError("BAD_RANGES", f"--ranges entries look like mw=200:500, got {part!r}")
        ranges[name] = (lo, hi)
    return ranges


def cmd_genstats(args) -> int:
    _check_inputs_exist(args.metadata)
    header, rows = read_tsv(args.metadata)
    if "id" not in header or "total_score" not in header:
        raise UsageError("MISSING_COLUMN", "genstats input needs id and total_score columns")
    if "scaffold_key" not in header and "smiles" not in header:
        raise UsageError("MISSING_COLUMN", "genstats input needs scaffold_key or smiles")
    col = {name: i for i, name in enumerate(header)}

    ids = [row[col["id"]] for row in rows]
    try:
        scores = np.array([float(row[col["total_score"]]) for row in rows])
    except ValueError:
        raise UsageError("BAD_NUMBER", "total_score column has non-numeric cells")
    if "scaffold_key" in col:
        keys = [row[col["scaffold_key"]] for row in rows]
    else:
        keys = [
            scaffold_key_or_sentinel(mol_id, row[col["smiles"]])
            for mol_id, row in zip(ids, rows)
        ]

    prefix = args.out_prefix
    diversity = analytics.quantile_scaffold_diversity(scores, keys, args.quantiles)
    write_tsv(
        f"{prefix}quantile_diversity.tsv",
        ("bin", "count", "unique_scaffolds", "ratio"),
        [
            [f"Q{b + 1}", str(diversity.counts[b]), str(diversity.unique_counts[b]),
             _fmt(diversity.ratios[b])]
            for b in range(diversity.bin_count)
        ],
    )

    # Highest-score slice: rank descending, stable by input order.
    from .distance import stable_order

    order = stable_order(scores, descending=True)
    top = order[: min(args.top_k, len(rows))]
    top_keys = [keys[i] for i in top]
    unique = len(set(top_keys))
    write_tsv(
        f"{prefix}scaffold_summary.tsv",
        ("n_top", "unique_scaffolds", "unique_ratio"),
        [[str(len(top_keys)), str(unique), repr(unique / len(top_keys))]],
    )

    top_records = _rows_as_dataset(header, rows, top)
    if args.ranges:
        ranges = _parse_ranges(args.ranges)
    else:
        # Default property set, restricted to columns the table actually has.
        ranges = {
            k: v for k, v in DRUGLIKE_RANGES.items()
            if k in col and any(row[col[k]] for row in rows)
        }
    if ranges:
        compliance = analytics.druglikeness_compliance(top_records, ranges)
        write_tsv(
            f"{prefix}compliance.tsv",
            ("column", "lo", "hi", "fraction_in_range"),
            [[name, repr(lo), repr(hi), repr(compliance[name])]
             for name, (lo, hi) in ranges.items()],
        )
        minmax = analytics.column_minmax(top_records, list(ranges))
        write_tsv(
            f"{prefix}minmax.tsv",
            ("column", "min", "max"),
            [[name, repr(v[0]), repr(v[1])] for name, v in minmax.items()],
        )

    pool = order[: min(args.balanced_top, len(rows))]
    balanced = analytics.scaffold_balanced_sample(
        [ids[i] for i in pool], [keys[i] for i in pool], args.balanced_n, args.seed
    )
    write_tsv(f"{prefix}balanced_ids.tsv", ("id",), [[i] for i in balanced])
    print(
        f"genstats\trows={len(rows)}\ttop={len(top_keys)}\tunique_scaffolds={unique}"
        f"\tbalanced={len(balanced)}"
    )
    return 0


def _rows_as_dataset(header: list[str], rows: list[list[str]], indices) -> LibraryDataset:
    """Generic numeric rows as a dataset for the property-table helpers."""
    from .dataset import MoleculeRecord, Role

    col = {name: i for i, name in enumerate(header)}
    skip = {"id", "smiles", "scaffold_key", "role", "activity"}
    records = []
    for i in indices:
        row = rows[i]
        columns = {}
        for name, j in col.items():
            if name in skip or not row[j]:
                continue
            try:
                columns[name] = float(row[j])
            except ValueError:
                raise UsageError("BAD_NUMBER", f"column {name!r}: {row[j]!r} is not a number")
        records.append(MoleculeRecord(id=row[col["id"]], role=Role.CANDIDATE, columns=columns))
    return LibraryDataset(records=tuple(records), embeddings={}, target_name="genstats")


# --- scaffold / convert ----------------------------------------------------------


def cmd_scaffold(args) -> int:
    _check_inputs_exist(args.input)
    header, rows = read_tsv(args.input)
    if "id" not in header or "smiles" not in header:
        raise UsageError("MISSING_COLUMN", "scaffold input needs id and smiles columns")
    col = {name: i for i, name in enumerate(header)}
    if "scaffold_key" in col:
        out_header = header
        key_idx = col["scaffold_key"]
    else:
        out_header = [*header, "scaffold_key"]
        key_idx = None
    out_rows = []
    for row in rows:
        key = scaffold_key_or_sentinel(row[col["id"]], row[col["smiles"]])
        if key_idx is None:
            out_rows.append([*row, key])
        else:
            patched = list(row)
            patched[key_idx] = key
            out_rows.append(patched)
    write_tsv(args.output, out_header, out_rows)
    print(f"scaffold\trows={len(out_rows)}")
    return 0


def cmd_convert(args) -> int:
    _check_inputs_exist(args.input)
    with open(args.input, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise UsageError("EMPTY_INPUT", "no rows to convert")
    parsed = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise UsageError(
                "RAGGED_ROW", f"line {lineno} has {len(cells)} values, expected {width}"
            )
        try:
            parsed.append([float(c) for c in cells])
        except ValueError:
            raise UsageError("BAD_NUMBER", f"line {lineno} has a non-numeric cell")
    matrix = EmbeddingMatrix(Mode.from_label(args.mode), np.array(parsed, dtype=np.float32))
    write_emb1(matrix, args.output)
    print(f"convert\trows={matrix.rows}\tdim={matrix.dim}\tmode={matrix.mode.label}")
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedscreen",
        description="Embedding-distance screening, analytics and reward serving.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("screen", help="rank candidates against references and report EF")
    p.add_argument("--metadata", required=True, help="molecule table (TSV)")
    p.add_argument("--embeddings", nargs="*", default=[], help="EMB1 files, one per mode")
    p.add_argument("--columns", nargs="*", help="ingested similarity columns to screen")
    p.add_argument("--distance", choices=["cosine", "euclidean"], default="cosine")
    p.add_argument("--fraction", default="0.01", help="top fraction for EF (default 0.01)")
    p.add_argument("--target", help="target name (defaults to the metadata file stem)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="report TSV path")
    p.add_argument("--per-ref-out", help="optional per-reference EF table path")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("correlate", help="correlation matrix and binned stats for metrics")
    p.add_argument("--metadata", required=True)
    p.add_argument("--embeddings", nargs="*", default=[])
    p.add_argument("--metrics", nargs="+", required=True,
                   help="col:<name> or ped:<mode>:<kind>:<reference-id>")
    p.add_argument("--bins", default="0:2:0.2", help="lo:hi:step (default 0:2:0.2)")
    p.add_argument("--bin-metric", help="metric to bin by (default: first of --metrics)")
    p.add_argument("--sample-per-bin", type=int, help="bin-uniform subsample size per bin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", help="target name")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("reward", help="serve the streaming reward protocol on stdin/stdout")
    p.add_argument("--refs", required=True, help="reference embeddings (EMB1)")
    p.add_argument("--cands", help="candidate embeddings (EMB1) for @row requests")
    p.add_argument("--preset", "--mode", dest="preset",
                   help="sigmoid preset: " + ", ".join(sorted(PRESETS)))
    p.add_argument("--sig-low", type=float)
    p.add_argument("--sig-high", type=float)
    p.add_argument("--sig-k", type=float, default=0.25)
    p.add_argument("--distance", choices=["cosine", "euclidean"], default="euclidean")
    p.add_argument("--alerts", help="file with one 0/1 alert flag per candidate row")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("genstats", help="scaffold diversity and property tables")
    p.add_argument("--metadata", required=True,
                   help="generated-molecule table with total_score and scaffold_key|smiles")
    p.add_argument("--top-k", type=int, default=5000)
    p.add_argument("--quantiles", type=int, default=4)
    p.add_argument("--balanced-n", type=int, default=500)
    p.add_argument("--balanced-top", type=int, default=1000,
                   help="pool size for the balanced sample (default 1000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ranges", help="override ranges, e.g. mw=200:500,qed=0.4:1")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_genstats)

    p = sub.add_parser("scaffold", help="append a scaffold_key column to a TSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_scaffold)

    p = sub.add_parser("convert", help="CSV of floats to an EMB1 file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--mode", choices=["raw", "2d", "3d", "concat"], default="raw")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PedScreenError as exc:
        print(f"ERROR {exc.code}: {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR IO: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
