"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.
"""

import math
import random
import struct
import time
from fractions import Fraction

import numpy as np
import pytest

from pedscreen import (
    Activity,
    DistanceKind,
    EmbeddingMatrix,
    FormatError,
    LibraryDataset,
    Mode,
    MoleculeRecord,
    PRESETS,
    Role,
    best_pool,
    canonical_key,
    enrichment_factor,
    murcko_scaffold,
    parse_smiles,
    read_emb1,
    reverse_sigmoid,
    scaffold_of,
    screen_target,
    write_emb1,
)
from pedscreen.analytics import (
    druglikeness_compliance,
    pearson,
    cliffs_delta,
    quantile_scaffold_diversity,
    scaffold_balanced_sample,
)

from corpus import HAND_REDUCED, ring_corpus
from oracles import brute_cliffs_delta, naive_best_pool, naive_quantile_diversity, rational_ef


def _criterion(number, description, check):
    try:
        check()
    except BaseException:
        print(f"\n[ACCEPTANCE] criterion {number:2d} FAIL  {description}")
        raise
    print(f"\n[ACCEPTANCE] criterion {number:2d} PASS  {description}")


def test_criterion_01_ef_oracle_equivalence():
    def check():
        rng = np.random.default_rng(1001)
        started = time.perf_counter()
        for _ in range(1000):
            n = int(rng.integers(1, 10_001))
            flags = rng.random(n) < float(rng.uniform(0.01, 0.5))
            if not flags.any():
                flags[int(rng.integers(0, n))] = True
            order = rng.permutation(n)
            result = enrichment_factor(order, flags, 0.01)
            n_top, n_actives_top, exact = rational_ef(list(order), flags, Fraction(1, 100))
            assert result.n_top == n_top
            assert result.n_actives_top == n_actives_top
            assert result.ef == float(exact)
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.2f}s"

    _criterion(1, "EF matches the rational oracle exactly on 1000 targets (<10s)", check)


def test_criterion_02_best_pooling_oracle_and_threads():
    def check():
        rng = np.random.default_rng(1002)
        for kind in (DistanceKind.COSINE, DistanceKind.EUCLIDEAN):
            for _ in range(3):
                n = int(rng.integers(50, 400))
                n_refs = int(rng.integers(1, 9))
                dim = int(rng.integers(4, 48))
                cands = rng.standard_normal((n, dim)).astype(np.float32)
                refs = rng.standard_normal((n_refs, dim)).astype(np.float32)
                matrix, pooled, order = naive_best_pool(cands, refs, kind)
                one = best_pool(cands, refs, kind, threads=1)
                eight = best_pool(cands, refs, kind, threads=8)
                assert (one.pooled[:, None] <= one.per_reference).all()
                for engine in (one, eight):
                    assert np.array_equal(engine.per_reference, np.array(matrix))
                    assert np.array_equal(engine.pooled, np.array(pooled))
                    assert np.array_equal(engine.order, np.array(order))

    _criterion(2, "best-pooled ranking equals the all-pairs oracle bit-exactly (1 and 8 threads)", check)


def test_criterion_03_reverse_sigmoid():
    def check():
        for params in PRESETS.values():
            assert abs(reverse_sigmoid(params.mid, params) - 0.5) < 1e-12
        p = PRESETS["molformer"]
        formula_low = 1.0 / (1.0 + 10.0 ** -1.25)
        formula_high = 1.0 / (1.0 + 10.0 ** 1.25)
        assert abs(reverse_sigmoid(5.0, p) - 0.9468) < 1e-3
        assert abs(reverse_sigmoid(17.0, p) - 0.0532) < 1e-3
        assert abs(reverse_sigmoid(5.0, p) - formula_low) < 1e-15
        assert abs(reverse_sigmoid(17.0, p) - formula_high) < 1e-15
        rng = np.random.default_rng(1003)
        span = 4.0 * (p.high - p.low)
        pairs = rng.uniform(p.mid - span, p.mid + span, (10_000, 2))
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        keep = lo < hi
        for a, b in zip(lo[keep], hi[keep]):
            assert reverse_sigmoid(a, p) > reverse_sigmoid(b, p)

    _criterion(3, "reverse sigmoid: midpoint, preset edge values, monotone on 10k pairs", check)


def test_criterion_04_pearson_oracle_and_affine_invariance():
    def check():
        rng = np.random.default_rng(1004)
        for _ in range(1000):
            n = int(10 ** rng.uniform(0.35, 4.0))
            n = max(2, min(n, 10_000))
            x = rng.standard_normal(n) * float(rng.uniform(0.001, 1000.0))
            y = x * float(rng.uniform(-3, 3)) + rng.standard_normal(n) * float(
                rng.uniform(0.01, 10.0)
            )
            got = pearson(x, y)
            # long-double oracle: ~1e-18 working precision, vectorized
            xq = x.astype(np.longdouble)
            yq = y.astype(np.longdouble)
            dx = xq - xq.mean()
            dy = yq - yq.mean()
            expected = float((dx * dy).sum() / np.sqrt((dx * dx).sum() * (dy * dy).sum()))
            assert abs(got - expected) < 1e-10
        x = rng.standard_normal(2000)
        y = rng.standard_normal(2000)
        r = pearson(x, y)
        assert abs(pearson(7.25 * x + 3.0, y) - r) < 1e-10
        assert abs(pearson(-0.5 * x + 1.0, y) + r) < 1e-10

    _criterion(4, "pearson within 1e-10 of a high-precision oracle; affine invariance", check)


def test_criterion_05_cliffs_delta():
    def check():
        rng = np.random.default_rng(1005)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            m = int(rng.integers(1, 40))
            if rng.random() < 0.5:
                x = [float(v) for v in rng.integers(-5, 6, n)]
                y = [float(v) for v in rng.integers(-5, 6, m)]
            else:
                x = [float(v) for v in rng.standard_normal(n)]
                y = [float(v) for v in rng.standard_normal(m)]
            fast = cliffs_delta(x, y)
            assert fast == brute_cliffs_delta(x, y)
            assert cliffs_delta(y, x) == -fast
        assert cliffs_delta([1.0, 2.0], [3.0, 4.0]) == -1.0
        assert cliffs_delta([3.0, 4.0], [1.0, 2.0]) == 1.0

    _criterion(5, "Cliff's delta equals O(nm) brute force exactly; endpoints and antisymmetry", check)


def test_criterion_06_scaffold_suite():
    def check():
        assert len(HAND_REDUCED) >= 20
        for name, smiles, reduced in HAND_REDUCED:
            got = scaffold_of(smiles)
            if reduced == "ACYCLIC":
                assert got == "ACYCLIC", name
            else:
                assert got == canonical_key(parse_smiles(reduced)), name
        from pedscreen.smiles import shuffled_serialization

        rng = random.Random(1006)
        corpus = ring_corpus()
        assert len(corpus) >= 100
        for smiles in corpus:
            scaffold = murcko_scaffold(parse_smiles(smiles))
            again = murcko_scaffold(scaffold)
            assert canonical_key(again) == canonical_key(scaffold), smiles
            if not scaffold.atoms:
                continue
            expected = canonical_key(scaffold)
            for _ in range(20):
                rewritten = shuffled_serialization(scaffold, rng)
                assert canonical_key(parse_smiles(rewritten)) == expected, smiles

    _criterion(6, "scaffold corpus keys, 20x permutation invariance, murcko idempotence", check)


def test_criterion_07_quantiles_and_balanced_sampling():
    def check():
        rng = np.random.default_rng(1007)
        scores = [float(v) for v in rng.standard_normal(1000)]
        keys = [f"s{int(rng.integers(0, 140))}" for _ in range(1000)]
        for bins in (1, 2, 4, 9):
            out = quantile_scaffold_diversity(scores, keys, bins)
            assert sum(out.counts) == 1000
            assert max(out.counts) - min(out.counts) <= 1
            assert list(zip(out.counts, out.unique_counts)) == naive_quantile_diversity(
                scores, keys, bins
            )
        ids = [f"m{i}" for i in range(1000)]
        sample = scaffold_balanced_sample(ids, keys, 500, seed=77)
        assert sample == scaffold_balanced_sample(ids, keys, 500, seed=77)
        assert len(sample) == 500 and len(set(sample)) == 500
        # round-robin never takes a second member of any scaffold while
        # another scaffold still has an untaken one
        by_key = {}
        for mol_id in sample:
            k = keys[ids.index(mol_id)]
            by_key[k] = by_key.get(k, 0) + 1
        group_sizes = {}
        for k in keys:
            group_sizes[k] = group_sizes.get(k, 0) + 1
        floor = min(by_key.get(k, 0) for k in group_sizes)
        for k, took in by_key.items():
            assert took <= group_sizes[k]
            assert took >= min(floor, group_sizes[k])

    _criterion(7, "quantile bins partition exactly; balanced sampling matches oracle + seed-stable", check)


def test_criterion_08_performance():
    def check():
        rng = np.random.default_rng(1008)
        cands = rng.standard_normal((100_000, 768), dtype=np.float64).astype(np.float32)
        refs = rng.standard_normal((10, 768)).astype(np.float32)
        started = time.perf_counter()
        ranking = best_pool(cands, refs, DistanceKind.COSINE, threads=4)
        elapsed = time.perf_counter() - started
        assert ranking.order.size == 100_000
        assert elapsed < 2.0, f"best_pool took {elapsed:.2f}s"

        started = time.perf_counter()
        for t in range(15):
            n = 20_000
            n_refs = int(rng.integers(1, 11))
            dim = 256
            data = rng.standard_normal((n + n_refs, dim), dtype=np.float64).astype(np.float32)
            records = [
                MoleculeRecord(id=f"r{j}", role=Role.REFERENCE) for j in range(n_refs)
            ]
            flags = rng.random(n) < 0.05
            if not flags.any():
                flags[0] = True
            records += [
                MoleculeRecord(
                    id=f"c{i}",
                    role=Role.CANDIDATE,
                    activity=Activity.ACTIVE if flags[i] else Activity.INACTIVE,
                )
                for i in range(n)
            ]
            ds = LibraryDataset(
                records=tuple(records),
                embeddings={Mode.MODE_3D: EmbeddingMatrix(Mode.MODE_3D, data)},
                target_name=f"T{t}",
            )
            report = screen_target(ds, Mode.MODE_3D, DistanceKind.COSINE, 0.01, threads=4)
            assert report.n_references == n_refs
            assert report.best_pooled_ef >= 0.0
        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"synthetic 15-target run took {elapsed:.2f}s"

    _criterion(8, "100k x 768 x 10 cosine pool <2s; 15-target synthetic screen <60s", check)


def test_criterion_09_format_round_trip(tmp_path):
    def check():
        rng = np.random.default_rng(1009)
        for trial in range(60):
            rows = int(rng.integers(0, 30))
            dim = int(rng.integers(1, 100))
            data = rng.standard_normal((rows, dim)).astype(np.float32)
            if rows and trial % 4 == 0:
                data[rng.integers(0, rows), rng.integers(0, dim)] = np.nan
            mode = Mode(int(rng.integers(0, 4)))
            path = tmp_path / "fuzz.emb1"
            write_emb1(EmbeddingMatrix(mode, data), path)
            back = read_emb1(path)
            assert back.mode == mode
            assert back.data.shape == (rows, dim)
            assert np.array_equal(back.data.view(np.uint32), data.view(np.uint32))

        def header(magic=b"EMB1", version=1, tag=1, rows=1, dim=1, reserved=b"\x00" * 4):
            return struct.pack("<4sHHQI4s", magic, version, tag, rows, dim, reserved)

        cases = [
            (header(magic=b"XMB1") + b"\x00" * 4, "BAD_MAGIC"),
            (header(version=7) + b"\x00" * 4, "BAD_VERSION"),
            (header(rows=2, dim=3) + b"\x00" * 20, "TRUNCATED_PAYLOAD"),
            (header() + b"\x00" * 8, "TRUNCATED_PAYLOAD"),
            (header(tag=42) + b"\x00" * 4, "BAD_MODE_TAG"),
            (header(reserved=b"\x01\x00\x00\x00") + b"\x00" * 4, "RESERVED_NONZERO"),
            (b"EMB1\x01", "TRUNCATED_HEADER"),
        ]
        for blob, expected_code in cases:
            path = tmp_path / "bad.emb1"
            path.write_bytes(blob)
            with pytest.raises(FormatError) as err:
                read_emb1(path)
            assert err.value.code == expected_code

    _criterion(9, "EMB1 round-trip bit-identical (fuzzed, rows=0); malformed headers coded", check)


def test_criterion_10_druglikeness_compliance():
    def check():
        rng = np.random.default_rng(1010)
        ranges = {
            "mw": (200.0, 500.0),
            "tpsa": (20.0, 130.0),
            "logp": (-1.0, 6.0),
            "hbd": (0.0, 5.0),
            "hba": (0.0, 10.0),
            "qed": (0.4, 1.0),
            "sa": (1.0, 5.0),
        }
        samplers = {
            "mw": lambda: float(rng.uniform(50, 900)),
            "tpsa": lambda: float(rng.uniform(0, 300)),
            "logp": lambda: float(rng.uniform(-5, 12)),
            "hbd": lambda: float(rng.integers(0, 9)),
            "hba": lambda: float(rng.integers(0, 16)),
            "qed": lambda: float(rng.uniform(0, 1)),
            "sa": lambda: float(rng.uniform(0, 10)),
        }
        values = {col: [fn() for _ in range(400)] for col, fn in samplers.items()}
        # pin boundary values to exercise the closed-interval rule
        for col, (lo, hi) in ranges.items():
            values[col][0] = lo
            values[col][1] = hi
        records = [
            MoleculeRecord(
                id=f"m{i}",
                role=Role.CANDIDATE,
                columns={col: values[col][i] for col in ranges},
            )
            for i in range(400)
        ]
        ds = LibraryDataset(records=tuple(records), embeddings={}, target_name="T")
        got = druglikeness_compliance(ds)  # default ranges
        for col, (lo, hi) in ranges.items():
            inside = sum(1 for v in values[col] if lo <= v <= hi)
            assert got[col] == inside / 400, col
            assert inside >= 2  # the pinned boundary rows count as compliant

    _criterion(10, "drug-likeness fractions equal the oracle exactly with closed boundaries", check)
