import math
import struct

import numpy as np
import pytest

from pedscreen import (
    ComputeError,
    DataError,
    EmbeddingMatrix,
    FormatError,
    Mode,
    Role,
    make_concat,
    read_emb1,
    read_metadata,
    unit_rows,
    write_emb1,
)
from pedscreen.io import HEADER_SIZE


def emb(mode, data):
    return EmbeddingMatrix(mode, np.asarray(data, dtype=np.float32))


class TestEmb1RoundTrip:
    def test_write_then_read_is_bit_identical(self, tmp_path):
        rng = np.random.default_rng(42)
        for trial in range(50):
            rows = int(rng.integers(0, 40))
            dim = int(rng.integers(1, 64))
            data = rng.standard_normal((rows, dim)).astype(np.float32)
            # sprinkle non-finite values: the container must not sanitize
            if rows and trial % 3 == 0:
                data[rng.integers(0, rows), rng.integers(0, dim)] = np.nan
                data[rng.integers(0, rows), rng.integers(0, dim)] = np.inf
            mode = Mode(int(rng.integers(0, 4)))
            path = tmp_path / f"m{trial}.emb1"
            write_emb1(emb(mode, data), path)
            back = read_emb1(path)
            assert back.mode == mode
            assert back.data.shape == (rows, dim)
            assert np.array_equal(back.data.view(np.uint32), data.view(np.uint32))

    def test_single_value_file_is_28_bytes(self, tmp_path):
        path = tmp_path / "one.emb1"
        write_emb1(emb(Mode.RAW, [[0.0]]), path)
        assert path.stat().st_size == HEADER_SIZE + 4 == 28

    def test_zero_rows_round_trips(self, tmp_path):
        path = tmp_path / "empty.emb1"
        write_emb1(emb(Mode.MODE_3D, np.empty((0, 768), dtype=np.float32)), path)
        assert path.stat().st_size == HEADER_SIZE
        back = read_emb1(path)
        assert back.rows == 0 and back.dim == 768 and back.mode is Mode.MODE_3D

    def test_nan_payload_round_trips_verbatim(self, tmp_path):
        path = tmp_path / "nan.emb1"
        payload = np.array([[np.nan, 1.5]], dtype=np.float32)
        write_emb1(emb(Mode.RAW, payload), path)
        back = read_emb1(path)
        assert math.isnan(back.data[0, 0]) and back.data[0, 1] == 1.5


def write_raw(path, magic=b"EMB1", version=1, mode_tag=0, rows=2, dim=3,
              reserved=b"\x00" * 4, payload=None):
    if payload is None:
        payload = b"\x00" * (rows * dim * 4)
    header = struct.pack("<4sHHQI4s", magic, version, mode_tag, rows, dim, reserved)
    path.write_bytes(header + payload)


class TestEmb1Errors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, magic=b"XMB1")
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "BAD_MAGIC"
        assert "byte 0" in str(err.value)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, version=2)
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "BAD_VERSION"
        assert "byte 4" in str(err.value)

    def test_bad_mode_tag(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, mode_tag=9)
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "BAD_MODE_TAG"

    def test_reserved_nonzero(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, reserved=b"\x00\x01\x00\x00")
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "RESERVED_NONZERO"

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, rows=2, dim=3, payload=b"\x00" * 20)  # needs 24
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "TRUNCATED_PAYLOAD"
        assert "24" in str(err.value) and "20" in str(err.value)

    def test_oversized_payload(self, tmp_path):
        path = tmp_path / "x.emb1"
        write_raw(path, rows=1, dim=1, payload=b"\x00" * 8)
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "TRUNCATED_PAYLOAD"

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "x.emb1"
        path.write_bytes(b"EMB1\x01\x00")
        with pytest.raises(FormatError) as err:
            read_emb1(path)
        assert err.value.code == "TRUNCATED_HEADER"


class TestMetadata:
    def write(self, tmp_path, text):
        path = tmp_path / "meta.tsv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_minimal_table(self, tmp_path):
        records = read_metadata(self.write(tmp_path, "id\trole\nm1\tREFERENCE\n"))
        assert len(records) == 1
        assert records[0].id == "m1" and records[0].role is Role.REFERENCE

    def test_numeric_columns_land_in_map(self, tmp_path):
        path = self.write(
            tmp_path,
            "id\trole\trocs_comb\nm1\tCANDIDATE\t1.35\nm2\tCANDIDATE\t\n",
        )
        records = read_metadata(path)
        assert records[0].columns["rocs_comb"] == 1.35
        assert "rocs_comb" not in records[1].columns  # empty cell means absent

    def test_bad_role_enum(self, tmp_path):
        with pytest.raises(FormatError) as err:
            read_metadata(self.write(tmp_path, "id\trole\nm1\tQUERY\n"))
        assert err.value.code == "BAD_ENUM"

    def test_bad_activity_enum(self, tmp_path):
        with pytest.raises(FormatError) as err:
            read_metadata(
                self.write(tmp_path, "id\trole\tactivity\nm1\tCANDIDATE\tMAYBE\n")
            )
        assert err.value.code == "BAD_ENUM"

    def test_missing_required_column(self, tmp_path):
        with pytest.raises(FormatError) as err:
            read_metadata(self.write(tmp_path, "id\tsmiles\nm1\tCCO\n"))
        assert err.value.code == "MISSING_COLUMN"

    def test_bad_number_reports_row_and_column(self, tmp_path):
        with pytest.raises(FormatError) as err:
            read_metadata(
                self.write(tmp_path, "id\trole\tmw\nm1\tCANDIDATE\theavy\n")
            )
        assert err.value.code == "BAD_NUMBER"
        assert "mw" in str(err.value) and "0" in str(err.value)

    def test_crlf_line_endings(self, tmp_path):
        records = read_metadata(
            self.write(tmp_path, "id\trole\tsmiles\r\nm1\tCANDIDATE\tCCO\r\n")
        )
        assert records[0].smiles == "CCO"

    def test_scaffold_key_is_a_string_column(self, tmp_path):
        records = read_metadata(
            self.write(tmp_path, "id\trole\tscaffold_key\nm1\tCANDIDATE\tc1ccccc1\n")
        )
        assert records[0].scaffold_key == "c1ccccc1"


class TestMakeConcat:
    def test_three_four_five_normalization(self):
        out = make_concat(emb(Mode.MODE_2D, [[3.0, 4.0]]), emb(Mode.MODE_3D, [[0.0, 5.0]]))
        expected = np.array([[0.6, 0.8, 0.0, 1.0]], dtype=np.float32)
        assert out.mode is Mode.CONCAT
        assert np.allclose(out.data, expected, atol=1e-7)

    def test_every_row_norm_is_sqrt2(self):
        rng = np.random.default_rng(3)
        a = emb(Mode.MODE_2D, rng.standard_normal((200, 17)))
        b = emb(Mode.MODE_3D, rng.standard_normal((200, 9)) * 50.0)
        out = make_concat(a, b)
        norms = np.linalg.norm(out.data.astype(np.float64), axis=1)
        assert np.abs(norms - math.sqrt(2.0)).max() < 1e-6

    def test_split_and_renormalize_reproduces_halves_exactly(self):
        rng = np.random.default_rng(4)
        a = emb(Mode.MODE_2D, rng.standard_normal((500, 12)) * 3.0)
        b = emb(Mode.MODE_3D, rng.standard_normal((500, 20)) * 0.02)
        out = make_concat(a, b)
        left, right = out.data[:, :12], out.data[:, 12:]
        assert np.array_equal(unit_rows(left).view(np.uint32), left.view(np.uint32))
        assert np.array_equal(unit_rows(right).view(np.uint32), right.view(np.uint32))
        assert np.array_equal(left.view(np.uint32), unit_rows(a.data).view(np.uint32))
        assert np.array_equal(right.view(np.uint32), unit_rows(b.data).view(np.uint32))

    def test_zero_norm_row_rejected(self):
        with pytest.raises(ComputeError) as err:
            make_concat(emb(Mode.MODE_2D, [[1.0, 0.0]]), emb(Mode.MODE_3D, [[0.0, 0.0]]))
        assert err.value.code == "ZERO_NORM_ROW"
        assert "second" in str(err.value)

    def test_row_count_mismatch(self):
        with pytest.raises(DataError) as err:
            make_concat(
                emb(Mode.MODE_2D, [[1.0], [2.0]]), emb(Mode.MODE_3D, [[1.0]])
            )
        assert err.value.code == "ROW_COUNT_MISMATCH"

    def test_unit_rows_idempotent_on_large_random_input(self):
        rng = np.random.default_rng(5)
        data = (rng.standard_normal((2000, 64)) * rng.uniform(1e-3, 1e3, (2000, 1))).astype(
            np.float32
        )
        once = unit_rows(data)
        twice = unit_rows(once)
        assert np.array_equal(once.view(np.uint32), twice.view(np.uint32))
