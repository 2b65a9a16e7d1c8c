import json
import struct

import numpy as np
import pytest

from cgrep import (FeatureTable, RegionMask, StudyConfig, VoxelGrid,
                   load_feature_table, load_mask, load_volume,
                   write_feature_table, write_mask, write_volume)
from cgrep.errors import DataFormatError
from cgrep.io import DIRECTIONS_13, direction_table, load_config, write_config


class TestRaw3d:
    def test_constant_cube_roundtrip(self, tmp_path):
        grid = VoxelGrid(np.full((2, 2, 2), 7.0))
        path = write_volume(grid, tmp_path / "v.json")
        back = load_volume(path)
        assert back.dims == (2, 2, 2)
        assert np.array_equal(back.data, grid.data)

    def test_arbitrary_float_roundtrip_bit_exact(self, tmp_path, rng):
        grid = VoxelGrid(rng.normal(size=(3, 4, 5)), spacing=(1.0, 1.5, 2.25))
        back = load_volume(write_volume(grid, tmp_path / "v.json"))
        assert np.array_equal(back.data, grid.data)
        assert back.spacing == grid.spacing

    def test_payload_size_mismatch(self, tmp_path):
        grid = VoxelGrid(np.zeros((4, 4, 4)))
        path = write_volume(grid, tmp_path / "v.json")
        payload = (tmp_path / "v.bin").read_bytes()
        (tmp_path / "v.bin").write_bytes(payload[: 60 * 8])
        with pytest.raises(DataFormatError, match="64 voxels"):
            load_volume(path)

    def test_unsupported_dtype_rejected(self, tmp_path):
        meta = {"format": "raw3d", "dims": [1, 1, 1], "spacing": [1, 1, 1],
                "dtype": "complex128", "data_file": "v.bin"}
        (tmp_path / "v.json").write_text(json.dumps(meta))
        (tmp_path / "v.bin").write_bytes(b"\x00" * 16)
        with pytest.raises(DataFormatError, match="unsupported dtype"):
            load_volume(tmp_path / "v.json")

    def test_loading_is_pure(self, tmp_path):
        grid = VoxelGrid(np.arange(8.0).reshape(2, 2, 2))
        path = write_volume(grid, tmp_path / "v.json")
        a = load_volume(path)
        b = load_volume(path)
        assert np.array_equal(a.data, b.data)
        with pytest.raises(ValueError):
            a.data[0, 0, 0] = 99.0  # loaded values are immutable


class TestNifti:
    def test_roundtrip_float32(self, tmp_path, rng):
        data = rng.normal(size=(5, 6, 7)).astype(np.float32).astype(np.float64)
        grid = VoxelGrid(data, spacing=(1.0, 2.0, 3.0))
        back = load_volume(write_volume(grid, tmp_path / "v.nii"))
        assert np.array_equal(back.data, data)
        assert back.spacing == (1.0, 2.0, 3.0)

    def test_roundtrip_int16(self, tmp_path, rng):
        data = rng.integers(-500, 500, size=(4, 4, 4)).astype(np.float64)
        grid = VoxelGrid(data)
        back = load_volume(write_volume(grid, tmp_path / "v.nii", dtype=np.int16))
        assert np.array_equal(back.data, data)

    def test_truncated_payload_rejected(self, tmp_path):
        grid = VoxelGrid(np.zeros((4, 4, 4)))
        path = write_volume(grid, tmp_path / "v.nii")
        raw = path.read_bytes()
        path.write_bytes(raw[: 352 + 60 * 4])
        with pytest.raises(DataFormatError, match="payload"):
            load_volume(path)

    def test_unsupported_datatype_code(self, tmp_path):
        grid = VoxelGrid(np.zeros((2, 2, 2)))
        path = write_volume(grid, tmp_path / "v.nii")
        raw = bytearray(path.read_bytes())
        struct.pack_into("<h", raw, 70, 64)  # float64 code: unsupported
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="datatype"):
            load_volume(path)

    def test_bad_magic(self, tmp_path):
        grid = VoxelGrid(np.zeros((2, 2, 2)))
        path = write_volume(grid, tmp_path / "v.nii")
        raw = bytearray(path.read_bytes())
        raw[344:348] = b"xxxx"
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="magic"):
            load_volume(path)


class TestMask:
    def test_roundtrip_and_alignment(self, tmp_path):
        labels = np.zeros((3, 3, 3), dtype=np.int64)
        labels[1, 1, 1] = 2
        labels[0, :, :] = 1
        labels[2, 2, 2] = 3
        mask = RegionMask(labels)
        grid = VoxelGrid(np.zeros((3, 3, 3)))
        back = load_mask(write_mask(mask, tmp_path / "m.json"), grid)
        assert np.array_equal(back.labels, labels)

    def test_dims_mismatch(self, tmp_path):
        mask = RegionMask(np.zeros((3, 3, 3), dtype=np.int64))
        path = write_mask(mask, tmp_path / "m.json")
        grid = VoxelGrid(np.zeros((4, 4, 4)))
        with pytest.raises(DataFormatError, match="do not match"):
            load_mask(path, grid)

    def test_unknown_label(self, tmp_path):
        labels = np.zeros((2, 2, 2), dtype=np.int64)
        labels[0, 0, 0] = 9
        grid = VoxelGrid(labels.astype(np.float64))
        path = write_volume(grid, tmp_path / "m.json")
        with pytest.raises(DataFormatError, match="unknown mask labels"):
            load_mask(path)

    def test_brain_region_includes_tumor(self):
        labels = np.zeros((2, 2, 2), dtype=np.int64)
        labels[0, 0, 0] = 1
        labels[1, 1, 1] = 4
        mask = RegionMask(labels)
        assert mask.region(4).sum() == 2
        assert mask.region((1, 2, 3)).sum() == 1


class TestFeatureTable:
    def test_small_roundtrip(self, tmp_path):
        table = FeatureTable(["P1", "P2", "P3"],
                             {"f1": [0.25, np.nan, -3.5]},
                             time_days=[10.0, 20.0, 30.0],
                             event=[1, 0, 1])
        path = write_feature_table(table, tmp_path / "features.csv")
        back = load_feature_table(path)
        assert back.patient_ids == ["P1", "P2", "P3"]
        assert back.feature_names == ["f1"]
        assert np.array_equal(back.features["f1"], table.features["f1"],
                              equal_nan=True)
        assert np.array_equal(back.time_days, table.time_days)
        # write again: byte-identical
        path2 = write_feature_table(back, tmp_path / "features2.csv")
        assert path.read_bytes() == path2.read_bytes()

    def test_duplicate_patient_id(self, tmp_path):
        p = tmp_path / "dup.csv"
        p.write_text("patient_id,f1\nP1,1\nP1,2\n")
        with pytest.raises(DataFormatError, match="duplicate patient_id"):
            load_feature_table(p)

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("patient_id,f1\nP1,abc\n")
        with pytest.raises(DataFormatError, match="non-numeric"):
            load_feature_table(p)

    def test_event_domain(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("patient_id,f1,event\nP1,1.0,2\n")
        with pytest.raises(DataFormatError, match="event must be 0/1"):
            load_feature_table(p)

    def test_ragged_rows(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("patient_id,f1,f2\nP1,1.0\n")
        with pytest.raises(DataFormatError, match="row 2"):
            load_feature_table(p)

    def test_categoricals_kept_as_strings(self, tmp_path):
        table = FeatureTable(["P1", "P2"], {"f1": [1.0, 2.0]},
                             categoricals={"mgmt_status":
                                           ["Hypermethylated", "indeterminate"]})
        back = load_feature_table(write_feature_table(table, tmp_path / "t.csv"))
        assert back.categoricals["mgmt_status"] == ["Hypermethylated",
                                                    "indeterminate"]

    def test_scaled_matrix_range(self, rng):
        table = FeatureTable([f"P{i}" for i in range(10)],
                             {"a": rng.normal(size=10), "b": np.full(10, 3.0)})
        scaled = table.scaled_matrix()
        assert scaled[:, 0].min() == 0.0 and scaled[:, 0].max() == 1.0
        assert np.all(scaled[:, 1] == 0.0)


class TestConfig:
    def test_roundtrip(self, tmp_path):
        config = StudyConfig(seed=7, iterations=50, folds=3, levels=16,
                             displacements=(1, 2), alpha_grid=(0.0, 1.0, 18.0))
        back = load_config(write_config(config, tmp_path / "run.cfg"))
        assert back == config

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("bogus=1\n")
        with pytest.raises(DataFormatError, match="unknown config key"):
            load_config(p)

    def test_invariants(self):
        with pytest.raises(ValueError):
            StudyConfig(folds=1)
        with pytest.raises(ValueError):
            StudyConfig(levels=1)
        with pytest.raises(ValueError):
            StudyConfig(iterations=0)

    def test_direction_table(self):
        assert len(DIRECTIONS_13) == 13
        offsets = direction_table((1, 2, 3))
        assert len(offsets) == 39
        assert len(set(offsets)) == 39
        # no offset is the negation of another (one representative per pair)
        assert all((-a, -b, -c) not in offsets for a, b, c in offsets)
        # displacement-major indexing: first 13 entries are unit steps
        assert all(max(map(abs, o)) == 1 for o in offsets[:13])
        assert all(max(map(abs, o)) == 2 for o in offsets[13:26])
