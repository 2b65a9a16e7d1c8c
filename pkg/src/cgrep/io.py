"""Volumes, masks, feature tables and run configuration.

File formats
------------
* NIfTI-1 single-file ``.nii``, little-endian, int16/uint8/float32 payloads.
  Anything else is rejected with a clear message.
* RAW3D: a JSON sidecar ``{"format": "raw3d", "dims", "spacing", "dtype",
  "data_file"}`` next to a flat little-endian, x-fastest binary payload.
  Used for bit-exact hand-crafted fixtures.
* ``features.csv``: header row with required ``patient_id``; reserved
  columns ``time_days``, ``event``, ``rep_label`` (numeric) and
  ``mgmt_status``, ``idh_status`` (categorical); every other column is a
  numeric feature.  Missing numeric cells are empty strings.
* Config files: flat ``key=value`` text whose keys mirror StudyConfig.

Volumes are stored in memory indexed ``[x, y, z]`` with x fastest on disk.
All loaded values are immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DataFormatError

# Segmentation label dictionary.  "Whole brain" voxels are the non-tumor
# brain tissue; the brain region as a whole is tumor + brain labels.
BACKGROUND = 0
EDEMA = 1
ENHANCING = 2
NECROSIS = 3
BRAIN = 4
KNOWN_LABELS = (BACKGROUND, EDEMA, ENHANCING, NECROSIS, BRAIN)
WHOLE_TUMOR = (EDEMA, ENHANCING, NECROSIS)
BRAIN_REGION = (EDEMA, ENHANCING, NECROSIS, BRAIN)

RESERVED_NUMERIC = ("time_days", "event", "rep_label")
RESERVED_CATEGORICAL = ("mgmt_status", "idh_status")

_NIFTI_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_NIFTI_CODES = {np.dtype(np.uint8): 2, np.dtype(np.int16): 4, np.dtype(np.float32): 16}
_RAW3D_DTYPES = {"uint8": np.uint8, "int16": np.int16, "int32": np.int32,
                 "float32": np.float32, "float64": np.float64}


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VoxelGrid:
    """3-D scalar intensity volume with per-axis voxel spacing in mm."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"volume must be 3-dimensional, got shape {data.shape}")
        if data.size == 0 or min(data.shape) < 1:
            raise ValueError("volume has an empty axis")
        if not np.isfinite(data).all():
            raise ValueError("volume contains non-finite intensities")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 3 positive reals, got {self.spacing}")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self):
        return self.data.shape

    @property
    def voxel_volume(self):
        return self.spacing[0] * self.spacing[1] * self.spacing[2]


@dataclass(frozen=True)
class RegionMask:
    """Integer-labelled segmentation aligned with a VoxelGrid."""

    labels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 3:
            raise ValueError(f"mask must be 3-dimensional, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise DataFormatError("mask payload contains non-integer labels")
            labels = labels.astype(np.int64)
        unknown = np.setdiff1d(np.unique(labels), KNOWN_LABELS)
        if unknown.size:
            raise DataFormatError(f"unknown mask labels {unknown.tolist()}; "
                                  f"known labels are {list(KNOWN_LABELS)}")
        spacing = tuple(float(s) for s in self.spacing)
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int64)))
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self):
        return self.labels.shape

    def region(self, label):
        """Boolean mask for a label or tuple of labels.

        BRAIN expands to tumor + brain tissue since the brain contains the
        tumor; pass a tuple for any other union.
        """
        if label == BRAIN:
            label = BRAIN_REGION
        if isinstance(label, (tuple, list, set, frozenset)):
            return np.isin(self.labels, list(label))
        return self.labels == label


@dataclass
class FeatureTable:
    """Patients x named numeric features, plus survival/label columns.

    Feature vectors are float64 with NaN marking an explicitly missing
    cell.  Categorical (molecular) columns are kept as strings and may be
    "indeterminate".
    """

    patient_ids: list[str]
    features: dict[str, np.ndarray] = field(default_factory=dict)
    time_days: np.ndarray | None = None
    event: np.ndarray | None = None
    rep_label: np.ndarray | None = None
    categoricals: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        ids = [str(p) for p in self.patient_ids]
        if len(set(ids)) != len(ids):
            seen, dupes = set(), set()
            for p in ids:
                (dupes if p in seen else seen).add(p)
            raise DataFormatError(f"duplicate patient_id values: {sorted(dupes)}")
        self.patient_ids = ids
        n = len(ids)
        cleaned = {}
        for name, col in self.features.items():
            col = np.asarray(col, dtype=np.float64)
            if col.shape != (n,):
                raise DataFormatError(f"column {name!r} has length {col.shape}, expected {n}")
            if np.isinf(col).any():
                raise DataFormatError(f"column {name!r} contains infinite values")
            cleaned[name] = col
        self.features = cleaned
        for name in ("time_days", "event", "rep_label"):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=np.float64)
            if col.shape != (n,):
                raise DataFormatError(f"column {name!r} has length {col.shape}, expected {n}")
            present = ~np.isnan(col)
            if name == "time_days" and np.any(col[present] <= 0):
                raise DataFormatError("time_days must be positive")
            if name in ("event", "rep_label") and not np.isin(col[present], (0, 1)).all():
                raise DataFormatError(f"{name} must be 0/1, got "
                                      f"{sorted(set(col[present]) - {0.0, 1.0})}")
            setattr(self, name, col)
        for name, col in self.categoricals.items():
            if len(col) != n:
                raise DataFormatError(f"column {name!r} has length {len(col)}, expected {n}")
            self.categoricals[name] = [str(v) for v in col]

    def __len__(self):
        return len(self.patient_ids)

    @property
    def feature_names(self):
        return list(self.features)

    def matrix(self, names=None):
        """Stack the named feature columns into an (n, k) float matrix."""
        names = self.feature_names if names is None else list(names)
        missing = [m for m in names if m not in self.features]
        if missing:
            raise KeyError(f"missing feature column(s): {missing}")
        return np.column_stack([self.features[m] for m in names]) if names else \
            np.empty((len(self), 0))

    def scaled_matrix(self, names=None):
        """Min-max scale each named column to [0, 1] (constant columns -> 0)."""
        x = self.matrix(names)
        lo, hi = np.nanmin(x, axis=0), np.nanmax(x, axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        return (x - lo) / span

    def survival_records(self):
        """Rows with observed time and event as a list of SurvivalRecord."""
        from .survival import SurvivalRecord

        if self.time_days is None or self.event is None:
            raise DataFormatError("table has no time_days/event columns")
        records = []
        for i, pid in enumerate(self.patient_ids):
            t, d = self.time_days[i], self.event[i]
            if np.isnan(t) or np.isnan(d):
                continue
            records.append(SurvivalRecord(pid, float(t), int(d)))
        return records


# ---------------------------------------------------------------------------
# Volume / mask files

def _read_nifti(path: Path):
    raw = path.read_bytes()
    if len(raw) < 352:
        raise DataFormatError(f"{path}: truncated NIfTI header")
    hdr = raw[:348]
    if hdr[344:348] not in (b"n+1\x00", b"ni1\x00"):
        raise DataFormatError(f"{path}: missing NIfTI magic")
    sizeof_hdr = struct.unpack("<i", hdr[0:4])[0]
    if sizeof_hdr != 348:
        raise DataFormatError(f"{path}: not little-endian NIfTI-1 "
                              "(only little-endian files are supported)")
    dim = struct.unpack("<8h", hdr[40:56])
    datatype, bitpix = struct.unpack("<2h", hdr[70:74])
    pixdim = struct.unpack("<8f", hdr[76:108])
    vox_offset = struct.unpack("<f", hdr[108:112])[0]
    scl_slope, scl_inter = struct.unpack("<2f", hdr[112:120])
    if dim[0] not in (3, 4) or (dim[0] == 4 and dim[4] != 1):
        raise DataFormatError(f"{path}: expected a 3-D volume, got dim={dim}")
    dims = tuple(int(d) for d in dim[1:4])
    if min(dims) < 1:
        raise DataFormatError(f"{path}: non-positive dims {dims}")
    if datatype not in _NIFTI_DTYPES:
        raise DataFormatError(f"{path}: unsupported NIfTI datatype code {datatype}; "
                              "supported: uint8 (2), int16 (4), float32 (16)")
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder("<")
    if bitpix != dtype.itemsize * 8:
        raise DataFormatError(f"{path}: bitpix {bitpix} inconsistent with datatype")
    spacing = tuple(float(abs(p)) if p else 1.0 for p in pixdim[1:4])
    offset = int(vox_offset) if vox_offset else 352
    payload = raw[offset:]
    count = dims[0] * dims[1] * dims[2]
    if len(payload) < count * dtype.itemsize:
        raise DataFormatError(
            f"{path}: header dims {dims} imply {count} voxels but payload holds "
            f"{len(payload) // dtype.itemsize}")
    data = np.frombuffer(payload, dtype=dtype, count=count).reshape(dims, order="F")
    data = data.astype(np.float64)
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        data = data * slope + scl_inter
    return data, spacing


def _write_nifti(path: Path, data: np.ndarray, spacing, dtype):
    dtype = np.dtype(dtype)
    if dtype not in _NIFTI_CODES:
        raise DataFormatError(f"unsupported NIfTI write dtype {dtype}; "
                              "supported: uint8, int16, float32")
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, _NIFTI_CODES[dtype], dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)
    hdr[344:348] = b"n+1\x00"
    payload = np.asfortranarray(data.astype(dtype)).tobytes(order="F")
    path.write_bytes(bytes(hdr) + b"\x00" * 4 + payload)


def _read_raw3d(path: Path):
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid RAW3D sidecar: {exc}") from exc
    for key in ("dims", "spacing", "dtype", "data_file"):
        if key not in meta:
            raise DataFormatError(f"{path}: RAW3D sidecar missing {key!r}")
    dims = tuple(int(d) for d in meta["dims"])
    if len(dims) != 3 or min(dims) < 1:
        raise DataFormatError(f"{path}: bad dims {meta['dims']}")
    if meta["dtype"] not in _RAW3D_DTYPES:
        raise DataFormatError(f"{path}: unsupported dtype {meta['dtype']!r}")
    dtype = np.dtype(_RAW3D_DTYPES[meta["dtype"]]).newbyteorder("<")
    payload = (path.parent / meta["data_file"]).read_bytes()
    count = dims[0] * dims[1] * dims[2]
    if len(payload) != count * dtype.itemsize:
        raise DataFormatError(f"{path}: dims {dims} imply {count} voxels but payload holds "
                              f"{len(payload) // dtype.itemsize}")
    data = np.frombuffer(payload, dtype=dtype, count=count).reshape(dims, order="F")
    spacing = tuple(float(s) for s in meta["spacing"])
    return data.astype(np.float64), spacing


def _write_raw3d(path: Path, data: np.ndarray, spacing, dtype):
    dtype = np.dtype(dtype)
    name = dtype.name
    if name not in _RAW3D_DTYPES:
        raise DataFormatError(f"unsupported RAW3D dtype {name}")
    bin_name = path.stem + ".bin"
    meta = {"format": "raw3d", "dims": list(data.shape),
            "spacing": [float(s) for s in spacing],
            "dtype": name, "data_file": bin_name}
    path.write_text(json.dumps(meta, sort_keys=True) + "\n")
    arr = data.astype(dtype.newbyteorder("<"))
    (path.parent / bin_name).write_bytes(np.asfortranarray(arr).tobytes(order="F"))


def _is_raw3d(path: Path):
    return path.suffix.lower() in (".json", ".raw3d")


def load_volume(path) -> VoxelGrid:
    """Load a VoxelGrid from a NIfTI-1 ``.nii`` or RAW3D sidecar file."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    if _is_raw3d(path):
        data, spacing = _read_raw3d(path)
    elif path.suffix.lower() == ".nii":
        data, spacing = _read_nifti(path)
    else:
        raise DataFormatError(f"{path}: unsupported volume format "
                              "(expected .nii or a RAW3D .json sidecar)")
    if not np.isfinite(data).all():
        raise DataFormatError(f"{path}: volume contains non-finite intensities")
    return VoxelGrid(data, spacing)


def write_volume(grid: VoxelGrid, path, dtype=np.float64):
    """Write a VoxelGrid; format chosen by extension (.nii or RAW3D .json)."""
    path = Path(path)
    if _is_raw3d(path):
        _write_raw3d(path, grid.data, grid.spacing, dtype)
    elif path.suffix.lower() == ".nii":
        if np.dtype(dtype) == np.float64:
            dtype = np.float32
        _write_nifti(path, grid.data, grid.spacing, dtype)
    else:
        raise DataFormatError(f"{path}: unsupported volume format")
    return path


def load_mask(path, grid: VoxelGrid | None = None) -> RegionMask:
    """Load a RegionMask, checking alignment against `grid` when given."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    if _is_raw3d(path):
        data, spacing = _read_raw3d(path)
    elif path.suffix.lower() == ".nii":
        data, spacing = _read_nifti(path)
    else:
        raise DataFormatError(f"{path}: unsupported mask format")
    if not np.all(data == np.round(data)):
        raise DataFormatError(f"{path}: mask payload is not integer-valued")
    mask = RegionMask(data.astype(np.int64), spacing)
    if grid is not None and mask.dims != grid.dims:
        raise DataFormatError(f"{path}: mask dims {mask.dims} do not match "
                              f"volume dims {grid.dims}")
    return mask


def write_mask(mask: RegionMask, path, dtype=np.uint8):
    path = Path(path)
    if _is_raw3d(path):
        _write_raw3d(path, mask.labels, mask.spacing, dtype)
    elif path.suffix.lower() == ".nii":
        _write_nifti(path, mask.labels, mask.spacing, dtype)
    else:
        raise DataFormatError(f"{path}: unsupported mask format")
    return path


# ---------------------------------------------------------------------------
# features.csv

def _format_number(v) -> str:
    if np.isnan(v):
        return ""
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def load_feature_table(path) -> FeatureTable:
    """Load features.csv; see module docstring for the schema."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        rows = list(reader)
    if "patient_id" not in header:
        raise DataFormatError(f"{path}: missing required column patient_id")
    if len(set(header)) != len(header):
        raise DataFormatError(f"{path}: duplicate column names")
    ncol = len(header)
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise DataFormatError(f"{path}: row {i + 2} has {len(row)} cells, "
                                  f"expected {ncol}")
    cols = {name: [row[j] for row in rows] for j, name in enumerate(header)}
    ids = cols.pop("patient_id")
    features, reserved, cats = {}, {}, {}
    for name, raw in cols.items():
        if name in RESERVED_CATEGORICAL:
            cats[name] = raw
            continue
        vals = np.empty(len(raw))
        for i, cell in enumerate(raw):
            if cell == "":
                vals[i] = np.nan
                continue
            try:
                vals[i] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric value {cell!r} in numeric column "
                    f"{name!r} (row {i + 2})") from None
        if name in RESERVED_NUMERIC:
            reserved[name] = vals
        else:
            features[name] = vals
    return FeatureTable(ids, features, categoricals=cats, **reserved)


def write_feature_table(table: FeatureTable, path):
    """Write features.csv with LF endings and round-trip-exact numbers."""
    path = Path(path)
    header = (["patient_id"] + table.feature_names
              + [c for c in RESERVED_NUMERIC if getattr(table, c) is not None]
              + list(table.categoricals))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, pid in enumerate(table.patient_ids):
            row = [pid]
            row += [_format_number(table.features[n][i]) for n in table.feature_names]
            row += [_format_number(getattr(table, c)[i])
                    for c in RESERVED_NUMERIC if getattr(table, c) is not None]
            row += [table.categoricals[c][i] for c in table.categoricals]
            writer.writerow(row)
    return path


# ---------------------------------------------------------------------------
# Run configuration

def _canonical_directions():
    """The 13 canonical 3-D directions (one per +/- pair), lexicographic."""
    dirs = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if (dx, dy, dz) == (0, 0, 0):
                    continue
                if (dx, dy, dz) < (0, 0, 0):
                    continue
                dirs.append((dx, dy, dz))
    return sorted(dirs)


DIRECTIONS_13 = tuple(_canonical_directions())


def direction_table(displacements=(1, 2, 3)):
    """Indexed offset table: displacement-major over the 13 directions.

    Index k (1-based) maps to displacements[(k-1)//13] times the
    ((k-1)%13)-th canonical direction; the default table is indexed 1..39.
    """
    return tuple((d[0] * m, d[1] * m, d[2] * m)
                 for m in displacements for d in DIRECTIONS_13)


@dataclass
class StudyConfig:
    """All tunables of the pipelines; file keys mirror the field names."""

    seed: int = 42
    iterations: int = 1000
    folds: int = 5
    levels: int = 32
    displacements: tuple[int, ...] = (1, 2, 3)
    f1_threshold: float = 0.6
    survival_f1_threshold: float = 0.7
    alpha_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0,
                                     6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0)
    permutations: int = 1000
    window: int = 11
    scales: tuple[int, ...] = (1, 2, 4)
    majority_size: int | None = None
    p_threshold: float = 0.05

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.permutations < 1:
            raise ValueError("permutations must be >= 1")
        self.displacements = tuple(int(d) for d in self.displacements)
        self.scales = tuple(int(s) for s in self.scales)
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)

    @property
    def offsets(self):
        return direction_table(self.displacements)


_INT_FIELDS = {"seed", "iterations", "folds", "levels", "permutations",
               "window", "majority_size"}
_TUPLE_FIELDS = {"displacements", "scales", "alpha_grid"}


def load_config(path) -> StudyConfig:
    """Parse a flat key=value config file into a StudyConfig."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    known = {f.name for f in fields(StudyConfig)}
    kwargs = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise DataFormatError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if key in _TUPLE_FIELDS:
                parts = [p for p in value.split(",") if p.strip()]
                conv = int if key != "alpha_grid" else float
                kwargs[key] = tuple(conv(p) for p in parts)
            elif key in _INT_FIELDS:
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad value for {key}") from None
    return StudyConfig(**kwargs)


def write_config(config: StudyConfig, path):
    lines = []
    for f in fields(StudyConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(_format_number(v) for v in value)
        lines.append(f"{f.name}={value}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
