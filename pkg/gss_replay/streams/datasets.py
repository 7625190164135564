"""
Dataset ingestion: the bundled 8x8 digits, CSV files and IDX (MNIST) files.

Features are normalized to [0, 1]. CSV and IDX inputs carry raw values on
the 0..255 scale and are divided by 255.
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
import polars as pl
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split
from upath import UPath

from ..errors import ConfigError, DataError, ParseError
from ..log import get_logger
from ..model import Example

logger = get_logger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

PIXEL_MAX = 255.0
DIGITS_MAX = 16.0
TEST_FRACTION = 0.2
SPLIT_SEED = 0
GZIP_MAGIC = b"\x1f\x8b"

# IDX type codes -> big-endian numpy dtypes
IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

BUNDLED = ("digits", "mnist")

PathLike = Union[str, Path, UPath]


@dataclass(frozen=True)
class Dataset:
    """Train/test arrays of a classification dataset with features in [0, 1]."""

    name: str
    train_features: FloatArray
    train_labels: IntArray
    test_features: FloatArray
    test_labels: IntArray
    n_classes: int

    def __post_init__(self):
        for split, features, labels in (
            ("train", self.train_features, self.train_labels),
            ("test", self.test_features, self.test_labels),
        ):
            if features.ndim != 2 or features.shape[0] != labels.shape[0]:
                raise DataError(
                    f"{self.name} {split}: {features.shape} features for {labels.shape[0]} labels"
                )
            if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
                raise DataError(f"{self.name} {split}: labels outside [0, {self.n_classes})")
            if features.size and (features.min() < 0.0 or features.max() > 1.0):
                raise DataError(f"{self.name} {split}: features outside [0, 1]")
        if self.train_features.shape[1] != self.test_features.shape[1]:
            raise DataError(f"{self.name}: train and test feature widths differ")

    @property
    def input_dim(self) -> int:
        return self.train_features.shape[1]

    @cached_property
    def train(self) -> tuple[Example, ...]:
        return _to_examples(self.train_features, self.train_labels)

    @cached_property
    def test(self) -> tuple[Example, ...]:
        return _to_examples(self.test_features, self.test_labels)


def _to_examples(features: FloatArray, labels: IntArray) -> tuple[Example, ...]:
    return tuple(Example(features[i], int(labels[i])) for i in range(labels.shape[0]))


def _split(name: str, features: FloatArray, labels: IntArray, n_classes: int) -> Dataset:
    """Deterministic stratified 80/20 train/test split."""
    counts = np.bincount(labels)
    stratify = labels if counts[counts > 0].min() >= 2 else None
    train_x, test_x, train_y, test_y = train_test_split(
        features, labels, test_size=TEST_FRACTION, random_state=SPLIT_SEED, stratify=stratify,
    )
    return Dataset(name, train_x, train_y, test_x, test_y, n_classes)


def load_digits_dataset() -> Dataset:
    """The bundled 8x8 handwritten digits (1797 images, 64 features, 10 classes)."""
    bunch = load_digits()
    features = bunch.data.astype(np.float64) / DIGITS_MAX
    labels = bunch.target.astype(np.int64)
    return _split("digits", features, labels, 10)


# CSV ------------------------------------------------------------------------


def _first_field_is_numeric(path: PathLike) -> bool:
    with UPath(path).open("r") as handle:
        first = handle.readline().split(",", 1)[0].strip()
    try:
        float(first)
        return True
    except ValueError:
        return False


def read_csv_examples(path: PathLike) -> tuple[FloatArray, IntArray]:
    """Read ``label, f1, f2, ...`` rows with raw 0..255 features.

    A header row is allowed. Row numbers in errors are 1-based data rows.
    """
    path = UPath(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file '{path}' not found")
    has_header = not _first_field_is_numeric(path)
    try:
        with path.open("rb") as handle:
            raw = pl.read_csv(handle, has_header=has_header, infer_schema_length=0)
    except pl.exceptions.PolarsError as e:
        raise ParseError(f"Malformed CSV {path}: {e}", 0) from e
    if raw.width < 2:
        raise ParseError(f"CSV {path} needs a label and at least one feature column", 0)

    values = raw.select(pl.all().str.strip_chars().cast(pl.Float64, strict=False))
    bad_rows = values.with_row_index("row").filter(pl.any_horizontal(pl.all().exclude("row").is_null()))
    if bad_rows.height:
        raise ParseError(f"Non-numeric field in {path}", int(bad_rows["row"][0]) + 1)

    matrix = values.to_numpy()
    labels = matrix[:, 0]
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        row = int(np.flatnonzero((labels != np.round(labels)) | (labels < 0))[0]) + 1
        raise ParseError(f"Label is not a nonnegative integer in {path}", row)
    features = matrix[:, 1:]
    out_of_range = (features < 0.0) | (features > PIXEL_MAX)
    if out_of_range.any():
        row = int(np.flatnonzero(out_of_range.any(axis=1))[0]) + 1
        raise DataError(f"Feature outside [0, 255] in {path} at row {row}")
    return features / PIXEL_MAX, labels.astype(np.int64)


def _scale_for_export(features: FloatArray) -> FloatArray:
    scaled = np.asarray(features, dtype=np.float64) * PIXEL_MAX
    snapped = np.rint(scaled)
    # values that came from integer pixels go back out as integers
    return np.where(np.abs(scaled - snapped) < 1e-9, snapped, scaled)


def export_csv(examples: Sequence[Example], path: PathLike) -> UPath:
    """Write examples in the CSV layout read by ``read_csv_examples``."""
    path = UPath(path)
    if not examples:
        raise DataError("Nothing to export")
    features = _scale_for_export(np.stack([e.features for e in examples]))
    frame = pl.DataFrame(
        {"label": [e.label for e in examples]}
        | {f"x{j}": features[:, j] for j in range(features.shape[1])}
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as handle:
        handle.write(frame.write_csv())
    return path


def export_dataset(dataset: Dataset, path: PathLike) -> tuple[UPath, UPath]:
    """Write train examples to ``path`` and test examples to its ``.test.csv`` sibling."""
    path = UPath(path)
    return export_csv(dataset.train, path), export_csv(dataset.test, _test_sibling(path))


def _test_sibling(path: UPath) -> UPath:
    return path.with_name(f"{path.stem}.test{path.suffix}")


def load_csv_dataset(path: PathLike) -> Dataset:
    """A CSV of training rows; test rows come from a ``.test.csv`` sibling or an 80/20 split."""
    path = UPath(path)
    features, labels = read_csv_examples(path)
    sibling = _test_sibling(path)
    if sibling.exists():
        test_features, test_labels = read_csv_examples(sibling)
        n_classes = int(max(labels.max(), test_labels.max())) + 1
        return Dataset(path.stem, features, labels, test_features, test_labels, n_classes)
    return _split(path.stem, features, labels, int(labels.max()) + 1)


# IDX ------------------------------------------------------------------------


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX buffer: 2 zero bytes, type code, rank, big-endian u32 dims, payload."""
    if len(data) < 4:
        raise ParseError("IDX header truncated", len(data))
    if data[0] != 0 or data[1] != 0:
        raise ParseError("IDX magic must start with two zero bytes", 0)
    dtype = IDX_DTYPES.get(data[2])
    if dtype is None:
        raise ParseError(f"Unknown IDX type code 0x{data[2]:02x}", 2)
    ndim = data[3]
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise ParseError(f"IDX header declares {ndim} dimensions but is truncated", len(data))
    dims = tuple(int(d) for d in np.frombuffer(data, dtype=">u4", count=ndim, offset=4))
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = len(data) - header_end
    if payload != expected:
        raise ParseError(
            f"IDX payload has {payload} bytes, dims {dims} need {expected}",
            header_end + min(payload, expected),
        )
    return np.frombuffer(data, dtype=dtype, offset=header_end).reshape(dims)


def read_idx(path: PathLike) -> np.ndarray:
    """Read an IDX file, transparently gunzipping ``.gz`` content."""
    with UPath(path).open("rb") as handle:
        data = handle.read()
    if data[:2] == GZIP_MAGIC:
        data = gzip.decompress(data)
    return parse_idx(data)


def load_idx_pair(images_path: PathLike, labels_path: PathLike) -> tuple[FloatArray, IntArray]:
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but labels of shape {labels.shape}")
    features = images.reshape(images.shape[0], -1).astype(np.float64)
    if features.size and (features.min() < 0.0 or features.max() > PIXEL_MAX):
        raise DataError(f"Pixel values outside [0, 255] in {images_path}")
    return features / PIXEL_MAX, labels.astype(np.int64)


def _find_idx(directory: UPath, stem: str) -> UPath:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"Missing {stem}[.gz] in {directory}")


def load_idx_directory(directory: PathLike) -> Dataset:
    """Load a directory holding the four MNIST IDX files (gzipped or not)."""
    directory = UPath(directory)
    paths = {key: _find_idx(directory, stem) for key, stem in MNIST_FILES.items()}
    train_x, train_y = load_idx_pair(paths["train_images"], paths["train_labels"])
    test_x, test_y = load_idx_pair(paths["test_images"], paths["test_labels"])
    n_classes = int(max(train_y.max(), test_y.max())) + 1
    return Dataset(directory.name or "idx", train_x, train_y, test_x, test_y, n_classes)


def load_dataset(source: Union[PathLike, tuple[PathLike, PathLike]], data_directory: Optional[PathLike] = None) -> Dataset:
    """Resolve a dataset source.

    ``digits`` is the bundled 8x8 set; ``mnist`` reads the MNIST cache under
    the data directory; a ``.csv`` path reads a CSV dataset; a directory reads
    the MNIST IDX files in it; an (images, labels) pair of IDX files is split
    80/20.
    """
    if isinstance(source, tuple):
        features, labels = load_idx_pair(*source)
        return _split(UPath(source[0]).stem, features, labels, int(labels.max()) + 1)

    name = str(source)
    if name == "digits":
        dataset = load_digits_dataset()
    elif name == "mnist":
        from ..config import settings

        base = UPath(data_directory) if data_directory is not None else settings.data_directory
        dataset = load_idx_directory(base / "mnist")
    else:
        path = UPath(source)
        if path.is_dir():
            dataset = load_idx_directory(path)
        elif path.suffix == ".csv":
            dataset = load_csv_dataset(path)
        elif path.exists():
            raise ConfigError(f"Unsupported dataset file '{path}'", ["*.csv", "<idx directory>", *BUNDLED])
        else:
            raise ConfigError(f"Unknown dataset '{name}'", ["*.csv", "<idx directory>", *BUNDLED])

    logger.debug(
        "Loaded dataset",
        dataset=dataset.name,
        train=dataset.train_labels.shape[0],
        test=dataset.test_labels.shape[0],
        input_dim=dataset.input_dim,
        n_classes=dataset.n_classes,
    )
    return dataset
