import gzip
import struct

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from app.data_io.datasets import Dataset, split, synthetic_blobs
from app.data_io.idx import IMAGES_MAGIC, LABELS_MAGIC, load_idx, write_idx
from app.errors import DatasetFormatError, EmptyDatasetError, ShapeMismatchError


def write_pair(tmp_path, images, labels, image_magic=IMAGES_MAGIC, label_count=None):
    n, rows, cols = images.shape
    image_file = tmp_path / "images.idx"
    label_file = tmp_path / "labels.idx"
    image_file.write_bytes(struct.pack(">IIII", image_magic, n, rows, cols) + images.astype(np.uint8).tobytes())
    count = n if label_count is None else label_count
    label_file.write_bytes(struct.pack(">II", LABELS_MAGIC, count) + labels.astype(np.uint8).tobytes())
    return image_file, label_file


def test_load_idx_scales_pixels(tmp_path):
    images = np.array([[[0, 255], [51, 102]], [[255, 0], [0, 0]]])
    paths = write_pair(tmp_path, images, np.array([3, 7]))
    ds = load_idx(*paths)
    assert ds.sample_shape == (2, 2)
    assert ds.labels.tolist() == [3, 7]
    np.testing.assert_allclose(ds.inputs[0], [[0.0, 1.0], [0.2, 0.4]])


def test_bad_magic(tmp_path):
    paths = write_pair(tmp_path, np.zeros((1, 2, 2)), np.array([0]), image_magic=0x0803)
    with pytest.raises(DatasetFormatError, match="bad magic"):
        load_idx(*paths)


def test_truncated_payload(tmp_path):
    image_file, label_file = write_pair(tmp_path, np.zeros((2, 3, 3)), np.array([0, 1]))
    image_file.write_bytes(image_file.read_bytes()[:-1])
    with pytest.raises(DatasetFormatError, match="truncated"):
        load_idx(image_file, label_file)


def test_count_mismatch(tmp_path):
    paths = write_pair(tmp_path, np.zeros((2, 2, 2)), np.array([0, 1, 1]), label_count=3)
    with pytest.raises(DatasetFormatError, match="count mismatch"):
        load_idx(*paths)


def test_label_out_of_range(tmp_path):
    paths = write_pair(tmp_path, np.zeros((1, 2, 2)), np.array([10]))
    with pytest.raises(DatasetFormatError):
        load_idx(*paths, num_classes=10)


def test_write_idx_gzip(tmp_path):
    pixels = np.array([[[0, 255]], [[51, 153]]], dtype=np.uint8)
    ds = Dataset(pixels.astype(np.float64) / 255.0, np.array([1, 0]), 2)
    images, labels = tmp_path / "x.idx.gz", tmp_path / "y.idx.gz"
    write_idx(ds, images, labels)
    raw = gzip.decompress(images.read_bytes())
    assert struct.unpack(">I", raw[:4])[0] == IMAGES_MAGIC
    assert raw[16:] == pixels.tobytes()
    loaded = load_idx(images, labels, num_classes=2)
    np.testing.assert_array_equal(loaded.inputs, ds.inputs)
    assert loaded.labels.tolist() == [1, 0]


def test_split_sizes_and_disjointness():
    ds = synthetic_blobs(seed=1, n=100, classes=4, dim=3, spread=0.1)
    train, val = split(ds, 0.1, seed=5)
    assert (len(train), len(val)) == (90, 10)
    rows = {tuple(r) for r in train.inputs} | {tuple(r) for r in val.inputs}
    assert len(rows) == 100


def test_split_is_seeded(blobs):
    a, _ = split(blobs, 0.2, seed=3)
    b, _ = split(blobs, 0.2, seed=3)
    c, _ = split(blobs, 0.2, seed=4)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, c.inputs)


def test_split_rejects_bad_input(blobs):
    with pytest.raises(ValueError):
        split(blobs, 1.0, seed=1)
    empty = Dataset(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 2)
    with pytest.raises(EmptyDatasetError):
        split(empty, 0.5, seed=1)


def test_blobs_are_bounded_and_cover_every_class():
    ds = synthetic_blobs(seed=2, n=60, classes=5, dim=4, spread=0.5)
    assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
    assert np.bincount(ds.labels).tolist() == [12] * 5


def test_blobs_without_spread_are_linearly_separable():
    ds = synthetic_blobs(seed=3, n=90, classes=3, dim=5, spread=0.0)
    clf = LogisticRegression(C=1e4, max_iter=2000).fit(ds.inputs, ds.labels)
    assert clf.score(ds.inputs, ds.labels) == 1.0


def test_dataset_validation():
    with pytest.raises(ShapeMismatchError):
        Dataset(np.zeros((3, 2)), np.zeros(2, dtype=np.int64), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 2)), np.array([2]), 2)
    ds = Dataset(np.zeros((2, 4)), np.zeros(2, dtype=np.int64), 2)
    assert ds.reshaped((1, 2, 2)).sample_shape == (1, 2, 2)
    with pytest.raises(ShapeMismatchError):
        ds.reshaped((3,))
