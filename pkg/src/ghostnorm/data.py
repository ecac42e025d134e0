"""MNIST IDX ingestion, train-fitted standardization, synthetic data and batching."""

import os
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, DegenerateDataError, FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    split: str = "train"
    standardization: tuple = None

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)


def read_idx(path, expected_magic=None):
    """Read an unsigned-byte IDX file into a ``uint8`` array shaped by its header."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise FormatError(f"{path}: file too short for an IDX magic number", offset=len(blob))
    (magic,) = struct.unpack(">I", blob[:4])
    if magic >> 8 != 0x08:
        raise FormatError(f"{path}: magic 0x{magic:08x} is not an unsigned-byte IDX file", offset=0)
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise FormatError(f"{path}: truncated dimension header", offset=len(blob))
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    payload = int(np.prod(dims, dtype=np.int64))
    if len(blob) - header != payload:
        raise FormatError(
            f"{path}: header announces {payload} payload bytes, found {len(blob) - header}",
            offset=header + min(payload, len(blob) - header),
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, array):
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise DataError("only unsigned-byte IDX files are supported")
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(array).tobytes())


def load_mnist_idx(images_path, labels_path, split="train"):
    """Load an MNIST image/label pair; pixels become flat float64 rows in [0, 1]."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.ndim != 3:
        raise FormatError(f"{images_path}: expected 3 image dimensions, got {images.ndim}", offset=3)
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels", offset=4)
    flat = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(flat, labels.astype(np.int64), split)


def mnist_dir(directory=None):
    return directory or os.environ.get("GHOSTNORM_MNIST_DIR", "/root/data/mnist")


def mnist_paths(directory=None):
    directory = mnist_dir(directory)
    return {key: os.path.join(directory, name) for key, name in MNIST_FILES.items()}


def load_mnist(directory=None, val_size=10_000, paths=None):
    """Official MNIST split into (train, val, test), standardized with train statistics.

    The last ``val_size`` images of the official training file form the
    validation split.  ``directory`` defaults to ``$GHOSTNORM_MNIST_DIR``;
    ``paths`` overrides individual files (keys as in ``MNIST_FILES``).
    """
    files = mnist_paths(directory)
    files.update(paths or {})
    full = load_mnist_idx(files["train_images"], files["train_labels"])
    test = load_mnist_idx(files["test_images"], files["test_labels"], split="test")
    cut = len(full) - val_size
    train = Dataset(full.images[:cut], full.labels[:cut], "train")
    val = Dataset(full.images[cut:], full.labels[cut:], "val")
    return standardize(train, val, test)


def mnist_available(directory=None):
    return all(os.path.exists(p) for p in mnist_paths(directory).values())


def standardize(train, *others):
    """Scale every split by the global pixel mean and std of ``train``.

    Returns the transformed datasets in the order given; each carries the
    fitted ``(mean, std)`` in its ``standardization`` field.
    """
    if len(train) == 0:
        raise DegenerateDataError("cannot fit standardization on an empty training split")
    mean = float(train.images.mean())
    std = float(train.images.std())
    if std == 0.0:
        raise DegenerateDataError("training images have zero variance")
    stats = (mean, std)
    return tuple(
        replace(d, images=(d.images - mean) / std, standardization=stats) for d in (train, *others)
    )


def synthetic_classification(n, d, k, seed=0, separation=4.0):
    """``k`` balanced Gaussian clusters in ``d`` dimensions with unit within-class spread."""
    if not n >= k >= 2:
        raise DataError(f"need n >= k >= 2, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, d))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % k)
    images = centers[labels] + rng.normal(size=(n, d))
    return Dataset(images, labels.astype(np.int64), "train")


def split_dataset(dataset, val_fraction=0.1, test_fraction=0.1, seed=0):
    """Random (train, val, test) split of one dataset."""
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_val, n_test = int(round(n * val_fraction)), int(round(n * test_fraction))
    parts = {
        "val": order[:n_val],
        "test": order[n_val : n_val + n_test],
        "train": order[n_val + n_test :],
    }
    return tuple(
        Dataset(dataset.images[parts[s]], dataset.labels[parts[s]], s) for s in ("train", "val", "test")
    )


def batches(dataset, batch_size, seed=0, shuffle=True):
    """Yield ``(images, labels)`` mini-batches; the final partial batch is dropped.

    ``seed`` may be anything ``numpy.random.default_rng`` accepts, e.g.
    ``(run_seed, epoch)`` for a fresh permutation per epoch.
    """
    n = len(dataset)
    if batch_size > n:
        raise DataError(f"batch size {batch_size} exceeds dataset size {n}")
    order = np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    for start in range(0, n - batch_size + 1, batch_size):
        idx = order[start : start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


def n_batches(dataset, batch_size):
    return len(dataset) // batch_size
