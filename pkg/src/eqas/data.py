"""Dataset loading, preprocessing and quantum encodings.

Iris ships with the package. MNIST and Fashion-MNIST are read from gzipped
IDX files in a cache directory laid out as::

    <cache>/<source>/<original-filename>.gz
    <cache>/<source>/checksums.txt      # "<sha256>  <filename>" per line

Files are fetched from the published URLs when missing. Downloads are
checked against the published MD5 digests; ``checksums.txt`` then records
SHA-256 digests that guard the cache from later corruption.
"""
from __future__ import annotations

import csv
import enum
import gzip
import hashlib
import io
import logging
import struct
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .simulator import Circuit, build_circuit, cnot_ring, init_state, run_circuit
from .trainer import LabeledDataset

log = logging.getLogger(__name__)


class DataError(Exception):
    """Missing, malformed or truncated data."""


class ChecksumError(DataError):
    pass


class DownloadError(DataError):
    pass


class Source(enum.Enum):
    IRIS = "iris"
    MNIST = "mnist"
    FASHION = "fashion"


class Encoding(enum.Enum):
    ANGLE = "angle"
    AMPLITUDE = "amplitude"


@dataclass(frozen=True)
class RawDataset:
    samples: np.ndarray
    labels: np.ndarray   # original class ids / names
    targets: np.ndarray  # +1 / -1
    source: Source

    def __len__(self) -> int:
        return len(self.labels)


# ---------------------------------------------------------------- Iris

IRIS_CLASSES = {"Iris-setosa": 1.0, "Iris-versicolor": -1.0}


def load_iris() -> RawDataset:
    """Setosa (+1) and Versicolour (-1) rows of the bundled Iris table."""
    try:
        text = resources.files("eqas").joinpath("resources/iris.csv").read_text()
    except (FileNotFoundError, OSError) as exc:
        raise DataError("bundled iris.csv is missing") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or len(rows[0]) != 5:
        raise DataError("iris.csv must have 5 columns and a header row")
    feats, names = [], []
    try:
        for row in rows[1:]:
            if row[4] in IRIS_CLASSES:
                feats.append([float(x) for x in row[:4]])
                names.append(row[4])
    except (ValueError, IndexError) as exc:
        raise DataError("corrupt row in iris.csv") from exc
    names = np.array(names)
    return RawDataset(np.array(feats), names, np.array([IRIS_CLASSES[n] for n in names]), Source.IRIS)


# ---------------------------------------------------------------- IDX

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

IDX_FILES = {
    "train": ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    "test": ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
}

URLS = {
    Source.MNIST: "https://ossci-datasets.s3.amazonaws.com/mnist/",
    Source.FASHION: "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
}

# Published MD5 digests of the original gzip files.
PUBLISHED_MD5 = {
    Source.MNIST: {
        "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
        "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
        "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
        "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
    },
    Source.FASHION: {
        "train-images-idx3-ubyte.gz": "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
        "train-labels-idx1-ubyte.gz": "25c81989df183df01b3e8a0aad5dffbe",
        "t10k-images-idx3-ubyte.gz": "bef4ecab320f06d8554ea6380940ec79",
        "t10k-labels-idx1-ubyte.gz": "bb300cfdad3c16e7a12a480ee83cd310",
    },
}

# (positive class, negative class)
TARGET_CLASSES = {Source.MNIST: (3, 6), Source.FASHION: (3, 6)}

_IDX_DTYPES = {0x08: np.uint8}


def parse_idx(payload: bytes) -> np.ndarray:
    """Decode an uncompressed unsigned-byte IDX payload."""
    if len(payload) < 4:
        raise DataError("IDX payload shorter than its magic number")
    zero, dtype_code, ndim = struct.unpack(">HBB", payload[:4])
    if zero != 0 or dtype_code not in _IDX_DTYPES or ndim == 0:
        raise DataError(f"bad IDX magic 0x{payload[:4].hex()}")
    header = 4 + 4 * ndim
    if len(payload) < header:
        raise DataError("truncated IDX header")
    dims = struct.unpack(f">{ndim}I", payload[4:header])
    size = int(np.prod(dims))
    if len(payload) != header + size:
        raise DataError(f"IDX body has {len(payload) - header} bytes, expected {size}")
    return np.frombuffer(payload, dtype=np.uint8, offset=header).reshape(dims)


def idx_magic(payload: bytes) -> int:
    return struct.unpack(">I", payload[:4])[0]


def write_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ValueError("only unsigned-byte arrays are supported")
    header = struct.pack(">HBB", 0, 0x08, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.tobytes()


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_checksums(directory: Path) -> dict[str, str]:
    path = Path(directory) / "checksums.txt"
    if not path.exists():
        return {}
    out = {}
    for line in path.read_text().splitlines():
        if line.strip():
            digest, name = line.split()
            out[name] = digest
    return out


def write_checksums(directory: Path, sums: dict[str, str]) -> None:
    lines = [f"{sums[name]}  {name}" for name in sorted(sums)]
    (Path(directory) / "checksums.txt").write_text("\n".join(lines) + "\n")


def _urlopen_bytes(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read()


def verify_cache(source: Source, cache_dir) -> list[str]:
    """Check every expected file against checksums.txt; return the missing names."""
    directory = Path(cache_dir) / source.value
    sums = read_checksums(directory)
    missing = []
    for name in PUBLISHED_MD5[source]:
        path = directory / name
        if not path.exists():
            missing.append(name)
            continue
        if name not in sums:
            raise ChecksumError(f"{path} has no entry in checksums.txt")
        if sha256_of(path) != sums[name]:
            raise ChecksumError(f"{path} does not match its recorded SHA-256")
    return missing


def fetch(source: Source, cache_dir, opener: Optional[Callable[[str], bytes]] = None) -> str:
    """Make sure the four IDX files of ``source`` are cached. Returns a status word."""
    opener = opener or _urlopen_bytes
    if source is Source.IRIS:
        return "bundled"
    directory = Path(cache_dir) / source.value
    missing = verify_cache(source, cache_dir)
    if not missing:
        return "cached"
    directory.mkdir(parents=True, exist_ok=True)
    sums = read_checksums(directory)
    for name in missing:
        url = URLS[source] + name
        log.info("downloading %s", url)
        try:
            blob = opener(url)
        except (urllib.error.URLError, OSError) as exc:
            raise DownloadError(
                f"could not download {url} ({exc}). To work offline, place the original "
                f"{name} in {directory} and add its SHA-256 to checksums.txt"
            ) from exc
        if hashlib.md5(blob).hexdigest() != PUBLISHED_MD5[source][name]:
            raise ChecksumError(f"{url} does not match its published MD5")
        (directory / name).write_bytes(blob)
        sums[name] = hashlib.sha256(blob).hexdigest()
    write_checksums(directory, sums)
    return "downloaded"


def read_idx_pair(source: Source, cache_dir, split: str = "train") -> tuple[np.ndarray, np.ndarray]:
    directory = Path(cache_dir) / source.value
    images_name, labels_name = IDX_FILES[split]
    out = []
    for name, magic in ((images_name, IDX_IMAGES_MAGIC), (labels_name, IDX_LABELS_MAGIC)):
        try:
            payload = gzip.decompress((directory / name).read_bytes())
        except (OSError, EOFError) as exc:
            raise DataError(f"cannot read {directory / name}: {exc}") from exc
        if len(payload) < 4 or idx_magic(payload) != magic:
            raise DataError(f"{name}: expected magic 0x{magic:08x}")
        out.append(parse_idx(payload))
    images, labels = out
    if images.shape[0] != labels.shape[0]:
        raise DataError("image and label counts differ")
    return images, labels


def load_idx(source: Source, cache_dir, split: str = "train", download: bool = True) -> RawDataset:
    """Images of the two target classes from one split, labelled +1 / -1."""
    if source is Source.IRIS:
        raise ValueError("Iris is not an IDX dataset")
    if download:
        fetch(source, cache_dir)
    else:
        missing = verify_cache(source, cache_dir)
        if missing:
            raise DataError(f"{source.value} files missing from cache: {missing}")
    images, labels = read_idx_pair(source, cache_dir, split)
    pos, neg = TARGET_CLASSES[source]
    keep = (labels == pos) | (labels == neg)
    labels = labels[keep]
    return RawDataset(images[keep], labels, np.where(labels == pos, 1.0, -1.0), source)


# ---------------------------------------------------------------- preprocessing

def preprocess_image(image) -> np.ndarray:
    """Centre-crop 28x28 to 24x24, average-pool 6x6 cells to 4x4, scale to [0, 1]."""
    image = np.asarray(image, dtype=float)
    if image.shape != (28, 28):
        raise ValueError(f"expected a 28x28 image, got {image.shape}")
    crop = image[2:26, 2:26]
    pooled = crop.reshape(4, 6, 4, 6).mean(axis=(1, 3))
    return pooled.reshape(16) / 255.0


class AngleScaler:
    """Per-feature min-max map onto [0, pi], fitted on training rows only."""

    def __init__(self):
        self.low: Optional[np.ndarray] = None
        self.high: Optional[np.ndarray] = None

    def fit(self, features) -> "AngleScaler":
        features = np.asarray(features, dtype=float)
        self.low, self.high = features.min(axis=0), features.max(axis=0)
        return self

    @property
    def fitted(self) -> bool:
        return self.low is not None

    def transform(self, features) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("scaler not fitted")
        features = np.asarray(features, dtype=float)
        span = np.where(self.high > self.low, self.high - self.low, 1.0)
        return np.clip((features - self.low) / span, 0.0, 1.0) * np.pi


ANGLE_LAYOUT = (("RY", 0), ("RY", 1), ("RZ", 0), ("RZ", 1))


def angle_encoding_circuit(n_qubits: int = 2, prelude: bool = True) -> Circuit:
    """RY(x0) q0, RY(x1) q1, RZ(x2) q0, RZ(x3) q1, then the CNOT ring."""
    enc = build_circuit(n_qubits, ANGLE_LAYOUT)
    return enc + cnot_ring(n_qubits) if prelude else enc


def angle_encode(features, scaler: AngleScaler, prelude: bool = True) -> tuple[Circuit, np.ndarray]:
    """Encoding circuit and its angles for one 4-feature sample."""
    features = np.asarray(features, dtype=float)
    if features.shape != (4,):
        raise ValueError("angle encoding takes 4 features")
    return angle_encoding_circuit(2, prelude), scaler.transform(features)


def angle_states(features, scaler: AngleScaler) -> np.ndarray:
    circuit = angle_encoding_circuit(2)
    zero = init_state(2)
    return np.array([run_circuit(circuit, a, zero) for a in scaler.transform(features)])


def amplitude_encode(vector) -> np.ndarray:
    """Normalised 16-vector as a 4-qubit state; the zero vector maps to |+>^4."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (16,):
        raise ValueError("amplitude encoding takes 16 values")
    if np.any(vector < 0):
        raise ValueError("amplitude encoding takes non-negative values")
    norm = np.linalg.norm(vector)
    if norm == 0:
        return np.full(16, 0.25, dtype=complex)
    return (vector / norm).astype(complex)


def amplitude_states(vectors) -> np.ndarray:
    states = np.array([amplitude_encode(v) for v in vectors])
    return run_circuit(cnot_ring(4), [], states)


# ---------------------------------------------------------------- splits

def stratified_indices(targets, n_per_class: dict, rng: np.random.Generator) -> np.ndarray:
    targets = np.asarray(targets)
    picked = []
    for cls in sorted(n_per_class):
        idx = np.flatnonzero(targets == cls)
        if len(idx) < n_per_class[cls]:
            raise DataError(f"class {cls} has only {len(idx)} samples")
        picked.append(rng.choice(idx, size=n_per_class[cls], replace=False))
    return np.sort(np.concatenate(picked))


def stratified_split(targets, test_fraction: float, rng: np.random.Generator):
    targets = np.asarray(targets)
    train, test = [], []
    for cls in np.unique(targets):
        idx = rng.permutation(np.flatnonzero(targets == cls))
        n_test = int(round(len(idx) * test_fraction))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class EncodedDataset:
    mode: Encoding
    n_qubits: int
    train: LabeledDataset
    test: LabeledDataset


def prepare(
    name: str,
    cache_dir=None,
    seed: int = 0,
    n_train: int = 400,
    n_test: int = 100,
    download: bool = True,
) -> EncodedDataset:
    """Train/test states ready for training, encoding and CNOT ring applied.

    Iris is split 80/20 stratified. MNIST and Fashion-MNIST use their own
    train/test files, subsampled to ``n_train``/``n_test`` balanced samples.
    """
    source = Source(name)
    rng = np.random.default_rng([seed, 0xDA7A])
    if source is Source.IRIS:
        raw = load_iris()
        tr, te = stratified_split(raw.targets, 0.2, rng)
        scaler = AngleScaler().fit(raw.samples[tr])
        return EncodedDataset(
            Encoding.ANGLE, 2,
            LabeledDataset(angle_states(raw.samples[tr], scaler), raw.targets[tr]),
            LabeledDataset(angle_states(raw.samples[te], scaler), raw.targets[te]),
        )
    if cache_dir is None:
        raise DataError(f"{name} needs a cache directory")
    parts = []
    for split, count in (("train", n_train), ("test", n_test)):
        raw = load_idx(source, cache_dir, split, download=download)
        half = count // 2
        idx = stratified_indices(raw.targets, {1.0: count - half, -1.0: half}, rng)
        vectors = np.array([preprocess_image(im) for im in raw.samples[idx]])
        parts.append(LabeledDataset(amplitude_states(vectors), raw.targets[idx]))
    return EncodedDataset(Encoding.AMPLITUDE, 4, parts[0], parts[1])
