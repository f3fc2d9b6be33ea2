"""Dataset loaders, deterministic splits and the binary activation dump format."""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimator import PatternBatch, n_words

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
SZT_WIDTH = 12
SZT_SIZE = 1 << SZT_WIDTH
DUMP_MAGIC = b"IPBD"
DUMP_VERSION = 1
_DUMP_HEADER = struct.Struct("<4sHQII")


class DataFormatError(ValueError):
    """Base class for malformed dataset files."""


class MagicNumberError(DataFormatError):
    pass


class TruncatedDataError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class DimensionError(DataFormatError):
    pass


class DomainError(DataFormatError):
    pass


class DuplicateSampleError(DataFormatError):
    pass


class VersionError(DataFormatError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2:
            raise DimensionError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise CountMismatchError(
                f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DomainError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(self.inputs[idx], self.labels[idx], self.class_count, self.name)


# ---------------------------------------------------------------------------
# IDX (MNIST / FashionMNIST)


def _read_idx(path, expected_magic: int) -> tuple[tuple[int, ...], bytes]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedDataError(f"{path}: file shorter than the IDX magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise MagicNumberError(f"{path}: magic {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedDataError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    payload = raw[header:]
    need = math.prod(dims)
    if len(payload) < need:
        raise TruncatedDataError(f"{path}: {len(payload)} payload bytes, header promises {need}")
    if len(payload) > need:
        raise DataFormatError(f"{path}: {len(payload) - need} trailing bytes after payload")
    return dims, payload


def load_idx(images_path, labels_path, class_count: int = 10, name: str = "") -> LabeledDataset:
    """Load an IDX image/label pair, scale pixels to [0, 1] and flatten row-major."""
    img_dims, img = _read_idx(images_path, IDX_IMAGE_MAGIC)
    lab_dims, lab = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if img_dims[0] != lab_dims[0]:
        raise CountMismatchError(f"{img_dims[0]} images but {lab_dims[0]} labels")
    n = img_dims[0]
    d = math.prod(img_dims[1:])
    inputs = np.frombuffer(img, dtype=np.uint8).reshape(n, d).astype(np.float64) / 255.0
    labels = np.frombuffer(lab, dtype=np.uint8).astype(np.int64)
    if labels.size and labels.max() >= class_count:
        raise DomainError(f"label {labels.max()} outside [0, {class_count})")
    return LabeledDataset(inputs, labels, class_count, name)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(N, rows, cols)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">I", IDX_IMAGE_MAGIC))
        fh.write(struct.pack(f">{images.ndim}I", *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_idx_dir(directory, prefix: str, name: str = "") -> LabeledDataset:
    """Load ``<prefix>-images-idx3-ubyte`` style pairs, accepting both common spellings."""
    directory = Path(directory)
    for img, lab in [
        (f"{prefix}-images-idx3-ubyte", f"{prefix}-labels-idx1-ubyte"),
        (f"{prefix}-images.idx3-ubyte", f"{prefix}-labels.idx1-ubyte"),
    ]:
        if (directory / img).exists() and (directory / lab).exists():
            return load_idx(directory / img, directory / lab, name=name)
    raise FileNotFoundError(f"no IDX pair with prefix {prefix!r} in {directory}")


# ---------------------------------------------------------------------------
# SZT


def load_szt(path) -> LabeledDataset:
    """Read the SZT text format: ``<12 chars of 0/1><separator><label>`` per line."""
    rows, labels = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        bits = line[:SZT_WIDTH]
        rest = line[SZT_WIDTH:].strip(" \t,;")
        if len(bits) != SZT_WIDTH or not rest or (line[SZT_WIDTH:SZT_WIDTH + 1] not in " \t,;"):
            raise DimensionError(f"{path}:{lineno}: expected {SZT_WIDTH} bits then a label")
        if set(bits) - {"0", "1"}:
            raise DomainError(f"{path}:{lineno}: input bits must be 0 or 1, got {bits!r}")
        if rest not in ("0", "1"):
            raise DomainError(f"{path}:{lineno}: label must be 0 or 1, got {rest!r}")
        rows.append(bits)
        labels.append(int(rest))
    if len(rows) != SZT_SIZE:
        raise CountMismatchError(f"{path}: {len(rows)} rows, expected {SZT_SIZE}")
    if len(set(rows)) != len(rows):
        raise DuplicateSampleError(f"{path}: duplicate input patterns")
    inputs = np.array([[int(c) for c in r] for r in rows], dtype=np.float64)
    return LabeledDataset(inputs, np.array(labels, dtype=np.int64), 2, "szt")


def write_szt(dataset: LabeledDataset, path) -> None:
    lines = [
        "".join(str(int(v)) for v in x) + " " + str(int(y))
        for x, y in zip(dataset.inputs, dataset.labels)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def _icosahedron_vertices() -> np.ndarray:
    phi = (1 + math.sqrt(5)) / 2
    verts = []
    for a, b in itertools.product((-1.0, 1.0), repeat=2):
        verts += [(0.0, a, b * phi), (a, b * phi, 0.0), (b * phi, 0.0, a)]
    v = np.array(verts)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def szt_scores(inputs: np.ndarray, seed: int = 0) -> np.ndarray:
    """Rotation-invariant score of 12-bit patterns placed on icosahedron vertices.

    Bit ``j`` switches on the unit vector of vertex ``perm[j]`` (``perm`` drawn
    from ``seed``). The score is the squared norm of the summed active vectors
    plus a small term in the number of active bits that breaks most ties.
    """
    perm = np.random.default_rng(seed).permutation(SZT_WIDTH)
    v = _icosahedron_vertices()[perm]
    x = np.asarray(inputs, dtype=np.float64)
    resultant = x @ v
    return np.round(np.einsum("ij,ij->i", resultant, resultant) + 0.1 * x.sum(axis=1), 9)


def generate_szt_standin(seed: int = 0) -> LabeledDataset:
    """All 4096 12-bit inputs, labelled 1 iff the score exceeds its median level.

    Stand-in for the original SZT labelling, which is not reproduced here. The
    threshold is the score value that makes the positive fraction closest to 1/2.
    """
    codes = np.arange(SZT_SIZE)
    inputs = ((codes[:, None] >> np.arange(SZT_WIDTH)) & 1).astype(np.float64)
    scores = szt_scores(inputs, seed)
    levels = np.unique(scores)
    frac = np.array([(scores > s).mean() for s in levels])
    threshold = levels[int(np.argmin(np.abs(frac - 0.5)))]
    labels = (scores > threshold).astype(np.int64)
    return LabeledDataset(inputs, labels, 2, "szt_standin")


def split(dataset: LabeledDataset, validation_fraction: float, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Shuffled split; validation size is ``floor(N * fraction)``."""
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError(f"validation fraction must lie in (0, 1), got {validation_fraction}")
    n = len(dataset)
    n_val = math.floor(n * validation_fraction)
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(order[n_val:])), dataset.subset(np.sort(order[:n_val]))


# ---------------------------------------------------------------------------
# activation dumps


@dataclass(frozen=True, eq=False)
class ActivationDump:
    patterns: PatternBatch
    labels: np.ndarray
    class_count: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (len(self.patterns),):
            raise CountMismatchError(
                f"{len(self.patterns)} patterns but labels have shape {labels.shape}"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DomainError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "labels", labels)

    @property
    def sample_count(self) -> int:
        return len(self.patterns)

    @property
    def width(self) -> int:
        return self.patterns.width

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActivationDump):
            return NotImplemented
        return (self.class_count == other.class_count and self.patterns == other.patterns
                and np.array_equal(self.labels, other.labels))


def encode_activation_dump(dump: ActivationDump) -> bytes:
    header = _DUMP_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, dump.sample_count, dump.width,
                               dump.class_count)
    return (header + dump.patterns.words.astype("<u8").tobytes()
            + dump.labels.astype("<u2").tobytes())


def decode_activation_dump(raw: bytes) -> ActivationDump:
    if len(raw) < _DUMP_HEADER.size:
        raise TruncatedDataError("activation dump shorter than its header")
    magic, version, n, d, c = _DUMP_HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise MagicNumberError(f"bad activation dump magic {magic!r}")
    if version != DUMP_VERSION:
        raise VersionError(f"unsupported activation dump version {version}")
    if d < 1:
        raise DimensionError("activation dump width must be >= 1")
    nw = n_words(d)
    need = _DUMP_HEADER.size + n * nw * 8 + n * 2
    if len(raw) != need:
        raise TruncatedDataError(f"activation dump has {len(raw)} bytes, header implies {need}")
    off = _DUMP_HEADER.size
    words = np.frombuffer(raw, dtype="<u8", count=n * nw, offset=off).astype(np.uint64)
    labels = np.frombuffer(raw, dtype="<u2", count=n, offset=off + n * nw * 8)
    return ActivationDump(PatternBatch(d, words.reshape(n, nw)), labels, c)


def write_activation_dump(dump: ActivationDump, path) -> None:
    Path(path).write_bytes(encode_activation_dump(dump))


def read_activation_dump(path) -> ActivationDump:
    return decode_activation_dump(Path(path).read_bytes())
