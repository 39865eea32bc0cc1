"""Embedding containers and the ``.hemb`` on-disk format.

Embeddings enter and leave the system through this module: a small binary
container holding an n-by-d float32 matrix plus the metadata downstream
stages need (normalization state, modality, softmax temperature).  The
layout is little-endian::

    8 bytes   magic "HFTTEMB1"
    u32       format version (1)
    u32       embedding dimension d
    u64       row count n
    u8        normalized flag (0 or 1)
    u8        modality (0 text, 1 image, 2 synthetic)
    f32       temperature
    n*d f32   row-major embedding payload

Matrices are promoted to float64 in memory so that gradient computation and
finite-difference checks run at full precision, but values are snapped to
their float32 representation on construction: that keeps every container
losslessly round-trippable through disk.  An optional sidecar
``<name>.labels.txt`` carries one UTF-8 label per row.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError
from .validation import as_matrix, check_positive, check_unit_rows

MAGIC = b"HFTTEMB1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sIIQBBf")
MODALITIES = ("text", "image", "synthetic")
UNIT_TOL = 1e-4
DEFAULT_TEMPERATURE = 0.01
LABELS_SUFFIX = ".labels.txt"


def _snap_to_f32(value: float) -> float:
    return float(np.float32(value))


def _frozen_f32_matrix(data, *, name: str) -> np.ndarray:
    """Own a read-only float64 copy whose entries are exactly float32-representable."""
    arr = as_matrix(data, name=name)
    arr = np.ascontiguousarray(arr.astype(np.float32).astype(np.float64))
    arr.flags.writeable = False
    return arr


@dataclass(eq=False)
class EmbeddingStore:
    """A read-only matrix of row embeddings plus its manifest.

    ``matrix`` is float64 in memory and float32 at rest; construction snaps
    entries to float32 precision so ``load_store(save_store(s))`` recovers
    ``s`` bit for bit.  When ``normalized`` is set every row must be unit
    length within ``UNIT_TOL``.
    """

    matrix: np.ndarray
    normalized: bool = True
    temperature: float = DEFAULT_TEMPERATURE
    modality: str = "text"
    labels: list[str] | None = None

    def __post_init__(self):
        self.matrix = _frozen_f32_matrix(self.matrix, name="embedding matrix")
        if self.dim == 0:
            raise ValidationError("embedding dimension must be positive")
        self.normalized = bool(self.normalized)
        if self.normalized:
            check_unit_rows(self.matrix, tol=UNIT_TOL, name="embedding matrix")
        self.temperature = _snap_to_f32(check_positive(self.temperature, name="temperature"))
        if self.modality not in MODALITIES:
            raise ValidationError(
                f"modality must be one of {MODALITIES}, got {self.modality!r}"
            )
        if self.labels is not None:
            self.labels = [str(label) for label in self.labels]
            if len(self.labels) != self.count:
                raise ValidationError(
                    f"got {len(self.labels)} labels for {self.count} embeddings"
                )
            for i, label in enumerate(self.labels):
                if "\n" in label or "\r" in label:
                    raise ValidationError(f"label {i} contains a line break")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def count(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(eq=False)
class TaskEmbeddings:
    """The frozen in-distribution anchors of a detector, one row per concept."""

    embeddings: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.embeddings = _frozen_f32_matrix(self.embeddings, name="task embeddings")
        if self.count == 0:
            raise ValidationError("task embeddings must contain at least one row")
        check_unit_rows(self.embeddings, tol=UNIT_TOL, name="task embeddings")
        if not self.names:
            self.names = [f"task_{i}" for i in range(self.count)]
        self.names = [str(name) for name in self.names]
        if len(self.names) != self.count:
            raise ValidationError(
                f"got {len(self.names)} names for {self.count} task embeddings"
            )

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def count(self) -> int:
        return int(self.embeddings.shape[0])


def normalize_rows(matrix) -> np.ndarray:
    """Scale each row to unit Euclidean norm; zero rows are rejected."""
    arr = np.asarray(matrix, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    arr = as_matrix(arr, name="matrix")
    norms = np.linalg.norm(arr, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"row {int(zero[0])} has zero norm and cannot be normalized")
    out = arr / norms[:, None]
    return out[0] if single else out


def build_task_embeddings(groups) -> TaskEmbeddings:
    """Ensemble per-concept embedding groups into one anchor per concept.

    ``groups`` is a sequence of ``(name, members)`` pairs where ``members``
    holds one or more unit embeddings of the same concept (for text, one per
    prompt template).  Each group is averaged and the mean renormalized, the
    standard prompt-ensembling recipe.
    """
    groups = list(groups)
    if not groups:
        raise ValidationError("at least one task group is required")
    names, rows = [], []
    dim = None
    for index, (name, members) in enumerate(groups):
        members = np.asarray(members, dtype=np.float64)
        if members.ndim == 1:
            members = members[None, :]
        members = as_matrix(members, name=f"group {index} ({name!r})", dim=dim)
        if members.shape[0] == 0:
            raise ValidationError(f"group {index} ({name!r}) is empty")
        dim = members.shape[1]
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-8:
            raise ValidationError(
                f"group {index} ({name!r}): ensemble mean is degenerate (norm {norm:.3g})"
            )
        names.append(str(name))
        rows.append(mean / norm)
    return TaskEmbeddings(np.vstack(rows), names)


def _labels_path(path: str) -> str:
    base, ext = os.path.splitext(path)
    return (base if ext == ".hemb" else path) + LABELS_SUFFIX


def _atomic_write(path: str, blob: bytes) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".hemb-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_store(store: EmbeddingStore, path) -> None:
    """Write ``store`` to ``path`` atomically, plus a labels sidecar if present."""
    path = os.fspath(path)
    header = HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        store.dim,
        store.count,
        int(store.normalized),
        MODALITIES.index(store.modality),
        store.temperature,
    )
    payload = store.matrix.astype("<f4").tobytes(order="C")
    _atomic_write(path, header + payload)
    sidecar = _labels_path(path)
    if store.labels is None:
        # A stale sidecar from an earlier save would change what load returns.
        if os.path.exists(sidecar):
            os.unlink(sidecar)
    else:
        text = "".join(label + "\n" for label in store.labels)
        _atomic_write(sidecar, text.encode("utf-8"))


def load_store(path) -> EmbeddingStore:
    """Read a ``.hemb`` container back into an :class:`EmbeddingStore`."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size:
        raise CorruptionError(f"{path}: file shorter than the {HEADER.size}-byte header")
    magic, version, dim, count, normalized, modality, temperature = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise ValidationError(f"{path}: embedding dimension must be positive")
    if normalized not in (0, 1):
        raise FormatError(f"{path}: normalized flag must be 0 or 1, got {normalized}")
    if modality >= len(MODALITIES):
        raise FormatError(f"{path}: unknown modality code {modality}")
    payload = blob[HEADER.size:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    raw = np.frombuffer(payload, dtype="<f4")
    if not np.all(np.isfinite(raw)):
        raise ValidationError(f"{path}: payload contains NaN or Inf entries")
    matrix = raw.astype(np.float64).reshape(count, dim)
    labels = None
    sidecar = _labels_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="utf-8") as fh:
            labels = fh.read().splitlines()
    try:
        return EmbeddingStore(
            matrix,
            normalized=bool(normalized),
            temperature=temperature,
            modality=MODALITIES[modality],
            labels=labels,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
