"""SGD over the trainable embeddings, plus model persistence.

The backbone never appears here: training consumes embedding stores that
some encoder produced earlier, and only the N trainable embeddings move.
One epoch over the corpus at the stock settings (batch 256, learning rate
1.0) is enough; each step renormalizes the trainable rows back onto the
unit sphere.

A trained model persists as a directory::

    manifest.json     dimensions, counts, temperature, config echo
    task.hemb         frozen task embeddings (+ .labels.txt with names)
    trainable.hemb    trained embeddings, synthetic modality

The final weights are snapped to float32 before the model object is built,
so a saved and reloaded detector scores bit-identically to the in-memory
one.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .objective import DetectorModel, LossConfig, loss_and_gradient
from .store import (
    EmbeddingStore,
    TaskEmbeddings,
    UNIT_TOL,
    load_store,
    normalize_rows,
    save_store,
)
from .validation import check_positive

INIT_SCHEMES = ("random_unit", "corpus_mean_perturbed")
MANIFEST_NAME = "manifest.json"
TASK_FILE = "task.hemb"
TRAINABLE_FILE = "trainable.hemb"


@dataclass
class TrainConfig:
    """Every knob of a training run; defaults are the stock recipe."""

    batch_size: int = 256
    learning_rate: float = 1.0
    epochs: int = 1
    n_trainable: int = 10
    lam: float = 0.0
    gamma: float = 1.0
    seed: int = 0
    loss_variant: str = "union"
    init: str = "random_unit"
    renormalize: bool = True
    shuffle: bool = True

    def __post_init__(self):
        self.batch_size = int(self.batch_size)
        self.epochs = int(self.epochs)
        self.n_trainable = int(self.n_trainable)
        self.seed = int(self.seed)
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be positive, got {self.epochs}")
        if self.n_trainable < 1:
            raise ValidationError(f"n_trainable must be positive, got {self.n_trainable}")
        self.learning_rate = float(self.learning_rate)
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0.0):
            raise ValidationError(
                f"learning_rate must be non-negative, got {self.learning_rate}"
            )
        if self.init not in INIT_SCHEMES:
            raise ValidationError(
                f"init must be one of {INIT_SCHEMES}, got {self.init!r}"
            )
        self.renormalize = bool(self.renormalize)
        self.shuffle = bool(self.shuffle)
        # Delegate lam/gamma/variant checks to the objective config.
        self.loss_config()

    def loss_config(self) -> LossConfig:
        return LossConfig(lam=self.lam, gamma=self.gamma, variant=self.loss_variant)


@dataclass(eq=False)
class TrainReport:
    """What a run did: step count, loss trace, clamp total, and the model."""

    steps: int
    loss_trace: list[float]
    clamp_events: int
    model: DetectorModel


def init_trainable(n: int, dim: int, rng, scheme: str = "random_unit", corpus=None) -> np.ndarray:
    """Draw the starting trainable block, one unit row per embedding.

    ``random_unit`` normalizes Gaussian rows, which land near-orthogonal to
    everything in high dimension.  ``corpus_mean_perturbed`` perturbs the
    mean of a 1,000-row corpus sample, starting the block inside the data
    cloud instead.  ``rng`` may be a Generator or an integer seed.
    """
    n = int(n)
    dim = int(dim)
    if n < 1 or dim < 1:
        raise ValidationError(f"need positive counts, got n={n}, dim={dim}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if scheme == "random_unit":
        return normalize_rows(rng.standard_normal((n, dim)))
    if scheme == "corpus_mean_perturbed":
        if corpus is None:
            raise ValidationError("corpus_mean_perturbed init needs the corpus")
        matrix = corpus.matrix if isinstance(corpus, EmbeddingStore) else np.asarray(corpus, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] != dim:
            raise ValidationError(
                f"corpus must be a non-empty matrix of dimension {dim}"
            )
        picks = rng.integers(0, matrix.shape[0], size=min(1000, matrix.shape[0]))
        center = matrix[picks].mean(axis=0)
        return normalize_rows(center + 0.1 * rng.standard_normal((n, dim)))
    raise ValidationError(f"init must be one of {INIT_SCHEMES}, got {scheme!r}")


def _check_store(store, name: str, dim: int) -> EmbeddingStore:
    if not isinstance(store, EmbeddingStore):
        raise ValidationError(f"{name} must be an EmbeddingStore")
    if store.count == 0:
        raise ValidationError(f"{name} is empty")
    if store.dim != dim:
        raise ValidationError(
            f"{name} dimension {store.dim} does not match task dimension {dim}"
        )
    if store.modality == "image":
        warnings.warn(
            f"{name} holds image embeddings; training is meant to run on text",
            stacklevel=3,
        )
    return store


def train(config: TrainConfig, task: TaskEmbeddings, in_texts: EmbeddingStore, corpus: EmbeddingStore) -> TrainReport:
    """Fit the trainable embeddings against frozen task anchors.

    Each optimizer step pairs one shuffled corpus batch with an equally
    sized batch resampled (with replacement) from the in-distribution
    texts.  Identical config and inputs reproduce the final model bit for
    bit.  The temperature is taken from the corpus store.
    """
    if not isinstance(config, TrainConfig):
        raise ValidationError(f"config must be a TrainConfig, got {type(config).__name__}")
    if not isinstance(task, TaskEmbeddings):
        raise ValidationError(f"task must be TaskEmbeddings, got {type(task).__name__}")
    in_texts = _check_store(in_texts, "in_texts", task.dim)
    corpus = _check_store(corpus, "corpus", task.dim)
    if in_texts.temperature != corpus.temperature:
        warnings.warn(
            f"temperature mismatch: in_texts {in_texts.temperature:g} vs corpus "
            f"{corpus.temperature:g}; using the corpus value",
            stacklevel=2,
        )
    tau = corpus.temperature
    loss_config = config.loss_config()

    rng = np.random.default_rng(config.seed)
    weights = init_trainable(
        config.n_trainable, task.dim, rng, scheme=config.init, corpus=corpus
    )

    loss_trace: list[float] = []
    clamp_events = 0
    step = 0
    n_corpus = corpus.count
    for _ in range(config.epochs):
        order = rng.permutation(n_corpus) if config.shuffle else np.arange(n_corpus)
        for start in range(0, n_corpus, config.batch_size):
            chunk = order[start:start + config.batch_size]
            batch_all = corpus.matrix[chunk]
            batch_in = in_texts.matrix[rng.integers(0, in_texts.count, size=chunk.size)]
            model = DetectorModel(task, weights, temperature=tau)
            breakdown, grad = loss_and_gradient(model, batch_in, batch_all, loss_config)
            if not math.isfinite(breakdown.total):
                raise NumericalError(f"loss became non-finite at step {step}")
            weights = weights - config.learning_rate * grad
            if config.renormalize:
                weights = normalize_rows(weights)
            loss_trace.append(breakdown.total)
            clamp_events += breakdown.clamp_events
            step += 1

    # Snap to the on-disk precision so a saved model scores identically.
    weights = weights.astype(np.float32).astype(np.float64)
    final = DetectorModel(task, weights, temperature=tau)
    return TrainReport(
        steps=step, loss_trace=loss_trace, clamp_events=clamp_events, model=final
    )


def _atomic_write_text(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".manifest-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: DetectorModel, path, config: TrainConfig | None = None) -> None:
    """Write a model directory: manifest plus the two embedding files."""
    path = os.fspath(path)
    os.makedirs(path, exist_ok=True)
    save_store(
        EmbeddingStore(
            model.task.embeddings,
            normalized=True,
            temperature=model.temperature,
            modality="text",
            labels=list(model.task.names),
        ),
        os.path.join(path, TASK_FILE),
    )
    norms = np.linalg.norm(model.trainable, axis=1)
    save_store(
        EmbeddingStore(
            model.trainable,
            normalized=bool(np.all(np.abs(norms - 1.0) <= UNIT_TOL)),
            temperature=model.temperature,
            modality="synthetic",
        ),
        os.path.join(path, TRAINABLE_FILE),
    )
    manifest = {
        "format": "hftt-model",
        "version": 1,
        "dim": model.dim,
        "K": model.n_task,
        "N": model.n_trainable,
        "temperature": model.temperature,
        "created_by": f"hftt {__version__}",
        "config": asdict(config) if config is not None else None,
    }
    _atomic_write_text(
        os.path.join(path, MANIFEST_NAME), json.dumps(manifest, indent=2) + "\n"
    )


def load_model(path) -> DetectorModel:
    """Read a model directory back, cross-checking manifest against payload."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, MANIFEST_NAME)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if manifest.get("format") != "hftt-model":
        raise ValidationError(f"{manifest_path}: not a model manifest")
    if manifest.get("version") != 1:
        raise ValidationError(
            f"{manifest_path}: unsupported model version {manifest.get('version')!r}"
        )
    task_store = load_store(os.path.join(path, TASK_FILE))
    trainable_store = load_store(os.path.join(path, TRAINABLE_FILE))
    temperature = float(np.float32(check_positive(
        manifest.get("temperature", 0.0), name="manifest temperature"
    )))
    checks = (
        ("dim", task_store.dim),
        ("K", task_store.count),
        ("N", trainable_store.count),
    )
    for key, actual in checks:
        if manifest.get(key) != actual:
            raise ValidationError(
                f"{manifest_path}: {key} is {manifest.get(key)!r}, payload has {actual}"
            )
    if trainable_store.dim != task_store.dim:
        raise ValidationError(
            f"{path}: trainable dimension {trainable_store.dim} does not match "
            f"task dimension {task_store.dim}"
        )
    for name, store in ((TASK_FILE, task_store), (TRAINABLE_FILE, trainable_store)):
        if store.temperature != temperature:
            raise ValidationError(
                f"{path}/{name}: temperature {store.temperature:g} disagrees with "
                f"manifest {temperature:g}"
            )
    task = TaskEmbeddings(task_store.matrix, task_store.labels or [])
    return DetectorModel(task, trainable_store.matrix, temperature=temperature)
