"""Detection scores for embedding stores, plus the CSV interchange format.

All methods emit scores under the shared convention that higher means more
out-distribution.  Besides the trained detector there are four classic
zero-shot baselines over the cosine logits ``s_i = x.t_i / tau`` against
the task embeddings alone:

``msp``       1 - max softmax probability, at the store's temperature
``maxlogit``  negated maximum logit
``energy``    negated log-sum-exp of the logits
``mcm``       1 - max softmax probability, at its own temperature (default 1)
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .metrics import CONVENTION
from .objective import DetectorModel, predict_out_probability
from .store import EmbeddingStore, TaskEmbeddings
from .validation import check_positive

SCORE_METHODS = ("hftt", "msp", "maxlogit", "energy", "mcm")


@dataclass(eq=False)
class ScoreSet:
    """Per-embedding detection scores with their provenance."""

    method: str
    scores: np.ndarray
    ids: list[str] = field(default_factory=list)
    convention: str = CONVENTION
    name: str = ""

    def __post_init__(self):
        self.method = str(self.method)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1:
            raise ValidationError(f"scores must be 1-D, got shape {self.scores.shape}")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("scores contain NaN or Inf entries")
        if not self.ids:
            self.ids = [str(i) for i in range(self.scores.size)]
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != self.scores.size:
            raise ValidationError(
                f"got {len(self.ids)} ids for {self.scores.size} scores"
            )
        if self.convention != CONVENTION:
            raise ValidationError(
                f"unknown score convention {self.convention!r}, expected {CONVENTION!r}"
            )

    def __len__(self) -> int:
        return int(self.scores.size)


def _store_ids(store: EmbeddingStore) -> list[str]:
    if store.labels is not None:
        return list(store.labels)
    return [str(i) for i in range(store.count)]


def score_hftt(model: DetectorModel, store: EmbeddingStore, name: str = "") -> ScoreSet:
    """Score a store with a trained detector; the score is ``p(x)`` itself."""
    if store.dim != model.dim:
        raise ValidationError(
            f"store dimension {store.dim} does not match model dimension {model.dim}"
        )
    if store.count == 0:
        scores = np.empty(0)
    else:
        scores = predict_out_probability(model, store.matrix)
    return ScoreSet("hftt", scores, ids=_store_ids(store), name=name)


def score_baseline(
    method: str,
    task: TaskEmbeddings,
    store: EmbeddingStore,
    temperature: float | None = None,
    name: str = "",
) -> ScoreSet:
    """Score a store with one of the zero-shot baselines over the task logits.

    ``msp``, ``maxlogit``, and ``energy`` read the temperature from the
    store; ``mcm`` uses its own (default 1.0).  ``temperature`` overrides
    either choice.  Softmax-based methods need at least two task embeddings,
    otherwise the maximum probability is identically 1.
    """
    if method == "hftt":
        raise ValidationError("hftt is not a baseline; use score_hftt with a trained model")
    if method not in SCORE_METHODS:
        raise ValidationError(f"unknown method {method!r}, expected one of {SCORE_METHODS}")
    if store.dim != task.dim:
        raise ValidationError(
            f"store dimension {store.dim} does not match task dimension {task.dim}"
        )
    if method in ("msp", "mcm") and task.count < 2:
        raise ValidationError(f"{method} needs at least two task embeddings")
    if temperature is not None:
        tau = check_positive(temperature, name="temperature")
    elif method == "mcm":
        tau = 1.0
    else:
        tau = store.temperature
    if store.count == 0:
        return ScoreSet(method, np.empty(0), ids=[], name=name)
    logits = (store.matrix @ task.embeddings.T) / tau
    if method in ("msp", "mcm"):
        # max softmax = 1 / sum exp(s - max s); subtracting the row maximum
        # first keeps the exponentials in range.
        shifted = logits - logits.max(axis=1, keepdims=True)
        scores = 1.0 - 1.0 / np.exp(shifted).sum(axis=1)
    elif method == "maxlogit":
        scores = -logits.max(axis=1)
    else:
        scores = -logsumexp(logits, axis=1)
    return ScoreSet(method, scores, ids=_store_ids(store), name=name)


def export_scores(score_set: ScoreSet, path) -> None:
    """Write ``id,score`` CSV rows with 17-significant-digit scores.

    17 digits round-trip any float64 exactly, so exported scores reload
    bit for bit.
    """
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "score"])
        for row_id, value in zip(score_set.ids, score_set.scores):
            writer.writerow([row_id, format(value, ".17g")])


def read_scores(path, method: str = "unknown", name: str = "") -> ScoreSet:
    """Read a score CSV written by :func:`export_scores`."""
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty score file") from None
        if header != ["id", "score"]:
            raise ValidationError(f"{path}: expected header id,score, got {header!r}")
        ids, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValidationError(f"{path}, line {lineno}: expected 2 columns, got {len(row)}")
            ids.append(row[0])
            try:
                values.append(float(row[1]))
            except ValueError:
                raise ValidationError(
                    f"{path}, line {lineno}: {row[1]!r} is not a number"
                ) from None
    scores = np.asarray(values, dtype=np.float64)
    if scores.size and not np.all(np.isfinite(scores)):
        raise ValidationError(f"{path}: scores contain NaN or Inf entries")
    stem = os.path.splitext(os.path.basename(path))[0]
    return ScoreSet(method, scores, ids=ids, name=name or stem)
