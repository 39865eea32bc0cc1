"""Scikit-learn style front door for the detector.

:class:`HFTTDetector` wraps config, training, and scoring behind the usual
``fit`` / ``predict`` surface so the detector drops into existing
evaluation harnesses.  Estimator parameters mirror :class:`TrainConfig`;
``fit`` takes pre-computed embeddings, never raw text or images.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ValidationError
from .objective import predict_out_probability
from .store import DEFAULT_TEMPERATURE, EmbeddingStore, TaskEmbeddings
from .trainer import TrainConfig, train
from .validation import as_matrix


class HFTTDetector(BaseEstimator):
    """Unwanted-content detector trained purely on text embeddings.

    Parameters mirror :class:`TrainConfig`; ``temperature`` applies when
    the training inputs are raw matrices rather than embedding stores.

    Examples
    --------
    >>> det = HFTTDetector(seed=7).fit(corpus, in_texts, task)   # doctest: +SKIP
    >>> p = det.score_samples(image_embeddings)                  # doctest: +SKIP
    """

    def __init__(
        self,
        n_trainable: int = 10,
        batch_size: int = 256,
        learning_rate: float = 1.0,
        epochs: int = 1,
        lam: float = 0.0,
        gamma: float = 1.0,
        loss_variant: str = "union",
        init: str = "random_unit",
        renormalize: bool = True,
        shuffle: bool = True,
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = 0,
    ):
        self.n_trainable = n_trainable
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.lam = lam
        self.gamma = gamma
        self.loss_variant = loss_variant
        self.init = init
        self.renormalize = renormalize
        self.shuffle = shuffle
        self.temperature = temperature
        self.seed = seed

    def _as_store(self, data, modality: str) -> EmbeddingStore:
        if isinstance(data, EmbeddingStore):
            return data
        return EmbeddingStore(
            as_matrix(data, name="embeddings"),
            normalized=False,
            temperature=self.temperature,
            modality=modality,
        )

    def fit(self, X, X_in=None, task=None):
        """Train the detector.

        Parameters
        ----------
        X : EmbeddingStore or matrix
            The mixed corpus embeddings (the generic word captions).
        X_in : EmbeddingStore or matrix
            In-distribution text embeddings.
        task : TaskEmbeddings or matrix
            Frozen task anchors, one unit row per in-distribution concept.
        """
        if X_in is None or task is None:
            raise ValidationError("fit needs the corpus, the in-distribution texts, and the task")
        if not isinstance(task, TaskEmbeddings):
            task = TaskEmbeddings(as_matrix(task, name="task"))
        config = TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            n_trainable=self.n_trainable,
            lam=self.lam,
            gamma=self.gamma,
            seed=self.seed,
            loss_variant=self.loss_variant,
            init=self.init,
            renormalize=self.renormalize,
            shuffle=self.shuffle,
        )
        report = train(
            config,
            task,
            self._as_store(X_in, "text"),
            self._as_store(X, "synthetic"),
        )
        self.model_ = report.model
        self.report_ = report
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("this detector is not fitted; call fit first")

    def score_samples(self, X) -> np.ndarray:
        """Out-distribution probability per row; higher means more unwanted."""
        self._require_fitted()
        X = as_matrix(X, name="X", dim=self.model_.dim)
        if X.shape[0] == 0:
            return np.empty(0)
        return predict_out_probability(self.model_, X)

    def decision_function(self, X) -> np.ndarray:
        """Signed margin around the 0.5 probability threshold."""
        return self.score_samples(X) - 0.5

    def predict(self, X) -> np.ndarray:
        """+1 for out-distribution (unwanted), -1 for in-distribution."""
        return np.where(self.decision_function(X) > 0.0, 1, -1)
