"""Out-distribution probability and the focal-weighted training objective.

A detector is K frozen task embeddings ``t_i`` plus N trainable embeddings
``w_j`` on the unit sphere of the encoder space.  An embedding ``x`` is
scored by the softmax mass its cosine logits place on the trainable block
at temperature ``tau``::

    p(x) = sum_j exp(x.w_j / tau) / (sum_i exp(x.t_i / tau) + sum_j exp(x.w_j / tau))

Training pushes ``p`` down on an in-distribution batch and up on a mixed
corpus batch.  In the default ``union`` variant every corpus sample is
treated as out-distribution and reweighted by batch-normalized focal
weights, so no out-distribution annotation is ever needed::

    L = sum_{x in B_in} -log(1 - p(x))
        + (1 - lam) * sum_{x_j in B} beta_j * (-log p(x_j))

    beta_j = n * alpha_j / sum_k alpha_k,   alpha_j = (1 - p(x_j))^gamma

The ``disjoint`` variant is the classic two-term cross-entropy
``lam * sum_in -log(1 - p) + (1 - lam) * sum_out -log p`` that needs the
second batch to be genuinely out-distribution.  Probabilities are clamped
to ``[CLAMP_EPS, 1 - CLAMP_EPS]`` inside the logarithms; gradients are
those of the unclamped objective, with the focal weights held constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NumericalError, ValidationError
from .store import DEFAULT_TEMPERATURE, TaskEmbeddings, _snap_to_f32
from .validation import as_matrix, as_vector, check_positive

CLAMP_EPS = 1e-12
LOSS_VARIANTS = ("union", "disjoint")


@dataclass(eq=False)
class DetectorModel:
    """Frozen task embeddings, trainable embeddings, and the shared temperature."""

    task: TaskEmbeddings
    trainable: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not isinstance(self.task, TaskEmbeddings):
            self.task = TaskEmbeddings(self.task)
        self.trainable = as_matrix(
            self.trainable, name="trainable embeddings", dim=self.task.dim
        ).copy()
        if self.trainable.shape[0] == 0:
            raise ValidationError("at least one trainable embedding is required")
        self.trainable.flags.writeable = False
        # Snapped like the store temperature, so persisting a model and
        # loading it back cannot shift the logit scale.
        self.temperature = _snap_to_f32(check_positive(self.temperature, name="temperature"))

    @property
    def dim(self) -> int:
        return self.task.dim

    @property
    def n_task(self) -> int:
        return self.task.count

    @property
    def n_trainable(self) -> int:
        return int(self.trainable.shape[0])


@dataclass
class LossConfig:
    """Objective hyperparameters: in-term weight, focal exponent, and variant."""

    lam: float = 0.0
    gamma: float = 1.0
    variant: str = "union"

    def __post_init__(self):
        self.lam = float(self.lam)
        self.gamma = float(self.gamma)
        if not (np.isfinite(self.lam) and 0.0 <= self.lam <= 1.0):
            raise ValidationError(f"lam must lie in [0, 1], got {self.lam}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValidationError(f"gamma must be non-negative, got {self.gamma}")
        if self.variant not in LOSS_VARIANTS:
            raise ValidationError(
                f"variant must be one of {LOSS_VARIANTS}, got {self.variant!r}"
            )


@dataclass(eq=False)
class LossBreakdown:
    """One objective evaluation: the scalar terms plus per-sample diagnostics.

    ``per_sample_p`` and ``focal_weights`` cover the corpus batch in order;
    ``clamp_events`` counts samples (over both batches) whose probability
    left ``[CLAMP_EPS, 1 - CLAMP_EPS]`` and was clamped.
    """

    total: float
    in_term: float
    out_term: float
    per_sample_p: np.ndarray
    focal_weights: np.ndarray
    clamp_events: int


def _as_batch(x, dim: int):
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    return as_matrix(arr, name="embeddings", dim=dim), single


def _forward(model: DetectorModel, X: np.ndarray):
    """Per-row cosine logits of the trainable block and log partial sums.

    Returns ``(logits_out, lse_in, lse_out, lse_all)`` where the ``lse``
    values are ``log sum exp`` over the task block, the trainable block,
    and their union.
    """
    tau = model.temperature
    logits_in = (X @ model.task.embeddings.T) / tau
    logits_out = (X @ model.trainable.T) / tau
    lse_in = logsumexp(logits_in, axis=1)
    lse_out = logsumexp(logits_out, axis=1)
    lse_all = np.logaddexp(lse_in, lse_out)
    return logits_out, lse_in, lse_out, lse_all


def predict_out_probability(model: DetectorModel, x):
    """Probability that ``x`` lies outside the task distribution, in (0, 1).

    Accepts a single embedding or a batch; returns a float or a vector
    accordingly.  Computed from log partial sums, so extreme logits
    saturate smoothly instead of overflowing.
    """
    X, single = _as_batch(x, model.dim)
    _, _, lse_out, lse_all = _forward(model, X)
    p = np.exp(lse_out - lse_all)
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(p[0]) if single else p


def focal_weights(probs, gamma: float) -> np.ndarray:
    """Batch-normalized focal weights ``n * (1-p)^gamma / sum_k (1-p_k)^gamma``.

    Weights always sum to the batch size; ``gamma = 0`` makes every weight
    exactly 1.  Confidently-out samples (p near 1) are downweighted, so the
    in-distribution look-alikes hiding inside the corpus keep their say.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("probs must be a non-empty 1-D array")
    if not np.all(np.isfinite(p)):
        raise ValidationError("probs contains NaN or Inf entries")
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise ValidationError("probs must lie in (0, 1]")
    gamma = float(gamma)
    if not (np.isfinite(gamma) and gamma >= 0.0):
        raise ValidationError(f"gamma must be non-negative, got {gamma}")
    alpha = (1.0 - p) ** gamma
    total = alpha.sum()
    if total == 0.0:
        raise NumericalError("focal weights are degenerate: every sample has p == 1")
    # (n * alpha) / total, in this order, keeps the gamma = 0 case exact.
    return (p.size * alpha) / total


def _evaluate(model, batch_in, batch_all, config, frozen_weights, want_gradient):
    if not isinstance(config, LossConfig):
        raise ValidationError(f"config must be a LossConfig, got {type(config).__name__}")
    X_in = as_matrix(batch_in, name="in-distribution batch", dim=model.dim)
    X_all = as_matrix(batch_all, name="corpus batch", dim=model.dim)
    if X_in.shape[0] == 0 or X_all.shape[0] == 0:
        raise ValidationError("both batches must be non-empty")
    tau = model.temperature
    lam = config.lam
    lo, hi = CLAMP_EPS, 1.0 - CLAMP_EPS

    out_i, in_i, _, all_i = _forward(model, X_in)
    out_c, in_c, lseout_c, all_c = _forward(model, X_all)

    # In term, -log(1 - p): the complement comes from the task-block partial
    # sum, which stays accurate when p is close to 1.
    comp_i = np.exp(in_i - all_i)
    comp_i_cl = np.clip(comp_i, lo, hi)
    in_sum = float(-np.log(comp_i_cl).sum())

    # Out term, -log p, over the corpus batch.
    p_c = np.exp(lseout_c - all_c)
    comp_c = np.exp(in_c - all_c)
    p_c_cl = np.clip(p_c, lo, hi)
    comp_c_cl = np.clip(comp_c, lo, hi)
    neg_log_p = -np.log(p_c_cl)

    clamp_events = int(np.count_nonzero(comp_i_cl != comp_i))
    clamp_events += int(np.count_nonzero((p_c_cl != p_c) | (comp_c_cl != comp_c)))

    n_all = X_all.shape[0]
    if config.variant == "union":
        if frozen_weights is not None:
            beta = as_vector(frozen_weights, name="frozen weights", dim=n_all)
            if np.any(beta < 0.0):
                raise ValidationError("frozen weights must be non-negative")
        else:
            alpha = comp_c_cl ** config.gamma
            total_alpha = alpha.sum()
            if total_alpha == 0.0:
                raise NumericalError(
                    "focal weights are degenerate: every corpus sample has p == 1"
                )
            beta = (n_all * alpha) / total_alpha
        in_term = in_sum
        out_term = (1.0 - lam) * float((beta * neg_log_p).sum())
        in_coeff = 1.0
        out_weights = (1.0 - lam) * beta
    else:
        if frozen_weights is not None:
            raise ValidationError("frozen weights only apply to the union variant")
        beta = np.ones(n_all)
        in_term = lam * in_sum
        out_term = (1.0 - lam) * float(neg_log_p.sum())
        in_coeff = lam
        out_weights = np.full(n_all, 1.0 - lam)

    breakdown = LossBreakdown(
        total=in_term + out_term,
        in_term=in_term,
        out_term=out_term,
        per_sample_p=p_c_cl,
        focal_weights=beta,
        clamp_events=clamp_events,
    )
    if not want_gradient:
        return breakdown, None

    # d/dW of -log(1 - p(x)) is (x / tau) q_j with q_j the full-softmax mass
    # on trainable j; d/dW of -log p(x) is (x / tau)(q_j - r_j) with r_j the
    # softmax mass within the trainable block alone.
    Q_i = np.exp(out_i - all_i[:, None])
    grad = in_coeff * (Q_i.T @ X_in)
    QR_c = np.exp(out_c - all_c[:, None]) - np.exp(out_c - lseout_c[:, None])
    grad += (out_weights[:, None] * QR_c).T @ X_all
    grad /= tau
    return breakdown, grad


def loss(model, batch_in, batch_all, config: LossConfig, frozen_weights=None) -> LossBreakdown:
    """Evaluate the objective on one in-distribution batch and one corpus batch.

    ``frozen_weights`` substitutes precomputed focal weights (union variant
    only), which is how finite-difference checks hold the weights constant.
    """
    breakdown, _ = _evaluate(model, batch_in, batch_all, config, frozen_weights, False)
    return breakdown


def loss_gradient(model, batch_in, batch_all, config: LossConfig, frozen_weights=None) -> np.ndarray:
    """Analytic gradient of the objective with respect to the trainable block."""
    _, grad = _evaluate(model, batch_in, batch_all, config, frozen_weights, True)
    return grad


def loss_and_gradient(model, batch_in, batch_all, config: LossConfig, frozen_weights=None):
    """Evaluate the objective and its gradient in one forward pass."""
    return _evaluate(model, batch_in, batch_all, config, frozen_weights, True)
