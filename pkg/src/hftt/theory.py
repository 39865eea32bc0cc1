"""Synthetic two-modality fixtures and the optimal cosine classifier.

The fixture mimics a joint text/image embedding space: two text modes
``u-`` (in-distribution) and ``u+`` (out) and two image modes ``v-`` and
``v+`` whose means are better aligned with their own text mode than with
the other one.  Under the quadratic cosine loss

    E[(1 + theta.u-)^2] + E[(1 - theta.u+)^2]

with isotropic residuals, the population optimum is the normalized mean
difference ``(u+ - u-) / |u+ - u-|``.  That classifier, fitted on text
alone, transfers to the image modes whenever the alignment margins are
positive; :func:`verify_corollary` checks exactly that.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, NumericalError, ValidationError
from .store import DEFAULT_TEMPERATURE, EmbeddingStore, normalize_rows
from .validation import as_vector, check_positive, embedding_matrix

MEAN_UNIT_TOL = 1e-6


@dataclass
class BimodalConfig:
    """Mean directions, noise scale, and sampling seed for the fixture.

    The four means must be unit vectors of one dimension and satisfy the
    alignment inequalities ``u+.v+ > u-.v+`` and ``u-.v- > u+.v-``: each
    image mode leans toward its own text mode.
    """

    dim: int
    samples_per_class: int
    mean_u_minus: np.ndarray
    mean_u_plus: np.ndarray
    mean_v_minus: np.ndarray
    mean_v_plus: np.ndarray
    noise_scale: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.dim = int(self.dim)
        self.samples_per_class = int(self.samples_per_class)
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        if self.samples_per_class < 1:
            raise ValidationError(
                f"samples_per_class must be positive, got {self.samples_per_class}"
            )
        for attr in ("mean_u_minus", "mean_u_plus", "mean_v_minus", "mean_v_plus"):
            mean = as_vector(getattr(self, attr), name=attr, dim=self.dim)
            norm = float(np.linalg.norm(mean))
            if abs(norm - 1.0) > MEAN_UNIT_TOL:
                raise ValidationError(f"{attr} has norm {norm:.6g}, expected 1")
            setattr(self, attr, mean)
        self.noise_scale = float(self.noise_scale)
        # Zero noise is allowed as the degenerate every-point-at-its-mean limit.
        if not (np.isfinite(self.noise_scale) and self.noise_scale >= 0.0):
            raise ValidationError(f"noise_scale must be non-negative, got {self.noise_scale}")
        self.seed = int(self.seed)
        plus, minus = alignment_margins(self)
        if plus <= 0.0 or minus <= 0.0:
            raise ValidationError(
                "alignment inequalities violated: margins "
                f"plus={plus:.6g}, minus={minus:.6g} must both be positive"
            )


def alignment_margins(config: BimodalConfig):
    """How much each image mode prefers its own text mode, ``(plus, minus)``."""
    plus = float(
        config.mean_u_plus @ config.mean_v_plus - config.mean_u_minus @ config.mean_v_plus
    )
    minus = float(
        config.mean_u_minus @ config.mean_v_minus - config.mean_u_plus @ config.mean_v_minus
    )
    return plus, minus


@dataclass(eq=False)
class BimodalSample:
    """The four sampled point clouds, as ready-to-use embedding stores."""

    u_minus: EmbeddingStore
    u_plus: EmbeddingStore
    v_minus: EmbeddingStore
    v_plus: EmbeddingStore
    config: BimodalConfig


def sample_bimodal(config: BimodalConfig) -> BimodalSample:
    """Draw the four clouds: renormalized Gaussian perturbations of each mean.

    One generator seeded with ``config.seed`` drives all four draws in the
    fixed order u-, u+, v-, v+, so samples are reproducible bit for bit.
    """
    rng = np.random.default_rng(config.seed)
    n = config.samples_per_class
    clouds = {}
    order = (
        ("u_minus", config.mean_u_minus, "text"),
        ("u_plus", config.mean_u_plus, "text"),
        ("v_minus", config.mean_v_minus, "image"),
        ("v_plus", config.mean_v_plus, "image"),
    )
    for key, mean, modality in order:
        points = mean + config.noise_scale * rng.standard_normal((n, config.dim))
        clouds[key] = EmbeddingStore(
            normalize_rows(points),
            normalized=True,
            temperature=DEFAULT_TEMPERATURE,
            modality=modality,
        )
    return BimodalSample(config=config, **clouds)


def closed_form_classifier(u_minus, u_plus) -> np.ndarray:
    """The population optimum of the quadratic cosine loss: the normalized
    difference of the two mean directions."""
    a = as_vector(u_minus, name="u_minus mean")
    b = as_vector(u_plus, name="u_plus mean", dim=a.size)
    diff = b - a
    norm = float(np.linalg.norm(diff))
    if norm < 1e-12:
        raise NumericalError("mean directions coincide; the classifier is undefined")
    return diff / norm


def fit_quadratic_classifier(
    u_minus_data,
    u_plus_data,
    steps: int = 500,
    lr: float = 0.1,
    theta0=None,
) -> np.ndarray:
    """Minimize the empirical quadratic cosine loss on the unit sphere.

    Plain gradient descent on ``mean((1 + A theta)^2) + mean((1 - B theta)^2)``
    with renormalization after every step.  Stops early once the loss has
    not improved for 100 steps; if the sphere-tangential gradient is still
    large at that point a :class:`ConvergenceWarning` is emitted and the
    best iterate so far is returned.
    """
    A = embedding_matrix(u_minus_data, name="u_minus data")
    B = embedding_matrix(u_plus_data, name="u_plus data", dim=A.shape[1])
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValidationError("both sample sets must be non-empty")
    steps = int(steps)
    if steps < 1:
        raise ValidationError(f"steps must be positive, got {steps}")
    lr = float(lr)
    if not (np.isfinite(lr) and lr >= 0.0):
        raise ValidationError(f"lr must be non-negative, got {lr}")
    if theta0 is None:
        theta = np.full(A.shape[1], 1.0 / np.sqrt(A.shape[1]))
    else:
        theta = as_vector(theta0, name="theta0", dim=A.shape[1])
        norm = float(np.linalg.norm(theta))
        if norm == 0.0:
            raise ValidationError("theta0 must be non-zero")
        theta = theta / norm

    best_loss = np.inf
    best_theta = theta
    stall = 0
    for _ in range(steps):
        residual_a = 1.0 + A @ theta
        residual_b = 1.0 - B @ theta
        value = float(np.mean(residual_a**2) + np.mean(residual_b**2))
        if not np.isfinite(value):
            raise NumericalError("quadratic loss diverged; lower the learning rate")
        grad = 2.0 * (A.T @ residual_a) / A.shape[0] - 2.0 * (B.T @ residual_b) / B.shape[0]
        if value < best_loss - 1e-15:
            best_loss = value
            best_theta = theta
            stall = 0
        else:
            stall += 1
        if stall >= 100:
            tangential = grad - (grad @ theta) * theta
            if float(np.linalg.norm(tangential)) > 1e-8:
                warnings.warn(
                    "quadratic fit stalled for 100 steps with tangential gradient "
                    f"norm {np.linalg.norm(tangential):.3g}; returning the best iterate",
                    ConvergenceWarning,
                    stacklevel=2,
                )
            break
        theta = theta - lr * grad
        norm = float(np.linalg.norm(theta))
        if norm == 0.0:
            raise NumericalError("gradient step collapsed theta to zero")
        theta = theta / norm
    return best_theta


@dataclass
class CorollaryReport:
    """Mean transferred scores of the two image modes and the verdict."""

    mean_minus: float
    mean_plus: float
    holds: bool


def verify_corollary(theta, v_minus_data, v_plus_data) -> CorollaryReport:
    """Check that a text-fitted classifier separates the image modes in
    expectation: negative mean score on v-, positive on v+."""
    theta = as_vector(theta, name="theta")
    V_minus = embedding_matrix(v_minus_data, name="v_minus data", dim=theta.size)
    V_plus = embedding_matrix(v_plus_data, name="v_plus data", dim=theta.size)
    if V_minus.shape[0] == 0 or V_plus.shape[0] == 0:
        raise ValidationError("both image sample sets must be non-empty")
    mean_minus = float(np.mean(V_minus @ theta))
    mean_plus = float(np.mean(V_plus @ theta))
    return CorollaryReport(
        mean_minus=mean_minus,
        mean_plus=mean_plus,
        holds=bool(mean_minus < 0.0 < mean_plus),
    )


def default_bimodal_config(
    dim: int = 64,
    samples_per_class: int = 10_000,
    noise_scale: float = 0.3,
    seed: int = 0,
    offset: float = 0.5,
) -> BimodalConfig:
    """The stock fixture: axis-aligned text means, image means tilted off-axis.

    ``u-`` and ``u+`` sit on the first two coordinate axes; ``v-`` and
    ``v+`` lean toward their text mode with an ``offset``-sized component
    on a fresh axis, giving alignment margins of ``1 / sqrt(1 + offset^2)``.
    """
    if dim < 4:
        raise ValidationError(f"dim must be at least 4, got {dim}")
    check_positive(offset, name="offset")
    eye = np.eye(dim)
    return BimodalConfig(
        dim=dim,
        samples_per_class=samples_per_class,
        mean_u_minus=eye[0],
        mean_u_plus=eye[1],
        mean_v_minus=normalize_rows(eye[0] + offset * eye[2]),
        mean_v_plus=normalize_rows(eye[1] + offset * eye[3]),
        noise_scale=noise_scale,
        seed=seed,
    )


def random_bimodal_config(
    seed: int,
    dim: int = 32,
    samples_per_class: int = 5_000,
    noise_scale: float = 0.2,
) -> BimodalConfig:
    """A randomized valid fixture: the four means span a random 4-frame.

    Text means are 75 to 105 degrees apart; each image mean tilts 15 to 35
    degrees off its text mean along a fresh frame axis.  By construction the
    alignment margins exceed 0.2.
    """
    if dim < 4:
        raise ValidationError(f"dim must be at least 4, got {dim}")
    rng = np.random.default_rng(seed)
    frame, _ = np.linalg.qr(rng.standard_normal((dim, 4)))
    spread = np.deg2rad(rng.uniform(75.0, 105.0))
    tilt = np.deg2rad(rng.uniform(15.0, 35.0))
    u_minus = frame[:, 0]
    u_plus = np.cos(spread) * frame[:, 0] + np.sin(spread) * frame[:, 1]
    v_minus = np.cos(tilt) * u_minus + np.sin(tilt) * frame[:, 2]
    v_plus = np.cos(tilt) * u_plus + np.sin(tilt) * frame[:, 3]
    return BimodalConfig(
        dim=dim,
        samples_per_class=samples_per_class,
        mean_u_minus=u_minus,
        mean_u_plus=u_plus,
        mean_v_minus=v_minus,
        mean_v_plus=v_plus,
        noise_scale=noise_scale,
        seed=seed,
    )
