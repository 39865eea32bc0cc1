"""Small input-validation helpers shared by the public API surface."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def as_matrix(data, *, name: str = "array", dim: int | None = None) -> np.ndarray:
    """Coerce ``data`` to a finite 2-D float64 array, optionally pinning its width."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    if dim is not None and arr.shape[1] != dim:
        raise ValidationError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    return arr


def as_vector(data, *, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Coerce ``data`` to a finite 1-D float64 array of optional fixed length."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    if dim is not None and arr.shape[0] != dim:
        raise ValidationError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr


def embedding_matrix(obj, *, name: str = "embeddings", dim: int | None = None) -> np.ndarray:
    """Accept either an embedding container (anything with ``.matrix``) or a raw matrix."""
    data = getattr(obj, "matrix", obj)
    return as_matrix(data, name=name, dim=dim)


def check_positive(value, *, name: str) -> float:
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive and finite, got {value}")
    return value


def check_unit_rows(matrix: np.ndarray, *, tol: float, name: str) -> None:
    norms = np.linalg.norm(matrix, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"{name}: row {i} has norm {norms[i]:.6g}, expected 1 within {tol:g}"
        )
