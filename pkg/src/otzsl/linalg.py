"""Small dense-matrix helpers shared by the solvers and networks.

Matrices and vectors are plain float64 numpy arrays throughout the package;
these helpers add the validation the rest of the code relies on (finiteness,
nonzero norms) with errors that name the offending entry.
"""

from __future__ import annotations

import numpy as np


def as_float_matrix(values, what: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be 2-D, got shape {arr.shape}")
    ensure_finite(arr, what)
    return arr


def ensure_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(np.ravel(arr)))[0])
        raise ValueError(f"{what} contains a non-finite value at flat index {bad}")


def unit_rows(m: np.ndarray, what: str = "matrix") -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize; returns (unit rows, row norms). Zero-norm rows are errors."""
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"{what} row {bad} has zero norm; cosine distance is undefined")
    return m / norms[:, None], norms


def cosine_distance(x, y) -> float:
    """1 - cos(x, y), in [0, 2]. Both arguments must have positive norm."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"expected equal-length vectors, got shapes {x.shape} and {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine distance is undefined for zero-norm vectors")
    return float(1.0 - float(np.dot(x, y)) / (nx * ny))


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax, stabilized by per-row max subtraction."""
    m = as_float_matrix(m, "softmax input")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax; stable for arbitrarily large magnitudes."""
    shifted = m - m.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
