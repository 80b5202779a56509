from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

SQRT5 = np.sqrt(5.0)


def matern52_ard(a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray, variance: float) -> float:
    """Matérn 5/2 covariance with one lengthscale per input dimension."""
    return float(matern52_matrix(np.atleast_2d(a), np.atleast_2d(b), lengthscales, variance)[0, 0])


def matern52_matrix(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray, variance: float) -> np.ndarray:
    ls = np.asarray(lengthscales, dtype=np.float64)
    if (ls <= 0).any():
        raise ValueError(f"lengthscales must be positive, got {ls}")
    r = cdist(np.asarray(A, dtype=np.float64) / ls, np.asarray(B, dtype=np.float64) / ls)
    return variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-SQRT5 * r)
