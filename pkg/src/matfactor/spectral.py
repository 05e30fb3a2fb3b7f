"""Symmetric eigen-decomposition with a deterministic sign convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, InvalidArgumentError

SYM_TOL = 1e-8
CLAMP_REL = 1e-12


@dataclass(frozen=True)
class EigenDecomp:
    values: np.ndarray  # nonincreasing
    vectors: np.ndarray  # column k pairs with values[k]


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive.

    ``argmax`` returns the first maximiser, so ties go to the lowest index.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(A: np.ndarray) -> EigenDecomp:
    """Full eigen-decomposition of a symmetric matrix, values nonincreasing."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    scale = max(float(np.max(np.abs(A))) if A.size else 0.0, 1e-300)
    if np.max(np.abs(A - A.T), initial=0.0) > SYM_TOL * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    try:
        values, vectors = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EstimationError(
            f"eigen-decomposition did not converge (p={A.shape[0]}, max|A|={scale:.3g}): {exc}",
            stage="eigen",
        ) from exc
    order = np.argsort(-values, kind="stable")
    return EigenDecomp(values=values[order], vectors=fix_signs(vectors[:, order]))


def clamp_spectrum(values: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues below ``1e-12`` times the largest one."""
    values = np.asarray(values, dtype=float).copy()
    top = values.max(initial=0.0)
    values[values < CLAMP_REL * top] = 0.0
    if top <= 0:
        values[:] = 0.0
    return values


def top_eigenvectors(A: np.ndarray, r: int) -> np.ndarray:
    p = np.shape(A)[0]
    if not 0 < r <= p:
        raise InvalidArgumentError(f"r={r} out of range for a {p}x{p} matrix")
    return sym_eigen(A).vectors[:, :r]


def bottom_eigenvectors(A: np.ndarray, v: int) -> np.ndarray:
    p = np.shape(A)[0]
    if not 0 < v <= p:
        raise InvalidArgumentError(f"v={v} out of range for a {p}x{p} matrix")
    return sym_eigen(A).vectors[:, p - v:]


def eigen_ratios(values, jmax: int) -> np.ndarray:
    """Consecutive ratios ``values[j+1] / values[j]`` for ``j = 1..jmax``."""
    values = np.asarray(values, dtype=float)
    if jmax < 1 or jmax + 1 > len(values):
        raise InvalidArgumentError(f"jmax={jmax} out of range for {len(values)} values")
    head = values[: jmax + 1]
    if np.any(head <= 0):
        raise InvalidArgumentError("nonpositive eigenvalue inside the ratio range")
    return np.minimum(head[1:] / head[:-1], 1.0)


def first_argmin_ratio(values, jmax: int) -> int:
    """1-based argmin of consecutive ratios over ``j = 1..jmax``.

    Works on a clamped spectrum: the scan stops at the first zero
    denominator, and a zero numerator gives ratio 0 (an exact cliff).
    Returns 0 when no ratio can be formed.
    """
    values = clamp_spectrum(values)
    jmax = min(jmax, len(values) - 1)
    best_j, best = 0, np.inf
    for j in range(1, jmax + 1):
        if values[j - 1] <= 0:
            break
        ratio = values[j] / values[j - 1]
        if ratio < best:
            best_j, best = j, ratio
    return best_j
