"""Subspace distances, factor-estimation error and forecast-error criteria."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import InvalidArgumentError

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class DistanceReport:
    value: float
    kind: Literal["D", "Dbar", "DX", "FE_F", "FE_2"]


def _clip01(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def subspace_dist(H1: np.ndarray, H2: np.ndarray) -> float:
    """``sqrt(1 - tr(H1 H1' H2 H2') / r)`` for half-orthonormal ``p x r`` inputs."""
    H1 = np.atleast_2d(np.asarray(H1, dtype=float))
    H2 = np.atleast_2d(np.asarray(H2, dtype=float))
    if H1.shape != H2.shape:
        raise InvalidArgumentError(f"shape mismatch {H1.shape} vs {H2.shape}")
    r = H1.shape[1]
    for H in (H1, H2):
        if np.linalg.norm(H.T @ H - np.eye(r)) > ORTHO_TOL:
            raise InvalidArgumentError("inputs must have orthonormal columns")
    # tr(H1 H1' H2 H2') = ||H1' H2||_F^2
    C = H1.T @ H2
    return float(np.sqrt(_clip01(1.0 - np.sum(C * C) / r)))


def _orth_basis(H: np.ndarray) -> np.ndarray:
    """Thin-QR basis of ``span(H)``; rejects ``rcond(H'H) <= 1e-12``."""
    s = np.linalg.svd(H, compute_uv=False)
    if s[0] <= 0 or (s[-1] / s[0]) ** 2 <= 1e-12:
        raise InvalidArgumentError("input is rank deficient")
    return np.linalg.qr(H)[0]


def subspace_dist_general(H1: np.ndarray, H2: np.ndarray) -> float:
    """``sqrt(1 - tr(P1 P2) / max(h1, h2))`` with ``Pi`` the projector onto ``span(Hi)``."""
    H1 = np.atleast_2d(np.asarray(H1, dtype=float))
    H2 = np.atleast_2d(np.asarray(H2, dtype=float))
    if H1.shape[0] != H2.shape[0]:
        raise InvalidArgumentError("inputs must have the same number of rows")
    if H1.shape[1] == 0 or H2.shape[1] == 0:
        raise InvalidArgumentError("inputs must have at least one column")
    Q1, Q2 = _orth_basis(H1), _orth_basis(H2)
    C = Q1.T @ Q2
    return float(np.sqrt(_clip01(1.0 - np.sum(C * C) / max(H1.shape[1], H2.shape[1]))))


def factor_error(common_hat: np.ndarray, common_true: np.ndarray) -> float:
    """``(1 / (n sqrt(p1 p2))) sum_t ||C_hat_t - C_t||_2`` (spectral norm)."""
    common_hat = np.asarray(common_hat, dtype=float)
    common_true = np.asarray(common_true, dtype=float)
    if common_hat.shape != common_true.shape or common_hat.ndim != 3:
        raise InvalidArgumentError(
            f"shape mismatch {common_hat.shape} vs {common_true.shape}"
        )
    n, p1, p2 = common_hat.shape
    norms = np.linalg.norm(common_hat - common_true, ord=2, axis=(1, 2))
    return float(norms.sum() / (n * np.sqrt(p1 * p2)))


def forecast_errors(
    Y_hat: Sequence[np.ndarray],
    Y_true: Sequence[np.ndarray],
    norm: Literal["frobenius", "spectral"] = "frobenius",
) -> float:
    """Mean over forecast origins of ``||Y_hat - Y|| / sqrt(p1 p2)``."""
    if len(Y_hat) == 0 or len(Y_true) == 0:
        raise InvalidArgumentError("need at least one forecast")
    Y_hat = np.asarray(Y_hat, dtype=float)
    Y_true = np.asarray(Y_true, dtype=float)
    if Y_hat.shape != Y_true.shape or Y_hat.ndim != 3:
        raise InvalidArgumentError(f"shape mismatch {Y_hat.shape} vs {Y_true.shape}")
    ord_ = {"frobenius": "fro", "spectral": 2}.get(norm)
    if ord_ is None:
        raise InvalidArgumentError(f"unknown norm {norm!r}")
    _, p1, p2 = Y_hat.shape
    norms = np.linalg.norm(Y_hat - Y_true, ord=ord_, axis=(1, 2))
    return float(norms.mean() / np.sqrt(p1 * p2))
