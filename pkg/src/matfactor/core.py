"""Containers for matrix-variate time series and the estimation results.

All arrays are stored with time on the first axis, so a series with ``n``
observations of ``p1 x p2`` matrices is an ``(n, p1, p2)`` array.
Vectorization is column-major throughout (``vec`` stacks the columns of a
matrix), which is what makes ``vec(B' Y Q) = (Q kron B)' vec(Y)`` hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidArgumentError

CENTER_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixSeries:
    """An observed ``n x p1 x p2`` matrix-variate time series."""

    data: np.ndarray
    centered: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise InvalidArgumentError(
                f"expected an (n, p1, p2) array, got shape {data.shape}"
            )
        n, p1, p2 = data.shape
        if n < 2 or p1 < 1 or p2 < 1:
            raise InvalidArgumentError(
                f"need n >= 2 and p1, p2 >= 1, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError("series contains non-finite values")
        if self.centered:
            scale = max(1.0, float(np.max(np.abs(data))))
            if np.max(np.abs(data.mean(axis=0))) > CENTER_TOL * scale:
                raise InvalidArgumentError("series flagged centered but has nonzero mean")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p1(self) -> int:
        return self.data.shape[1]

    @property
    def p2(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.n


def as_series(x) -> MatrixSeries:
    """Wrap an array as a :class:`MatrixSeries` (no-op for series)."""
    return x if isinstance(x, MatrixSeries) else MatrixSeries(np.asarray(x))


def center(series: MatrixSeries) -> MatrixSeries:
    """Subtract the temporal mean of every cell. Idempotent."""
    series = as_series(series)
    if series.centered:
        return series
    data = series.data - series.data.mean(axis=0, keepdims=True)
    return MatrixSeries(data, centered=True)


def transpose_series(series: MatrixSeries) -> MatrixSeries:
    """Return the series of transposed matrices ``Y_t'``."""
    series = as_series(series)
    return MatrixSeries(series.data.transpose(0, 2, 1), centered=series.centered)


def vectorize(series) -> np.ndarray:
    """Column-major vectorization: row ``t`` of the result is ``vec(Y_t)``."""
    data = series.data if isinstance(series, MatrixSeries) else np.asarray(series, dtype=float)
    n, p1, p2 = data.shape
    # row-major flattening of Y_t' is the column-major flattening of Y_t
    return data.transpose(0, 2, 1).reshape(n, p1 * p2)


def unvectorize(rows: np.ndarray, p1: int, p2: int) -> np.ndarray:
    """Inverse of :func:`vectorize`; returns an ``(n, p1, p2)`` array."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != p1 * p2:
        raise InvalidArgumentError(f"cannot reshape {rows.shape} into (n, {p1}, {p2})")
    return rows.reshape(rows.shape[0], p2, p1).transpose(0, 2, 1)


@dataclass(frozen=True)
class LoadingSet:
    """Front/back loadings ``A1, P1``, their complements and the spectra.

    ``eig_M1`` and ``eig_M2`` are the full eigenvalue lists of the lagged
    covariance aggregates; ``Gamma1``/``Gamma2`` are the complete eigenvector
    matrices ``[A1, B1]`` and ``[P1, Q1]``.
    """

    A1: np.ndarray
    B1: np.ndarray
    P1: np.ndarray
    Q1: np.ndarray
    eig_M1: np.ndarray
    eig_M2: np.ndarray

    @property
    def r1(self) -> int:
        return self.A1.shape[1]

    @property
    def r2(self) -> int:
        return self.P1.shape[1]

    @property
    def Gamma1(self) -> np.ndarray:
        return np.hstack([self.A1, self.B1])

    @property
    def Gamma2(self) -> np.ndarray:
        return np.hstack([self.P1, self.Q1])


@dataclass(frozen=True)
class DenoiserBasis:
    """Projected-PCA basis used to recover the factors."""

    k1: int
    k2: int
    B2star: np.ndarray
    Q2star: np.ndarray
    Xi1: np.ndarray
    Xi2: np.ndarray
    B2: np.ndarray
    Q2: np.ndarray
    eig_S1: np.ndarray
    eig_S2: np.ndarray
    k1_upper: int = 0
    k2_upper: int = 0
    # smallest singular values of B2'A1 and P1'Q2
    sigma_min_front: float = float("nan")
    sigma_min_back: float = float("nan")


Phase = Literal["diagonal", "fixed-row", "fixed-col", "back-test-rows", "back-test-cols"]


@dataclass(frozen=True)
class TraceStep:
    """One white-noise test made during order selection (1-based block corner)."""

    block_rows: tuple[int, int]
    block_cols: tuple[int, int]
    statistic: float
    threshold: float
    rejected: bool
    phase: Phase
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "block_rows": list(self.block_rows),
            "block_cols": list(self.block_cols),
            "statistic": self.statistic,
            "threshold": self.threshold,
            "rejected": self.rejected,
            "phase": self.phase,
            "note": self.note,
        }


@dataclass
class OrderTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def append(self, step: TraceStep) -> None:
        self.steps.append(step)

    def phases(self) -> list[str]:
        return [s.phase for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def to_list(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]


@dataclass(frozen=True)
class FactorFit:
    """Result of a full fit: orders, loadings, denoiser and recovered factors.

    ``denoiser`` is ``None`` for the ratio-based baseline and for fits where
    one of the selected orders is zero (no factor to recover).
    ``mean`` is the per-cell temporal mean removed before estimation.
    """

    r1: int
    r2: int
    loadings: LoadingSet
    denoiser: DenoiserBasis | None
    factors: np.ndarray
    common: np.ndarray
    order_trace: OrderTrace
    mean: np.ndarray | None = None
    method: str = "gt"
