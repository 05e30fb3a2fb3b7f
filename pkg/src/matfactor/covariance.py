"""Sample second-moment aggregates of a matrix-variate series.

Column ``i`` of ``Y_t`` is written ``y_{i,t}`` (a ``p1``-vector). The lag-``k``
cross-covariance uses divisor ``n`` over ``t = k+1..n``:

    Sigma_ij(k) = (1/n) sum_t y_{i,t} y_{j,t-k}'

``M`` aggregates ``sum_k sum_{i,j} Sigma_ij(k) Sigma_ij(k)'`` and ``S``
aggregates the covariances between the columns and the white-noise
coordinates ``B1' Y_t Q1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import MatrixSeries, as_series, center, transpose_series, vectorize
from .errors import InvalidArgumentError

_CHUNK = 65536
_LONG_SERIES = 100_000


@dataclass(frozen=True)
class CovAggregate:
    matrix: np.ndarray
    kind: Literal["M", "S"]
    k0: int | None = None


def _cross_product(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``X' Z`` with Kahan-compensated accumulation over row chunks for long series."""
    if X.shape[0] <= _LONG_SERIES:
        return X.T @ Z
    total = np.zeros((X.shape[1], Z.shape[1]))
    comp = np.zeros_like(total)
    for start in range(0, X.shape[0], _CHUNK):
        part = X[start:start + _CHUNK].T @ Z[start:start + _CHUNK] - comp
        new = total + part
        comp = (new - total) - part
        total = new
    return total


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _rowmajor(data: np.ndarray) -> np.ndarray:
    """Flatten ``Y_t`` row-major: column index ``a * p2 + i`` holds ``Y_t[a, i]``."""
    n = data.shape[0]
    return data.reshape(n, -1)


def _lag_tensor(data: np.ndarray, k: int) -> np.ndarray:
    """All lag-``k`` cross-covariances as a ``(p1, p2, p1, p2)`` tensor ``C[a,i,b,j]``."""
    n, p1, p2 = data.shape
    flat = _rowmajor(data)
    C = _cross_product(flat[k:], flat[: n - k]) / n
    return C.reshape(p1, p2, p1, p2)


def _check_lag(n: int, k: int, name: str = "k") -> None:
    if not 1 <= k <= n - 1:
        raise InvalidArgumentError(f"{name}={k} must lie in 1..{n - 1}")


def lagged_cross_cov(series: MatrixSeries, i: int, j: int, k: int) -> np.ndarray:
    """``Sigma_ij(k)`` for 0-based column indices ``i, j``."""
    series = center(as_series(series))
    n, p1, p2 = series.shape
    _check_lag(n, k)
    if not (0 <= i < p2 and 0 <= j < p2):
        raise InvalidArgumentError(f"column index out of range 0..{p2 - 1}")
    Y = series.data
    return Y[k:, :, i].T @ Y[: n - k, :, j] / n


def omega_hat(series: MatrixSeries, i: int) -> np.ndarray:
    """Sample ``Cov(y_{i,t}, vec(Y_t))`` as a ``p1 x (p1 p2)`` matrix."""
    series = center(as_series(series))
    if not 0 <= i < series.p2:
        raise InvalidArgumentError(f"column index {i} out of range 0..{series.p2 - 1}")
    return series.data[:, :, i].T @ vectorize(series) / series.n


def build_M_pair(series: MatrixSeries, k0: int) -> tuple[CovAggregate, CovAggregate]:
    """Front and back aggregates ``(M1, M2)`` sharing one pass over the lags.

    The back aggregate is ``M`` of the transposed series; both are
    contractions of the same lag tensor, so it is formed once per lag.
    """
    series = center(as_series(series))
    n, p1, p2 = series.shape
    _check_lag(n, k0, "k0")
    M1 = np.zeros((p1, p1))
    M2 = np.zeros((p2, p2))
    for k in range(1, k0 + 1):
        C = _lag_tensor(series.data, k)
        G1 = C.reshape(p1, -1)
        M1 += G1 @ G1.T
        G2 = C.transpose(1, 0, 2, 3).reshape(p2, -1)
        M2 += G2 @ G2.T
    return CovAggregate(_symmetrize(M1), "M", k0), CovAggregate(_symmetrize(M2), "M", k0)


def build_M(series: MatrixSeries, k0: int) -> CovAggregate:
    """``M1 = sum_{k<=k0} sum_{i,j} Sigma_ij(k) Sigma_ij(k)'`` (``p1 x p1``)."""
    series = center(as_series(series))
    n, p1, _ = series.shape
    _check_lag(n, k0, "k0")
    M = np.zeros((p1, p1))
    for k in range(1, k0 + 1):
        G = _lag_tensor(series.data, k).reshape(p1, -1)
        M += G @ G.T
    return CovAggregate(_symmetrize(M), "M", k0)


def build_M_back(series: MatrixSeries, k0: int) -> CovAggregate:
    return build_M(transpose_series(as_series(series)), k0)


def build_S(series: MatrixSeries, B1: np.ndarray, Q1: np.ndarray) -> CovAggregate:
    """``S1 = sum_i [Omega_i (Q1 kron B1)][Omega_i (Q1 kron B1)]'``.

    ``Omega_i (Q1 kron B1)`` equals ``(1/n) sum_t y_{i,t} vec(B1' Y_t Q1)'``,
    so the Kronecker factor is never formed.
    """
    series = center(as_series(series))
    n, p1, p2 = series.shape
    B1 = np.asarray(B1, dtype=float)
    Q1 = np.asarray(Q1, dtype=float)
    if B1.ndim != 2 or B1.shape[0] != p1 or Q1.ndim != 2 or Q1.shape[0] != p2:
        raise InvalidArgumentError(
            f"B1 must have {p1} rows and Q1 {p2} rows, got {B1.shape} and {Q1.shape}"
        )
    if B1.shape[1] == 0 or Q1.shape[1] == 0:
        return CovAggregate(np.zeros((p1, p1)), "S")
    Z = np.einsum("ba,tbc,cd->tad", B1, series.data, Q1, optimize=True)
    C = _cross_product(_rowmajor(series.data), Z.reshape(n, -1)) / n
    G = C.reshape(p1, -1)
    return CovAggregate(_symmetrize(G @ G.T), "S")


def build_S_back(series: MatrixSeries, B1: np.ndarray, Q1: np.ndarray) -> CovAggregate:
    """``S2``: :func:`build_S` on the transposed data with the complements swapped."""
    return build_S(transpose_series(as_series(series)), Q1, B1)
