"""White-noise tests for an ``n x d`` multivariate series.

Two tests share one calling convention, ``test(x, m, alpha) -> WNResult``:

* :func:`ljung_box` -- multivariate portmanteau statistic with a chi-squared
  threshold on ``d**2 * m`` degrees of freedom. Meant for small ``d``.
* :func:`rank_tm` -- maximum absolute lagged rank cross-correlation,
  calibrated by the Gumbel limit of a maximum of ``N = d**2 * m``
  asymptotically standard normal variables. Meant for large ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy import stats

from .errors import DegenerateCovarianceError, InvalidArgumentError, RankCorrelationError

MAX_LB_DF = 1_000_000


@dataclass(frozen=True)
class WNResult:
    statistic: float
    threshold: float
    alpha: float
    reject: bool
    params: dict = field(default_factory=dict)


class WhiteNoiseTest(Protocol):
    def __call__(self, x: np.ndarray, m: int, alpha: float) -> WNResult: ...


def _as_panel(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected an (n, d) array, got shape {x.shape}")
    return x


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha={alpha} must lie in (0, 1)")


def ljung_box(x, m: int, alpha: float = 0.05) -> WNResult:
    """Multivariate Ljung-Box statistic.

    ``Q = n (n + 2) sum_{l=1..m} tr(C_l' C_0^-1 C_l C_0^-1) / (n - l)``,
    which equals the classical univariate statistic when ``d = 1``.
    """
    x = _as_panel(x)
    _check_alpha(alpha)
    n, d = x.shape
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    if n <= m + d:
        raise InvalidArgumentError(f"need n > m + d, got n={n}, m={m}, d={d}")
    df = d * d * m
    if df > MAX_LB_DF:
        raise InvalidArgumentError(
            f"{df} degrees of freedom is too many for the portmanteau test; use rank_tm"
        )
    x = x - x.mean(axis=0)
    C0 = x.T @ x / n
    evals = np.linalg.eigvalsh(C0)
    if evals[-1] <= 0 or evals[0] / evals[-1] <= 1e-12:
        raise DegenerateCovarianceError(
            "degenerate covariance; reduce block or use rank test", stage="white-noise test"
        )
    # whitening turns tr(C_l' C0^-1 C_l C0^-1) into a squared Frobenius norm
    L = np.linalg.cholesky(C0)
    u = np.linalg.solve(L, x.T).T
    Q = 0.0
    for lag in range(1, m + 1):
        C = u[lag:].T @ u[: n - lag] / n
        Q += np.sum(C * C) / (n - lag)
    Q *= n * (n + 2)
    threshold = float(stats.chi2.ppf(1.0 - alpha, df))
    return WNResult(float(Q), threshold, alpha, bool(Q >= threshold), {"df": df, "n": n, "d": d, "m": m})


def gumbel_threshold(N: int, alpha: float) -> tuple[float, dict]:
    """Critical value for the maximum of ``N`` absolute standard normals.

    Uses ``b_N + (-log(-log(1 - alpha))) / a_N`` with ``a_N = sqrt(2 log N)``
    and ``b_N = a_N - (log log N + log 4 pi) / (2 a_N)``. For ``N < 3`` the
    expansion is meaningless and the exact independent-normal quantile is
    used instead.
    """
    if N < 3:
        level = 1.0 - (1.0 - alpha) ** (1.0 / N)
        thr = float(stats.norm.isf(level / 2.0))
        return thr, {"N": N, "exact": True}
    logN = math.log(N)
    a_N = math.sqrt(2.0 * logN)
    b_N = a_N - (math.log(logN) + math.log(4.0 * math.pi)) / (2.0 * a_N)
    thr = b_N - math.log(-math.log(1.0 - alpha)) / a_N
    return thr, {"N": N, "a_N": a_N, "b_N": b_N, "exact": False}


def rank_cross_correlations(x, m: int) -> np.ndarray:
    """Lagged rank cross-correlations, shape ``(m, d, d)``.

    Entry ``[l-1, a, b]`` is

        sum_{t>l} (R_a,t - c_a)(R_b,t-l - c_b) / sqrt(V_a V_b)

    with ``R`` the ranks over the whole sample (average ranks for ties),
    ``c`` their mean ``(n + 1) / 2`` and ``V`` their total sum of squares,
    i.e. the usual sample autocorrelation applied to the rank series.
    """
    x = _as_panel(x)
    n, d = x.shape
    R = stats.rankdata(x, axis=0)
    C = R - R.mean(axis=0)
    V = np.sum(C * C, axis=0)
    if np.any(V == 0):
        raise RankCorrelationError("rank correlation undefined for a constant component",
                                   stage="white-noise test")
    C = C / np.sqrt(V)
    out = np.empty((m, d, d))
    for lag in range(1, m + 1):
        out[lag - 1] = C[lag:].T @ C[: n - lag]
    return out


def rank_tm(x, m: int, alpha: float = 0.05) -> WNResult:
    """Maximum absolute scaled rank cross-correlation ``T(m)``."""
    x = _as_panel(x)
    _check_alpha(alpha)
    n, d = x.shape
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    if n <= m + 10:
        raise InvalidArgumentError(f"need n > m + 10, got n={n}, m={m}")
    rho = rank_cross_correlations(x, m)
    scale = np.sqrt(n - np.arange(1, m + 1))[:, None, None]
    T = float(np.max(np.abs(rho) * scale))
    N = d * d * m
    thr, params = gumbel_threshold(N, alpha)
    params.update({"n": n, "d": d, "m": m})
    return WNResult(T, thr, alpha, bool(T >= thr), params)


TESTS: dict[str, Callable[..., WNResult]] = {"ljung_box": ljung_box, "rank_tm": rank_tm}


def get_test(name: str) -> Callable[..., WNResult]:
    try:
        return TESTS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown test {name!r}; choose from {sorted(TESTS)}") from None
