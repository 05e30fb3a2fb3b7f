"""Loading estimation, projected-PCA denoising and factor recovery.

The pipeline in :func:`fit`:

1. centre the data and form the lagged aggregates ``M1``, ``M2``;
2. choose ``(r1, r2)`` by diagonal-path white-noise testing (or take them
   from the config);
3. ``A1``/``B1`` are the top/bottom eigenvectors of ``M1``, ``P1``/``Q1``
   those of ``M2``;
4. eigen-analyse ``S1``, ``S2``, drop the ``k1``/``k2`` leading (diverging
   noise) directions and align the rest with the loadings via ``Xi``;
5. ``X_t = (B2' A1)^-1 B2' Y_t Q2 (P1' Q2)^-1``.

:func:`wlc_fit` is the ratio-based baseline: orders from the sharpest drop
in the ``M`` spectra and factors by orthogonal projection ``A1' Y_t P1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import DenoiserBasis, FactorFit, LoadingSet, MatrixSeries, OrderTrace, as_series, center
from .covariance import build_M_pair, build_S, build_S_back
from .errors import AlignmentError, EstimationError, InvalidArgumentError, NoSignalError
from .order_select import diagonal_path_select, transform_W, truncate_for_test
from .spectral import EigenDecomp, clamp_spectrum, first_argmin_ratio, sym_eigen
from .whitenoise import TESTS, get_test

RCOND_MIN = 1e-10
# S eigenvalues below this fraction of (mean ||Y_t||_F^2)^2 are round-off
S_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Estimation settings.

    ``orders`` and ``k`` are ``None`` for automatic selection or a pair of
    integers to fix them. ``small_dim_path`` takes ``B2``/``Q2`` directly as
    the bottom eigenvectors of ``S1``/``S2`` instead of the ``Xi`` alignment.
    """

    k0: int = 2
    alpha: float = 0.05
    m: int = 10
    test: str = "rank_tm"
    epsilon: float = 0.9
    k: tuple[int, int] | None = None
    small_dim_path: bool = False
    orders: tuple[int, int] | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError(f"alpha={self.alpha} must lie in (0, 1)")
        if self.k0 < 1:
            raise InvalidArgumentError("k0 must be >= 1")
        if self.m < 1:
            raise InvalidArgumentError("m must be >= 1")
        if not 0 < self.epsilon <= 1:
            raise InvalidArgumentError(f"epsilon={self.epsilon} must lie in (0, 1]")
        if self.test not in TESTS:
            raise InvalidArgumentError(f"unknown test {self.test!r}")
        for name in ("k", "orders"):
            val = getattr(self, name)
            if val is not None:
                val = tuple(int(v) for v in val)
                if len(val) != 2 or min(val) < 0:
                    raise InvalidArgumentError(f"{name} must be a pair of nonnegative integers")
                object.__setattr__(self, name, val)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0, "alpha": self.alpha, "m": self.m, "test": self.test,
            "epsilon": self.epsilon,
            "k": list(self.k) if self.k is not None else None,
            "small_dim_path": self.small_dim_path,
            "orders": list(self.orders) if self.orders is not None else None,
        }


def _loadings_from_eigen(eig1: EigenDecomp, eig2: EigenDecomp, r1: int, r2: int) -> LoadingSet:
    p1, p2 = len(eig1.values), len(eig2.values)
    if not (1 <= r1 <= p1 and 1 <= r2 <= p2):
        raise InvalidArgumentError(f"orders ({r1}, {r2}) out of range for {p1}x{p2} data")
    v1, v2 = clamp_spectrum(eig1.values), clamp_spectrum(eig2.values)
    if v1[r1 - 1] <= 0 or v2[r2 - 1] <= 0:
        raise NoSignalError("no dynamic signal detected", stage="loadings")
    return LoadingSet(
        A1=eig1.vectors[:, :r1], B1=eig1.vectors[:, r1:],
        P1=eig2.vectors[:, :r2], Q1=eig2.vectors[:, r2:],
        eig_M1=v1, eig_M2=v2,
    )


def _m_eigen(series: MatrixSeries, k0: int) -> tuple[EigenDecomp, EigenDecomp]:
    M1, M2 = build_M_pair(series, k0)
    return sym_eigen(M1.matrix), sym_eigen(M2.matrix)


def estimate_loadings(series: MatrixSeries, r1: int, r2: int, k0: int = 2) -> LoadingSet:
    """Loadings from the top ``r1``/``r2`` eigenvectors of ``M1``/``M2``."""
    series = center(as_series(series))
    eig1, eig2 = _m_eigen(series, k0)
    return _loadings_from_eigen(eig1, eig2, r1, r2)


def select_k(spectrum, r_hat: int, n: int) -> tuple[int, int]:
    """Number of diverging noise directions from an ``S`` spectrum.

    Returns ``(k, k_upper)`` where ``k`` is the first argmin of
    ``mu[j+1] / mu[j]`` over ``j = 1..k_upper`` and
    ``k_upper = min(floor(sqrt(p)), floor(sqrt(n)), p - r_hat, 5)``.
    The scan never goes past ``p - r_hat - 1`` so that ``p - k > r_hat``.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    p = len(spectrum)
    k_upper = min(math.isqrt(p), math.isqrt(max(n, 0)), p - r_hat, 5)
    if k_upper < 1:
        warnings.warn(f"k upper bound {k_upper} < 1 (p={p}, r={r_hat}); using k=0", stacklevel=2)
        return 0, k_upper
    jmax = min(k_upper, p - r_hat - 1)
    if jmax < 1:
        return 0, k_upper
    return first_argmin_ratio(spectrum, jmax), k_upper


def _floored(values: np.ndarray, floor: float) -> np.ndarray:
    # on noiseless data S is pure round-off whose leading directions lie in
    # span(A1); without an absolute floor the ratio rule would drop them
    values = np.asarray(values, dtype=float).copy()
    values[values <= floor] = 0.0
    return values


def _align(Bstar: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Top-``r`` eigenvectors of ``Bstar' A A' Bstar``."""
    C = Bstar.T @ A
    return sym_eigen(C @ C.T).vectors[:, : A.shape[1]]


def _sigma_min_check(K: np.ndarray, what: str, scale: float = 1.0) -> float:
    """Smallest singular value of ``K``; ``scale`` bounds its largest possible one."""
    s = np.linalg.svd(K, compute_uv=False)
    # relative to the factor norms, not to s[0]: a K with every singular
    # value at round-off level is singular even if it is well conditioned
    if s.size == 0 or s[-1] <= RCOND_MIN * scale:
        raise AlignmentError(f"alignment failure: {what} is singular", stage="denoiser")
    return float(s[-1])


def denoiser(
    series: MatrixSeries,
    loadings: LoadingSet,
    k1: int,
    k2: int,
    small_dim_path: bool = False,
    S: tuple[np.ndarray, np.ndarray] | None = None,
) -> DenoiserBasis:
    """Two-way projected-PCA basis ``B2 = B2* Xi1``, ``Q2 = Q2* Xi2``.

    ``B2*`` spans the ``p1 - k1`` smallest eigen-directions of ``S1`` and
    ``Xi1`` picks the ``r1`` directions inside it best aligned with ``A1``.
    ``S`` may carry precomputed ``(S1, S2)`` matrices.
    """
    series = center(as_series(series))
    p1, p2 = series.p1, series.p2
    A1, P1 = loadings.A1, loadings.P1
    r1, r2 = A1.shape[1], P1.shape[1]
    for k, p, r, side in ((k1, p1, r1, "k1"), (k2, p2, r2, "k2")):
        if k < 0 or (k > 0 and k >= p - r):
            raise InvalidArgumentError(f"{side}={k} must satisfy 0 <= {side} < {p - r}")
    if S is None:
        S1 = build_S(series, loadings.B1, loadings.Q1).matrix
        S2 = build_S_back(series, loadings.B1, loadings.Q1).matrix
    else:
        S1, S2 = S
    eS1, eS2 = sym_eigen(S1), sym_eigen(S2)
    if small_dim_path:
        B2star, Q2star = eS1.vectors[:, p1 - r1:], eS2.vectors[:, p2 - r2:]
        Xi1, Xi2 = np.eye(r1), np.eye(r2)
    else:
        B2star, Q2star = eS1.vectors[:, k1:], eS2.vectors[:, k2:]
        Xi1, Xi2 = _align(B2star, A1), _align(Q2star, P1)
    B2, Q2 = B2star @ Xi1, Q2star @ Xi2
    s_front = _sigma_min_check(B2.T @ A1, "B2'A1")
    s_back = _sigma_min_check(P1.T @ Q2, "P1'Q2")
    return DenoiserBasis(
        k1=k1, k2=k2, B2star=B2star, Q2star=Q2star, Xi1=Xi1, Xi2=Xi2, B2=B2, Q2=Q2,
        eig_S1=clamp_spectrum(eS1.values), eig_S2=clamp_spectrum(eS2.values),
        sigma_min_front=s_front, sigma_min_back=s_back,
    )


def recover_factors(series, A1, P1, B2, Q2) -> np.ndarray:
    """``X_t = (B2' A1)^-1 B2' Y_t Q2 (P1' Q2)^-1`` via linear solves.

    The series is used as given (no centring), so the map is linear in ``Y``.
    """
    data = series.data if isinstance(series, MatrixSeries) else np.asarray(series, dtype=float)
    K1 = B2.T @ A1
    K2 = P1.T @ Q2
    _sigma_min_check(K1, "B2'A1", np.linalg.norm(B2, 2) * np.linalg.norm(A1, 2))
    _sigma_min_check(K2, "P1'Q2", np.linalg.norm(P1, 2) * np.linalg.norm(Q2, 2))
    Z = np.einsum("ab,tac,cd->tbd", B2, data, Q2, optimize=True)
    left = np.linalg.solve(K1, Z)
    return np.linalg.solve(K2.T, left.transpose(0, 2, 1)).transpose(0, 2, 1)


def _common(A1, factors, P1) -> np.ndarray:
    return np.einsum("ab,tbc,dc->tad", A1, factors, P1, optimize=True)


def _empty_fit(series: MatrixSeries, eig1, eig2, r1, r2, trace, mean, method) -> FactorFit:
    n, p1, p2 = series.shape
    loadings = LoadingSet(
        A1=eig1.vectors[:, :r1], B1=eig1.vectors[:, r1:],
        P1=eig2.vectors[:, :r2], Q1=eig2.vectors[:, r2:],
        eig_M1=clamp_spectrum(eig1.values), eig_M2=clamp_spectrum(eig2.values),
    )
    return FactorFit(r1, r2, loadings, None, np.zeros((n, r1, r2)), np.zeros((n, p1, p2)),
                     trace, mean, method)


def select_orders(series: MatrixSeries, config: FitConfig,
                  eig: tuple[EigenDecomp, EigenDecomp] | None = None) -> tuple[int, int, OrderTrace]:
    """Run the diagonal-path search on the rotated (and possibly truncated) data."""
    series = center(as_series(series))
    eig1, eig2 = eig if eig is not None else _m_eigen(series, config.k0)
    W = transform_W(series, eig1.vectors, eig2.vectors)
    W = truncate_for_test(W, series.n, config.epsilon)
    return diagonal_path_select(W, get_test(config.test), config.m, config.alpha)


def _staged(stage: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except EstimationError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise
    except np.linalg.LinAlgError as exc:
        raise EstimationError(str(exc), stage=stage) from exc


def fit(series, config: FitConfig | None = None) -> FactorFit:
    """Full two-way transformed factor fit (see module docstring)."""
    config = config or FitConfig()
    raw = as_series(series)
    mean = raw.data.mean(axis=0)
    series = center(raw)
    n, p1, p2 = series.shape
    eig1, eig2 = _staged("aggregates", _m_eigen, series, config.k0)

    if config.orders is not None:
        r1, r2 = config.orders
        trace = OrderTrace()
    else:
        r1, r2, trace = _staged("order selection", select_orders, series, config, (eig1, eig2))
    if r1 == 0 or r2 == 0:
        return _empty_fit(series, eig1, eig2, r1, r2, trace, mean, "gt")

    loadings = _staged("loadings", _loadings_from_eigen, eig1, eig2, r1, r2)
    S1 = build_S(series, loadings.B1, loadings.Q1).matrix
    S2 = build_S_back(series, loadings.B1, loadings.Q1).matrix
    k1_upper = k2_upper = 0
    if config.k is not None:
        k1, k2 = config.k
    elif config.small_dim_path:
        k1 = k2 = 0
    else:
        floor = S_FLOOR_REL * float(np.sum(series.data ** 2) / n) ** 2
        k1, k1_upper = select_k(_floored(sym_eigen(S1).values, floor), r1, n)
        k2, k2_upper = select_k(_floored(sym_eigen(S2).values, floor), r2, n)
    den = _staged("denoiser", denoiser, series, loadings, k1, k2,
                  small_dim_path=config.small_dim_path, S=(S1, S2))
    den = replace(den, k1_upper=k1_upper, k2_upper=k2_upper)
    factors = _staged("factor recovery", recover_factors, series,
                      loadings.A1, loadings.P1, den.B2, den.Q2)
    return FactorFit(r1, r2, loadings, den, factors, _common(loadings.A1, factors, loadings.P1),
                     trace, mean, "gt")


def wlc_orders(series, k0: int = 2,
               eig: tuple[EigenDecomp, EigenDecomp] | None = None) -> tuple[int, int]:
    """Ratio-based orders: argmin of ``lambda[j+1] / lambda[j]`` over ``j <= p/2``."""
    if eig is None:
        eig = _m_eigen(center(as_series(series)), k0)
    orders = []
    for e in eig:
        j = first_argmin_ratio(e.values, len(e.values) // 2)
        orders.append(max(j, 1))
    return orders[0], orders[1]


def wlc_fit(series, k0: int = 2, orders: tuple[int, int] | None = None) -> FactorFit:
    """Ratio-order baseline with projection factors ``A1' Y_t P1``."""
    raw = as_series(series)
    mean = raw.data.mean(axis=0)
    series = center(raw)
    eig = _staged("aggregates", _m_eigen, series, k0)
    r1, r2 = orders if orders is not None else wlc_orders(series, k0, eig)
    loadings = _staged("loadings", _loadings_from_eigen, eig[0], eig[1], r1, r2)
    factors = np.einsum("ab,tac,cd->tbd", loadings.A1, series.data, loadings.P1, optimize=True)
    return FactorFit(r1, r2, loadings, None, factors,
                     _common(loadings.A1, factors, loadings.P1), OrderTrace(), mean, "wlc")


def project_common(fit_result: FactorFit, series) -> np.ndarray:
    """Apply the fitted linear map ``Y_t -> A1 X_t P1'`` to ``series`` as given.

    No centring is done, so for data with a nonzero mean the caller decides
    what to subtract. Zero-order fits map everything to zero.
    """
    data = series.data if isinstance(series, MatrixSeries) else np.asarray(series, dtype=float)
    if data.ndim == 2:
        data = data[None]
    A1, P1 = fit_result.loadings.A1, fit_result.loadings.P1
    if fit_result.r1 == 0 or fit_result.r2 == 0:
        return np.zeros_like(data)
    if fit_result.denoiser is None:
        X = np.einsum("ab,tac,cd->tbd", A1, data, P1, optimize=True)
    else:
        X = recover_factors(data, A1, P1, fit_result.denoiser.B2, fit_result.denoiser.Q2)
    return _common(A1, X, P1)
