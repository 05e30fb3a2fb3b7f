"""AR(1) forecasting of recovered factors and rolling-origin evaluation.

Three forecasters are compared:

* ``gt``  -- two-way transformed factor fit, scalar AR(1) per factor entry,
  ``Y_hat = mean + A1 X_hat P1'``;
* ``wlc`` -- the same with the ratio-order projection fit;
* ``sar`` -- an independent scalar AR(1) for every cell of ``Y_t``.

All fits use only the prefix ``Y_1..Y_tau`` of the series at origin ``tau``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import MatrixSeries, as_series
from .errors import EstimationError, InvalidArgumentError
from .estimator import FitConfig, fit, wlc_fit, wlc_orders
from .metrics import DistanceReport, forecast_errors

FORECAST_METHODS = ("gt", "wlc", "sar")
EXCLUDED_FLAG_FRACTION = 0.05


@dataclass(frozen=True)
class ARFit:
    phi: np.ndarray
    intercept: np.ndarray
    resid_var: np.ndarray


def fit_ar1_many(X) -> ARFit:
    """Least-squares ``x_t = c + phi x_{t-1} + e_t`` for every column of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 3:
        raise InvalidArgumentError(f"AR(1) fit needs n >= 3, got {n}")
    y, x = X[1:], X[:-1]
    xm, ym = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - xm, y - ym
    sxx = np.sum(xc * xc, axis=0)
    scale = np.maximum(np.max(np.abs(X), axis=0), 1.0)
    if np.any(np.ptp(X, axis=0) == 0) or np.any(sxx <= (1e-14 * scale) ** 2 * n):
        raise EstimationError("degenerate series", stage="ar1")
    phi = np.sum(xc * yc, axis=0) / sxx
    c = ym - phi * xm
    resid = y - c - phi * x
    return ARFit(phi, c, np.sum(resid * resid, axis=0) / max(n - 3, 1))


def fit_ar1(x) -> ARFit:
    """Scalar AR(1) with intercept; ``phi``, ``intercept`` are 0-d arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("fit_ar1 expects a 1-d series")
    res = fit_ar1_many(x[:, None])
    return ARFit(res.phi[0], res.intercept[0], res.resid_var[0])


def forecast_h(fit_: ARFit, last_value, h: int):
    """``c (1 + phi + ... + phi^(h-1)) + phi^h x_n``."""
    if h < 1:
        raise InvalidArgumentError("h must be >= 1")
    phi = np.asarray(fit_.phi, dtype=float)
    c = np.asarray(fit_.intercept, dtype=float)
    geom = np.zeros_like(phi)
    power = np.ones_like(phi)
    for _ in range(h):
        geom = geom + power
        power = power * phi
    out = c * geom + power * np.asarray(last_value, dtype=float)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# per-method forecasters: prefix (tau, p1, p2) -> {h: Y_hat}


def _factor_forecast(res, horizons) -> dict[int, np.ndarray]:
    p1, p2 = res.mean.shape
    if res.r1 == 0 or res.r2 == 0:
        return {h: res.mean.copy() for h in horizons}
    X = res.factors.reshape(len(res.factors), -1)
    ar = fit_ar1_many(X)
    A1, P1 = res.loadings.A1, res.loadings.P1
    out = {}
    for h in horizons:
        Xh = forecast_h(ar, X[-1], h).reshape(res.r1, res.r2)
        out[h] = res.mean + A1 @ Xh @ P1.T
    return out


def _forecast_gt(prefix, horizons, config: FitConfig):
    return _factor_forecast(fit(prefix, config), horizons)


def _forecast_wlc(prefix, horizons, config: FitConfig):
    return _factor_forecast(wlc_fit(prefix, config.k0, config.orders), horizons)


def _forecast_sar(prefix, horizons, config: FitConfig):
    data = prefix.data
    n, p1, p2 = data.shape
    flat = data.reshape(n, -1)
    ar = fit_ar1_many(flat)
    return {h: forecast_h(ar, flat[-1], h).reshape(p1, p2) for h in horizons}


_FORECASTERS = {"gt": _forecast_gt, "wlc": _forecast_wlc, "sar": _forecast_sar}


def forecast_matrix(series, method: str, horizons, config: FitConfig | None = None):
    """Forecast ``Y_{n+h}`` for each ``h`` in ``horizons`` from the whole series."""
    if method not in _FORECASTERS:
        raise InvalidArgumentError(f"unknown method {method!r}; choose from {FORECAST_METHODS}")
    return _FORECASTERS[method](as_series(series), list(horizons), config or FitConfig())


# --------------------------------------------------------------------------
# rolling-origin evaluation


@dataclass
class ForecastEvaluation:
    """Forecast errors of one method over a set of origins.

    ``errors[h]`` maps ``"FE_F"`` and ``"FE_2"`` to the mean over the
    successful origins. ``excluded`` lists ``(origin, message)`` pairs.
    """

    method: str
    horizons: list[int]
    origins: list[int]
    errors: dict[int, dict[str, float]]
    excluded: list[tuple[int, str]] = field(default_factory=list)
    orders: tuple[int, int] | None = None

    @property
    def excluded_fraction(self) -> float:
        return len(self.excluded) / len(self.origins) if self.origins else 0.0

    @property
    def flagged(self) -> bool:
        return self.excluded_fraction > EXCLUDED_FLAG_FRACTION

    @property
    def reports(self) -> list[DistanceReport]:
        out = []
        for h in self.horizons:
            out.append(DistanceReport(self.errors[h]["FE_F"], "FE_F"))
            out.append(DistanceReport(self.errors[h]["FE_2"], "FE_2"))
        return out

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "horizons": list(self.horizons),
            "origins": [self.origins[0], self.origins[-1]] if self.origins else [],
            "n_origins": len(self.origins),
            "orders": list(self.orders) if self.orders is not None else None,
            "errors": {str(h): dict(v) for h, v in self.errors.items()},
            "excluded": [[o, m] for o, m in self.excluded],
            "excluded_fraction": self.excluded_fraction,
            "flagged": self.flagged,
        }


def _one_origin(args):
    data, tau, method, horizons, config = args
    try:
        fc = _FORECASTERS[method](MatrixSeries(data[:tau]), horizons, config)
    except (EstimationError, InvalidArgumentError, np.linalg.LinAlgError) as exc:
        return tau, None, str(exc)
    return tau, fc, None


def _pin_orders(series: MatrixSeries, method: str, first: int, config: FitConfig) -> FitConfig:
    """Fix the orders from the fit at the first origin."""
    prefix = MatrixSeries(series.data[:first])
    if method == "gt":
        res = fit(prefix, config)
        return replace(config, orders=(res.r1, res.r2))
    if method == "wlc":
        return replace(config, orders=wlc_orders(prefix, config.k0))
    return config


def rolling_eval(
    series,
    method: str,
    horizons=(1,),
    origins=None,
    config: FitConfig | None = None,
    refit_orders: bool = False,
    threads: int = 1,
) -> ForecastEvaluation:
    """Rolling-origin ``h``-step forecast errors.

    For each origin ``tau`` (1-based length of the fitting prefix) the model
    is fitted on ``Y_1..Y_tau`` and ``Y_{tau+h}`` is forecast. Unless
    ``refit_orders`` is set, the factor orders are selected once at the first
    origin and kept. Origins whose fit fails are excluded and listed.
    """
    series = as_series(series)
    config = config or FitConfig()
    if method not in _FORECASTERS:
        raise InvalidArgumentError(f"unknown method {method!r}; choose from {FORECAST_METHODS}")
    horizons = sorted({int(h) for h in horizons})
    if not horizons or horizons[0] < 1:
        raise InvalidArgumentError("horizons must be positive integers")
    n, hmax = series.n, horizons[-1]
    if origins is None:
        origins = range(max(2, n // 2), n - hmax + 1)
    origins = sorted({int(o) for o in origins})
    if not origins or origins[0] < 2 or origins[-1] > n - hmax:
        raise InvalidArgumentError(f"origins must lie within 2..{n - hmax}")

    excluded: list[tuple[int, str]] = []
    orders = config.orders
    if not refit_orders and orders is None and method != "sar":
        try:
            config = _pin_orders(series, method, origins[0], config)
            orders = config.orders
        except (EstimationError, np.linalg.LinAlgError) as exc:
            excluded.append((origins[0], str(exc)))

    jobs = [(series.data, tau, method, horizons, config) for tau in origins
            if tau not in {o for o, _ in excluded}]
    if threads == 1 or len(jobs) < 2:
        results = [_one_origin(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads or None) as pool:
            results = list(pool.map(_one_origin, jobs, chunksize=max(1, len(jobs) // 16)))

    preds: dict[int, list] = {h: [] for h in horizons}
    truth: dict[int, list] = {h: [] for h in horizons}
    for tau, fc, err in sorted(results, key=lambda r: r[0]):
        if fc is None:
            excluded.append((tau, err))
            continue
        for h in horizons:
            preds[h].append(fc[h])
            truth[h].append(series.data[tau + h - 1])
    excluded.sort()
    if len(excluded) == len(origins):
        raise EstimationError(f"every origin failed; first error: {excluded[0][1]}",
                              stage="rolling evaluation")
    errors = {
        h: {
            "FE_F": forecast_errors(preds[h], truth[h], "frobenius"),
            "FE_2": forecast_errors(preds[h], truth[h], "spectral"),
        }
        for h in horizons
    }
    return ForecastEvaluation(method, horizons, origins, errors, excluded, orders)
