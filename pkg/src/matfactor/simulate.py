"""Simulation of the two-way transformed matrix factor model and a Monte Carlo harness.

The generating process is

    Y_t = L1 F_t R1' + L2 Z21_t R1' + L1 Z12_t R2' + L2 Z22_t R2',
    F_t = Phi F_{t-1} Psi' + N_t,

with ``L = [L1, L2]`` (``p1 x p1``), ``R = [R1, R2]`` (``p2 x p2``), diagonal
``Phi``, ``Psi`` and independent standard normal ``Z`` blocks and ``N_t``.
Loading strength is set by dividing the uniform draws by powers of the
dimension (see :func:`gen_model`).

Every replication ``i`` of a Monte Carlo cell draws from its own stream,
``default_rng(SeedSequence(seed, spawn_key=(i,)))``, so results do not
depend on the order in which replications are run.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from .core import MatrixSeries
from .errors import EstimationError, InvalidArgumentError
from .estimator import FitConfig, fit, project_common, wlc_fit
from .metrics import factor_error, subspace_dist_general


@dataclass(frozen=True)
class SimConfig:
    p1: int
    p2: int
    r1: int = 2
    r2: int = 3
    k1: int = 1
    k2: int = 2
    delta1: float = 0.0
    delta2: float = 0.9
    n: int = 300
    seed: int = 0
    reps: int = 1
    burn_in: int = 200

    def __post_init__(self):
        for name in ("p1", "p2", "r1", "r2", "n"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.r1 > self.p1 or self.r2 > self.p2:
            raise InvalidArgumentError("r1 <= p1 and r2 <= p2 required")
        if not (0 <= self.k1 and (self.k1 == 0 or self.k1 < self.p1 - self.r1)):
            raise InvalidArgumentError(f"k1={self.k1} must satisfy 0 <= k1 < p1 - r1 = {self.p1 - self.r1}")
        if not (0 <= self.k2 and (self.k2 == 0 or self.k2 < self.p2 - self.r2)):
            raise InvalidArgumentError(f"k2={self.k2} must satisfy 0 <= k2 < p2 - r2 = {self.p2 - self.r2}")
        for name in ("delta1", "delta2"):
            if not 0 <= getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must lie in [0, 1)")
        if self.reps < 1:
            raise InvalidArgumentError("reps must be >= 1")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn_in must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GroundTruth:
    L1: np.ndarray
    L2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    factor_series: np.ndarray | None = None
    common_true: np.ndarray | None = None


@dataclass(frozen=True)
class SimDraw:
    """One simulated data set with its ground truth and additive components.

    ``components`` holds ``L1 F R1'``, ``L2 Z21 R1'``, ``L1 Z12 R2'`` and
    ``L2 Z22 R2'`` in that order; ``series`` is their sum.
    """

    series: MatrixSeries
    truth: GroundTruth
    components: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def _scaled_loadings(rng, p, r, k, d_factor, d_noise):
    M = rng.uniform(-2.0, 2.0, size=(p, p))
    M1 = M[:, :r] / p ** (d_factor / 2)
    M2 = M[:, r:].copy()
    M2[:, :k] /= p ** (d_noise / 2)
    M2[:, k:] /= p
    return M1, M2


def gen_model(config: SimConfig, rng: np.random.Generator) -> GroundTruth:
    """Draw loadings and AR coefficients.

    Entries of ``L`` and ``R`` are ``U(-2, 2)``. ``L1`` is divided by
    ``p1**(delta1/2)``, the first ``k1`` columns of ``L2`` by
    ``p1**(delta2/2)`` and its remaining columns by ``p1``; ``R`` likewise
    with ``p2``, ``delta1``, ``delta2`` and ``k2``. The diagonals of ``Phi``
    and ``Psi`` are ``U(0.5, 0.9)``.
    """
    c = config
    L1, L2 = _scaled_loadings(rng, c.p1, c.r1, c.k1, c.delta1, c.delta2)
    R1, R2 = _scaled_loadings(rng, c.p2, c.r2, c.k2, c.delta1, c.delta2)
    Phi = np.diag(rng.uniform(0.5, 0.9, size=c.r1))
    Psi = np.diag(rng.uniform(0.5, 0.9, size=c.r2))
    return GroundTruth(L1, L2, R1, R2, Phi, Psi)


def factor_recursion(Phi, Psi, innovations, F0=None) -> np.ndarray:
    """``F_t = Phi F_{t-1} Psi' + N_t`` for diagonal ``Phi``, ``Psi``.

    With diagonal coefficients every entry is a scalar AR(1) with
    coefficient ``Phi_ii Psi_jj``, filtered independently.
    """
    coef = np.outer(np.diag(Phi), np.diag(Psi))
    assert np.all(np.abs(coef) < 1), "unstable factor recursion"
    N = np.asarray(innovations, dtype=float)
    F = np.empty_like(N)
    F0 = np.zeros(coef.shape) if F0 is None else np.asarray(F0, dtype=float)
    for i in range(coef.shape[0]):
        for j in range(coef.shape[1]):
            a = coef[i, j]
            zi = np.array([a * F0[i, j]])
            F[:, i, j] = lfilter([1.0], [1.0, -a], N[:, i, j], zi=zi)[0]
    return F


def simulate(
    truth: GroundTruth,
    config: SimConfig,
    rng: np.random.Generator,
    noise_scale: float = 1.0,
    factor_noise_scale: float = 1.0,
    F0=None,
) -> SimDraw:
    """Draw one series of length ``n`` from ``truth`` (after ``burn_in`` steps).

    ``noise_scale`` multiplies the ``Z`` blocks and ``factor_noise_scale``
    the innovations ``N_t``; both at zero give ``F_t = Phi^t F0 Psi'^t``.
    """
    c = config
    n, total = c.n, c.n + c.burn_in
    r1, r2 = truth.L1.shape[1], truth.R1.shape[1]
    v1, v2 = truth.L2.shape[1], truth.R2.shape[1]
    N = factor_noise_scale * rng.standard_normal((total, r1, r2))
    F = factor_recursion(truth.Phi, truth.Psi, N, F0)[c.burn_in:]
    Z21 = noise_scale * rng.standard_normal((n, v1, r2))
    Z12 = noise_scale * rng.standard_normal((n, r1, v2))
    Z22 = noise_scale * rng.standard_normal((n, v1, v2))

    def two_sided(L, X, R):
        return np.einsum("ab,tbc,dc->tad", L, X, R, optimize=True)

    comps = (
        two_sided(truth.L1, F, truth.R1),
        two_sided(truth.L2, Z21, truth.R1),
        two_sided(truth.L1, Z12, truth.R2),
        two_sided(truth.L2, Z22, truth.R2),
    )
    Y = comps[0] + comps[1] + comps[2] + comps[3]
    full = GroundTruth(truth.L1, truth.L2, truth.R1, truth.R2, truth.Phi, truth.Psi,
                       factor_series=F, common_true=comps[0])
    return SimDraw(MatrixSeries(Y), full, comps)


def gen_series(truth: GroundTruth, config: SimConfig, rng: np.random.Generator) -> MatrixSeries:
    return simulate(truth, config, rng).series


def draw_replication(config: SimConfig, rep: int) -> SimDraw:
    rng = replication_rng(config.seed, rep)
    return simulate(gen_model(config, rng), config, rng)


# --------------------------------------------------------------------------
# Monte Carlo


METHODS = ("gt", "wlc")


def _dist_or_one(H_hat, H_true) -> float:
    # an empty estimated space shares nothing with the truth
    if H_hat.shape[1] == 0:
        return 1.0
    return subspace_dist_general(H_hat, H_true)


def _evaluate(method: str, draw: SimDraw, fit_config: FitConfig) -> dict:
    Y = draw.series
    if method == "gt":
        res = fit(Y, fit_config)
    elif method == "wlc":
        res = wlc_fit(Y, fit_config.k0)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    t = draw.truth
    common_hat = project_common(res, Y)
    return {
        "r1": res.r1,
        "r2": res.r2,
        "dist_A": _dist_or_one(res.loadings.A1, t.L1),
        "dist_P": _dist_or_one(res.loadings.P1, t.R1),
        "factor_error": factor_error(common_hat, t.common_true),
    }


def run_replication(config: SimConfig, fit_config: FitConfig, rep: int,
                    methods=METHODS) -> dict:
    """Metrics of one replication for each method; failures are recorded, not raised."""
    draw = draw_replication(config, rep)
    out = {"rep": rep}
    for method in methods:
        try:
            out[method] = _evaluate(method, draw, fit_config)
        except (EstimationError, np.linalg.LinAlgError) as exc:
            out[method] = {"error": str(exc)}
    return out


@dataclass
class _Moments:
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, x: float) -> None:
        self.count += 1
        self.total += x
        self.total_sq += x * x

    def mean(self) -> float:
        return self.total / self.count if self.count else float("nan")

    def sd(self) -> float:
        if self.count < 2:
            return float("nan")
        var = (self.total_sq - self.total ** 2 / self.count) / (self.count - 1)
        return math.sqrt(max(var, 0.0))


@dataclass
class CellSummary:
    """Aggregated results for one grid cell and one method."""

    config: SimConfig
    method: str
    reps: int
    failures: int
    prob_correct: float
    dist_A_mean: float
    dist_A_sd: float
    dist_P_mean: float
    dist_P_sd: float
    factor_error_mean: float
    factor_error_sd: float
    order_counts: dict = field(default_factory=dict)

    @property
    def modal_order(self) -> tuple[int, int] | None:
        if not self.order_counts:
            return None
        # ties broken by the smaller order so the mode is deterministic
        best = max(self.order_counts.items(), key=lambda kv: (kv[1], [-v for v in kv[0]]))
        return best[0]

    def to_row(self) -> dict:
        c = self.config
        modal = self.modal_order
        return {
            "p1": c.p1, "p2": c.p2, "r1": c.r1, "r2": c.r2, "k1": c.k1, "k2": c.k2,
            "delta1": c.delta1, "delta2": c.delta2, "n": c.n, "seed": c.seed,
            "method": self.method, "reps": self.reps, "failures": self.failures,
            "prob_correct": self.prob_correct,
            "dist_A_mean": self.dist_A_mean, "dist_A_sd": self.dist_A_sd,
            "dist_P_mean": self.dist_P_mean, "dist_P_sd": self.dist_P_sd,
            "factor_error_mean": self.factor_error_mean,
            "factor_error_sd": self.factor_error_sd,
            "modal_r1": modal[0] if modal else None,
            "modal_r2": modal[1] if modal else None,
        }

    def to_dict(self) -> dict:
        d = self.to_row()
        d["order_counts"] = {f"{a},{b}": v for (a, b), v in sorted(self.order_counts.items())}
        return d


def summarize(config: SimConfig, method: str, records: list[dict]) -> CellSummary:
    """Combine per-replication records (in replication order) into a summary."""
    records = sorted(records, key=lambda r: r["rep"])
    mom = {k: _Moments() for k in ("dist_A", "dist_P", "factor_error")}
    orders: Counter = Counter()
    failures = correct = 0
    for rec in records:
        m = rec[method]
        if "error" in m:
            failures += 1
            continue
        orders[(m["r1"], m["r2"])] += 1
        correct += (m["r1"], m["r2"]) == (config.r1, config.r2)
        for k, acc in mom.items():
            acc.add(m[k])
    ok = len(records) - failures
    return CellSummary(
        config=config, method=method, reps=len(records), failures=failures,
        prob_correct=correct / ok if ok else float("nan"),
        dist_A_mean=mom["dist_A"].mean(), dist_A_sd=mom["dist_A"].sd(),
        dist_P_mean=mom["dist_P"].mean(), dist_P_sd=mom["dist_P"].sd(),
        factor_error_mean=mom["factor_error"].mean(),
        factor_error_sd=mom["factor_error"].sd(),
        order_counts=dict(orders),
    )


def _run_chunk(args):
    config, fit_config, reps, methods = args
    return [run_replication(config, fit_config, r, methods) for r in reps]


def monte_carlo(
    grid,
    fit_config: FitConfig | None = None,
    methods=METHODS,
    threads: int = 1,
) -> list[CellSummary]:
    """Run every cell of ``grid`` for ``config.reps`` replications.

    Returns one :class:`CellSummary` per (cell, method), in grid order.
    ``threads`` > 1 spreads replications over worker processes; 0 means one
    per CPU. The result does not depend on ``threads``.
    """
    fit_config = fit_config or FitConfig()
    if isinstance(grid, SimConfig):
        grid = [grid]
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}; choose from {METHODS}")
    if threads == 0:
        threads = os.cpu_count() or 1
    out = []
    for config in grid:
        reps = list(range(config.reps))
        if threads <= 1:
            records = _run_chunk((config, fit_config, reps, methods))
        else:
            chunks = [reps[i::threads] for i in range(threads)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                parts = pool.map(_run_chunk, [(config, fit_config, c, methods) for c in chunks if c])
                records = [r for part in parts for r in part]
        out.extend(summarize(config, m, records) for m in methods)
    return out
