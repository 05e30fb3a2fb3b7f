"""Acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line with the
measured numbers (run with ``-s`` to see them live); all lines are repeated
in an "acceptance criteria" section of the terminal summary. Tolerances are the stated ones and
are never widened to make a check pass.
"""

import os
from functools import lru_cache

import numpy as np
import pytest

from matfactor import (
    FitConfig,
    MatrixSeries,
    SimConfig,
    build_S,
    center,
    diagonal_path_select,
    estimate_loadings,
    fit,
    gen_model,
    ljung_box,
    monte_carlo,
    recover_factors,
    rolling_eval,
    select_orders,
    subspace_dist,
    wlc_orders,
)
from matfactor.io import ingest_csv
from matfactor.simulate import draw_replication, simulate

from conftest import ACCEPTANCE_LINES, ar_factors, noiseless, random_orthonormal
from test_order_select import coded_series, oracle, stub

REPS = 200
SEED = 0


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, detail


@lru_cache(maxsize=None)
def cell(p1, p2, n, delta1, delta2, reps=REPS):
    """Monte Carlo summaries ``{method: CellSummary}`` of one simulation-grid cell."""
    cfg = SimConfig(p1, p2, delta1=delta1, delta2=delta2, n=n, seed=SEED, reps=reps)
    return {s.method: s for s in monte_carlo(cfg, FitConfig(test="rank_tm", m=10))}


@pytest.mark.slow
def test_criterion_1_strong_factor_order_selection():
    target = {300: 0.956, 3000: 0.976}
    got = {n: cell(7, 7, n, 0.0, 0.9)["gt"].prob_correct for n in target}
    ok = all(abs(got[n] - target[n]) <= 0.07 for n in target)
    detail = ", ".join(f"n={n}: P(r=(2,3))={got[n]:.3f} (target {target[n]})" for n in target)
    verdict(1, ok, f"(0,0.9) (7,7) {REPS} reps, rank_tm m=10; {detail}; tolerance 0.07")


@pytest.mark.slow
def test_criterion_2_hard_regime_improves_with_n():
    ns = (300, 1000, 1500)
    got = {n: cell(7, 7, n, 0.5, 0.5)["gt"].prob_correct for n in ns}
    monotone = all(got[a] <= got[b] for a, b in zip(ns, ns[1:]))
    ok = got[300] <= 0.30 and got[1500] > 0.85 and monotone
    detail = ", ".join(f"n={n}: {got[n]:.3f}" for n in ns)
    verdict(2, ok, f"(0.5,0.5) (7,7) {REPS} reps; {detail}; need n=300 <= 0.30, "
                   f"n=1500 > 0.85 (reference 0.104, 0.974), monotone={monotone}")


@pytest.mark.slow
def test_criterion_3_factor_error_gt_beats_wlc():
    reference = {
        (7, 7): {300: 0.862, 1000: 0.460, 3000: 0.416},
        (10, 15): {300: 0.652, 1000: 0.290, 3000: 0.229},
    }
    parts, ok = [], True
    for (p1, p2), row in reference.items():
        for n, target in row.items():
            c = cell(p1, p2, n, 0.5, 0.5)
            gt, wlc = c["gt"].factor_error_mean, c["wlc"].factor_error_mean
            good = gt < wlc and abs(gt - target) <= 0.15
            ok &= good
            parts.append(f"({p1},{p2}) n={n}: GT {gt:.3f} (target {target}) WLC {wlc:.3f}"
                         f"{'' if good else ' <-'}")
    verdict(3, ok, f"{REPS} reps; " + "; ".join(parts))


@pytest.mark.slow
def test_criterion_4_wlc_overestimates():
    cfg = SimConfig(20, 20, delta1=0.5, delta2=0.5, n=3000, seed=SEED)
    counts = {}
    reps = 100
    for rep in range(reps):
        order = wlc_orders(draw_replication(cfg, rep).series)
        counts[order] = counts.get(order, 0) + 1
    modal = max(counts.items(), key=lambda kv: (kv[1], [-v for v in kv[0]]))[0]
    top = sorted(counts.items(), key=lambda kv: -kv[1])[:3]
    verdict(4, modal == (3, 5), f"(0.5,0.5) (20,20) n=3000 {reps} reps; modal WLC order {modal}, "
                                f"expected (3,5); most frequent {top}")


def _rate_dist(n, reps=100, sigma=0.5):
    d = []
    for rep in range(reps):
        rng = np.random.default_rng([5, n, rep])
        A, P = random_orthonormal(5, 2, rng), random_orthonormal(5, 2, rng)
        X = ar_factors(n, 2, 2, rng)
        Y = np.einsum("ab,tbc,dc->tad", A, X, P) + sigma * rng.standard_normal((n, 5, 5))
        d.append(subspace_dist(estimate_loadings(MatrixSeries(Y), 2, 2).A1, A))
    return float(np.median(d))


@pytest.mark.slow
def test_criterion_5_root_n_rate():
    small, large = _rate_dist(400), _rate_dist(6400)
    ratio = small / large
    verdict(5, 2.8 <= ratio <= 5.5, f"p=(5,5), noise sd 0.5, 100 reps; median D n=400 {small:.4f}, "
                                    f"n=6400 {large:.4f}, ratio {ratio:.2f} (need [2.8, 5.5], theory 4)")


@pytest.mark.slow
def test_criterion_6_null_calibration():
    reps = 500
    rates = {}
    for name in ("rank_tm", "ljung_box"):
        hits = 0
        for rep in range(reps):
            rng = np.random.default_rng([6, rep])
            Y = MatrixSeries(rng.standard_normal((1000, 5, 5)))
            r1, r2, _ = select_orders(Y, FitConfig(test=name))
            hits += (r1, r2) == (0, 0)
        rates[name] = hits / reps
    ok = all(v >= 0.90 for v in rates.values())
    verdict(6, ok, f"iid N(0,1), p=(5,5), n=1000, alpha=0.05, {reps} reps; P(r=(0,0)) "
                   + ", ".join(f"{k} {v:.3f}" for k, v in rates.items()) + " (need >= 0.90)")


def test_criterion_7_exact_recovery():
    Y, A, P, X = noiseless(1000, 6, 5, 2, 3, seed=7)
    res = fit(MatrixSeries(Y))
    err_fit = float(np.max(np.abs(res.common + res.mean - Y)))
    err_rec = float(np.max(np.abs(recover_factors(Y, A, P, A, P) - X)))
    B1 = np.linalg.svd(A, full_matrices=True)[0][:, 2:]
    Q1 = np.linalg.svd(P, full_matrices=True)[0][:, 3:]
    s_max = float(np.max(np.abs(build_S(center(MatrixSeries(Y)), B1, Q1).matrix)))
    ok = (res.r1, res.r2) == (2, 3) and err_fit <= 1e-8 and err_rec <= 1e-8 and s_max <= 1e-10
    verdict(7, ok, f"orders {(res.r1, res.r2)}; fit common-component error {err_fit:.1e} (<= 1e-8); "
                   f"recover_factors error {err_rec:.1e}; max |S| {s_max:.1e} (<= 1e-10)")


def test_criterion_8_oracle_equivalences():
    q = ljung_box(np.array([1.0, -1.0, 1.0, -1.0]), 2).statistic
    h = np.array([[1.0], [1.0]]) / np.sqrt(2)
    d = subspace_dist(np.eye(2)[:, :1], h)
    mismatches = 0
    for p1 in range(1, 7):
        for p2 in range(1, 7):
            W = coded_series(p1, p2)
            for t1 in range(p1 + 1):
                for t2 in range(p2 + 1):
                    r1, r2, trace = diagonal_path_select(W, stub(t1, t2))
                    want, tests = oracle(p1, p2, lambda i, j: i <= t1 and j <= t2)
                    got_tests = [(s.block_rows[0], s.block_cols[0], s.phase) for s in trace]
                    mismatches += (r1, r2) != want or got_tests != tests
    ok = abs(q - 7.5) <= 1e-12 and abs(d - np.sqrt(0.5)) <= 1e-12 and mismatches == 0
    verdict(8, ok, f"Ljung-Box Q={q:.15g} (7.5); D={d:.15g} (sqrt 0.5); "
                   f"diagonal-path mismatches on all targets up to 6x6: {mismatches}")


@pytest.mark.slow
def test_criterion_9_forecasting():
    n, horizons, seeds = 300, (1, 2, 3, 4), 20
    origins = range(n - 50, n - max(horizons) + 1)
    means = {m: np.zeros(len(horizons)) for m in ("gt", "sar")}
    for seed in range(seeds):
        rng = np.random.default_rng([9, seed])
        cfg = SimConfig(20, 20, delta1=0.5, delta2=0.5, n=n, seed=seed)
        Y = simulate(gen_model(cfg, rng), cfg, rng).series
        for m in means:
            ev = rolling_eval(Y, m, horizons=horizons, origins=origins)
            means[m] += np.array([ev.errors[h]["FE_F"] for h in horizons]) / seeds
    ok = bool(np.all(means["gt"] < means["sar"]))
    detail = "; ".join(f"h={h}: GT {g:.4f} SAR {s:.4f}"
                       for h, g, s in zip(horizons, means["gt"], means["sar"]))
    path = os.environ.get("MATFACTOR_FF_CSV")
    if path:
        Yff = ingest_csv(path)
        ev = rolling_eval(Yff, "gt", horizons=(1,), origins=range(558, 678),
                          config=FitConfig(orders=(2, 2), k=(1, 1)))
        fe = ev.errors[1]["FE_F"]
        ok &= abs(fe - 4.51) <= 0.02
        detail += f"; real data GT FE_F(1)={fe:.3f} (target 4.51 +- 0.02)"
    else:
        detail += "; real-data check skipped (set MATFACTOR_FF_CSV)"
    verdict(9, ok, f"simulated (0.5,0.5) (20,20) n={n}, {seeds} seeds, mean FE_F; {detail}")
