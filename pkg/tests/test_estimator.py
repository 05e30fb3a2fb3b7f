import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matfactor import (
    FitConfig,
    InvalidArgumentError,
    LoadingSet,
    MatrixSeries,
    NoSignalError,
    center,
    denoiser,
    estimate_loadings,
    factor_error,
    fit,
    project_common,
    recover_factors,
    select_k,
    subspace_dist,
    wlc_fit,
    wlc_orders,
)
from matfactor.errors import AlignmentError
from matfactor.spectral import EigenDecomp

from conftest import noiseless, random_orthonormal


def loading_set(A1, P1):
    p1, p2 = A1.shape[0], P1.shape[0]
    G1 = np.linalg.svd(A1, full_matrices=True)[0]
    G2 = np.linalg.svd(P1, full_matrices=True)[0]
    r1, r2 = A1.shape[1], P1.shape[1]
    return LoadingSet(A1, G1[:, r1:], P1, G2[:, r2:], np.ones(p1), np.ones(p2))


def test_config_validation():
    for bad in (dict(alpha=0), dict(k0=0), dict(m=0), dict(epsilon=1.5), dict(test="x"), dict(orders=(1,))):
        with pytest.raises(InvalidArgumentError):
            FitConfig(**bad)


def test_loadings_noiseless():
    Y, A, P, _ = noiseless(2000, 4, 4, 2, 2)
    ld = estimate_loadings(MatrixSeries(Y), 2, 2)
    assert subspace_dist(ld.A1, A) < 0.05
    assert subspace_dist(ld.P1, P) < 0.05
    np.testing.assert_allclose(ld.B1.T @ ld.A1, 0, atol=1e-8)
    np.testing.assert_allclose(ld.Gamma1.T @ ld.Gamma1, np.eye(4), atol=1e-8)
    assert np.all(np.diff(ld.eig_M1) <= 0) and np.all(ld.eig_M1 >= 0)


def test_loadings_complement_single_vector(rng):
    ld = estimate_loadings(MatrixSeries(rng.standard_normal((50, 2, 2))), 1, 1)
    assert ld.B1.shape == (2, 1)
    assert abs(float(ld.B1[:, 0] @ ld.A1[:, 0])) < 1e-12


def test_loadings_white_noise_flat_spectrum(rng):
    ld = estimate_loadings(MatrixSeries(rng.standard_normal((5000, 4, 4))), 1, 1)
    # no factor: the whole spectrum is sampling noise of order 1/n, and flat
    assert ld.eig_M1[0] < 0.05
    assert ld.eig_M1[0] < 2.0 * ld.eig_M1[-1]


def test_all_zero_data_has_no_signal():
    with pytest.raises(NoSignalError, match="no dynamic signal"):
        estimate_loadings(MatrixSeries(np.zeros((30, 3, 3))), 1, 1)
    with pytest.raises(NoSignalError):
        wlc_fit(MatrixSeries(np.zeros((30, 3, 3))))


def test_select_k_examples():
    assert select_k([100, 1, 0.9, 0.8, 0.7], 1, 400) == (1, 2)
    assert select_k([8, 4, 2, 1], 1, 100)[0] == 1
    # a leading eigenvalue much larger than the rest gives k = 1
    assert select_k([40.0, 2.0, 1.5, 1.2, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5], 1, 678)[0] == 1


def test_select_k_too_small():
    assert select_k([3.0, 2.0], 1, 100) == (0, 1)
    with pytest.warns(UserWarning, match="upper bound"):
        assert select_k([3.0, 2.0, 1.0], 3, 100)[0] == 0


def test_denoiser_diagonal_spectrum(rng):
    series = MatrixSeries(rng.standard_normal((10, 3, 3)))
    e = np.eye(3)
    ld = loading_set(e[:, [1]], e[:, [0]])
    den = denoiser(series, ld, 1, 0, S=(np.diag([9.0, 1.0, 0.0]), np.diag([3.0, 2.0, 1.0])))
    assert subspace_dist(den.B2star, e[:, 1:]) < 1e-12
    assert den.k1 == 1 and den.B2star.shape == (3, 2)


def test_denoiser_rank_one_alignment(rng):
    series = MatrixSeries(rng.standard_normal((10, 3, 2)))
    e = np.eye(3)
    ld = loading_set(e[:, [0]], np.eye(2)[:, [0]])
    den = denoiser(series, ld, 1, 0, S=(np.diag([0.0, 0.0, 5.0]), np.diag([1.0, 2.0])))
    np.testing.assert_allclose(den.B2star, e[:, :2], atol=1e-12)
    np.testing.assert_allclose(den.Xi1, [[1.0], [0.0]], atol=1e-12)
    np.testing.assert_allclose(den.B2, e[:, [0]], atol=1e-12)
    np.testing.assert_allclose(den.B2, den.B2star @ den.Xi1, atol=0)


def test_small_dim_path_noiseless_is_singular():
    # bottom eigenvectors of a round-off S are orthogonal to A1
    Y, *_ = noiseless(500, 5, 4, 2, 2)
    with pytest.raises(Exception, match="alignment failure"):
        fit(MatrixSeries(Y), FitConfig(orders=(2, 2), small_dim_path=True))


def test_denoiser_alignment_failure(rng):
    series = MatrixSeries(rng.standard_normal((10, 3, 2)))
    e = np.eye(3)
    ld = loading_set(e[:, [2]], np.eye(2)[:, [0]])
    # the kept directions (e1, e2) are orthogonal to A1 = e3
    with pytest.raises(AlignmentError, match="alignment failure"):
        denoiser(series, ld, 1, 0, S=(np.diag([0.0, 0.0, 5.0]), np.diag([1.0, 2.0])))


def test_denoiser_k_range(rng):
    series = MatrixSeries(rng.standard_normal((10, 3, 3)))
    ld = loading_set(np.eye(3)[:, [0]], np.eye(3)[:, [0]])
    with pytest.raises(InvalidArgumentError):
        denoiser(series, ld, 2, 0)


def test_full_complement_alignment_on_noiseless_data():
    Y, A, P, _ = noiseless(500, 5, 4, 2, 2)
    res = fit(MatrixSeries(Y), FitConfig(orders=(2, 2), k=(0, 0)))
    s = np.linalg.svd(res.denoiser.B2.T @ res.loadings.A1, compute_uv=False)
    assert s.min() >= 0.99


def test_recover_factors_exact():
    Y, A, P, X = noiseless(100, 5, 4, 2, 3)
    np.testing.assert_allclose(recover_factors(Y, A, P, A, P), X, atol=1e-12)
    np.testing.assert_allclose(recover_factors(2.5 * Y, A, P, A, P), 2.5 * X, atol=1e-12)


def test_recover_factors_dense_solve_oracle(rng):
    Y = rng.standard_normal((6, 2, 2))
    A1, P1 = random_orthonormal(2, 1, rng), random_orthonormal(2, 1, rng)
    B2, Q2 = rng.standard_normal((2, 1)), rng.standard_normal((2, 1))
    got = recover_factors(Y, A1, P1, B2, Q2)
    inv1 = np.linalg.inv(B2.T @ A1)
    inv2 = np.linalg.inv(P1.T @ Q2)
    want = np.array([inv1 @ B2.T @ y @ Q2 @ inv2 for y in Y])
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_fit_noiseless_exact():
    Y, A, P, X = noiseless(2000, 4, 4, 2, 2)
    res = fit(MatrixSeries(Y))
    assert (res.r1, res.r2) == (2, 2)
    assert factor_error(res.common + res.mean, Y) < 0.02
    np.testing.assert_allclose(res.common + res.mean, Y, atol=1e-8)
    np.testing.assert_allclose(
        res.common, np.einsum("ab,tbc,dc->tad", res.loadings.A1, res.factors, res.loadings.P1), atol=1e-10
    )


def test_manual_orders_equal_auto_when_selection_correct():
    Y, *_ = noiseless(400, 5, 4, 2, 3, seed=4)
    Y = Y + 0.05 * np.random.default_rng(0).standard_normal(Y.shape)
    auto = fit(MatrixSeries(Y))
    assert (auto.r1, auto.r2) == (2, 3)
    manual = fit(MatrixSeries(Y), FitConfig(orders=(2, 3)))
    np.testing.assert_array_equal(auto.common, manual.common)
    assert len(auto.order_trace) > 0 and len(manual.order_trace) == 0


def test_fit_white_noise_gives_empty_fit(rng):
    res = fit(MatrixSeries(rng.standard_normal((400, 3, 3))))
    if res.r1 == 0 or res.r2 == 0:
        assert res.denoiser is None and np.all(res.common == 0)
    assert len(res.order_trace) >= 1


def test_sigma_min_positive_and_k_band():
    Y, *_ = noiseless(600, 6, 6, 2, 2, seed=9)
    Y = Y + 0.3 * np.random.default_rng(1).standard_normal(Y.shape)
    res = fit(MatrixSeries(Y), FitConfig(orders=(2, 2)))
    assert res.denoiser.sigma_min_front > 0 and res.denoiser.sigma_min_back > 0
    assert 0 <= res.denoiser.k1 <= res.denoiser.k1_upper


def test_wlc_orders_examples():
    e = lambda v: EigenDecomp(np.asarray(v, dtype=float), np.eye(len(v)))
    side1 = e([50, 40, 2, 1.5, 1, 0.9, 0.8])
    side2 = e([5, 5, 0.1, 0.09, 0.08, 0.07])
    assert wlc_orders(None, eig=(side1, side2)) == (2, 2)


def test_wlc_fit_noiseless_exact():
    Y, A, P, X = noiseless(500, 5, 4, 2, 2)
    res = wlc_fit(MatrixSeries(Y), orders=(2, 2))
    np.testing.assert_allclose(res.common + res.mean, Y, atol=1e-10)
    assert res.denoiser is None and res.method == "wlc"


def test_project_common_matches_fit_on_centred_data():
    Y, *_ = noiseless(300, 4, 4, 2, 2, seed=2)
    Y = Y + 3.0 + 0.2 * np.random.default_rng(2).standard_normal(Y.shape)
    res = fit(MatrixSeries(Y), FitConfig(orders=(2, 2)))
    np.testing.assert_allclose(project_common(res, center(MatrixSeries(Y)).data), res.common, atol=1e-10)
    wres = wlc_fit(MatrixSeries(Y), orders=(2, 2))
    np.testing.assert_allclose(project_common(wres, center(MatrixSeries(Y)).data), wres.common, atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    p1, p2 = int(rng.integers(3, 7)), int(rng.integers(3, 7))
    Y, *_ = noiseless(200, p1, p2, 1, 2, seed=seed)
    Y = Y + 0.2 * rng.standard_normal(Y.shape)
    U, V = random_orthonormal(p1, p1, rng), random_orthonormal(p2, p2, rng)
    cfg = FitConfig(orders=(1, 2), k=(0, 0))
    base = fit(MatrixSeries(Y), cfg)
    rot = fit(MatrixSeries(np.einsum("ab,tbc,dc->tad", U, Y, V)), cfg)
    assert subspace_dist(rot.loadings.A1, U @ base.loadings.A1) < 1e-6
    assert subspace_dist(rot.loadings.P1, V @ base.loadings.P1) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_common_component_sign_invariant(seed):
    rng = np.random.default_rng(seed)
    Y, *_ = noiseless(150, 4, 5, 2, 2, seed=seed)
    Y = center(MatrixSeries(Y + 0.3 * rng.standard_normal(Y.shape))).data
    res = fit(MatrixSeries(Y), FitConfig(orders=(2, 2)))
    ld, den = res.loadings, res.denoiser
    s1, s2 = rng.choice([-1.0, 1.0], 2), rng.choice([-1.0, 1.0], 2)
    A1, P1, B2, Q2 = ld.A1 * s1, ld.P1 * s2, den.B2 * -s1, den.Q2 * s2[::-1]
    X = recover_factors(Y, A1, P1, B2, Q2)
    common = np.einsum("ab,tbc,dc->tad", A1, X, P1)
    np.testing.assert_allclose(common, res.common, atol=1e-8)
