"""Information matrix and limit-distribution sampler tests.

Hand-derived quadrature oracles:
  sqrt_shift, theta0 = 1, x0 = 0: x0(t) = sinh t, d_theta b = 1/(2 cosh t),
      so I = integral (2 cosh t)^(-2) dt = tanh(1)/4 = 0.19039853898894116.
  ou_affine, theta0 = (1, 0), x0 = 0: x0(t) = t, d_theta b = (1, t),
      so I = [[1, 1/2], [1/2, 1/3]].
The Gaussian-part scaler in the closed-form sqrt_shift sampler reuses the
same integral; the stable-part scaler is the L^alpha norm of 1/(2 cosh t),
cross-checked against scipy.integrate.quad.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from levylse import (
    InformationMatrix,
    LevySpec,
    NotPositiveDefiniteError,
    Stable,
    get_entry,
    information_matrix,
    invert_information,
    ks_two_sample,
    sample_limit_closed_form_sqrt_shift,
    sample_limit_distribution,
    sample_limit_score,
    sample_stable_standard,
    solve_x0,
    substream,
    write_draws_csv,
)

from conftest import constant_drift_model

TANH1_OVER_4 = 0.19039853898894116
KS_CRIT = lambda n: 1.628 * np.sqrt(2.0 / n)


def test_information_sqrt_shift_oracle():
    entry = get_entry("sqrt_shift")
    theta0 = np.array([1.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    info = information_matrix(entry.model, path, theta0)
    assert abs(info.matrix[0, 0] - TANH1_OVER_4) < 1e-8
    assert info.min_eigenvalue > 0.0


def test_information_ou_affine_oracle():
    entry = get_entry("ou_affine")
    theta0 = np.array([1.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    info = information_matrix(entry.model, path, theta0)
    target = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
    assert np.max(np.abs(info.matrix - target)) < 1e-8
    assert np.array_equal(info.matrix, info.matrix.T)


def test_information_quadrature_converged():
    entry = get_entry("sqrt_shift")
    theta0 = np.array([1.2])
    path = solve_x0(entry, theta0, np.array([0.5]), m=20_000)
    a = information_matrix(entry.model, path, theta0, m=10_000)
    b = information_matrix(entry.model, path, theta0, m=20_000)
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-8


def test_information_degenerate_raises():
    # started at the drift root with theta2 unseen: I = [[1, 0], [0, 0]]
    entry = get_entry("ou_affine")
    theta0 = np.array([0.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    with pytest.raises(NotPositiveDefiniteError) as exc_info:
        information_matrix(entry.model, path, theta0)
    assert abs(exc_info.value.min_eigenvalue) < 1e-12


def test_invert_information_roundtrip():
    entry = get_entry("ou_affine")
    theta0 = np.array([1.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    info = information_matrix(entry.model, path, theta0)
    inv = invert_information(info)
    assert np.max(np.abs(inv @ info.matrix - np.eye(2))) < 1e-12


def test_score_zero_for_degenerate_noise():
    model = constant_drift_model()
    path = solve_x0(model, np.array([1.0]), np.array([0.0]))
    levy = LevySpec(a=0.0, sigma=0.0, jump_part=(), dim=1)
    s = sample_limit_score(model, path, np.array([1.0]), levy, substream(1), fine_m=500)
    assert np.array_equal(s, np.zeros(1))


def test_score_pure_drift_noise_oracle():
    # d_theta b = 1, L_t = 2t: S = integral 1 dL = L(1) = 2
    model = constant_drift_model()
    path = solve_x0(model, np.array([1.0]), np.array([0.0]))
    levy = LevySpec(a=2.0, sigma=0.0, jump_part=(), dim=1)
    s = sample_limit_score(model, path, np.array([1.0]), levy, substream(2), fine_m=2000)
    assert s[0] == pytest.approx(2.0, abs=1e-12)


def test_score_brownian_covariance_matches_information():
    # with sigma = 1 the score covariance equals the information matrix
    entry = get_entry("ou_affine")
    theta0 = np.array([1.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    info = information_matrix(entry.model, path, theta0)
    levy = LevySpec(sigma=1.0, dim=1)
    draws = np.array(
        [
            sample_limit_score(entry.model, path, theta0, levy, substream(3, i), fine_m=400)
            for i in range(3000)
        ]
    )
    cov = np.cov(draws.T)
    assert np.max(np.abs(cov - info.matrix)) < 0.05


def test_limit_draws_standard_normal_case():
    # constant drift, Brownian noise: I = 1 and the limit is exactly N(0, 1)
    model = constant_drift_model()
    path = solve_x0(model, np.array([1.0]), np.array([0.0]))
    sample = sample_limit_distribution(
        model, path, np.array([1.0]), LevySpec(sigma=1.0, dim=1), count=3000, fine_m=200, seed=4
    )
    assert sample.draws.shape == (3000, 1)
    stat = stats.kstest(sample.draws[:, 0], stats.norm.cdf).statistic
    assert stat < 1.63 / math.sqrt(3000)


def test_limit_draws_covariance_is_inverse_information():
    entry = get_entry("ou_affine")
    theta0 = np.array([1.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    info = information_matrix(entry.model, path, theta0)
    sample = sample_limit_distribution(
        entry.model, path, theta0, LevySpec(sigma=1.0, dim=1), count=4000, fine_m=400, seed=5
    )
    inv = invert_information(info)
    cov = np.cov(sample.draws.T)
    assert np.max(np.abs(cov - inv)) < 0.35  # entries of I^(-1) reach 12


def test_limit_draws_deterministic_in_seed():
    model = constant_drift_model()
    path = solve_x0(model, np.array([1.0]), np.array([0.0]))
    levy = LevySpec(sigma=1.0, dim=1)
    a = sample_limit_distribution(model, path, np.array([1.0]), levy, count=50, fine_m=100, seed=6)
    b = sample_limit_distribution(model, path, np.array([1.0]), levy, count=50, fine_m=100, seed=6)
    c = sample_limit_distribution(model, path, np.array([1.0]), levy, count=50, fine_m=100, seed=7)
    assert np.array_equal(a.draws, b.draws)
    assert not np.array_equal(a.draws, c.draws)


def _sqrt_shift_scalers(alpha):
    # independent quadrature of the two noise loadings along x0(t) = sinh t
    f = lambda t: (2.0 * math.cosh(t)) ** -1.0
    info, _ = integrate.quad(lambda t: f(t) ** 2, 0.0, 1.0)
    anorm, _ = integrate.quad(lambda t: f(t) ** alpha, 0.0, 1.0)
    return info, anorm ** (1.0 / alpha)


def test_closed_form_gaussian_part():
    # sigma = 0: draws are a I^(-1/2) times a standard normal
    info, _ = _sqrt_shift_scalers(1.5)
    sample = sample_limit_closed_form_sqrt_shift(
        np.array([1.0]), np.array([0.0]), a=1.0, sigma=0.0, alpha=1.5, beta=0.0, count=4000, seed=8
    )
    sd = 1.0 / math.sqrt(info)
    stat = stats.kstest(sample.draws[:, 0] / sd, stats.norm.cdf).statistic
    assert stat < 1.63 / math.sqrt(4000)


def test_closed_form_stable_part():
    # a = 0: draws are sigma I^(-1) |f|_alpha times a standard stable draw
    alpha = 1.5
    info, anorm = _sqrt_shift_scalers(alpha)
    scale = 2.0 * anorm / info
    sample = sample_limit_closed_form_sqrt_shift(
        np.array([1.0]), np.array([0.0]), a=0.0, sigma=2.0, alpha=alpha, beta=0.0, count=4000, seed=9
    )
    direct = scale * sample_stable_standard(alpha, 0.0, substream(10), size=4000)
    assert ks_two_sample(sample.draws[:, 0], direct) < KS_CRIT(4000)


def test_closed_form_parts_convolve():
    # (a, sigma) draws match the sum of independent pure-part draws
    kw = dict(theta0=np.array([1.0]), x0=np.array([0.0]), alpha=1.5, beta=0.0, count=4000)
    both = sample_limit_closed_form_sqrt_shift(a=1.0, sigma=1.0, seed=11, **kw)
    gauss = sample_limit_closed_form_sqrt_shift(a=1.0, sigma=0.0, seed=12, **kw)
    stab = sample_limit_closed_form_sqrt_shift(a=0.0, sigma=1.0, seed=13, **kw)
    combined = gauss.draws[:, 0] + stab.draws[:, 0]
    assert ks_two_sample(both.draws[:, 0], combined) < KS_CRIT(4000)


def test_write_draws_csv_roundtrip(tmp_path):
    entry = get_entry("ou_affine")
    theta0 = np.array([1.0, 0.0])
    path = solve_x0(entry, theta0, np.array([0.0]))
    sample = sample_limit_distribution(
        entry.model, path, theta0, LevySpec(sigma=1.0, dim=1), count=20, fine_m=100, seed=14
    )
    out = tmp_path / "draws.csv"
    write_draws_csv(sample, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "s_1,s_2"
    parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.array_equal(parsed, sample.draws)
