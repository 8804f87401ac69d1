"""Asymptotic law of the rescaled estimation error.

As eps -> 0 with n -> infinity and n*eps -> infinity, the rescaled error
(theta_hat - theta0)/eps converges in law to I(theta0)^(-1) S(theta0),
where, along the zero-noise trajectory x0,

    I_ij(theta0) = int_0^1 (d_i b)^T (d_j b) (x0_s, theta0) ds,
    S_i(theta0)  = int_0^1 (d_i b)^T (x0_s, theta0) dL_s.

I is computed by composite Simpson quadrature; S is sampled pathwise by a
left-point Riemann sum over a fine uniform grid, which is exact in law for
the Brownian part and first-order accurate for the jump parts.  For the
sqrt_shift model driven by L = a B + sigma Z with Z alpha-stable the limit
law also has the closed convolution form

    a I^(-1/2) N + sigma I^(-1) [int_0^1 (2 sqrt(th0 + x0_s^2))^(-alpha) ds]^(1/alpha) U,

with N standard normal and U ~ S_alpha(1, beta, 0) independent; sampling
both routes and comparing them is one of the package's cross-checks.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .models import check_theta, get_entry, grad_on_path
from .noise import LevySpec, sample_increments, sample_stable_standard, substream
from .ode import interp_x0

DEFAULT_QUADRATURE_M = 10_000
DEFAULT_FINE_M = 10_000

_LIMIT_DOMAIN = 21  # substream domain tag for pathwise limit draws
_CLOSED_FORM_DOMAIN = 22  # and for closed-form limit draws


class NotPositiveDefiniteError(RuntimeError):
    """Information matrix is not positive definite (degenerate trajectory)."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(f"{message} (min eigenvalue {min_eigenvalue:.6e})")
        self.min_eigenvalue = min_eigenvalue


@dataclass
class InformationMatrix:
    matrix: np.ndarray
    quadrature_m: int
    min_eigenvalue: float


@dataclass
class LimitLawSample:
    draws: np.ndarray  # (count, p)
    seed: int
    fine_m: int
    kind: str  # "pathwise" or "closed_form"


def _simpson_weights(m):
    if m % 2 == 1:
        raise ValueError("Simpson quadrature needs an even number of cells")
    w = np.full(m + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w / (3.0 * m)


def information_matrix(model, x0_path, theta0, m=DEFAULT_QUADRATURE_M):
    """I(theta0) by composite Simpson on the gradient Gram integrand.

    Raises NotPositiveDefiniteError when the smallest eigenvalue is not
    strictly positive (relative to the largest), i.e. the drift gradients
    are linearly dependent along the trajectory and no unique rescaled
    limit exists.
    """
    theta0 = check_theta(model, theta0)
    m = int(m)
    if m % 2 == 1:
        m += 1
    s = np.arange(m + 1) / m
    states = interp_x0(x0_path, s)
    grads = grad_on_path(model, states, theta0)  # (m+1, d, p)
    w = _simpson_weights(m)
    mat = np.einsum("j,jdi,jdk->ik", w, grads, grads)
    mat = 0.5 * (mat + mat.T)
    eigs = np.linalg.eigvalsh(mat)
    min_eig = float(eigs[0])
    if min_eig <= 1e-12 * max(1.0, float(eigs[-1])):
        raise NotPositiveDefiniteError(
            "information matrix is numerically singular along this trajectory", min_eig
        )
    return InformationMatrix(matrix=mat, quadrature_m=m, min_eigenvalue=min_eig)


def sample_limit_score(model, x0_path, theta0, levy, rng, fine_m=DEFAULT_FINE_M):
    """One draw of S(theta0) by a left-point Riemann sum against dL."""
    theta0 = check_theta(model, theta0)
    grid = np.arange(fine_m + 1) / fine_m
    states = interp_x0(x0_path, grid[:-1])
    grads = grad_on_path(model, states, theta0)
    path = sample_increments(levy, grid, rng)
    return np.einsum("mdp,md->p", grads, path.increments)


def sample_limit_distribution(
    model, x0_path, theta0, levy, count, fine_m=DEFAULT_FINE_M, seed=0
):
    """count independent draws of I(theta0)^(-1) S(theta0).

    Draw i uses substream(seed, 21, i), so batches can be partitioned over
    workers in any order with bitwise-identical assembly.
    """
    if not isinstance(levy, LevySpec):
        raise ValueError("levy must be a LevySpec")
    if count < 1:
        raise ValueError("count must be >= 1")
    theta0 = check_theta(model, theta0)
    info = information_matrix(model, x0_path, theta0, m=fine_m)
    factor = _cholesky(info)
    grid = np.arange(fine_m + 1) / fine_m
    states = interp_x0(x0_path, grid[:-1])
    grads = grad_on_path(model, states, theta0)  # fixed across draws
    draws = np.empty((count, model.dim_theta))
    for i in range(count):
        rng = substream(seed, _LIMIT_DOMAIN, i)
        path = sample_increments(levy, grid, rng)
        s_vec = np.einsum("mdp,md->p", grads, path.increments)
        draws[i] = cho_solve(factor, s_vec)
    return LimitLawSample(draws=draws, seed=int(seed), fine_m=int(fine_m), kind="pathwise")


def _cholesky(info):
    try:
        return cho_factor(info.matrix, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded upstream
        raise NotPositiveDefiniteError(
            "Cholesky factorization failed", info.min_eigenvalue
        ) from exc


def invert_information(info):
    """I^(-1) via the Cholesky factor."""
    factor = _cholesky(info)
    return cho_solve(factor, np.eye(info.matrix.shape[0]))


def sample_limit_closed_form_sqrt_shift(
    theta0, x0, a, sigma, alpha, beta, count, seed=0, quad_m=DEFAULT_QUADRATURE_M
):
    """Closed-form limit draws for sqrt_shift under L = a B + sigma Z.

    Uses the explicit trajectory of the sqrt_shift flow; I and the
    alpha-norm integral are Simpson quadratures of 1/(2 sqrt(th0 + x0^2))
    squared and to the alpha power.
    """
    entry = get_entry("sqrt_shift")
    theta0 = check_theta(entry.model, np.atleast_1d(theta0))
    th = float(theta0[0])
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    m = int(quad_m)
    if m % 2 == 1:
        m += 1
    s = np.arange(m + 1) / m
    x0_vals = np.asarray(entry.closed_form_x0(s, theta0, x0), dtype=float)
    f = 0.5 / np.sqrt(th + x0_vals**2)
    w = _simpson_weights(m)
    info = float(w @ (f * f))
    alpha_norm = float(w @ f**alpha) ** (1.0 / alpha)
    draws = np.empty((count, 1))
    for i in range(count):
        rng = substream(seed, _CLOSED_FORM_DOMAIN, i)
        z = rng.standard_normal()
        u = sample_stable_standard(alpha, beta, rng)
        draws[i, 0] = a / math.sqrt(info) * z + sigma / info * alpha_norm * u
    return LimitLawSample(draws=draws, seed=int(seed), fine_m=m, kind="closed_form")


def write_draws_csv(sample, path):
    """Write draws as CSV, one row per draw, p columns, 17 significant digits."""
    p = sample.draws.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"s_{i + 1}" for i in range(p)])
        for row in sample.draws:
            writer.writerow([format(v, ".17g") for v in row])
