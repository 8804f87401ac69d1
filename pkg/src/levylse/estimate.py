"""Least-squares drift estimation from discrete observations.

With observations X_{t_k} on t_k = k/n and noise amplitude eps, the
contrast is

    Psi(theta) = sum_k |X_{t_k} - X_{t_{k-1}} - b(X_{t_{k-1}}, theta) dt|^2 / (eps^2 dt),

dt = 1/n, and the estimator minimizes Psi over the closed parameter box.
The score

    G_i(theta) = sum_k (d_i b)(X_{t_{k-1}}, theta)^T (X_{t_k} - X_{t_{k-1}} - b dt)

satisfies grad_theta [eps^2 (Psi(theta) - Psi(theta_ref))] = -2 G(theta),
so interior minimizers are score roots.  Three routes are provided:

* estimate_closed_form_affine: exact normal equations for the affine
  catalog models (ou_affine, affine_2d);
* estimate_newton_scalar: safeguarded Newton/bisection for sqrt_shift's
  scalar root equation sum_k dX_k / sqrt(theta + X_{t_{k-1}}^2) = 1, with a
  golden-section contrast fallback when the box shows no sign change;
* estimate_general: multi-start Nelder-Mead clipped to the box (Halton
  start points), followed by a score-based Gauss-Newton polish.

The minimizer is invariant under the affine rescaling of the objective
(offsetting by Psi(theta_ref) and scaling by eps^2), which the property
tests exercise.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .models import b_on_path, check_theta, grad_on_path

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_COND_LIMIT = 1e12


class SingularNormalEquationsError(RuntimeError):
    """Normal equations numerically singular (data carry no slope signal)."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass
class EstimationResult:
    theta_hat: np.ndarray
    contrast_value: float
    method: str  # closed_form | newton_root | simplex_multistart
    iterations: int
    converged: bool
    boundary_hit: bool
    score_norm_at_solution: float
    fallback: str = None


def _effective_eps(obs, eps):
    if eps is not None:
        return float(eps)
    if obs.config is not None and obs.config.epsilon > 0.0:
        return float(obs.config.epsilon)
    return 1.0


def contrast(obs, model, theta, eps):
    """Psi(theta); requires eps > 0 and at least one increment."""
    if not eps > 0.0:
        raise ValueError(f"contrast needs eps > 0, got {eps}")
    theta = check_theta(model, theta)
    values = obs.values
    n = values.shape[0] - 1
    if n < 1:
        raise ValueError("need at least one observation increment")
    resid = np.diff(values, axis=0) - b_on_path(model, values[:-1], theta) / n
    return float(np.sum(resid * resid) * n / (eps * eps))


def contrast_difference(obs, model, theta, theta_ref, eps):
    """Phi(theta) = eps^2 (Psi(theta) - Psi(theta_ref))."""
    e2 = eps * eps
    return e2 * (contrast(obs, model, theta, eps) - contrast(obs, model, theta_ref, eps))


def score(obs, model, theta):
    """G(theta), shape (p,); eps-free."""
    theta = check_theta(model, theta)
    values = obs.values
    n = values.shape[0] - 1
    if n < 1:
        raise ValueError("need at least one observation increment")
    resid = np.diff(values, axis=0) - b_on_path(model, values[:-1], theta) / n
    grads = grad_on_path(model, values[:-1], theta)
    return np.einsum("kdp,kd->p", grads, resid)


def _clip_to_box(model, theta):
    lo, hi = model.box_lo(), model.box_hi()
    clipped = np.minimum(np.maximum(theta, lo), hi)
    return clipped, bool(np.any(clipped != theta))


def _boundary_hit(model, theta, rel=1e-9):
    for v, (lo, hi) in zip(theta, model.theta_box):
        span = hi - lo
        if v - lo <= rel * span or hi - v <= rel * span:
            return True
    return False


def _result(obs, model, theta, eps, method, iterations, converged, boundary, fallback=None):
    return EstimationResult(
        theta_hat=theta,
        contrast_value=contrast(obs, model, theta, eps),
        method=method,
        iterations=iterations,
        converged=converged,
        boundary_hit=boundary,
        score_norm_at_solution=float(np.linalg.norm(score(obs, model, theta))),
        fallback=fallback,
    )


# ---------------------------------------------------------------------------
# closed forms for the affine catalog models
# ---------------------------------------------------------------------------


def affine_normal_equations(values):
    """Gram matrix and right-hand sides of the d = 2 affine regression.

    Lambda = sum_k phi_k phi_k^T with phi_k = (1, X1_{t_{k-1}}, X2_{t_{k-1}});
    rhs[i] = n * sum_k dX_k^(i) * phi_k.  Lambda is symmetric PSD on any
    data by construction.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    x_prev = values[:-1]
    phi = np.column_stack([np.ones(n), x_prev[:, 0], x_prev[:, 1]])
    lam = phi.T @ phi
    dx = np.diff(values, axis=0)
    rhs = n * (phi.T @ dx)  # (3, 2): column i pairs with output row i
    return lam, rhs


def estimate_closed_form_affine(obs, model, eps=None):
    """Exact LSE for the affine drift families.

    ou_affine (p = 2): with T0 = X_1 - X_0, T1 = sum dX_k X_{t_{k-1}},
    m1 = mean X_{t_{k-1}}, m2 = mean X_{t_{k-1}}^2,

        th2_hat = (T1 - T0 m1) / (m2 - m1^2),   th1_hat = T0 - th2_hat m1.

    affine_2d (p = 6): per output row, (c_i, A_i1, A_i2) solves
    Lambda theta = rhs[:, i].  Estimates landing outside the box are
    clipped and flagged.
    """
    eps_eff = _effective_eps(obs, eps)
    values = obs.values
    n = values.shape[0] - 1
    if model.dim_x == 1 and model.dim_theta == 2:
        x_prev = values[:-1, 0]
        dx = np.diff(values[:, 0])
        m1 = x_prev.mean()
        m2 = float(x_prev @ x_prev) / n
        gram = np.array([[1.0, m1], [m1, m2]])
        condition = float(np.linalg.cond(gram))
        if not np.isfinite(condition) or condition > _COND_LIMIT:
            raise SingularNormalEquationsError(
                "affine normal equations are singular: no variation in X", condition
            )
        t0 = float(values[-1, 0] - values[0, 0])
        t1 = float(dx @ x_prev)
        th2 = (t1 - t0 * m1) / (m2 - m1 * m1)
        th1 = t0 - th2 * m1
        theta = np.array([th1, th2])
    elif model.dim_x == 2 and model.dim_theta == 6:
        lam, rhs = affine_normal_equations(values)
        condition = float(np.linalg.cond(lam))
        if not np.isfinite(condition) or condition > _COND_LIMIT:
            raise SingularNormalEquationsError(
                "affine normal equations are singular: no variation in X", condition
            )
        sol = np.linalg.solve(lam, rhs)  # (3, 2), column i = (c_i, A_i1, A_i2)
        theta = np.array([sol[0, 0], sol[1, 0], sol[2, 0], sol[0, 1], sol[1, 1], sol[2, 1]])
    else:
        raise ValueError("closed-form LSE exists only for the affine catalog shapes")
    theta, clipped = _clip_to_box(model, theta)
    return _result(
        obs, model, theta, eps_eff, "closed_form", 1, True, clipped or _boundary_hit(model, theta)
    )


# ---------------------------------------------------------------------------
# scalar root solver for sqrt_shift
# ---------------------------------------------------------------------------


def _golden_section(f, lo, hi, tol):
    """Golden-section minimization; returns (x, iterations)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while (b - a) > tol:
        it += 1
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if it > 200:
            break
    return 0.5 * (a + b), it


def estimate_newton_scalar(obs, model, eps=None, tol=1e-12, max_iter=100):
    """Root of F(theta) = sum_k dX_k / sqrt(theta + X_{t_{k-1}}^2) - 1 on the box.

    Newton steps F'(theta) = -(1/2) sum_k dX_k (theta + X^2)^(-3/2) are
    safeguarded by a bracketing bisection; without a sign change over the
    box the contrast is minimized by golden section instead and a boundary
    solution is flagged.
    """
    if model.dim_x != 1 or model.dim_theta != 1:
        raise ValueError("scalar root solver applies to 1-d single-parameter drift")
    eps_eff = _effective_eps(obs, eps)
    values = obs.values[:, 0]
    dx = np.diff(values)
    xsq = values[:-1] ** 2
    lo, hi = model.theta_box[0]

    def f_root(th):
        return float(np.sum(dx / np.sqrt(th + xsq))) - 1.0

    def f_prime(th):
        return -0.5 * float(np.sum(dx * (th + xsq) ** (-1.5)))

    f_lo, f_hi = f_root(lo), f_root(hi)
    if f_lo == 0.0:
        return _result(obs, model, np.array([lo]), eps_eff, "newton_root", 0, True, True)
    if f_hi == 0.0:
        return _result(obs, model, np.array([hi]), eps_eff, "newton_root", 0, True, True)
    if f_lo * f_hi > 0.0:
        # no root bracketed: fall back to direct contrast minimization
        span = hi - lo
        th, it = _golden_section(
            lambda t: contrast(obs, model, np.array([t]), eps_eff), lo, hi, tol=1e-10 * span
        )
        boundary = th - lo <= 1e-8 * span or hi - th <= 1e-8 * span
        if th - lo <= 1e-8 * span:
            th = lo
        elif hi - th <= 1e-8 * span:
            th = hi
        return _result(
            obs,
            model,
            np.array([th]),
            eps_eff,
            "newton_root",
            it,
            True,
            boundary,
            fallback="golden_section",
        )
    a, b, f_a = lo, hi, f_lo
    th = 0.5 * (a + b)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f_th = f_root(th)
        if f_th == 0.0:
            converged = True
            break
        if f_a * f_th < 0.0:
            b = th
        else:
            a, f_a = th, f_th
        d = f_prime(th)
        step_ok = d != 0.0 and math.isfinite(d)
        if step_ok:
            nxt = th - f_th / d
            step_ok = a < nxt < b
        if not step_ok:
            nxt = 0.5 * (a + b)
        if abs(nxt - th) <= tol * max(1.0, abs(th)):
            th = nxt
            converged = True
            break
        th = nxt
    theta = np.array([min(max(th, lo), hi)])
    return _result(
        obs, model, theta, eps_eff, "newton_root", it, converged, _boundary_hit(model, theta)
    )


# ---------------------------------------------------------------------------
# general box-constrained minimization
# ---------------------------------------------------------------------------


def _halton_point(index, dim):
    """Radical-inverse Halton point #index (1-based) in [0, 1)^dim."""
    primes = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)
    if dim > len(primes):
        raise ValueError("Halton start generator supports up to 10 parameters")
    point = np.empty(dim)
    for j in range(dim):
        base = primes[j]
        f, value, i = 1.0, 0.0, index
        while i > 0:
            f /= base
            value += f * (i % base)
            i //= base
        point[j] = value
    return point


def halton_starts(model, count):
    """Deterministic low-discrepancy start points spread over the box."""
    lo, hi = model.box_lo(), model.box_hi()
    return [lo + _halton_point(i, model.dim_theta) * (hi - lo) for i in range(1, count + 1)]


def _gauss_newton_polish(obs, model, theta, objective, max_iter=25):
    """Drive the score to zero by damped Gauss-Newton steps.

    Step solves (dt * sum_k g_k^T g_k) delta = G(theta) with g_k the (d, p)
    theta gradients at X_{t_{k-1}}; accepted only when the objective
    decreases and the step stays in the box.
    """
    values = obs.values
    n = values.shape[0] - 1
    f_cur = objective(theta)
    iterations = 0
    for _ in range(max_iter):
        grads = grad_on_path(model, values[:-1], theta)
        gram = np.einsum("kdi,kdj->ij", grads, grads) / n
        g = score(obs, model, theta)
        try:
            delta = np.linalg.solve(gram, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        accepted = False
        for _ in range(12):
            cand, _ = _clip_to_box(model, theta + delta)
            f_cand = objective(cand)
            if f_cand <= f_cur:
                moved = bool(np.any(cand != theta))
                theta, f_cur = cand, f_cand
                accepted = moved
                break
            delta *= 0.5
        iterations += 1
        if not accepted:
            break
        if np.linalg.norm(delta) <= 1e-14 * (1.0 + np.linalg.norm(theta)):
            break
    return theta, f_cur, iterations


def estimate_general(
    obs,
    model,
    eps=None,
    starts=8,
    polish=True,
    objective="psi",
    theta_ref=None,
    xatol=1e-9,
):
    """Multi-start Nelder-Mead over the box, then Gauss-Newton polish.

    Start points are the first `starts` Halton points of the box; simplex
    iterates are clipped to the box by the optimizer.  Ties between starts
    (contrast difference below 1e-12 relative) break toward the theta
    closest to the box center.  objective="phi" minimizes
    eps^2 (Psi - Psi(theta_ref)) instead of Psi; both must return the same
    minimizer up to solver precision.
    """
    eps_eff = _effective_eps(obs, eps)
    if objective == "psi":
        fun = lambda th: contrast(obs, model, th, eps_eff)
    elif objective == "phi":
        if theta_ref is None:
            raise ValueError('objective "phi" needs theta_ref')
        ref_value = contrast(obs, model, check_theta(model, theta_ref), eps_eff)
        e2 = eps_eff * eps_eff
        fun = lambda th: e2 * (contrast(obs, model, th, eps_eff) - ref_value)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    bounds = list(model.theta_box)
    center = model.box_center()
    best = None  # (f, dist_to_center, theta, iterations, success)
    total_iter = 0
    any_success = False
    for start in halton_starts(model, starts):
        f0 = fun(start)
        res = minimize(
            fun,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "xatol": xatol,
                "fatol": 1e-10 * (1.0 + abs(f0)),
                "maxiter": 400 * model.dim_theta,
                "maxfev": 400 * model.dim_theta * 2,
            },
        )
        theta_i = np.asarray(res.x, dtype=float)
        f_i = float(res.fun)
        dist = float(np.linalg.norm(theta_i - center))
        total_iter += int(res.nit)
        any_success = any_success or bool(res.success)
        key = (f_i, dist)
        if best is None:
            best = (key, theta_i)
        else:
            (f_b, dist_b), _ = best
            scale = 1e-12 * (1.0 + abs(f_b))
            if f_i < f_b - scale or (abs(f_i - f_b) <= scale and dist < dist_b):
                best = (key, theta_i)
    (f_best, _), theta = best
    fallback = None
    if polish:
        theta, f_best, polish_iter = _gauss_newton_polish(obs, model, theta, fun)
        total_iter += polish_iter
    theta, _ = _clip_to_box(model, theta)
    result = _result(
        obs,
        model,
        theta,
        eps_eff,
        "simplex_multistart",
        total_iter,
        any_success,
        _boundary_hit(model, theta),
        fallback=fallback,
    )
    return result


def _catalog_route(model):
    # route on the drift callable itself, not the (d, p) shape: a user model
    # with a matching shape must not silently get a formula meant for the
    # catalog drift.
    from .models import CATALOG

    if model.b is CATALOG["ou_affine"].model.b or model.b is CATALOG["affine_2d"].model.b:
        return "closed_form"
    if model.b is CATALOG["sqrt_shift"].model.b:
        return "newton"
    return "simplex"


def estimate(obs, model, method="auto", eps=None, **kwargs):
    """Dispatch on estimator route.

    auto: closed form for the catalog affine drifts, scalar Newton for the
    catalog sqrt-shift drift, simplex for everything else.  The specialized
    routes assume those exact drift forms; request them explicitly only for
    models that share the form.
    """
    if method == "auto":
        method = _catalog_route(model)
    if method == "closed_form":
        return estimate_closed_form_affine(obs, model, eps=eps)
    if method == "newton":
        return estimate_newton_scalar(obs, model, eps=eps, **kwargs)
    if method == "simplex":
        return estimate_general(obs, model, eps=eps, **kwargs)
    raise ValueError(f"unknown method {method!r}")
