"""Parametric drift models b(x, theta) and the built-in model catalog.

A drift model packages b : R^d x Theta -> R^d together with its theta
gradient (d x p), optionally the theta Hessian (d x p x p), a compact
parameter box Theta (closure of an open bounded convex set), and a declared
constant K for the Lipschitz/linear-growth conditions

    |b(x, th) - b(y, th)| <= K |x - y|,    |b(x, th)| <= K (1 + |x|).

Catalog entries (id strings are a stable interface):

* ``ou_affine``   d=1, p=2,  b(x) = th1 + th2 x            (closed-form LSE)
* ``sqrt_shift``  d=1, p=1,  b(x) = sqrt(th + x^2), th > 0  (scalar root LSE)
* ``affine_2d``   d=2, p=6,  b(x) = C + A x, theta = (c1, A11, A12, c2, A21, A22)

Catalog model callables are vectorized in x (ufunc style): for d = 1 they
accept a scalar or an (m,) array, for d > 1 a (d,) point or an (m, d) batch.
User models may be pointwise-only; set vectorized=False and the helpers
below fall back to a Python loop.
"""

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import expm


class OutOfBoxError(ValueError):
    """Parameter vector lies outside the model's closed theta box."""


class NonFiniteDriftError(ArithmeticError):
    """Drift or gradient evaluation produced a non-finite value."""


@dataclass(frozen=True)
class DriftModel:
    """Immutable drift specification; see module docstring for conventions."""

    dim_x: int
    dim_theta: int
    theta_box: tuple
    b: Callable
    grad_theta_b: Callable
    hess_theta_b: Callable = None
    lipschitz_K: float = None
    vectorized: bool = False

    def __post_init__(self):
        if self.dim_x < 1 or self.dim_theta < 1:
            raise ValueError("dim_x and dim_theta must be >= 1")
        box = tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
        if len(box) != self.dim_theta:
            raise ValueError("theta_box must have one (lo, hi) pair per parameter")
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid box interval ({lo}, {hi})")
        object.__setattr__(self, "theta_box", box)

    def box_center(self):
        return np.array([(lo + hi) / 2.0 for lo, hi in self.theta_box])

    def box_lo(self):
        return np.array([lo for lo, _ in self.theta_box])

    def box_hi(self):
        return np.array([hi for _, hi in self.theta_box])


def check_theta(model, theta):
    """Validate theta against the closed box; returns theta as (p,) floats."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != model.dim_theta:
        raise OutOfBoxError(
            f"theta has {theta.shape[0]} entries, model expects {model.dim_theta}"
        )
    for i, (lo, hi) in enumerate(model.theta_box):
        if not (lo <= theta[i] <= hi):
            raise OutOfBoxError(
                f"theta[{i}] = {theta[i]} outside box [{lo}, {hi}]"
            )
    return theta


def _as_points(x, d):
    """Normalize x to an (m, d) batch; returns (batch, was_single_point)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if d == 1:
            return x.reshape(-1, 1), False
        return x.reshape(1, d), True
    return x, False


def eval_b(model, x, theta):
    """b(x, theta) at a single point x; returns shape (d,)."""
    theta = check_theta(model, theta)
    x = np.asarray(x, dtype=float).reshape(model.dim_x)
    if model.vectorized and model.dim_x == 1:
        out = np.atleast_1d(np.asarray(model.b(float(x[0]), theta), dtype=float))
    else:
        out = np.asarray(model.b(x, theta), dtype=float).reshape(model.dim_x)
    if not np.all(np.isfinite(out)):
        raise NonFiniteDriftError(f"b({x}, {theta}) is not finite: {out}")
    return out


def eval_grad_theta(model, x, theta):
    """grad_theta b(x, theta) at a single point; returns shape (d, p)."""
    theta = check_theta(model, theta)
    x = np.asarray(x, dtype=float).reshape(model.dim_x)
    if model.vectorized and model.dim_x == 1:
        out = np.asarray(model.grad_theta_b(float(x[0]), theta), dtype=float)
        out = out.reshape(1, model.dim_theta)
    else:
        out = np.asarray(model.grad_theta_b(x, theta), dtype=float)
        out = out.reshape(model.dim_x, model.dim_theta)
    if not np.all(np.isfinite(out)):
        raise NonFiniteDriftError(f"grad_theta_b({x}, {theta}) is not finite")
    return out


def b_on_path(model, values, theta):
    """Evaluate b along an (m, d) array of states; returns (m, d)."""
    theta = check_theta(model, theta)
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    if model.vectorized:
        if model.dim_x == 1:
            out = np.asarray(model.b(values[:, 0], theta), dtype=float).reshape(m, 1)
        else:
            out = np.asarray(model.b(values, theta), dtype=float).reshape(m, model.dim_x)
    else:
        out = np.empty((m, model.dim_x))
        for j in range(m):
            out[j] = np.asarray(model.b(values[j], theta), dtype=float).reshape(model.dim_x)
    if not np.all(np.isfinite(out)):
        raise NonFiniteDriftError("drift evaluation along path produced non-finite values")
    return out


def grad_on_path(model, values, theta):
    """Evaluate grad_theta b along an (m, d) array; returns (m, d, p)."""
    theta = check_theta(model, theta)
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    d, p = model.dim_x, model.dim_theta
    if model.vectorized:
        if d == 1:
            out = np.asarray(model.grad_theta_b(values[:, 0], theta), dtype=float)
            out = out.reshape(m, 1, p)
        else:
            out = np.asarray(model.grad_theta_b(values, theta), dtype=float).reshape(m, d, p)
    else:
        out = np.empty((m, d, p))
        for j in range(m):
            out[j] = np.asarray(model.grad_theta_b(values[j], theta), dtype=float).reshape(d, p)
    if not np.all(np.isfinite(out)):
        raise NonFiniteDriftError("gradient evaluation along path produced non-finite values")
    return out


def fd_grad_theta(model, x, theta, h=1e-6):
    """Central finite-difference theta gradient, for validating user models."""
    theta = check_theta(model, theta)
    p = model.dim_theta
    out = np.empty((model.dim_x, p))
    for i in range(p):
        step = h * max(1.0, abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        lo, hi = model.theta_box[i]
        # keep both probes inside the closed box
        if up[i] > hi or dn[i] < lo:
            shift = min(hi - theta[i], theta[i] - lo)
            step = min(step, shift) if shift > 0 else step
            up[i] = min(theta[i] + step, hi)
            dn[i] = max(theta[i] - step, lo)
        out[:, i] = (eval_b(model, x, up) - eval_b(model, x, dn)) / (up[i] - dn[i])
    return out


def lipschitz_witness(model, theta, x_low, x_high, pairs=10_000, rng=None):
    """Empirical sup of |b(x)-b(y)| / |x-y| over sampled pairs in a box.

    A sampled lower witness for the declared lipschitz_K; the declared
    constant must dominate it for the growth assumptions to be plausible.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    theta = check_theta(model, theta)
    d = model.dim_x
    lo = np.broadcast_to(np.asarray(x_low, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(x_high, dtype=float), (d,))
    x = rng.uniform(lo, hi, size=(pairs, d))
    y = rng.uniform(lo, hi, size=(pairs, d))
    keep = np.linalg.norm(x - y, axis=1) > 1e-12
    x, y = x[keep], y[keep]
    bx = b_on_path(model, x, theta)
    by = b_on_path(model, y, theta)
    ratio = np.linalg.norm(bx - by, axis=1) / np.linalg.norm(x - y, axis=1)
    return float(ratio.max())


@dataclass(frozen=True)
class IdentifiabilityEntry:
    candidate: np.ndarray
    max_diff: float
    is_theta0: bool
    separated: bool


@dataclass(frozen=True)
class IdentifiabilityReport:
    theta0: np.ndarray
    grid: np.ndarray
    entries: tuple

    @property
    def all_separated(self):
        return all(e.separated for e in self.entries if not e.is_theta0)


def check_identifiability_grid(model, theta0, x0_path, grid, candidates, tol=1e-10):
    """Probe sup_t |b(x0(t), theta) - b(x0(t), theta0)| over grid times.

    x0_path is a callable t -> state (or an object with an `at` method,
    e.g. a solved deterministic path).  A candidate with max_diff <= tol is
    flagged as not separated from theta0 along this trajectory, i.e. the
    identifiability condition fails for that pair.
    """
    theta0 = check_theta(model, theta0)
    grid = np.asarray(grid, dtype=float)
    at = x0_path.at if hasattr(x0_path, "at") else x0_path
    states = np.asarray([np.asarray(at(t), dtype=float).reshape(model.dim_x) for t in grid])
    b0 = b_on_path(model, states, theta0)
    entries = []
    for cand in candidates:
        cand = check_theta(model, cand)
        diff = b_on_path(model, states, cand) - b0
        max_diff = float(np.linalg.norm(diff, axis=1).max())
        is_theta0 = bool(np.array_equal(cand, theta0))
        entries.append(
            IdentifiabilityEntry(
                candidate=cand,
                max_diff=max_diff,
                is_theta0=is_theta0,
                separated=max_diff > tol,
            )
        )
    return IdentifiabilityReport(theta0=theta0, grid=grid, entries=tuple(entries))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _ou_b(x, th):
    return th[0] + th[1] * x


def _ou_grad(x, th):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.array([1.0, float(x)])
    return np.stack([np.ones_like(x), x], axis=-1)


def _ou_hess(x, th):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.zeros((2, 2))
    return np.zeros(x.shape + (2, 2))


def _ou_x0(t, theta0, x0):
    """x0 e^(th2 t) + th1 (e^(th2 t) - 1)/th2, linear when th2 = 0."""
    t = np.asarray(t, dtype=float)
    th1, th2 = float(theta0[0]), float(theta0[1])
    x0 = float(np.asarray(x0).reshape(-1)[0])
    if th2 == 0.0:
        return x0 + th1 * t
    return x0 * np.exp(th2 * t) + th1 * np.expm1(th2 * t) / th2


def _sqrt_shift_b(x, th):
    return np.sqrt(th[0] + x * x)


def _sqrt_shift_grad(x, th):
    x = np.asarray(x, dtype=float)
    g = 0.5 / np.sqrt(th[0] + x * x)
    if x.ndim == 0:
        return np.array([float(g)])
    return g[..., None]


def _sqrt_shift_hess(x, th):
    x = np.asarray(x, dtype=float)
    h = -0.25 * (th[0] + x * x) ** (-1.5)
    if x.ndim == 0:
        return np.array([[float(h)]])
    return h[..., None, None]


def _sqrt_shift_x0(t, theta0, x0):
    """Explicit flow of x' = sqrt(th + x^2): with c = x0 + sqrt(th + x0^2),
    x(t) = (c^2 e^(2t) - th) / (2 c e^t)."""
    t = np.asarray(t, dtype=float)
    th = float(np.asarray(theta0).reshape(-1)[0])
    x0 = float(np.asarray(x0).reshape(-1)[0])
    c = x0 + np.sqrt(th + x0 * x0)
    e = np.exp(t)
    return (c * c * e * e - th) / (2.0 * c * e)


def _affine2d_unpack(th):
    c = np.array([th[0], th[3]])
    a = np.array([[th[1], th[2]], [th[4], th[5]]])
    return c, a


def _affine2d_b(x, th):
    c, a = _affine2d_unpack(th)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return c + a @ x
    return c + x @ a.T


def _affine2d_grad(x, th):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    m = pts.shape[0]
    g = np.zeros((m, 2, 6))
    g[:, 0, 0] = 1.0
    g[:, 0, 1] = pts[:, 0]
    g[:, 0, 2] = pts[:, 1]
    g[:, 1, 3] = 1.0
    g[:, 1, 4] = pts[:, 0]
    g[:, 1, 5] = pts[:, 1]
    return g[0] if single else g


def _affine2d_hess(x, th):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.zeros((2, 6, 6))
    return np.zeros((x.shape[0], 2, 6, 6))


def _affine2d_x0(t, theta0, x0):
    """Flow of x' = C + A x via the augmented-matrix exponential
    expm([[A, C], [0, 0]] t) = [[e^(At), int_0^t e^(A(t-s)) C ds], [0, 1]]."""
    c, a = _affine2d_unpack(np.asarray(theta0, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(2)
    m = np.zeros((3, 3))
    m[:2, :2] = a
    m[:2, 2] = c
    t = np.asarray(t, dtype=float)
    single = t.ndim == 0
    ts = np.atleast_1d(t)
    out = np.empty((ts.shape[0], 2))
    for j, tj in enumerate(ts):
        e = expm(m * tj)
        out[j] = e[:2, :2] @ x0 + e[:2, 2]
    return out[0] if single else out


@dataclass(frozen=True)
class ModelCatalogEntry:
    model_id: str
    model: DriftModel
    closed_form_x0: Callable = None
    closed_form_lse: bool = False


CATALOG = {
    "ou_affine": ModelCatalogEntry(
        model_id="ou_affine",
        model=DriftModel(
            dim_x=1,
            dim_theta=2,
            theta_box=((-5.0, 5.0), (-5.0, 5.0)),
            b=_ou_b,
            grad_theta_b=_ou_grad,
            hess_theta_b=_ou_hess,
            lipschitz_K=5.0,
            vectorized=True,
        ),
        closed_form_x0=_ou_x0,
        closed_form_lse=True,
    ),
    "sqrt_shift": ModelCatalogEntry(
        model_id="sqrt_shift",
        model=DriftModel(
            dim_x=1,
            dim_theta=1,
            theta_box=((0.1, 5.0),),
            b=_sqrt_shift_b,
            grad_theta_b=_sqrt_shift_grad,
            hess_theta_b=_sqrt_shift_hess,
            lipschitz_K=2.3,  # Lip constant 1, growth sqrt(5) < 2.3
            vectorized=True,
        ),
        closed_form_x0=_sqrt_shift_x0,
        closed_form_lse=False,
    ),
    "affine_2d": ModelCatalogEntry(
        model_id="affine_2d",
        model=DriftModel(
            dim_x=2,
            dim_theta=6,
            theta_box=tuple(((-5.0, 5.0),) * 6),
            b=_affine2d_b,
            grad_theta_b=_affine2d_grad,
            hess_theta_b=_affine2d_hess,
            lipschitz_K=12.0,
            vectorized=True,
        ),
        closed_form_x0=_affine2d_x0,
        closed_form_lse=True,
    ),
}


def get_entry(model_id):
    if model_id not in CATALOG:
        raise KeyError(f"unknown model id {model_id!r}; catalog has {sorted(CATALOG)}")
    return CATALOG[model_id]


def get_model(model_id, theta_box=None):
    """Fetch a catalog model, optionally overriding the parameter box."""
    entry = get_entry(model_id)
    model = entry.model
    if theta_box is not None:
        model = replace(model, theta_box=tuple(tuple(p) for p in theta_box))
    return model
