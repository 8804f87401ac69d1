"""Monte Carlo verification harness.

Two experiment modes over a ladder of (eps, n) settings:

* consistency: R independent simulate+estimate replications per ladder
  point; reports bias/RMSE per coordinate and checks that RMSE decreases
  along the ladder (up to a 1.2 Monte Carlo tolerance factor);
* limit law: R replications at the final ladder point; the rescaled errors
  (theta_hat - theta0)/eps are compared per coordinate (and, for p > 1, on
  three fixed random projections) against reference limit draws with the
  two-sample Kolmogorov-Smirnov statistic at the 1% level,
  c = 1.628 sqrt((R + M)/(R M)).

Replication r of ladder point j draws its noise from the substream
(point_seed_j, r) with point_seed_j derived from (plan.seed, j); scheduling
is a thread pool keyed by replication index, so reports are bitwise
identical for any worker count and any completion order.  Estimator
failures are recorded and excluded from the statistics; a ladder point
with more than 20% failures is flagged invalid.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimate import SingularNormalEquationsError, estimate
from .limitlaw import NotPositiveDefiniteError
from .models import NonFiniteDriftError, OutOfBoxError, get_entry, get_model
from .noise import LevySpec, substream
from .simulate import DEFAULT_SUBSTEPS, PathExplodedError, SimConfig, simulate

KS_ONE_PERCENT_COEFF = 1.628

_PROJECTION_DOMAIN = 31  # substream tag for the fixed random projections

_FAILURE_TYPES = (
    SingularNormalEquationsError,
    NotPositiveDefiniteError,
    PathExplodedError,
    NonFiniteDriftError,
    np.linalg.LinAlgError,
)


def ks_two_sample(x, y):
    """Exact two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|."""
    x = np.sort(np.asarray(x, dtype=float).reshape(-1))
    y = np.sort(np.asarray(y, dtype=float).reshape(-1))
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.abs(cdf_x - cdf_y).max())


def ks_critical_value(n, m, coefficient=KS_ONE_PERCENT_COEFF):
    """Asymptotic two-sample KS critical value c * sqrt((n + m)/(n m))."""
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be >= 1")
    return float(coefficient * np.sqrt((n + m) / (n * m)))


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one experiment run."""

    model_id: str
    theta0: np.ndarray
    x0: np.ndarray
    levy: LevySpec
    ladder: tuple  # ((eps, n), ...)
    replications: int
    substeps: int = DEFAULT_SUBSTEPS
    seed: int = 0
    method: str = "auto"
    theta_box: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float).reshape(-1))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        ladder = tuple((float(e), int(n)) for e, n in self.ladder)
        object.__setattr__(self, "ladder", ladder)
        if self.theta_box is not None:
            object.__setattr__(
                self, "theta_box", tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
            )

    def validate(self, limit_law=False):
        get_entry(self.model_id)
        if not self.ladder:
            raise ValueError("ladder must contain at least one (eps, n) point")
        for eps, n in self.ladder:
            if not (0.0 <= eps <= 1.0):
                raise ValueError(f"ladder eps must lie in [0, 1], got {eps}")
            if n < 2:
                raise ValueError(f"ladder n must be >= 2, got {n}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if limit_law:
            n_eps = [eps * n for eps, n in self.ladder]
            if any(e == 0.0 for e, _ in self.ladder):
                raise ValueError("limit-law ladders need eps > 0")
            if any(b <= a for a, b in zip(n_eps, n_eps[1:])):
                raise ValueError(
                    "limit-law ladders need n*eps strictly increasing along the ladder "
                    f"(got {n_eps})"
                )


@dataclass
class RepRecord:
    replication: int
    eps: float
    n: int
    theta_hat: np.ndarray = None
    converged: bool = False
    boundary_hit: bool = False
    contrast: float = float("nan")
    failed: bool = False
    failure: str = None


@dataclass
class LadderPointStats:
    eps: float
    n: int
    n_success: int
    n_failed: int
    invalid: bool
    bias: np.ndarray
    rmse: np.ndarray
    boundary_fraction: float
    runtime_s: float


@dataclass
class KsSummary:
    per_coordinate: np.ndarray  # (p,)
    critical_value: float
    passed_coordinates: np.ndarray  # (p,) bool
    projections: np.ndarray = None  # (3,) or None when p = 1
    passed_projections: np.ndarray = None
    limit_draw_count: int = 0

    @property
    def all_passed(self):
        ok = bool(np.all(self.passed_coordinates))
        if self.projections is not None:
            ok = ok and bool(np.all(self.passed_projections))
        return ok


@dataclass
class ExperimentReport:
    mode: str  # "consistency" or "limit_law"
    model_id: str
    theta0: np.ndarray
    ladder: tuple
    replications: int
    seed: int
    points: list
    records: list = field(default_factory=list)
    rmse_monotone: bool = None
    rescaled_errors: np.ndarray = None
    ks: KsSummary = None
    runtime_s: float = 0.0


def _point_seed(master_seed, point_index):
    ss = np.random.SeedSequence((int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(point_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_replication(plan, model, eps, n, point_seed, rep):
    config = SimConfig(
        epsilon=eps,
        n=n,
        x0=plan.x0,
        theta0=plan.theta0,
        levy=plan.levy,
        seed=point_seed,
        replication=rep,
        substeps=plan.substeps,
    )
    record = RepRecord(replication=rep, eps=eps, n=n)
    try:
        obs = simulate(config, model)
        result = estimate(obs, model, method=plan.method)
    except _FAILURE_TYPES as exc:
        record.failed = True
        record.failure = f"{type(exc).__name__}: {exc}"
        return record
    record.theta_hat = result.theta_hat
    record.converged = result.converged
    record.boundary_hit = result.boundary_hit
    record.contrast = result.contrast_value
    return record


def _run_point(plan, model, eps, n, point_index, threads):
    started = time.perf_counter()
    point_seed = _point_seed(plan.seed, point_index)
    reps = range(plan.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(
                pool.map(lambda r: _run_replication(plan, model, eps, n, point_seed, r), reps)
            )
    else:
        records = [_run_replication(plan, model, eps, n, point_seed, r) for r in reps]
    records.sort(key=lambda rec: rec.replication)
    good = [rec for rec in records if not rec.failed]
    n_failed = len(records) - len(good)
    p = plan.theta0.shape[0]
    if good:
        errors = np.vstack([rec.theta_hat for rec in good]) - plan.theta0[None, :]
        bias = errors.mean(axis=0)
        rmse = np.sqrt((errors**2).mean(axis=0))
        boundary_fraction = float(np.mean([rec.boundary_hit for rec in good]))
    else:
        bias = np.full(p, np.nan)
        rmse = np.full(p, np.nan)
        boundary_fraction = float("nan")
    stats = LadderPointStats(
        eps=eps,
        n=n,
        n_success=len(good),
        n_failed=n_failed,
        invalid=n_failed > 0.2 * plan.replications,
        bias=bias,
        rmse=rmse,
        boundary_fraction=boundary_fraction,
        runtime_s=time.perf_counter() - started,
    )
    return stats, records


def _resolve_model(plan):
    return get_model(plan.model_id, theta_box=plan.theta_box)


def run_consistency(plan, threads=1):
    """Run the consistency experiment over the whole ladder."""
    plan.validate(limit_law=False)
    model = _resolve_model(plan)
    started = time.perf_counter()
    points = []
    records = []
    for j, (eps, n) in enumerate(plan.ladder):
        stats, recs = _run_point(plan, model, eps, n, j, threads)
        points.append(stats)
        records.extend(recs)
    monotone = True
    for prev, cur in zip(points, points[1:]):
        if prev.invalid or cur.invalid or np.any(np.isnan(prev.rmse)) or np.any(np.isnan(cur.rmse)):
            monotone = False
            break
        if np.any(cur.rmse > 1.2 * prev.rmse):
            monotone = False
            break
    return ExperimentReport(
        mode="consistency",
        model_id=plan.model_id,
        theta0=plan.theta0,
        ladder=plan.ladder,
        replications=plan.replications,
        seed=plan.seed,
        points=points,
        records=records,
        rmse_monotone=monotone if len(points) > 1 else None,
        runtime_s=time.perf_counter() - started,
    )


def run_limit_law(plan, limit_sample, threads=1):
    """Run the limit-law experiment at the final ladder point.

    limit_sample must be drawn for the same (model, theta0, noise spec);
    only the dimension can be verified here.
    """
    plan.validate(limit_law=True)
    model = _resolve_model(plan)
    p = plan.theta0.shape[0]
    if limit_sample.draws.shape[1] != p:
        raise ValueError(
            f"limit draws have dimension {limit_sample.draws.shape[1]}, plan has p = {p}"
        )
    started = time.perf_counter()
    eps, n = plan.ladder[-1]
    point_index = len(plan.ladder) - 1
    stats, records = _run_point(plan, model, eps, n, point_index, threads)
    good = [rec for rec in records if not rec.failed]
    if not good:
        raise RuntimeError("all replications failed; no rescaled errors to test")
    rescaled = (np.vstack([rec.theta_hat for rec in good]) - plan.theta0[None, :]) / eps
    draws = limit_sample.draws
    crit = ks_critical_value(rescaled.shape[0], draws.shape[0])
    per_coord = np.array(
        [ks_two_sample(rescaled[:, i], draws[:, i]) for i in range(p)]
    )
    projections = None
    passed_proj = None
    if p > 1:
        rng = substream(plan.seed, _PROJECTION_DOMAIN)
        proj_stats = []
        for _ in range(3):
            direction = rng.standard_normal(p)
            direction /= np.linalg.norm(direction)
            proj_stats.append(ks_two_sample(rescaled @ direction, draws @ direction))
        projections = np.array(proj_stats)
        passed_proj = projections < crit
    ks = KsSummary(
        per_coordinate=per_coord,
        critical_value=crit,
        passed_coordinates=per_coord < crit,
        projections=projections,
        passed_projections=passed_proj,
        limit_draw_count=draws.shape[0],
    )
    return ExperimentReport(
        mode="limit_law",
        model_id=plan.model_id,
        theta0=plan.theta0,
        ladder=plan.ladder,
        replications=plan.replications,
        seed=plan.seed,
        points=[stats],
        records=records,
        rescaled_errors=rescaled,
        ks=ks,
        runtime_s=time.perf_counter() - started,
    )


def report_to_dict(report):
    """JSON-ready dict view of an ExperimentReport (records go to CSV)."""

    def _arr(a):
        return None if a is None else np.asarray(a).tolist()

    out = {
        "mode": report.mode,
        "model_id": report.model_id,
        "theta0": _arr(report.theta0),
        "ladder": [[eps, n] for eps, n in report.ladder],
        "replications": report.replications,
        "seed": report.seed,
        "rmse_monotone": report.rmse_monotone,
        "runtime_s": report.runtime_s,
        "points": [
            {
                "eps": pt.eps,
                "n": pt.n,
                "n_success": pt.n_success,
                "n_failed": pt.n_failed,
                "invalid": pt.invalid,
                "bias": _arr(pt.bias),
                "rmse": _arr(pt.rmse),
                "boundary_fraction": pt.boundary_fraction,
                "runtime_s": pt.runtime_s,
            }
            for pt in report.points
        ],
    }
    if report.rescaled_errors is not None:
        out["rescaled_errors"] = _arr(report.rescaled_errors)
    if report.ks is not None:
        out["ks"] = {
            "per_coordinate": _arr(report.ks.per_coordinate),
            "critical_value": report.ks.critical_value,
            "passed_coordinates": _arr(report.ks.passed_coordinates),
            "projections": _arr(report.ks.projections),
            "passed_projections": _arr(report.ks.passed_projections),
            "limit_draw_count": report.ks.limit_draw_count,
            "all_passed": report.ks.all_passed,
        }
    return out


def replication_rows(report):
    """Per-replication table rows for the CSV export."""
    p = report.theta0.shape[0]
    rows = []
    for rec in report.records:
        theta = rec.theta_hat if rec.theta_hat is not None else [float("nan")] * p
        rows.append(
            [rec.replication, rec.eps, rec.n]
            + [float(v) for v in theta]
            + [int(rec.converged), int(rec.boundary_hit), rec.contrast]
        )
    return rows
