"""Command-line front end.

Subcommands: simulate, estimate, experiment, limit-dist.  Every command is
driven by a flat key = value config file (dotted keys, '#' comments) plus
the flags --config PATH, --out DIR, --seed N (override), --threads N (or
env LEVY_LSE_THREADS).  All runs are deterministic given the config and
seed.  Outputs are written atomically (temp file + rename):

    simulate    -> observations.csv   header k,t,x_1..x_d, row 0 = (0, 0, x0)
    estimate    -> estimate.json
    experiment  -> report.json + replications.csv
    limit-dist  -> limit_draws.csv

Exit codes: 0 success, 2 validation/config error, 3 numerical
precondition failure (e.g. a singular information matrix), 4 IO error.
"""

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .estimate import SingularNormalEquationsError, estimate
from .harness import ExperimentPlan, replication_rows, report_to_dict, run_consistency, run_limit_law
from .limitlaw import (
    DEFAULT_FINE_M,
    NotPositiveDefiniteError,
    sample_limit_closed_form_sqrt_shift,
    sample_limit_distribution,
    write_draws_csv,
)
from .models import NonFiniteDriftError, OutOfBoxError, get_entry, get_model
from .noise import CompoundPoisson, LevySpec, NoiseSpecError, Stable
from .ode import BlowUpError, solve_x0
from .simulate import (
    DEFAULT_SUBSTEPS,
    PathExplodedError,
    SimConfig,
    observations_from_values,
    simulate,
)

THREADS_ENV_VAR = "LEVY_LSE_THREADS"


class ConfigError(ValueError):
    """Config file is malformed or has invalid/unknown fields."""


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------


def _parse_atom(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text, origin="<config>"):
    """Parse flat 'dotted.key = value' lines into a dict.

    Comma-separated values parse to lists; '#' starts a comment.
    """
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{origin}:{lineno}: empty key or value in {raw!r}")
        if key in cfg:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        if "," in value:
            cfg[key] = [_parse_atom(v) for v in value.split(",")]
        else:
            cfg[key] = _parse_atom(value)
    return cfg


def parse_config_file(path):
    with open(path, "r") as fh:
        text = fh.read()
    return parse_config_text(text, origin=str(path))


def _take(cfg, used, key, default=None, required=False):
    used.add(key)
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config field {key!r}")
        return default
    return cfg[key]


def _as_float(key, value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"field {key!r} must be a number, got {value!r}")


def _as_int(key, value):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    raise ConfigError(f"field {key!r} must be an integer, got {value!r}")


def _as_float_list(key, value):
    items = value if isinstance(value, list) else [value]
    return [_as_float(key, v) for v in items]


def _check_unknown(cfg, used, command):
    unknown = sorted(set(cfg) - used)
    if unknown:
        raise ConfigError(f"unknown config fields for {command}: {', '.join(unknown)}")


def _levy_from_cfg(cfg, used, dim):
    a = _take(cfg, used, "levy.a", default=0.0)
    sigma_raw = _take(cfg, used, "levy.sigma", default=0.0)
    a_vec = np.asarray(_as_float_list("levy.a", a))
    if a_vec.size == 1 and dim > 1:
        a_vec = np.full(dim, a_vec[0])
    if isinstance(sigma_raw, str):
        try:
            rows = [
                [float(v) for v in row.split(",")] for row in sigma_raw.split(";")
            ]
            sigma = np.asarray(rows)
        except ValueError as exc:
            raise ConfigError(f"field 'levy.sigma' matrix is malformed: {sigma_raw!r}") from exc
    else:
        vals = _as_float_list("levy.sigma", sigma_raw)
        if len(vals) == 1:
            sigma = vals[0]
        elif len(vals) == dim:
            sigma = np.diag(vals)
        else:
            raise ConfigError(
                f"field 'levy.sigma' must be scalar, {dim} diagonal entries, or ';' rows"
            )
    jumps = []
    alpha = _take(cfg, used, "levy.stable.alpha")
    beta = _take(cfg, used, "levy.stable.beta", default=0.0)
    scale = _take(cfg, used, "levy.stable.scale", default=1.0)
    if alpha is not None:
        try:
            jumps.append(
                Stable(
                    alpha=_as_float("levy.stable.alpha", alpha),
                    beta=_as_float("levy.stable.beta", beta),
                    scale=_as_float("levy.stable.scale", scale),
                )
            )
        except NoiseSpecError as exc:
            raise ConfigError(f"field 'levy.stable.*' is invalid: {exc}") from exc
    rate = _take(cfg, used, "levy.cp.rate")
    jump_dist = _take(cfg, used, "levy.cp.jump", default="normal")
    jump_params = _take(cfg, used, "levy.cp.params", default=[0.0, 1.0])
    if rate is not None:
        try:
            jumps.append(
                CompoundPoisson(
                    rate=_as_float("levy.cp.rate", rate),
                    jump_dist=str(jump_dist),
                    jump_params=tuple(_as_float_list("levy.cp.params", jump_params)),
                )
            )
        except NoiseSpecError as exc:
            raise ConfigError(f"field 'levy.cp.*' is invalid: {exc}") from exc
    try:
        return LevySpec(a=a_vec, sigma=sigma, jump_part=tuple(jumps), dim=dim)
    except NoiseSpecError as exc:
        raise ConfigError(f"noise spec is invalid: {exc}") from exc


def _box_from_cfg(cfg, used, p):
    raw = _take(cfg, used, "box")
    if raw is None:
        return None
    items = raw if isinstance(raw, list) else [raw]
    box = []
    for item in items:
        if not isinstance(item, str) or ":" not in item:
            raise ConfigError(f"field 'box' entries must look like 'lo:hi', got {item!r}")
        lo, _, hi = item.partition(":")
        try:
            box.append((float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"field 'box' entry {item!r} is not numeric") from exc
    if len(box) != p:
        raise ConfigError(f"field 'box' needs {p} 'lo:hi' pairs, got {len(box)}")
    return tuple(box)


def _ladder_from_cfg(cfg, used):
    raw = _take(cfg, used, "ladder", required=True)
    items = raw if isinstance(raw, list) else [raw]
    ladder = []
    for item in items:
        if not isinstance(item, str) or ":" not in item:
            raise ConfigError(f"field 'ladder' entries must look like 'eps:n', got {item!r}")
        eps, _, n = item.partition(":")
        try:
            ladder.append((float(eps), int(n)))
        except ValueError as exc:
            raise ConfigError(f"field 'ladder' entry {item!r} is not 'float:int'") from exc
    return tuple(ladder)


def _theta0_from_cfg(cfg, used, model):
    theta0 = np.asarray(_as_float_list("theta0", _take(cfg, used, "theta0", required=True)))
    if theta0.size != model.dim_theta:
        raise ConfigError(
            f"field 'theta0' needs {model.dim_theta} entries, got {theta0.size}"
        )
    return theta0


def _x0_from_cfg(cfg, used, model):
    x0 = np.asarray(_as_float_list("x0", _take(cfg, used, "x0", required=True)))
    if x0.size != model.dim_x:
        raise ConfigError(f"field 'x0' needs {model.dim_x} entries, got {x0.size}")
    return x0


# ---------------------------------------------------------------------------
# atomic output helpers
# ---------------------------------------------------------------------------


def _atomic_write(path, write_fn):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _write_observations_csv(path, obs):
    d = obs.values.shape[1]

    def write(fh):
        writer = csv.writer(fh)
        writer.writerow(["k", "t"] + [f"x_{i + 1}" for i in range(d)])
        for k in range(obs.values.shape[0]):
            writer.writerow(
                [k, format(obs.times[k], ".17g")]
                + [format(v, ".17g") for v in obs.values[k]]
            )

    return _atomic_write(path, write)


def _write_json(path, payload):
    return _atomic_write(path, lambda fh: json.dump(payload, fh, indent=2, sort_keys=True))


def read_observations_csv(path, expected_dim=None):
    """Read an observations CSV back into an ObservationSet.

    Validates the header shape, the integer index column, and that times
    sit within one ulp of k/n on the uniform grid.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty observations file") from None
        rows = [row for row in reader if row]
    d = len(header) - 2
    if d < 1 or header[0] != "k" or header[1] != "t" or header[2:] != [
        f"x_{i + 1}" for i in range(d)
    ]:
        raise ConfigError(f"{path}: header must be k,t,x_1..x_d, got {header}")
    if expected_dim is not None and d != expected_dim:
        raise ConfigError(f"{path}: has {d} state columns, model expects {expected_dim}")
    if len(rows) < 2:
        raise ConfigError(f"{path}: need at least rows k = 0 and k = 1")
    n = len(rows) - 1
    times = np.empty(n + 1)
    values = np.empty((n + 1, d))
    for i, row in enumerate(rows):
        if len(row) != d + 2:
            raise ConfigError(f"{path}: row {i + 2} has {len(row)} fields, expected {d + 2}")
        try:
            k = int(row[0])
            times[i] = float(row[1])
            values[i] = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ConfigError(f"{path}: row {i + 2} is not numeric: {row}") from exc
        if k != i:
            raise ConfigError(f"{path}: row {i + 2} has index k = {k}, expected {i}")
    if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
        raise ConfigError(f"{path}: observations must be finite")
    ref = np.arange(n + 1) / n
    if np.any(np.abs(times - ref) > np.spacing(np.maximum(ref, 1.0))):
        raise ConfigError(f"{path}: times are not the uniform grid k/n (within one ulp)")
    return observations_from_values(values, times=ref)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _threads_from(args):
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"env {THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
    return 1


def _seed_from(cfg, used, args):
    seed = _take(cfg, used, "seed", default=0)
    seed = _as_int("seed", seed)
    if args.seed is not None:
        seed = int(args.seed)
    return seed


def cmd_simulate(args):
    cfg = parse_config_file(args.config)
    used = set()
    model_id = _take(cfg, used, "model", required=True)
    entry = get_entry(model_id)
    model = entry.model
    theta0 = _theta0_from_cfg(cfg, used, model)
    x0 = _x0_from_cfg(cfg, used, model)
    epsilon = _as_float("epsilon", _take(cfg, used, "epsilon", required=True))
    n = _as_int("n", _take(cfg, used, "n", required=True))
    substeps = _as_int("substeps", _take(cfg, used, "substeps", default=DEFAULT_SUBSTEPS))
    replication = _as_int("replication", _take(cfg, used, "replication", default=0))
    seed = _seed_from(cfg, used, args)
    levy = _levy_from_cfg(cfg, used, model.dim_x)
    _check_unknown(cfg, used, "simulate")
    try:
        config = SimConfig(
            epsilon=epsilon,
            n=n,
            x0=x0,
            theta0=theta0,
            levy=levy,
            seed=seed,
            replication=replication,
            substeps=substeps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    obs = simulate(config, model)
    out = _write_observations_csv(Path(args.out) / "observations.csv", obs)
    print(f"wrote {out}")
    return 0


def cmd_estimate(args):
    cfg = parse_config_file(args.config)
    used = set()
    model_id = _take(cfg, used, "model", required=True)
    obs_path = _take(cfg, used, "observations", required=True)
    method = _take(cfg, used, "method", default="auto")
    epsilon = _take(cfg, used, "epsilon")
    entry = get_entry(model_id)
    box = _box_from_cfg(cfg, used, entry.model.dim_theta)
    _seed_from(cfg, used, args)  # accepted for uniformity; estimation is deterministic
    _check_unknown(cfg, used, "estimate")
    model = get_model(model_id, theta_box=box)
    obs = read_observations_csv(obs_path, expected_dim=model.dim_x)
    eps = None if epsilon is None else _as_float("epsilon", epsilon)
    result = estimate(obs, model, method=method, eps=eps)
    payload = {
        "model": model_id,
        "method": result.method,
        "theta_hat": [float(v) for v in result.theta_hat],
        "contrast_value": result.contrast_value,
        "iterations": result.iterations,
        "converged": result.converged,
        "boundary_hit": result.boundary_hit,
        "score_norm_at_solution": result.score_norm_at_solution,
        "fallback": result.fallback,
        "n": obs.n,
    }
    out = _write_json(Path(args.out) / "estimate.json", payload)
    print(f"wrote {out}")
    return 0


def _limit_sample_from_cfg(cfg, used, entry, theta0, x0, levy, seed):
    count = _as_int("limit.count", _take(cfg, used, "limit.count", default=10_000))
    fine_m = _as_int("limit.fine_m", _take(cfg, used, "limit.fine_m", default=DEFAULT_FINE_M))
    kind = _take(cfg, used, "limit.kind", default="pathwise")
    ode_m = _as_int("limit.ode_m", _take(cfg, used, "limit.ode_m", default=10_000))
    if kind == "pathwise":
        x0_path = solve_x0(entry, theta0, x0, m=ode_m)
        return sample_limit_distribution(
            entry.model, x0_path, theta0, levy, count=count, fine_m=fine_m, seed=seed
        )
    if kind == "closed_form":
        if entry.model_id != "sqrt_shift":
            raise ConfigError("limit.kind = closed_form is available only for sqrt_shift")
        if levy.sigma.shape != (1, 1) or len(levy.jump_part) != 1 or np.any(levy.a):
            raise ConfigError(
                "closed-form limit draws need levy = Brownian (scalar sigma) + one stable part"
            )
        stable = levy.jump_part[0]
        if not isinstance(stable, Stable):
            raise ConfigError("closed-form limit draws need a stable jump part")
        return sample_limit_closed_form_sqrt_shift(
            theta0=theta0,
            x0=x0,
            a=float(levy.sigma[0, 0]),
            sigma=stable.scale,
            alpha=stable.alpha,
            beta=stable.beta,
            count=count,
            seed=seed,
            quad_m=fine_m,
        )
    raise ConfigError(f"field 'limit.kind' must be pathwise or closed_form, got {kind!r}")


def cmd_experiment(args):
    cfg = parse_config_file(args.config)
    used = set()
    mode = _take(cfg, used, "mode", required=True)
    if mode not in ("consistency", "limit_law"):
        raise ConfigError(f"field 'mode' must be consistency or limit_law, got {mode!r}")
    model_id = _take(cfg, used, "model", required=True)
    entry = get_entry(model_id)
    model = entry.model
    theta0 = _theta0_from_cfg(cfg, used, model)
    x0 = _x0_from_cfg(cfg, used, model)
    ladder = _ladder_from_cfg(cfg, used)
    replications = _as_int("replications", _take(cfg, used, "replications", required=True))
    substeps = _as_int("substeps", _take(cfg, used, "substeps", default=DEFAULT_SUBSTEPS))
    method = _take(cfg, used, "method", default="auto")
    box = _box_from_cfg(cfg, used, model.dim_theta)
    seed = _seed_from(cfg, used, args)
    levy = _levy_from_cfg(cfg, used, model.dim_x)
    threads = _threads_from(args)
    plan = ExperimentPlan(
        model_id=model_id,
        theta0=theta0,
        x0=x0,
        levy=levy,
        ladder=ladder,
        replications=replications,
        substeps=substeps,
        seed=seed,
        method=method,
        theta_box=box,
    )
    if mode == "consistency":
        _check_unknown(cfg, used, "experiment")
        try:
            plan.validate(limit_law=False)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        report = run_consistency(plan, threads=threads)
    else:
        limit_sample = None
        try:
            plan.validate(limit_law=True)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        limit_sample = _limit_sample_from_cfg(cfg, used, entry, theta0, x0, levy, seed)
        _check_unknown(cfg, used, "experiment")
        report = run_limit_law(plan, limit_sample, threads=threads)
    out_dir = Path(args.out)
    report_path = _write_json(out_dir / "report.json", report_to_dict(report))
    rows = replication_rows(report)
    p = theta0.shape[0]

    def write_reps(fh):
        writer = csv.writer(fh)
        writer.writerow(
            ["replication", "eps", "n"]
            + [f"theta_hat_{i + 1}" for i in range(p)]
            + ["converged", "boundary_hit", "contrast"]
        )
        for row in rows:
            rep, eps, n = row[0], row[1], row[2]
            writer.writerow(
                [rep, format(eps, ".17g"), n]
                + [format(v, ".17g") for v in row[3 : 3 + p]]
                + [row[3 + p], row[4 + p], format(row[5 + p], ".17g")]
            )

    reps_path = _atomic_write(out_dir / "replications.csv", write_reps)
    print(f"wrote {report_path}")
    print(f"wrote {reps_path}")
    return 0


def cmd_limit_dist(args):
    cfg = parse_config_file(args.config)
    used = set()
    model_id = _take(cfg, used, "model", required=True)
    entry = get_entry(model_id)
    model = entry.model
    theta0 = _theta0_from_cfg(cfg, used, model)
    x0 = _x0_from_cfg(cfg, used, model)
    seed = _seed_from(cfg, used, args)
    levy = _levy_from_cfg(cfg, used, model.dim_x)
    cfg_alias = dict(cfg)
    for key in ("count", "fine_m", "kind", "ode_m"):
        if key in cfg_alias:
            cfg_alias[f"limit.{key}"] = cfg_alias.pop(key)
            used.add(key)
    sample = _limit_sample_from_cfg(cfg_alias, used, entry, theta0, x0, levy, seed)
    _check_unknown(cfg, used, "limit-dist")
    out = Path(args.out) / "limit_draws.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    write_draws_csv(sample, tmp)
    os.replace(tmp, out)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="levy-lse",
        description="Drift estimation for small-noise Levy-driven SDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("simulate", cmd_simulate),
        ("estimate", cmd_estimate),
        ("experiment", cmd_experiment),
        ("limit-dist", cmd_limit_dist),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to key = value config file")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help=f"worker threads (default: ${THREADS_ENV_VAR} or 1)",
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (
        NotPositiveDefiniteError,
        SingularNormalEquationsError,
        BlowUpError,
        PathExplodedError,
        NonFiniteDriftError,
    ) as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, NoiseSpecError, OutOfBoxError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"invalid configuration: {msg}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


def console_entry():
    raise SystemExit(main())
